#include "shelfrec/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "shelfrec/csv.hpp"

namespace shelfrec::ingest {

namespace {

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

struct ScanKey {
    DisplayId display;
    TimePoint ts;
    Phase phase;
    auto operator<=>(const ScanKey&) const = default;
};

struct PendingScan {
    StoreId store;
    std::map<ProductId, long long> counts;
};

}  // namespace

Parsed<ScanEvent> parse_scan_log(std::string_view text) {
    Parsed<ScanEvent> out;
    auto table = csv::read_string(text);
    const auto c_store = table.require_column("store_id");
    const auto c_display = table.require_column("display_id");
    const auto c_ts = table.require_column("scanned_datetime");
    const auto c_phase = table.require_column("phase");
    const auto c_product = table.require_column("product_id");
    const auto c_count = table.require_column("count");

    std::map<ScanKey, PendingScan> scans;
    std::map<DisplayId, StoreId> display_store;

    for (const auto& row : table.rows) {
        auto fail = [&](std::string msg) { out.errors.push_back({row.line, std::move(msg)}); };
        if (row.fields.size() != table.header.size()) {
            fail("expected " + std::to_string(table.header.size()) + " fields, got " +
                 std::to_string(row.fields.size()));
            continue;
        }
        TimePoint ts;
        try {
            ts = parse_iso8601(trim(row.fields[c_ts]));
        } catch (const ParseError& e) {
            fail(std::string("unparseable timestamp: ") + e.what());
            continue;
        }
        auto phase_s = lower(trim(row.fields[c_phase]));
        Phase phase;
        if (phase_s == "pre") phase = Phase::Pre;
        else if (phase_s == "post") phase = Phase::Post;
        else {
            fail("unknown phase '" + phase_s + "'");
            continue;
        }
        long long count = 0;
        try {
            count = parse_int(row.fields[c_count]);
        } catch (const ParseError& e) {
            fail(e.what());
            continue;
        }
        if (count < 0) {
            fail("negative count " + std::to_string(count));
            continue;
        }
        auto store = trim(row.fields[c_store]);
        auto display = trim(row.fields[c_display]);
        auto product = trim(row.fields[c_product]);
        if (display.empty() || product.empty() || store.empty()) {
            fail("empty identifier");
            continue;
        }
        auto [it, inserted] = display_store.emplace(display, store);
        if (!inserted && it->second != store) {
            fail("display '" + display + "' already belongs to store '" + it->second + "'");
            continue;
        }
        auto& scan = scans[ScanKey{display, ts, phase}];
        scan.store = store;
        if (!scan.counts.emplace(product, count).second) {
            fail("duplicate scan row for product '" + product + "'");
            continue;
        }
    }

    // Scans arrive sorted by (display, timestamp, phase); Pre sorts before Post.
    DisplayId current_display;
    int next_visit = 0;
    std::optional<int> open_visit;
    for (auto& [key, scan] : scans) {
        if (key.display != current_display) {
            current_display = key.display;
            next_visit = 0;
            open_visit.reset();
        }
        ScanEvent ev;
        ev.store_id = scan.store;
        ev.display_id = key.display;
        ev.timestamp = key.ts;
        ev.phase = key.phase;
        ev.counts = std::move(scan.counts);
        if (key.phase == Phase::Pre) {
            ev.visit_index = next_visit++;
            open_visit = ev.visit_index;
        } else {
            ev.visit_index = open_visit ? *open_visit : next_visit++;
            open_visit.reset();
        }
        out.items.push_back(std::move(ev));
    }
    return out;
}

int FacingDepth::depth_for(const DisplayId& d) const {
    auto it = per_display.find(d);
    return it == per_display.end() ? default_depth : it->second;
}

SalesDerivation derive_sales(const std::vector<ScanEvent>& events, const FacingDepth& depth) {
    struct Visit {
        const ScanEvent* pre = nullptr;
        const ScanEvent* post = nullptr;
    };
    std::map<DisplayId, std::map<int, Visit>> by_display;
    for (const auto& ev : events) {
        auto& v = by_display[ev.display_id][ev.visit_index];
        if (ev.phase == Phase::Pre) v.pre = &ev;
        else v.post = &ev;
    }

    SalesDerivation out;
    for (const auto& [display, visits] : by_display) {
        const int d = std::max(1, depth.depth_for(display));
        std::vector<Visit> complete;
        for (const auto& [idx, v] : visits) {
            if (v.pre && v.post) complete.push_back(v);
            else ++out.skipped_incomplete_visits;
        }
        for (std::size_t k = 1; k < complete.size(); ++k) {
            const ScanEvent& prev_post = *complete[k - 1].post;
            const ScanEvent& cur_pre = *complete[k].pre;
            double dt = hours_between(prev_post.timestamp, cur_pre.timestamp);
            if (!(dt > 0.0)) {
                ++out.skipped_nonpositive_intervals;
                continue;
            }
            for (const auto& [product, post_count] : prev_post.counts) {
                if (post_count <= 0) continue;
                auto it = cur_pre.counts.find(product);
                long long pre_count = it == cur_pre.counts.end() ? 0 : it->second;
                long long raw = post_count - pre_count;
                SalesRecord r;
                r.store_id = prev_post.store_id;
                r.display_id = display;
                r.product_id = product;
                r.interval_end = cur_pre.timestamp;
                r.timedelta_hours = dt;
                r.quantity_faced = static_cast<int>((post_count + d - 1) / d);
                r.units_sold = static_cast<double>(std::max<long long>(0, raw));
                r.clamped = raw < 0;
                out.records.push_back(std::move(r));
            }
        }
    }
    return out;
}

Parsed<Product> load_catalog(std::string_view text) {
    Parsed<Product> out;
    auto table = csv::read_string(text);
    const auto c_id = table.require_column("product_id");
    const auto c_name = table.require_column("name");
    const auto c_sub = table.require_column("sub_category");
    const auto c_h = table.require_column("height_mm");
    const auto c_w = table.require_column("width_mm");
    std::set<ProductId> seen;
    for (const auto& row : table.rows) {
        auto fail = [&](std::string msg) { out.errors.push_back({row.line, std::move(msg)}); };
        if (row.fields.size() != table.header.size()) {
            fail("field count mismatch");
            continue;
        }
        try {
            Product p;
            p.product_id = trim(row.fields[c_id]);
            p.name = trim(row.fields[c_name]);
            p.sub_category = parse_sub_category(trim(row.fields[c_sub]));
            p.height_mm = parse_double(row.fields[c_h]);
            p.width_mm = parse_double(row.fields[c_w]);
            if (!(p.height_mm > 0.0)) {
                fail("height_mm must be positive");
                continue;
            }
            if (!(p.width_mm > 0.0)) {
                fail("width_mm must be positive");
                continue;
            }
            if (!seen.insert(p.product_id).second) {
                fail("duplicate product '" + p.product_id + "'");
                continue;
            }
            out.items.push_back(std::move(p));
        } catch (const ParseError& e) {
            fail(e.what());
        }
    }
    return out;
}

std::string demographic_column(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "d%02zu", index);
    return buf;
}

Parsed<Tract> load_tracts(std::string_view text, std::optional<std::size_t> expected_b) {
    Parsed<Tract> out;
    auto table = csv::read_string(text);
    const auto c_id = table.require_column("tract_id");
    const auto c_lat = table.require_column("lat");
    const auto c_lon = table.require_column("lon");
    std::vector<std::size_t> demo_cols;
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        const auto& h = table.header[i];
        if (h.size() >= 2 && h[0] == 'd' &&
            std::all_of(h.begin() + 1, h.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
            demo_cols.push_back(i);
        }
    }
    const std::size_t b = expected_b.value_or(demo_cols.size());
    for (const auto& row : table.rows) {
        auto fail = [&](std::string msg) { out.errors.push_back({row.line, std::move(msg)}); };
        try {
            if (row.fields.size() < 3) {
                fail("too few fields");
                continue;
            }
            Tract t;
            t.tract_id = trim(row.fields[c_id]);
            t.lat = parse_double(row.fields[c_lat]);
            t.lon = parse_double(row.fields[c_lon]);
            if (t.lat < -90 || t.lat > 90 || t.lon < -180 || t.lon > 180) {
                fail("coordinates out of range");
                continue;
            }
            for (auto c : demo_cols) {
                if (c >= row.fields.size() || trim(row.fields[c]).empty()) continue;
                t.demographics.push_back(parse_double(row.fields[c]));
            }
            if (t.demographics.size() != b) {
                fail("expected " + std::to_string(b) + " demographic values, got " +
                     std::to_string(t.demographics.size()));
                continue;
            }
            out.items.push_back(std::move(t));
        } catch (const ParseError& e) {
            fail(e.what());
        }
    }
    return out;
}

std::string sales_to_csv(const std::vector<SalesRecord>& records) {
    std::string out =
        "store_id,display_id,product_id,interval_end,timedelta_hours,quantity_faced,units_sold,clamped\n";
    for (const auto& r : records) {
        out += csv::format_row({r.store_id, r.display_id, r.product_id, format_iso8601(r.interval_end),
                                format_double(r.timedelta_hours), std::to_string(r.quantity_faced),
                                format_double(r.units_sold), r.clamped ? "true" : "false"});
    }
    return out;
}

Parsed<SalesRecord> sales_from_csv(std::string_view text) {
    Parsed<SalesRecord> out;
    auto table = csv::read_string(text);
    const auto c_store = table.require_column("store_id");
    const auto c_display = table.require_column("display_id");
    const auto c_product = table.require_column("product_id");
    const auto c_end = table.require_column("interval_end");
    const auto c_dt = table.require_column("timedelta_hours");
    const auto c_q = table.require_column("quantity_faced");
    const auto c_units = table.require_column("units_sold");
    const auto c_clamped = table.require_column("clamped");
    for (const auto& row : table.rows) {
        auto fail = [&](std::string msg) { out.errors.push_back({row.line, std::move(msg)}); };
        if (row.fields.size() != table.header.size()) {
            fail("field count mismatch");
            continue;
        }
        try {
            SalesRecord r;
            r.store_id = row.fields[c_store];
            r.display_id = row.fields[c_display];
            r.product_id = row.fields[c_product];
            r.interval_end = parse_iso8601(row.fields[c_end]);
            r.timedelta_hours = parse_double(row.fields[c_dt]);
            r.quantity_faced = static_cast<int>(parse_int(row.fields[c_q]));
            r.units_sold = parse_double(row.fields[c_units]);
            auto cl = lower(trim(row.fields[c_clamped]));
            if (cl != "true" && cl != "false") throw ParseError("clamped must be true|false");
            r.clamped = cl == "true";
            if (!(r.timedelta_hours > 0) || r.quantity_faced < 1 || r.units_sold < 0) {
                fail("record violates sales invariants");
                continue;
            }
            out.items.push_back(std::move(r));
        } catch (const ParseError& e) {
            fail(e.what());
        }
    }
    return out;
}

std::string catalog_to_csv(const std::vector<Product>& products) {
    std::string out = "product_id,name,sub_category,height_mm,width_mm\n";
    for (const auto& p : products) {
        out += csv::format_row({p.product_id, p.name, std::string(to_string(p.sub_category)),
                                format_double(p.height_mm), format_double(p.width_mm)});
    }
    return out;
}

std::string tracts_to_csv(const std::vector<Tract>& tracts) {
    std::size_t b = tracts.empty() ? 0 : tracts.front().demographics.size();
    std::vector<std::string> header{"tract_id", "lat", "lon"};
    for (std::size_t j = 0; j < b; ++j) header.push_back(demographic_column(j));
    std::string out = csv::format_row(header);
    for (const auto& t : tracts) {
        std::vector<std::string> f{t.tract_id, format_double(t.lat), format_double(t.lon)};
        for (double v : t.demographics) f.push_back(format_double(v));
        out += csv::format_row(f);
    }
    return out;
}

std::string scans_to_csv(const std::vector<ScanEvent>& events) {
    std::string out = "store_id,display_id,scanned_datetime,phase,product_id,count\n";
    for (const auto& ev : events) {
        for (const auto& [p, c] : ev.counts) {
            out += csv::format_row({ev.store_id, ev.display_id, format_iso8601(ev.timestamp),
                                    ev.phase == Phase::Pre ? "pre" : "post", p, std::to_string(c)});
        }
    }
    return out;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write '" + path + "'");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

}  // namespace shelfrec::ingest
