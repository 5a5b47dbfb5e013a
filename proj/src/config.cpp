#include "shelfrec/config.hpp"

#include <algorithm>

namespace shelfrec::config {

namespace {

std::string strip_comment(std::string_view line) {
    bool in_str = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '\\' && in_str) {
            ++i;
        } else if (line[i] == '"') {
            in_str = !in_str;
        } else if (line[i] == '#' && !in_str) {
            return std::string(line.substr(0, i));
        }
    }
    return std::string(line);
}

std::string unquote(std::string_view v, std::size_t line_no) {
    if (v.size() < 2 || v.front() != '"' || v.back() != '"') {
        throw ParseError("config line " + std::to_string(line_no) + ": unterminated string");
    }
    std::string out;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
        if (v[i] == '\\' && i + 2 < v.size()) {
            const char c = v[++i];
            out += c == 'n' ? '\n' : c == 't' ? '\t' : c;
        } else if (v[i] == '"') {
            throw ParseError("config line " + std::to_string(line_no) + ": stray quote");
        } else {
            out += v[i];
        }
    }
    return out;
}

std::string parse_value(const std::string& raw, std::size_t line_no) {
    const std::string v = trim(raw);
    if (v.empty()) throw ParseError("config line " + std::to_string(line_no) + ": missing value");
    if (v.front() == '"') return unquote(v, line_no);
    if (v.front() == '[') {
        if (v.back() != ']') throw ParseError("config line " + std::to_string(line_no) + ": unterminated list");
        const std::string body = trim(std::string_view(v).substr(1, v.size() - 2));
        if (body.empty()) return "";
        std::vector<std::string> items;
        for (const auto& part : split(body, ',')) {
            const std::string t = trim(part);
            if (t.empty()) continue;  // trailing comma
            items.push_back(t.front() == '"' ? unquote(t, line_no) : t);
        }
        return join(items, ',');
    }
    return v;
}

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ArgumentError("config key '" + key + "': expected true or false, got '" + v + "'");
}

template <typename F>
auto typed(const std::string& key, const std::string& v, F parse) {
    try {
        return parse(v);
    } catch (const std::exception&) {
        throw ArgumentError("config key '" + key + "': invalid value '" + v + "'");
    }
}

}  // namespace

KeyValues parse_toml(std::string_view text) {
    KeyValues out;
    std::string section;
    std::size_t line_no = 0;
    for (const auto& raw : split(text, '\n')) {
        ++line_no;
        const std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) {
                throw ParseError("config line " + std::to_string(line_no) + ": malformed section header");
            }
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        if (key.empty()) throw ParseError("config line " + std::to_string(line_no) + ": empty key");
        const std::string full = section.empty() ? key : section + "." + key;
        if (out.count(full)) throw ParseError("config line " + std::to_string(line_no) + ": duplicate key '" + full + "'");
        out[full] = parse_value(line.substr(eq + 1), line_no);
    }
    return out;
}

void Binder::bind(const std::string& key, int& v) {
    setters_[key] = {[&v, key](const std::string& s) {
                         v = typed(key, s, [](const std::string& x) {
                             const long long n = parse_int(x);
                             if (n < INT32_MIN || n > INT32_MAX) throw std::out_of_range("int");
                             return static_cast<int>(n);
                         });
                     },
                     [&v] { return std::to_string(v); }};
}

void Binder::bind(const std::string& key, double& v) {
    setters_[key] = {[&v, key](const std::string& s) { v = typed(key, s, [](const std::string& x) { return parse_double(x); }); },
                     [&v] { return format_double(v); }};
}

void Binder::bind(const std::string& key, std::uint64_t& v) {
    setters_[key] = {[&v, key](const std::string& s) {
                         v = typed(key, s, [](const std::string& x) {
                             if (x.empty() || x.front() == '-') throw std::out_of_range("negative");
                             std::size_t pos = 0;
                             const auto n = std::stoull(x, &pos);
                             if (pos != x.size()) throw std::invalid_argument("trailing");
                             return static_cast<std::uint64_t>(n);
                         });
                     },
                     [&v] { return std::to_string(v); }};
}

void Binder::bind(const std::string& key, bool& v) {
    setters_[key] = {[&v, key](const std::string& s) { v = parse_bool(key, s); },
                     [&v] { return std::string(v ? "true" : "false"); }};
}

void Binder::bind(const std::string& key, std::string& v) {
    setters_[key] = {[&v](const std::string& s) { v = s; }, [&v] { return v; }, true, false};
}

void Binder::bind(const std::string& key, std::vector<std::string>& v) {
    setters_[key] = {[&v](const std::string& s) {
                         v.clear();
                         for (const auto& p : split(s, ',')) {
                             const auto t = trim(p);
                             if (!t.empty()) v.push_back(t);
                         }
                     },
                     [&v] { return join(v, ','); }, false, true};
}

void Binder::set(const std::string& key, const std::string& value) const {
    auto it = setters_.find(key);
    if (it == setters_.end()) {
        std::string msg = "unknown config key '" + key + "'";
        const auto s = suggest(key, keys());
        if (!s.empty()) msg += "; did you mean '" + s + "'?";
        throw ArgumentError(msg);
    }
    it->second.set(value);
}

void Binder::apply(const KeyValues& kv) const {
    for (const auto& [k, v] : kv) set(k, v);
}

KeyValues Binder::dump() const {
    KeyValues out;
    for (const auto& [k, f] : setters_) out[k] = f.get();
    return out;
}

std::string Binder::to_toml() const {
    std::map<std::string, std::vector<std::pair<std::string, const Field*>>> sections;
    for (const auto& [k, f] : setters_) {
        const auto dot = k.rfind('.');
        sections[dot == std::string::npos ? "" : k.substr(0, dot)].push_back(
            {dot == std::string::npos ? k : k.substr(dot + 1), &f});
    }
    std::string out;
    for (const auto& [sec, fields] : sections) {
        if (!sec.empty()) out += (out.empty() ? "" : "\n") + std::string("[") + sec + "]\n";
        for (const auto& [name, f] : fields) {
            const std::string v = f->get();
            std::string rendered = v;
            if (f->quoted) {
                rendered = quote(v);
            } else if (f->list) {
                std::vector<std::string> items;
                for (const auto& p : split(v, ',')) {
                    if (!p.empty()) items.push_back(quote(p));
                }
                rendered = "[";
                for (std::size_t i = 0; i < items.size(); ++i) rendered += (i ? ", " : "") + items[i];
                rendered += "]";
            }
            out += name + " = " + rendered + "\n";
        }
    }
    return out;
}

std::vector<std::string> Binder::keys() const {
    std::vector<std::string> out;
    for (const auto& [k, f] : setters_) out.push_back(k);
    return out;
}

void bind_world(Binder& b, simulator::WorldConfig& w, const std::string& p) {
    b.bind(p + "n_clusters", w.n_clusters);
    b.bind(p + "n_stores", w.n_stores);
    b.bind(p + "tracts_per_store", w.tracts_per_store);
    b.bind(p + "n_demographics", w.n_demographics);
    b.bind(p + "separation", w.separation);
    b.bind(p + "n_steady", w.n_steady);
    b.bind(p + "n_lumpy", w.n_lumpy);
    b.bind(p + "n_sub_categories", w.n_sub_categories);
    b.bind(p + "steady_beta_lo", w.steady_beta_lo);
    b.bind(p + "steady_beta_hi", w.steady_beta_hi);
    b.bind(p + "lumpy_beta_lo", w.lumpy_beta_lo);
    b.bind(p + "lumpy_beta_hi", w.lumpy_beta_hi);
    b.bind(p + "cluster_preference_sd", w.cluster_preference_sd);
    b.bind(p + "store_jitter", w.store_jitter);
    b.bind(p + "steady_cv", w.steady_cv);
    b.bind(p + "lumpy_cv", w.lumpy_cv);
    b.bind(p + "capacity", w.capacity);
    b.bind(p + "max_facings_per_product", w.max_facings_per_product);
    b.bind(p + "pool_size", w.pool_size);
    b.bind(p + "depth", w.depth);
    b.bind(p + "restock_fill", w.restock_fill);
    b.bind(p + "noise_sd", w.noise_sd);
    b.bind(p + "interval_hours", w.interval_hours);
    b.bind(p + "train_visits", w.train_visits);
    b.bind(p + "substitution_prob", w.substitution_prob);
    b.bind(p + "eval_events_per_display", w.eval_events_per_display);
}

void bind_bench(Binder& b, benchmark::BenchConfig& c) {
    bind_world(b, c.world);
    b.bind("bench.n_seeds", c.n_seeds);
    b.bind("bench.seed", c.seed);
    b.bind("bench.policies", c.policies);
    b.bind("bench.ablations", c.ablations);
    b.bind("bench.horizon_cycles", c.horizon_cycles);
    b.bind("bench.subsample", c.subsample);
    b.bind("bench.match", c.match);
    b.bind("bench.jaccard_theta", c.jaccard_theta);
    b.bind("pipeline.k", c.k);
    b.bind("pipeline.tau", c.tau);
    b.bind("search.V", c.V);
    b.bind("search.epsilon", c.search_epsilon);
    b.bind("search.lambda", c.lambda);
    b.bind("sampler.chains", c.chains);
    b.bind("sampler.draws", c.draws);
    b.bind("sampler.warmup", c.warmup);
    b.bind("sampler.predictive_draws", c.predictive_draws);
    b.bind("baselines.epsilon", c.baseline_epsilon);
    b.bind("baselines.genetic_population", c.genetic.population);
    b.bind("baselines.genetic_generations", c.genetic.generations);
    b.bind("baselines.genetic_crossover", c.genetic.crossover);
    b.bind("baselines.genetic_random_action", c.genetic.random_action);
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::string suggest(std::string_view word, const std::vector<std::string>& options) {
    std::string best;
    std::size_t best_d = std::max<std::size_t>(3, word.size() / 3) + 1;
    for (const auto& o : options) {
        const auto d = edit_distance(word, o);
        if (d < best_d) {
            best_d = d;
            best = o;
        }
    }
    return best;
}

}  // namespace shelfrec::config
