#include "shelfrec/common.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>

namespace shelfrec {

std::string_view to_string(SubCategory c) {
    switch (c) {
        case SubCategory::Sparkling: return "Sparkling";
        case SubCategory::Water: return "Water";
        case SubCategory::Isotonic: return "Isotonic";
        case SubCategory::Rejuvenate: return "Rejuvenate";
        case SubCategory::Energy: return "Energy";
    }
    return "?";
}

SubCategory parse_sub_category(std::string_view s) {
    for (auto c : kAllSubCategories) {
        if (to_string(c) == s) return c;
    }
    throw ParseError("unknown sub-category '" + std::string(s) + "'");
}

namespace {

int parse_fixed(std::string_view s, std::size_t pos, std::size_t len) {
    if (pos + len > s.size()) throw ParseError("timestamp too short");
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
        char c = s[i];
        if (c < '0' || c > '9') throw ParseError("bad digit in timestamp '" + std::string(s) + "'");
        v = v * 10 + (c - '0');
    }
    return v;
}

void expect_char(std::string_view s, std::size_t pos, std::string_view allowed) {
    if (pos >= s.size() || allowed.find(s[pos]) == std::string_view::npos) {
        throw ParseError("malformed timestamp '" + std::string(s) + "'");
    }
}

}  // namespace

TimePoint parse_iso8601(std::string_view s) {
    // YYYY-MM-DDTHH:MM:SS
    expect_char(s, 4, "-");
    expect_char(s, 7, "-");
    expect_char(s, 10, "T ");
    expect_char(s, 13, ":");
    expect_char(s, 16, ":");
    int y = parse_fixed(s, 0, 4);
    int mo = parse_fixed(s, 5, 2);
    int d = parse_fixed(s, 8, 2);
    int h = parse_fixed(s, 11, 2);
    int mi = parse_fixed(s, 14, 2);
    int se = parse_fixed(s, 17, 2);
    std::size_t rest = 19;
    if (rest < s.size()) {
        if (s.substr(rest) != "Z" && s.substr(rest) != "+00:00") {
            throw ParseError("unsupported timezone suffix in '" + std::string(s) + "'");
        }
    }
    using namespace std::chrono;
    year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || se > 60) {
        throw ParseError("invalid calendar value in '" + std::string(s) + "'");
    }
    return sys_days{ymd} + hours{h} + minutes{mi} + seconds{se};
}

std::string format_iso8601(TimePoint t) {
    using namespace std::chrono;
    auto dp = floor<days>(t);
    year_month_day ymd{dp};
    hh_mm_ss hms{t - dp};
    char buf[96];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ldZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                  static_cast<long>(hms.seconds().count()));
    return buf;
}

double hours_between(TimePoint from, TimePoint to) {
    return std::chrono::duration<double, std::ratio<3600>>(to - from).count();
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
    std::string t = trim(s);
    if (t == "nan") return std::nan("");
    if (t == "inf") return INFINITY;
    if (t == "-inf") return -INFINITY;
    double v = 0.0;
    const char* first = t.data();
    if (!t.empty() && t[0] == '+') ++first;
    auto res = std::from_chars(first, t.data() + t.size(), v);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size() || t.empty()) {
        throw ParseError("not a number: '" + t + "'");
    }
    return v;
}

long long parse_int(std::string_view s) {
    std::string t = trim(s);
    long long v = 0;
    auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size() || t.empty()) {
        throw ParseError("not an integer: '" + t + "'");
    }
    return v;
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double uniform01(Rng& rng) {
    // 53 random bits; std::uniform_real_distribution is not portable across libraries.
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double standard_normal(Rng& rng) {
    // Marsaglia polar method, one output per call
    while (true) {
        const double u = 2.0 * uniform01(rng) - 1.0;
        const double v = 2.0 * uniform01(rng) - 1.0;
        const double s = u * u + v * v;
        if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
}

double gamma_draw(Rng& rng, double shape, double rate) {
    if (!(shape > 0.0) || !(rate > 0.0)) throw ArgumentError("gamma_draw: shape and rate must be positive");
    if (shape < 1.0) {
        double u = uniform01(rng);
        while (u <= 0.0) u = uniform01(rng);
        return gamma_draw(rng, shape + 1.0, rate) * std::pow(u, 1.0 / shape);
    }
    // Marsaglia-Tsang
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    while (true) {
        double x, v;
        do {
            x = standard_normal(rng);
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform01(rng);
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
        if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
    }
}

double laplace_draw(Rng& rng, double loc, double scale) {
    double u = uniform01(rng) - 0.5;
    while (u == -0.5) u = uniform01(rng) - 0.5;
    const double sgn = u < 0.0 ? -1.0 : 1.0;
    return loc - scale * sgn * std::log(1.0 - 2.0 * std::abs(u));
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
    if (n == 0) throw ArgumentError("uniform_index: empty range");
    // rejection sampling avoids modulo bias
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t r;
    do {
        r = rng();
    } while (r >= limit);
    return static_cast<std::size_t>(r % n);
}

SampleStats summarize(std::vector<double> values) {
    SampleStats s;
    s.n = values.size();
    if (values.empty()) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(s.n);
    if (s.n >= 2) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
    }
    std::sort(values.begin(), values.end());
    std::size_t mid = s.n / 2;
    s.median = (s.n % 2 == 1) ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
    return s;
}

std::vector<std::string> split(std::string_view s, char delim) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(delim, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(s.substr(start));
            break;
        }
        out.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::string join(const std::vector<std::string>& parts, char delim) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.push_back(delim);
        out += parts[i];
    }
    return out;
}

std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r' || s[a] == '\n')) ++a;
    while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r' || s[b - 1] == '\n')) --b;
    return std::string(s.substr(a, b - a));
}

std::uint64_t stable_hash(std::string_view s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace shelfrec
