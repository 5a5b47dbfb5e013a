#pragma once
// Shared vocabulary types, error classes and small numeric helpers.

#include <chrono>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace shelfrec {

using ProductId = std::string;
using StoreId = std::string;
using DisplayId = std::string;
using TractId = std::string;

// product -> facings
using Assignment = std::map<ProductId, int>;

using TimePoint = std::chrono::sys_seconds;

class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class VersionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class SubCategory { Sparkling, Water, Isotonic, Rejuvenate, Energy };

inline constexpr SubCategory kAllSubCategories[] = {
    SubCategory::Sparkling, SubCategory::Water, SubCategory::Isotonic,
    SubCategory::Rejuvenate, SubCategory::Energy};

std::string_view to_string(SubCategory c);
// Throws ParseError on anything but the five names (case-sensitive).
SubCategory parse_sub_category(std::string_view s);

// ISO-8601 "YYYY-MM-DDTHH:MM:SS[Z]" (a space separator is also accepted).
TimePoint parse_iso8601(std::string_view s);
std::string format_iso8601(TimePoint t);
double hours_between(TimePoint from, TimePoint to);

// Shortest representation that round-trips through parse_double.
std::string format_double(double v);
double parse_double(std::string_view s);
long long parse_int(std::string_view s);

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream);

double uniform01(Rng& rng);
// Samplers built on uniform01 so draws match across standard libraries.
double standard_normal(Rng& rng);
double gamma_draw(Rng& rng, double shape, double rate);
double laplace_draw(Rng& rng, double loc, double scale);
std::size_t uniform_index(Rng& rng, std::size_t n);

// FNV-1a; stable across platforms, unlike std::hash.
std::uint64_t stable_hash(std::string_view s);

struct SampleStats {
    std::size_t n = 0;
    double mean = 0.0;
    double median = 0.0;
    double sd = 0.0;  // n-1 denominator, 0 when n < 2
};
SampleStats summarize(std::vector<double> values);

std::vector<std::string> split(std::string_view s, char delim);
std::string join(const std::vector<std::string>& parts, char delim);
std::string trim(std::string_view s);

}  // namespace shelfrec
