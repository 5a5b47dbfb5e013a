#pragma once
// Declarative configuration: a flat TOML subset ([section] headers, key = value with
// strings, numbers, booleans and lists of strings) bound to typed fields by dotted key.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "shelfrec/benchmark.hpp"
#include "shelfrec/simulator.hpp"

namespace shelfrec::config {

// "section.key" -> value with quotes removed; lists are stored comma-joined.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_toml(std::string_view text);

class Binder {
public:
    void bind(const std::string& key, int& v);
    void bind(const std::string& key, double& v);
    void bind(const std::string& key, std::uint64_t& v);
    void bind(const std::string& key, bool& v);
    void bind(const std::string& key, std::string& v);
    void bind(const std::string& key, std::vector<std::string>& v);

    // Unknown keys raise ArgumentError with the closest known key as a suggestion.
    void apply(const KeyValues& kv) const;
    void set(const std::string& key, const std::string& value) const;
    bool has(const std::string& key) const { return setters_.count(key) > 0; }
    KeyValues dump() const;
    std::string to_toml() const;
    std::vector<std::string> keys() const;

private:
    struct Field {
        std::function<void(const std::string&)> set;
        std::function<std::string()> get;
        bool quoted = false;
        bool list = false;
    };
    std::map<std::string, Field> setters_;
};

void bind_world(Binder& b, simulator::WorldConfig& w, const std::string& prefix = "world.");
void bind_bench(Binder& b, benchmark::BenchConfig& c);

std::size_t edit_distance(std::string_view a, std::string_view b);
// Closest option within distance 3 (or a third of the word length, whichever is larger); empty if none.
std::string suggest(std::string_view word, const std::vector<std::string>& options);

}  // namespace shelfrec::config
