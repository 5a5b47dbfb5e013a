#pragma once
// Minimal RFC-4180 style CSV reading and writing.

#include <cstddef>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace shelfrec::csv {

struct Row {
    std::size_t line = 0;  // 1-based line number in the source
    std::vector<std::string> fields;
};

struct Table {
    std::vector<std::string> header;
    std::vector<Row> rows;

    // Index of a header column, or npos.
    std::size_t column(std::string_view name) const;
    std::size_t require_column(std::string_view name) const;
};

inline constexpr std::size_t npos = static_cast<std::size_t>(-1);

// Splits one physical line. Quoted fields may contain commas and doubled quotes
// but not newlines.
std::vector<std::string> parse_line(std::string_view line);

// Reads a whole table; blank lines are skipped. Throws ParseError on a missing header.
Table read(std::istream& in);
Table read_string(std::string_view text);
Table read_file(const std::string& path);

std::string escape(std::string_view field);
std::string format_row(const std::vector<std::string>& fields);

}  // namespace shelfrec::csv
