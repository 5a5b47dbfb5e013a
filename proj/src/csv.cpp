#include "shelfrec/csv.hpp"

#include <fstream>
#include <sstream>

#include "shelfrec/common.hpp"

namespace shelfrec::csv {

std::size_t Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    return npos;
}

std::size_t Table::require_column(std::string_view name) const {
    auto c = column(name);
    if (c == npos) throw ParseError("missing column '" + std::string(name) + "'");
    return c;
}

std::vector<std::string> parse_line(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    if (quoted) throw ParseError("unterminated quote");
    out.push_back(std::move(cur));
    return out;
}

Table read(std::istream& in) {
    Table t;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        if (!have_header) {
            t.header = parse_line(line);
            for (auto& h : t.header) h = trim(h);
            have_header = true;
            continue;
        }
        Row r;
        r.line = lineno;
        try {
            r.fields = parse_line(line);
        } catch (const ParseError&) {
            r.fields.clear();  // surfaced to callers as a width mismatch
        }
        t.rows.push_back(std::move(r));
    }
    if (!have_header) throw ParseError("empty input: no CSV header");
    return t;
}

Table read_string(std::string_view text) {
    std::istringstream in{std::string(text)};
    return read(in);
}

Table read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    return read(in);
}

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string format_row(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(',');
        out += escape(fields[i]);
    }
    out.push_back('\n');
    return out;
}

}  // namespace shelfrec::csv
