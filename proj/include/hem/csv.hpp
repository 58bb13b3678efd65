#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "hem/error.hpp"

namespace hem::csv {

using Row = std::vector<std::string>;

/// Splits one CSV line. Double-quoted fields may contain commas and "" escapes.
inline Row split_line(std::string_view line) {
    Row out;
    std::string field;
    bool quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        const char c = line[k];
        if (quoted) {
            if (c == '"') {
                if (k + 1 < line.size() && line[k + 1] == '"') {
                    field.push_back('"');
                    ++k;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    out.push_back(std::move(field));
    return out;
}

struct Table {
    Row header;
    std::vector<Row> rows;

    /// Column index by name, or throws MissingColumn.
    std::size_t column(std::string_view name, std::string_view source) const {
        for (std::size_t k = 0; k < header.size(); ++k)
            if (header[k] == name) return k;
        throw DataError(DataErrorKind::missing_column,
                        std::string(source) + ": no column '" + std::string(name) + "'");
    }
};

inline Table parse(std::istream& in) {
    Table t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (first) {
            // Tolerate a UTF-8 byte-order mark.
            if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
            t.header = split_line(line);
            first = false;
            continue;
        }
        if (line.empty()) continue;
        t.rows.push_back(split_line(line));
    }
    return t;
}

inline Table read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError(DataErrorKind::io, "cannot open '" + path + "'");
    return parse(in);
}

/// Quotes a field when it would not survive split_line unquoted.
inline std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += '"';
    return out;
}

/// Shortest decimal text that parses back to exactly x.
inline std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text, std::string_view what) {
    double v = 0.0;
    const char* b = text.data();
    const char* e = text.data() + text.size();
    while (b < e && *b == ' ') ++b;
    while (e > b && e[-1] == ' ') --e;
    auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc() || res.ptr != e)
        throw DataError(DataErrorKind::bad_value,
                        std::string(what) + ": '" + std::string(text) + "' is not a number");
    return v;
}

}  // namespace hem::csv
