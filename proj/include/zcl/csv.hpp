#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "zcl/error.hpp"

namespace zcl::csv {

inline bool needs_quoting(std::string_view field) {
    return field.find_first_of(",\"\r\n") != std::string_view::npos;
}

inline void append_field(std::string& line, std::string_view field) {
    if (!needs_quoting(field)) {
        line.append(field);
        return;
    }
    line.push_back('"');
    for (char c : field) {
        if (c == '"') line.push_back('"');
        line.push_back(c);
    }
    line.push_back('"');
}

// Splits one RFC 4180 record. Embedded newlines inside quotes are not
// supported since every producer in this project writes one record per line.
inline std::vector<std::string> split_line(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    fields.back().push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                fields.back().push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else {
            fields.back().push_back(c);
        }
    }
    if (quoted) throw FormatError("unterminated quoted CSV field");
    return fields;
}

// Shortest representation that parses back to the same double.
inline std::string format_double(double value) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc{}) throw FormatError("cannot format number");
    return std::string(buf, end);
}

inline double parse_double(std::string_view text, std::string_view what) {
    double value = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) {
        throw FormatError("invalid number for " + std::string(what) + ": '" + std::string(text) + "'");
    }
    return value;
}

inline std::uint64_t parse_uint(std::string_view text, std::string_view what) {
    std::uint64_t value = 0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) {
        throw FormatError("invalid integer for " + std::string(what) + ": '" + std::string(text) + "'");
    }
    return value;
}

inline bool parse_bool(std::string_view text, std::string_view what) {
    if (text == "1" || text == "true") return true;
    if (text == "0" || text == "false") return false;
    throw FormatError("invalid boolean for " + std::string(what) + ": '" + std::string(text) + "'");
}

}  // namespace zcl::csv
