#pragma once

#include <charconv>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "blobflow/util.hpp"

namespace blobflow::csv {

// Shortest decimal string that round-trips to the same double, via
// std::to_chars with no precision argument. All numeric file output goes
// through here so written values re-read bit-identically.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// Strict double parse: the whole field must be consumed (surrounding
// whitespace tolerated, since hand-edited files often align columns).
inline double parse_double(std::string_view field) {
    std::size_t a = 0, b = field.size();
    while (a < b && (field[a] == ' ' || field[a] == '\t')) ++a;
    while (b > a && (field[b - 1] == ' ' || field[b - 1] == '\t' || field[b - 1] == '\r')) --b;
    if (a < b && field[a] == '+') ++a;  // from_chars rejects an explicit plus
    double v = 0;
    const auto res = std::from_chars(field.data() + a, field.data() + b, v);
    if (res.ec != std::errc{} || res.ptr != field.data() + b)
        throw std::invalid_argument("csv: cannot parse number from '" + std::string(field) + "'");
    return v;
}

// Split one line on commas. Numeric CSV only: no quoting or escapes.
inline std::vector<std::string_view> split_fields(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            out.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

inline void write_row(std::ostream& os, const std::vector<double>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) os << ',';
        os << format_double(row[i]);
    }
    os << '\n';
}

}  // namespace blobflow::csv
