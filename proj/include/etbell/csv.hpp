// SPDX-License-Identifier: Apache-2.0

#ifndef ETBELL_CSV_HPP_
#define ETBELL_CSV_HPP_

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "etbell/error.hpp"

// Minimal helpers for the flat comma-separated files used here. No quoting.

namespace etbell::csv
{

inline void strip_cr(std::string& s)
{
    if (!s.empty() && s.back() == '\r')
        s.pop_back();
}

inline std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ','))
        out.push_back(field);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

inline double parse_real(const std::string& s, std::size_t line_no)
{
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
        throw ParseError("invalid number '" + s + "'", line_no);
    return v;
}

inline std::uint64_t parse_count(const std::string& s, std::size_t line_no)
{
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
        throw ParseError("invalid count '" + s + "'", line_no);
    return v;
}

inline std::string format_g9(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return buf;
}

} // namespace etbell::csv

#endif // ETBELL_CSV_HPP_
