// SPDX-License-Identifier: Apache-2.0

#ifndef ETBELL_COUNT_TABLE_HPP_
#define ETBELL_COUNT_TABLE_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "etbell/csv.hpp"
#include "etbell/error.hpp"
#include "etbell/quantum.hpp"

namespace etbell
{

/// Detector-pair slot: 0 -> 11, 1 -> 12, 2 -> 21, 3 -> 22.
constexpr int detector_pair_slot(int port_a, int port_b) noexcept
{
    return 2 * (port_a - 1) + (port_b - 1);
}

/// Coincidences recorded at one setting pair.
struct CountRow
{
    std::string label;
    double phi_a = 0.0;
    double phi_b = 0.0;
    std::array<std::uint64_t, 4> counts{}; ///< c11, c12, c21, c22
    double duration_s = 0.0;

    std::uint64_t total() const { return counts[0] + counts[1] + counts[2] + counts[3]; }
    bool operator==(const CountRow&) const = default;
};

class CountTable
{
public:
    static constexpr std::string_view kCsvHeader = "setting_label,phi_a,phi_b,c11,c12,c21,c22,duration_s";
    /// Phase tolerance when looking a row up by its settings; the CSV keeps
    /// nine significant digits.
    static constexpr double kPhaseMatchTol = 1e-7;

    CountTable() = default;
    explicit CountTable(std::vector<CountRow> rows) : rows_(std::move(rows))
    {
        for (auto& r : rows_)
            normalize(r);
    }

    const std::vector<CountRow>& rows() const noexcept { return rows_; }
    std::size_t size() const noexcept { return rows_.size(); }
    bool empty() const noexcept { return rows_.empty(); }

    void add_row(CountRow row)
    {
        normalize(row);
        rows_.push_back(std::move(row));
    }

    /// Row measured at (phi_a, phi_b), compared modulo 2 pi.
    const CountRow* find(double phi_a, double phi_b) const
    {
        for (const auto& r : rows_)
            if (same_phase(r.phi_a, phi_a) && same_phase(r.phi_b, phi_b))
                return &r;
        return nullptr;
    }

    const CountRow* find(std::string_view label) const
    {
        for (const auto& r : rows_)
            if (r.label == label)
                return &r;
        return nullptr;
    }

    /// Adds counts and durations of rows with matching label and phases;
    /// unmatched rows are appended. Associative and commutative up to row
    /// order.
    CountTable& merge(const CountTable& other)
    {
        for (const auto& r : other.rows_)
        {
            CountRow* mine = nullptr;
            for (auto& m : rows_)
                if (m.label == r.label && same_phase(m.phi_a, r.phi_a) && same_phase(m.phi_b, r.phi_b))
                    mine = &m;
            if (mine == nullptr)
            {
                rows_.push_back(r);
                continue;
            }
            for (int k = 0; k < 4; ++k)
                mine->counts[k] += r.counts[k];
            mine->duration_s += r.duration_s;
        }
        return *this;
    }

    bool operator==(const CountTable&) const = default;

    void write_csv(std::ostream& os) const
    {
        os << kCsvHeader << '\n';
        for (const auto& r : rows_)
        {
            os << r.label << ',' << format_g9(r.phi_a) << ',' << format_g9(r.phi_b);
            for (auto c : r.counts)
                os << ',' << c;
            os << ',' << format_g9(r.duration_s) << '\n';
        }
    }

    std::string to_csv() const
    {
        std::ostringstream os;
        write_csv(os);
        return os.str();
    }

    static CountTable read_csv(std::istream& is)
    {
        std::string line;
        std::size_t line_no = 0;
        if (!std::getline(is, line))
            throw ParseError("empty count table", 1);
        ++line_no;
        csv::strip_cr(line);
        if (line != kCsvHeader)
            throw ParseError("unexpected header '" + line + "'", line_no);

        CountTable table;
        while (std::getline(is, line))
        {
            ++line_no;
            csv::strip_cr(line);
            if (line.empty())
                continue;
            const auto fields = csv::split(line);
            if (fields.size() != 8)
                throw ParseError("expected 8 fields, found " + std::to_string(fields.size()), line_no);
            CountRow row;
            row.label = fields[0];
            if (row.label.empty())
                throw ParseError("empty setting label", line_no);
            row.phi_a = csv::parse_real(fields[1], line_no);
            row.phi_b = csv::parse_real(fields[2], line_no);
            for (int k = 0; k < 4; ++k)
                row.counts[k] = csv::parse_count(fields[3 + k], line_no);
            row.duration_s = csv::parse_real(fields[7], line_no);
            if (row.duration_s < 0.0)
                throw ParseError("negative duration", line_no);
            table.add_row(std::move(row));
        }
        return table;
    }

    static CountTable from_csv(const std::string& text)
    {
        std::istringstream is(text);
        return read_csv(is);
    }

    static std::string format_g9(double x) { return csv::format_g9(x); }

private:
    static void normalize(CountRow& r)
    {
        r.phi_a = reduce_phase(r.phi_a);
        r.phi_b = reduce_phase(r.phi_b);
    }

    static bool same_phase(double x, double y)
    {
        return std::abs(std::remainder(x - y, 2.0 * kPi)) <= kPhaseMatchTol;
    }

    std::vector<CountRow> rows_;
};

} // namespace etbell

#endif // ETBELL_COUNT_TABLE_HPP_
