// SPDX-License-Identifier: Apache-2.0

#ifndef ETBELL_ANALYSIS_HPP_
#define ETBELL_ANALYSIS_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "etbell/count_table.hpp"
#include "etbell/error.hpp"
#include "etbell/quantum.hpp"

namespace etbell
{

struct CorrelationEstimate
{
    double e = 0.0;
    double delta_e = 0.0;
};

/// E = (c11 + c22 - c12 - c21) / N with first-order Poisson error, each count
/// an independent Poisson variable. Accepts fitted (non-integer) counts.
inline CorrelationEstimate correlation_from_counts(const std::array<double, 4>& c)
{
    for (double x : c)
        if (!(x >= 0.0) || !std::isfinite(x))
            throw DomainError("counts must be finite and non-negative");
    const double same = c[0] + c[3];
    const double diff = c[1] + c[2];
    const double n = same + diff;
    if (!(n > 0.0))
        throw UndefinedEstimateError("correlation undefined for zero total counts");
    // dE/dc = +2 diff / n^2 for c11, c22 and -2 same / n^2 for c12, c21.
    const double var = 4.0 * same * diff / (n * n * n);
    return {(same - diff) / n, std::sqrt(var)};
}

inline CorrelationEstimate correlation_from_counts(const std::array<std::uint64_t, 4>& c)
{
    return correlation_from_counts(std::array<double, 4>{double(c[0]), double(c[1]), double(c[2]), double(c[3])});
}

enum class ChshMethod
{
    RawCounts,
    FromFit,
};

inline std::string to_string(ChshMethod m)
{
    return m == ChshMethod::RawCounts ? "raw_counts" : "from_fit";
}

struct CorrelatorEntry
{
    double phi_a = 0.0;
    double phi_b = 0.0;
    double e = 0.0;
    double delta_e = 0.0;
};

struct ChshReport
{
    double s = 0.0;
    double delta_s = 0.0;
    double sigma_violation = std::numeric_limits<double>::quiet_NaN();
    ChshMethod method = ChshMethod::RawCounts;
    std::vector<CorrelatorEntry> correlators; ///< in CHSH order: AB, A'B, AB', A'B'
};

/// Standard deviations above the local bound 2; NaN when delta_s is zero.
inline double sigma_violation(double s, double delta_s)
{
    return delta_s > 0.0 ? (s - 2.0) / delta_s : std::numeric_limits<double>::quiet_NaN();
}

inline double expected_chsh(double visibility)
{
    return kTsirelson * visibility;
}

namespace detail
{

inline ChshReport assemble_report(const MeasurementSettings& s, const std::array<CorrelationEstimate, 4>& est,
                                  ChshMethod method)
{
    ChshReport r;
    r.method = method;
    double var = 0.0;
    const auto pairs = setting_pairs(s);
    for (std::size_t k = 0; k < 4; ++k)
    {
        r.s += pairs[k].sign * est[k].e;
        var += est[k].delta_e * est[k].delta_e;
        r.correlators.push_back({pairs[k].phi_a, pairs[k].phi_b, est[k].e, est[k].delta_e});
    }
    r.delta_s = std::sqrt(var);
    r.sigma_violation = sigma_violation(r.s, r.delta_s);
    return r;
}

} // namespace detail

/// S from raw coincidence counts; rows are looked up by their phases.
inline ChshReport chsh_from_counts(const CountTable& table, const MeasurementSettings& s)
{
    std::array<CorrelationEstimate, 4> est;
    const auto pairs = setting_pairs(s);
    for (std::size_t k = 0; k < 4; ++k)
    {
        const CountRow* row = table.find(pairs[k].phi_a, pairs[k].phi_b);
        if (row == nullptr)
            throw IncompleteDataError("no counts for setting pair " + std::string(pairs[k].label));
        est[k] = correlation_from_counts(row->counts);
    }
    return detail::assemble_report(s, est, ChshMethod::RawCounts);
}

/// count(phi) = C [1 + V cos(phi + theta0)], amplitude A = C V.
struct FringeFit
{
    double amplitude = 0.0;
    double offset = 0.0;
    double phase = 0.0;
    double visibility = 0.0;
    double residual_norm = 0.0;

    double operator()(double phi) const { return offset * (1.0 + visibility * std::cos(phi + phase)); }
};

/// Linear least squares in (C, C V cos theta0, -C V sin theta0), then
/// parameters by polar decomposition. Visibility is clipped to [0, 1].
inline FringeFit fit_fringe(std::span<const double> phi, std::span<const double> counts)
{
    if (phi.size() != counts.size())
        throw ConfigError("phase and count arrays differ in length");
    std::vector<double> distinct;
    for (double p : phi)
    {
        const double r = reduce_phase(p);
        bool seen = false;
        for (double d : distinct)
            seen = seen || std::abs(std::remainder(r - d, 2.0 * kPi)) < 1e-12;
        if (!seen)
            distinct.push_back(r);
    }
    if (distinct.size() < 4)
        throw SingularFitError("fringe fit needs at least 4 distinct phases");

    const auto n = static_cast<Eigen::Index>(phi.size());
    Eigen::MatrixXd design(n, 3);
    Eigen::VectorXd y(n);
    for (Eigen::Index k = 0; k < n; ++k)
    {
        design(k, 0) = 1.0;
        design(k, 1) = std::cos(phi[k]);
        design(k, 2) = std::sin(phi[k]);
        y(k) = counts[k];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < 3)
        throw SingularFitError("fringe design matrix is rank deficient");
    const Eigen::Vector3d x = qr.solve(y);

    FringeFit fit;
    fit.offset = x(0);
    fit.phase = std::atan2(-x(2), x(1));
    const double amp = std::hypot(x(1), x(2));
    if (fit.offset > 0.0)
    {
        fit.visibility = std::min(1.0, amp / fit.offset);
        fit.amplitude = fit.visibility * fit.offset;
    }
    fit.residual_norm = (design * x - y).norm();
    return fit;
}

/// Fits of the four detector-pair curves (11, 12, 21, 22) at one phi_b.
struct FringeFitSet
{
    double phi_b = 0.0;
    std::array<FringeFit, 4> curves;
};

/// Evaluates the fitted curves at the four setting pairs and applies the
/// count-based estimator to the model values.
inline ChshReport chsh_from_fits(std::span<const FringeFitSet> fits, const MeasurementSettings& s)
{
    std::array<CorrelationEstimate, 4> est;
    const auto pairs = setting_pairs(s);
    for (std::size_t k = 0; k < 4; ++k)
    {
        const FringeFitSet* set = nullptr;
        for (const auto& f : fits)
            if (std::abs(std::remainder(f.phi_b - pairs[k].phi_b, 2.0 * kPi)) <= CountTable::kPhaseMatchTol)
                set = &f;
        if (set == nullptr)
            throw IncompleteDataError("no fringe fits for phi_b of setting pair " + std::string(pairs[k].label));
        std::array<double, 4> model;
        for (int c = 0; c < 4; ++c)
            model[c] = std::max(0.0, set->curves[c](pairs[k].phi_a));
        est[k] = correlation_from_counts(model);
    }
    return detail::assemble_report(s, est, ChshMethod::FromFit);
}

struct VisibilityEstimate
{
    double v = 0.0;
    double delta_v = 0.0;
};

/// Unweighted mean of per-curve visibilities with its standard error.
inline VisibilityEstimate mean_visibility(std::span<const FringeFit> fits)
{
    if (fits.empty())
        throw IncompleteDataError("mean visibility of no fits");
    const double n = static_cast<double>(fits.size());
    double mean = 0.0;
    for (const auto& f : fits)
        mean += f.visibility;
    mean /= n;
    if (fits.size() == 1)
        return {mean, 0.0};
    double ss = 0.0;
    for (const auto& f : fits)
        ss += (f.visibility - mean) * (f.visibility - mean);
    return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

/// c_ij <- max(0, round(c_ij - rate_ij * duration)) on every row.
inline CountTable subtract_accidentals(const CountTable& table, const std::array<double, 4>& rates)
{
    for (double r : rates)
        if (!(r >= 0.0) || !std::isfinite(r))
            throw DomainError("accidental rates must be finite and non-negative");
    CountTable out;
    for (CountRow row : table.rows())
    {
        for (int k = 0; k < 4; ++k)
        {
            const double v = std::round(static_cast<double>(row.counts[k]) - rates[k] * row.duration_s);
            row.counts[k] = v > 0.0 ? static_cast<std::uint64_t>(v) : 0u;
        }
        out.add_row(std::move(row));
    }
    return out;
}

/// Accidental coincidence rate of two uncorrelated detectors with singles
/// rates `singles_a`, `singles_b` and a symmetric window of half-width `window`.
inline double expected_accidental_rate(double singles_a, double singles_b, double window)
{
    return 2.0 * window * singles_a * singles_b;
}

// JSON ---------------------------------------------------------------------

namespace detail
{

inline nlohmann::json number_or_null(double x)
{
    return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
}

inline double number_or_nan(const nlohmann::json& j)
{
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

} // namespace detail

inline void to_json(nlohmann::json& j, const ChshReport& r)
{
    j = nlohmann::json{{"s", r.s},
                       {"delta_s", r.delta_s},
                       {"sigma_violation", detail::number_or_null(r.sigma_violation)},
                       {"method", to_string(r.method)},
                       {"correlators", nlohmann::json::array()}};
    for (const auto& c : r.correlators)
        j["correlators"].push_back({{"phi_a", c.phi_a}, {"phi_b", c.phi_b}, {"e", c.e}, {"delta_e", c.delta_e}});
}

inline void from_json(const nlohmann::json& j, ChshReport& r)
{
    r.s = j.at("s").get<double>();
    r.delta_s = j.at("delta_s").get<double>();
    r.sigma_violation = detail::number_or_nan(j.at("sigma_violation"));
    const auto method = j.at("method").get<std::string>();
    if (method == "raw_counts")
        r.method = ChshMethod::RawCounts;
    else if (method == "from_fit")
        r.method = ChshMethod::FromFit;
    else
        throw ParseError("unknown CHSH method '" + method + "'", 0);
    r.correlators.clear();
    for (const auto& c : j.at("correlators"))
        r.correlators.push_back({c.at("phi_a").get<double>(), c.at("phi_b").get<double>(), c.at("e").get<double>(),
                                 c.at("delta_e").get<double>()});
}

inline void to_json(nlohmann::json& j, const FringeFit& f)
{
    j = nlohmann::json{{"amplitude", f.amplitude},  {"offset", f.offset},
                       {"phase", f.phase},          {"visibility", f.visibility},
                       {"residual_norm", f.residual_norm}};
}

inline void from_json(const nlohmann::json& j, FringeFit& f)
{
    f.amplitude = j.at("amplitude").get<double>();
    f.offset = j.at("offset").get<double>();
    f.phase = j.at("phase").get<double>();
    f.visibility = j.at("visibility").get<double>();
    f.residual_norm = j.at("residual_norm").get<double>();
}

} // namespace etbell

#endif // ETBELL_ANALYSIS_HPP_
