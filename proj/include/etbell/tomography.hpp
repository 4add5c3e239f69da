// SPDX-License-Identifier: Apache-2.0

#ifndef ETBELL_TOMOGRAPHY_HPP_
#define ETBELL_TOMOGRAPHY_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "etbell/csv.hpp"
#include "etbell/error.hpp"
#include "etbell/event_sim.hpp"
#include "etbell/quantum.hpp"

namespace etbell
{

/// Single-qubit projectors used for tomography: the two path states and the
/// port-1 analyzer projectors at phase 0 and pi/2.
enum class ProjectorCode
{
    S,
    L,
    P0,
    P90,
};

inline std::string_view to_string(ProjectorCode c)
{
    switch (c)
    {
    case ProjectorCode::S:
        return "S";
    case ProjectorCode::L:
        return "L";
    case ProjectorCode::P0:
        return "P0";
    case ProjectorCode::P90:
        return "P90";
    }
    return "?";
}

inline std::optional<ProjectorCode> parse_projector_code(std::string_view s)
{
    for (auto c : {ProjectorCode::S, ProjectorCode::L, ProjectorCode::P0, ProjectorCode::P90})
        if (s == to_string(c))
            return c;
    return std::nullopt;
}

inline Qubit projector_matrix(ProjectorCode c)
{
    switch (c)
    {
    case ProjectorCode::S:
        return Qubit{{1.0, 0.0}, {0.0, 0.0}};
    case ProjectorCode::L:
        return Qubit{{0.0, 0.0}, {0.0, 1.0}};
    case ProjectorCode::P0:
        return AnalyzerProjector(0.0, 1).matrix();
    case ProjectorCode::P90:
        return AnalyzerProjector(kPi / 2.0, 1).matrix();
    }
    return Qubit::Zero();
}

struct TomographySetting
{
    int index = 0;
    ProjectorCode proj_a = ProjectorCode::S;
    ProjectorCode proj_b = ProjectorCode::S;
    std::uint64_t count = 0;
    double duration_s = 0.0;

    Operator4 projector() const { return kron(projector_matrix(proj_a), projector_matrix(proj_b)); }

    bool operator==(const TomographySetting&) const = default;
};

using TomographyData = std::vector<TomographySetting>;

/// Sixteen measurements, two seconds each (H/V/D/R polarizer rows mapped to
/// S/L/P0/P90).
inline TomographyData table2_settings()
{
    using P = ProjectorCode;
    return {
        {1, P::L, P::L, 3058, 2.0},      {2, P::S, P::L, 31, 2.0},        {3, P::S, P::S, 3416, 2.0},
        {4, P::L, P::S, 35, 2.0},        {5, P::L, P::P90, 1737, 2.0},    {6, P::S, P::P90, 1799, 2.0},
        {7, P::S, P::P0, 1708, 2.0},     {8, P::L, P::P0, 1797, 2.0},     {9, P::P90, P::P0, 1795, 2.0},
        {10, P::P0, P::P0, 3304, 2.0},   {11, P::P0, P::P90, 1727, 2.0},  {12, P::P0, P::L, 1762, 2.0},
        {13, P::P0, P::S, 1801, 2.0},    {14, P::P90, P::S, 1713, 2.0},   {15, P::P90, P::L, 1744, 2.0},
        {16, P::P90, P::P90, 97, 2.0},
    };
}

inline std::array<double, 16> expected_tomography_counts(const DensityOperator& rho, const TomographyData& settings,
                                                         double n_ref)
{
    if (settings.size() != 16)
        throw ConfigError("tomography needs 16 settings");
    std::array<double, 16> mu{};
    for (std::size_t k = 0; k < 16; ++k)
        mu[k] = n_ref * std::max(0.0, expectation(rho, settings[k].projector()));
    return mu;
}

inline constexpr std::uint64_t kTomographyStream = 1u << 21;

/// Poisson counts about n_ref * tr(Pi_k rho) on the table2 projectors;
/// durations are left at one second.
inline TomographyData simulate_tomography_counts(const DensityOperator& rho, double n_ref, std::uint64_t seed)
{
    if (!(n_ref >= 0.0) || !std::isfinite(n_ref))
        throw DomainError("n_ref must be finite and non-negative");
    auto settings = table2_settings();
    const auto mu = expected_tomography_counts(rho, settings, n_ref);
    auto rng = detail::make_engine(seed, kTomographyStream, 0);
    for (std::size_t k = 0; k < 16; ++k)
    {
        std::poisson_distribution<std::uint64_t> pd(mu[k]);
        settings[k].count = mu[k] > 0.0 ? pd(rng) : 0;
        settings[k].duration_s = 1.0;
    }
    return settings;
}

// Linear inversion -----------------------------------------------------------

namespace detail
{

/// Hermitian basis: 4 diagonal units, then E_jk + E_kj and i(E_jk - E_kj)
/// for j < k.
inline std::array<Operator4, 16> hermitian_basis()
{
    std::array<Operator4, 16> b;
    std::size_t n = 0;
    for (int j = 0; j < 4; ++j)
    {
        b[n] = Operator4::Zero();
        b[n++](j, j) = 1.0;
    }
    for (int j = 0; j < 4; ++j)
        for (int k = j + 1; k < 4; ++k)
        {
            b[n] = Operator4::Zero();
            b[n](j, k) = 1.0;
            b[n++](k, j) = 1.0;
            b[n] = Operator4::Zero();
            b[n](j, k) = Complex(0.0, 1.0);
            b[n++](k, j) = Complex(0.0, -1.0);
        }
    return b;
}

inline void require_sixteen(const TomographyData& data)
{
    if (data.size() != 16)
        throw ConfigError("tomography needs 16 settings, got " + std::to_string(data.size()));
    for (const auto& s : data)
        if (!(s.duration_s > 0.0))
            throw ConfigError("tomography setting " + std::to_string(s.index) + " has non-positive duration");
}

} // namespace detail

/// A(k, l) = tr(Pi_k B_l) over the Hermitian basis.
inline Eigen::Matrix<double, 16, 16> tomography_design_matrix(const TomographyData& settings)
{
    if (settings.size() != 16)
        throw ConfigError("tomography needs 16 settings");
    const auto basis = detail::hermitian_basis();
    Eigen::Matrix<double, 16, 16> a;
    for (int k = 0; k < 16; ++k)
    {
        const Operator4 pi = settings[static_cast<std::size_t>(k)].projector();
        for (int l = 0; l < 16; ++l)
            a(k, l) = (pi * basis[static_cast<std::size_t>(l)]).trace().real();
    }
    return a;
}

struct DesignReport
{
    int rank = 0;
    double condition_number = 0.0;
};

inline DesignReport design_report(const TomographyData& settings)
{
    Eigen::JacobiSVD<Eigen::Matrix<double, 16, 16>> svd(tomography_design_matrix(settings));
    const auto& sv = svd.singularValues();
    DesignReport r;
    for (int i = 0; i < 16; ++i)
        if (sv(i) > 1e-10 * sv(0))
            ++r.rank;
    r.condition_number = sv(15) > 0.0 ? sv(0) / sv(15) : std::numeric_limits<double>::infinity();
    return r;
}

/// Solves tr(Pi_k X) = count_k / duration_k for Hermitian X, then divides by
/// tr X. The result is Hermitian but need not be positive.
inline Operator4 linear_reconstruction(const TomographyData& data)
{
    detail::require_sixteen(data);
    const auto a = tomography_design_matrix(data);
    Eigen::ColPivHouseholderQR<Eigen::Matrix<double, 16, 16>> qr(a);
    qr.setThreshold(1e-10);
    if (qr.rank() < 16)
        throw ConfigError("tomography design matrix is singular (rank " + std::to_string(qr.rank()) + ")");
    Eigen::Matrix<double, 16, 1> y;
    for (int k = 0; k < 16; ++k)
        y(k) = static_cast<double>(data[static_cast<std::size_t>(k)].count) / data[static_cast<std::size_t>(k)].duration_s;
    const Eigen::Matrix<double, 16, 1> r = qr.solve(y);
    const auto basis = detail::hermitian_basis();
    Operator4 x = Operator4::Zero();
    for (int l = 0; l < 16; ++l)
        x += r(l) * basis[static_cast<std::size_t>(l)];
    const double tr = x.trace().real();
    if (!(tr > 0.0))
        throw UndefinedEstimateError("linear reconstruction has non-positive trace");
    x /= tr;
    return 0.5 * (x + x.adjoint());
}

/// Nearest density operator in eigenvalue terms: negative eigenvalues
/// clipped, trace restored.
inline Operator4 psd_projection(const Operator4& m)
{
    Eigen::SelfAdjointEigenSolver<Operator4> es(0.5 * (m + m.adjoint()));
    Eigen::Vector4d ev = es.eigenvalues().cwiseMax(0.0);
    if (!(ev.sum() > 0.0))
        return Operator4::Identity() / 4.0;
    ev /= ev.sum();
    Operator4 out = es.eigenvectors() * ev.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
    return 0.5 * (out + out.adjoint());
}

// Maximum likelihood -----------------------------------------------------------

/// rho = T^dagger T / tr with T lower triangular: real diagonal, complex
/// below. Parameter order: Re T_ij row by row (j <= i), then Im T_ij for j < i.
class TriangularParameterization
{
public:
    static constexpr int kSize = 16;
    using Vector = Eigen::Matrix<double, kSize, 1>;

    static Operator4 t_matrix(const Vector& p)
    {
        Operator4 t = Operator4::Zero();
        int n = 0;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j <= i; ++j)
                t(i, j) = p(n++);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < i; ++j)
                t(i, j) += Complex(0.0, p(n++));
        return t;
    }

    static Vector parameters(const Operator4& t)
    {
        Vector p;
        int n = 0;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j <= i; ++j)
                p(n++) = t(i, j).real();
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < i; ++j)
                p(n++) = t(i, j).imag();
        return p;
    }

    /// Gradient coordinates from G = W T^dagger: 2 Re G_ji and -2 Im G_ji.
    static Vector gradient(const Operator4& g)
    {
        Vector out;
        int n = 0;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j <= i; ++j)
                out(n++) = 2.0 * g(j, i).real();
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < i; ++j)
                out(n++) = -2.0 * g(j, i).imag();
        return out;
    }

    static Operator4 density(const Vector& p)
    {
        const Operator4 t = t_matrix(p);
        Operator4 m = t.adjoint() * t;
        m /= m.trace().real();
        return 0.5 * (m + m.adjoint());
    }

    /// T with T^dagger T = rho, via a Cholesky factor of the index-reversed
    /// matrix. rho must be positive definite.
    static Vector from_density(const Operator4& rho)
    {
        Eigen::Matrix4cd j = Eigen::Matrix4cd::Zero();
        for (int i = 0; i < 4; ++i)
            j(i, 3 - i) = 1.0;
        Eigen::LLT<Operator4> llt(j * rho * j);
        if (llt.info() != Eigen::Success)
            throw ProcessingError("initial state is not positive definite");
        const Operator4 l = llt.matrixL();
        return parameters(j * l.adjoint() * j);
    }
};

/// Profile Poisson likelihood with the unit-probability rate eliminated:
///   L(T) = sum_k n_k log q_k - n_tot log sum_k q_k,  q_k = d_k tr(Pi_k T^dagger T).
/// Invariant under rescaling T.
class TomographyLikelihood
{
public:
    explicit TomographyLikelihood(const TomographyData& data)
    {
        detail::require_sixteen(data);
        for (std::size_t k = 0; k < 16; ++k)
        {
            pi_[k] = data[k].projector();
            d_[k] = data[k].duration_s;
            n_[k] = static_cast<double>(data[k].count);
            n_tot_ += n_[k];
        }
        if (!(n_tot_ > 0.0))
            throw UndefinedEstimateError("tomography counts are all zero");
    }

    double value(const TriangularParameterization::Vector& p) const
    {
        const Operator4 t = TriangularParameterization::t_matrix(p);
        const Operator4 m = t.adjoint() * t;
        double q_sum = 0.0, acc = 0.0;
        for (std::size_t k = 0; k < 16; ++k)
        {
            const double q = d_[k] * (pi_[k] * m).trace().real();
            q_sum += q;
            if (n_[k] > 0.0)
                acc += q > 0.0 ? n_[k] * std::log(q) : -std::numeric_limits<double>::infinity();
        }
        if (!(q_sum > 0.0))
            return -std::numeric_limits<double>::infinity();
        return acc - n_tot_ * std::log(q_sum);
    }

    TriangularParameterization::Vector gradient(const TriangularParameterization::Vector& p) const
    {
        const Operator4 t = TriangularParameterization::t_matrix(p);
        const Operator4 m = t.adjoint() * t;
        std::array<double, 16> q{};
        double q_sum = 0.0;
        for (std::size_t k = 0; k < 16; ++k)
        {
            q[k] = d_[k] * (pi_[k] * m).trace().real();
            q_sum += q[k];
        }
        Operator4 w = Operator4::Zero();
        for (std::size_t k = 0; k < 16; ++k)
        {
            double c = -n_tot_ / q_sum;
            if (n_[k] > 0.0)
                c += n_[k] / q[k];
            w += (c * d_[k]) * pi_[k];
        }
        return TriangularParameterization::gradient(w * t.adjoint());
    }

    /// Poisson log-likelihood at the profiled rate, without the log n! terms.
    double poisson_log_likelihood(const Operator4& rho) const
    {
        double p_sum = 0.0;
        std::array<double, 16> mu{};
        for (std::size_t k = 0; k < 16; ++k)
        {
            mu[k] = d_[k] * std::max(0.0, (pi_[k] * rho).trace().real());
            p_sum += mu[k];
        }
        const double n_ref = n_tot_ / p_sum;
        double ll = 0.0;
        for (std::size_t k = 0; k < 16; ++k)
        {
            mu[k] *= n_ref;
            if (n_[k] > 0.0)
                ll += n_[k] * std::log(mu[k]);
            ll -= mu[k];
        }
        return ll;
    }

    /// Counts expected at unit probability and unit duration.
    double rate_estimate(const Operator4& rho) const
    {
        double p_sum = 0.0;
        for (std::size_t k = 0; k < 16; ++k)
            p_sum += d_[k] * (pi_[k] * rho).trace().real();
        return n_tot_ / p_sum;
    }

private:
    std::array<Operator4, 16> pi_;
    std::array<double, 16> d_{};
    std::array<double, 16> n_{};
    double n_tot_ = 0.0;
};

struct ReconstructionResult
{
    DensityOperator rho = maximally_mixed();
    double log_likelihood = 0.0;
    double fidelity_with_phi_plus = 0.0;
    double predicted_s = 0.0; ///< tr(S rho) for the canonical settings
    int iterations = 0;
    bool converged = false;
    double n_ref = 0.0;
    std::vector<double> objective_trace; ///< profile likelihood after each accepted step
};

struct MlOptions
{
    double tol = 1e-10;
    int max_iter = 5000;
    double initial_mixing = 1e-3; ///< weight of I/4 mixed into the starting point
    int history = 8;
};

namespace detail
{

inline ReconstructionResult finish_result(const TomographyLikelihood& lik, const Operator4& rho_m, int iterations,
                                          bool converged, std::vector<double> trace)
{
    ReconstructionResult r;
    r.rho = DensityOperator::from_matrix(rho_m);
    r.log_likelihood = lik.poisson_log_likelihood(rho_m);
    r.fidelity_with_phi_plus = std::clamp(fidelity(r.rho, bell_phi_plus()), 0.0, 1.0);
    r.predicted_s = expectation(r.rho, chsh_operator(canonical_settings()));
    r.iterations = iterations;
    r.converged = converged;
    r.n_ref = lik.rate_estimate(rho_m);
    r.objective_trace = std::move(trace);
    return r;
}

} // namespace detail

/// Maximizes the profile likelihood over the triangular parameterization.
/// Steps follow limited-memory quasi-Newton directions, falling back to the
/// plain gradient whenever that direction does not ascend, with Armijo
/// backtracking. Stops once the relative change of the objective stays
/// below tol for three consecutive steps. Starts from the eigenvalue-clipped
/// linear inversion.
inline ReconstructionResult ml_reconstruction(const TomographyData& data, const MlOptions& opt = {})
{
    using Vec = TriangularParameterization::Vector;
    const TomographyLikelihood lik(data);

    Operator4 start;
    try
    {
        start = psd_projection(linear_reconstruction(data));
    }
    catch (const UndefinedEstimateError&)
    {
        start = Operator4::Identity() / 4.0;
    }
    start = (1.0 - opt.initial_mixing) * start + opt.initial_mixing * Operator4::Identity() / 4.0;

    Vec p = TriangularParameterization::from_density(start);
    p.normalize();
    double f = lik.value(p);
    Vec g = lik.gradient(p);
    std::vector<double> trace{f};

    std::deque<std::pair<Vec, Vec>> mem; // (s, y) pairs for the ascent problem
    int small_steps = 0;
    int it = 0;
    bool converged = false;
    for (; it < opt.max_iter; ++it)
    {
        // Two-loop recursion on -L, written for ascent.
        Vec d = g;
        std::vector<double> alpha(mem.size());
        for (std::size_t i = mem.size(); i-- > 0;)
        {
            const auto& [s, y] = mem[i];
            const double rho_i = 1.0 / y.dot(s);
            alpha[i] = rho_i * s.dot(d);
            d -= alpha[i] * y;
        }
        if (!mem.empty())
        {
            const auto& [s, y] = mem.back();
            d *= s.dot(y) / y.dot(y);
        }
        for (std::size_t i = 0; i < mem.size(); ++i)
        {
            const auto& [s, y] = mem[i];
            const double rho_i = 1.0 / y.dot(s);
            const double beta = rho_i * y.dot(d);
            d += s * (alpha[i] - beta);
        }
        if (mem.empty())
            d = g / std::max(1.0, g.norm());
        double slope = g.dot(d);
        if (!(slope > 0.0))
        {
            mem.clear();
            d = g / std::max(1.0, g.norm());
            slope = g.dot(d);
        }
        if (!(slope > 0.0))
        {
            converged = true;
            break;
        }

        double step = 1.0;
        Vec p_new;
        double f_new = -std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt)
        {
            p_new = p + step * d;
            f_new = lik.value(p_new);
            if (std::isfinite(f_new) && f_new >= f + 1e-4 * step * slope)
            {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted)
        {
            if (!mem.empty())
            {
                mem.clear();
                continue;
            }
            converged = true;
            break;
        }

        Vec g_new = lik.gradient(p_new);
        const double norm = p_new.norm();
        if (norm < 0.5 || norm > 2.0)
        {
            // Rescaling leaves L unchanged; curvature pairs no longer apply.
            p_new /= norm;
            g_new *= norm;
            mem.clear();
        }
        else
        {
            const Vec s = p_new - p;
            const Vec y = g - g_new;
            if (s.dot(y) > 1e-12 * s.norm() * y.norm())
            {
                mem.emplace_back(s, y);
                if (static_cast<int>(mem.size()) > opt.history)
                    mem.pop_front();
            }
        }

        const double change = std::abs(f_new - f) / std::max(1.0, std::abs(f));
        p = p_new;
        g = g_new;
        f = f_new;
        trace.push_back(f);
        small_steps = change < opt.tol ? small_steps + 1 : 0;
        if (small_steps >= 3)
        {
            converged = true;
            ++it;
            break;
        }
    }
    return detail::finish_result(lik, TriangularParameterization::density(p), it, converged, std::move(trace));
}

/// Same reconstruction after subtracting rate_k * duration_k from each count
/// (rounded, floored at zero).
inline TomographyData subtract_tomography_accidentals(const TomographyData& data, std::span<const double> rates)
{
    if (rates.size() != data.size())
        throw ConfigError("need one accidental rate per tomography setting");
    TomographyData out = data;
    for (std::size_t k = 0; k < out.size(); ++k)
    {
        if (!(rates[k] >= 0.0) || !std::isfinite(rates[k]))
            throw DomainError("accidental rates must be finite and non-negative");
        const double v = std::round(static_cast<double>(out[k].count) - rates[k] * out[k].duration_s);
        out[k].count = v > 0.0 ? static_cast<std::uint64_t>(v) : 0u;
    }
    return out;
}

inline ReconstructionResult reconstruct_with_accidental_subtraction(const TomographyData& data,
                                                                    std::span<const double> rates,
                                                                    const MlOptions& opt = {})
{
    return ml_reconstruction(subtract_tomography_accidentals(data, rates), opt);
}

inline ReconstructionResult reconstruct_with_accidental_subtraction(const TomographyData& data, double rate,
                                                                    const MlOptions& opt = {})
{
    const std::vector<double> rates(data.size(), rate);
    return reconstruct_with_accidental_subtraction(data, rates, opt);
}

/// Parametric bootstrap: Poisson resamples about the observed counts, each
/// reconstructed; returns the sample standard deviation of the fidelity
/// with Phi+.
inline double fidelity_error_bar(const TomographyData& data, int n_resamples, std::uint64_t seed,
                                 const MlOptions& opt = {})
{
    if (n_resamples < 100)
        throw DomainError("bootstrap needs at least 100 resamples");
    detail::require_sixteen(data);
    std::vector<double> f;
    f.reserve(static_cast<std::size_t>(n_resamples));
    for (int r = 0; r < n_resamples; ++r)
    {
        auto rng = detail::make_engine(seed, kTomographyStream + 1, static_cast<std::uint64_t>(r));
        TomographyData sample = data;
        for (auto& s : sample)
            if (s.count > 0)
                s.count = std::poisson_distribution<std::uint64_t>(static_cast<double>(s.count))(rng);
        try
        {
            f.push_back(ml_reconstruction(sample, opt).fidelity_with_phi_plus);
        }
        catch (const UndefinedEstimateError&)
        {
        }
    }
    if (f.size() < 2)
        throw UndefinedEstimateError("too few usable bootstrap resamples");
    double mean = 0.0;
    for (double x : f)
        mean += x;
    mean /= static_cast<double>(f.size());
    double ss = 0.0;
    for (double x : f)
        ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(f.size() - 1));
}

// I/O ------------------------------------------------------------------------

inline constexpr std::string_view kTomographyCsvHeader = "index,proj_a,proj_b,count,duration_s";

inline void write_tomography_csv(std::ostream& os, const TomographyData& data)
{
    os << kTomographyCsvHeader << '\n';
    for (const auto& s : data)
        os << s.index << ',' << to_string(s.proj_a) << ',' << to_string(s.proj_b) << ',' << s.count << ','
           << csv::format_g9(s.duration_s) << '\n';
}

inline TomographyData read_tomography_csv(std::istream& is)
{
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(is, line))
        throw ParseError("empty tomography file", 1);
    csv::strip_cr(line);
    if (line != kTomographyCsvHeader)
        throw ParseError("unexpected header '" + line + "'", line_no);
    TomographyData data;
    while (std::getline(is, line))
    {
        ++line_no;
        csv::strip_cr(line);
        if (line.empty())
            continue;
        const auto f = csv::split(line);
        if (f.size() != 5)
            throw ParseError("expected 5 fields, found " + std::to_string(f.size()), line_no);
        TomographySetting s;
        const auto idx = csv::parse_count(f[0], line_no);
        if (idx < 1 || idx > 16)
            throw ParseError("setting index out of range", line_no);
        s.index = static_cast<int>(idx);
        const auto a = parse_projector_code(f[1]);
        const auto b = parse_projector_code(f[2]);
        if (!a || !b)
            throw ParseError("unknown projector code", line_no);
        s.proj_a = *a;
        s.proj_b = *b;
        s.count = csv::parse_count(f[3], line_no);
        s.duration_s = csv::parse_real(f[4], line_no);
        if (!(s.duration_s > 0.0))
            throw ParseError("duration must be positive", line_no);
        data.push_back(s);
    }
    if (data.size() != 16)
        throw ParseError("expected 16 settings, found " + std::to_string(data.size()), line_no);
    return data;
}

inline TomographyData tomography_from_csv(const std::string& text)
{
    std::istringstream is(text);
    return read_tomography_csv(is);
}

inline std::string tomography_to_csv(const TomographyData& data)
{
    std::ostringstream os;
    write_tomography_csv(os, data);
    return os.str();
}

inline void to_json(nlohmann::json& j, const ReconstructionResult& r)
{
    auto rows = nlohmann::json::array();
    for (int i = 0; i < 4; ++i)
    {
        auto row = nlohmann::json::array();
        for (int k = 0; k < 4; ++k)
            row.push_back({r.rho(i, k).real(), r.rho(i, k).imag()});
        rows.push_back(row);
    }
    j = nlohmann::json{{"rho", rows},
                       {"fidelity", r.fidelity_with_phi_plus},
                       {"predicted_s", r.predicted_s},
                       {"log_likelihood", r.log_likelihood},
                       {"n_ref", r.n_ref},
                       {"iterations", r.iterations},
                       {"converged", r.converged}};
}

inline void from_json(const nlohmann::json& j, ReconstructionResult& r)
{
    Operator4 m;
    const auto& rows = j.at("rho");
    if (rows.size() != 4)
        throw ParseError("rho must have 4 rows", 0);
    for (int i = 0; i < 4; ++i)
    {
        if (rows[i].size() != 4)
            throw ParseError("rho rows must have 4 entries", 0);
        for (int k = 0; k < 4; ++k)
            m(i, k) = Complex(rows[i][k].at(0).get<double>(), rows[i][k].at(1).get<double>());
    }
    r.rho = DensityOperator::from_matrix(m);
    r.fidelity_with_phi_plus = j.at("fidelity").get<double>();
    r.predicted_s = j.at("predicted_s").get<double>();
    r.log_likelihood = j.at("log_likelihood").get<double>();
    r.n_ref = j.value("n_ref", 0.0);
    r.iterations = j.value("iterations", 0);
    r.converged = j.value("converged", false);
    r.objective_trace.clear();
}

} // namespace etbell

#endif // ETBELL_TOMOGRAPHY_HPP_
