// SPDX-License-Identifier: Apache-2.0

#ifndef ETBELL_QUANTUM_HPP_
#define ETBELL_QUANTUM_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string_view>

#include <Eigen/Dense>

#include "etbell/error.hpp"

// Exact predictions for a pair of path qubits, one per station. Each qubit
// lives in span{|S>, |L>} (short/long arm); the two-qubit basis order is
// fixed everywhere as (SS, SL, LS, LL), station A first.

namespace etbell
{

using Complex = std::complex<double>;
using Qubit = Eigen::Matrix2cd;
using Operator4 = Eigen::Matrix4cd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTsirelson = 2.0 * std::numbers::sqrt2;

enum class PathState : int
{
    Short = 0,
    Long = 1,
};

/// Basis index of a two-path product state, e.g. (Long, Short) -> 2 (LS).
constexpr int basis_index(PathState a, PathState b) noexcept
{
    return 2 * static_cast<int>(a) + static_cast<int>(b);
}

/// Maps any finite phase onto (-pi, pi].
inline double reduce_phase(double phi)
{
    if (!std::isfinite(phi))
        throw DomainError("phase must be finite");
    double r = std::remainder(phi, 2.0 * kPi);
    if (r <= -kPi)
        r += 2.0 * kPi;
    return r;
}

/// |phi> = (|L> + e^{i phi}|S>)/sqrt(2) as a column vector in (S, L).
inline Eigen::Vector2cd phase_ket(double phi)
{
    Eigen::Vector2cd v;
    v << std::polar(1.0, phi), Complex(1.0, 0.0);
    return v / std::numbers::sqrt2;
}

/// Projector of one analyzer output port. Port 1 selects |phi>, port 2 its
/// orthogonal complement.
class AnalyzerProjector
{
public:
    AnalyzerProjector(double phase, int port) : phase_(reduce_phase(phase)), port_(port)
    {
        if (port != 1 && port != 2)
            throw DomainError("analyzer port must be 1 or 2");
    }

    double phase() const noexcept { return phase_; }
    int port() const noexcept { return port_; }

    Qubit matrix() const
    {
        const Eigen::Vector2cd k = phase_ket(phase_);
        const Qubit p1 = k * k.adjoint();
        return port_ == 1 ? p1 : Qubit(Qubit::Identity() - p1);
    }

private:
    double phase_;
    int port_;
};

/// Dichotomic observable Pi_1 - Pi_2 of an analyzer set to `phi`.
inline Qubit analyzer_observable(double phi)
{
    return AnalyzerProjector(phi, 1).matrix() - AnalyzerProjector(phi, 2).matrix();
}

/// A validated two-qubit state: Hermitian, unit trace, positive semidefinite.
class DensityOperator
{
public:
    static constexpr double kHermitianTol = 1e-12;
    static constexpr double kTraceTol = 1e-12;
    static constexpr double kEigenTol = 1e-10;

    /// Throws DomainError unless `m` satisfies every state invariant.
    static DensityOperator from_matrix(const Operator4& m)
    {
        if (!m.allFinite())
            throw DomainError("density operator has non-finite entries");
        const double herm = (m - m.adjoint()).cwiseAbs().maxCoeff();
        if (herm > kHermitianTol)
            throw DomainError("density operator is not Hermitian");
        const Complex tr = m.trace();
        if (std::abs(tr.real() - 1.0) > kTraceTol || std::abs(tr.imag()) > kTraceTol)
            throw DomainError("density operator trace differs from 1");
        const Operator4 h = 0.5 * (m + m.adjoint());
        Eigen::SelfAdjointEigenSolver<Operator4> es(h, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -kEigenTol)
            throw DomainError("density operator is not positive semidefinite");
        return DensityOperator(h);
    }

    const Operator4& matrix() const noexcept { return m_; }
    Complex operator()(int row, int col) const { return m_(row, col); }
    double trace() const { return m_.trace().real(); }

    Eigen::Vector4d eigenvalues() const
    {
        return Eigen::SelfAdjointEigenSolver<Operator4>(m_, Eigen::EigenvaluesOnly).eigenvalues();
    }

private:
    explicit DensityOperator(const Operator4& m) : m_(m) {}

    Operator4 m_;
};

/// The four analyzer phases of a CHSH run, reduced to (-pi, pi].
class MeasurementSettings
{
public:
    MeasurementSettings(double phi_a, double phi_a_prime, double phi_b, double phi_b_prime)
        : a_(reduce_phase(phi_a)),
          a_prime_(reduce_phase(phi_a_prime)),
          b_(reduce_phase(phi_b)),
          b_prime_(reduce_phase(phi_b_prime))
    {}

    double phi_a() const noexcept { return a_; }
    double phi_a_prime() const noexcept { return a_prime_; }
    double phi_b() const noexcept { return b_; }
    double phi_b_prime() const noexcept { return b_prime_; }

    bool operator==(const MeasurementSettings&) const = default;

private:
    double a_, a_prime_, b_, b_prime_;
};

/// One term of the CHSH sum.
struct SettingPair
{
    std::string_view label;
    int index_a; ///< 0 = unprimed, 1 = primed
    int index_b;
    double phi_a;
    double phi_b;
    int sign;
};

/// S = E(a,b) + E(a',b) + E(a,b') - E(a',b'), in that order.
inline std::array<SettingPair, 4> setting_pairs(const MeasurementSettings& s)
{
    return {{
        {"AB", 0, 0, s.phi_a(), s.phi_b(), +1},
        {"A'B", 1, 0, s.phi_a_prime(), s.phi_b(), +1},
        {"AB'", 0, 1, s.phi_a(), s.phi_b_prime(), +1},
        {"A'B'", 1, 1, s.phi_a_prime(), s.phi_b_prime(), -1},
    }};
}

/// Phases that reach S = 2 sqrt(2) V under the CHSH combination above.
/// phi_b' is -pi/2: with +pi/2 the same combination evaluates to zero.
inline MeasurementSettings canonical_settings()
{
    return MeasurementSettings(kPi / 4.0, -kPi / 4.0, 0.0, -kPi / 2.0);
}

/// The same four phases with phi_b' = +pi/2, kept for comparison.
inline MeasurementSettings printed_settings()
{
    return MeasurementSettings(kPi / 4.0, -kPi / 4.0, 0.0, kPi / 2.0);
}

struct CoincidenceProbabilities
{
    double p11 = 0.0;
    double p12 = 0.0;
    double p21 = 0.0;
    double p22 = 0.0;

    /// (i, j) with i, j in {1, 2}.
    double at(int i, int j) const
    {
        if (i == 1)
            return j == 1 ? p11 : p12;
        return j == 1 ? p21 : p22;
    }

    std::array<double, 4> as_array() const { return {p11, p12, p21, p22}; }
    double sum() const { return p11 + p12 + p21 + p22; }
};

inline DensityOperator bell_phi_plus()
{
    Operator4 m = Operator4::Zero();
    m(0, 0) = m(0, 3) = m(3, 0) = m(3, 3) = 0.5;
    return DensityOperator::from_matrix(m);
}

/// V |Phi+><Phi+| + (1 - V)(|SS><SS| + |LL><LL|)/2: Phi+ with its SS/LL
/// coherence scaled by V.
inline DensityOperator werner_like(double visibility)
{
    if (!(visibility >= 0.0 && visibility <= 1.0))
        throw DomainError("visibility must lie in [0, 1]");
    Operator4 m = Operator4::Zero();
    m(0, 0) = m(3, 3) = 0.5;
    m(0, 3) = m(3, 0) = 0.5 * visibility;
    return DensityOperator::from_matrix(m);
}

/// Pure product state |a b><a b| in the path basis.
inline DensityOperator path_product_state(PathState a, PathState b)
{
    Operator4 m = Operator4::Zero();
    const int k = basis_index(a, b);
    m(k, k) = 1.0;
    return DensityOperator::from_matrix(m);
}

inline DensityOperator maximally_mixed()
{
    return DensityOperator::from_matrix(Operator4::Identity() / 4.0);
}

inline Operator4 kron(const Qubit& a, const Qubit& b)
{
    Operator4 out;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
    return out;
}

inline double expectation(const DensityOperator& rho, const Operator4& op)
{
    return (rho.matrix() * op).trace().real();
}

inline CoincidenceProbabilities coincidence_probabilities(const DensityOperator& rho, double phi_a,
                                                          double phi_b)
{
    const std::array<Qubit, 2> pa{AnalyzerProjector(phi_a, 1).matrix(),
                                  AnalyzerProjector(phi_a, 2).matrix()};
    const std::array<Qubit, 2> pb{AnalyzerProjector(phi_b, 1).matrix(),
                                  AnalyzerProjector(phi_b, 2).matrix()};
    auto p = [&](int i, int j) { return expectation(rho, kron(pa[i], pb[j])); };
    return {p(0, 0), p(0, 1), p(1, 0), p(1, 1)};
}

inline double correlation(const DensityOperator& rho, double phi_a, double phi_b)
{
    const auto p = coincidence_probabilities(rho, phi_a, phi_b);
    return p.p11 + p.p22 - p.p12 - p.p21;
}

inline double chsh_value(const DensityOperator& rho, const MeasurementSettings& s)
{
    double total = 0.0;
    for (const auto& pair : setting_pairs(s))
        total += pair.sign * correlation(rho, pair.phi_a, pair.phi_b);
    return total;
}

/// Bell operator whose expectation in any state is chsh_value(rho, s).
inline Operator4 chsh_operator(const MeasurementSettings& s)
{
    Operator4 op = Operator4::Zero();
    for (const auto& pair : setting_pairs(s))
        op += double(pair.sign) * kron(analyzer_observable(pair.phi_a), analyzer_observable(pair.phi_b));
    return 0.5 * (op + op.adjoint());
}

namespace detail
{

/// Square root of a PSD matrix; eigenvalues at rounding level are treated
/// as exact zeros.
inline Operator4 psd_sqrt(const Operator4& m)
{
    Eigen::SelfAdjointEigenSolver<Operator4> es(m);
    const double floor = 64.0 * std::numeric_limits<double>::epsilon() *
                         std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    Eigen::Vector4d root;
    for (int i = 0; i < 4; ++i)
        root(i) = es.eigenvalues()(i) > floor ? std::sqrt(es.eigenvalues()(i)) : 0.0;
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().adjoint();
}

} // namespace detail

/// Jozsa fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2, evaluated as the
/// squared trace norm of sqrt(rho) sqrt(sigma).
inline double fidelity(const DensityOperator& rho, const DensityOperator& sigma)
{
    const Operator4 overlap = detail::psd_sqrt(rho.matrix()) * detail::psd_sqrt(sigma.matrix());
    Eigen::JacobiSVD<Operator4> svd(overlap);
    const double trace_norm = svd.singularValues().sum();
    return std::clamp(trace_norm * trace_norm, 0.0, 1.0);
}

/// Validating overload for raw matrices; throws DomainError on non-states.
inline double fidelity(const Operator4& rho, const Operator4& sigma)
{
    return fidelity(DensityOperator::from_matrix(rho), DensityOperator::from_matrix(sigma));
}

} // namespace etbell

#endif // ETBELL_QUANTUM_HPP_
