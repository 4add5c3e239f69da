// SPDX-License-Identifier: Apache-2.0

#ifndef ETBELL_TESTS_SUPPORT_HPP_
#define ETBELL_TESTS_SUPPORT_HPP_

#include <random>

#include "etbell/quantum.hpp"

namespace etbell::test_support
{

/// rho = G G^dagger / tr(G G^dagger) with G complex Gaussian.
inline DensityOperator random_density_operator(std::mt19937_64& rng)
{
    std::normal_distribution<double> g;
    Operator4 f;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            f(i, j) = Complex(g(rng), g(rng));
    Operator4 m = f * f.adjoint();
    m /= m.trace().real();
    m = 0.5 * (m + m.adjoint());
    return DensityOperator::from_matrix(m);
}

/// Random pure state |psi><psi|.
inline DensityOperator random_pure_state(std::mt19937_64& rng)
{
    std::normal_distribution<double> g;
    Eigen::Vector4cd v;
    for (int i = 0; i < 4; ++i)
        v(i) = Complex(g(rng), g(rng));
    v.normalize();
    Operator4 m = v * v.adjoint();
    m = 0.5 * (m + m.adjoint());
    m /= m.trace().real();
    return DensityOperator::from_matrix(m);
}

} // namespace etbell::test_support

#endif // ETBELL_TESTS_SUPPORT_HPP_
