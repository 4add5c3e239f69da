// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "etbell/lhv.hpp"
#include "etbell/simplex.hpp"

using namespace etbell;

namespace
{

LinearProgram make_lp(std::initializer_list<std::initializer_list<double>> a, std::initializer_list<double> b,
                      std::initializer_list<double> c)
{
    LinearProgram lp;
    lp.a_eq.resize(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(a.begin()->size()));
    Eigen::Index i = 0;
    for (const auto& row : a)
    {
        Eigen::Index j = 0;
        for (double v : row)
            lp.a_eq(i, j++) = v;
        ++i;
    }
    lp.b_eq = Eigen::Map<const Eigen::VectorXd>(b.begin(), static_cast<Eigen::Index>(b.size()));
    if (c.size() > 0)
        lp.c = Eigen::Map<const Eigen::VectorXd>(c.begin(), static_cast<Eigen::Index>(c.size()));
    return lp;
}

const PostselectionRule kNone{PostselectionKind::None};
const PostselectionRule kTagMatch{PostselectionKind::TagMatch};
const PostselectionRule kSettingIndependent{PostselectionKind::SettingIndependent};

} // namespace

// Simplex ------------------------------------------------------------------

TEST(Simplex, SmallProgramWithSlacks)
{
    // max 3x + 2y  s.t. x + y + s1 = 4, x + 3y + s2 = 6  ->  x = 4, y = 0.
    const auto lp = make_lp({{1, 1, 1, 0}, {1, 3, 0, 1}}, {4, 6}, {3, 2, 0, 0});
    const auto r = solve_lp(lp);
    ASSERT_EQ(r.status, LpStatus::Optimal);
    EXPECT_NEAR(r.objective, 12.0, 1e-12);
    EXPECT_NEAR(r.x(0), 4.0, 1e-12);
    EXPECT_LT(r.residual, 1e-12);
}

TEST(Simplex, NegativeRightHandSide)
{
    // -x - y = -2, minimize x (maximize -x)  ->  x = 0, y = 2.
    const auto r = solve_lp(make_lp({{-1, -1}}, {-2}, {-1, 0}));
    ASSERT_EQ(r.status, LpStatus::Optimal);
    EXPECT_NEAR(r.x(0), 0.0, 1e-12);
    EXPECT_NEAR(r.x(1), 2.0, 1e-12);
}

TEST(Simplex, Infeasible)
{
    const auto r = solve_lp(make_lp({{1, 1}, {1, 1}}, {1, 2}, {}));
    EXPECT_EQ(r.status, LpStatus::Infeasible);
    EXPECT_NEAR(r.infeasibility, 1.0, 1e-12);
}

TEST(Simplex, Unbounded)
{
    const auto r = solve_lp(make_lp({{1, -1}}, {1}, {1, 0}));
    EXPECT_EQ(r.status, LpStatus::Unbounded);
}

TEST(Simplex, RedundantRowsLeaveNoArtificialInSolution)
{
    const auto r = solve_lp(make_lp({{1, 1, 0}, {2, 2, 0}, {0, 0, 1}}, {1, 2, 3}, {1, 2, 1}));
    ASSERT_EQ(r.status, LpStatus::Optimal);
    EXPECT_NEAR(r.objective, 5.0, 1e-12);
    EXPECT_LT(r.residual, 1e-12);
}

TEST(Simplex, BealeCyclingExampleTerminates)
{
    // Beale's example, which cycles under the textbook largest-coefficient rule.
    // min -3/4 x4 + 20 x5 - 1/2 x6 + 6 x7
    const auto lp = make_lp({{1, 0, 0, 0.25, -8, -1, 9}, {0, 1, 0, 0.5, -12, -0.5, 3}, {0, 0, 1, 0, 0, 1, 0}},
                            {0, 0, 1}, {0, 0, 0, 0.75, -20, 0.5, -6});
    const auto r = solve_lp(lp);
    ASSERT_EQ(r.status, LpStatus::Optimal);
    EXPECT_NEAR(r.objective, 1.25, 1e-12);
    EXPECT_LT(r.iterations, 50);
}

TEST(Simplex, DimensionMismatchRejected)
{
    auto lp = make_lp({{1, 1}}, {1}, {});
    lp.c = Eigen::VectorXd::Ones(3);
    EXPECT_THROW(solve_lp(lp), ConfigError);
}

// Strategy encoding ----------------------------------------------------------

TEST(LhvStrategies, IndexRoundTrip)
{
    const auto all = enumerate_joint_strategies();
    ASSERT_EQ(all.size(), 256u);
    for (int k = 0; k < 256; ++k)
    {
        EXPECT_EQ(all[static_cast<std::size_t>(k)].index(), k);
        EXPECT_EQ(JointStrategy::from_index(k), all[static_cast<std::size_t>(k)]);
    }
    EXPECT_THROW(JointStrategy::from_index(256), DomainError);
    EXPECT_THROW(PartyStrategy::from_index(-1), DomainError);
}

TEST(LhvStrategies, BitLayout)
{
    // setting 0: late, -1; setting 1: early, +1
    const auto p = PartyStrategy::from_index(0b0011);
    EXPECT_EQ(p.response[0].tag, Tag::Late);
    EXPECT_EQ(p.response[0].outcome, -1);
    EXPECT_EQ(p.response[1].tag, Tag::Early);
    EXPECT_EQ(p.response[1].outcome, +1);
}

TEST(LhvStrategies, DeterministicChshNeverExceedsTwo)
{
    int best = -100;
    for (const auto& s : enumerate_joint_strategies())
    {
        const int v = deterministic_chsh(s);
        EXPECT_TRUE(v == 2 || v == -2) << s.index();
        best = std::max(best, v);
    }
    EXPECT_EQ(best, 2);
}

TEST(LhvMixture, RejectsBadWeights)
{
    std::vector<double> w(256, 0.0);
    EXPECT_THROW(StrategyMixture::from_weights(w), DomainError);
    w[3] = -1.0;
    w[4] = 2.0;
    EXPECT_THROW(StrategyMixture::from_weights(w), DomainError);
    EXPECT_THROW(StrategyMixture::from_weights(std::vector<double>(10, 1.0)), DomainError);
}

TEST(LhvMixture, DegeneratePostselection)
{
    // A early at both settings, B late at both: tag matching never fires.
    const JointStrategy s{PartyStrategy::from_index(0), PartyStrategy::from_index(0b0101)};
    EXPECT_THROW(postselected_correlators(StrategyMixture::pure(s.index()), kTagMatch),
                 DegeneratePostselectionError);
}

TEST(LhvMixture, ScalingWeightsChangesNothing)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> w(256);
    for (auto& x : w)
        x = u(rng);
    std::vector<double> scaled(w);
    for (auto& x : scaled)
        x *= 37.5;
    for (const auto& rule : {kNone, kTagMatch, kSettingIndependent})
    {
        const auto a = postselected_correlators(StrategyMixture::from_weights(w), rule);
        const auto b = postselected_correlators(StrategyMixture::from_weights(scaled), rule);
        for (int k = 0; k < 4; ++k)
        {
            EXPECT_NEAR(a[k].e, b[k].e, 1e-12);
            EXPECT_NEAR(a[k].selection_rate, b[k].selection_rate, 1e-12);
        }
    }
}

TEST(LhvMixture, RandomMixturesRespectBoundWithoutTagDependence)
{
    std::mt19937_64 rng(5);
    std::exponential_distribution<double> ex(1.0);
    for (int trial = 0; trial < 200; ++trial)
    {
        std::vector<double> w(256);
        for (auto& x : w)
            x = ex(rng);
        const auto m = StrategyMixture::from_weights(w);
        EXPECT_LE(std::abs(postselected_chsh(m, kNone)), 2.0 + 1e-12);
        EXPECT_LE(std::abs(postselected_chsh(m, kSettingIndependent)), 2.0 + 1e-12);
    }
}

TEST(LhvMixture, TagMatchingTwoStrategyMixtureBeatsEveryPureStrategy)
{
    // Pure strategies accepted at all four pairs top out at 2. Two strategies,
    // each silent at some setting pairs, can combine into far more.
    double pure_best = -4.0;
    for (const auto& s : enumerate_joint_strategies())
    {
        try
        {
            pure_best = std::max(pure_best, postselected_chsh(StrategyMixture::pure(s.index()), kTagMatch));
        }
        catch (const DegeneratePostselectionError&)
        {
        }
    }
    EXPECT_DOUBLE_EQ(pure_best, 2.0);

    double mix_best = -4.0;
    for (int i = 0; i < 256; ++i)
        for (int j = i + 1; j < 256; ++j)
        {
            std::vector<double> w(256, 0.0);
            w[static_cast<std::size_t>(i)] = 1.0;
            w[static_cast<std::size_t>(j)] = 1.0;
            try
            {
                mix_best = std::max(mix_best, postselected_chsh(StrategyMixture::from_weights(w), kTagMatch));
            }
            catch (const DegeneratePostselectionError&)
            {
            }
        }
    EXPECT_DOUBLE_EQ(mix_best, 4.0);
}

TEST(LhvMixture, SettingIndependentIsConvex)
{
    std::mt19937_64 rng(9);
    std::exponential_distribution<double> ex(1.0);
    for (int trial = 0; trial < 50; ++trial)
    {
        std::vector<double> w1(256), w2(256), mix(256);
        for (auto& x : w1)
            x = ex(rng);
        for (auto& x : w2)
            x = ex(rng);
        const double s1 = postselected_chsh(StrategyMixture::from_weights(w1), kSettingIndependent);
        const double s2 = postselected_chsh(StrategyMixture::from_weights(w2), kSettingIndependent);
        const auto m1 = StrategyMixture::from_weights(w1), m2 = StrategyMixture::from_weights(w2);
        const double r1 = postselected_correlators(m1, kSettingIndependent)[0].selection_rate;
        const double r2 = postselected_correlators(m2, kSettingIndependent)[0].selection_rate;
        for (int k = 0; k < 256; ++k)
            mix[static_cast<std::size_t>(k)] = 0.5 * m1.weight(k) + 0.5 * m2.weight(k);
        const double s = postselected_chsh(StrategyMixture::from_weights(mix), kSettingIndependent);
        // Equal-rate selection across settings makes S of the mix the
        // rate-weighted average of the parts.
        EXPECT_NEAR(s, (r1 * s1 + r2 * s2) / (r1 + r2), 1e-12);
    }
}

// Maximization and reproduction ---------------------------------------------

TEST(LhvMaxChsh, PerRule)
{
    const auto none = max_postselected_chsh(kNone);
    EXPECT_NEAR(none.s_star, 2.0, 1e-9);
    const auto tag = max_postselected_chsh(kTagMatch);
    EXPECT_NEAR(tag.s_star, 4.0, 1e-9);
    EXPECT_NEAR(postselected_chsh(tag.witness, kTagMatch), tag.s_star, 1e-12);
    const auto si = max_postselected_chsh(kSettingIndependent);
    EXPECT_NEAR(si.s_star, 2.0, 1e-9);
    EXPECT_EQ(tag.rate_scan.size(), kRateGrid.size());
}

TEST(LhvReproduce, FransonReproducesIdealQuantum)
{
    const auto r = reproduce_quantum_statistics(canonical_settings(), 1.0, kTagMatch);
    ASSERT_TRUE(r.feasible);
    EXPECT_LT(r.residual, 1e-9);
    EXPECT_LT(reproduction_deviation(*r.mixture, kTagMatch, r.target), 1e-9);
    const auto c = postselected_correlators(*r.mixture, kTagMatch);
    for (int k = 0; k < 4; ++k)
        EXPECT_NEAR(c[static_cast<std::size_t>(k)].selection_rate, 0.5, 1e-9);
    EXPECT_NEAR(postselected_chsh(*r.mixture, kTagMatch), 2.0 * std::sqrt(2.0), 1e-9);
}

TEST(LhvReproduce, SettingIndependentCannotReproduceIdealQuantum)
{
    const auto r = reproduce_quantum_statistics(canonical_settings(), 1.0, kSettingIndependent);
    EXPECT_FALSE(r.feasible);
    EXPECT_FALSE(r.mixture.has_value());
    EXPECT_GT(r.infeasibility, 1e-6);
}

TEST(LhvReproduce, SettingIndependentReproducesLowVisibility)
{
    const auto r = reproduce_quantum_statistics(canonical_settings(), 0.6, kSettingIndependent);
    ASSERT_TRUE(r.feasible);
    EXPECT_LT(reproduction_deviation(*r.mixture, kSettingIndependent, r.target), 1e-9);
}

TEST(LhvReproduce, TargetValidation)
{
    EXPECT_THROW(quantum_target(canonical_settings(), 1.2), DomainError);
    EXPECT_THROW(quantum_target(canonical_settings(), 0.9, 0.0), DomainError);
}

TEST(LhvJson, WitnessRoundTrip)
{
    const auto tag = max_postselected_chsh(kTagMatch);
    const auto back = mixture_from_witness_json(witness_json(tag.witness));
    for (int k = 0; k < 256; ++k)
        EXPECT_NEAR(back.weight(k), tag.witness.weight(k), 1e-15);
    const auto j = to_report_json(tag);
    EXPECT_EQ(j.at("rule"), "tag_match");
    EXPECT_NEAR(j.at("s_star").get<double>(), 4.0, 1e-9);
}
