// SPDX-License-Identifier: Apache-2.0

#ifndef ETBELL_LHV_HPP_
#define ETBELL_LHV_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "etbell/error.hpp"
#include "etbell/quantum.hpp"
#include "etbell/simplex.hpp"

// Local hidden-variable adversary with time tags.
//
// A deterministic local strategy tells each party, for each of its two
// settings, which time slot (early/late) to fire in and which outcome to
// report. Coincidence postselection then acts on the tags. Under Franson-style
// tag matching the accepted subensemble can depend on both settings, which is
// what lets a local model exceed S = 2.

namespace etbell
{

enum class Tag : int
{
    Early = 0,
    Late = 1,
};

struct LocalResponse
{
    Tag tag = Tag::Early;
    int outcome = +1; ///< +1 (port 1) or -1 (port 2)

    bool operator==(const LocalResponse&) const = default;
};

/// Response table of one party: 4 choices per setting, 16 strategies.
/// Index bits (2x, 2x+1) encode setting x: low bit tag, high bit outcome sign.
struct PartyStrategy
{
    std::array<LocalResponse, 2> response;

    static PartyStrategy from_index(int index)
    {
        if (index < 0 || index >= 16)
            throw DomainError("party strategy index out of range");
        PartyStrategy p;
        for (int x = 0; x < 2; ++x)
        {
            const int bits = (index >> (2 * x)) & 3;
            p.response[x] = {static_cast<Tag>(bits & 1), (bits & 2) ? -1 : +1};
        }
        return p;
    }

    int index() const
    {
        int idx = 0;
        for (int x = 0; x < 2; ++x)
            idx |= ((static_cast<int>(response[x].tag)) | (response[x].outcome < 0 ? 2 : 0)) << (2 * x);
        return idx;
    }

    bool operator==(const PartyStrategy&) const = default;
};

inline constexpr int kPartyStrategies = 16;
inline constexpr int kJointStrategies = kPartyStrategies * kPartyStrategies;

struct JointStrategy
{
    PartyStrategy a;
    PartyStrategy b;

    /// 16 * index(a) + index(b).
    int index() const { return kPartyStrategies * a.index() + b.index(); }

    static JointStrategy from_index(int index)
    {
        if (index < 0 || index >= kJointStrategies)
            throw DomainError("joint strategy index out of range");
        return {PartyStrategy::from_index(index / kPartyStrategies), PartyStrategy::from_index(index % kPartyStrategies)};
    }

    int product(int x, int y) const { return a.response[x].outcome * b.response[y].outcome; }

    bool operator==(const JointStrategy&) const = default;
};

/// All 256 joint deterministic strategies, ordered by index.
inline std::vector<JointStrategy> enumerate_joint_strategies()
{
    std::vector<JointStrategy> out;
    out.reserve(kJointStrategies);
    for (int k = 0; k < kJointStrategies; ++k)
        out.push_back(JointStrategy::from_index(k));
    return out;
}

enum class PostselectionKind
{
    None,
    TagMatch,           ///< Franson: coincidence iff both tags agree
    SettingIndependent, ///< hug: acceptance fixed by the hidden strategy alone
};

inline std::string to_string(PostselectionKind k)
{
    switch (k)
    {
    case PostselectionKind::None:
        return "none";
    case PostselectionKind::TagMatch:
        return "tag_match";
    case PostselectionKind::SettingIndependent:
        return "setting_independent";
    }
    return "unknown";
}

struct PostselectionRule
{
    PostselectionKind kind = PostselectionKind::None;

    /// SettingIndependent accepts a strategy only if tag matching would accept
    /// it at every setting pair, i.e. all four tags agree. That is a function
    /// of the strategy index alone.
    bool accepts(const JointStrategy& s, int x, int y) const
    {
        switch (kind)
        {
        case PostselectionKind::None:
            return true;
        case PostselectionKind::TagMatch:
            return s.a.response[x].tag == s.b.response[y].tag;
        case PostselectionKind::SettingIndependent:
        {
            const Tag t = s.a.response[0].tag;
            return s.a.response[1].tag == t && s.b.response[0].tag == t && s.b.response[1].tag == t;
        }
        }
        return false;
    }
};

/// Setting-pair order used throughout: (0,0), (1,0), (0,1), (1,1), matching
/// S = E(a,b) + E(a',b) + E(a,b') - E(a',b').
inline constexpr std::array<std::array<int, 2>, 4> kSettingIndexPairs{{{0, 0}, {1, 0}, {0, 1}, {1, 1}}};
inline constexpr std::array<int, 4> kChshSigns{+1, +1, +1, -1};

/// Normalized weights over the 256 joint strategies.
class StrategyMixture
{
public:
    static constexpr double kNormTol = 1e-9;

    /// Normalizes non-negative raw weights.
    static StrategyMixture from_weights(std::span<const double> raw)
    {
        if (raw.size() != static_cast<std::size_t>(kJointStrategies))
            throw DomainError("mixture needs 256 weights");
        double total = 0.0;
        for (double w : raw)
        {
            if (!(w >= 0.0) || !std::isfinite(w))
                throw DomainError("mixture weights must be finite and non-negative");
            total += w;
        }
        if (!(total > 0.0))
            throw DomainError("mixture weights sum to zero");
        StrategyMixture m;
        for (int k = 0; k < kJointStrategies; ++k)
            m.w_[k] = raw[k] / total;
        return m;
    }

    static StrategyMixture pure(int index)
    {
        std::array<double, kJointStrategies> raw{};
        raw.at(static_cast<std::size_t>(index)) = 1.0;
        return from_weights(raw);
    }

    double weight(int index) const { return w_.at(static_cast<std::size_t>(index)); }
    const std::array<double, kJointStrategies>& weights() const noexcept { return w_; }

    std::vector<std::pair<int, double>> support(double threshold = 0.0) const
    {
        std::vector<std::pair<int, double>> out;
        for (int k = 0; k < kJointStrategies; ++k)
            if (w_[k] > threshold)
                out.emplace_back(k, w_[k]);
        return out;
    }

private:
    std::array<double, kJointStrategies> w_{};
};

struct PostselectedCorrelator
{
    double e = 0.0;
    double selection_rate = 0.0;
};

/// Correlator and selection rate at each setting pair, in CHSH order.
inline std::array<PostselectedCorrelator, 4> postselected_correlators(const StrategyMixture& m,
                                                                      const PostselectionRule& rule)
{
    std::array<PostselectedCorrelator, 4> out;
    for (std::size_t k = 0; k < 4; ++k)
    {
        const auto [x, y] = kSettingIndexPairs[k];
        double rate = 0.0, corr = 0.0;
        for (int idx = 0; idx < kJointStrategies; ++idx)
        {
            const double w = m.weight(idx);
            if (w == 0.0)
                continue;
            const auto s = JointStrategy::from_index(idx);
            if (!rule.accepts(s, x, y))
                continue;
            rate += w;
            corr += w * s.product(x, y);
        }
        if (!(rate > 0.0))
            throw DegeneratePostselectionError("nothing selected at setting pair (" + std::to_string(x) + "," +
                                               std::to_string(y) + ")");
        out[k] = {corr / rate, rate};
    }
    return out;
}

inline double postselected_chsh(const StrategyMixture& m, const PostselectionRule& rule)
{
    const auto c = postselected_correlators(m, rule);
    double s = 0.0;
    for (std::size_t k = 0; k < 4; ++k)
        s += kChshSigns[k] * c[k].e;
    return s;
}

/// Integer CHSH value of a deterministic strategy with every pair accepted.
inline int deterministic_chsh(const JointStrategy& s)
{
    int total = 0;
    for (std::size_t k = 0; k < 4; ++k)
        total += kChshSigns[k] * s.product(kSettingIndexPairs[k][0], kSettingIndexPairs[k][1]);
    return total;
}

struct MaxChshResult
{
    PostselectionRule rule;
    double s_star = 0.0;
    StrategyMixture witness;
    std::array<double, 4> selection_rates{};
    double pure_maximum = 0.0; ///< best single strategy accepted at all four pairs
    std::vector<std::pair<double, double>> rate_scan; ///< (target rate, best S), NaN when infeasible
};

/// Selection-rate targets swept by max_postselected_chsh.
inline constexpr std::array<double, 4> kRateGrid{0.25, 0.5, 0.75, 1.0};

/// Largest postselected S over strategy mixtures. Pure strategies are scanned
/// exhaustively; mixtures are searched by one LP per common selection rate
/// from kRateGrid, which turns the ratio objective into a linear one.
inline MaxChshResult max_postselected_chsh(const PostselectionRule& rule)
{
    MaxChshResult best;
    best.rule = rule;
    best.s_star = -std::numeric_limits<double>::infinity();

    const auto strategies = enumerate_joint_strategies();
    for (const auto& s : strategies)
    {
        bool everywhere = true;
        for (const auto& [x, y] : kSettingIndexPairs)
            everywhere = everywhere && rule.accepts(s, x, y);
        if (!everywhere)
            continue;
        const double v = deterministic_chsh(s);
        best.pure_maximum = std::max(best.pure_maximum, v);
        if (v > best.s_star)
        {
            best.s_star = v;
            best.witness = StrategyMixture::pure(s.index());
            best.selection_rates = {1.0, 1.0, 1.0, 1.0};
        }
    }

    for (double rate : kRateGrid)
    {
        LinearProgram lp;
        lp.a_eq = Eigen::MatrixXd::Zero(5, kJointStrategies);
        lp.b_eq = Eigen::VectorXd::Zero(5);
        lp.c = Eigen::VectorXd::Zero(kJointStrategies);
        lp.a_eq.row(0).setOnes();
        lp.b_eq(0) = 1.0;
        for (const auto& s : strategies)
        {
            const int j = s.index();
            for (std::size_t k = 0; k < 4; ++k)
            {
                const auto [x, y] = kSettingIndexPairs[k];
                if (!rule.accepts(s, x, y))
                    continue;
                lp.a_eq(1 + static_cast<Eigen::Index>(k), j) = 1.0;
                lp.c(j) += kChshSigns[k] * s.product(x, y) / rate;
            }
        }
        for (Eigen::Index k = 1; k < 5; ++k)
            lp.b_eq(k) = rate;

        const auto res = solve_lp(lp);
        if (res.status != LpStatus::Optimal)
        {
            best.rate_scan.emplace_back(rate, std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        if (res.residual > 1e-7)
            throw SolverError("CHSH maximization LP violates its constraints", res.residual);
        best.rate_scan.emplace_back(rate, res.objective);
        if (res.objective > best.s_star + 1e-12)
        {
            std::vector<double> w(res.x.data(), res.x.data() + res.x.size());
            best.witness = StrategyMixture::from_weights(w);
            best.s_star = postselected_chsh(best.witness, rule);
            const auto corr = postselected_correlators(best.witness, rule);
            for (std::size_t k = 0; k < 4; ++k)
                best.selection_rates[k] = corr[k].selection_rate;
        }
    }
    return best;
}

/// Target postselected statistics: per setting pair, accepted joint
/// probabilities of outcomes (++, +-, -+, --) = selection_rate * p_ij.
struct QuantumTarget
{
    MeasurementSettings settings;
    double visibility;
    double selection_rate;
    std::array<std::array<double, 4>, 4> joint; ///< [setting pair][outcome slot]
};

inline QuantumTarget quantum_target(const MeasurementSettings& s, double visibility, double selection_rate = 0.5)
{
    if (!(visibility >= 0.0 && visibility <= 1.0))
        throw DomainError("visibility must lie in [0, 1]");
    if (!(selection_rate > 0.0 && selection_rate <= 1.0))
        throw DomainError("selection rate must lie in (0, 1]");
    QuantumTarget t{s, visibility, selection_rate, {}};
    const auto rho = werner_like(visibility);
    const auto pairs = setting_pairs(s);
    for (std::size_t k = 0; k < 4; ++k)
    {
        const auto p = coincidence_probabilities(rho, pairs[k].phi_a, pairs[k].phi_b).as_array();
        for (std::size_t o = 0; o < 4; ++o)
            t.joint[k][o] = selection_rate * p[o];
    }
    return t;
}

struct ReproductionResult
{
    bool feasible = false;
    std::optional<StrategyMixture> mixture;
    double residual = 0.0;      ///< LP constraint residual
    double infeasibility = 0.0; ///< phase-one optimum
    QuantumTarget target;
};

namespace detail
{

/// Outcome slot of (+1,+1) -> 0, (+1,-1) -> 1, (-1,+1) -> 2, (-1,-1) -> 3.
inline int outcome_slot(int out_a, int out_b)
{
    return 2 * (out_a < 0 ? 1 : 0) + (out_b < 0 ? 1 : 0);
}

} // namespace detail

/// Searches for a strategy mixture whose postselected statistics equal the
/// quantum prediction for werner_like(V) at every setting pair, with the
/// given selection rate. Infeasibility is a result, not an error.
inline ReproductionResult reproduce_quantum_statistics(const MeasurementSettings& s, double visibility,
                                                       const PostselectionRule& rule, double selection_rate = 0.5)
{
    ReproductionResult out{false, std::nullopt, 0.0, 0.0, quantum_target(s, visibility, selection_rate)};

    LinearProgram lp;
    lp.a_eq = Eigen::MatrixXd::Zero(17, kJointStrategies);
    lp.b_eq = Eigen::VectorXd::Zero(17);
    lp.a_eq.row(0).setOnes();
    lp.b_eq(0) = 1.0;
    for (std::size_t k = 0; k < 4; ++k)
        for (std::size_t o = 0; o < 4; ++o)
            lp.b_eq(1 + static_cast<Eigen::Index>(4 * k + o)) = out.target.joint[k][o];
    for (const auto& st : enumerate_joint_strategies())
        for (std::size_t k = 0; k < 4; ++k)
        {
            const auto [x, y] = kSettingIndexPairs[k];
            if (!rule.accepts(st, x, y))
                continue;
            const int o = detail::outcome_slot(st.a.response[x].outcome, st.b.response[y].outcome);
            lp.a_eq(1 + static_cast<Eigen::Index>(4 * k + o), st.index()) = 1.0;
        }

    const auto res = solve_lp(lp);
    out.infeasibility = res.infeasibility;
    if (res.status == LpStatus::Infeasible)
        return out;
    if (res.status != LpStatus::Optimal)
        throw SolverError("reproduction LP did not terminate", res.residual);
    out.residual = res.residual;
    if (res.residual > 1e-7)
        throw SolverError("reproduction LP solution violates its constraints", res.residual);
    std::vector<double> w(res.x.data(), res.x.data() + res.x.size());
    out.mixture = StrategyMixture::from_weights(w);
    out.feasible = true;
    return out;
}

/// Independent check of a mixture against a target: recomputes the 16
/// accepted joint probabilities straight from the weights by decoding each
/// strategy's bits, and returns the largest deviation.
inline double reproduction_deviation(const StrategyMixture& m, const PostselectionRule& rule,
                                     const QuantumTarget& target)
{
    std::array<std::array<double, 4>, 4> got{};
    for (int idx = 0; idx < kJointStrategies; ++idx)
    {
        const double w = m.weight(idx);
        if (w == 0.0)
            continue;
        const int ia = idx >> 4, ib = idx & 15;
        for (std::size_t k = 0; k < 4; ++k)
        {
            const int x = static_cast<int>(k & 1), y = static_cast<int>(k >> 1);
            const int bits_a = (ia >> (2 * x)) & 3, bits_b = (ib >> (2 * y)) & 3;
            const bool all_same = ((ia & 1) == ((ia >> 2) & 1)) && ((ib & 1) == ((ib >> 2) & 1)) &&
                                  ((ia & 1) == (ib & 1));
            bool keep = true;
            if (rule.kind == PostselectionKind::TagMatch)
                keep = (bits_a & 1) == (bits_b & 1);
            else if (rule.kind == PostselectionKind::SettingIndependent)
                keep = all_same;
            if (keep)
                got[k][static_cast<std::size_t>(((bits_a >> 1) << 1) | (bits_b >> 1))] += w;
        }
    }
    double worst = 0.0;
    for (std::size_t k = 0; k < 4; ++k)
        for (std::size_t o = 0; o < 4; ++o)
            worst = std::max(worst, std::abs(got[k][o] - target.joint[k][o]));
    return worst;
}

// JSON ---------------------------------------------------------------------

inline nlohmann::json witness_json(const StrategyMixture& m, double threshold = 0.0)
{
    auto arr = nlohmann::json::array();
    for (const auto& [idx, w] : m.support(threshold))
        arr.push_back({{"strategy_index", idx}, {"weight", w}});
    return arr;
}

inline StrategyMixture mixture_from_witness_json(const nlohmann::json& arr)
{
    std::array<double, kJointStrategies> raw{};
    for (const auto& e : arr)
    {
        const int idx = e.at("strategy_index").get<int>();
        if (idx < 0 || idx >= kJointStrategies)
            throw ParseError("strategy_index out of range", 0);
        raw[static_cast<std::size_t>(idx)] += e.at("weight").get<double>();
    }
    return StrategyMixture::from_weights(raw);
}

inline nlohmann::json to_report_json(const MaxChshResult& r)
{
    nlohmann::json j{{"rule", to_string(r.rule.kind)},
                     {"s_star", r.s_star},
                     {"pure_maximum", r.pure_maximum},
                     {"selection_rates", r.selection_rates},
                     {"witness", witness_json(r.witness)}};
    auto scan = nlohmann::json::array();
    for (const auto& [rate, s] : r.rate_scan)
        scan.push_back({{"rate", rate}, {"s", std::isfinite(s) ? nlohmann::json(s) : nlohmann::json(nullptr)}});
    j["rate_scan"] = scan;
    return j;
}

} // namespace etbell

#endif // ETBELL_LHV_HPP_
