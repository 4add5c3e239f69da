// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "etbell/event_sim.hpp"

using namespace etbell;

namespace
{

GeometryConfig ideal(Scheme scheme, double visibility)
{
    GeometryConfig cfg;
    cfg.scheme = scheme;
    cfg.visibility = visibility;
    cfg.detection_efficiency = 1.0;
    return cfg;
}

std::vector<PhotonPairRecord> propagate_all(const GeometryConfig& cfg, std::uint64_t pairs, double phi_a,
                                            double phi_b, std::uint64_t seed)
{
    PairStream stream(cfg, std::nullopt, pairs, detail::make_engine(seed, 0, 0));
    auto rng = detail::make_engine(seed, 0, 1);
    const PairPropagator prop(cfg, phi_a, phi_b);
    std::vector<PhotonPairRecord> out;
    while (auto r = stream.next())
        out.push_back(prop(*r, rng));
    return out;
}

PhotonPairRecord manual_pair(std::uint64_t index, double t, Station sa, int da, double ta, Station sb, int db,
                             double tb)
{
    PhotonPairRecord r;
    r.index = index;
    r.emission_time = t;
    r.station_a = sa;
    r.detector_a = da;
    r.arrival_time_a = ta;
    r.station_b = sb;
    r.detector_b = db;
    r.arrival_time_b = tb;
    return r;
}

} // namespace

TEST(GeometryConfig, Validation)
{
    GeometryConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.coincidence_window = 3e-9;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = GeometryConfig{};
    cfg.pair_rate = 0.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = GeometryConfig{};
    cfg.detection_efficiency = 0.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = GeometryConfig{};
    cfg.dead_time = -1e-9;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(GeneratePairs, PoissonCount)
{
    const auto records = generate_pairs(GeometryConfig{}, 1.0, 42).collect();
    EXPECT_NEAR(static_cast<double>(records.size()), 1e4, 4.0 * std::sqrt(1e4));
    for (std::size_t k = 1; k < records.size(); ++k)
        ASSERT_LE(records[k - 1].emission_time, records[k].emission_time);
}

TEST(GeneratePairs, ZeroDurationIsEmpty)
{
    EXPECT_TRUE(generate_pairs(GeometryConfig{}, 0.0, 1).collect().empty());
    EXPECT_THROW(generate_pairs(GeometryConfig{}, -1.0, 1), ConfigError);
}

TEST(GeneratePairs, DeterministicPerSeed)
{
    const auto a = generate_pairs(GeometryConfig{}, 0.1, 7).collect();
    const auto b = generate_pairs(GeometryConfig{}, 0.1, 7).collect();
    const auto c = generate_pairs(GeometryConfig{}, 0.1, 8).collect();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k)
        EXPECT_EQ(a[k].emission_time, b[k].emission_time);
    EXPECT_FALSE(a.size() == c.size() && a.front().emission_time == c.front().emission_time);
}

TEST(PropagatePair, PerfectVisibilityOnlyCorrelatedPorts)
{
    const auto recs = propagate_all(ideal(Scheme::Franson, 1.0), 20000, 0.0, 0.0, 3);
    int seen = 0;
    for (const auto& r : recs)
    {
        const auto cls = r.pair_class();
        if (cls != PairClass::SS && cls != PairClass::LL)
            continue;
        ++seen;
        EXPECT_EQ(r.detector_a, r.detector_b);
    }
    EXPECT_GT(seen, 9000);
}

TEST(PropagatePair, PathArithmetic)
{
    const auto cfg = ideal(Scheme::Franson, 0.9);
    const auto recs = propagate_all(cfg, 2000, 0.3, -0.2, 5);
    for (const auto& r : recs)
    {
        const double dt = r.arrival_time_a - r.arrival_time_b;
        switch (r.pair_class())
        {
        case PairClass::SL:
            EXPECT_NEAR(dt, -cfg.path_delay, 1e-15);
            break;
        case PairClass::LS:
            EXPECT_NEAR(dt, cfg.path_delay, 1e-15);
            break;
        default:
            EXPECT_NEAR(dt, 0.0, 1e-15);
        }
        const double expect_a =
            r.emission_time + cfg.base_transit + (r.path_a == PathState::Long ? cfg.path_delay : 0.0);
        EXPECT_DOUBLE_EQ(r.arrival_time_a, expect_a);
    }
}

TEST(PropagatePair, HugRoutesMixedClassesToOneStation)
{
    const auto recs = propagate_all(ideal(Scheme::Hug, 0.9), 4000, 0.0, 0.0, 9);
    for (const auto& r : recs)
    {
        const auto cls = r.pair_class();
        if (cls == PairClass::SL)
        {
            EXPECT_EQ(r.station_a, Station::A);
            EXPECT_EQ(r.station_b, Station::A);
        }
        else if (cls == PairClass::LS)
        {
            EXPECT_EQ(r.station_a, Station::B);
            EXPECT_EQ(r.station_b, Station::B);
        }
        else
        {
            EXPECT_NE(r.station_a, r.station_b);
        }
    }
}

TEST(PropagatePair, EmpiricalCorrelationMatchesQuantumCore)
{
    const auto cfg = ideal(Scheme::Franson, 0.9);
    for (const auto& sp : setting_pairs(canonical_settings()))
    {
        const auto recs = propagate_all(cfg, 100000, sp.phi_a, sp.phi_b, 11);
        double same = 0, diff = 0;
        for (const auto& r : recs)
        {
            const auto cls = r.pair_class();
            if (cls != PairClass::SS && cls != PairClass::LL)
                continue;
            (r.detector_a == r.detector_b ? same : diff) += 1.0;
        }
        const double e = (same - diff) / (same + diff);
        EXPECT_NEAR(e, correlation(werner_like(0.9), sp.phi_a, sp.phi_b), 0.02) << sp.label;
    }
}

TEST(PropagatePair, LossesFollowEfficiency)
{
    GeometryConfig cfg;
    cfg.detection_efficiency = 0.15;
    const auto recs = propagate_all(cfg, 50000, 0.0, 0.0, 13);
    double detected = 0;
    for (const auto& r : recs)
        detected += (r.detector_a != kNoDetector) + (r.detector_b != kNoDetector);
    const double n = 2.0 * recs.size();
    EXPECT_NEAR(detected / n, 0.15, 4.0 * std::sqrt(0.15 * 0.85 / n));
}

TEST(FindCoincidences, FransonSelectsHalf)
{
    const auto cfg = ideal(Scheme::Franson, 0.9);
    const auto recs = propagate_all(cfg, 100000, kPi / 4, 0.0, 17);
    const auto coinc = find_coincidences(recs, cfg);
    std::size_t accepted = 0, rejected = 0;
    for (const auto& c : coinc)
    {
        // Two pairs a few ns apart can cross-pair even without background.
        if (c.pair_class == PairClass::Accidental)
            continue;
        if (c.accepted)
        {
            ++accepted;
            EXPECT_TRUE(c.pair_class == PairClass::SS || c.pair_class == PairClass::LL);
            EXPECT_LE(std::abs(c.time_a - c.time_b), cfg.coincidence_window);
        }
        else
        {
            ++rejected;
            EXPECT_TRUE(c.pair_class == PairClass::SL || c.pair_class == PairClass::LS);
            EXPECT_NEAR(std::abs(c.time_a - c.time_b), cfg.path_delay, cfg.coincidence_window);
        }
    }
    EXPECT_NEAR(double(accepted + rejected), double(recs.size()), 10.0);
    EXPECT_NEAR(static_cast<double>(accepted) / recs.size(), 0.5, 0.01);
}

TEST(FindCoincidences, HugHasNoCrossClassCoincidences)
{
    const auto cfg = ideal(Scheme::Hug, 0.9);
    const auto recs = propagate_all(cfg, 100000, kPi / 4, 0.0, 19);
    const auto coinc = find_coincidences(recs, cfg);
    std::size_t accepted = 0;
    for (const auto& c : coinc)
    {
        if (c.pair_class == PairClass::Accidental)
            continue;
        if (c.accepted)
        {
            ++accepted;
            EXPECT_FALSE(c.local_station.has_value());
            EXPECT_TRUE(c.pair_class == PairClass::SS || c.pair_class == PairClass::LL);
        }
        else
        {
            ASSERT_TRUE(c.local_station.has_value());
            EXPECT_TRUE(c.pair_class == PairClass::SL || c.pair_class == PairClass::LS);
        }
    }
    EXPECT_NEAR(static_cast<double>(accepted) / recs.size(), 0.5, 0.01);
}

TEST(FindCoincidences, DeadTimeDropsSecondHit)
{
    GeometryConfig cfg; // dead_time = 1 ns
    const std::vector<PhotonPairRecord> recs{
        manual_pair(0, 0.0, Station::A, 1, 10e-9, Station::B, 1, 10e-9),
        manual_pair(1, 0.5e-9, Station::A, 1, 10.5e-9, Station::B, 2, 10.5e-9),
    };
    CoincidenceFinder finder(cfg);
    std::vector<CoincidenceRecord> out;
    auto sink = [&](const CoincidenceRecord& c) { out.push_back(c); };
    for (const auto& r : recs)
        finder.push(r, sink);
    finder.finish(sink);
    EXPECT_EQ(finder.dead_time_drops(), 1u);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_TRUE(out[0].accepted);
    EXPECT_EQ(out[0].detector_b, 1);

    cfg.dead_time = 0.4e-9;
    EXPECT_EQ(find_coincidences(recs, cfg).size(), 2u);
}

TEST(FindCoincidences, UnorderedInputRejected)
{
    GeometryConfig cfg;
    const std::vector<PhotonPairRecord> recs{
        manual_pair(0, 1e-6, Station::A, 1, 1e-6, Station::B, 1, 1e-6),
        manual_pair(1, 0.0, Station::A, 1, 0.0, Station::B, 1, 0.0),
    };
    EXPECT_THROW(find_coincidences(recs, cfg), ProcessingError);
}

TEST(FindCoincidences, ClassificationInputs)
{
    // Franson: two stations, one path delay apart -> rejected by time tags.
    GeometryConfig franson;
    const std::vector<PhotonPairRecord> sat{manual_pair(0, 0.0, Station::A, 1, 5e-9, Station::B, 1, 8e-9)};
    auto c = find_coincidences(sat, franson);
    ASSERT_EQ(c.size(), 1u);
    EXPECT_FALSE(c[0].accepted);
    EXPECT_FALSE(c[0].local_station.has_value());

    // Hug: two simultaneous hits at one station are rejected on station
    // identity, whatever their timing.
    GeometryConfig hug;
    hug.scheme = Scheme::Hug;
    const std::vector<PhotonPairRecord> local{manual_pair(0, 0.0, Station::A, 1, 5e-9, Station::A, 2, 5e-9)};
    c = find_coincidences(local, hug);
    ASSERT_EQ(c.size(), 1u);
    EXPECT_FALSE(c[0].accepted);
    EXPECT_EQ(c[0].local_station, Station::A);

    const std::vector<PhotonPairRecord> cross{manual_pair(0, 0.0, Station::A, 2, 5e-9, Station::B, 1, 5.5e-9)};
    c = find_coincidences(cross, hug);
    ASSERT_EQ(c.size(), 1u);
    EXPECT_TRUE(c[0].accepted);
    EXPECT_EQ(c[0].detector_a, 2);
    EXPECT_EQ(c[0].detector_b, 1);
}

TEST(RunChsh, IdealVisibilityReachesTsirelson)
{
    const auto run = run_chsh_experiment_detailed(ideal(Scheme::Franson, 1.0), canonical_settings(), 1000000, 1);
    double s = 0.0;
    const auto pairs = setting_pairs(canonical_settings());
    for (int k = 0; k < 4; ++k)
    {
        const auto& c = run.tallies[k].accepted_by_ports;
        const double n = c[0] + c[1] + c[2] + c[3];
        s += pairs[k].sign * (double(c[0]) + c[3] - c[1] - c[2]) / n;
    }
    EXPECT_NEAR(s, kTsirelson, 0.01);
}

TEST(RunChsh, SubThresholdVisibility)
{
    for (auto [v, expect] : {std::pair{0.9, 2.546}, std::pair{0.5, 1.414}})
    {
        const auto table = run_chsh_experiment(ideal(Scheme::Franson, v), canonical_settings(), 200000, 2);
        double s = 0.0;
        for (const auto& sp : setting_pairs(canonical_settings()))
        {
            const auto* row = table.find(sp.phi_a, sp.phi_b);
            ASSERT_NE(row, nullptr);
            const auto& c = row->counts;
            s += sp.sign * (double(c[0]) + c[3] - c[1] - c[2]) / double(row->total());
        }
        EXPECT_NEAR(s, expect, 0.03) << "V=" << v;
    }
}

TEST(RunChsh, DeterministicAndOrderIndependent)
{
    GeometryConfig cfg;
    const auto a = run_chsh_experiment(cfg, canonical_settings(), 20000, 99);
    const auto b = run_chsh_experiment(cfg, canonical_settings(), 20000, 99);
    EXPECT_EQ(a, b);
    // A single setting pair simulated on its own matches the table row.
    const auto sp = setting_pairs(canonical_settings())[2];
    const auto t = simulate_setting(cfg, sp.phi_a, sp.phi_b, 20000, 99, 2);
    EXPECT_EQ(t.accepted_by_ports, a.rows()[2].counts);
    EXPECT_THROW(run_chsh_experiment(cfg, canonical_settings(), 0, 1), ConfigError);
}

TEST(FringeScan, ExtremaAndMarginals)
{
    const auto cfg = ideal(Scheme::Franson, 0.9);
    const auto grid = uniform_phase_grid(16);
    const auto scan = fringe_scan(cfg, 0.0, grid, 20000, 4);
    const auto c11 = scan.curve(1, 1);
    EXPECT_EQ(std::max_element(c11.begin(), c11.end()) - c11.begin(), 0);
    EXPECT_EQ(std::min_element(c11.begin(), c11.end()) - c11.begin(), 8); // phi_a = pi
    for (std::size_t k = 0; k < grid.size(); ++k)
    {
        const auto& c = scan.counts[k];
        const double accepted = double(c[0] + c[1] + c[2] + c[3]);
        const double row1 = double(c[0] + c[1]);
        EXPECT_NEAR(row1 / accepted, 0.5, 4.0 * std::sqrt(0.25 / accepted));
    }
}

TEST(FringeScan, NoInterferenceIsFlat)
{
    const auto scan = fringe_scan(ideal(Scheme::Franson, 0.0), 0.0, uniform_phase_grid(12), 20000, 6);
    for (int i = 1; i <= 2; ++i)
        for (int j = 1; j <= 2; ++j)
            for (double c : scan.curve(i, j))
                EXPECT_NEAR(c, 2500.0, 5.0 * std::sqrt(2500.0));
    EXPECT_THROW(fringe_scan(GeometryConfig{}, 0.0, std::vector<double>{}, 10, 1), ConfigError);
}

// --- properties ----------------------------------------------------------

TEST(EventSimProperty, HugSelectionIndependentOfSettings)
{
    GeometryConfig cfg;
    cfg.scheme = Scheme::Hug;
    cfg.detection_efficiency = 0.6;
    const std::vector<std::pair<double, double>> choices{{0.0, 0.0}, {kPi / 4, -kPi / 2}, {2.0, 1.0}};
    std::vector<std::vector<bool>> status;
    for (auto [a, b] : choices)
    {
        const auto coinc = find_coincidences(propagate_all(cfg, 30000, a, b, 21), cfg);
        std::vector<bool> s;
        for (const auto& c : coinc)
            s.push_back(c.accepted);
        status.push_back(std::move(s));
    }
    EXPECT_EQ(status[0], status[1]);
    EXPECT_EQ(status[0], status[2]);
}

TEST(EventSimProperty, FransonAcceptanceFollowsPathClassOnly)
{
    const auto cfg = ideal(Scheme::Franson, 0.9);
    const auto x = find_coincidences(propagate_all(cfg, 30000, 0.0, 0.0, 23), cfg);
    const auto y = find_coincidences(propagate_all(cfg, 30000, 1.0, -2.0, 23), cfg);
    ASSERT_EQ(x.size(), y.size());
    for (std::size_t k = 0; k < x.size(); ++k)
    {
        EXPECT_EQ(x[k].accepted, y[k].accepted);
        EXPECT_EQ(x[k].pair_class, y[k].pair_class);
    }
}

TEST(EventSimProperty, EmpiricalProbabilitiesWithinBinomialError)
{
    const auto cfg = ideal(Scheme::Franson, 0.9);
    for (const auto& sp : setting_pairs(canonical_settings()))
    {
        const auto t = simulate_setting(cfg, sp.phi_a, sp.phi_b, 200000, 31, 0);
        const auto p = coincidence_probabilities(werner_like(0.9), sp.phi_a, sp.phi_b).as_array();
        const double n = double(t.accepted);
        EXPECT_GT(n, 99000.0);
        for (int k = 0; k < 4; ++k)
        {
            const double se = std::sqrt(p[k] * (1.0 - p[k]) / n);
            EXPECT_NEAR(t.accepted_by_ports[k] / n, p[k], 3.0 * se) << sp.label << " slot " << k;
        }
    }
}

TEST(EventSimProperty, DeadTimeNeverIncreasesAcceptedCounts)
{
    GeometryConfig cfg;
    cfg.detection_efficiency = 1.0;
    cfg.pair_rate = 2e7; // dense enough for dead time to matter
    cfg.background_rate = 5e6;
    cfg.path_delay = 3e-9;
    for (std::uint64_t seed : {1u, 2u, 3u})
    {
        std::uint64_t previous = std::numeric_limits<std::uint64_t>::max();
        for (double dead : {0.0, 1e-9, 5e-9, 20e-9, 100e-9})
        {
            cfg.dead_time = dead;
            const auto t = simulate_setting(cfg, 0.3, 0.1, 20000, seed, 0);
            EXPECT_LE(t.accepted, previous) << "dead_time " << dead;
            previous = t.accepted;
        }
    }
}

TEST(EventSimProperty, AccidentalsOnlyWithBackground)
{
    GeometryConfig cfg;
    cfg.detection_efficiency = 1.0;
    const auto clean = simulate_setting(cfg, 0.0, 0.0, 50000, 5, 0);
    EXPECT_EQ(clean.accidental_accepted, 0u);
    cfg.background_rate = 5e5;
    const auto noisy = simulate_setting(cfg, 0.0, 0.0, 50000, 5, 0);
    EXPECT_GT(noisy.accidental_accepted, 0u);
}

TEST(CountTableCsv, RoundTripAndFormat)
{
    const auto table = run_chsh_experiment(GeometryConfig{}, canonical_settings(), 5000, 3);
    const std::string csv = table.to_csv();
    EXPECT_EQ(csv.substr(0, csv.find('\n')), CountTable::kCsvHeader);
    EXPECT_NE(csv.find("AB,0.785398163,0,"), std::string::npos);
    const auto back = CountTable::from_csv(csv);
    ASSERT_EQ(back.size(), 4u);
    for (std::size_t k = 0; k < 4; ++k)
    {
        EXPECT_EQ(back.rows()[k].counts, table.rows()[k].counts);
        EXPECT_EQ(back.rows()[k].label, table.rows()[k].label);
        EXPECT_NEAR(back.rows()[k].phi_a, table.rows()[k].phi_a, 1e-8);
    }
    EXPECT_EQ(back.to_csv(), csv);
}

TEST(CountTableCsv, ParseErrorsCarryLineNumbers)
{
    const std::string header = std::string(CountTable::kCsvHeader) + "\n";
    try
    {
        CountTable::from_csv(header + "AB,0,0,1,2,3,4,2\nAB',0,1,-5,2,3,4,2\n");
        FAIL() << "expected ParseError";
    }
    catch (const ParseError& e)
    {
        EXPECT_EQ(e.line(), 3u);
    }
    EXPECT_THROW(CountTable::from_csv("wrong,header\n"), ParseError);
    EXPECT_THROW(CountTable::from_csv(header + "AB,0,0,1,2\n"), ParseError);
    EXPECT_THROW(CountTable::from_csv(""), ParseError);
}

TEST(CountTableMerge, Associative)
{
    GeometryConfig cfg;
    const auto s = canonical_settings();
    const auto a = run_chsh_experiment(cfg, s, 3000, 1);
    const auto b = run_chsh_experiment(cfg, s, 3000, 2);
    const auto c = run_chsh_experiment(cfg, s, 3000, 3);
    auto left = a;
    left.merge(b).merge(c);
    auto bc = b;
    bc.merge(c);
    auto right = a;
    right.merge(bc);
    for (std::size_t k = 0; k < 4; ++k)
    {
        EXPECT_EQ(left.rows()[k].counts, right.rows()[k].counts);
        EXPECT_NEAR(left.rows()[k].duration_s, right.rows()[k].duration_s, 1e-12);
    }
}
