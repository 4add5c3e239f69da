// SPDX-License-Identifier: Apache-2.0

#ifndef ETBELL_EVENT_SIM_HPP_
#define ETBELL_EVENT_SIM_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "etbell/count_table.hpp"
#include "etbell/error.hpp"
#include "etbell/quantum.hpp"

// Event-level Monte Carlo of photon pairs sent through two unbalanced
// interferometers.
//
// Franson geometry: the photon headed for A always ends at station A, the
// other at station B; SL and LS pairs arrive one path delay apart and are
// rejected by comparing the two stations' time tags.
//
// Hug geometry: short arms stay local, long arms cross over to the other
// station. SS and LL pairs still give one photon per station; SL pairs put
// both photons at A and LS pairs both at B, so they never form an A-B
// coincidence and are rejected locally.

namespace etbell
{

enum class Scheme
{
    Franson,
    Hug,
};

enum class Station
{
    A,
    B,
};

enum class PairClass
{
    SS,
    SL,
    LS,
    LL,
    Accidental,
};

inline constexpr int kNoDetector = 0;

struct GeometryConfig
{
    Scheme scheme = Scheme::Franson;
    double path_delay = 3e-9;         ///< L - S travel-time difference [s]
    double coincidence_window = 1e-9; ///< [s]
    double dead_time = 1e-9;          ///< [s]
    double detection_efficiency = 0.15;
    double pair_rate = 1e4;           ///< [pairs/s]
    double visibility = 0.9;
    double base_transit = 5e-9;       ///< source-to-detector time over the short arm [s]
    double background_rate = 0.0;     ///< uncorrelated singles per detector [1/s]

    void validate() const
    {
        auto finite = [](double x) { return std::isfinite(x); };
        if (!(finite(path_delay) && path_delay > 0.0))
            throw ConfigError("path_delay must be positive");
        if (!(finite(coincidence_window) && coincidence_window > 0.0))
            throw ConfigError("coincidence_window must be positive");
        if (!(coincidence_window < path_delay))
            throw ConfigError("coincidence_window must be shorter than path_delay");
        if (!(finite(dead_time) && dead_time >= 0.0))
            throw ConfigError("dead_time must be non-negative");
        if (!(detection_efficiency > 0.0 && detection_efficiency <= 1.0))
            throw ConfigError("detection_efficiency must lie in (0, 1]");
        if (!(finite(pair_rate) && pair_rate > 0.0))
            throw ConfigError("pair_rate must be positive");
        if (!(visibility >= 0.0 && visibility <= 1.0))
            throw ConfigError("visibility must lie in [0, 1]");
        if (!(finite(base_transit) && base_transit >= 0.0))
            throw ConfigError("base_transit must be non-negative");
        if (!(finite(background_rate) && background_rate >= 0.0))
            throw ConfigError("background_rate must be non-negative");
    }
};

/// One emission. Fields suffixed _a/_b describe the photon launched towards
/// interferometer A/B; `station_*` is where that photon is finally detected.
/// A background record carries a single uncorrelated hit in the _a fields.
struct PhotonPairRecord
{
    std::uint64_t index = 0;
    double emission_time = 0.0;
    bool background = false;
    PathState path_a = PathState::Short;
    PathState path_b = PathState::Short;
    Station station_a = Station::A;
    Station station_b = Station::B;
    int detector_a = kNoDetector; ///< 1, 2, or kNoDetector
    int detector_b = kNoDetector;
    double arrival_time_a = 0.0;
    double arrival_time_b = 0.0;
    double phi_a = 0.0;
    double phi_b = 0.0;

    PairClass pair_class() const
    {
        if (background)
            return PairClass::Accidental;
        if (path_a == PathState::Short)
            return path_b == PathState::Short ? PairClass::SS : PairClass::SL;
        return path_b == PathState::Short ? PairClass::LS : PairClass::LL;
    }
};

struct CoincidenceRecord
{
    PairClass pair_class = PairClass::Accidental;
    int detector_a = kNoDetector; ///< port at A (first hit's port for a local pair)
    int detector_b = kNoDetector; ///< port at B (second hit's port for a local pair)
    bool accepted = false;
    double phi_a = 0.0;
    double phi_b = 0.0;
    double time_a = 0.0;
    double time_b = 0.0;
    std::optional<Station> local_station; ///< set when both hits were at one station
};

namespace detail
{

inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream, std::uint64_t lane)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      static_cast<std::uint32_t>(lane)};
    return std::mt19937_64(seq);
}

inline double uniform01(std::mt19937_64& rng)
{
    return std::generate_canonical<double, 53>(rng);
}

} // namespace detail

/// Poisson emission process at `pair_rate`, optionally interleaved with
/// uncorrelated background singles. Records come out in emission order with
/// only the emission time (and background hit) filled in.
class PairStream
{
public:
    PairStream(const GeometryConfig& cfg, std::optional<double> duration,
               std::optional<std::uint64_t> max_pairs, std::mt19937_64 rng)
        : cfg_(cfg), duration_(duration), max_pairs_(max_pairs), rng_(std::move(rng))
    {
        cfg_.validate();
        total_rate_ = cfg_.pair_rate + 4.0 * cfg_.background_rate;
    }

    std::optional<PhotonPairRecord> next()
    {
        if (max_pairs_ && pairs_ >= *max_pairs_)
            return std::nullopt;
        std::exponential_distribution<double> gap(total_rate_);
        const double t = now_ + gap(rng_);
        if (duration_ && t > *duration_)
            return std::nullopt;
        now_ = t;

        PhotonPairRecord rec;
        rec.index = records_++;
        rec.emission_time = t;
        if (detail::uniform01(rng_) * total_rate_ < cfg_.pair_rate)
        {
            ++pairs_;
            return rec;
        }
        rec.background = true;
        const int which = std::min(3, static_cast<int>(4.0 * detail::uniform01(rng_)));
        rec.station_a = which < 2 ? Station::A : Station::B;
        rec.detector_a = 1 + which % 2;
        rec.arrival_time_a = t + cfg_.base_transit;
        rec.detector_b = kNoDetector;
        return rec;
    }

    std::uint64_t pairs_emitted() const noexcept { return pairs_; }
    double current_time() const noexcept { return now_; }

    std::vector<PhotonPairRecord> collect()
    {
        std::vector<PhotonPairRecord> out;
        while (auto r = next())
            out.push_back(*r);
        return out;
    }

private:
    GeometryConfig cfg_;
    std::optional<double> duration_;
    std::optional<std::uint64_t> max_pairs_;
    std::mt19937_64 rng_;
    double total_rate_ = 0.0;
    double now_ = 0.0;
    std::uint64_t pairs_ = 0;
    std::uint64_t records_ = 0;
};

/// Emissions over [0, duration]. A zero duration gives an empty stream.
inline PairStream generate_pairs(const GeometryConfig& cfg, double duration, std::uint64_t seed)
{
    if (!(std::isfinite(duration) && duration >= 0.0))
        throw ConfigError("duration must be non-negative");
    return PairStream(cfg, duration, std::nullopt, detail::make_engine(seed, 0, 0));
}

/// Completes records for fixed analyzer phases. Every call consumes exactly
/// four uniforms whatever the settings, so path classes (and thus every
/// selection decision) are identical across settings for one seed.
class PairPropagator
{
public:
    PairPropagator(const GeometryConfig& cfg, double phi_a, double phi_b)
        : cfg_(cfg), phi_a_(reduce_phase(phi_a)), phi_b_(reduce_phase(phi_b))
    {
        cfg_.validate();
        const auto p = coincidence_probabilities(werner_like(cfg_.visibility), phi_a_, phi_b_);
        cumulative_ = {p.p11, p.p11 + p.p12, p.p11 + p.p12 + p.p21};
    }

    PhotonPairRecord operator()(PhotonPairRecord rec, std::mt19937_64& rng) const
    {
        rec.phi_a = phi_a_;
        rec.phi_b = phi_b_;
        if (rec.background)
            return rec;

        const double u_class = detail::uniform01(rng);
        const double u_port = detail::uniform01(rng);
        const double u_loss_a = detail::uniform01(rng);
        const double u_loss_b = detail::uniform01(rng);

        const int cls = std::min(3, static_cast<int>(4.0 * u_class));
        rec.path_a = (cls & 2) ? PathState::Long : PathState::Short;
        rec.path_b = (cls & 1) ? PathState::Long : PathState::Short;

        int slot = 0;
        if (rec.path_a == rec.path_b)
        {
            // Indistinguishable alternatives interfere: the joint port
            // distribution of the SS/LL subensemble.
            while (slot < 3 && u_port >= cumulative_[slot])
                ++slot;
        }
        else
        {
            slot = std::min(3, static_cast<int>(4.0 * u_port));
        }
        const int port_at_a = 1 + slot / 2;
        const int port_at_b = 1 + slot % 2;

        if (cfg_.scheme == Scheme::Franson)
        {
            rec.station_a = Station::A;
            rec.station_b = Station::B;
        }
        else
        {
            rec.station_a = rec.path_a == PathState::Short ? Station::A : Station::B;
            rec.station_b = rec.path_b == PathState::Short ? Station::B : Station::A;
        }
        // Ports are drawn per station; with both photons at one station the
        // first draw goes to photon a.
        if (rec.station_a != rec.station_b)
        {
            rec.detector_a = rec.station_a == Station::A ? port_at_a : port_at_b;
            rec.detector_b = rec.station_b == Station::A ? port_at_a : port_at_b;
        }
        else
        {
            rec.detector_a = port_at_a;
            rec.detector_b = port_at_b;
        }
        if (u_loss_a >= cfg_.detection_efficiency)
            rec.detector_a = kNoDetector;
        if (u_loss_b >= cfg_.detection_efficiency)
            rec.detector_b = kNoDetector;

        const double base = rec.emission_time + cfg_.base_transit;
        rec.arrival_time_a = base + (rec.path_a == PathState::Long ? cfg_.path_delay : 0.0);
        rec.arrival_time_b = base + (rec.path_b == PathState::Long ? cfg_.path_delay : 0.0);
        return rec;
    }

private:
    GeometryConfig cfg_;
    double phi_a_;
    double phi_b_;
    std::array<double, 3> cumulative_{};
};

inline PhotonPairRecord propagate_pair(const PhotonPairRecord& rec, const GeometryConfig& cfg, double phi_a,
                                       double phi_b, std::mt19937_64& rng)
{
    return PairPropagator(cfg, phi_a, phi_b)(rec, rng);
}

/// Running totals for one setting pair.
struct SettingTally
{
    std::array<std::uint64_t, 4> accepted_by_ports{}; ///< c11, c12, c21, c22
    std::uint64_t accepted = 0;
    std::uint64_t rejected = 0;
    std::uint64_t cross_class_accepted = 0; ///< accepted records whose true class is SL or LS
    std::uint64_t accidental_accepted = 0;
    std::uint64_t dead_time_drops = 0;
    std::uint64_t pairs_emitted = 0;
    std::uint64_t pairs_both_detected = 0;
    double duration_s = 0.0;

    double selection_rate() const
    {
        const auto n = accepted + rejected;
        return n == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(n);
    }
};

/// Streaming coincidence logic: per-detector dead time, then A-B pairing.
/// Feed records in emission order; call finish() once at the end.
class CoincidenceFinder
{
public:
    explicit CoincidenceFinder(const GeometryConfig& cfg) : cfg_(cfg)
    {
        cfg_.validate();
        last_hit_.fill(-std::numeric_limits<double>::infinity());
    }

    template <typename Sink>
    void push(const PhotonPairRecord& rec, Sink&& sink)
    {
        if (rec.emission_time < last_emission_)
            throw ProcessingError("photon records are not time-ordered");
        last_emission_ = rec.emission_time;
        if (rec.detector_a != kNoDetector)
            pending_.push_back(make_hit(rec, rec.station_a, rec.detector_a, rec.arrival_time_a));
        if (!rec.background && rec.detector_b != kNoDetector)
            pending_.push_back(make_hit(rec, rec.station_b, rec.detector_b, rec.arrival_time_b));
        // No later record can produce a hit before this horizon.
        release(rec.emission_time + cfg_.base_transit, sink);
    }

    template <typename Sink>
    void finish(Sink&& sink)
    {
        release(std::numeric_limits<double>::infinity(), sink);
        recent_.clear();
    }

    std::uint64_t dead_time_drops() const noexcept { return dead_time_drops_; }

private:
    struct Hit
    {
        double time;
        Station station;
        int port;
        std::uint64_t source;
        PairClass cls;
        double phi_a;
        double phi_b;
    };

    static Hit make_hit(const PhotonPairRecord& rec, Station st, int port, double t)
    {
        return {t, st, port, rec.index, rec.pair_class(), rec.phi_a, rec.phi_b};
    }

    static int detector_id(const Hit& h) { return (h.station == Station::A ? 0 : 2) + (h.port - 1); }

    template <typename Sink>
    void release(double horizon, Sink& sink)
    {
        std::sort(pending_.begin(), pending_.end(), [](const Hit& x, const Hit& y) { return x.time < y.time; });
        std::size_t n = 0;
        while (n < pending_.size() && pending_[n].time < horizon)
            ++n;
        for (std::size_t k = 0; k < n; ++k)
            accept_hit(pending_[k], sink);
        pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(n));
    }

    template <typename Sink>
    void accept_hit(const Hit& h, Sink& sink)
    {
        double& last = last_hit_[detector_id(h)];
        if (h.time - last < cfg_.dead_time)
        {
            ++dead_time_drops_;
            return;
        }
        last = h.time;

        const double reach = cfg_.path_delay + cfg_.coincidence_window;
        while (!recent_.empty() && recent_.front().time < h.time - reach)
            recent_.pop_front();

        const auto partner = find_partner(h);
        if (!partner)
        {
            recent_.push_back(h);
            return;
        }
        const Hit p = recent_[partner->index];
        recent_.erase(recent_.begin() + static_cast<std::ptrdiff_t>(partner->index));
        sink(make_record(p, h, partner->accepted));
    }

    struct Partner
    {
        std::size_t index;
        bool accepted;
    };

    std::optional<Partner> find_partner(const Hit& h) const
    {
        const double w = cfg_.coincidence_window;
        if (cfg_.scheme == Scheme::Franson)
        {
            // Both stations' time tags decide: central peak accepted, the
            // satellite peak one path delay away rejected.
            std::optional<Partner> satellite;
            for (std::size_t k = 0; k < recent_.size(); ++k)
            {
                const Hit& p = recent_[k];
                if (p.station == h.station)
                    continue;
                const double dt = h.time - p.time;
                if (dt <= w)
                    return Partner{k, true};
                if (!satellite && std::abs(dt - cfg_.path_delay) <= w)
                    satellite = Partner{k, false};
            }
            return satellite;
        }
        // Hug: station identity alone decides.
        std::optional<Partner> local;
        for (std::size_t k = 0; k < recent_.size(); ++k)
        {
            const Hit& p = recent_[k];
            if (p.station != h.station)
            {
                if (h.time - p.time <= w)
                    return Partner{k, true};
            }
            else if (!local)
            {
                local = Partner{k, false};
            }
        }
        return local;
    }

    static CoincidenceRecord make_record(const Hit& first, const Hit& second, bool accepted)
    {
        CoincidenceRecord c;
        c.accepted = accepted;
        c.pair_class = (first.source == second.source) ? first.cls : PairClass::Accidental;
        c.phi_a = second.phi_a;
        c.phi_b = second.phi_b;
        if (first.station == second.station)
        {
            c.local_station = first.station;
            c.detector_a = first.port;
            c.detector_b = second.port;
            c.time_a = first.time;
            c.time_b = second.time;
            return c;
        }
        const Hit& a = first.station == Station::A ? first : second;
        const Hit& b = first.station == Station::A ? second : first;
        c.detector_a = a.port;
        c.detector_b = b.port;
        c.time_a = a.time;
        c.time_b = b.time;
        return c;
    }

    GeometryConfig cfg_;
    std::array<double, 4> last_hit_{};
    std::vector<Hit> pending_;
    std::deque<Hit> recent_;
    double last_emission_ = -std::numeric_limits<double>::infinity();
    std::uint64_t dead_time_drops_ = 0;
};

/// Batch form of CoincidenceFinder. Throws ProcessingError on records that
/// are not in emission order.
inline std::vector<CoincidenceRecord> find_coincidences(std::span<const PhotonPairRecord> records,
                                                        const GeometryConfig& cfg)
{
    std::vector<CoincidenceRecord> out;
    CoincidenceFinder finder(cfg);
    auto sink = [&](const CoincidenceRecord& c) { out.push_back(c); };
    for (const auto& r : records)
        finder.push(r, sink);
    finder.finish(sink);
    return out;
}

namespace detail
{

inline void tally(SettingTally& t, const CoincidenceRecord& c)
{
    if (!c.accepted)
    {
        ++t.rejected;
        return;
    }
    ++t.accepted;
    ++t.accepted_by_ports[detector_pair_slot(c.detector_a, c.detector_b)];
    if (c.pair_class == PairClass::SL || c.pair_class == PairClass::LS)
        ++t.cross_class_accepted;
    if (c.pair_class == PairClass::Accidental)
        ++t.accidental_accepted;
}

} // namespace detail

/// Simulates `pairs` emissions at one setting pair. `stream` selects the
/// random sub-stream, so results do not depend on the order settings run in.
inline SettingTally simulate_setting(const GeometryConfig& cfg, double phi_a, double phi_b, std::uint64_t pairs,
                                     std::uint64_t seed, std::uint64_t stream)
{
    cfg.validate();
    PairStream emissions(cfg, std::nullopt, pairs, detail::make_engine(seed, stream, 0));
    auto rng = detail::make_engine(seed, stream, 1);
    const PairPropagator propagate(cfg, phi_a, phi_b);
    CoincidenceFinder finder(cfg);
    SettingTally t;
    auto sink = [&](const CoincidenceRecord& c) { detail::tally(t, c); };
    while (auto rec = emissions.next())
    {
        const auto done = propagate(*rec, rng);
        if (!done.background && done.detector_a != kNoDetector && done.detector_b != kNoDetector)
            ++t.pairs_both_detected;
        finder.push(done, sink);
    }
    finder.finish(sink);
    t.pairs_emitted = emissions.pairs_emitted();
    t.dead_time_drops = finder.dead_time_drops();
    t.duration_s = emissions.current_time();
    return t;
}

struct ChshRun
{
    CountTable table;
    std::array<SettingTally, 4> tallies;
};

/// Like run_chsh_experiment, keeping the per-setting bookkeeping.
inline ChshRun run_chsh_experiment_detailed(const GeometryConfig& cfg, const MeasurementSettings& s,
                                            std::uint64_t pairs_per_setting, std::uint64_t seed)
{
    if (pairs_per_setting < 1)
        throw ConfigError("pairs_per_setting must be at least 1");
    ChshRun run;
    const auto pairs = setting_pairs(s);
    for (std::size_t k = 0; k < pairs.size(); ++k)
    {
        const auto& sp = pairs[k];
        run.tallies[k] = simulate_setting(cfg, sp.phi_a, sp.phi_b, pairs_per_setting, seed, k);
        run.table.add_row({std::string(sp.label), sp.phi_a, sp.phi_b, run.tallies[k].accepted_by_ports,
                           run.tallies[k].duration_s});
    }
    return run;
}

inline CountTable run_chsh_experiment(const GeometryConfig& cfg, const MeasurementSettings& s,
                                      std::uint64_t pairs_per_setting, std::uint64_t seed)
{
    return run_chsh_experiment_detailed(cfg, s, pairs_per_setting, seed).table;
}

/// Accepted coincidence counts against phi_a at fixed phi_b.
struct FringeScan
{
    double phi_b = 0.0;
    std::vector<double> phi_a;
    std::vector<std::array<std::uint64_t, 4>> counts; ///< per point: c11, c12, c21, c22
    std::vector<double> duration_s;

    /// Curve for detector pair (i, j).
    std::vector<double> curve(int i, int j) const
    {
        std::vector<double> out;
        out.reserve(counts.size());
        for (const auto& c : counts)
            out.push_back(static_cast<double>(c[detector_pair_slot(i, j)]));
        return out;
    }

    static constexpr std::string_view kCsvHeader = "phi_b,phi_a,c11,c12,c21,c22,duration_s";

    void write_csv(std::ostream& os, bool header = true) const
    {
        if (header)
            os << kCsvHeader << '\n';
        for (std::size_t k = 0; k < phi_a.size(); ++k)
        {
            os << CountTable::format_g9(phi_b) << ',' << CountTable::format_g9(phi_a[k]);
            for (auto c : counts[k])
                os << ',' << c;
            os << ',' << CountTable::format_g9(duration_s[k]) << '\n';
        }
    }
};

/// Sub-streams for fringe points start here, clear of the CHSH ones.
inline constexpr std::uint64_t kFringeStreamBase = 1u << 20;

inline FringeScan fringe_scan(const GeometryConfig& cfg, double phi_b, std::span<const double> phi_a_grid,
                              std::uint64_t pairs_per_point, std::uint64_t seed)
{
    if (phi_a_grid.empty())
        throw ConfigError("fringe grid is empty");
    if (pairs_per_point < 1)
        throw ConfigError("pairs_per_point must be at least 1");
    FringeScan scan;
    scan.phi_b = reduce_phase(phi_b);
    for (std::size_t k = 0; k < phi_a_grid.size(); ++k)
    {
        const double a = phi_a_grid[k];
        const auto t = simulate_setting(cfg, a, phi_b, pairs_per_point, seed, kFringeStreamBase + k);
        scan.phi_a.push_back(a);
        scan.counts.push_back(t.accepted_by_ports);
        scan.duration_s.push_back(t.duration_s);
    }
    return scan;
}

/// `points` equally spaced phases covering [0, 2 pi).
inline std::vector<double> uniform_phase_grid(std::size_t points)
{
    std::vector<double> g;
    g.reserve(points);
    for (std::size_t k = 0; k < points; ++k)
        g.push_back(2.0 * kPi * static_cast<double>(k) / static_cast<double>(points));
    return g;
}

} // namespace etbell

#endif // ETBELL_EVENT_SIM_HPP_
