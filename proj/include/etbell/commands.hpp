// SPDX-License-Identifier: Apache-2.0

#ifndef ETBELL_COMMANDS_HPP_
#define ETBELL_COMMANDS_HPP_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "etbell/analysis.hpp"
#include "etbell/count_table.hpp"
#include "etbell/csv.hpp"
#include "etbell/error.hpp"
#include "etbell/event_sim.hpp"
#include "etbell/lhv.hpp"
#include "etbell/quantum.hpp"
#include "etbell/tomography.hpp"

// Pipeline commands behind the etbell tool. Each command turns a RunConfig
// into named file contents; writing them is separate so runs can be compared
// byte for byte.

namespace etbell
{

enum ExitCode : int
{
    kExitOk = 0,
    kExitConfig = 2,
    kExitParse = 3,
    kExitNumeric = 4,
    kExitInfeasible = 5,
};

struct RunConfig
{
    GeometryConfig geometry;
    MeasurementSettings settings = canonical_settings();
    std::uint64_t pairs_per_setting = 1000000;
    std::optional<std::uint64_t> seed;

    std::vector<double> fringe_phi_b; ///< empty: phi_b and phi_b' of `settings`
    std::size_t fringe_points = 24;
    std::uint64_t pairs_per_point = 600000; ///< about 3300 counts at a fringe peak

    double tomo_n_ref = 1e6;

    std::filesystem::path out_dir = ".";

    /// Applies one key=value assignment.
    void set(std::string_view key, std::string_view value)
    {
        const std::string v(trim(value));
        auto real = [&]() { return parse_real(key, v); };
        auto count = [&]() { return parse_u64(key, v); };
        double a = settings.phi_a(), ap = settings.phi_a_prime(), b = settings.phi_b(), bp = settings.phi_b_prime();

        if (key == "scheme")
        {
            if (v == "franson")
                geometry.scheme = Scheme::Franson;
            else if (v == "hug")
                geometry.scheme = Scheme::Hug;
            else
                throw ConfigError("scheme must be franson or hug, got '" + v + "'");
        }
        else if (key == "visibility")
            geometry.visibility = real();
        else if (key == "efficiency")
            geometry.detection_efficiency = real();
        else if (key == "pair_rate")
            geometry.pair_rate = real();
        else if (key == "path_delay")
            geometry.path_delay = real();
        else if (key == "coincidence_window")
            geometry.coincidence_window = real();
        else if (key == "dead_time")
            geometry.dead_time = real();
        else if (key == "base_transit")
            geometry.base_transit = real();
        else if (key == "background_rate")
            geometry.background_rate = real();
        else if (key == "phi_a")
            settings = MeasurementSettings(real(), ap, b, bp);
        else if (key == "phi_a_prime")
            settings = MeasurementSettings(a, real(), b, bp);
        else if (key == "phi_b")
            settings = MeasurementSettings(a, ap, real(), bp);
        else if (key == "phi_b_prime")
            settings = MeasurementSettings(a, ap, b, real());
        else if (key == "pairs_per_setting")
            pairs_per_setting = count();
        else if (key == "seed")
            seed = count();
        else if (key == "fringe_phi_b")
        {
            fringe_phi_b.clear();
            std::istringstream is(v);
            std::string item;
            while (std::getline(is, item, ';'))
                fringe_phi_b.push_back(parse_real(key, std::string(trim(item))));
        }
        else if (key == "fringe_points")
            fringe_points = static_cast<std::size_t>(count());
        else if (key == "pairs_per_point")
            pairs_per_point = count();
        else if (key == "tomo_n_ref")
            tomo_n_ref = real();
        else if (key == "out")
            out_dir = v;
        else
            throw ConfigError("unknown config key '" + std::string(key) + "'");
    }

    /// "key=value" as given on the command line.
    void set_assignment(std::string_view assignment)
    {
        const auto eq = assignment.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
        set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
    }

    /// Flat key=value lines; '#' starts a comment.
    void load(std::istream& is)
    {
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(is, line))
        {
            ++line_no;
            csv::strip_cr(line);
            if (const auto hash = line.find('#'); hash != std::string::npos)
                line.erase(hash);
            if (trim(line).empty())
                continue;
            try
            {
                set_assignment(line);
            }
            catch (const ConfigError& e)
            {
                throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
            }
        }
    }

    void load_file(const std::filesystem::path& path)
    {
        std::ifstream is(path);
        if (!is)
            throw ConfigError("cannot open config file '" + path.string() + "'");
        load(is);
    }

    std::vector<double> fringe_phases() const
    {
        if (!fringe_phi_b.empty())
            return fringe_phi_b;
        return {settings.phi_b(), settings.phi_b_prime()};
    }

    std::uint64_t require_seed() const
    {
        if (!seed)
            throw ConfigError("a seed is required (--seed or seed= in the config)");
        return *seed;
    }

    void validate() const
    {
        geometry.validate();
        if (pairs_per_setting < 1)
            throw ConfigError("pairs_per_setting must be at least 1");
        if (fringe_points < 4)
            throw ConfigError("fringe_points must be at least 4");
        if (pairs_per_point < 1)
            throw ConfigError("pairs_per_point must be at least 1");
        if (!(tomo_n_ref > 0.0) || !std::isfinite(tomo_n_ref))
            throw ConfigError("tomo_n_ref must be positive");
        require_seed();
    }

    nlohmann::json to_json() const
    {
        return {{"scheme", geometry.scheme == Scheme::Franson ? "franson" : "hug"},
                {"visibility", geometry.visibility},
                {"efficiency", geometry.detection_efficiency},
                {"pair_rate", geometry.pair_rate},
                {"path_delay", geometry.path_delay},
                {"coincidence_window", geometry.coincidence_window},
                {"dead_time", geometry.dead_time},
                {"background_rate", geometry.background_rate},
                {"settings", {settings.phi_a(), settings.phi_a_prime(), settings.phi_b(), settings.phi_b_prime()}},
                {"pairs_per_setting", pairs_per_setting},
                {"seed", seed ? nlohmann::json(*seed) : nlohmann::json(nullptr)}};
    }

private:
    static std::string_view trim(std::string_view s)
    {
        while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
            s.remove_prefix(1);
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t'))
            s.remove_suffix(1);
        return s;
    }

    static double parse_real(std::string_view key, const std::string& v)
    {
        try
        {
            return csv::parse_real(v, 0);
        }
        catch (const ParseError&)
        {
            throw ConfigError("'" + std::string(key) + "' needs a number, got '" + v + "'");
        }
    }

    static std::uint64_t parse_u64(std::string_view key, const std::string& v)
    {
        try
        {
            return csv::parse_count(v, 0);
        }
        catch (const ParseError&)
        {
            throw ConfigError("'" + std::string(key) + "' needs a non-negative integer, got '" + v + "'");
        }
    }
};

/// Results of one command, each optional.
struct ReportBundle
{
    std::optional<ChshReport> chsh;
    std::optional<nlohmann::json> fringe_fits;
    std::optional<ReconstructionResult> tomography;
    std::optional<nlohmann::json> lhv;
};

struct CommandOutput
{
    std::vector<std::pair<std::string, std::string>> files; ///< (file name, contents), in write order
    ReportBundle bundle;
    int exit_code = kExitOk;
};

inline std::string dump_json(const nlohmann::json& j)
{
    return j.dump(2) + "\n";
}

inline void write_outputs(const CommandOutput& out, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    for (const auto& [name, text] : out.files)
    {
        std::ofstream os(dir / name, std::ios::binary);
        if (!os)
            throw ConfigError("cannot write '" + (dir / name).string() + "'");
        os << text;
    }
}

// simulate / analyze -----------------------------------------------------------

inline CommandOutput cmd_simulate(const RunConfig& cfg)
{
    cfg.validate();
    const auto run = run_chsh_experiment_detailed(cfg.geometry, cfg.settings, cfg.pairs_per_setting, cfg.require_seed());
    CommandOutput out;
    const auto report = chsh_from_counts(run.table, cfg.settings);
    nlohmann::json j = report;
    j["expected_s"] = expected_chsh(cfg.geometry.visibility);
    auto tallies = nlohmann::json::array();
    for (const auto& t : run.tallies)
        tallies.push_back({{"pairs_emitted", t.pairs_emitted},
                           {"pairs_both_detected", t.pairs_both_detected},
                           {"accepted", t.accepted},
                           {"rejected", t.rejected},
                           {"cross_class_accepted", t.cross_class_accepted},
                           {"accidental_accepted", t.accidental_accepted},
                           {"dead_time_drops", t.dead_time_drops},
                           {"selection_rate", t.selection_rate()}});
    j["tallies"] = tallies;
    j["config"] = cfg.to_json();
    out.files.emplace_back("counts.csv", run.table.to_csv());
    out.files.emplace_back("chsh.json", dump_json(j));
    out.bundle.chsh = report;
    return out;
}

/// CHSH report from an existing counts file.
inline CommandOutput cmd_analyze(const CountTable& table, const MeasurementSettings& s)
{
    CommandOutput out;
    const auto report = chsh_from_counts(table, s);
    out.files.emplace_back("chsh.json", dump_json(nlohmann::json(report)));
    out.bundle.chsh = report;
    return out;
}

inline CountTable read_counts_file(const std::filesystem::path& path)
{
    std::ifstream is(path);
    if (!is)
        throw ConfigError("cannot open counts file '" + path.string() + "'");
    return CountTable::read_csv(is);
}

// fringes ------------------------------------------------------------------

inline constexpr std::array<std::string_view, 4> kDetectorPairNames{"11", "12", "21", "22"};

/// Scans read back from a fringe CSV, grouped by phi_b in order of appearance.
inline std::vector<FringeScan> read_fringe_csv(std::istream& is)
{
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(is, line))
        throw ParseError("empty fringe file", 1);
    csv::strip_cr(line);
    if (line != FringeScan::kCsvHeader)
        throw ParseError("unexpected header '" + line + "'", line_no);
    std::vector<FringeScan> scans;
    while (std::getline(is, line))
    {
        ++line_no;
        csv::strip_cr(line);
        if (line.empty())
            continue;
        const auto f = csv::split(line);
        if (f.size() != 7)
            throw ParseError("expected 7 fields, found " + std::to_string(f.size()), line_no);
        const double phi_b = csv::parse_real(f[0], line_no);
        if (scans.empty() || scans.back().phi_b != phi_b)
        {
            scans.emplace_back();
            scans.back().phi_b = phi_b;
        }
        auto& s = scans.back();
        s.phi_a.push_back(csv::parse_real(f[1], line_no));
        std::array<std::uint64_t, 4> c{};
        for (int k = 0; k < 4; ++k)
            c[k] = csv::parse_count(f[2 + k], line_no);
        s.counts.push_back(c);
        s.duration_s.push_back(csv::parse_real(f[6], line_no));
    }
    return scans;
}

inline FringeFitSet fit_scan(const FringeScan& scan)
{
    FringeFitSet set;
    set.phi_b = scan.phi_b;
    for (int i = 1; i <= 2; ++i)
        for (int j = 1; j <= 2; ++j)
        {
            const auto y = scan.curve(i, j);
            set.curves[detector_pair_slot(i, j)] = fit_fringe(scan.phi_a, y);
        }
    return set;
}

inline CommandOutput cmd_fringes(const RunConfig& cfg)
{
    cfg.validate();
    const auto grid = uniform_phase_grid(cfg.fringe_points);
    std::ostringstream csv_text;
    std::vector<FringeFitSet> sets;
    std::vector<FringeFit> all;
    auto doc = nlohmann::json::object();
    auto scans_json = nlohmann::json::array();
    bool header = true;
    for (double phi_b : cfg.fringe_phases())
    {
        const auto scan = fringe_scan(cfg.geometry, phi_b, grid, cfg.pairs_per_point, cfg.require_seed());
        scan.write_csv(csv_text, header);
        header = false;
        const auto set = fit_scan(scan);
        sets.push_back(set);
        nlohmann::json curves = nlohmann::json::object();
        for (std::size_t k = 0; k < 4; ++k)
        {
            curves[std::string(kDetectorPairNames[k])] = set.curves[k];
            all.push_back(set.curves[k]);
        }
        const auto mv = mean_visibility(set.curves);
        scans_json.push_back({{"phi_b", scan.phi_b},
                              {"curves", curves},
                              {"mean_visibility", mv.v},
                              {"delta_visibility", mv.delta_v}});
    }
    const auto mv = mean_visibility(all);
    doc["scans"] = scans_json;
    doc["mean_visibility"] = mv.v;
    doc["delta_visibility"] = mv.delta_v;
    try
    {
        doc["chsh_from_fit"] = chsh_from_fits(sets, cfg.settings);
    }
    catch (const IncompleteDataError&)
    {
        doc["chsh_from_fit"] = nullptr;
    }
    doc["config"] = cfg.to_json();

    CommandOutput out;
    out.files.emplace_back("fringes.csv", csv_text.str());
    out.files.emplace_back("fringe_fits.json", dump_json(doc));
    out.bundle.fringe_fits = doc;
    return out;
}

// tomo ---------------------------------------------------------------------

struct TomoOptions
{
    enum class Source
    {
        Table2,
        CountsFile,
        Simulated,
    };
    Source source = Source::Table2;
    std::filesystem::path counts_path;
    double simulate_visibility = 1.0;
    std::optional<double> accidental_rate;
    int bootstrap = 0;
};

inline TomographyData read_tomography_file(const std::filesystem::path& path)
{
    std::ifstream is(path);
    if (!is)
        throw ConfigError("cannot open counts file '" + path.string() + "'");
    return read_tomography_csv(is);
}

inline CommandOutput cmd_tomo(const RunConfig& cfg, const TomoOptions& opt)
{
    CommandOutput out;
    TomographyData data;
    switch (opt.source)
    {
    case TomoOptions::Source::Table2:
        data = table2_settings();
        break;
    case TomoOptions::Source::CountsFile:
        data = read_tomography_file(opt.counts_path);
        break;
    case TomoOptions::Source::Simulated:
        cfg.validate();
        data = simulate_tomography_counts(werner_like(opt.simulate_visibility), cfg.tomo_n_ref, cfg.require_seed());
        out.files.emplace_back("tomo_counts.csv", tomography_to_csv(data));
        break;
    }

    const auto result = opt.accidental_rate ? reconstruct_with_accidental_subtraction(data, *opt.accidental_rate)
                                            : ml_reconstruction(data);
    nlohmann::json j = result;
    const auto design = design_report(data);
    j["design_rank"] = design.rank;
    j["design_condition_number"] = design.condition_number;
    j["accidental_rate"] = opt.accidental_rate ? nlohmann::json(*opt.accidental_rate) : nlohmann::json(nullptr);
    if (opt.bootstrap > 0)
    {
        const auto boot_data =
            opt.accidental_rate ? subtract_tomography_accidentals(data, std::vector<double>(data.size(), *opt.accidental_rate))
                                : data;
        j["fidelity_error"] = fidelity_error_bar(boot_data, opt.bootstrap, cfg.require_seed());
        j["bootstrap_resamples"] = opt.bootstrap;
    }
    out.files.emplace_back("tomography.json", dump_json(j));
    out.bundle.tomography = result;
    return out;
}

// lhv ----------------------------------------------------------------------

inline PostselectionRule parse_rule(std::string_view name)
{
    if (name == "none")
        return {PostselectionKind::None};
    if (name == "franson")
        return {PostselectionKind::TagMatch};
    if (name == "hug")
        return {PostselectionKind::SettingIndependent};
    throw ConfigError("rule must be none, franson or hug, got '" + std::string(name) + "'");
}

inline CommandOutput cmd_lhv(const RunConfig& cfg, const PostselectionRule& rule,
                             std::optional<double> target_visibility)
{
    CommandOutput out;
    const auto best = max_postselected_chsh(rule);
    nlohmann::json j = to_report_json(best);
    if (target_visibility)
    {
        const auto r = reproduce_quantum_statistics(cfg.settings, *target_visibility, rule);
        nlohmann::json t{{"visibility", *target_visibility},
                         {"selection_rate", r.target.selection_rate},
                         {"feasible", r.feasible},
                         {"infeasibility", r.infeasibility}};
        if (r.feasible)
        {
            t["residual"] = r.residual;
            t["max_deviation"] = reproduction_deviation(*r.mixture, rule, r.target);
            t["postselected_s"] = postselected_chsh(*r.mixture, rule);
            t["witness"] = witness_json(*r.mixture);
        }
        else
        {
            out.exit_code = kExitInfeasible;
        }
        j["target"] = t;
    }
    out.files.emplace_back("lhv.json", dump_json(j));
    out.bundle.lhv = j;
    return out;
}

/// Runs `body`, mapping library errors to exit codes with a diagnostic on
/// `err`.
template <class F>
int run_guarded(F&& body, std::ostream& err = std::cerr)
{
    try
    {
        return body();
    }
    catch (const ParseError& e)
    {
        err << "parse error: " << e.what() << '\n';
        return kExitParse;
    }
    catch (const ConfigError& e)
    {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
    catch (const DomainError& e)
    {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
    catch (const std::runtime_error& e)
    {
        err << "numeric error: " << e.what() << '\n';
        return kExitNumeric;
    }
}

} // namespace etbell

#endif // ETBELL_COMMANDS_HPP_
