// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "etbell/commands.hpp"

namespace
{

struct CommonFlags
{
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::vector<std::string> assignments;
};

void add_common(CLI::App* sub, CommonFlags& f)
{
    sub->add_option("--config", f.config, "key=value configuration file");
    sub->add_option("--seed", f.seed, "random seed");
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--set", f.assignments, "override a config key (key=value)");
}

etbell::RunConfig build_config(const CommonFlags& f)
{
    etbell::RunConfig cfg;
    if (!f.config.empty())
        cfg.load_file(f.config);
    for (const auto& a : f.assignments)
        cfg.set_assignment(a);
    if (f.seed)
        cfg.seed = *f.seed;
    if (!f.out.empty())
        cfg.out_dir = f.out;
    cfg.require_seed();
    return cfg;
}

int finish(const etbell::CommandOutput& out, const etbell::RunConfig& cfg)
{
    etbell::write_outputs(out, cfg.out_dir);
    for (const auto& [name, text] : out.files)
        std::cout << (cfg.out_dir / name).string() << '\n';
    return out.exit_code;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Energy-time Bell test simulator and analysis tools"};
    app.require_subcommand(1);

    CommonFlags sim_flags, an_flags, fr_flags, tomo_flags, lhv_flags;

    auto* sim = app.add_subcommand("simulate", "simulate a CHSH run and report S");
    add_common(sim, sim_flags);

    std::string counts_in;
    auto* analyze = app.add_subcommand("analyze", "CHSH report from an existing counts CSV");
    add_common(analyze, an_flags);
    analyze->add_option("--counts", counts_in, "counts CSV")->required();

    auto* fringes = app.add_subcommand("fringes", "simulate fringe scans and fit them");
    add_common(fringes, fr_flags);

    auto* tomo = app.add_subcommand("tomo", "reconstruct the two-qubit state");
    add_common(tomo, tomo_flags);
    bool use_table2 = false;
    std::string tomo_counts;
    std::optional<double> tomo_simulate, tomo_accidentals;
    int bootstrap = 0;
    auto* t2 = tomo->add_flag("--table2", use_table2, "use the embedded 16-setting dataset");
    auto* tc = tomo->add_option("--counts", tomo_counts, "tomography counts CSV");
    auto* ts = tomo->add_option("--simulate", tomo_simulate, "simulate counts from werner_like(V)");
    t2->excludes(tc)->excludes(ts);
    tc->excludes(ts);
    tomo->add_option("--subtract-accidentals", tomo_accidentals, "accidental rate per setting [1/s]");
    tomo->add_option("--bootstrap", bootstrap, "bootstrap resamples for the fidelity error (>= 100)");

    auto* lhv = app.add_subcommand("lhv", "local hidden-variable adversary");
    add_common(lhv, lhv_flags);
    std::string rule = "franson";
    std::optional<double> target;
    lhv->add_option("--rule", rule, "none | franson | hug");
    lhv->add_option("--target-quantum", target, "try to reproduce the quantum statistics at visibility V");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp& e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError& e)
    {
        app.exit(e);
        return etbell::kExitConfig;
    }

    return etbell::run_guarded([&]() -> int {
        using namespace etbell;
        if (*sim)
        {
            const auto cfg = build_config(sim_flags);
            return finish(cmd_simulate(cfg), cfg);
        }
        if (*analyze)
        {
            const auto cfg = build_config(an_flags);
            return finish(cmd_analyze(read_counts_file(counts_in), cfg.settings), cfg);
        }
        if (*fringes)
        {
            const auto cfg = build_config(fr_flags);
            return finish(cmd_fringes(cfg), cfg);
        }
        if (*tomo)
        {
            const auto cfg = build_config(tomo_flags);
            TomoOptions opt;
            if (!tomo_counts.empty())
            {
                opt.source = TomoOptions::Source::CountsFile;
                opt.counts_path = tomo_counts;
            }
            else if (tomo_simulate)
            {
                opt.source = TomoOptions::Source::Simulated;
                opt.simulate_visibility = *tomo_simulate;
            }
            opt.accidental_rate = tomo_accidentals;
            opt.bootstrap = bootstrap;
            return finish(cmd_tomo(cfg, opt), cfg);
        }
        const auto cfg = build_config(lhv_flags);
        return finish(cmd_lhv(cfg, parse_rule(rule), target), cfg);
    });
}
