// pdnac command-line front end: run, plot, oracle, selftest.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "pdnac/harness.hpp"

namespace fs = std::filesystem;
using namespace pdnac;

namespace {

int do_run(const std::string& config_path, const std::string& out, int jobs, std::optional<std::uint64_t> seed) {
    ExperimentConfig cfg = load_config(config_path);
    if (seed) {
        cfg.seeds = {*seed};
        cfg.echo["seeds"] = json::array({*seed});
    }
    const fs::path out_dir = out.empty() ? cfg.output_dir : fs::path(out);
    const json summary = cmd_run(cfg, out_dir, jobs);
    json brief{{"output_dir", out_dir.string()}, {"experiment", summary["experiment"]}};
    if (cfg.experiment == Experiment::pdnac) {
        brief["per_T"] = summary["per_T"];
        brief["slope_gap"] = summary["slope_gap"];
        brief["slope_violation"] = summary["slope_violation"];
    } else {
        brief["per_H"] = summary["per_H"];
    }
    std::cout << brief.dump(2) << "\n";
    return exit_codes::ok;
}

int do_oracle(const std::string& instance, const std::string& config_path) {
    TabularCmdp m = [&] {
        if (!instance.empty()) return load_cmdp(instance);
        return build_instance(load_config(config_path).instance);
    }();
    PolicySpec pol;
    FeatureSpec phi_r, phi_c;
    ProbeSpec probes;
    if (!config_path.empty()) {
        const ExperimentConfig cfg = load_config(config_path);
        pol = cfg.policy;
        phi_r = cfg.phi_r;
        phi_c = cfg.phi_c;
        probes = cfg.probes;
    }
    const OracleReport r = compute_oracle(m, pol.build(m.n_states(), m.n_actions()), phi_r.build(m.n_states()),
                                          phi_c.build(m.n_states()), probes);
    std::cout << r.to_json().dump(2) << "\n";
    return r.feasible ? exit_codes::ok : exit_codes::infeasible;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Primal-dual natural actor-critic for average-reward constrained MDPs"};
    app.require_subcommand(1);

    std::string config, out, instance;
    int jobs = 1;
    std::optional<std::uint64_t> seed_override;
    std::vector<std::string> summaries;

    auto* run = app.add_subcommand("run", "run an experiment config and write its artifacts");
    run->add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out, "output directory (default: the config's output_dir)");
    run->add_option("--jobs", jobs, "parallel cells")->check(CLI::PositiveNumber);
    run->add_option("--seed-override", seed_override, "run only this seed");

    auto* plot = app.add_subcommand("plot", "log-log SVG plots of sweep summaries");
    plot->add_option("summaries", summaries, "summary.json files")->required();
    plot->add_option("--out", out, "directory for the SVG files")->default_val(".");

    auto* oracle = app.add_subcommand("oracle", "exact diagnostics of an instance");
    oracle->add_option("instance", instance, "CMDP file (JSON)");
    oracle->add_option("--config", config, "take instance, policy, and features from a config");

    auto* selftest = app.add_subcommand("selftest", "engine self-test, reported as JSON");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return do_run(config, out, jobs, seed_override);
        if (*plot) {
            std::vector<fs::path> paths(summaries.begin(), summaries.end());
            for (const auto& p : cmd_plot(paths, out)) std::cout << p.string() << "\n";
            return exit_codes::ok;
        }
        if (*oracle) {
            if (instance.empty() && config.empty()) throw ConfigError("oracle: give an instance file or --config");
            return do_oracle(instance, config);
        }
        if (*selftest) {
            const json r = selftest_report();
            std::cout << r.dump(2) << "\n";
            return r["pass"].get<bool>() ? exit_codes::ok : 1;
        }
    } catch (const std::exception& e) {
        log::error(e.what());
        return exit_code(e);
    }
    return exit_codes::ok;
}
