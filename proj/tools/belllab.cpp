// Command-line driver: simulate trials, analyze logs, decide feasibility,
// or run the whole pipeline per a config file.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "belllab/belllab.hpp"

namespace {

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> trials;
    std::string out;
    std::string mode;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_config) {
    if (with_config) cmd->add_option("--config", f.config, "config file (TOML)");
    cmd->add_option("--seed", f.seed, "override run.seed");
    cmd->add_option("--trials", f.trials, "override run.trials");
    cmd->add_option("--out", f.out, "output path override");
    cmd->add_option("--mode", f.mode,
                    "interpretation mode (kolmogorov_axiomatic, frequentist_von_mises, "
                    "single_case_propensity, long_run_propensity)");
}

void apply_overrides(belllab::RunConfig& cfg, const CommonFlags& f) {
    if (f.seed) cfg.seed = *f.seed;
    if (f.trials) cfg.n_trials = *f.trials;
    if (!f.mode.empty()) cfg.interpretation = belllab::parse_interpretation_mode(f.mode);
}

belllab::RunConfig load_config_or_default(const CommonFlags& f) {
    if (!f.config.empty()) return belllab::load_run_config(f.config);
    throw belllab::ConfigError("no config file given (pass --config)");
}

bool looks_like_csv(const std::filesystem::path& p) {
    return p.extension() == ".csv";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bell-CHSH probability-space laboratory"};
    app.require_subcommand(1);

    CommonFlags sim_flags, ana_flags, rep_flags;
    std::string ana_input, feas_input, feas_out;

    CLI::App* sim = app.add_subcommand("simulate", "generate trials and write a CSV log");
    add_common(sim, sim_flags, true);

    CLI::App* ana = app.add_subcommand("analyze", "analyze a trial log or a config-driven run");
    ana->add_option("input", ana_input, "trial log (.csv) or config (.toml)");
    add_common(ana, ana_flags, true);

    CLI::App* feas = app.add_subcommand("feasibility",
                                        "decide joint-distribution feasibility for a context file");
    feas->add_option("input", feas_input, "context distributions (JSON)")->required();
    feas->add_option("--out", feas_out, "certificate output path");

    CLI::App* rep = app.add_subcommand("report", "simulate, analyze, and write the JSON report");
    add_common(rep, rep_flags, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return belllab::exit_code::kUsage;
    }

    return belllab::guarded(std::cerr, [&]() -> int {
        if (sim->parsed()) {
            belllab::RunConfig cfg = load_config_or_default(sim_flags);
            apply_overrides(cfg, sim_flags);
            if (!sim_flags.out.empty()) cfg.outputs.trial_log = sim_flags.out;
            cfg.validate();
            return belllab::cmd_simulate(cfg, std::cout);
        }
        if (ana->parsed()) {
            if (!ana_input.empty() && looks_like_csv(ana_input)) {
                belllab::TrialBatch batch = belllab::read_trial_log(ana_input);
                belllab::RunConfig cfg = belllab::log_run_config(ana_input, batch);
                apply_overrides(cfg, ana_flags);
                if (!ana_flags.out.empty()) cfg.outputs.report = ana_flags.out;
                cfg.validate();
                return belllab::cmd_analyze(cfg, batch, std::cout);
            }
            CommonFlags f = ana_flags;
            if (f.config.empty()) f.config = ana_input;
            belllab::RunConfig cfg = load_config_or_default(f);
            apply_overrides(cfg, ana_flags);
            if (!ana_flags.out.empty()) cfg.outputs.report = ana_flags.out;
            cfg.validate();
            belllab::TrialBatch batch = belllab::run_trials(
                cfg.model, cfg.n_trials, cfg.seed, belllab::resolve_threads(cfg.threads));
            return belllab::cmd_analyze(cfg, batch, std::cout);
        }
        if (feas->parsed()) return belllab::cmd_feasibility(feas_input, feas_out, std::cout);
        if (rep->parsed()) {
            belllab::RunConfig cfg = load_config_or_default(rep_flags);
            apply_overrides(cfg, rep_flags);
            if (!rep_flags.out.empty()) cfg.outputs.report = rep_flags.out;
            cfg.validate();
            return belllab::cmd_report(cfg, std::cout);
        }
        throw belllab::ConfigError("no subcommand");
    });
}
