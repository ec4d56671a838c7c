#pragma once

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "belllab/config.hpp"
#include "belllab/io.hpp"
#include "belllab/report.hpp"

namespace belllab {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kUsage = 2;
inline constexpr int kIo = 3;
inline constexpr int kSolver = 4;
inline constexpr int kInternal = 1;
} // namespace exit_code

namespace driver_detail {

inline FrequentismResult frequentism_analysis(const TrialBatch& batch,
                                              const AnalysisRequest& req) {
    FrequentismResult result;
    result.convergence_eps = req.convergence_eps;
    result.tail_fraction = req.tail_fraction;
    result.randomness_eps = req.randomness_eps;

    const auto collectives = build_collectives(batch);
    const OutcomePair attribute{Outcome{1}, Outcome{1}};
    const auto rules = standard_selection_rules();

    for (int pair = 0; pair < 4; ++pair) {
        auto& d = result.collectives[static_cast<std::size_t>(pair)];
        const Collective& c = collectives[static_cast<std::size_t>(pair)];
        d.label = c.label;
        d.size = c.size();
        if (c.size() < 100) {
            d.insufficient = true;
            continue;
        }
        d.convergence =
            convergence_diagnostic(c, attribute, req.convergence_eps, req.tail_fraction);
        d.randomness = randomness_diagnostic(c, rules, attribute, req.randomness_eps);
    }

    std::array<CollectiveLabel, 4> labels;
    for (int pair = 0; pair < 4; ++pair)
        labels[static_cast<std::size_t>(pair)] = collectives[static_cast<std::size_t>(pair)].label;

    // The six conditional terms, each reported within its own collective.
    const std::vector<TermFeed> conditional = {
        {"p11_ab", labels[0], true},  {"p11_abp", labels[1], true},
        {"p11_apb", labels[2], true}, {"p11_apbp", labels[3], true},
        {"pA_a", labels[0], true},    {"pB_b", labels[0], true},
    };
    // The counterfactual sum pools the same joint terms across collectives.
    const std::vector<TermFeed> pooled = {
        {"p11_ab", labels[0], false},
        {"p11_abp", labels[1], false},
        {"p11_apb", labels[2], false},
        {"p11_apbp", labels[3], false},
    };
    result.conditional_feed = collective_compatibility_guard(labels, conditional);
    result.quadruple_feed = collective_compatibility_guard(labels, pooled);
    return result;
}

inline FeasibilityResult feasibility_analysis(const SettingCounts& counts,
                                              const AnalysisRequest& req) {
    FeasibilityResult result;
    result.contexts = ContextDistributions::from_counts(counts);
    result.projection_adjustment = project_to_simplex(result.contexts);
    result.certificate = solve_feasibility(result.contexts, result.tol);

    std::array<std::uint64_t, 4> n{};
    for (int pair = 0; pair < 4; ++pair)
        n[static_cast<std::size_t>(pair)] = counts.pairs[static_cast<std::size_t>(pair)].n;
    result.n_per_pair = n;
    if (req.relaxed_feasibility) {
        const auto sigma = binomial_sigmas(result.contexts, n);
        result.relaxed = solve_feasibility_relaxed(result.contexts, sigma, 3.0, result.tol);
    }
    return result;
}

} // namespace driver_detail

/// Run every requested and admitted analysis over a batch. Admissibility is
/// decided first; refused routes produce no numbers, only their refusal in
/// the verdict (serialized by build_report).
inline AnalysisOutcomes run_analyses(const RunConfig& cfg, const TrialBatch& batch) {
    AnalysisOutcomes out;
    out.source = batch.source;
    out.verdict = admissibility(cfg.interpretation, cfg.flags);

    const bool need_counts =
        (cfg.analyses.space1 && out.verdict.space1.admitted) || cfg.analyses.feasibility;
    std::optional<SettingCounts> counts;
    if (need_counts) counts = accumulate(batch);

    if (cfg.analyses.space1 && out.verdict.space1.admitted) {
        out.space1 = flag_violation(space1_ch(*counts), cfg.analyses.sigma_level);
        out.no_signaling = no_signaling_report(*counts);
    }

    if (cfg.analyses.space2 && out.verdict.space2.admitted) {
        if (batch.quadruples) {
            out.space2 = flag_violation(space2_ch(*batch.quadruples), cfg.analyses.sigma_level);
        } else if (cfg.analyses.feasibility) {
            out.space2_surrogate = true;
        } else {
            throw ConfigError("space2 analysis requested but the trials carry no counterfactual "
                              "outcomes; request feasibility as the surrogate or drop space2");
        }
    }

    if (cfg.analyses.frequentism)
        out.frequentism = driver_detail::frequentism_analysis(batch, cfg.analyses);

    if (cfg.analyses.feasibility)
        out.feasibility = driver_detail::feasibility_analysis(*counts, cfg.analyses);

    out.blame = blame(out.verdict, out.space1, out.space2);
    return out;
}

namespace driver_detail {

inline TrialBatch generate(const RunConfig& cfg) {
    const unsigned threads = resolve_threads(cfg.threads);
    return run_trials(cfg.model, cfg.n_trials, cfg.seed, threads, QuadrupleMode::Auto);
}

inline void print_summary(std::ostream& os, const TrialBatch& batch) {
    const auto counts = accumulate(batch);
    os << "trials: " << batch.size() << " (source " << batch.source << ")\n";
    for (int pair = 0; pair < 4; ++pair) {
        const auto& pc = counts.pairs[static_cast<std::size_t>(pair)];
        os << "  " << pair_name(pair) << ": n=" << pc.n;
        if (pc.n > 0) os << "  f11=" << io::format_double(pc.freq(1, 1));
        os << '\n';
    }
}

inline void print_verdict_lines(std::ostream& os, const AnalysisRequest& req,
                                const AnalysisOutcomes& out) {
    if (req.space1) {
        if (out.space1)
            os << "space1: ch=" << io::format_double(out.space1->eval.s)
               << " stderr=" << io::format_double(out.space1->eval.stderr_)
               << (out.space1->violated ? "  VIOLATED" : "  within bounds") << '\n';
        else if (!out.verdict.space1.admitted)
            os << "space1: refused (" << out.verdict.space1.reason << ")\n";
    }
    if (req.space2) {
        if (out.space2)
            os << "space2: ch=" << io::format_double(out.space2->eval.s)
               << " stderr=" << io::format_double(out.space2->eval.stderr_)
               << (out.space2->violated ? "  VIOLATED" : "  within bounds") << '\n';
        else if (out.space2_surrogate)
            os << "space2: answered by feasibility (no counterfactual ground truth)\n";
        else if (!out.verdict.space2.admitted)
            os << "space2: refused (" << out.verdict.space2.reason << ")\n";
    }
    if (out.feasibility)
        os << "feasibility: "
           << (out.feasibility->certificate.feasible() ? "feasible" : "infeasible")
           << " (residual " << io::format_double(out.feasibility->certificate.residual) << ")\n";
}

} // namespace driver_detail

/// Generate trials per the config and write the CSV log.
inline int cmd_simulate(const RunConfig& cfg, std::ostream& os) {
    if (cfg.outputs.trial_log.empty())
        throw ConfigError("simulate: no trial log path (set output.trial_log or pass --out)");
    const TrialBatch batch = driver_detail::generate(cfg);
    write_trial_log(cfg.outputs.trial_log, batch);
    driver_detail::print_summary(os, batch);
    os << "wrote " << cfg.outputs.trial_log << '\n';
    return exit_code::kOk;
}

/// Analyze a batch (from a config-driven generation or an existing log) and
/// emit the JSON report.
inline int cmd_analyze(const RunConfig& cfg, const TrialBatch& batch, std::ostream& os) {
    const AnalysisOutcomes out = run_analyses(cfg, batch);
    const nlohmann::json report = build_report(cfg, out);
    const std::string text = report.dump(2) + "\n";
    if (!cfg.outputs.report.empty()) {
        write_text_file(cfg.outputs.report, text);
        driver_detail::print_verdict_lines(os, cfg.analyses, out);
        os << "wrote " << cfg.outputs.report << '\n';
    } else {
        os << text;
    }
    return exit_code::kOk;
}

/// Decide joint-distribution feasibility for a context file.
inline int cmd_feasibility(const std::filesystem::path& input, const std::string& out_path,
                           std::ostream& os) {
    ContextFile file = read_context_file(input);

    FeasibilityResult result;
    result.contexts = file.dists;
    try {
        result.contexts.validate(1e-6);
    } catch (const DomainError& e) {
        throw ConfigError(std::string("context file: ") + e.what());
    }
    result.projection_adjustment = project_to_simplex(result.contexts);
    result.certificate = solve_feasibility(result.contexts, result.tol);
    result.n_per_pair = file.n_per_pair;
    if (file.n_per_pair) {
        const auto sigma = binomial_sigmas(result.contexts, *file.n_per_pair);
        result.relaxed = solve_feasibility_relaxed(result.contexts, sigma, 3.0, result.tol);
    }

    const nlohmann::json j = report_detail::feasibility_json(result);
    os << "verdict: " << (result.certificate.feasible() ? "feasible" : "infeasible")
       << " (residual " << io::format_double(result.certificate.residual) << ", "
       << result.certificate.iterations << " iterations)\n";
    if (result.relaxed)
        os << "relaxed(3-sigma): " << (result.relaxed->feasible ? "feasible" : "infeasible")
           << '\n';
    const std::string text = j.dump(2) + "\n";
    if (!out_path.empty()) {
        write_text_file(out_path, text);
        os << "wrote " << out_path << '\n';
    } else {
        os << text;
    }
    return exit_code::kOk;
}

/// End-to-end run: simulate, analyze, write log and report.
inline int cmd_report(const RunConfig& cfg, std::ostream& os) {
    const TrialBatch batch = driver_detail::generate(cfg);
    if (!cfg.outputs.trial_log.empty()) write_trial_log(cfg.outputs.trial_log, batch);
    driver_detail::print_summary(os, batch);
    return cmd_analyze(cfg, batch, os);
}

/// Defaults for analyzing a bare CSV log: evaluate what the data supports.
inline RunConfig log_run_config(const std::filesystem::path& log, const TrialBatch& batch) {
    RunConfig cfg;
    cfg.from_log = true;
    cfg.log_path = log.string();
    cfg.n_trials = batch.size();
    cfg.analyses.space1 = true;
    cfg.analyses.space2 = batch.quadruples.has_value();
    cfg.analyses.frequentism = true;
    cfg.analyses.feasibility = true;
    return cfg;
}

/// Map exceptions to the documented exit codes, printing a diagnostic.
template <typename F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::kUsage;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::kIo;
    } catch (const SolverFailure& e) {
        err << "error: " << e.what() << '\n';
        const std::size_t shown = std::min<std::size_t>(e.trace.size(), 10);
        for (std::size_t i = e.trace.size() - shown; i < e.trace.size(); ++i) {
            const PivotStep& s = e.trace[i];
            err << "  pivot " << s.iteration << ": entering " << s.entering << ", leaving "
                << s.leaving << ", objective " << io::format_double(s.objective) << '\n';
        }
        return exit_code::kSolver;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::kUsage;
    } catch (const InsufficientDataError& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::kUsage;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return exit_code::kInternal;
    }
}

} // namespace belllab
