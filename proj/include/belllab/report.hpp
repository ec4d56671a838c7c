#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "belllab/config.hpp"
#include "belllab/estimators.hpp"
#include "belllab/feasibility.hpp"
#include "belllab/frequentism.hpp"
#include "belllab/interpretation.hpp"
#include "belllab/version.hpp"

namespace belllab {

/// Frequentist diagnostics for one collective, ready for serialization.
struct CollectiveDiagnostics {
    CollectiveLabel label;
    std::size_t size = 0;
    bool insufficient = false; // too short for the convergence diagnostic
    std::optional<ConvergenceDiagnostic> convergence;
    std::vector<RandomnessEntry> randomness;
};

struct FrequentismResult {
    std::array<CollectiveDiagnostics, 4> collectives;
    double convergence_eps = 0.01;
    double tail_fraction = 0.2;
    double randomness_eps = 0.02;
    GuardVerdict conditional_feed;  // six space-1 terms, each conditional on its collective
    GuardVerdict quadruple_feed;    // four joint terms pooled across collectives
};

struct FeasibilityResult {
    ContextDistributions contexts;              // after simplex projection
    double projection_adjustment = 0.0;
    double tol = 1e-9;
    FeasibilityCertificate certificate;
    std::optional<std::array<std::uint64_t, 4>> n_per_pair;
    std::optional<RelaxedFeasibility> relaxed;
};

/// Everything an analysis run produced; empty optionals mean "not run".
struct AnalysisOutcomes {
    std::optional<CheckedEvaluation> space1;
    std::optional<NoSignalingReport> no_signaling;
    std::optional<CheckedEvaluation> space2;
    bool space2_surrogate = false; // space-2 question answered by feasibility instead
    std::optional<FrequentismResult> frequentism;
    std::optional<FeasibilityResult> feasibility;
    AdmissibilityVerdict verdict;
    std::optional<BlameReport> blame;
    std::string source; // batch / log identifier
};

namespace report_detail {

using nlohmann::json;

inline json terms_json(const ChTerms& t) {
    return json{{"p11_ab", t.p11_ab},     {"p11_abp", t.p11_abp}, {"p11_apb", t.p11_apb},
                {"p11_apbp", t.p11_apbp}, {"pA_a", t.pA_a},       {"pB_b", t.pB_b}};
}

inline json evaluation_json(const CheckedEvaluation& c) {
    json j;
    j["space"] = to_string(c.eval.space);
    j["ch"] = c.eval.s;
    j["stderr"] = c.eval.stderr_;
    j["terms"] = terms_json(c.eval.terms);
    j["n_effective"] = c.eval.n_effective;
    j["bounds"] = json::array({-1.0, 0.0});
    j["violated"] = c.violated;
    j["excess"] = c.excess;
    j["sigma_level"] = c.sigma_level;
    return j;
}

inline json no_signaling_json(const NoSignalingReport& r) {
    json entries = json::array();
    for (const auto& e : r.entries) {
        entries.push_back(json{{"side", to_string(e.side)},
                               {"own_slot", to_string(e.own_slot)},
                               {"marginal_remote_unprimed", e.marginal_unprimed},
                               {"marginal_remote_primed", e.marginal_primed},
                               {"discrepancy", e.discrepancy},
                               {"z", e.z}});
    }
    return json{{"entries", entries},
                {"max_discrepancy_left", r.max_discrepancy(Side::Left)},
                {"max_discrepancy_right", r.max_discrepancy(Side::Right)},
                {"max_z_left", r.max_z(Side::Left)},
                {"max_z_right", r.max_z(Side::Right)}};
}

inline json refusal_json(const RouteVerdict& v) {
    json j;
    j["refused"] = true;
    j["status"] = to_string(v.status);
    j["reason"] = v.reason;
    j["citations"] = v.citations;
    if (v.required_flag) j["required_flag"] = *v.required_flag;
    return j;
}

/// Downsample a trajectory to at most 512 points (plus the final one) with a
/// fixed stride so reports stay small and byte-stable.
inline json strided_series_json(const std::vector<double>& series) {
    const std::size_t n = series.size();
    const std::size_t stride = n <= 512 ? 1 : (n + 511) / 512;
    json values = json::array();
    for (std::size_t i = 0; i < n; i += stride) values.push_back(series[i]);
    if (n > 0 && (n - 1) % stride != 0) values.push_back(series[n - 1]);
    return json{{"length", n}, {"stride", stride}, {"values", values}};
}

inline json collective_json(const CollectiveDiagnostics& d) {
    json j;
    j["pair"] = pair_name(d.label.pair);
    j["alpha_deg"] = d.label.alpha.angle.degrees();
    j["beta_deg"] = d.label.beta.angle.degrees();
    j["source"] = d.label.source;
    j["size"] = d.size;
    j["insufficient"] = d.insufficient;
    if (d.convergence) {
        const auto& c = *d.convergence;
        json cj;
        cj["stabilized"] = c.stabilized;
        cj["tail_deviation"] = c.tail_deviation;
        cj["eps"] = c.eps;
        cj["tail_fraction"] = c.tail_fraction;
        if (c.n_star)
            cj["n_star"] = *c.n_star;
        else
            cj["n_star"] = nullptr;
        cj["trajectory"] = strided_series_json(c.trajectory);
        j["convergence"] = cj;
    }
    json rj = json::array();
    for (const auto& e : d.randomness) {
        rj.push_back(json{{"rule", e.rule.name()},
                          {"insufficient", e.insufficient},
                          {"sub_length", e.sub_length},
                          {"sub_frequency", e.sub_frequency},
                          {"deviation", e.deviation},
                          {"flagged", e.flagged}});
    }
    j["randomness"] = rj;
    return j;
}

inline json guard_json(const GuardVerdict& g) {
    json j;
    j["admissible"] = g.admissible;
    j["details"] = g.details;
    json off = json::array();
    for (const auto& l : g.offending) off.push_back(pair_name(l.pair));
    j["offending_collectives"] = off;
    return j;
}

inline json frequentism_json(const FrequentismResult& f) {
    json j;
    j["parameters"] = json{{"convergence_eps", f.convergence_eps},
                           {"tail_fraction", f.tail_fraction},
                           {"randomness_eps", f.randomness_eps},
                           {"attribute", "(1,1)"}};
    json cols = json::array();
    for (const auto& c : f.collectives) cols.push_back(collective_json(c));
    j["collectives"] = cols;
    j["guard"] = json{{"conditional_terms", guard_json(f.conditional_feed)},
                      {"counterfactual_sum", guard_json(f.quadruple_feed)}};
    j["note"] = "finite-n diagnostics approximate limiting frequencies; the fixed selection-rule "
                "library stands in for the full randomness condition";
    return j;
}

inline json certificate_json(const FeasibilityCertificate& cert) {
    json j;
    j["verdict"] = cert.feasible() ? "feasible" : "infeasible";
    j["residual"] = cert.residual;
    j["iterations"] = cert.iterations;
    if (cert.witness)
        j["witness"] = cert.witness->q;
    else
        j["witness"] = nullptr;
    if (cert.farkas)
        j["farkas"] = *cert.farkas;
    else
        j["farkas"] = nullptr;
    return j;
}

inline json feasibility_json(const FeasibilityResult& f) {
    json j = certificate_json(f.certificate);
    json contexts;
    for (int pair = 0; pair < 4; ++pair)
        contexts[pair_name(pair)] = f.contexts.p[static_cast<std::size_t>(pair)];
    j["contexts"] = contexts;
    j["projection_adjustment"] = f.projection_adjustment;
    j["tol"] = f.tol;
    if (f.n_per_pair) j["n_per_pair"] = *f.n_per_pair;
    if (f.relaxed) {
        json r;
        r["feasible"] = f.relaxed->feasible;
        r["gap"] = f.relaxed->gap;
        r["sigma_scale"] = f.relaxed->sigma_scale;
        r["iterations"] = f.relaxed->iterations;
        r["note"] = "sigma-inflated relaxation of the marginal constraints; a finite-statistics "
                    "convention of this tool, not part of the exact feasibility question";
        j["relaxed"] = r;
    }
    return j;
}

inline json route_json(const RouteVerdict& v) {
    json j;
    j["status"] = to_string(v.status);
    j["admitted"] = v.admitted;
    j["reason"] = v.reason;
    j["citations"] = v.citations;
    if (v.required_flag)
        j["required_flag"] = *v.required_flag;
    else
        j["required_flag"] = nullptr;
    return j;
}

inline json blame_json(const BlameReport& b) {
    json entries = json::array();
    for (const auto& e : b.entries) {
        json ej;
        ej["space"] = to_string(e.space);
        ej["violated"] = e.violated;
        json hyp = json::array();
        for (auto h : e.candidate_rejections) hyp.push_back(to_string(h));
        ej["candidate_rejections"] = hyp;
        ej["citations"] = e.citations;
        entries.push_back(ej);
    }
    json j;
    j["entries"] = entries;
    j["common_explanation_note"] = b.common_explanation_note;
    j["citations"] = b.citations;
    return j;
}

inline json interpretation_json(const AdmissibilityVerdict& v,
                                const std::optional<BlameReport>& blame) {
    json j;
    j["mode"] = to_string(v.mode);
    j["flags"] = json{{"spacelike_separated", v.flags.spacelike_separated},
                      {"conditions_exhaustive", v.flags.conditions_exhaustive}};
    j["space1"] = route_json(v.space1);
    j["space2"] = route_json(v.space2);
    j["notes"] = v.notes;
    j["decision_table_version"] = kDecisionTableVersion;
    if (blame)
        j["blame"] = blame_json(*blame);
    else
        j["blame"] = nullptr;
    return j;
}

inline json config_json(const RunConfig& cfg) {
    if (cfg.from_log) {
        json j;
        j["model"] = json{{"kind", "external_log"}, {"path", cfg.log_path}};
        j["seed"] = cfg.seed;
        j["analyses"] = json{{"space1", cfg.analyses.space1},
                             {"space2", cfg.analyses.space2},
                             {"frequentism", cfg.analyses.frequentism},
                             {"feasibility", cfg.analyses.feasibility},
                             {"sigma_level", cfg.analyses.sigma_level},
                             {"relaxed_feasibility", cfg.analyses.relaxed_feasibility},
                             {"convergence_eps", cfg.analyses.convergence_eps},
                             {"tail_fraction", cfg.analyses.tail_fraction},
                             {"randomness_eps", cfg.analyses.randomness_eps}};
        j["interpretation"] = json{
            {"mode", to_string(cfg.interpretation)},
            {"flags", json{{"spacelike_separated", cfg.flags.spacelike_separated},
                           {"conditions_exhaustive", cfg.flags.conditions_exhaustive}}}};
        j["output"] = json{{"trial_log", cfg.outputs.trial_log}, {"report", cfg.outputs.report}};
        return j;
    }

    json model;
    model["kind"] = to_string(cfg.model.kind);
    model["angles_deg"] = json{{"alpha_unprimed", cfg.model.angles.left_unprimed.degrees()},
                               {"alpha_primed", cfg.model.angles.left_primed.degrees()},
                               {"beta_unprimed", cfg.model.angles.right_unprimed.degrees()},
                               {"beta_primed", cfg.model.angles.right_primed.degrees()}};
    switch (cfg.model.kind) {
        case ModelKind::Quantum:
            model["visibility"] = cfg.model.visibility;
            break;
        case ModelKind::Conspiracy:
            model["conspiracy_bias"] = cfg.model.conspiracy_bias;
            [[fallthrough]];
        case ModelKind::LhvDeterministic:
        case ModelKind::LhvStochastic:
            model["lambda_weights"] = cfg.model.lambda_weights;
            model["response"] = json{{"left_unprimed", cfg.model.response.left[0]},
                                     {"left_primed", cfg.model.response.left[1]},
                                     {"right_unprimed", cfg.model.response.right[0]},
                                     {"right_primed", cfg.model.response.right[1]}};
            break;
        case ModelKind::Signaling:
            model["signaling_strength"] = cfg.model.signaling_strength;
            break;
    }

    json j;
    j["model"] = model;
    j["trials"] = cfg.n_trials;
    j["seed"] = cfg.seed;
    j["analyses"] = json{{"space1", cfg.analyses.space1},
                         {"space2", cfg.analyses.space2},
                         {"frequentism", cfg.analyses.frequentism},
                         {"feasibility", cfg.analyses.feasibility},
                         {"sigma_level", cfg.analyses.sigma_level},
                         {"relaxed_feasibility", cfg.analyses.relaxed_feasibility},
                         {"convergence_eps", cfg.analyses.convergence_eps},
                         {"tail_fraction", cfg.analyses.tail_fraction},
                         {"randomness_eps", cfg.analyses.randomness_eps}};
    j["interpretation"] = json{
        {"mode", to_string(cfg.interpretation)},
        {"flags", json{{"spacelike_separated", cfg.flags.spacelike_separated},
                       {"conditions_exhaustive", cfg.flags.conditions_exhaustive}}}};
    j["output"] = json{{"trial_log", cfg.outputs.trial_log}, {"report", cfg.outputs.report}};
    return j;
}

inline std::string iso8601_utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return std::string(buf);
}

} // namespace report_detail

/// Assemble the JSON report. Analysis keys appear iff the analysis was
/// requested; a requested-but-refused analysis appears as a refusal block.
/// The single wall-clock field lives at meta.generated_at.
inline nlohmann::json build_report(const RunConfig& cfg, const AnalysisOutcomes& out) {
    using nlohmann::json;
    namespace rd = report_detail;

    json report;
    report["config"] = rd::config_json(cfg);

    if (cfg.analyses.space1) {
        if (!out.verdict.space1.admitted)
            report["space1"] = rd::refusal_json(out.verdict.space1);
        else if (out.space1) {
            json j = rd::evaluation_json(*out.space1);
            if (out.no_signaling) j["no_signaling"] = rd::no_signaling_json(*out.no_signaling);
            report["space1"] = j;
        }
    }

    if (cfg.analyses.space2) {
        if (!out.verdict.space2.admitted) {
            report["space2"] = rd::refusal_json(out.verdict.space2);
        } else if (out.space2) {
            report["space2"] = rd::evaluation_json(*out.space2);
        } else if (out.space2_surrogate) {
            report["space2"] = json{
                {"surrogate", "feasibility"},
                {"note", "the source assigns no counterfactual outcome quadruples, so the "
                         "counterfactual question is answered by the joint-distribution "
                         "feasibility block"}};
        }
    }

    if (cfg.analyses.frequentism && out.frequentism)
        report["frequentism"] = rd::frequentism_json(*out.frequentism);

    if (cfg.analyses.feasibility && out.feasibility)
        report["feasibility"] = rd::feasibility_json(*out.feasibility);

    report["interpretation"] = rd::interpretation_json(out.verdict, out.blame);

    report["meta"] = json{{"tool", "belllab"},
                          {"version", kVersion},
                          {"seed", cfg.seed},
                          {"source", out.source},
                          {"generated_at", rd::iso8601_utc_now()}};
    return report;
}

} // namespace belllab
