#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "belllab/errors.hpp"
#include "belllab/estimators.hpp"

namespace belllab {

enum class InterpretationMode : std::uint8_t {
    KolmogorovAxiomatic,
    FrequentistVonMises,
    SingleCasePropensity,
    LongRunPropensity,
};

inline const char* to_string(InterpretationMode m) {
    switch (m) {
        case InterpretationMode::KolmogorovAxiomatic: return "kolmogorov_axiomatic";
        case InterpretationMode::FrequentistVonMises: return "frequentist_von_mises";
        case InterpretationMode::SingleCasePropensity: return "single_case_propensity";
        case InterpretationMode::LongRunPropensity: return "long_run_propensity";
    }
    return "?";
}

inline constexpr std::array<InterpretationMode, 4> kAllModes = {
    InterpretationMode::KolmogorovAxiomatic, InterpretationMode::FrequentistVonMises,
    InterpretationMode::SingleCasePropensity, InterpretationMode::LongRunPropensity};

/// Experimental facts the decision table turns on. Spacelike separation is a
/// declared flag, not simulated kinematics. conditions_exhaustive is carried
/// and echoed but selects no row: single-case refusal already follows from the
/// setting-dependent conditionals, and long-run admissibility from conditions
/// not having to be exhaustive.
struct ExperimentFlags {
    bool spacelike_separated = false;
    bool conditions_exhaustive = false;

    friend bool operator==(const ExperimentFlags&, const ExperimentFlags&) = default;
};

/// Fixed registry of grounds a verdict may cite. Every non-admissible reason
/// is one of these texts, referenced by key; there are no free-text reasons.
struct Citation {
    std::string key;
    std::string text;
};

inline const std::vector<Citation>& citation_registry() {
    static const std::vector<Citation> registry = {
        {"frequentism.single_collective",
         "the four joint terms come from mutually exclusive measurement contexts, hence from "
         "different collectives, and the addition of probabilities is only allowed within a "
         "single collective (von Mises)"},
        {"frequentism.counterfactual_exclusion",
         "a counterfactual value belongs to no collective and has no relative frequency, so the "
         "quadruple expression should not be added up from frequencies"},
        {"single_case.setting_dependent_conditionals",
         "a single-case propensity conditions on the complete generating situation; the setting "
         "angles are part of that situation, so each joint term carries its own conditional and "
         "the four terms cannot be combined into one expression"},
        {"single_case.light_cone",
         "the complete situation may be cut down to the light cone at the time (Miller); with "
         "setting choice and remote detection outside each other's light cone, one common "
         "conditional serves every term"},
        {"single_case.flag_reduction",
         "the full single-case conditioning situations are reduced here to the declared "
         "spacelike_separated flag"},
        {"kolmogorov.axioms_only",
         "under the bare probability axioms both sample spaces describe the experiment, and the "
         "counterfactual inequality needs no locality or lambda-independence hypothesis"},
        {"long_run.non_exhaustive",
         "long-run propensity conditions do not have to be exhaustive, so one repeatable "
         "conditioning covers all terms and the counterfactual expression is usable"},
        {"blame.space1_hypotheses",
         "a violation of the conditional-probability bound indicts lambda-independence, "
         "locality, or the probability axioms"},
        {"blame.space2_hypotheses",
         "a violation of the counterfactual bound indicts the existence of a joint probability, "
         "the choice of probability space, or the probability axioms; adding a locality "
         "hypothesis does not help to explain it"},
        {"blame.common_explanation",
         "if both bounds are in force and one common reason must explain both violations, it "
         "has to be related with probability"},
    };
    return registry;
}

inline const Citation& cite(const std::string& key) {
    for (const auto& c : citation_registry())
        if (c.key == key) return c;
    throw DomainError("citation_registry: unknown key '" + key + "'");
}

enum class Admissibility : std::uint8_t { Admissible, Inadmissible, ConditionallyAdmissible };

inline const char* to_string(Admissibility a) {
    switch (a) {
        case Admissibility::Admissible: return "admissible";
        case Admissibility::Inadmissible: return "inadmissible";
        case Admissibility::ConditionallyAdmissible: return "conditionally_admissible";
    }
    return "?";
}

inline constexpr int kDecisionTableVersion = 1;

/// One row of the decision table: the ruling for each evaluation route under
/// one mode and one state of the spacelike_separated flag. The table below IS
/// the admissibility logic; admissibility() only looks rows up.
struct DecisionRow {
    InterpretationMode mode;
    bool spacelike_separated;

    Admissibility space1;
    std::vector<std::string> space1_citations;

    Admissibility space2;
    bool space2_admitted;                       // may the pipeline run the route?
    std::optional<std::string> required_flag;   // the flag a conditional ruling turns on
    std::vector<std::string> space2_citations;  // first key doubles as the reason
};

inline const std::vector<DecisionRow>& decision_table() {
    using M = InterpretationMode;
    using A = Admissibility;
    static const std::vector<DecisionRow> table = {
        // mode, spacelike | space1 | space2 status, admitted, required flag, citations
        {M::KolmogorovAxiomatic, false, A::Admissible, {}, A::Admissible, true, std::nullopt,
         {"kolmogorov.axioms_only"}},
        {M::KolmogorovAxiomatic, true, A::Admissible, {}, A::Admissible, true, std::nullopt,
         {"kolmogorov.axioms_only"}},

        {M::FrequentistVonMises, false, A::Admissible, {}, A::Inadmissible, false, std::nullopt,
         {"frequentism.single_collective", "frequentism.counterfactual_exclusion"}},
        {M::FrequentistVonMises, true, A::Admissible, {}, A::Inadmissible, false, std::nullopt,
         {"frequentism.single_collective", "frequentism.counterfactual_exclusion"}},

        {M::SingleCasePropensity, false, A::Admissible, {}, A::Inadmissible, false,
         "spacelike_separated", {"single_case.setting_dependent_conditionals"}},
        {M::SingleCasePropensity, true, A::Admissible, {}, A::ConditionallyAdmissible, true,
         "spacelike_separated", {"single_case.light_cone"}},

        {M::LongRunPropensity, false, A::Admissible, {}, A::Admissible, true, std::nullopt,
         {"long_run.non_exhaustive"}},
        {M::LongRunPropensity, true, A::Admissible, {}, A::Admissible, true, std::nullopt,
         {"long_run.non_exhaustive"}},
    };
    return table;
}

/// Ruling for one evaluation route. reason is the registry text of the first
/// citation whenever the status is not Admissible, and empty otherwise.
struct RouteVerdict {
    Admissibility status = Admissibility::Admissible;
    bool admitted = true;
    std::optional<std::string> required_flag;
    std::string reason;
    std::vector<std::string> citations;
};

struct AdmissibilityVerdict {
    InterpretationMode mode = InterpretationMode::KolmogorovAxiomatic;
    ExperimentFlags flags;
    RouteVerdict space1;
    RouteVerdict space2;
    std::vector<std::string> notes; // registry keys, e.g. the single-case flag reduction
};

/// Look the ruling up in decision_table(). Total over all (mode, flags).
inline AdmissibilityVerdict admissibility(InterpretationMode mode, ExperimentFlags flags) {
    const DecisionRow* row = nullptr;
    for (const auto& r : decision_table()) {
        if (r.mode == mode && r.spacelike_separated == flags.spacelike_separated) {
            row = &r;
            break;
        }
    }
    if (!row) throw ContractError("admissibility: decision table has no row for this mode");

    auto route = [](Admissibility status, bool admitted, std::optional<std::string> flag,
                    const std::vector<std::string>& keys) {
        RouteVerdict v;
        v.status = status;
        v.admitted = admitted;
        v.required_flag = std::move(flag);
        v.citations = keys;
        if (status != Admissibility::Admissible && !keys.empty()) v.reason = cite(keys[0]).text;
        return v;
    };

    AdmissibilityVerdict verdict;
    verdict.mode = mode;
    verdict.flags = flags;
    verdict.space1 = route(row->space1, true, std::nullopt, row->space1_citations);
    verdict.space2 =
        route(row->space2, row->space2_admitted, row->required_flag, row->space2_citations);
    if (mode == InterpretationMode::SingleCasePropensity)
        verdict.notes.push_back("single_case.flag_reduction");
    return verdict;
}

/// Hypotheses a violation can be pinned on.
enum class Hypothesis : std::uint8_t {
    KolmogorovAxioms,
    LambdaIndependence,
    Locality,
    JointProbabilityExistence,
    ProbabilitySpaceChoice,
};

inline const char* to_string(Hypothesis h) {
    switch (h) {
        case Hypothesis::KolmogorovAxioms: return "kolmogorov_axioms";
        case Hypothesis::LambdaIndependence: return "lambda_independence";
        case Hypothesis::Locality: return "locality";
        case Hypothesis::JointProbabilityExistence: return "joint_probability_existence";
        case Hypothesis::ProbabilitySpaceChoice: return "probability_space_choice";
    }
    return "?";
}

/// An evaluation together with its bounds check at a stated sigma level.
struct CheckedEvaluation {
    ChEvaluation eval;
    double sigma_level = 3.0;
    bool violated = false;
    double excess = 0.0; // distance outside [-1, 0], 0 when inside
};

/// Flag a violation when the value sits outside [-1, 0] by more than
/// sigma_level standard errors.
inline CheckedEvaluation flag_violation(const ChEvaluation& eval, double sigma_level = 3.0) {
    if (!(sigma_level >= 0.0)) throw DomainError("flag_violation: sigma_level must be >= 0");
    CheckedEvaluation c;
    c.eval = eval;
    c.sigma_level = sigma_level;
    if (eval.s > 0.0)
        c.excess = eval.s;
    else if (eval.s < -1.0)
        c.excess = -1.0 - eval.s;
    c.violated = c.excess > sigma_level * eval.stderr_;
    return c;
}

/// Which hypotheses are candidates for rejection, per evaluated inequality.
struct BlameReport {
    struct Entry {
        EvaluationSpace space = EvaluationSpace::Space1;
        bool violated = false;
        std::vector<Hypothesis> candidate_rejections;
        std::vector<std::string> citations;
    };
    std::vector<Entry> entries;
    bool common_explanation_note = false; // both admitted routes violated
    std::vector<std::string> citations;   // for the note
};

/// Turn checked evaluations into rejection candidates. Requesting blame for a
/// route the verdict refused is a pipeline bug, not an analysis result.
inline BlameReport blame(const AdmissibilityVerdict& verdict,
                         const std::optional<CheckedEvaluation>& space1,
                         const std::optional<CheckedEvaluation>& space2) {
    if (space1 && !verdict.space1.admitted)
        throw ContractError("blame: space-1 evaluation supplied but the verdict refused it");
    if (space2 && !verdict.space2.admitted)
        throw ContractError("blame: space-2 evaluation supplied but the verdict refused it");
    if (space1 && space1->eval.space != EvaluationSpace::Space1)
        throw ContractError("blame: evaluation mislabeled as space 1");
    if (space2 && space2->eval.space != EvaluationSpace::Space2)
        throw ContractError("blame: evaluation mislabeled as space 2");

    BlameReport report;
    if (space1) {
        BlameReport::Entry e;
        e.space = EvaluationSpace::Space1;
        e.violated = space1->violated;
        if (e.violated) {
            e.candidate_rejections = {Hypothesis::LambdaIndependence, Hypothesis::Locality,
                                      Hypothesis::KolmogorovAxioms};
            e.citations = {"blame.space1_hypotheses"};
        }
        report.entries.push_back(std::move(e));
    }
    if (space2) {
        BlameReport::Entry e;
        e.space = EvaluationSpace::Space2;
        e.violated = space2->violated;
        if (e.violated) {
            e.candidate_rejections = {Hypothesis::JointProbabilityExistence,
                                      Hypothesis::ProbabilitySpaceChoice,
                                      Hypothesis::KolmogorovAxioms};
            e.citations = {"blame.space2_hypotheses"};
        }
        report.entries.push_back(std::move(e));
    }
    if (space1 && space2 && space1->violated && space2->violated) {
        report.common_explanation_note = true;
        report.citations.push_back("blame.common_explanation");
    }
    return report;
}

} // namespace belllab
