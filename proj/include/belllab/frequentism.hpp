#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "belllab/errors.hpp"
#include "belllab/models.hpp"
#include "belllab/types.hpp"

namespace belllab {

/// Identifies a collective: the repeatable experimental context (one setting
/// pair) plus the source that produced it.
struct CollectiveLabel {
    int pair = 0; // PairIndex
    SettingLabel alpha;
    SettingLabel beta;
    std::string source;

    friend bool operator==(const CollectiveLabel&, const CollectiveLabel&) = default;
};

/// Finite stand-in for a von Mises collective: an ordered sequence of
/// attribute pairs all sharing one experimental context.
struct Collective {
    CollectiveLabel label;
    std::vector<OutcomePair> attributes; // trial order

    std::size_t size() const { return attributes.size(); }

    /// Relative frequency of an attribute over the whole sequence.
    double frequency(const OutcomePair& attribute) const {
        if (attributes.empty()) return 0.0;
        std::size_t count = 0;
        for (const auto& x : attributes)
            if (x == attribute) ++count;
        return static_cast<double>(count) / static_cast<double>(attributes.size());
    }
};

/// Partition a batch into the four per-context collectives, order preserved.
/// Contexts the batch never visited come back empty.
inline std::array<Collective, 4> build_collectives(const TrialBatch& batch) {
    if (batch.records.empty()) throw InsufficientDataError("build_collectives: empty batch");
    std::array<Collective, 4> out;
    for (int p = 0; p < 4; ++p) {
        auto& c = out[static_cast<std::size_t>(p)];
        c.label.pair = p;
        c.label.alpha = batch.angles.label(Side::Left, PairIndex::left_slot(p));
        c.label.beta = batch.angles.label(Side::Right, PairIndex::right_slot(p));
        c.label.source = batch.source;
    }
    for (const auto& rec : batch.records)
        out[static_cast<std::size_t>(rec.pair_index())].attributes.emplace_back(rec.a, rec.b);
    return out;
}

/// Place-selection rules. Positions are 1-based: "even positions" selects the
/// 2nd, 4th, ... elements.
struct SelectionRule {
    enum class Kind : std::uint8_t { EvenPositions, EveryKth, AfterAttribute };
    Kind kind = Kind::EvenPositions;
    std::size_t k = 2;                   // EveryKth
    OutcomePair attribute{Outcome{0}, Outcome{0}}; // AfterAttribute

    static SelectionRule even_positions() { return SelectionRule{Kind::EvenPositions, 2, {}}; }
    static SelectionRule every_kth(std::size_t k) {
        if (k < 2) throw DomainError("SelectionRule: k must be >= 2");
        return SelectionRule{Kind::EveryKth, k, {}};
    }
    static SelectionRule after_attribute(OutcomePair attr) {
        return SelectionRule{Kind::AfterAttribute, 0, attr};
    }

    std::string name() const {
        switch (kind) {
            case Kind::EvenPositions: return "even_positions";
            case Kind::EveryKth: return "every_" + std::to_string(k) + "th";
            case Kind::AfterAttribute:
                return "after_(" + std::to_string(attribute.first.bit) + "," +
                       std::to_string(attribute.second.bit) + ")";
        }
        return "?";
    }
};

/// The fixed rule library standing in for "all admissible place selections"
/// (the full randomness condition is not computable).
inline std::vector<SelectionRule> standard_selection_rules() {
    return {SelectionRule::even_positions(), SelectionRule::every_kth(3),
            SelectionRule::every_kth(5),
            SelectionRule::after_attribute({Outcome{1}, Outcome{1}})};
}

/// Extract the subsequence a rule selects, preserving order. An empty result
/// is legal; downstream length checks flag it.
inline Collective apply_selection(const Collective& c, const SelectionRule& rule) {
    Collective out;
    out.label = c.label;
    switch (rule.kind) {
        case SelectionRule::Kind::EvenPositions:
            for (std::size_t i = 1; i < c.attributes.size(); i += 2)
                out.attributes.push_back(c.attributes[i]);
            break;
        case SelectionRule::Kind::EveryKth: {
            if (rule.k < 2) throw DomainError("apply_selection: k must be >= 2");
            for (std::size_t i = rule.k - 1; i < c.attributes.size(); i += rule.k)
                out.attributes.push_back(c.attributes[i]);
            break;
        }
        case SelectionRule::Kind::AfterAttribute:
            for (std::size_t i = 0; i + 1 < c.attributes.size(); ++i)
                if (c.attributes[i] == rule.attribute) out.attributes.push_back(c.attributes[i + 1]);
            break;
    }
    return out;
}

/// Finite-n check of the convergence axiom: does the running relative
/// frequency settle near its final value over the tail of the sequence?
struct ConvergenceDiagnostic {
    std::vector<double> trajectory; // running relative frequency, per prefix
    bool stabilized = false;
    double tail_deviation = 0.0;           // max |f_k - f_N| over the tail window
    std::optional<std::size_t> n_star;     // earliest 1-based prefix end from which
                                           // every later deviation stays < eps
    double eps = 0.0;
    double tail_fraction = 0.0;
};

inline ConvergenceDiagnostic convergence_diagnostic(const Collective& c,
                                                    const OutcomePair& attribute, double eps,
                                                    double tail_fraction) {
    if (c.size() < 100)
        throw InsufficientDataError("convergence_diagnostic: collective shorter than 100");
    if (!(eps > 0.0)) throw DomainError("convergence_diagnostic: eps must be > 0");
    if (!(tail_fraction > 0.0 && tail_fraction < 1.0))
        throw DomainError("convergence_diagnostic: tail_fraction must be in (0, 1)");

    ConvergenceDiagnostic d;
    d.eps = eps;
    d.tail_fraction = tail_fraction;
    const std::size_t n = c.size();
    d.trajectory.resize(n);
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (c.attributes[i] == attribute) ++count;
        d.trajectory[i] = static_cast<double>(count) / static_cast<double>(i + 1);
    }
    const double final_freq = d.trajectory.back();

    // Walk backwards: suffix_max[i] = max deviation from i to the end.
    std::size_t first_good = n; // 0-based index from which all deviations < eps
    for (std::size_t i = n; i-- > 0;) {
        if (std::abs(d.trajectory[i] - final_freq) < eps)
            first_good = i;
        else
            break;
    }
    if (first_good < n) d.n_star = first_good + 1; // 1-based

    const std::size_t tail_len =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(n))));
    const std::size_t tail_begin = n - tail_len;
    double worst = 0.0;
    for (std::size_t i = tail_begin; i < n; ++i)
        worst = std::max(worst, std::abs(d.trajectory[i] - final_freq));
    d.tail_deviation = worst;
    d.stabilized = worst < eps;
    return d;
}

/// Per-rule outcome of the randomness condition check.
struct RandomnessEntry {
    SelectionRule rule;
    bool insufficient = false;     // selected subsequence shorter than 100
    std::size_t sub_length = 0;
    double sub_frequency = 0.0;
    double deviation = 0.0;        // |freq(sub) - freq(full)|
    bool flagged = false;
};

/// Test the randomness condition against a set of place selections: a rule is
/// flagged when its subsequence's limiting frequency moves by at least eps.
inline std::vector<RandomnessEntry> randomness_diagnostic(const Collective& c,
                                                          std::span<const SelectionRule> rules,
                                                          const OutcomePair& attribute,
                                                          double eps) {
    if (!(eps > 0.0)) throw DomainError("randomness_diagnostic: eps must be > 0");
    const double full = c.frequency(attribute);
    std::vector<RandomnessEntry> out;
    out.reserve(rules.size());
    for (const auto& rule : rules) {
        RandomnessEntry e;
        e.rule = rule;
        const Collective sub = apply_selection(c, rule);
        e.sub_length = sub.size();
        if (sub.size() < 100) {
            e.insufficient = true; // per-rule marker, not a global failure
        } else {
            e.sub_frequency = sub.frequency(attribute);
            e.deviation = std::abs(e.sub_frequency - full);
            e.flagged = e.deviation >= eps;
        }
        out.push_back(e);
    }
    return out;
}

/// One term of a target expression and the collective feeding it.
/// conditional_on_source marks a probability that is explicitly conditioned
/// on (and reported within) its own collective's context.
struct TermFeed {
    std::string term;
    CollectiveLabel source;
    bool conditional_on_source = true;
};

struct GuardVerdict {
    bool admissible = true;
    std::string details;
    std::vector<CollectiveLabel> offending;
};

/// Von Mises compatibility guard: adding or subtracting unconditional
/// probabilities is only allowed within a single collective. Terms that are
/// conditional on their own collective are reported per collective and never
/// pooled, so they pass.
inline GuardVerdict collective_compatibility_guard(std::span<const CollectiveLabel> known,
                                                   std::span<const TermFeed> request) {
    auto is_known = [&](const CollectiveLabel& l) {
        return std::any_of(known.begin(), known.end(),
                           [&](const CollectiveLabel& k) { return k == l; });
    };
    for (const auto& feed : request)
        if (!is_known(feed.source))
            throw DomainError("collective_compatibility_guard: unknown collective label for term '" +
                              feed.term + "'");

    GuardVerdict verdict;
    std::vector<CollectiveLabel> combined_sources;
    for (const auto& feed : request) {
        if (feed.conditional_on_source) continue;
        if (std::find(combined_sources.begin(), combined_sources.end(), feed.source) ==
            combined_sources.end())
            combined_sources.push_back(feed.source);
    }
    if (combined_sources.size() > 1) {
        verdict.admissible = false;
        verdict.offending = combined_sources;
        verdict.details = "combined terms drawn from " + std::to_string(combined_sources.size()) +
                          " distinct collectives; the addition of probabilities is only allowed "
                          "within a single collective";
    } else {
        verdict.details = "all combined terms originate from a single collective";
    }
    return verdict;
}

} // namespace belllab
