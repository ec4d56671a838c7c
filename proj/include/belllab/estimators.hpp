#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "belllab/ch.hpp"
#include "belllab/errors.hpp"
#include "belllab/models.hpp"
#include "belllab/types.hpp"

namespace belllab {

/// Empirical outcome counts per setting pair; the bridge from trials to
/// probabilities. Merging is associative and commutative.
struct SettingCounts {
    struct PairCounts {
        std::uint64_t n = 0;
        std::array<std::uint64_t, 4> outcomes{}; // index 2a + b

        std::uint64_t n00() const { return outcomes[0]; }
        std::uint64_t n01() const { return outcomes[1]; }
        std::uint64_t n10() const { return outcomes[2]; }
        std::uint64_t n11() const { return outcomes[3]; }

        double freq(int a, int b) const {
            return n == 0 ? 0.0
                          : static_cast<double>(outcomes[static_cast<std::size_t>(2 * a + b)]) /
                                static_cast<double>(n);
        }
        /// P(left outcome = 1) within this pair.
        double marginal_a() const { return n == 0 ? 0.0 : freq(1, 0) + freq(1, 1); }
        /// P(right outcome = 1) within this pair.
        double marginal_b() const { return n == 0 ? 0.0 : freq(0, 1) + freq(1, 1); }
    };

    std::array<PairCounts, 4> pairs; // PairIndex order

    std::uint64_t total() const {
        std::uint64_t t = 0;
        for (const auto& p : pairs) t += p.n;
        return t;
    }

    void add(const TrialRecord& rec) {
        auto& p = pairs[static_cast<std::size_t>(rec.pair_index())];
        ++p.n;
        ++p.outcomes[static_cast<std::size_t>(2 * rec.a.bit + rec.b.bit)];
    }

    SettingCounts& merge(const SettingCounts& other) {
        for (int i = 0; i < 4; ++i) {
            pairs[i].n += other.pairs[i].n;
            for (int j = 0; j < 4; ++j) pairs[i].outcomes[j] += other.pairs[i].outcomes[j];
        }
        return *this;
    }
};

inline std::string pair_name(int pair) {
    static const char* names[4] = {"(a,b)", "(a,b')", "(a',b)", "(a',b')"};
    if (pair < 0 || pair > 3) throw DomainError("pair_name: index must be in [0, 3]");
    return names[pair];
}

/// Exact counting of a batch into per-pair outcome tallies.
inline SettingCounts accumulate(const TrialBatch& batch) {
    if (batch.records.empty()) throw InsufficientDataError("accumulate: empty batch");
    SettingCounts counts;
    for (const auto& rec : batch.records) counts.add(rec);
    return counts;
}

enum class EvaluationSpace : std::uint8_t { Space1, Space2 };

inline const char* to_string(EvaluationSpace s) {
    return s == EvaluationSpace::Space1 ? "space1" : "space2";
}

/// One inequality evaluation: the CH value, its delta-method standard error,
/// the six terms, and the sample sizes behind them.
struct ChEvaluation {
    double s = 0.0;
    double stderr_ = 0.0;
    ChTerms terms;
    EvaluationSpace space = EvaluationSpace::Space1;
    std::array<std::uint64_t, 6> n_effective{}; // per term, ChTerms field order
};

/// How the single-setting marginals of the space-1 expression are estimated.
/// ReferencePair reads them off the unprimed-unprimed context, matching the
/// inequality's own labels; PooledAcrossPartner averages over the remote
/// setting, which silently assumes no-signaling.
enum class MarginalPolicy : std::uint8_t { ReferencePair, PooledAcrossPartner };

/// Space-1 evaluation: conditional relative frequencies per setting pair.
inline ChEvaluation space1_ch(const SettingCounts& counts,
                              MarginalPolicy policy = MarginalPolicy::ReferencePair) {
    for (int p = 0; p < 4; ++p)
        if (counts.pairs[static_cast<std::size_t>(p)].n == 0)
            throw InsufficientDataError("space1_ch: no trials for setting pair " + pair_name(p));

    ChEvaluation eval;
    eval.space = EvaluationSpace::Space1;
    for (int p = 0; p < 4; ++p) {
        const auto& pc = counts.pairs[static_cast<std::size_t>(p)];
        const double f11 = pc.freq(1, 1);
        switch (p) {
            case 0: eval.terms.p11_ab = f11; break;
            case 1: eval.terms.p11_abp = f11; break;
            case 2: eval.terms.p11_apb = f11; break;
            case 3: eval.terms.p11_apbp = f11; break;
        }
        eval.n_effective[static_cast<std::size_t>(p)] = pc.n;
    }

    if (policy == MarginalPolicy::ReferencePair) {
        const auto& ref = counts.pairs[0];
        eval.terms.pA_a = ref.marginal_a();
        eval.terms.pB_b = ref.marginal_b();
        eval.n_effective[4] = ref.n;
        eval.n_effective[5] = ref.n;
    } else {
        // Pool P(A=1|a) over both right-side settings, and mirror for B.
        const auto& ab = counts.pairs[0];
        const auto& abp = counts.pairs[1];
        const auto& apb = counts.pairs[2];
        eval.terms.pA_a =
            static_cast<double>(ab.outcomes[2] + ab.outcomes[3] + abp.outcomes[2] + abp.outcomes[3]) /
            static_cast<double>(ab.n + abp.n);
        eval.terms.pB_b =
            static_cast<double>(ab.outcomes[1] + ab.outcomes[3] + apb.outcomes[1] + apb.outcomes[3]) /
            static_cast<double>(ab.n + apb.n);
        eval.n_effective[4] = ab.n + abp.n;
        eval.n_effective[5] = ab.n + apb.n;
    }

    eval.s = ch_value(eval.terms);

    // Delta method treating the six proportions as independent binomials.
    // The reference pair feeds three terms, so this overstates the variance
    // slightly; callers absorb it with 3-4 sigma bands.
    const std::array<double, 6> values = {eval.terms.p11_ab, eval.terms.p11_abp,
                                          eval.terms.p11_apb, eval.terms.p11_apbp,
                                          eval.terms.pA_a, eval.terms.pB_b};
    double var = 0.0;
    for (int i = 0; i < 6; ++i)
        var += values[static_cast<std::size_t>(i)] * (1.0 - values[static_cast<std::size_t>(i)]) /
               static_cast<double>(eval.n_effective[static_cast<std::size_t>(i)]);
    eval.stderr_ = std::sqrt(var);
    return eval;
}

/// Space-2 evaluation: unconditional relative frequencies over one sequence
/// of counterfactual quadruples.
inline ChEvaluation space2_ch(std::span<const CounterfactualQuadruple> quadruples) {
    if (quadruples.empty()) throw InsufficientDataError("space2_ch: empty quadruple sequence");

    std::array<double, 16> weights{};
    for (const auto& q : quadruples)
        weights[static_cast<std::size_t>(q.index())] += 1.0;
    const double n = static_cast<double>(quadruples.size());
    for (auto& w : weights) w /= n;

    ChEvaluation eval;
    eval.space = EvaluationSpace::Space2;
    eval.terms = terms_of_distribution(weights);
    eval.s = ch_value(eval.terms);
    eval.n_effective.fill(quadruples.size());

    const std::array<double, 6> values = {eval.terms.p11_ab, eval.terms.p11_abp,
                                          eval.terms.p11_apb, eval.terms.p11_apbp,
                                          eval.terms.pA_a, eval.terms.pB_b};
    double var = 0.0;
    for (double v : values) var += v * (1.0 - v) / n;
    eval.stderr_ = std::sqrt(var);
    return eval;
}

/// Marginal-stability diagnostic for the locality hypothesis: how much one
/// wing's outcome marginal moves when the other wing's setting changes.
struct NoSignalingReport {
    struct Entry {
        Side side = Side::Left;
        Slot own_slot = Slot::Unprimed;
        double marginal_unprimed = 0.0; // remote slot unprimed
        double marginal_primed = 0.0;   // remote slot primed
        double discrepancy = 0.0;
        double z = 0.0;
    };
    std::array<Entry, 4> entries; // (left, a), (left, a'), (right, b), (right, b')

    double max_discrepancy(Side side) const {
        double m = 0.0;
        for (const auto& e : entries)
            if (e.side == side) m = std::max(m, e.discrepancy);
        return m;
    }
    double max_z(Side side) const {
        double m = 0.0;
        for (const auto& e : entries)
            if (e.side == side) m = std::max(m, e.z);
        return m;
    }
};

namespace detail {

inline double two_proportion_z(std::uint64_t x1, std::uint64_t n1, std::uint64_t x2,
                               std::uint64_t n2) {
    const double p1 = static_cast<double>(x1) / static_cast<double>(n1);
    const double p2 = static_cast<double>(x2) / static_cast<double>(n2);
    const double pooled = static_cast<double>(x1 + x2) / static_cast<double>(n1 + n2);
    const double var = pooled * (1.0 - pooled) *
                       (1.0 / static_cast<double>(n1) + 1.0 / static_cast<double>(n2));
    const double diff = std::abs(p1 - p2);
    if (var == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return diff / std::sqrt(var);
}

} // namespace detail

inline NoSignalingReport no_signaling_report(const SettingCounts& counts) {
    for (int p = 0; p < 4; ++p)
        if (counts.pairs[static_cast<std::size_t>(p)].n == 0)
            throw InsufficientDataError("no_signaling_report: no trials for setting pair " +
                                        pair_name(p));

    NoSignalingReport report;
    int idx = 0;
    for (Side side : {Side::Left, Side::Right}) {
        for (Slot own : {Slot::Unprimed, Slot::Primed}) {
            // The two contexts sharing this wing's slot, remote slot 0 vs 1.
            const int pu = side == Side::Left ? PairIndex::of(own, Slot::Unprimed)
                                              : PairIndex::of(Slot::Unprimed, own);
            const int pp = side == Side::Left ? PairIndex::of(own, Slot::Primed)
                                              : PairIndex::of(Slot::Primed, own);
            const auto& cu = counts.pairs[static_cast<std::size_t>(pu)];
            const auto& cp = counts.pairs[static_cast<std::size_t>(pp)];
            const std::uint64_t xu = side == Side::Left ? cu.outcomes[2] + cu.outcomes[3]
                                                        : cu.outcomes[1] + cu.outcomes[3];
            const std::uint64_t xp = side == Side::Left ? cp.outcomes[2] + cp.outcomes[3]
                                                        : cp.outcomes[1] + cp.outcomes[3];
            auto& e = report.entries[static_cast<std::size_t>(idx++)];
            e.side = side;
            e.own_slot = own;
            e.marginal_unprimed = static_cast<double>(xu) / static_cast<double>(cu.n);
            e.marginal_primed = static_cast<double>(xp) / static_cast<double>(cp.n);
            e.discrepancy = std::abs(e.marginal_unprimed - e.marginal_primed);
            e.z = detail::two_proportion_z(xu, cu.n, xp, cp.n);
        }
    }
    return report;
}

} // namespace belllab
