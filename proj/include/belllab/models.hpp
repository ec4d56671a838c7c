#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "belllab/ch.hpp"
#include "belllab/errors.hpp"
#include "belllab/rng.hpp"
#include "belllab/types.hpp"

namespace belllab {

/// Hidden variable: an index into a finite set {0, ..., K-1}, drawn from a
/// fixed distribution independent of the trial index.
struct HiddenVariable {
    std::size_t value = 0;
};

/// Per-side response probabilities P(outcome = 1 | slot, lambda).
/// Deterministic models carry entries in {0, 1}.
struct ResponseTable {
    // [slot][lambda]
    std::array<std::vector<double>, 2> left;
    std::array<std::vector<double>, 2> right;

    std::size_t lambda_cardinality() const { return left[0].size(); }

    double prob_one(Side side, Slot slot, std::size_t lambda) const {
        const auto& table = side == Side::Left ? left : right;
        return table[static_cast<std::size_t>(slot)][lambda];
    }

    static ResponseTable constant(double p, std::size_t k) {
        ResponseTable t;
        for (auto* side : {&t.left, &t.right})
            for (auto& row : *side) row.assign(k, p);
        return t;
    }

    void validate() const {
        const std::size_t k = left[0].size();
        if (k == 0) throw DomainError("ResponseTable: lambda cardinality must be >= 1");
        for (const auto* side : {&left, &right})
            for (const auto& row : *side) {
                if (row.size() != k) throw DomainError("ResponseTable: ragged rows");
                for (double p : row)
                    if (!(p >= 0.0 && p <= 1.0))
                        throw DomainError("ResponseTable: entries must be probabilities in [0, 1]");
            }
    }
};

enum class ModelKind : std::uint8_t {
    LhvDeterministic,
    LhvStochastic,
    Quantum,
    Signaling,
    Conspiracy,
};

inline const char* to_string(ModelKind k) {
    switch (k) {
        case ModelKind::LhvDeterministic: return "lhv_deterministic";
        case ModelKind::LhvStochastic: return "lhv_stochastic";
        case ModelKind::Quantum: return "quantum";
        case ModelKind::Signaling: return "signaling";
        case ModelKind::Conspiracy: return "conspiracy";
    }
    return "?";
}

/// True for sources that assign outcomes to both settings per side, i.e. the
/// kinds for which counterfactual quadruples exist.
inline bool supports_counterfactuals(ModelKind k) {
    return k == ModelKind::LhvDeterministic || k == ModelKind::LhvStochastic;
}

inline bool uses_hidden_variable(ModelKind k) {
    return k == ModelKind::LhvDeterministic || k == ModelKind::LhvStochastic ||
           k == ModelKind::Conspiracy;
}

/// Full description of a trial source. Kind-specific fields are meaningful
/// exactly for their kind; validate() enforces that.
struct ModelSpec {
    ModelKind kind = ModelKind::LhvStochastic;
    SettingSet angles = canonical_settings();

    // Quantum only
    double visibility = 1.0;

    // LHV kinds (LhvDeterministic, LhvStochastic, Conspiracy)
    ResponseTable response;
    std::vector<double> lambda_weights; // sums to 1 within 1e-12

    // Conspiracy only
    double conspiracy_bias = 0.0;

    // Signaling only
    double signaling_strength = 0.0;

    std::size_t lambda_cardinality() const { return lambda_weights.size(); }

    void validate() const {
        if (uses_hidden_variable(kind)) {
            response.validate();
            if (lambda_weights.size() != response.lambda_cardinality())
                throw DomainError("ModelSpec: lambda_weights size must match response table");
            double sum = 0.0;
            for (double w : lambda_weights) {
                if (!(w >= 0.0)) throw DomainError("ModelSpec: lambda_weights must be non-negative");
                sum += w;
            }
            if (std::abs(sum - 1.0) > 1e-12)
                throw DomainError("ModelSpec: lambda_weights must sum to 1 within 1e-12");
            if (kind == ModelKind::LhvDeterministic) {
                for (const auto* side : {&response.left, &response.right})
                    for (const auto& row : *side)
                        for (double p : row)
                            if (p != 0.0 && p != 1.0)
                                throw DomainError(
                                    "ModelSpec: deterministic response entries must be 0 or 1");
            }
        }
        if (kind == ModelKind::Quantum && !(visibility >= 0.0 && visibility <= 1.0))
            throw DomainError("ModelSpec: visibility must be in [0, 1]");
        if (kind == ModelKind::Conspiracy && !(conspiracy_bias >= 0.0 && conspiracy_bias <= 1.0))
            throw DomainError("ModelSpec: conspiracy_bias must be in [0, 1]");
        if (kind == ModelKind::Signaling &&
            !(signaling_strength >= 0.0 && signaling_strength <= 1.0))
            throw DomainError("ModelSpec: signaling_strength must be in [0, 1]");
    }

    static ModelSpec quantum(SettingSet angles, double visibility) {
        ModelSpec s;
        s.kind = ModelKind::Quantum;
        s.angles = angles;
        s.visibility = visibility;
        return s;
    }

    static ModelSpec lhv(ModelKind kind, ResponseTable response, std::vector<double> weights,
                         SettingSet angles = canonical_settings()) {
        ModelSpec s;
        s.kind = kind;
        s.angles = angles;
        s.response = std::move(response);
        s.lambda_weights = std::move(weights);
        return s;
    }

    static ModelSpec signaling(double strength, SettingSet angles = canonical_settings()) {
        ModelSpec s;
        s.kind = ModelKind::Signaling;
        s.angles = angles;
        s.signaling_strength = strength;
        return s;
    }
};

inline std::vector<double> uniform_weights(std::size_t k) {
    return std::vector<double>(k, 1.0 / static_cast<double>(k));
}

/// Batch of generated trials; quadruples are aligned by trial_index and
/// present exactly when the source kind supports counterfactuals.
struct TrialBatch {
    std::string source; // kind and seed, used as the collective source id
    SettingSet angles;
    std::vector<TrialRecord> records;
    std::optional<std::vector<CounterfactualQuadruple>> quadruples;

    std::size_t size() const { return records.size(); }
};

/// Setting-choice policy.
struct UniformIid {};
struct ConspiracyBiased {
    double bias = 0.0;           // probability that the pair index equals lambda mod 4
    std::size_t lambda = 0;      // current hidden-variable value
};

namespace detail {

inline int draw_pair_index(const UniformIid&, rng::Stream& s) {
    return static_cast<int>(s.next_below(4));
}

inline int draw_pair_index(const ConspiracyBiased& p, rng::Stream& s) {
    if (!(p.bias >= 0.0 && p.bias <= 1.0))
        throw DomainError("ConspiracyBiased: bias must be in [0, 1]");
    if (p.bias > 0.0 && s.next_unit() < p.bias) return static_cast<int>(p.lambda % 4);
    return static_cast<int>(s.next_below(4));
}

inline std::size_t draw_lambda(const std::vector<double>& weights, rng::Stream& s) {
    double u = s.next_unit();
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc) return i;
    }
    return weights.size() - 1;
}

} // namespace detail

/// Draw one setting pair under the given policy. UniformIid yields each of
/// the four pairs with probability 1/4 independent of everything;
/// ConspiracyBiased correlates the pair choice with the current lambda,
/// breaking P(a,b|lambda) = P(a,b).
template <class Policy>
std::pair<SettingLabel, SettingLabel> choose_settings(const Policy& policy, const SettingSet& angles,
                                                      rng::Stream& stream) {
    const int pair = detail::draw_pair_index(policy, stream);
    return {angles.label(Side::Left, PairIndex::left_slot(pair)),
            angles.label(Side::Right, PairIndex::right_slot(pair))};
}

/// Quantum joint outcome law, photon-pair convention:
///   P(a, b | alpha, beta) = 1/4 * [1 + (-1)^(a+b) * v * cos 2(alpha - beta)].
inline double quantum_joint_probability(int a, int b, Angle alpha, Angle beta, double visibility) {
    const double c = std::cos(2.0 * (alpha.radians() - beta.radians()));
    const double sign = ((a + b) % 2 == 0) ? 1.0 : -1.0;
    return 0.25 * (1.0 + sign * visibility * c);
}

namespace detail {

inline void generate_trial(const ModelSpec& spec, std::uint64_t seed, std::size_t i,
                           TrialRecord& rec, CounterfactualQuadruple* quad) {
    rng::Stream settings_stream(seed, i, rng::Role::SettingChoice);

    std::size_t lambda = 0;
    if (uses_hidden_variable(spec.kind)) {
        rng::Stream lambda_stream(seed, i, rng::Role::Lambda);
        lambda = draw_lambda(spec.lambda_weights, lambda_stream);
    }

    std::pair<SettingLabel, SettingLabel> chosen =
        spec.kind == ModelKind::Conspiracy
            ? choose_settings(ConspiracyBiased{spec.conspiracy_bias, lambda}, spec.angles,
                              settings_stream)
            : choose_settings(UniformIid{}, spec.angles, settings_stream);

    rec.trial_index = i;
    rec.alpha = chosen.first;
    rec.beta = chosen.second;

    switch (spec.kind) {
        case ModelKind::LhvDeterministic:
        case ModelKind::LhvStochastic:
        case ModelKind::Conspiracy: {
            // Sample the response at every slot from the same lambda; the
            // recorded outcome is read off the chosen slots.
            auto draw = [&](Side side, Slot slot, rng::Role role) {
                rng::Stream s(seed, i, role);
                return Outcome{s.bernoulli(spec.response.prob_one(side, slot, lambda)) ? 1 : 0};
            };
            CounterfactualQuadruple q{
                draw(Side::Left, Slot::Unprimed, rng::Role::LeftUnprimed),
                draw(Side::Left, Slot::Primed, rng::Role::LeftPrimed),
                draw(Side::Right, Slot::Unprimed, rng::Role::RightUnprimed),
                draw(Side::Right, Slot::Primed, rng::Role::RightPrimed)};
            rec.a = q.left(rec.alpha.slot);
            rec.b = q.right(rec.beta.slot);
            if (quad) *quad = q;
            break;
        }
        case ModelKind::Quantum: {
            rng::Stream s(seed, i, rng::Role::JointOutcome);
            const double u = s.next_unit();
            double acc = 0.0;
            int a = 1, b = 1; // falls through to (1,1) if rounding leaves a sliver
            for (int outcome = 0; outcome < 4; ++outcome) {
                acc += quantum_joint_probability(outcome >> 1, outcome & 1, rec.alpha.angle,
                                                 rec.beta.angle, spec.visibility);
                if (u < acc) {
                    a = outcome >> 1;
                    b = outcome & 1;
                    break;
                }
            }
            rec.a = Outcome{a};
            rec.b = Outcome{b};
            break;
        }
        case ModelKind::Signaling: {
            // Left wing stays local; the right wing's response is pulled
            // toward the left slot indicator with weight signaling_strength.
            rng::Stream sl(seed, i, rng::Role::LeftOutcome);
            rng::Stream sr(seed, i, rng::Role::RightOutcome);
            rec.a = Outcome{sl.bernoulli(0.5) ? 1 : 0};
            const double leak = rec.alpha.slot == Slot::Primed ? 1.0 : 0.0;
            const double p1 = (1.0 - spec.signaling_strength) * 0.5 + spec.signaling_strength * leak;
            rec.b = Outcome{sr.bernoulli(p1) ? 1 : 0};
            break;
        }
    }
}

} // namespace detail

/// How run_trials treats counterfactual quadruples.
enum class QuadrupleMode : std::uint8_t {
    Auto,    // emit when the kind supports them
    Require, // error if the kind cannot supply them
    Omit,
};

/// Generate a reproducible batch: identical (spec, n, seed) gives an
/// identical batch for any worker count. Workers partition the trial range;
/// every random decision is keyed by (seed, trial_index, role).
inline TrialBatch run_trials(const ModelSpec& spec, std::size_t n, std::uint64_t seed,
                             unsigned threads = 1, QuadrupleMode mode = QuadrupleMode::Auto) {
    spec.validate();
    if (n == 0) throw DomainError("run_trials: n must be >= 1");
    const bool want_quads = mode == QuadrupleMode::Require ||
                            (mode == QuadrupleMode::Auto && supports_counterfactuals(spec.kind));
    if (want_quads && !supports_counterfactuals(spec.kind))
        throw UnsupportedOperationError(
            std::string("run_trials: no counterfactual ground truth exists for a ") +
            to_string(spec.kind) + " source");

    TrialBatch batch;
    batch.source = std::string(to_string(spec.kind)) + "/seed=" + std::to_string(seed);
    batch.angles = spec.angles;
    batch.records.resize(n);
    if (want_quads) batch.quadruples.emplace(n);

    auto fill_range = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            detail::generate_trial(spec, seed, i, batch.records[i],
                                   want_quads ? &(*batch.quadruples)[i] : nullptr);
    };

    if (threads <= 1 || n < 2 * threads) {
        fill_range(0, n);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (n + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t) {
            const std::size_t begin = std::min(n, static_cast<std::size_t>(t) * chunk);
            const std::size_t end = std::min(n, begin + chunk);
            if (begin < end) pool.emplace_back(fill_range, begin, end);
        }
        for (auto& th : pool) th.join();
    }
    return batch;
}

/// Exact single-pair probabilities of an LHV source: sums over lambda of
/// response-table products. The closed-form oracle the Monte Carlo estimates
/// are checked against.
struct ExactPairTerms {
    double p11 = 0.0;
    double pA = 0.0; // P(A=1 | left setting of the pair)
    double pB = 0.0; // P(B=1 | right setting of the pair)
};

inline ExactPairTerms lhv_exact_terms(const ModelSpec& spec, Slot left, Slot right) {
    if (!supports_counterfactuals(spec.kind))
        throw UnsupportedOperationError(std::string("lhv_exact_terms: not defined for a ") +
                                        to_string(spec.kind) + " source");
    spec.validate();
    ExactPairTerms out;
    for (std::size_t l = 0; l < spec.lambda_cardinality(); ++l) {
        const double w = spec.lambda_weights[l];
        const double pl = spec.response.prob_one(Side::Left, left, l);
        const double pr = spec.response.prob_one(Side::Right, right, l);
        out.p11 += w * pl * pr;
        out.pA += w * pl;
        out.pB += w * pr;
    }
    return out;
}

/// Full exact CH terms of an LHV source, marginals taken from the
/// unprimed-unprimed pair.
inline ChTerms lhv_exact_ch_terms(const ModelSpec& spec) {
    ChTerms t;
    const auto ab = lhv_exact_terms(spec, Slot::Unprimed, Slot::Unprimed);
    t.p11_ab = ab.p11;
    t.p11_abp = lhv_exact_terms(spec, Slot::Unprimed, Slot::Primed).p11;
    t.p11_apb = lhv_exact_terms(spec, Slot::Primed, Slot::Unprimed).p11;
    t.p11_apbp = lhv_exact_terms(spec, Slot::Primed, Slot::Primed).p11;
    t.pA_a = ab.pA;
    t.pB_b = ab.pB;
    return t;
}

} // namespace belllab
