#pragma once

#include <array>
#include <cmath>
#include <string>

#include "belllab/errors.hpp"
#include "belllab/types.hpp"

namespace belllab {

/// The six probabilities entering the CH expression. Which probability space
/// they were estimated in is the caller's business; the algebra is identical.
struct ChTerms {
    double p11_ab = 0.0;   // P(A=1, B=1 | a, b)   or P(A_a=1, B_b=1)
    double p11_abp = 0.0;  // P(A=1, B=1 | a, b')  or P(A_a=1, B_b'=1)
    double p11_apb = 0.0;  // P(A=1, B=1 | a', b)  or P(A_a'=1, B_b=1)
    double p11_apbp = 0.0; // P(A=1, B=1 | a', b') or P(A_a'=1, B_b'=1)
    double pA_a = 0.0;     // P(A=1 | a)           or P(A_a=1)
    double pB_b = 0.0;     // P(B=1 | b)           or P(B_b=1)

    /// Joint term for a setting pair, in PairIndex order.
    double p11(int pair) const {
        switch (pair) {
            case 0: return p11_ab;
            case 1: return p11_abp;
            case 2: return p11_apb;
            case 3: return p11_apbp;
            default: throw DomainError("ChTerms: pair index must be in [0, 3]");
        }
    }

    friend bool operator==(const ChTerms&, const ChTerms&) = default;
};

namespace detail {

inline void require_probability(double v, const char* field) {
    if (!(v >= 0.0 && v <= 1.0))
        throw DomainError(std::string("ChTerms.") + field + " must be a probability in [0, 1]");
}

inline void validate(const ChTerms& t) {
    require_probability(t.p11_ab, "p11_ab");
    require_probability(t.p11_abp, "p11_abp");
    require_probability(t.p11_apb, "p11_apb");
    require_probability(t.p11_apbp, "p11_apbp");
    require_probability(t.pA_a, "pA_a");
    require_probability(t.pB_b, "pB_b");
}

} // namespace detail

/// CH expression value:
///   p11(a,b) + p11(a,b') + p11(a',b) - p11(a',b') - P(A=1|a) - P(B=1|b).
/// Pure arithmetic, no clamping; violation magnitudes survive intact.
inline double ch_value(const ChTerms& t) {
    detail::validate(t);
    return t.p11_ab + t.p11_abp + t.p11_apb - t.p11_apbp - t.pA_a - t.pB_b;
}

/// Bounds check for the CH value, -1 <= s <= 0 up to tol.
inline bool ch_within_bounds(double s, double tol) {
    if (!(tol >= 0.0)) throw DomainError("ch_within_bounds: tol must be >= 0");
    return s >= -1.0 - tol && s <= 0.0 + tol;
}

/// Terms induced by a single deterministic quadruple: each probability is the
/// 0/1 value read off the quadruple.
inline ChTerms terms_of_quadruple(const CounterfactualQuadruple& q) {
    ChTerms t;
    t.p11_ab = q.a_unprimed.bit & q.b_unprimed.bit;
    t.p11_abp = q.a_unprimed.bit & q.b_primed.bit;
    t.p11_apb = q.a_primed.bit & q.b_unprimed.bit;
    t.p11_apbp = q.a_primed.bit & q.b_primed.bit;
    t.pA_a = q.a_unprimed.bit;
    t.pB_b = q.b_unprimed.bit;
    return t;
}

/// Terms induced by a probability distribution over the 16 quadruples,
/// indexed per CounterfactualQuadruple::index.
inline ChTerms terms_of_distribution(const std::array<double, 16>& weights) {
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0))
            throw DomainError("terms_of_distribution: weights must be non-negative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw DomainError("terms_of_distribution: weights must sum to 1 within 1e-9");

    ChTerms t;
    for (int i = 0; i < 16; ++i) {
        const auto q = CounterfactualQuadruple::from_index(i);
        const double w = weights[static_cast<std::size_t>(i)];
        t.p11_ab += w * (q.a_unprimed.bit & q.b_unprimed.bit);
        t.p11_abp += w * (q.a_unprimed.bit & q.b_primed.bit);
        t.p11_apb += w * (q.a_primed.bit & q.b_unprimed.bit);
        t.p11_apbp += w * (q.a_primed.bit & q.b_primed.bit);
        t.pA_a += w * q.a_unprimed.bit;
        t.pB_b += w * q.b_unprimed.bit;
    }
    return t;
}

} // namespace belllab
