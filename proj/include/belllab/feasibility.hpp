#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "belllab/errors.hpp"
#include "belllab/estimators.hpp"
#include "belllab/simplex.hpp"
#include "belllab/types.hpp"

namespace belllab {

/// One probability vector (p00, p01, p10, p11) per setting pair.
struct ContextDistributions {
    std::array<std::array<double, 4>, 4> p{}; // [pair][2a + b]

    void validate(double tol = 1e-9) const {
        for (int pair = 0; pair < 4; ++pair) {
            double sum = 0.0;
            for (double v : p[static_cast<std::size_t>(pair)]) {
                if (!(v >= 0.0))
                    throw DomainError("ContextDistributions: negative entry in pair " +
                                      pair_name(pair));
                sum += v;
            }
            if (std::abs(sum - 1.0) > tol)
                throw DomainError("ContextDistributions: pair " + pair_name(pair) +
                                  " does not sum to 1");
        }
    }

    static ContextDistributions from_counts(const SettingCounts& counts) {
        ContextDistributions d;
        for (int pair = 0; pair < 4; ++pair) {
            const auto& pc = counts.pairs[static_cast<std::size_t>(pair)];
            if (pc.n == 0)
                throw InsufficientDataError("ContextDistributions: no trials for setting pair " +
                                            pair_name(pair));
            for (int o = 0; o < 4; ++o)
                d.p[static_cast<std::size_t>(pair)][static_cast<std::size_t>(o)] =
                    static_cast<double>(pc.outcomes[static_cast<std::size_t>(o)]) /
                    static_cast<double>(pc.n);
        }
        return d;
    }

    /// Exact context distributions of an LHV source (closed-form oracle).
    static ContextDistributions from_lhv(const ModelSpec& spec) {
        ContextDistributions d;
        for (int pair = 0; pair < 4; ++pair) {
            const auto t =
                lhv_exact_terms(spec, PairIndex::left_slot(pair), PairIndex::right_slot(pair));
            auto& row = d.p[static_cast<std::size_t>(pair)];
            row[3] = t.p11;                                   // p11
            row[2] = std::max(0.0, t.pA - t.p11);             // p10
            row[1] = std::max(0.0, t.pB - t.p11);             // p01
            row[0] = std::max(0.0, 1.0 - t.pA - t.pB + t.p11);
        }
        return d;
    }

    /// CH terms read off the contexts, marginals from the unprimed-unprimed
    /// pair (the space-1 expression shape).
    ChTerms ch_terms() const {
        ChTerms t;
        t.p11_ab = p[0][3];
        t.p11_abp = p[1][3];
        t.p11_apb = p[2][3];
        t.p11_apbp = p[3][3];
        t.pA_a = p[0][2] + p[0][3];
        t.pB_b = p[0][1] + p[0][3];
        return t;
    }
};

/// Clip negatives and renormalize each context; sampling noise must not
/// manufacture spurious infeasibility. Returns the largest adjustment made.
inline double project_to_simplex(ContextDistributions& d) {
    double worst = 0.0;
    for (auto& row : d.p) {
        std::array<double, 4> before = row;
        double sum = 0.0;
        for (auto& v : row) {
            if (v < 0.0) v = 0.0;
            sum += v;
        }
        if (sum <= 0.0) {
            row = {0.25, 0.25, 0.25, 0.25};
        } else {
            for (auto& v : row) v /= sum;
        }
        for (int i = 0; i < 4; ++i)
            worst = std::max(worst, std::abs(row[static_cast<std::size_t>(i)] -
                                             before[static_cast<std::size_t>(i)]));
    }
    return worst;
}

/// Candidate joint distribution over the 16 counterfactual quadruples.
struct JointDistribution16 {
    std::array<double, 16> q{};

    void validate(double tol = 1e-9) const {
        double sum = 0.0;
        for (double v : q) {
            if (v < -1e-12) throw DomainError("JointDistribution16: negative mass");
            sum += v;
        }
        if (std::abs(sum - 1.0) > tol)
            throw DomainError("JointDistribution16: mass does not sum to 1");
    }
};

/// The linear system tying a joint distribution to the observed contexts:
/// one equation per (setting pair, outcome pair) plus normalization.
struct MarginalSystem {
    std::vector<std::vector<double>> A; // 17 x 16
    std::vector<double> b;

    static constexpr std::size_t rows = 17;
    static constexpr std::size_t cols = 16;
};

/// Build the marginal constraints: for each context and outcome, the mass of
/// all quadruples consistent with that assignment must equal the observed
/// probability. Redundant rows are left in; the solver handles rank.
inline MarginalSystem marginal_constraints(const ContextDistributions& dists) {
    dists.validate();
    MarginalSystem sys;
    sys.A.assign(MarginalSystem::rows, std::vector<double>(MarginalSystem::cols, 0.0));
    sys.b.assign(MarginalSystem::rows, 0.0);

    for (int pair = 0; pair < 4; ++pair) {
        const Slot ls = PairIndex::left_slot(pair);
        const Slot rs = PairIndex::right_slot(pair);
        for (int a = 0; a < 2; ++a) {
            for (int b = 0; b < 2; ++b) {
                const std::size_t row = static_cast<std::size_t>(4 * pair + 2 * a + b);
                for (int qi = 0; qi < 16; ++qi) {
                    const auto quad = CounterfactualQuadruple::from_index(qi);
                    if (quad.left(ls).bit == a && quad.right(rs).bit == b)
                        sys.A[row][static_cast<std::size_t>(qi)] = 1.0;
                }
                sys.b[row] =
                    dists.p[static_cast<std::size_t>(pair)][static_cast<std::size_t>(2 * a + b)];
            }
        }
    }
    for (int qi = 0; qi < 16; ++qi) sys.A[16][static_cast<std::size_t>(qi)] = 1.0;
    sys.b[16] = 1.0;
    return sys;
}

struct FeasibilityCertificate {
    enum class Verdict : std::uint8_t { Feasible, Infeasible };
    Verdict verdict = Verdict::Feasible;
    std::optional<JointDistribution16> witness; // Feasible
    std::optional<std::vector<double>> farkas;  // Infeasible, one entry per constraint row
    double residual = 0.0; // Feasible: max |Aq - b|; Infeasible: certified gap y'b
    int iterations = 0;

    bool feasible() const { return verdict == Verdict::Feasible; }
};

/// Certificate check: does the witness reproduce every context within tol?
inline bool verify_witness(const JointDistribution16& q, const ContextDistributions& dists,
                           double tol) {
    double sum = 0.0;
    for (double v : q.q) {
        if (v < -1e-12) return false;
        sum += v;
    }
    if (std::abs(sum - 1.0) > tol) return false;
    const MarginalSystem sys = marginal_constraints(dists);
    for (std::size_t r = 0; r < MarginalSystem::rows; ++r) {
        double lhs = 0.0;
        for (std::size_t c = 0; c < MarginalSystem::cols; ++c) lhs += sys.A[r][c] * q.q[c];
        if (std::abs(lhs - sys.b[r]) > tol) return false;
    }
    return true;
}

/// Infeasibility-certificate check: y separates { Aq = b, q >= 0 } when
/// y'A <= 0 (componentwise, up to 1e-9) while y'b >= 1e-6.
inline bool farkas_check(const std::vector<double>& y, const ContextDistributions& dists) {
    if (y.size() != MarginalSystem::rows)
        throw DomainError("farkas_check: expected " + std::to_string(MarginalSystem::rows) +
                          " entries, got " + std::to_string(y.size()));
    const MarginalSystem sys = marginal_constraints(dists);
    for (std::size_t c = 0; c < MarginalSystem::cols; ++c) {
        double dot = 0.0;
        for (std::size_t r = 0; r < MarginalSystem::rows; ++r) dot += y[r] * sys.A[r][c];
        if (dot > 1e-9) return false;
    }
    double yb = 0.0;
    for (std::size_t r = 0; r < MarginalSystem::rows; ++r) yb += y[r] * sys.b[r];
    return yb >= 1e-6;
}

/// Decide whether the four contexts are marginals of one distribution over
/// the 16 quadruples. Every verdict ships its certificate.
inline FeasibilityCertificate solve_feasibility(const ContextDistributions& dists, double tol = 1e-9) {
    if (!(tol >= 1e-12 && tol <= 1e-6))
        throw DomainError("solve_feasibility: tol must lie in [1e-12, 1e-6]");
    const MarginalSystem sys = marginal_constraints(dists);
    const Phase1Result lp = phase1_simplex(sys.A, sys.b, tol);

    FeasibilityCertificate cert;
    cert.iterations = lp.iterations;
    if (lp.feasible) {
        cert.verdict = FeasibilityCertificate::Verdict::Feasible;
        JointDistribution16 w;
        for (std::size_t i = 0; i < 16; ++i) w.q[i] = std::max(0.0, lp.solution[i]);
        cert.witness = w;
        double worst = 0.0;
        for (std::size_t r = 0; r < MarginalSystem::rows; ++r) {
            double lhs = 0.0;
            for (std::size_t c = 0; c < MarginalSystem::cols; ++c) lhs += sys.A[r][c] * w.q[c];
            worst = std::max(worst, std::abs(lhs - sys.b[r]));
        }
        cert.residual = worst;
    } else {
        cert.verdict = FeasibilityCertificate::Verdict::Infeasible;
        cert.farkas = lp.farkas;
        double yb = 0.0;
        for (std::size_t r = 0; r < MarginalSystem::rows; ++r) yb += lp.farkas[r] * sys.b[r];
        cert.residual = yb;
    }
    return cert;
}

/// Statistical mode: relax every marginal equation to |Aq - b| <= k * sigma
/// (sigma from binomial sampling noise) and re-decide. Distinguishes
/// "infeasible beyond noise" from borderline finite-statistics cases.
struct RelaxedFeasibility {
    bool feasible = false;
    std::optional<JointDistribution16> witness;
    double gap = 0.0; // phase-1 objective when infeasible
    double sigma_scale = 3.0;
    int iterations = 0;
};

inline std::array<double, 16> binomial_sigmas(const ContextDistributions& dists,
                                              const std::array<std::uint64_t, 4>& n_per_pair) {
    std::array<double, 16> sigma{};
    for (int pair = 0; pair < 4; ++pair) {
        for (int o = 0; o < 4; ++o) {
            const double p =
                dists.p[static_cast<std::size_t>(pair)][static_cast<std::size_t>(o)];
            const auto n = n_per_pair[static_cast<std::size_t>(pair)];
            sigma[static_cast<std::size_t>(4 * pair + o)] =
                n == 0 ? 0.0 : std::sqrt(p * (1.0 - p) / static_cast<double>(n));
        }
    }
    return sigma;
}

inline RelaxedFeasibility solve_feasibility_relaxed(const ContextDistributions& dists,
                                                    const std::array<double, 16>& sigma,
                                                    double sigma_scale = 3.0, double tol = 1e-9) {
    if (!(tol >= 1e-12 && tol <= 1e-6))
        throw DomainError("solve_feasibility_relaxed: tol must lie in [1e-12, 1e-6]");
    if (!(sigma_scale >= 0.0)) throw DomainError("solve_feasibility_relaxed: scale must be >= 0");
    const MarginalSystem sys = marginal_constraints(dists);

    // A q + t = b + k*sigma, A q - u = b - k*sigma, sum q = 1; t, u >= 0.
    const std::size_t rows = 33, cols = 16 + 32;
    std::vector<std::vector<double>> A(rows, std::vector<double>(cols, 0.0));
    std::vector<double> b(rows, 0.0);
    for (std::size_t r = 0; r < 16; ++r) {
        for (std::size_t c = 0; c < 16; ++c) {
            A[r][c] = sys.A[r][c];
            A[16 + r][c] = sys.A[r][c];
        }
        A[r][16 + r] = 1.0;
        A[16 + r][32 + r] = -1.0;
        b[r] = sys.b[r] + sigma_scale * sigma[r];
        b[16 + r] = sys.b[r] - sigma_scale * sigma[r];
    }
    for (std::size_t c = 0; c < 16; ++c) A[32][c] = 1.0;
    b[32] = 1.0;

    const Phase1Result lp = phase1_simplex(A, b, tol);
    RelaxedFeasibility out;
    out.sigma_scale = sigma_scale;
    out.iterations = lp.iterations;
    out.feasible = lp.feasible;
    out.gap = lp.feasible ? 0.0 : lp.objective;
    if (lp.feasible) {
        JointDistribution16 w;
        for (std::size_t i = 0; i < 16; ++i) w.q[i] = std::max(0.0, lp.solution[i]);
        out.witness = w;
    }
    return out;
}

} // namespace belllab
