#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "belllab/errors.hpp"

namespace belllab {

/// Outcome of a phase-1 solve of { A x = b, x >= 0 }.
struct Phase1Result {
    bool feasible = false;
    double objective = 0.0;          // minimal total artificial mass (L1 infeasibility)
    std::vector<double> solution;    // x, when feasible
    std::vector<double> farkas;      // y with y'A <= 0, y'b > 0, when infeasible
    int iterations = 0;
};

/// Dense phase-1 simplex with Bland's rule (smallest-index entering column,
/// smallest-index tie break on the ratio test), which cannot cycle. Rows are
/// sign-flipped so the right-hand side is non-negative; one artificial
/// variable per row forms the starting basis. The Farkas vector is recovered
/// from the artificial columns' reduced costs and mapped back through the
/// row flips.
inline Phase1Result phase1_simplex(const std::vector<std::vector<double>>& A,
                                   const std::vector<double>& b, double tol,
                                   int max_iterations = 20000) {
    const std::size_t m = A.size();
    const std::size_t n = m == 0 ? 0 : A[0].size();
    if (b.size() != m) throw DomainError("phase1_simplex: A and b dimensions disagree");
    for (const auto& row : A)
        if (row.size() != n) throw DomainError("phase1_simplex: ragged matrix");

    constexpr double kPivotEps = 1e-11;

    // Tableau: columns [structural | artificial | rhs]; last row is the
    // phase-1 reduced-cost row with the negated objective in its rhs cell.
    const std::size_t cols = n + m + 1;
    std::vector<std::vector<double>> T(m + 1, std::vector<double>(cols, 0.0));
    std::vector<double> flip(m, 1.0);
    std::vector<std::size_t> basis(m);

    for (std::size_t i = 0; i < m; ++i) {
        flip[i] = b[i] < 0.0 ? -1.0 : 1.0;
        for (std::size_t j = 0; j < n; ++j) T[i][j] = flip[i] * A[i][j];
        T[i][n + i] = 1.0;
        T[i][cols - 1] = flip[i] * b[i];
        basis[i] = n + i;
    }
    // r_j = c_j - sum of column j over rows (c_B = 1 on artificials).
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += T[i][j];
        T[m][j] = -s;
    }
    for (std::size_t j = 0; j < m; ++j) T[m][n + j] = 0.0;
    double obj = 0.0;
    for (std::size_t i = 0; i < m; ++i) obj += T[i][cols - 1];
    T[m][cols - 1] = -obj;

    std::vector<PivotStep> trace;
    Phase1Result result;

    for (int iter = 0;; ++iter) {
        if (iter >= max_iterations)
            throw SolverFailure("phase1_simplex: iteration cap exceeded (" +
                                    std::to_string(max_iterations) + ")",
                                std::move(trace));

        // Bland: smallest-index column with negative reduced cost.
        std::size_t enter = cols - 1;
        for (std::size_t j = 0; j < n + m; ++j) {
            if (T[m][j] < -kPivotEps) {
                enter = j;
                break;
            }
        }
        if (enter == cols - 1) { // optimal
            result.iterations = iter;
            break;
        }

        std::size_t leave = m;
        double best_ratio = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            if (T[i][enter] > kPivotEps) {
                const double ratio = T[i][cols - 1] / T[i][enter];
                if (leave == m || ratio < best_ratio - kPivotEps ||
                    (std::abs(ratio - best_ratio) <= kPivotEps && basis[i] < basis[leave])) {
                    leave = i;
                    best_ratio = ratio;
                }
            }
        }
        if (leave == m)
            throw SolverFailure("phase1_simplex: unbounded pivot column (corrupt tableau)",
                                std::move(trace));

        trace.push_back(PivotStep{iter, static_cast<int>(enter), static_cast<int>(basis[leave]),
                                  -T[m][cols - 1]});

        // Pivot on (leave, enter).
        const double piv = T[leave][enter];
        for (std::size_t j = 0; j < cols; ++j) T[leave][j] /= piv;
        for (std::size_t i = 0; i <= m; ++i) {
            if (i == leave) continue;
            const double f = T[i][enter];
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < cols; ++j) T[i][j] -= f * T[leave][j];
        }
        basis[leave] = enter;
    }

    result.objective = -T[m][cols - 1];
    result.feasible = result.objective <= tol;

    if (result.feasible) {
        result.solution.assign(n, 0.0);
        for (std::size_t i = 0; i < m; ++i)
            if (basis[i] < n) result.solution[basis[i]] = T[i][cols - 1];
    } else {
        // y_i = 1 - reduced cost of artificial i, undone through the flips.
        result.farkas.assign(m, 0.0);
        for (std::size_t i = 0; i < m; ++i) result.farkas[i] = flip[i] * (1.0 - T[m][n + i]);
    }
    return result;
}

} // namespace belllab
