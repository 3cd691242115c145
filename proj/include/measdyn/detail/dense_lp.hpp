#pragma once

// Two-phase tableau simplex for small dense LPs (first improving column enters,
// largest pivot among minimum-ratio rows leaves):
//   min c.x  s.t.  A x = b,  x >= 0.
// Intended for instances with at most a few hundred entries.

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

namespace measdyn::detail {

struct DenseLp {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> A;  // row-major rows x cols
    std::vector<double> b;
    std::vector<double> c;

    DenseLp(std::size_t r, std::size_t n) : rows(r), cols(n), A(r * n, 0.0), b(r, 0.0), c(n, 0.0) {}
    double& at(std::size_t r, std::size_t j) { return A[r * cols + j]; }
};

struct DenseLpResult {
    double objective = 0.0;
    std::vector<double> x;
};

inline std::optional<DenseLpResult> dense_lp_minimize(DenseLp lp) {
    constexpr double pivot_floor = 1e-9;
    const std::size_t m = lp.rows, n = lp.cols;
    for (std::size_t r = 0; r < m; ++r) {
        if (lp.b[r] < 0) {
            lp.b[r] = -lp.b[r];
            for (std::size_t j = 0; j < n; ++j) lp.at(r, j) = -lp.at(r, j);
        }
    }
    // Tableau columns: n structural + m artificial + rhs.
    const std::size_t W = n + m + 1;
    std::vector<double> T((m + 1) * W, 0.0);
    auto t = [&](std::size_t r, std::size_t j) -> double& { return T[r * W + j]; };
    std::vector<std::size_t> basis(m);
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t j = 0; j < n; ++j) t(r, j) = lp.at(r, j);
        t(r, n + r) = 1.0;
        t(r, W - 1) = lp.b[r];
        basis[r] = n + r;
    }

    auto run = [&](std::size_t ncols_allowed) -> bool {
        for (std::size_t iter = 0; iter < 100000; ++iter) {
            std::size_t enter = W;
            for (std::size_t j = 0; j < ncols_allowed; ++j) {
                if (t(m, j) < -1e-10) {
                    enter = j;
                    break;
                }
            }
            if (enter == W) return true;
            double best = INFINITY;
            for (std::size_t r = 0; r < m; ++r)
                if (t(r, enter) > pivot_floor) best = std::min(best, t(r, W - 1) / t(r, enter));
            if (best == INFINITY) return false;  // unbounded
            // Among rows attaining the minimum ratio take the largest pivot.
            std::size_t leave = m;
            const double band = best + 1e-12 * (1.0 + std::abs(best));
            for (std::size_t r = 0; r < m; ++r)
                if (t(r, enter) > pivot_floor && t(r, W - 1) / t(r, enter) <= band &&
                    (leave == m || t(r, enter) > t(leave, enter)))
                    leave = r;
            const double p = t(leave, enter);
            for (std::size_t j = 0; j < W; ++j) t(leave, j) /= p;
            for (std::size_t r = 0; r <= m; ++r) {
                if (r == leave) continue;
                const double f = t(r, enter);
                if (f == 0.0) continue;
                for (std::size_t j = 0; j < W; ++j) t(r, j) -= f * t(leave, j);
                t(r, enter) = 0.0;
                if (r < m && t(r, W - 1) < 0.0) t(r, W - 1) = 0.0;
            }
            basis[leave] = enter;
        }
        return false;
    };

    // Phase I: minimise the sum of artificials.
    for (std::size_t j = 0; j < W; ++j) t(m, j) = 0.0;
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t j = 0; j < W; ++j)
            if (j < n || j == W - 1) t(m, j) -= t(r, j);
    if (!run(n + m)) return std::nullopt;
    if (-t(m, W - 1) > 1e-9) return std::nullopt;  // infeasible
    // Drive remaining artificials out of the basis where possible.
    for (std::size_t r = 0; r < m; ++r) {
        if (basis[r] < n) continue;
        for (std::size_t j = 0; j < n; ++j) {
            if (std::abs(t(r, j)) > 1e-9) {
                const double p = t(r, j);
                for (std::size_t k = 0; k < W; ++k) t(r, k) /= p;
                for (std::size_t rr = 0; rr <= m; ++rr) {
                    if (rr == r) continue;
                    const double f = t(rr, j);
                    if (f == 0.0) continue;
                    for (std::size_t k = 0; k < W; ++k) t(rr, k) -= f * t(r, k);
                }
                basis[r] = j;
                break;
            }
        }
    }
    // Phase II.
    for (std::size_t j = 0; j < W; ++j) t(m, j) = 0.0;
    for (std::size_t j = 0; j < n; ++j) t(m, j) = lp.c[j];
    for (std::size_t r = 0; r < m; ++r) {
        const std::size_t bj = basis[r];
        const double cb = bj < n ? lp.c[bj] : 0.0;
        if (cb == 0.0) continue;
        for (std::size_t j = 0; j < W; ++j) t(m, j) -= cb * t(r, j);
    }
    if (!run(n)) return std::nullopt;

    DenseLpResult res;
    res.x.assign(n, 0.0);
    for (std::size_t r = 0; r < m; ++r)
        if (basis[r] < n) res.x[basis[r]] = t(r, W - 1);
    res.objective = 0.0;
    for (std::size_t j = 0; j < n; ++j) res.objective += lp.c[j] * res.x[j];
    return res;
}

}  // namespace measdyn::detail
