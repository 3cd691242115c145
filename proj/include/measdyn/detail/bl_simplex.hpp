#pragma once

// Revised simplex for the bounded-Lipschitz dual-norm LP.
//
// Primal (what the norm is):
//   max  sum_i w_i psi_i
//   s.t. |psi_i| <= a,  psi_i - psi_j <= L d_ij,  a + L <= 1   (sum form)
//                                              a <= 1, L <= 1  (max form)
//
// Solved through its dual, which has only n + 2 rows:
//   row i : p_i - q_i + sum_j (f_ij - f_ji) = w_i
//   row A : s - sum_i (p_i + q_i) - t_A     = 0
//   row B : s - sum_ij d_ij f_ij - t_B      = 0
//   min s                       (sum form; max form splits s into s_A, s_B)
// i.e. the smallest max(transport cost, unmatched mass) over partial flows.
// The optimal simplex multipliers are (psi_1..psi_n, a, L), so every solve
// also yields a primal witness. Flow columns are priced implicitly.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "measdyn/measure.hpp"

namespace measdyn {

class LpFailure : public Error {
public:
    using Error::Error;
};

namespace detail {

struct BlLpSolution {
    double value = 0.0;
    std::vector<double> psi;
    double a = 0.0;
    double L = 0.0;
    std::size_t pivots = 0;
};

class BlSimplex {
public:
    /// `w` must have unit total variation; `pairs` lists ordered pairs (i, j)
    /// carrying a Lipschitz constraint, with distance `pair_dist`.
    BlSimplex(std::vector<double> w, std::vector<std::uint32_t> pair_from,
              std::vector<std::uint32_t> pair_to, std::vector<double> pair_dist, bool sum_form)
        : n_(w.size()),
          m_(w.size() + 2),
          w_(std::move(w)),
          from_(std::move(pair_from)),
          to_(std::move(pair_to)),
          pd_(std::move(pair_dist)),
          sum_form_(sum_form) {}

    BlLpSolution solve() {
        init_basis();
        std::size_t pivots = 0;
        std::size_t degenerate_run = 0;
        bool refactored = false;
        const std::size_t max_pivots = 200 * m_ + 2000;
        std::vector<double> y(m_), alpha(m_);

        for (;;) {
            compute_duals(y);
            const bool bland = degenerate_run > 50;
            const std::size_t q = price(y, bland);
            if (q == npos) {
                if (!refactored && !certify(y)) {
                    refactor();
                    refactored = true;
                    continue;
                }
                break;
            }
            column_times_binv(q, alpha);
            const std::size_t r = ratio_test(alpha, bland);
            if (r == npos) throw LpFailure("bl_norm: LP reported unbounded (cannot happen for valid input)");
            const double theta = std::max(0.0, xb_[r]) / alpha[r];
            degenerate_run = theta <= 1e-15 ? degenerate_run + 1 : 0;
            pivot(r, q, alpha, theta);
            if (++pivots > max_pivots) throw LpFailure("bl_norm: pivot limit exceeded");
        }

        BlLpSolution sol;
        sol.pivots = pivots;
        sol.psi.assign(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n_));
        sol.a = y[n_];
        sol.L = y[n_ + 1];
        double obj = 0.0;
        for (std::size_t k = 0; k < m_; ++k) obj += cost(basis_[k]) * std::max(0.0, xb_[k]);
        sol.value = obj;
        return sol;
    }

private:
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    // Column ids: P_i = i, Q_i = n + i, S (or S_A) = 2n, S_B = 2n + 1,
    // T_A = 2n + 2, T_B = 2n + 3, flow pair p = 2n + 4 + p.
    std::size_t id_P(std::size_t i) const { return i; }
    std::size_t id_Q(std::size_t i) const { return n_ + i; }
    std::size_t id_S() const { return 2 * n_; }
    std::size_t id_SB() const { return 2 * n_ + 1; }
    std::size_t id_TA() const { return 2 * n_ + 2; }
    std::size_t id_TB() const { return 2 * n_ + 3; }
    std::size_t id_F(std::size_t p) const { return 2 * n_ + 4 + p; }
    std::size_t num_cols() const { return 2 * n_ + 4 + from_.size(); }
    std::size_t rA() const { return n_; }
    std::size_t rB() const { return n_ + 1; }

    double cost(std::size_t id) const {
        if (id == id_S()) return 1.0;
        if (id == id_SB()) return sum_form_ ? 0.0 : 1.0;
        return 0.0;
    }

    struct Entry {
        std::size_t row;
        double val;
    };

    std::size_t entries(std::size_t id, Entry* e) const {
        if (id < n_) {
            e[0] = {id, 1.0};
            e[1] = {rA(), -1.0};
            return 2;
        }
        if (id < 2 * n_) {
            e[0] = {id - n_, -1.0};
            e[1] = {rA(), -1.0};
            return 2;
        }
        if (id == id_S()) {
            e[0] = {rA(), 1.0};
            if (sum_form_) {
                e[1] = {rB(), 1.0};
                return 2;
            }
            return 1;
        }
        if (id == id_SB()) {
            e[0] = {rB(), 1.0};
            return sum_form_ ? 0 : 1;
        }
        if (id == id_TA()) {
            e[0] = {rA(), -1.0};
            return 1;
        }
        if (id == id_TB()) {
            e[0] = {rB(), -1.0};
            return 1;
        }
        const std::size_t p = id - 2 * n_ - 4;
        e[0] = {from_[p], 1.0};
        e[1] = {to_[p], -1.0};
        e[2] = {rB(), -pd_[p]};
        return 3;
    }

    double& binv(std::size_t r, std::size_t c) { return binv_[r * m_ + c]; }

    void init_basis() {
        basis_.assign(m_, 0);
        is_basic_.assign(num_cols(), 0);
        binv_.assign(m_ * m_, 0.0);
        xb_.assign(m_, 0.0);
        // Rows i: p_i or q_i with value |w_i|; row A: s; row B: t_B (sum) or s_B (max).
        double tv = 0.0;
        std::vector<double> sigma(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            sigma[i] = w_[i] >= 0.0 ? 1.0 : -1.0;
            basis_[i] = w_[i] >= 0.0 ? id_P(i) : id_Q(i);
            xb_[i] = std::abs(w_[i]);
            tv += std::abs(w_[i]);
            binv(i, i) = sigma[i];
        }
        basis_[rA()] = id_S();
        xb_[rA()] = tv;
        binv(rA(), rA()) = 1.0;
        for (std::size_t i = 0; i < n_; ++i) binv(rA(), i) = sigma[i];
        if (sum_form_) {
            basis_[rB()] = id_TB();
            xb_[rB()] = tv;
            binv(rB(), rA()) = 1.0;
            for (std::size_t i = 0; i < n_; ++i) binv(rB(), i) = sigma[i];
            binv(rB(), rB()) = -1.0;
        } else {
            basis_[rB()] = id_SB();
            xb_[rB()] = 0.0;
            binv(rB(), rB()) = 1.0;
        }
        for (auto id : basis_) is_basic_[id] = 1;
    }

    void compute_duals(std::vector<double>& y) {
        std::fill(y.begin(), y.end(), 0.0);
        for (std::size_t k = 0; k < m_; ++k) {
            const double c = cost(basis_[k]);
            if (c == 0.0) continue;
            const double* row = &binv_[k * m_];
            for (std::size_t r = 0; r < m_; ++r) y[r] += c * row[r];
        }
    }

    double reduced_cost(std::size_t id, const std::vector<double>& y) const {
        const double yA = y[rA()], yB = y[rB()];
        if (id < n_) return yA - y[id];
        if (id < 2 * n_) return yA + y[id - n_];
        if (id == id_S()) return sum_form_ ? 1.0 - yA - yB : 1.0 - yA;
        if (id == id_SB()) return sum_form_ ? 0.0 : 1.0 - yB;
        if (id == id_TA()) return yA;
        if (id == id_TB()) return yB;
        const std::size_t p = id - 2 * n_ - 4;
        return pd_[p] * yB - y[from_[p]] + y[to_[p]];
    }

    std::size_t price(const std::vector<double>& y, bool bland) const {
        constexpr double tol = 1e-12;
        std::size_t best = npos;
        double best_d = -tol;
        const std::size_t nc = num_cols();
        for (std::size_t id = 0; id < nc; ++id) {
            if (is_basic_[id]) continue;
            if (sum_form_ && id == id_SB()) continue;  // empty column in sum form
            const double d = reduced_cost(id, y);
            if (d < best_d) {
                best = id;
                best_d = d;
                if (bland) break;
            }
        }
        return best;
    }

    void column_times_binv(std::size_t id, std::vector<double>& alpha) {
        Entry e[3];
        const std::size_t ne = entries(id, e);
        for (std::size_t k = 0; k < m_; ++k) {
            const double* row = &binv_[k * m_];
            double s = 0.0;
            for (std::size_t t = 0; t < ne; ++t) s += row[e[t].row] * e[t].val;
            alpha[k] = s;
        }
    }

    std::size_t ratio_test(const std::vector<double>& alpha, bool bland) const {
        constexpr double piv_tol = 1e-11;
        std::size_t best = npos;
        double best_theta = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < m_; ++k) {
            if (alpha[k] <= piv_tol) continue;
            const double theta = std::max(0.0, xb_[k]) / alpha[k];
            if (best == npos || theta < best_theta - 1e-15) {
                best = k;
                best_theta = theta;
            } else if (theta <= best_theta + 1e-15) {
                const bool better = bland ? basis_[k] < basis_[best] : alpha[k] > alpha[best];
                if (better) {
                    best = k;
                    best_theta = std::min(theta, best_theta);
                }
            }
        }
        return best;
    }

    void pivot(std::size_t r, std::size_t q, const std::vector<double>& alpha, double theta) {
        for (std::size_t k = 0; k < m_; ++k) xb_[k] -= theta * alpha[k];
        xb_[r] = theta;
        double* prow = &binv_[r * m_];
        const double inv = 1.0 / alpha[r];
        for (std::size_t c = 0; c < m_; ++c) prow[c] *= inv;
        for (std::size_t k = 0; k < m_; ++k) {
            if (k == r || alpha[k] == 0.0) continue;
            const double f = alpha[k];
            double* row = &binv_[k * m_];
            for (std::size_t c = 0; c < m_; ++c) row[c] -= f * prow[c];
        }
        is_basic_[basis_[r]] = 0;
        basis_[r] = q;
        is_basic_[q] = 1;
    }

    // Checks that B^{-1} still reproduces the basic solution to working accuracy.
    bool certify(const std::vector<double>& y) const {
        std::vector<double> resid(m_, 0.0);
        Entry e[3];
        for (std::size_t k = 0; k < m_; ++k) {
            const std::size_t ne = entries(basis_[k], e);
            for (std::size_t t = 0; t < ne; ++t) resid[e[t].row] += e[t].val * xb_[k];
        }
        for (std::size_t i = 0; i < n_; ++i) resid[i] -= w_[i];
        for (double r : resid)
            if (std::abs(r) > 1e-10) return false;
        for (std::size_t k = 0; k < m_; ++k) {
            if (std::abs(reduced_cost(basis_[k], y)) > 1e-10) return false;
        }
        return true;
    }

    // Rebuilds B^{-1} from the basis by Gauss-Jordan elimination.
    void refactor() {
        std::vector<double> a(m_ * m_, 0.0);
        Entry e[3];
        for (std::size_t k = 0; k < m_; ++k) {
            const std::size_t ne = entries(basis_[k], e);
            for (std::size_t t = 0; t < ne; ++t) a[e[t].row * m_ + k] = e[t].val;
        }
        std::vector<double> inv(m_ * m_, 0.0);
        for (std::size_t k = 0; k < m_; ++k) inv[k * m_ + k] = 1.0;
        for (std::size_t c = 0; c < m_; ++c) {
            std::size_t piv = c;
            for (std::size_t r = c + 1; r < m_; ++r)
                if (std::abs(a[r * m_ + c]) > std::abs(a[piv * m_ + c])) piv = r;
            if (a[piv * m_ + c] == 0.0) throw LpFailure("bl_norm: singular basis during refactorization");
            if (piv != c) {
                for (std::size_t t = 0; t < m_; ++t) {
                    std::swap(a[piv * m_ + t], a[c * m_ + t]);
                    std::swap(inv[piv * m_ + t], inv[c * m_ + t]);
                }
            }
            const double d = 1.0 / a[c * m_ + c];
            for (std::size_t t = 0; t < m_; ++t) {
                a[c * m_ + t] *= d;
                inv[c * m_ + t] *= d;
            }
            for (std::size_t r = 0; r < m_; ++r) {
                if (r == c) continue;
                const double f = a[r * m_ + c];
                if (f == 0.0) continue;
                for (std::size_t t = 0; t < m_; ++t) {
                    a[r * m_ + t] -= f * a[c * m_ + t];
                    inv[r * m_ + t] -= f * inv[c * m_ + t];
                }
            }
        }
        // inv now maps row-space vectors to basic-variable order (columns of B = basis order).
        binv_ = std::move(inv);
        for (std::size_t k = 0; k < m_; ++k) {
            double s = 0.0;
            for (std::size_t i = 0; i < n_; ++i) s += binv_[k * m_ + i] * w_[i];
            xb_[k] = std::max(0.0, s);
        }
    }

    std::size_t n_;
    std::size_t m_;
    std::vector<double> w_;
    std::vector<std::uint32_t> from_;
    std::vector<std::uint32_t> to_;
    std::vector<double> pd_;
    bool sum_form_;

    std::vector<std::size_t> basis_;
    std::vector<char> is_basic_;
    std::vector<double> binv_;
    std::vector<double> xb_;
};

}  // namespace detail
}  // namespace measdyn
