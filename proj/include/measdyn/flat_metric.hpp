#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "measdyn/detail/bl_simplex.hpp"
#include "measdyn/detail/dense_lp.hpp"
#include "measdyn/measure.hpp"

namespace measdyn {

/// Which test-function ball defines the dual norm.
///  - sum: ||psi||_inf + Lip(psi) <= 1   (canonical)
///  - max: ||psi||_inf <= 1 and Lip(psi) <= 1
enum class NormForm { sum, max };

/// Values of a test function at the atom sites plus its sup / Lipschitz budgets.
struct LipschitzWitness {
    std::vector<double> psi;
    double sup_budget = 0.0;
    double lip_budget = 0.0;
};

struct BlNormResult {
    double value = 0.0;
    LipschitzWitness witness;
    std::size_t pivots = 0;
};

/// A test function with declared bounds on its sup norm and Lipschitz constant.
struct BoundedLipschitzFunction {
    std::function<double(std::span<const double>)> evaluator;
    double sup_bound = 0.0;
    double lip_bound = 0.0;

    double operator()(std::span<const double> x) const { return evaluator(x); }
    double norm() const { return sup_bound + lip_bound; }
};

/// Sum of w_i f(x_i).
inline double pairing(const BoundedLipschitzFunction& f, const AtomicMeasure& mu) {
    double s = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double v = f(mu.location(i));
        if (!std::isfinite(v)) throw NonFiniteValue("pairing: test function is non-finite at an atom");
        s += mu.weight(i) * v;
    }
    return s;
}

/// Pairing of a measure with the witness values at its own atom sites.
inline double pairing(const LipschitzWitness& wit, const AtomicMeasure& mu) {
    double s = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) s += mu.weight(i) * wit.psi[i];
    return s;
}

/// Largest violation of the witness constraints (0 when feasible).
inline double witness_violation(const AtomicMeasure& mu, const LipschitzWitness& wit,
                                NormForm form = NormForm::sum) {
    double v = 0.0;
    if (form == NormForm::sum) {
        v = std::max(v, wit.sup_budget + wit.lip_budget - 1.0);
    } else {
        v = std::max({v, wit.sup_budget - 1.0, wit.lip_budget - 1.0});
    }
    v = std::max({v, -wit.sup_budget, -wit.lip_budget});
    for (std::size_t i = 0; i < mu.size(); ++i) {
        v = std::max(v, std::abs(wit.psi[i]) - wit.sup_budget);
        for (std::size_t j = i + 1; j < mu.size(); ++j) {
            const double d = distance(mu.location(i), mu.location(j));
            v = std::max(v, std::abs(wit.psi[i] - wit.psi[j]) - wit.lip_budget * d);
        }
    }
    return v;
}

/// Bounded-Lipschitz (flat) norm of an atomic measure, with an optimal witness.
///
/// The test function only matters at the atom sites: any site values obeying
/// the budgets extend to the whole space with the same norm (McShane
/// extension followed by truncation at +-a). In one dimension only
/// neighbouring atoms need a Lipschitz constraint; the rest follow by the
/// triangle inequality.
inline BlNormResult bl_norm_solve(const AtomicMeasure& mu, NormForm form = NormForm::sum) {
    BlNormResult res;
    const std::size_t n = mu.size();
    res.witness.psi.assign(n, 0.0);
    if (n == 0) return res;

    const double tv = tv_norm(mu);
    // Same-sign measures: psi = +-1 attains tv, which bounds the norm from above.
    bool pos = true, neg = true;
    for (double w : mu.weights()) {
        pos = pos && w > 0;
        neg = neg && w < 0;
    }
    if (pos || neg) {
        res.value = tv;
        res.witness.psi.assign(n, pos ? 1.0 : -1.0);
        res.witness.sup_budget = 1.0;
        res.witness.lip_budget = 0.0;
        return res;
    }

    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = mu.weight(i) / tv;

    std::vector<std::uint32_t> from, to;
    std::vector<double> dist;
    if (mu.dim() == 1) {
        from.reserve(2 * n);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double d = mu.location(i + 1)[0] - mu.location(i)[0];
            from.push_back(static_cast<std::uint32_t>(i));
            to.push_back(static_cast<std::uint32_t>(i + 1));
            dist.push_back(d);
            from.push_back(static_cast<std::uint32_t>(i + 1));
            to.push_back(static_cast<std::uint32_t>(i));
            dist.push_back(d);
        }
    } else {
        from.reserve(n * (n - 1));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                from.push_back(static_cast<std::uint32_t>(i));
                to.push_back(static_cast<std::uint32_t>(j));
                dist.push_back(distance(mu.location(i), mu.location(j)));
            }
        }
    }

    detail::BlSimplex lp(std::move(w), std::move(from), std::move(to), std::move(dist),
                         form == NormForm::sum);
    auto sol = lp.solve();
    res.value = sol.value * tv;
    res.witness.psi = std::move(sol.psi);
    res.witness.sup_budget = sol.a;
    res.witness.lip_budget = sol.L;
    res.pivots = sol.pivots;
    return res;
}

inline double bl_norm(const AtomicMeasure& mu, NormForm form = NormForm::sum) {
    return bl_norm_solve(mu, form).value;
}

inline double bl_distance(const AtomicMeasure& mu, const AtomicMeasure& nu,
                          NormForm form = NormForm::sum) {
    return bl_norm(linear_combine(1.0, mu, -1.0, nu), form);
}

/// Exhaustive grid search over psi in {-1, -1+h, ..., 1}^n (n <= 3), keeping
/// tuples whose tightest budgets a = max|psi_i|, L = max |psi_i-psi_j|/d_ij
/// satisfy a + L <= 1. The last coordinate is optimised exactly over the
/// grid: its feasible set is an interval around the distance-weighted point
/// between the others, located by bisection.
inline double bl_norm_oracle(const AtomicMeasure& mu, double grid_step) {
    const std::size_t n = mu.size();
    if (n > 3) throw Error("bl_norm_oracle: at most 3 atoms supported, got " + std::to_string(n));
    if (!(grid_step > 0.0)) throw Error("bl_norm_oracle: grid step must be positive");
    if (n == 0) return 0.0;

    const long K = std::lround(2.0 / grid_step);
    const double h = 2.0 / static_cast<double>(K);
    auto val = [&](long k) { return -1.0 + h * static_cast<double>(k); };
    constexpr double slack = 1e-12;

    std::vector<double> w(mu.weights().begin(), mu.weights().end());
    double dd[3][3] = {};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) dd[i][j] = distance(mu.location(i), mu.location(j));

    // Best grid value for the last atom given fixed earlier values.
    auto best_last = [&](const double* fixed, std::size_t nf, double a0, double L0,
                         double& out_val) -> bool {
        const std::size_t last = nf;
        auto g = [&](double p) {
            double a = std::max(a0, std::abs(p));
            double L = L0;
            for (std::size_t i = 0; i < nf; ++i) L = std::max(L, std::abs(p - fixed[i]) / dd[i][last]);
            return a + L;
        };
        double centre;
        if (nf == 0) {
            centre = 0.0;
        } else if (nf == 1) {
            centre = fixed[0];
        } else {
            const double d0 = dd[0][last], d1 = dd[1][last];
            centre = (fixed[0] * d1 + fixed[1] * d0) / (d0 + d1);
        }
        const double kc = (centre + 1.0) / h;
        long k_lo = std::clamp(static_cast<long>(std::floor(kc)), 0L, K);
        long k_hi = std::clamp(static_cast<long>(std::ceil(kc)), 0L, K);
        long seed = -1;
        if (g(val(k_lo)) <= 1.0 + slack) seed = k_lo;
        else if (g(val(k_hi)) <= 1.0 + slack) seed = k_hi;
        if (seed < 0) return false;
        const double wl = w[last];
        long best = seed;
        if (wl > 0) {
            long lo = seed, hi = K;  // largest feasible index
            if (g(val(hi)) <= 1.0 + slack) lo = hi;
            while (hi - lo > 1) {
                const long mid = (lo + hi) / 2;
                if (g(val(mid)) <= 1.0 + slack) lo = mid;
                else hi = mid;
            }
            best = lo;
        } else if (wl < 0) {
            long lo = 0, hi = seed;  // smallest feasible index
            if (g(val(lo)) <= 1.0 + slack) hi = lo;
            while (hi - lo > 1) {
                const long mid = (lo + hi) / 2;
                if (g(val(mid)) <= 1.0 + slack) hi = mid;
                else lo = mid;
            }
            best = hi;
        }
        out_val = val(best);
        return true;
    };

    double best = 0.0;
    if (n == 1) {
        double p;
        best_last(nullptr, 0, 0.0, 0.0, p);
        best = w[0] * p;
    } else if (n == 2) {
        for (long k0 = 0; k0 <= K; ++k0) {
            const double p0 = val(k0);
            double p1;
            if (!best_last(&p0, 1, std::abs(p0), 0.0, p1)) continue;
            best = std::max(best, w[0] * p0 + w[1] * p1);
        }
    } else {
        double fixed[2];
        for (long k0 = 0; k0 <= K; ++k0) {
            fixed[0] = val(k0);
            for (long k1 = 0; k1 <= K; ++k1) {
                fixed[1] = val(k1);
                const double a0 = std::max(std::abs(fixed[0]), std::abs(fixed[1]));
                const double L0 = std::abs(fixed[0] - fixed[1]) / dd[0][1];
                if (a0 + L0 > 1.0 + slack) continue;
                double p2;
                if (!best_last(fixed, 2, a0, L0, p2)) continue;
                best = std::max(best, w[0] * fixed[0] + w[1] * fixed[1] + w[2] * p2);
            }
        }
    }
    return best;
}

struct ProductBoundCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    bool ok = true;
};

/// Measure with weights w_i * b(x_i).
inline AtomicMeasure multiply(const BoundedLipschitzFunction& b, const AtomicMeasure& mu) {
    std::vector<double> coords(mu.coords().begin(), mu.coords().end());
    std::vector<double> weights(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) weights[i] = mu.weight(i) * b(mu.location(i));
    return AtomicMeasure(mu.dim(), std::move(coords), std::move(weights));
}

/// ||b mu|| <= ||b||_{1,inf} ||mu||.
inline ProductBoundCheck product_bound_check(const BoundedLipschitzFunction& b, const AtomicMeasure& mu,
                                             double tolerance = 1e-9) {
    ProductBoundCheck c;
    c.lhs = bl_norm(multiply(b, mu));
    c.rhs = b.norm() * bl_norm(mu);
    c.ok = c.lhs <= c.rhs + tolerance;
    return c;
}

/// Optimal transport cost between two nonnegative measures of equal mass
/// with cost min(|x - y|, 1). Used only as a comparison diagnostic.
inline double kr_distance(const AtomicMeasure& mu, const AtomicMeasure& nu) {
    if (mu.dim() != nu.dim()) throw DimensionMismatch("kr_distance: dimension mismatch");
    for (double w : mu.weights())
        if (w < 0) throw Error("kr_distance: measures must be nonnegative");
    for (double w : nu.weights())
        if (w < 0) throw Error("kr_distance: measures must be nonnegative");
    const double m1 = total_mass(mu), m2 = total_mass(nu);
    if (std::abs(m1 - m2) > 1e-12 * std::max(1.0, std::max(m1, m2)))
        throw Error("kr_distance: measures must have equal mass");
    const std::size_t p = mu.size(), q = nu.size();
    if (p == 0 || q == 0) return 0.0;
    detail::DenseLp lp(p + q, p * q);
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < q; ++j) {
            const std::size_t col = i * q + j;
            lp.c[col] = std::min(distance(mu.location(i), nu.location(j)), 1.0);
            lp.at(i, col) = 1.0;
            lp.at(p + j, col) = 1.0;
        }
    }
    for (std::size_t i = 0; i < p; ++i) lp.b[i] = mu.weight(i);
    for (std::size_t j = 0; j < q; ++j) lp.b[p + j] = nu.weight(j) * (m1 / m2);
    auto res = detail::dense_lp_minimize(std::move(lp));
    if (!res) throw LpFailure("kr_distance: transport LP failed");
    return res->objective;
}

}  // namespace measdyn
