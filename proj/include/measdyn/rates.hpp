#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "measdyn/flat_metric.hpp"
#include "measdyn/measure.hpp"

namespace measdyn {

/// Real-valued rate function with closed-form sup and Lipschitz bounds.
struct ScalarField {
    std::string family;
    std::function<double(std::span<const double>)> eval;
    double sup_bound = 0.0;
    double lip_bound = 0.0;

    double operator()(std::span<const double> x) const { return eval(x); }
    double norm() const { return sup_bound + lip_bound; }
    BoundedLipschitzFunction as_function() const { return {eval, sup_bound, lip_bound}; }

    static ScalarField constant(double c) {
        return {"constant", [c](std::span<const double>) { return c; }, std::abs(c), 0.0};
    }

    /// clamp(c0 + slope . x, lo, hi)
    static ScalarField affine_capped(double c0, Point slope, double lo, double hi) {
        if (lo > hi) throw Error("affine_capped: lo > hi");
        double s2 = 0.0;
        for (double s : slope) s2 += s * s;
        auto f = [c0, slope, lo, hi](std::span<const double> x) {
            double v = c0;
            for (std::size_t k = 0; k < slope.size(); ++k) v += slope[k] * x[k];
            return std::clamp(v, lo, hi);
        };
        return {"affine_capped", f, std::max(std::abs(lo), std::abs(hi)), std::sqrt(s2)};
    }

    /// base + height * exp(-|x - centre|^2 / (2 width^2))
    static ScalarField gaussian_bump(double base, double height, Point centre, double width) {
        if (!(width > 0)) throw Error("gaussian_bump: width must be positive");
        auto f = [base, height, centre, width](std::span<const double> x) {
            double r2 = 0.0;
            for (std::size_t k = 0; k < centre.size(); ++k) r2 += (x[k] - centre[k]) * (x[k] - centre[k]);
            return base + height * std::exp(-r2 / (2.0 * width * width));
        };
        // max of r e^{-r^2/2w^2} is w e^{-1/2}; derivative bound |h| / (w sqrt(e)).
        return {"gaussian_bump", f, std::abs(base) + std::abs(height),
                std::abs(height) / (width * std::sqrt(std::numbers::e))};
    }

    /// offset + amplitude * sin(frequency * x[axis] + phase)
    static ScalarField sinusoid(double offset, double amplitude, double frequency, double phase,
                                std::size_t axis = 0) {
        auto f = [=](std::span<const double> x) { return offset + amplitude * std::sin(frequency * x[axis] + phase); };
        return {"sinusoid", f, std::abs(offset) + std::abs(amplitude), std::abs(amplitude * frequency)};
    }
};

/// Mortality depending on location and on the population functionals (P, Q).
struct PopulationMortality {
    enum class Kind { constant, logistic_in_P, logistic_in_PQ, saturating_in_P };

    Kind kind = Kind::constant;
    ScalarField base = ScalarField::constant(0.0);
    double kappa_p = 0.0;
    double kappa_q = 0.0;
    double cap = 0.0;

    static PopulationMortality constant(double c) {
        PopulationMortality m;
        m.base = ScalarField::constant(c);
        return m;
    }
    /// base(x) + kappa * P
    static PopulationMortality logistic_in_P(ScalarField base, double kappa) {
        PopulationMortality m;
        m.kind = Kind::logistic_in_P;
        m.base = std::move(base);
        m.kappa_p = kappa;
        return m;
    }
    /// base(x) + kappa_p * P + kappa_q * Q
    static PopulationMortality logistic_in_PQ(ScalarField base, double kappa_p, double kappa_q) {
        PopulationMortality m;
        m.kind = Kind::logistic_in_PQ;
        m.base = std::move(base);
        m.kappa_p = kappa_p;
        m.kappa_q = kappa_q;
        return m;
    }
    /// base(x) + cap * tanh(kappa * P / cap)
    static PopulationMortality saturating_in_P(ScalarField base, double kappa, double cap) {
        if (!(cap > 0)) throw Error("saturating_in_P: cap must be positive");
        PopulationMortality m;
        m.kind = Kind::saturating_in_P;
        m.base = std::move(base);
        m.kappa_p = kappa;
        m.cap = cap;
        return m;
    }

    double operator()(std::span<const double> x, double p, double q = 0.0) const {
        const double b = base(x);
        switch (kind) {
            case Kind::constant: return b;
            case Kind::logistic_in_P: return b + kappa_p * p;
            case Kind::logistic_in_PQ: return b + kappa_p * p + kappa_q * q;
            case Kind::saturating_in_P: return b + cap * std::tanh(kappa_p * p / cap);
        }
        return b;
    }

    /// L_m: ||m(., p1, q1) - m(., p2, q2)||_{1,inf} <= L_m (|p1 - p2| + |q1 - q2|).
    double lip_population() const {
        switch (kind) {
            case Kind::constant: return 0.0;
            case Kind::logistic_in_P:
            case Kind::saturating_in_P: return std::abs(kappa_p);
            case Kind::logistic_in_PQ: return std::max(std::abs(kappa_p), std::abs(kappa_q));
        }
        return 0.0;
    }

    double population_part_bound(double R) const {
        switch (kind) {
            case Kind::constant: return 0.0;
            case Kind::logistic_in_P: return std::abs(kappa_p) * R;
            case Kind::logistic_in_PQ: return (std::abs(kappa_p) + std::abs(kappa_q)) * R;
            case Kind::saturating_in_P: return std::min(cap, std::abs(kappa_p) * R);
        }
        return 0.0;
    }

    /// sup over |p|, |q| <= R of ||m(., p, q)||_{1,inf}.
    double norm_bound(double R) const { return base.norm() + population_part_bound(R); }
    /// sup over |p|, |q| <= R of ||m(., p, q)||_inf.
    double sup_bound(double R) const { return base.sup_bound + population_part_bound(R); }
};

/// Competition kernel d(x, y) with the constant L of
/// ||d(x,.)||_{1,inf} <= L and ||d(x,.) - d(z,.)||_{1,inf} <= L |x - z|.
struct InteractionKernel {
    std::string family;
    std::function<double(std::span<const double>, std::span<const double>)> eval;
    double sup_bound = 0.0;
    double lip = 0.0;

    double operator()(std::span<const double> x, std::span<const double> y) const { return eval(x, y); }

    static InteractionKernel constant(double c) {
        return {"constant", [c](std::span<const double>, std::span<const double>) { return c; }, std::abs(c),
                std::abs(c)};
    }

    /// c * exp(-|x - y|^2 / (2 width^2))
    static InteractionKernel gaussian(double c, double width) {
        if (!(width > 0)) throw Error("gaussian interaction: width must be positive");
        auto f = [c, width](std::span<const double> x, std::span<const double> y) {
            double r2 = 0.0;
            for (std::size_t k = 0; k < x.size(); ++k) r2 += (x[k] - y[k]) * (x[k] - y[k]);
            return c * std::exp(-r2 / (2.0 * width * width));
        };
        const double g1 = 1.0 / (width * std::sqrt(std::numbers::e));
        const double g2 = 1.0 / (width * width);
        return {"gaussian", f, std::abs(c), std::abs(c) * std::max(1.0 + g1, g1 + g2)};
    }
};

/// gamma(., y): a probability measure per parent trait y, Lipschitz in y for
/// the flat norm with constant `lip`.
struct MutationKernelSpec {
    std::string family;
    std::size_t dim = 1;
    std::function<AtomicMeasure(std::span<const double>)> sampler;
    double lip = 0.0;

    AtomicMeasure operator()(std::span<const double> y) const { return sampler(y); }

    /// Sup and Lipschitz bound of y -> int psi d gamma(., y) for admissible psi.
    double pairing_norm_bound() const { return 1.0 + lip; }

    /// gamma(., y) = delta_y.
    static MutationKernelSpec copy(std::size_t dim) {
        MutationKernelSpec k;
        k.family = "copy";
        k.dim = dim;
        k.sampler = [](std::span<const double> y) { return AtomicMeasure::dirac(Point(y.begin(), y.end())); };
        k.lip = 1.0;
        return k;
    }

    /// Discrete Gaussian stencil on the lattice origin + j / cells_per_unit.
    ///
    /// The stencil is centred at y by linear (hat) interpolation between the
    /// two lattice points around y, so offspring always land on lattice
    /// points and the map y -> gamma(., y) is 1-Lipschitz per axis. Optional
    /// reflecting bounds (lattice points) fold mass back inside [lower, upper].
    static MutationKernelSpec lattice_gaussian(std::size_t dim, double cells_per_unit, double sigma,
                                               int half_width, double origin = 0.0,
                                               std::optional<double> lower = std::nullopt,
                                               std::optional<double> upper = std::nullopt) {
        if (!(cells_per_unit > 0) || !(sigma > 0) || half_width < 0)
            throw Error("lattice_gaussian: invalid parameters");
        std::vector<double> q;
        double qs = 0.0;
        for (int k = -half_width; k <= half_width; ++k) {
            const double off = k / cells_per_unit;
            q.push_back(std::exp(-off * off / (2.0 * sigma * sigma)));
            qs += q.back();
        }
        for (auto& v : q) v /= qs;

        auto to_index = [=](double bound, const char* what) {
            const double s = (bound - origin) * cells_per_unit;
            const double r = std::round(s);
            if (std::abs(s - r) > 1e-9) throw Error(std::string("lattice_gaussian: ") + what + " bound is not a lattice point");
            return static_cast<long>(r);
        };
        const std::optional<long> lo_idx = lower ? std::optional<long>(to_index(*lower, "lower")) : std::nullopt;
        const std::optional<long> hi_idx = upper ? std::optional<long>(to_index(*upper, "upper")) : std::nullopt;
        if (lo_idx && hi_idx && *lo_idx >= *hi_idx) throw Error("lattice_gaussian: empty reflecting interval");

        auto reflect = [=](long j) {
            for (int guard = 0; guard < 64; ++guard) {
                if (lo_idx && j < *lo_idx) j = 2 * *lo_idx - j;
                else if (hi_idx && j > *hi_idx) j = 2 * *hi_idx - j;
                else break;
            }
            return j;
        };

        MutationKernelSpec k;
        k.family = "lattice_gaussian";
        k.dim = dim;
        k.lip = std::sqrt(static_cast<double>(dim));
        k.sampler = [=](std::span<const double> y) {
            // Per-axis (location, weight) lists, then tensor product.
            std::vector<std::vector<std::pair<double, double>>> axes(dim);
            for (std::size_t a = 0; a < dim; ++a) {
                const double s = (y[a] - origin) * cells_per_unit;
                const double r = std::round(s);
                long j;
                double theta;
                if (std::abs(s - r) < 1e-9) {
                    j = static_cast<long>(r);
                    theta = 0.0;
                } else {
                    j = static_cast<long>(std::floor(s));
                    theta = s - static_cast<double>(j);
                }
                for (int kk = -half_width; kk <= half_width; ++kk) {
                    const double qk = q[static_cast<std::size_t>(kk + half_width)];
                    const long i0 = reflect(j + kk);
                    axes[a].emplace_back(origin + static_cast<double>(i0) / cells_per_unit, qk * (1.0 - theta));
                    if (theta > 0.0) {
                        const long i1 = reflect(j + kk + 1);
                        axes[a].emplace_back(origin + static_cast<double>(i1) / cells_per_unit, qk * theta);
                    }
                }
            }
            std::vector<double> coords, weights;
            std::vector<std::size_t> idx(dim, 0);
            for (;;) {
                double w = 1.0;
                for (std::size_t a = 0; a < dim; ++a) {
                    coords.push_back(axes[a][idx[a]].first);
                    w *= axes[a][idx[a]].second;
                }
                weights.push_back(w);
                std::size_t a = 0;
                while (a < dim && ++idx[a] == axes[a].size()) idx[a++] = 0;
                if (a == dim) break;
            }
            return AtomicMeasure(dim, std::move(coords), std::move(weights));
        };
        return k;
    }
};

/// Checks that a kernel output is a probability measure (weights >= 0, mass 1).
inline void require_probability(const AtomicMeasure& g) {
    double s = 0.0;
    for (double w : g.weights()) {
        if (w < 0) throw Error("mutation kernel returned a negative weight");
        s += w;
    }
    if (std::abs(s - 1.0) > 1e-12) throw Error("mutation kernel returned total mass " + std::to_string(s) + " != 1");
}

/// beta(a, x_hat, .): offspring size distribution (a measure on the size
/// axis) produced per unit time by a parent at (a, x_hat).
struct OffspringKernel {
    enum class Kind { parent_size, fixed_sizes };

    Kind kind = Kind::fixed_sizes;
    ScalarField rate = ScalarField::constant(0.0);
    std::vector<double> sizes;
    std::vector<double> probs;

    static OffspringKernel parent_size(ScalarField rate) {
        OffspringKernel k;
        k.kind = Kind::parent_size;
        k.rate = std::move(rate);
        return k;
    }

    static OffspringKernel fixed_sizes(ScalarField rate, std::vector<double> sizes, std::vector<double> probs) {
        if (sizes.size() != probs.size() || sizes.empty()) throw Error("fixed_sizes: sizes/probs mismatch");
        double s = 0.0;
        for (double p : probs) {
            if (p < 0) throw Error("fixed_sizes: negative probability");
            s += p;
        }
        if (std::abs(s - 1.0) > 1e-12) throw Error("fixed_sizes: probabilities must sum to 1");
        OffspringKernel k;
        k.kind = Kind::fixed_sizes;
        k.rate = std::move(rate);
        k.sizes = std::move(sizes);
        k.probs = std::move(probs);
        return k;
    }

    /// Size distribution (1-D measure) for a parent at location (a, x_hat).
    AtomicMeasure operator()(std::span<const double> parent) const {
        const double r = rate(parent);
        if (!std::isfinite(r) || r < 0) throw Error("offspring kernel: rate must be finite and nonnegative");
        if (kind == Kind::parent_size) return AtomicMeasure(1, {parent[1]}, {r});
        std::vector<double> w(probs);
        for (auto& v : w) v *= r;
        return AtomicMeasure(1, sizes, std::move(w));
    }

    /// Bound on the total mass of beta(z, .).
    double mass_bound() const { return rate.sup_bound; }
    /// L_beta: flat-norm Lipschitz constant of z -> beta(z, .).
    double lip() const {
        return kind == Kind::parent_size ? rate.lip_bound + rate.sup_bound : rate.lip_bound;
    }
};

}  // namespace measdyn
