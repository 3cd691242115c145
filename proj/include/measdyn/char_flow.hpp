#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "measdyn/measure.hpp"

namespace measdyn {

/// Autonomous vector field F with its declared Lipschitz constant and sup
/// bound. The constants are only claimed on `declared_domain`.
struct VectorFieldSpec {
    std::size_t dim = 1;
    std::function<void(std::span<const double> x, std::span<double> v)> velocity;
    double lip_const = 0.0;
    double sup_bound = 0.0;
    Region declared_domain = Region::whole(1);
    bool is_zero = false;

    static VectorFieldSpec zero(std::size_t dim) {
        VectorFieldSpec f;
        f.dim = dim;
        f.velocity = [](std::span<const double>, std::span<double> v) {
            for (auto& c : v) c = 0.0;
        };
        f.declared_domain = Region::whole(dim);
        f.is_zero = true;
        return f;
    }

    static VectorFieldSpec constant(const Point& c) {
        VectorFieldSpec f;
        f.dim = c.size();
        f.velocity = [c](std::span<const double>, std::span<double> v) {
            for (std::size_t k = 0; k < v.size(); ++k) v[k] = c[k];
        };
        double s = 0.0;
        for (double ck : c) s += ck * ck;
        f.sup_bound = std::sqrt(s);
        f.declared_domain = Region::whole(f.dim);
        f.is_zero = f.sup_bound == 0.0;
        return f;
    }

    /// F(x) = rate * x, with constants declared on `domain` (must be bounded).
    static VectorFieldSpec linear(std::size_t dim, double rate, const Region& domain) {
        VectorFieldSpec f;
        f.dim = dim;
        f.velocity = [rate](std::span<const double> x, std::span<double> v) {
            for (std::size_t k = 0; k < v.size(); ++k) v[k] = rate * x[k];
        };
        f.lip_const = std::abs(rate);
        double r2 = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
            const double m = std::max(std::abs(domain.lower[k].value_or(0.0)),
                                      std::abs(domain.upper[k].value_or(0.0)));
            r2 += m * m;
        }
        f.sup_bound = std::abs(rate) * std::sqrt(r2);
        f.declared_domain = domain;
        return f;
    }
};

namespace detail {

inline void eval_field(const VectorFieldSpec& field, std::span<const double> x, std::span<double> v,
                       double sign) {
    field.velocity(x, v);
    for (auto& c : v) {
        if (!std::isfinite(c)) throw NonFiniteValue("flow: vector field returned a non-finite value");
        c *= sign;
    }
}

}  // namespace detail

/// Scratch buffers for repeated RK4 steps.
struct Rk4Workspace {
    std::vector<double> k1, k2, k3, k4, tmp;
    explicit Rk4Workspace(std::size_t d = 1) : k1(d), k2(d), k3(d), k4(d), tmp(d) {}
};

/// One classical RK4 step of dX/dt = sign * F(X), in place.
inline void rk4_step(const VectorFieldSpec& field, std::span<double> x, double h, Rk4Workspace& ws,
                     double sign = 1.0) {
    const std::size_t d = x.size();
    detail::eval_field(field, x, ws.k1, sign);
    for (std::size_t k = 0; k < d; ++k) ws.tmp[k] = x[k] + 0.5 * h * ws.k1[k];
    detail::eval_field(field, ws.tmp, ws.k2, sign);
    for (std::size_t k = 0; k < d; ++k) ws.tmp[k] = x[k] + 0.5 * h * ws.k2[k];
    detail::eval_field(field, ws.tmp, ws.k3, sign);
    for (std::size_t k = 0; k < d; ++k) ws.tmp[k] = x[k] + h * ws.k3[k];
    detail::eval_field(field, ws.tmp, ws.k4, sign);
    for (std::size_t k = 0; k < d; ++k)
        x[k] += h * (ws.k1[k] + 2.0 * ws.k2[k] + 2.0 * ws.k3[k] + ws.k4[k]) / 6.0;
}

/// Flow of dX/dt = F(X) over time t from x0 with RK4 step dt; the last step
/// is shortened. Negative t integrates the negated field.
inline Point flow_map(const VectorFieldSpec& field, double t, std::span<const double> x0, double dt) {
    if (!(dt > 0.0)) throw Error("flow_map: dt must be positive");
    if (x0.size() != field.dim) throw DimensionMismatch("flow_map: point dimension mismatch");
    Point x(x0.begin(), x0.end());
    if (field.is_zero || t == 0.0) return x;
    const double sign = t < 0 ? -1.0 : 1.0;
    const double T = std::abs(t);
    const auto full = static_cast<long>(std::floor(T / dt + 1e-9));
    Rk4Workspace ws(field.dim);
    for (long s = 0; s < full; ++s) rk4_step(field, x, dt, ws, sign);
    const double rem = T - static_cast<double>(full) * dt;
    if (rem > 1e-12 * std::max(1.0, T)) rk4_step(field, x, rem, ws, sign);
    return x;
}

/// X_t # mu.
inline AtomicMeasure flow_pushforward(const VectorFieldSpec& field, double t, const AtomicMeasure& mu,
                                      double dt) {
    if (mu.dim() != field.dim) throw DimensionMismatch("flow_pushforward: dimension mismatch");
    if (field.is_zero || t == 0.0) return mu;
    return push_forward(mu, [&](std::span<const double> x) { return flow_map(field, t, x, dt); });
}

/// Pushes every atom by one RK4 step of size h (exactly the per-step update
/// used when composing flows on a uniform grid).
inline AtomicMeasure flow_step(const VectorFieldSpec& field, const AtomicMeasure& mu, double h) {
    if (field.is_zero) return mu;
    std::vector<double> coords(mu.coords().begin(), mu.coords().end());
    Rk4Workspace ws(mu.dim());
    for (std::size_t i = 0; i < mu.size(); ++i)
        rk4_step(field, std::span<double>(coords.data() + i * mu.dim(), mu.dim()), h, ws);
    std::vector<double> weights(mu.weights().begin(), mu.weights().end());
    return AtomicMeasure(mu.dim(), std::move(coords), std::move(weights));
}

/// Lipschitz bound e^{L_F t} of the time-t flow map.
inline double flow_lipschitz_bound(const VectorFieldSpec& field, double t) {
    return std::exp(field.lip_const * t);
}

}  // namespace measdyn
