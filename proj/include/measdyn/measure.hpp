#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace measdyn {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class NonFiniteValue : public Error {
public:
    using Error::Error;
};

using Point = std::vector<double>;

struct Atom {
    Point x;
    double w = 0.0;
};

/// Signed measure given as a finite sum of weighted Dirac masses.
///
/// Always stored in canonical form: atoms sorted lexicographically by
/// location, coincident locations merged (exact coordinate equality),
/// zero weights removed. Coordinates and weights are stored flat.
class AtomicMeasure {
public:
    AtomicMeasure() : dim_(1) {}

    explicit AtomicMeasure(std::size_t dim) : dim_(dim) {
        if (dim == 0) throw Error("AtomicMeasure: dimension must be positive");
    }

    AtomicMeasure(std::size_t dim, std::vector<double> coords, std::vector<double> weights)
        : dim_(dim), coords_(std::move(coords)), weights_(std::move(weights)) {
        if (dim == 0) throw Error("AtomicMeasure: dimension must be positive");
        if (coords_.size() != dim_ * weights_.size())
            throw DimensionMismatch("AtomicMeasure: coordinate array does not match dim * atom count");
        canonicalize();
    }

    static AtomicMeasure from_atoms(std::size_t dim, std::span<const Atom> atoms) {
        std::vector<double> coords;
        std::vector<double> weights;
        coords.reserve(atoms.size() * dim);
        weights.reserve(atoms.size());
        for (const auto& a : atoms) {
            if (a.x.size() != dim)
                throw DimensionMismatch("AtomicMeasure: atom location has length " +
                                        std::to_string(a.x.size()) + ", expected " +
                                        std::to_string(dim));
            coords.insert(coords.end(), a.x.begin(), a.x.end());
            weights.push_back(a.w);
        }
        return AtomicMeasure(dim, std::move(coords), std::move(weights));
    }

    static AtomicMeasure from_atoms(std::size_t dim, std::initializer_list<Atom> atoms) {
        return from_atoms(dim, std::span<const Atom>(atoms.begin(), atoms.size()));
    }

    static AtomicMeasure dirac(const Point& x, double w = 1.0) {
        return AtomicMeasure(x.size(), x, {w});
    }

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return weights_.size(); }
    bool empty() const { return weights_.empty(); }

    std::span<const double> location(std::size_t i) const {
        return {coords_.data() + i * dim_, dim_};
    }
    double weight(std::size_t i) const { return weights_[i]; }
    std::span<const double> weights() const { return weights_; }
    std::span<const double> coords() const { return coords_; }

    std::vector<Atom> atoms() const {
        std::vector<Atom> out;
        out.reserve(size());
        for (std::size_t i = 0; i < size(); ++i) {
            auto x = location(i);
            out.push_back({Point(x.begin(), x.end()), weights_[i]});
        }
        return out;
    }

    bool operator==(const AtomicMeasure& o) const {
        return dim_ == o.dim_ && coords_ == o.coords_ && weights_ == o.weights_;
    }

private:
    void canonicalize();

    std::size_t dim_;
    std::vector<double> coords_;
    std::vector<double> weights_;
};

inline bool lex_less(std::span<const double> a, std::span<const double> b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

inline bool same_location(std::span<const double> a, std::span<const double> b) {
    return std::equal(a.begin(), a.end(), b.begin(), b.end());
}

inline double distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return std::sqrt(s);
}

inline void AtomicMeasure::canonicalize() {
    const std::size_t n = weights_.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(weights_[i]))
            throw NonFiniteValue("AtomicMeasure: non-finite weight");
    }
    for (auto& c : coords_) {
        if (!std::isfinite(c)) throw NonFiniteValue("AtomicMeasure: non-finite coordinate");
        c += 0.0;  // -0.0 -> +0.0
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Ties on location are ordered by weight so merged sums do not depend on input order.
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        auto xi = location(i), xj = location(j);
        if (lex_less(xi, xj)) return true;
        if (lex_less(xj, xi)) return false;
        return weights_[i] < weights_[j];
    });

    std::vector<double> coords;
    std::vector<double> weights;
    coords.reserve(coords_.size());
    weights.reserve(n);
    std::size_t k = 0;
    while (k < n) {
        const auto x = location(order[k]);
        double w = weights_[order[k]];
        std::size_t j = k + 1;
        while (j < n && same_location(x, location(order[j]))) {
            w += weights_[order[j]];
            ++j;
        }
        if (w != 0.0) {
            coords.insert(coords.end(), x.begin(), x.end());
            weights.push_back(w);
        }
        k = j;
    }
    coords_ = std::move(coords);
    weights_ = std::move(weights);
}

/// Axis-aligned region with optional bounds per axis. All regions are closed.
struct Region {
    enum class Kind { whole, box, positive_orthant };

    Kind kind = Kind::whole;
    std::size_t dim = 1;
    std::vector<std::optional<double>> lower;
    std::vector<std::optional<double>> upper;

    static Region whole(std::size_t dim) {
        return {Kind::whole, dim, std::vector<std::optional<double>>(dim),
                std::vector<std::optional<double>>(dim)};
    }

    static Region positive_orthant(std::size_t dim) {
        return {Kind::positive_orthant, dim, std::vector<std::optional<double>>(dim, 0.0),
                std::vector<std::optional<double>>(dim)};
    }

    static Region box(std::vector<std::optional<double>> lo, std::vector<std::optional<double>> hi) {
        if (lo.size() != hi.size()) throw DimensionMismatch("Region: bound arrays differ in length");
        for (std::size_t k = 0; k < lo.size(); ++k) {
            if (lo[k] && hi[k] && *lo[k] > *hi[k])
                throw Error("Region: lower bound exceeds upper bound on axis " + std::to_string(k));
        }
        const std::size_t d = lo.size();
        return {Kind::box, d, std::move(lo), std::move(hi)};
    }

    static Region box(const Point& lo, const Point& hi) {
        return box(std::vector<std::optional<double>>(lo.begin(), lo.end()),
                   std::vector<std::optional<double>>(hi.begin(), hi.end()));
    }

    bool contains(std::span<const double> x) const {
        for (std::size_t k = 0; k < dim; ++k) {
            if (lower[k] && x[k] < *lower[k]) return false;
            if (upper[k] && x[k] > *upper[k]) return false;
        }
        return true;
    }

    bool bounded() const {
        for (std::size_t k = 0; k < dim; ++k)
            if (!lower[k] || !upper[k]) return false;
        return true;
    }
};

inline double tv_norm(const AtomicMeasure& mu) {
    double s = 0.0;
    for (double w : mu.weights()) s += std::abs(w);
    return s;
}

inline double total_mass(const AtomicMeasure& mu) {
    double s = 0.0;
    for (double w : mu.weights()) s += w;
    return s;
}

inline AtomicMeasure scale(double c, const AtomicMeasure& mu) {
    std::vector<double> coords(mu.coords().begin(), mu.coords().end());
    std::vector<double> weights(mu.weights().begin(), mu.weights().end());
    for (auto& w : weights) w *= c;
    return AtomicMeasure(mu.dim(), std::move(coords), std::move(weights));
}

/// c1 * mu + c2 * nu.
inline AtomicMeasure linear_combine(double c1, const AtomicMeasure& mu, double c2,
                                    const AtomicMeasure& nu) {
    if (mu.dim() != nu.dim())
        throw DimensionMismatch("linear_combine: dimensions " + std::to_string(mu.dim()) + " and " +
                                std::to_string(nu.dim()));
    std::vector<double> coords;
    std::vector<double> weights;
    coords.reserve(mu.coords().size() + nu.coords().size());
    weights.reserve(mu.size() + nu.size());
    if (c1 != 0.0) {
        coords.insert(coords.end(), mu.coords().begin(), mu.coords().end());
        for (double w : mu.weights()) weights.push_back(c1 * w);
    }
    if (c2 != 0.0) {
        coords.insert(coords.end(), nu.coords().begin(), nu.coords().end());
        for (double w : nu.weights()) weights.push_back(c2 * w);
    }
    return AtomicMeasure(mu.dim(), std::move(coords), std::move(weights));
}

/// Concatenate several measures of the same dimension (sum).
inline AtomicMeasure sum_of(std::span<const AtomicMeasure> parts, std::size_t dim) {
    std::vector<double> coords;
    std::vector<double> weights;
    for (const auto& p : parts) {
        if (p.dim() != dim) throw DimensionMismatch("sum_of: dimension mismatch");
        coords.insert(coords.end(), p.coords().begin(), p.coords().end());
        weights.insert(weights.end(), p.weights().begin(), p.weights().end());
    }
    return AtomicMeasure(dim, std::move(coords), std::move(weights));
}

/// Image measure: each atom (x, w) becomes (map(x), w).
/// `map` is called as map(std::span<const double>) and returns a point.
template <class Map>
AtomicMeasure push_forward(const AtomicMeasure& mu, Map&& map) {
    std::vector<double> coords;
    coords.reserve(mu.coords().size());
    std::size_t out_dim = mu.dim();
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const auto y = map(mu.location(i));
        if (i == 0) out_dim = y.size();
        if (y.size() != out_dim) throw DimensionMismatch("push_forward: map output length varies");
        for (double v : y) {
            if (!std::isfinite(v)) throw NonFiniteValue("push_forward: map returned a non-finite value");
            coords.push_back(v);
        }
    }
    std::vector<double> weights(mu.weights().begin(), mu.weights().end());
    return AtomicMeasure(out_dim, std::move(coords), std::move(weights));
}

/// Sum of weights of atoms in the closed region.
inline double mass_in(const AtomicMeasure& mu, const Region& region) {
    if (region.dim != mu.dim()) throw DimensionMismatch("mass_in: region dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i)
        if (region.contains(mu.location(i))) s += mu.weight(i);
    return s;
}

/// Sum of |w| over atoms outside the closed region.
inline double tv_outside(const AtomicMeasure& mu, const Region& region) {
    double s = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i)
        if (!region.contains(mu.location(i))) s += std::abs(mu.weight(i));
    return s;
}

inline AtomicMeasure restrict_to(const AtomicMeasure& mu, const Region& region) {
    std::vector<double> coords;
    std::vector<double> weights;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        if (!region.contains(mu.location(i))) continue;
        auto x = mu.location(i);
        coords.insert(coords.end(), x.begin(), x.end());
        weights.push_back(mu.weight(i));
    }
    return AtomicMeasure(mu.dim(), std::move(coords), std::move(weights));
}

struct PruneResult {
    AtomicMeasure measure;
    /// Upper bound on the flat-norm size of the edit.
    double error_bound = 0.0;
};

/// Greedy merge of atoms within `merge_radius`, then removal of atoms with
/// |w| < `weight_floor`.
///
/// Clusters are formed in canonical (lexicographic) order: each unassigned
/// atom seeds a cluster that absorbs every later unassigned atom within
/// `merge_radius` of the seed. A cluster is replaced by one atom at its
/// |w|-weighted barycenter carrying the summed signed weight; for positive
/// measures this is the usual weight-weighted barycenter. The reported bound
/// is sum(|w| dropped) + sum(|w_j| * |x_j - barycenter|).
inline PruneResult prune_merge(const AtomicMeasure& mu, double weight_floor, double merge_radius) {
    if (weight_floor < 0.0 || merge_radius < 0.0)
        throw Error("prune_merge: floor and radius must be nonnegative");
    const std::size_t n = mu.size();
    const std::size_t d = mu.dim();
    double err = 0.0;

    std::vector<double> coords;
    std::vector<double> weights;
    coords.reserve(mu.coords().size());
    weights.reserve(n);

    if (merge_radius > 0.0) {
        std::vector<char> taken(n, 0);
        std::vector<std::size_t> cluster;
        Point bary(d);
        for (std::size_t i = 0; i < n; ++i) {
            if (taken[i]) continue;
            cluster.assign(1, i);
            taken[i] = 1;
            const auto xi = mu.location(i);
            for (std::size_t j = i + 1; j < n; ++j) {
                const auto xj = mu.location(j);
                if (xj[0] - xi[0] > merge_radius) break;
                if (!taken[j] && distance(xi, xj) <= merge_radius) {
                    taken[j] = 1;
                    cluster.push_back(j);
                }
            }
            if (cluster.size() == 1) {
                coords.insert(coords.end(), xi.begin(), xi.end());
                weights.push_back(mu.weight(i));
                continue;
            }
            double wsum = 0.0, abs_sum = 0.0;
            std::fill(bary.begin(), bary.end(), 0.0);
            for (std::size_t j : cluster) {
                const double a = std::abs(mu.weight(j));
                wsum += mu.weight(j);
                abs_sum += a;
                const auto x = mu.location(j);
                for (std::size_t k = 0; k < d; ++k) bary[k] += a * x[k];
            }
            for (auto& b : bary) b /= abs_sum;
            for (std::size_t j : cluster) err += std::abs(mu.weight(j)) * distance(mu.location(j), bary);
            coords.insert(coords.end(), bary.begin(), bary.end());
            weights.push_back(wsum);
        }
    } else {
        coords.assign(mu.coords().begin(), mu.coords().end());
        weights.assign(mu.weights().begin(), mu.weights().end());
    }

    if (weight_floor > 0.0) {
        std::size_t out = 0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (std::abs(weights[i]) < weight_floor) {
                err += std::abs(weights[i]);
                continue;
            }
            if (out != i) {
                std::copy_n(coords.begin() + static_cast<std::ptrdiff_t>(i * d), d,
                            coords.begin() + static_cast<std::ptrdiff_t>(out * d));
                weights[out] = weights[i];
            }
            ++out;
        }
        weights.resize(out);
        coords.resize(out * d);
    }
    return {AtomicMeasure(d, std::move(coords), std::move(weights)), err};
}

/// A time-indexed sequence of measures on a uniform grid t0 + k * dt.
struct MeasureCurve {
    double t0 = 0.0;
    double dt = 0.0;
    std::vector<AtomicMeasure> states;

    double time(std::size_t k) const { return t0 + static_cast<double>(k) * dt; }
    std::size_t steps() const { return states.empty() ? 0 : states.size() - 1; }
};

}  // namespace measdyn
