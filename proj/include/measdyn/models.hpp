#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "measdyn/char_flow.hpp"
#include "measdyn/measure.hpp"
#include "measdyn/rates.hpp"

namespace measdyn {

/// How the solver treats mass that leaves the model domain.
enum class SupportPolicy {
    none,       // no check
    confined,   // mass outside the domain is an error
    absorbing,  // mass leaving the domain is removed and tallied as outflow
};

struct ModelConstants {
    double lip_n = 0.0;  // L_N(R)
    double c_r = 0.0;    // C_R
};

/// The pair (F, N) with the metadata needed to choose Picard windows.
struct ModelSpec {
    std::string name;
    std::size_t dim = 1;
    VectorFieldSpec field = VectorFieldSpec::zero(1);
    std::function<AtomicMeasure(double, const AtomicMeasure&)> rhs;
    std::function<double(double)> lip_estimate;
    std::function<double(double)> tv_bound;
    Region domain = Region::whole(1);
    SupportPolicy support = SupportPolicy::none;
    /// Box used to draw random states for diagnostics.
    Region sampling_box = Region::box(Point{0.0}, Point{1.0});
};

inline ModelConstants estimate_constants(const ModelSpec& model, double R) {
    if (!(R > 0.0)) throw Error("estimate_constants: R must be positive");
    if (!model.lip_estimate || !model.tv_bound)
        throw Error("estimate_constants: model '" + model.name + "' does not declare its constants");
    return {model.lip_estimate(R), model.tv_bound(R)};
}

// ---------------------------------------------------------------------------
// Rate bundles

struct SpeRates {
    ScalarField b = ScalarField::constant(0.0);
    PopulationMortality m = PopulationMortality::constant(0.0);
};

struct SelmutRates {
    ScalarField b = ScalarField::constant(0.0);
    ScalarField d0 = ScalarField::constant(0.0);
    InteractionKernel d = InteractionKernel::constant(0.0);
};

/// Rates over (a, x): age a, maturation age x.
struct AgeRates {
    ScalarField b = ScalarField::constant(0.0);
    PopulationMortality m = PopulationMortality::constant(0.0);
};

/// Rates over (a, x): age a, size x.
struct AgeSizeRates {
    ScalarField g = ScalarField::constant(0.0);  // growth, function of size only
    PopulationMortality m = PopulationMortality::constant(0.0);
    OffspringKernel beta;
};

namespace detail {

/// Accumulates atoms and builds one canonical measure at the end.
struct AtomSink {
    std::size_t dim;
    std::vector<double> coords;
    std::vector<double> weights;

    explicit AtomSink(std::size_t d) : dim(d) {}

    void add(std::span<const double> x, double w) {
        if (w == 0.0) return;
        coords.insert(coords.end(), x.begin(), x.end());
        weights.push_back(w);
    }
    AtomicMeasure build() { return AtomicMeasure(dim, std::move(coords), std::move(weights)); }
};

inline void check_eps(double eps) {
    if (!(eps >= 0.0 && eps <= 1.0)) throw Error("eps must lie in [0, 1]");
}

inline AtomicMeasure mutant(const MutationKernelSpec& kernel, std::span<const double> y) {
    AtomicMeasure g = kernel(y);
    require_probability(g);
    return g;
}

inline void require_orthant(const AtomicMeasure& u, const char* who) {
    for (std::size_t i = 0; i < u.size(); ++i)
        for (double c : u.location(i))
            if (c < -1e-12) throw Error(std::string(who) + ": atom outside the positive quadrant");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Right-hand sides

/// (1 - eps) b u - m(., P) u + eps * sum_j w_j b(x_j) gamma(., x_j), with
/// P = mass of u in `domain`.
inline AtomicMeasure selection_mutation_rhs(const AtomicMeasure& u, const SpeRates& rates,
                                            const MutationKernelSpec& kernel, double eps,
                                            const Region& domain) {
    detail::check_eps(eps);
    const double P = mass_in(u, domain);
    detail::AtomSink out(u.dim());
    for (std::size_t i = 0; i < u.size(); ++i) {
        const auto x = u.location(i);
        const double w = u.weight(i);
        const double b = rates.b(x);
        out.add(x, ((1.0 - eps) * b - rates.m(x, P)) * w);
        if (eps > 0.0) {
            const AtomicMeasure g = detail::mutant(kernel, x);
            for (std::size_t j = 0; j < g.size(); ++j) out.add(g.location(j), eps * b * w * g.weight(j));
        }
    }
    return out.build();
}

/// ((1 - eps) b - d0 - D_u) u + eps * mutation term, D_u(x) = sum_j w_j d(x, y_j).
inline AtomicMeasure infdim_env_rhs(const AtomicMeasure& u, const SelmutRates& rates,
                                    const MutationKernelSpec& kernel, double eps) {
    detail::check_eps(eps);
    detail::AtomSink out(u.dim());
    for (std::size_t i = 0; i < u.size(); ++i) {
        const auto x = u.location(i);
        const double w = u.weight(i);
        double D = 0.0;
        for (std::size_t j = 0; j < u.size(); ++j) D += u.weight(j) * rates.d(x, u.location(j));
        const double b = rates.b(x);
        out.add(x, ((1.0 - eps) * b - rates.d0(x) - D) * w);
        if (eps > 0.0) {
            const AtomicMeasure g = detail::mutant(kernel, x);
            for (std::size_t j = 0; j < g.size(); ++j) out.add(g.location(j), eps * b * w * g.weight(j));
        }
    }
    return out.build();
}

/// Juvenile (a < x) and adult (a >= x) masses.
struct AgeClasses {
    double juveniles = 0.0;
    double adults = 0.0;
};

inline AgeClasses age_classes(const AtomicMeasure& u) {
    AgeClasses c;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const auto z = u.location(i);
        (z[0] < z[1] ? c.juveniles : c.adults) += u.weight(i);
    }
    return c;
}

/// Age-structured model on (a, x). Deaths act in place; adults give birth at
/// a = 0, non-mutant offspring at the parent's x and mutants spread by
/// `kernel` (a kernel on the x axis).
inline AtomicMeasure age_structured_rhs(double /*t*/, const AtomicMeasure& u, const AgeRates& rates,
                                        const MutationKernelSpec& kernel, double eps) {
    detail::check_eps(eps);
    if (u.dim() != 2) throw DimensionMismatch("age_structured_rhs: expects (a, x) atoms");
    detail::require_orthant(u, "age_structured_rhs");
    const AgeClasses pq = age_classes(u);
    detail::AtomSink out(2);
    for (std::size_t i = 0; i < u.size(); ++i) {
        const auto z = u.location(i);
        const double w = u.weight(i);
        out.add(z, -rates.m(z, pq.juveniles, pq.adults) * w);
        if (z[0] < z[1]) continue;
        const double b = rates.b(z);
        if (b == 0.0) continue;
        const double newborn[2] = {0.0, z[1]};
        out.add(newborn, (1.0 - eps) * b * w);
        if (eps > 0.0) {
            const AtomicMeasure g = detail::mutant(kernel, z.subspan(1, 1));
            for (std::size_t j = 0; j < g.size(); ++j) {
                const double at[2] = {0.0, g.location(j)[0]};
                out.add(at, eps * b * w * g.weight(j));
            }
        }
    }
    return out.build();
}

/// Age-size model on (a, x): deaths in place, newborns at a = 0 with sizes
/// drawn from beta(a, x, .).
inline AtomicMeasure age_size_rhs(double /*t*/, const AtomicMeasure& u, const AgeSizeRates& rates) {
    if (u.dim() != 2) throw DimensionMismatch("age_size_rhs: expects (a, x) atoms");
    const double P = total_mass(u);
    detail::AtomSink out(2);
    for (std::size_t i = 0; i < u.size(); ++i) {
        const auto z = u.location(i);
        const double w = u.weight(i);
        out.add(z, -rates.m(z, P) * w);
        const AtomicMeasure sizes = rates.beta(z);
        for (std::size_t j = 0; j < sizes.size(); ++j) {
            if (sizes.weight(j) < 0) throw Error("age_size_rhs: offspring kernel returned a negative weight");
            const double at[2] = {0.0, sizes.location(j)[0]};
            out.add(at, w * sizes.weight(j));
        }
    }
    return out.build();
}

/// Transport field (1, g(x)) of the age-size model.
inline VectorFieldSpec age_size_field(const ScalarField& g, const Region& box) {
    VectorFieldSpec f;
    f.dim = 2;
    f.velocity = [g](std::span<const double> z, std::span<double> v) {
        v[0] = 1.0;
        v[1] = g(z.subspan(1, 1));
    };
    f.lip_const = g.lip_bound;
    f.sup_bound = std::sqrt(1.0 + g.sup_bound * g.sup_bound);
    f.declared_domain = box;
    return f;
}

// ---------------------------------------------------------------------------
// Model builders

/// Selection-mutation model on a box `domain` (F = 0).
inline ModelSpec make_spe_model(SpeRates rates, MutationKernelSpec kernel, double eps, const Region& domain) {
    detail::check_eps(eps);
    ModelSpec M;
    M.name = "spe";
    M.dim = domain.dim;
    M.field = VectorFieldSpec::zero(M.dim);
    M.domain = domain;
    M.support = SupportPolicy::confined;
    M.sampling_box = domain;
    const double c_gamma = kernel.pairing_norm_bound();
    M.lip_estimate = [rates, c_gamma](double R) {
        return rates.b.norm() * (1.0 + c_gamma) + rates.m.norm_bound(R) + rates.m.lip_population() * R;
    };
    M.tv_bound = [rates](double R) { return R * (rates.b.sup_bound + rates.m.sup_bound(R)); };
    M.rhs = [rates, kernel, eps, domain](double, const AtomicMeasure& u) {
        return selection_mutation_rhs(u, rates, kernel, eps, domain);
    };
    return M;
}

/// Selection-mutation model with competition kernel d(x, y) (F = 0).
inline ModelSpec make_selmut_model(SelmutRates rates, MutationKernelSpec kernel, double eps,
                                   const Region& domain) {
    detail::check_eps(eps);
    ModelSpec M;
    M.name = "selmut";
    M.dim = domain.dim;
    M.field = VectorFieldSpec::zero(M.dim);
    M.domain = domain;
    M.support = SupportPolicy::confined;
    M.sampling_box = domain;
    const double c_gamma = kernel.pairing_norm_bound();
    // D_u has sup and Lipschitz constant each <= L ||u||, hence ||D_u||_{1,inf} <= 2 L R,
    // and D_u u - D_v v = D_u (u - v) + (D_u - D_v) v contributes 4 L R.
    M.lip_estimate = [rates, c_gamma](double R) {
        return rates.b.norm() * (1.0 + c_gamma) + rates.d0.norm() + 4.0 * rates.d.lip * R;
    };
    M.tv_bound = [rates](double R) {
        return R * (rates.b.sup_bound + rates.d0.sup_bound + rates.d.sup_bound * R);
    };
    M.rhs = [rates, kernel, eps](double, const AtomicMeasure& u) { return infdim_env_rhs(u, rates, kernel, eps); };
    return M;
}

/// Age-structured model on the positive quadrant with aging field (1, 0).
/// `kernel` acts on the maturation-age axis.
inline ModelSpec make_age_model(AgeRates rates, MutationKernelSpec kernel, double eps, Region sampling_box) {
    detail::check_eps(eps);
    if (kernel.dim != 1) throw DimensionMismatch("age model: mutation kernel must act on the x axis");
    ModelSpec M;
    M.name = "age";
    M.dim = 2;
    M.field = VectorFieldSpec::constant(Point{1.0, 0.0});
    M.field.declared_domain = Region::positive_orthant(2);
    M.domain = Region::positive_orthant(2);
    M.support = SupportPolicy::confined;
    M.sampling_box = std::move(sampling_box);
    const double c_gamma = kernel.pairing_norm_bound();
    M.lip_estimate = [rates, c_gamma](double R) {
        return rates.b.norm() * (1.0 + c_gamma) + rates.m.norm_bound(R) + 2.0 * rates.m.lip_population() * R;
    };
    M.tv_bound = [rates](double R) { return R * (rates.b.sup_bound + rates.m.sup_bound(R)); };
    M.rhs = [rates, kernel, eps](double t, const AtomicMeasure& u) {
        return age_structured_rhs(t, u, rates, kernel, eps);
    };
    return M;
}

/// Age-size model on [0, a1] x [x0, x1] with field (1, g(x)); mass leaving
/// through a = a1 or x = x1 is absorbed.
inline ModelSpec make_age_size_model(AgeSizeRates rates, double a1, double x0, double x1) {
    if (!(a1 > 0.0) || !(x1 > x0)) throw Error("age-size model: empty domain");
    const Point x0pt{x0};
    if (std::abs(rates.g(x0pt)) > 1e-12) throw Error("age-size model: growth must vanish at x0");
    if (rates.beta.kind == OffspringKernel::Kind::fixed_sizes) {
        for (double s : rates.beta.sizes)
            if (s < x0 || s > x1) throw Error("age-size model: offspring size outside [x0, x1]");
    }
    ModelSpec M;
    M.name = "agesize";
    M.dim = 2;
    M.domain = Region::box(Point{0.0, x0}, Point{a1, x1});
    M.field = age_size_field(rates.g, M.domain);
    M.support = SupportPolicy::absorbing;
    M.sampling_box = M.domain;
    M.lip_estimate = [rates](double R) {
        return rates.m.norm_bound(R) + rates.m.lip_population() * R + rates.beta.mass_bound() + rates.beta.lip();
    };
    M.tv_bound = [rates](double R) { return R * (rates.m.sup_bound(R) + rates.beta.mass_bound()); };
    M.rhs = [rates](double t, const AtomicMeasure& u) { return age_size_rhs(t, u, rates); };
    return M;
}

/// N(u) = rate * u with an arbitrary field; a linear test model.
inline ModelSpec make_linear_model(std::size_t dim, double rate, VectorFieldSpec field) {
    ModelSpec M;
    M.name = "linear";
    M.dim = dim;
    M.field = std::move(field);
    M.domain = Region::whole(dim);
    M.sampling_box = Region::box(Point(dim, 0.0), Point(dim, 1.0));
    M.lip_estimate = [rate](double) { return std::abs(rate); };
    M.tv_bound = [rate](double R) { return std::abs(rate) * R; };
    M.rhs = [rate](double, const AtomicMeasure& u) { return scale(rate, u); };
    return M;
}

}  // namespace measdyn
