#pragma once

// Desk-scale default configurations, one per built-in model, in the same
// JSON schema accepted by load_config(). configs/*.json mirror these.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "measdyn/measure.hpp"

namespace measdyn::presets {

using nlohmann::json;

inline json scalar(const std::string& family, json params) {
    return {{"family", family}, {"params", std::move(params)}};
}

inline json default_solver(double merge_radius = 0.0) {
    return {{"dt", 1e-3},
            {"picard_tol", 1e-8},
            {"max_picard_iters", 25},
            {"t_max", 1.0},
            {"tv_blowup_factor", 1e6},
            {"prune_floor", 1e-14},
            {"merge_radius", merge_radius},
            {"snapshot_every", 10},
            {"exact_metric_atoms", 100}};
}

inline json trait_kernel() {
    return {{"family", "lattice_gaussian"},
            {"params",
             {{"cells_per_unit", 20.0},
              {"sigma", 0.05},
              {"half_width", 2},
              {"origin", 0.0},
              {"lower", 0.0},
              {"upper", 1.0}}}};
}

inline json spe() {
    return {{"model", "spe"},
            {"eps", 0.05},
            {"rates",
             {{"b", scalar("gaussian_bump", {{"base", 0.5}, {"height", 1.0}, {"center", {0.5}}, {"width", 0.2}})},
              {"m", {{"family", "logistic_in_P"},
                     {"params", {{"base", scalar("constant", {{"value", 0.2}})}, {"kappa", 1.0}}}}}}},
            {"kernel", trait_kernel()},
            {"domain", {{"lower", {0.0}}, {"upper", {1.0}}}},
            {"initial", {{"atoms", {{{"x", {0.3}}, {"w", 0.1}}, {{"x", {0.6}}, {"w", 0.1}}}}}},
            {"solver", default_solver()}};
}

inline json selmut() {
    return {{"model", "selmut"},
            {"eps", 0.05},
            {"rates",
             {{"b", scalar("gaussian_bump", {{"base", 0.5}, {"height", 1.0}, {"center", {0.5}}, {"width", 0.2}})},
              {"d0", scalar("constant", {{"value", 0.1}})},
              {"d", {{"family", "gaussian"}, {"params", {{"c", 1.0}, {"width", 0.3}}}}}}},
            {"kernel", trait_kernel()},
            {"domain", {{"lower", {0.0}}, {"upper", {1.0}}}},
            {"initial", {{"atoms", {{{"x", {0.3}}, {"w", 0.1}}, {{"x", {0.6}}, {"w", 0.1}}}}}},
            {"solver", default_solver()}};
}

inline json age() {
    return {{"model", "age"},
            {"eps", 0.05},
            {"rates",
             {{"b", scalar("affine_capped", {{"c0", 0.0}, {"slope", {2.0, -2.0}}, {"lo", 0.0}, {"hi", 1.0}})},
              {"m", {{"family", "logistic_in_PQ"},
                     {"params",
                      {{"base", scalar("constant", {{"value", 0.2}})}, {"kappa_p", 0.5}, {"kappa_q", 1.0}}}}}}},
            {"kernel",
             {{"family", "lattice_gaussian"},
              {"params",
               {{"cells_per_unit", 4.0},
                {"sigma", 0.25},
                {"half_width", 2},
                {"origin", 0.0},
                {"lower", 0.0},
                {"upper", 2.0}}}}},
            {"domain", {{"sampling_lower", {0.0, 0.0}}, {"sampling_upper", {2.0, 2.0}}}},
            {"initial",
             {{"atoms",
               {{{"x", {0.5, 0.75}}, {"w", 0.3}},
                {{"x", {1.5, 1.0}}, {"w", 0.4}},
                {{"x", {0.2, 1.25}}, {"w", 0.3}}}}}},
            {"solver", default_solver(0.05)}};
}

inline json agesize() {
    return {{"model", "agesize"},
            {"rates",
             {{"g", scalar("affine_capped", {{"c0", -0.5}, {"slope", {0.5}}, {"lo", 0.0}, {"hi", 0.5}})},
              {"m", {{"family", "logistic_in_P"},
                     {"params", {{"base", scalar("constant", {{"value", 0.3}})}, {"kappa", 0.5}}}}},
              {"beta",
               {{"family", "fixed_sizes"},
                {"params",
                 {{"rate", scalar("affine_capped", {{"c0", -0.5}, {"slope", {1.0, 0.0}}, {"lo", 0.0}, {"hi", 1.0}})},
                  {"sizes", {1.0, 1.1, 1.2}},
                  {"probs", {0.5, 0.3, 0.2}}}}}}}},
            {"domain", {{"lower", {0.0, 1.0}}, {"upper", {2.0, 2.0}}}},
            {"initial",
             {{"atoms",
               {{{"x", {0.2, 1.0}}, {"w", 0.3}},
                {{"x", {0.8, 1.3}}, {"w", 0.4}},
                {{"x", {1.5, 1.6}}, {"w", 0.3}}}}}},
            {"solver", default_solver(0.05)}};
}

/// Pure selection with logistic mortality, eps = 0: a single Dirac stays a
/// Dirac whose weight follows w' = (b - P) w.
inline json logistic_dirac(double w0 = 0.2) {
    return {{"model", "spe"},
            {"eps", 0.0},
            {"rates",
             {{"b", scalar("constant", {{"value", 1.0}})},
              {"m", {{"family", "logistic_in_P"},
                     {"params", {{"base", scalar("constant", {{"value", 0.0}})}, {"kappa", 1.0}}}}}}},
            {"kernel", {{"family", "copy"}, {"params", json::object()}}},
            {"domain", {{"lower", {0.0}}, {"upper", {1.0}}}},
            {"initial", {{"atoms", {{{"x", {0.5}}, {"w", w0}}}}}},
            {"solver", default_solver()}};
}

/// spe preset with the copy kernel gamma(., y) = delta_y.
inline json spe_copy(double eps) {
    json j = spe();
    j["eps"] = eps;
    j["kernel"] = {{"family", "copy"}, {"params", json::object()}};
    return j;
}

inline std::vector<std::string> model_names() { return {"spe", "selmut", "age", "agesize"}; }

inline json by_name(const std::string& name) {
    if (name == "spe") return spe();
    if (name == "selmut") return selmut();
    if (name == "age") return age();
    if (name == "agesize") return agesize();
    if (name == "logistic_dirac") return logistic_dirac();
    throw Error("unknown preset '" + name + "'");
}

}  // namespace measdyn::presets
