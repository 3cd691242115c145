#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "measdyn/measure.hpp"
#include "measdyn/models.hpp"
#include "measdyn/picard.hpp"
#include "measdyn/random.hpp"
#include "measdyn/rates.hpp"

namespace measdyn {

using nlohmann::json;

/// Invalid configuration or input file. `where` is a JSON pointer or file:line.
class ConfigError : public Error {
public:
    ConfigError(const std::string& where, const std::string& what)
        : Error(where.empty() ? what : where + ": " + what), where_(where) {}
    const std::string& where() const { return where_; }

private:
    std::string where_;
};

// ---------------------------------------------------------------------------
// Number formatting

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s, const std::string& where) {
    double v = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    if (!s.empty() && *b == '+') ++b;
    auto r = std::from_chars(b, e, v);
    if (r.ec != std::errc() || r.ptr != e) throw ConfigError(where, "not a number: '" + std::string(s) + "'");
    return v;
}

// ---------------------------------------------------------------------------
// Snapshot CSV: t,atom_id,x0,...,x{d-1},weight

inline std::string snapshot_header(std::size_t dim) {
    std::string h = "t,atom_id";
    for (std::size_t k = 0; k < dim; ++k) h += ",x" + std::to_string(k);
    return h + ",weight";
}

inline void write_snapshot_rows(std::ostream& os, double t, const AtomicMeasure& mu) {
    const std::string ts = format_double(t);
    for (std::size_t i = 0; i < mu.size(); ++i) {
        os << ts << ',' << i;
        for (double c : mu.location(i)) os << ',' << format_double(c);
        os << ',' << format_double(mu.weight(i)) << '\n';
    }
}

inline void write_snapshots_csv(const std::filesystem::path& path, const std::vector<double>& times,
                                const std::vector<AtomicMeasure>& states, std::size_t dim) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write " + path.string());
    os << snapshot_header(dim) << '\n';
    for (std::size_t s = 0; s < states.size(); ++s) write_snapshot_rows(os, times[s], states[s]);
    if (!os) throw Error("write failed: " + path.string());
}

struct SnapshotFile {
    std::size_t dim = 1;
    std::vector<double> times;
    std::vector<AtomicMeasure> states;
};

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto p = line.find(',', start);
        out.push_back(line.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start));
        if (p == std::string_view::npos) break;
        start = p + 1;
    }
    return out;
}

/// Reads a snapshot CSV. If `expected_dim` is nonzero the header must match it.
inline SnapshotFile read_snapshots_csv(const std::filesystem::path& path, std::size_t expected_dim = 0) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError(path.string(), "cannot open file");
    std::string line;
    if (!std::getline(is, line)) throw ConfigError(path.string() + ":1", "empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto head = split_commas(line);
    const std::size_t dim = head.size() >= 4 ? head.size() - 3 : 0;
    const std::size_t want = expected_dim ? expected_dim : std::max<std::size_t>(dim, 1);
    if (dim == 0 || line != snapshot_header(want))
        throw ConfigError(path.string() + ":1", "header mismatch, expected '" + snapshot_header(want) + "'");

    SnapshotFile f;
    f.dim = dim;
    std::vector<double> coords, weights;
    double cur_t = 0.0;
    bool have = false;
    auto flush = [&] {
        if (!have) return;
        f.times.push_back(cur_t);
        f.states.emplace_back(dim, std::move(coords), std::move(weights));
        coords.clear();
        weights.clear();
    };
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string where = path.string() + ":" + std::to_string(lineno);
        const auto cells = split_commas(line);
        if (cells.size() != dim + 3) throw ConfigError(where, "expected " + std::to_string(dim + 3) + " columns");
        const double t = parse_double(cells[0], where);
        if (have && t != cur_t) flush();
        if (have && !f.times.empty() && t < f.times.back()) throw ConfigError(where, "times must be nondecreasing");
        cur_t = t;
        have = true;
        for (std::size_t k = 0; k < dim; ++k) coords.push_back(parse_double(cells[2 + k], where));
        weights.push_back(parse_double(cells[2 + dim], where));
    }
    flush();
    return f;
}

// ---------------------------------------------------------------------------
// Configuration

struct RunConfig {
    std::string model_name;
    ModelSpec model;
    AtomicMeasure initial;
    SolverConfig solver;
    std::uint64_t seed = 0;
    std::vector<std::string> diagnostics;
    json resolved;
};

namespace detail {

/// A JSON value together with its pointer, for diagnostics.
struct Node {
    const json& j;
    std::string ptr;

    [[noreturn]] void fail(const std::string& what) const { throw ConfigError(ptr.empty() ? "/" : ptr, what); }

    void require_object() const {
        if (!j.is_object()) fail("expected an object");
    }
    void only(std::initializer_list<const char*> keys) const {
        require_object();
        for (auto it = j.begin(); it != j.end(); ++it) {
            bool ok = false;
            for (const char* k : keys) ok = ok || it.key() == k;
            if (!ok) throw ConfigError(ptr + "/" + it.key(), "unknown key '" + it.key() + "'");
        }
    }
    bool has(const char* key) const { return j.contains(key); }
    Node at(const char* key) const {
        require_object();
        if (!j.contains(key)) throw ConfigError(ptr + "/" + key, "missing required key");
        return {j.at(key), ptr + "/" + key};
    }
    Node at(std::size_t i) const { return {j.at(i), ptr + "/" + std::to_string(i)}; }

    double number() const {
        if (!j.is_number()) fail("expected a number");
        const double v = j.get<double>();
        if (!std::isfinite(v)) fail("expected a finite number");
        return v;
    }
    long integer() const {
        if (!j.is_number_integer()) fail("expected an integer");
        return j.get<long>();
    }
    std::string str() const {
        if (!j.is_string()) fail("expected a string");
        return j.get<std::string>();
    }
    std::vector<double> numbers(std::size_t n = 0) const {
        if (!j.is_array()) fail("expected an array of numbers");
        if (n && j.size() != n) fail("expected " + std::to_string(n) + " entries");
        std::vector<double> v;
        for (std::size_t i = 0; i < j.size(); ++i) v.push_back(at(i).number());
        return v;
    }
};

inline double num_or(const Node& n, const char* key, double dflt, json& res) {
    const double v = n.has(key) ? n.at(key).number() : dflt;
    res[key] = v;
    return v;
}

inline ScalarField parse_scalar(const Node& n, std::size_t dim, json& res) {
    n.only({"family", "params"});
    const std::string fam = n.at("family").str();
    static const json empty = json::object();
    const Node params = n.has("params") ? n.at("params") : Node{empty, n.ptr + "/params"};
    json rp = json::object();
    res = {{"family", fam}};
    ScalarField f;
    if (fam == "constant") {
        params.only({"value"});
        const double v = params.at("value").number();
        rp["value"] = v;
        f = ScalarField::constant(v);
    } else if (fam == "affine_capped") {
        params.only({"c0", "slope", "lo", "hi"});
        const double c0 = params.at("c0").number();
        const auto slope = params.at("slope").numbers(dim);
        const double lo = params.at("lo").number();
        const double hi = params.at("hi").number();
        if (lo > hi) params.fail("lo must not exceed hi");
        rp = {{"c0", c0}, {"slope", slope}, {"lo", lo}, {"hi", hi}};
        f = ScalarField::affine_capped(c0, slope, lo, hi);
    } else if (fam == "gaussian_bump") {
        params.only({"base", "height", "center", "width"});
        const double base = params.at("base").number();
        const double height = params.at("height").number();
        const auto center = params.at("center").numbers(dim);
        const double width = params.at("width").number();
        if (!(width > 0)) params.at("width").fail("width must be positive");
        rp = {{"base", base}, {"height", height}, {"center", center}, {"width", width}};
        f = ScalarField::gaussian_bump(base, height, center, width);
    } else if (fam == "sinusoid") {
        params.only({"offset", "amplitude", "frequency", "phase", "axis"});
        const double off = params.at("offset").number();
        const double amp = params.at("amplitude").number();
        const double fr = params.at("frequency").number();
        const double ph = params.has("phase") ? params.at("phase").number() : 0.0;
        const long axis = params.has("axis") ? params.at("axis").integer() : 0;
        if (axis < 0 || static_cast<std::size_t>(axis) >= dim) params.at("axis").fail("axis out of range");
        rp = {{"offset", off}, {"amplitude", amp}, {"frequency", fr}, {"phase", ph}, {"axis", axis}};
        f = ScalarField::sinusoid(off, amp, fr, ph, static_cast<std::size_t>(axis));
    } else {
        n.at("family").fail("unknown rate family '" + fam +
                            "' (expected constant, affine_capped, gaussian_bump, sinusoid)");
    }
    res["params"] = rp;
    return f;
}

inline PopulationMortality parse_mortality(const Node& n, std::size_t dim, json& res) {
    n.only({"family", "params"});
    const std::string fam = n.at("family").str();
    const Node params = n.at("params");
    json rp = json::object();
    res = {{"family", fam}};
    PopulationMortality m;
    if (fam == "constant") {
        params.only({"value"});
        const double v = params.at("value").number();
        rp["value"] = v;
        m = PopulationMortality::constant(v);
    } else if (fam == "logistic_in_P" || fam == "saturating_in_P" || fam == "logistic_in_PQ") {
        json rb;
        if (fam == "logistic_in_P") {
            params.only({"base", "kappa"});
            ScalarField base = parse_scalar(params.at("base"), dim, rb);
            const double k = params.at("kappa").number();
            rp = {{"base", rb}, {"kappa", k}};
            m = PopulationMortality::logistic_in_P(std::move(base), k);
        } else if (fam == "logistic_in_PQ") {
            params.only({"base", "kappa_p", "kappa_q"});
            ScalarField base = parse_scalar(params.at("base"), dim, rb);
            const double kp = params.at("kappa_p").number();
            const double kq = params.at("kappa_q").number();
            rp = {{"base", rb}, {"kappa_p", kp}, {"kappa_q", kq}};
            m = PopulationMortality::logistic_in_PQ(std::move(base), kp, kq);
        } else {
            params.only({"base", "kappa", "cap"});
            ScalarField base = parse_scalar(params.at("base"), dim, rb);
            const double k = params.at("kappa").number();
            const double cap = params.at("cap").number();
            if (!(cap > 0)) params.at("cap").fail("cap must be positive");
            rp = {{"base", rb}, {"kappa", k}, {"cap", cap}};
            m = PopulationMortality::saturating_in_P(std::move(base), k, cap);
        }
    } else {
        n.at("family").fail("unknown mortality family '" + fam +
                            "' (expected constant, logistic_in_P, logistic_in_PQ, saturating_in_P)");
    }
    res["params"] = rp;
    return m;
}

inline InteractionKernel parse_interaction(const Node& n, json& res) {
    n.only({"family", "params"});
    const std::string fam = n.at("family").str();
    const Node params = n.at("params");
    res = {{"family", fam}};
    if (fam == "constant") {
        params.only({"value"});
        const double v = params.at("value").number();
        res["params"] = {{"value", v}};
        return InteractionKernel::constant(v);
    }
    if (fam == "gaussian") {
        params.only({"c", "width"});
        const double c = params.at("c").number();
        const double w = params.at("width").number();
        if (!(w > 0)) params.at("width").fail("width must be positive");
        res["params"] = {{"c", c}, {"width", w}};
        return InteractionKernel::gaussian(c, w);
    }
    n.at("family").fail("unknown interaction family '" + fam + "' (expected constant, gaussian)");
}

inline MutationKernelSpec parse_kernel(const Node& n, std::size_t dim, json& res) {
    n.only({"family", "params"});
    const std::string fam = n.at("family").str();
    static const json empty = json::object();
    const Node params = n.has("params") ? n.at("params") : Node{empty, n.ptr + "/params"};
    res = {{"family", fam}};
    if (fam == "copy") {
        params.only({});
        res["params"] = json::object();
        return MutationKernelSpec::copy(dim);
    }
    if (fam == "lattice_gaussian") {
        params.only({"cells_per_unit", "sigma", "half_width", "origin", "lower", "upper"});
        const double cells = params.at("cells_per_unit").number();
        const double sigma = params.at("sigma").number();
        const long hw = params.at("half_width").integer();
        json rp;
        const double origin = num_or(params, "origin", 0.0, rp);
        std::optional<double> lo, hi;
        if (params.has("lower")) lo = params.at("lower").number();
        if (params.has("upper")) hi = params.at("upper").number();
        if (!(cells > 0)) params.at("cells_per_unit").fail("must be positive");
        if (!(sigma > 0)) params.at("sigma").fail("must be positive");
        if (hw < 0 || hw > 64) params.at("half_width").fail("must lie in [0, 64]");
        rp["cells_per_unit"] = cells;
        rp["sigma"] = sigma;
        rp["half_width"] = hw;
        if (lo) rp["lower"] = *lo;
        if (hi) rp["upper"] = *hi;
        res["params"] = rp;
        try {
            return MutationKernelSpec::lattice_gaussian(dim, cells, sigma, static_cast<int>(hw), origin, lo, hi);
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            params.fail(e.what());
        }
    }
    n.at("family").fail("unknown kernel family '" + fam + "' (expected copy, lattice_gaussian)");
}

inline OffspringKernel parse_offspring(const Node& n, json& res) {
    n.only({"family", "params"});
    const std::string fam = n.at("family").str();
    const Node params = n.at("params");
    res = {{"family", fam}};
    json rr;
    if (fam == "parent_size") {
        params.only({"rate"});
        ScalarField rate = parse_scalar(params.at("rate"), 2, rr);
        res["params"] = {{"rate", rr}};
        return OffspringKernel::parent_size(std::move(rate));
    }
    if (fam == "fixed_sizes") {
        params.only({"rate", "sizes", "probs"});
        ScalarField rate = parse_scalar(params.at("rate"), 2, rr);
        const auto sizes = params.at("sizes").numbers();
        const auto probs = params.at("probs").numbers(sizes.size());
        res["params"] = {{"rate", rr}, {"sizes", sizes}, {"probs", probs}};
        try {
            return OffspringKernel::fixed_sizes(std::move(rate), sizes, probs);
        } catch (const Error& e) {
            params.fail(e.what());
        }
    }
    n.at("family").fail("unknown offspring family '" + fam + "' (expected parent_size, fixed_sizes)");
}

inline SolverConfig parse_solver(const Node& n, json& res) {
    SolverConfig c;
    n.only({"dt", "picard_tol", "max_picard_iters", "t_max", "tv_blowup_factor", "prune_floor", "merge_radius",
            "snapshot_every", "exact_metric_atoms"});
    res = json::object();
    c.dt = num_or(n, "dt", c.dt, res);
    c.picard_tol = num_or(n, "picard_tol", c.picard_tol, res);
    c.t_max = num_or(n, "t_max", c.t_max, res);
    c.tv_blowup_factor = num_or(n, "tv_blowup_factor", c.tv_blowup_factor, res);
    c.prune_floor = num_or(n, "prune_floor", c.prune_floor, res);
    c.merge_radius = num_or(n, "merge_radius", c.merge_radius, res);
    c.max_picard_iters = static_cast<int>(n.has("max_picard_iters") ? n.at("max_picard_iters").integer() : 25);
    c.snapshot_every = static_cast<int>(n.has("snapshot_every") ? n.at("snapshot_every").integer() : 1);
    const long exact = n.has("exact_metric_atoms") ? n.at("exact_metric_atoms").integer() : 100;
    if (exact < 0) n.at("exact_metric_atoms").fail("must be nonnegative");
    c.exact_metric_atoms = static_cast<std::size_t>(exact);
    res["max_picard_iters"] = c.max_picard_iters;
    res["snapshot_every"] = c.snapshot_every;
    res["exact_metric_atoms"] = exact;
    try {
        c.validate();
    } catch (const Error& e) {
        n.fail(e.what());
    }
    return c;
}

inline Region parse_box(const Node& lo_node, const Node& hi_node, std::size_t dim) {
    const auto lo = lo_node.numbers(dim);
    const auto hi = hi_node.numbers(dim);
    for (std::size_t k = 0; k < dim; ++k)
        if (lo[k] > hi[k]) lo_node.fail("lower bound exceeds upper bound on axis " + std::to_string(k));
    return Region::box(lo, hi);
}

inline AtomicMeasure parse_initial(const Node& n, const ModelSpec& model, std::uint64_t seed,
                                   const std::filesystem::path& base_dir, json& res) {
    n.require_object();
    const int kinds = int(n.has("atoms")) + int(n.has("csv")) + int(n.has("random"));
    if (kinds != 1) n.fail("initial data needs exactly one of 'atoms', 'csv', 'random'");
    const std::size_t d = model.dim;
    if (n.has("atoms")) {
        n.only({"atoms"});
        const Node atoms = n.at("atoms");
        if (!atoms.j.is_array()) atoms.fail("expected an array of {x, w}");
        std::vector<double> coords, weights;
        for (std::size_t i = 0; i < atoms.j.size(); ++i) {
            const Node a = atoms.at(i);
            a.only({"x", "w"});
            const auto x = a.at("x").numbers(d);
            coords.insert(coords.end(), x.begin(), x.end());
            weights.push_back(a.at("w").number());
        }
        AtomicMeasure mu(d, coords, weights);
        json ra = json::array();
        for (std::size_t i = 0; i < mu.size(); ++i) {
            auto x = mu.location(i);
            ra.push_back({{"x", std::vector<double>(x.begin(), x.end())}, {"w", mu.weight(i)}});
        }
        res = {{"atoms", ra}};
        return mu;
    }
    if (n.has("csv")) {
        n.only({"csv", "time"});
        const std::string rel = n.at("csv").str();
        const std::filesystem::path p = std::filesystem::path(rel).is_absolute() ? std::filesystem::path(rel) : base_dir / rel;
        const SnapshotFile f = read_snapshots_csv(p, d);
        if (f.states.empty()) n.at("csv").fail("no atoms in " + p.string());
        res = {{"csv", std::filesystem::absolute(p).lexically_normal().string()}};
        if (n.has("time")) {
            const double t = n.at("time").number();
            res["time"] = t;
            for (std::size_t s = 0; s < f.times.size(); ++s)
                if (f.times[s] == t) return f.states[s];
            n.at("time").fail("no snapshot at t = " + format_double(t));
        }
        return f.states.back();
    }
    const Node r = n.at("random");
    r.only({"min_atoms", "max_atoms", "weight_lo", "weight_hi"});
    RandomMeasureSpec spec;
    spec.dim = d;
    json rr;
    spec.min_atoms = static_cast<std::size_t>(r.has("min_atoms") ? r.at("min_atoms").integer() : 1);
    spec.max_atoms = static_cast<std::size_t>(r.has("max_atoms") ? r.at("max_atoms").integer() : 20);
    if (spec.min_atoms < 1 || spec.max_atoms < spec.min_atoms) r.fail("need 1 <= min_atoms <= max_atoms");
    spec.weight_lo = num_or(r, "weight_lo", 0.0, rr);
    spec.weight_hi = num_or(r, "weight_hi", 1.0, rr);
    if (spec.weight_lo > spec.weight_hi) r.fail("weight_lo exceeds weight_hi");
    rr["min_atoms"] = spec.min_atoms;
    rr["max_atoms"] = spec.max_atoms;
    if (!model.sampling_box.bounded()) r.fail("model has no bounded sampling box");
    spec.lower.resize(d);
    spec.upper.resize(d);
    for (std::size_t k = 0; k < d; ++k) {
        spec.lower[k] = *model.sampling_box.lower[k];
        spec.upper[k] = *model.sampling_box.upper[k];
    }
    res = {{"random", rr}};
    Rng rng(case_seed(seed, 0));
    return random_measure(rng, spec);
}

}  // namespace detail

/// Builds a model from the "model", "eps", "rates", "kernel", "domain" keys.
/// Fills the resolved copy of those keys into `res`.
inline ModelSpec build_model(const json& j, json& res) {
    using detail::Node;
    const Node root{j, ""};
    const std::string name = root.at("model").str();
    res["model"] = name;
    const Node rates = root.at("rates");
    json rr = json::object();
    static const json empty = json::object();

    if (name == "spe" || name == "selmut") {
        const Node dom = root.at("domain");
        dom.only({"lower", "upper"});
        const std::size_t d = dom.at("lower").j.is_array() ? dom.at("lower").j.size() : 0;
        if (d == 0) dom.at("lower").fail("expected a nonempty array");
        const Region domain = detail::parse_box(dom.at("lower"), dom.at("upper"), d);
        res["domain"] = {{"lower", dom.at("lower").numbers()}, {"upper", dom.at("upper").numbers()}};
        const double eps = root.has("eps") ? root.at("eps").number() : 0.0;
        if (eps < 0 || eps > 1) root.at("eps").fail("eps must lie in [0, 1]");
        res["eps"] = eps;
        json rk;
        const MutationKernelSpec kernel = detail::parse_kernel(root.at("kernel"), d, rk);
        res["kernel"] = rk;
        if (name == "spe") {
            rates.only({"b", "m"});
            SpeRates r;
            json a, b;
            r.b = detail::parse_scalar(rates.at("b"), d, a);
            if (rates.has("m")) {
                r.m = detail::parse_mortality(rates.at("m"), d, b);
            } else {
                r.m = PopulationMortality::constant(0.0);
                b = {{"family", "constant"}, {"params", {{"value", 0.0}}}};
            }
            rr = {{"b", a}, {"m", b}};
            res["rates"] = rr;
            return make_spe_model(std::move(r), kernel, eps, domain);
        }
        rates.only({"b", "d0", "d"});
        SelmutRates r;
        json a, b, c;
        r.b = detail::parse_scalar(rates.at("b"), d, a);
        r.d0 = detail::parse_scalar(rates.at("d0"), d, b);
        r.d = detail::parse_interaction(rates.at("d"), c);
        res["rates"] = {{"b", a}, {"d0", b}, {"d", c}};
        return make_selmut_model(std::move(r), kernel, eps, domain);
    }
    if (name == "age") {
        const Node dom = root.has("domain") ? root.at("domain") : Node{empty, "/domain"};
        dom.only({"sampling_lower", "sampling_upper"});
        Point lo{0.0, 0.0}, hi{2.0, 2.0};
        if (dom.has("sampling_lower")) lo = dom.at("sampling_lower").numbers(2);
        if (dom.has("sampling_upper")) hi = dom.at("sampling_upper").numbers(2);
        if (lo[0] < 0 || lo[1] < 0) dom.fail("sampling box must lie in the positive quadrant");
        if (lo[0] > hi[0] || lo[1] > hi[1]) dom.fail("empty sampling box");
        res["domain"] = {{"sampling_lower", lo}, {"sampling_upper", hi}};
        const double eps = root.has("eps") ? root.at("eps").number() : 0.0;
        if (eps < 0 || eps > 1) root.at("eps").fail("eps must lie in [0, 1]");
        res["eps"] = eps;
        json rk;
        const MutationKernelSpec kernel = detail::parse_kernel(root.at("kernel"), 1, rk);
        res["kernel"] = rk;
        rates.only({"b", "m"});
        AgeRates r;
        json a, b;
        r.b = detail::parse_scalar(rates.at("b"), 2, a);
        r.m = detail::parse_mortality(rates.at("m"), 2, b);
        res["rates"] = {{"b", a}, {"m", b}};
        return make_age_model(std::move(r), kernel, eps, Region::box(lo, hi));
    }
    if (name == "agesize") {
        if (root.has("eps")) root.at("eps").fail("the age-size model has no eps");
        if (root.has("kernel")) root.at("kernel").fail("the age-size model uses rates/beta instead of a kernel");
        const Node dom = root.at("domain");
        dom.only({"lower", "upper"});
        const auto lo = dom.at("lower").numbers(2);
        const auto hi = dom.at("upper").numbers(2);
        if (lo[0] != 0.0) dom.at("lower").fail("the age axis must start at 0");
        if (!(hi[0] > 0.0) || !(hi[1] > lo[1])) dom.fail("empty domain");
        res["domain"] = {{"lower", lo}, {"upper", hi}};
        rates.only({"g", "m", "beta"});
        AgeSizeRates r;
        json a, b, c;
        r.g = detail::parse_scalar(rates.at("g"), 1, a);
        r.m = detail::parse_mortality(rates.at("m"), 2, b);
        r.beta = detail::parse_offspring(rates.at("beta"), c);
        res["rates"] = {{"g", a}, {"m", b}, {"beta", c}};
        try {
            return make_age_size_model(std::move(r), hi[0], lo[1], hi[1]);
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            rates.fail(e.what());
        }
    }
    root.at("model").fail("unknown model '" + name + "' (expected spe, selmut, age, agesize)");
}

/// Validates a parsed configuration document and applies defaults.
inline RunConfig load_config_json(const json& j, const std::filesystem::path& base_dir = ".") {
    using detail::Node;
    const Node root{j, ""};
    root.only({"model", "eps", "rates", "kernel", "domain", "initial", "solver", "seed", "diagnostics"});
    RunConfig rc;
    json res = json::object();
    rc.model = build_model(j, res);
    rc.model_name = rc.model.name;
    if (root.has("seed")) {
        const Node s = root.at("seed");
        if (!s.j.is_number_integer() || (!s.j.is_number_unsigned() && s.j.get<long long>() < 0))
            s.fail("seed must be a nonnegative integer");
        rc.seed = s.j.get<std::uint64_t>();
    }
    res["seed"] = rc.seed;
    static const json empty = json::object();
    json rs;
    rc.solver = detail::parse_solver(root.has("solver") ? root.at("solver") : Node{empty, "/solver"}, rs);
    res["solver"] = rs;
    json ri;
    rc.initial = detail::parse_initial(root.at("initial"), rc.model, rc.seed, base_dir, ri);
    res["initial"] = ri;
    if (tv_outside(rc.initial, rc.model.domain) > 0.0)
        throw ConfigError("/initial", "initial atoms lie outside the model domain");
    if (root.has("diagnostics")) {
        const Node dn = root.at("diagnostics");
        if (!dn.j.is_array()) dn.fail("expected an array of suite names");
        for (std::size_t i = 0; i < dn.j.size(); ++i) rc.diagnostics.push_back(dn.at(i).str());
    }
    res["diagnostics"] = rc.diagnostics;
    rc.resolved = std::move(res);
    return rc;
}

inline json parse_json_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError(path.string(), "cannot open file");
    std::stringstream ss;
    ss << is.rdbuf();
    try {
        return json::parse(ss.str());
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string(), std::string("JSON parse error: ") + e.what());
    }
}

inline RunConfig load_config(const std::filesystem::path& path) {
    return load_config_json(parse_json_file(path), path.parent_path());
}

// ---------------------------------------------------------------------------
// Outputs

inline json trajectory_json(const Trajectory& tr) {
    json w = json::array();
    for (const auto& r : tr.windows) {
        json o = {{"start", r.start},
                  {"length", r.length},
                  {"step", r.step},
                  {"steps", r.steps},
                  {"lip_n", r.lip_n},
                  {"c_r", r.c_r},
                  {"initial_tv", r.initial_tv},
                  {"picard_iters", r.picard_iters},
                  {"contraction", r.contraction},
                  {"residuals", r.residuals},
                  {"metric", r.exact_metric ? "flat" : "tv_upper_bound"}};
        o["formula_length"] = std::isfinite(r.formula_length) ? json(r.formula_length) : json("inf");
        w.push_back(std::move(o));
    }
    return {{"dim", tr.dim},
            {"dt", tr.dt},
            {"termination", to_string(tr.termination)},
            {"message", tr.message},
            {"accumulated_prune_error", tr.accumulated_prune_error},
            {"outflow", tr.outflow},
            {"windows", w},
            {"tv_history", {{"t", tr.times}, {"tv", tr.tv_history}}}};
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw Error("cannot write " + p.string());
    os << s;
    if (!os) throw Error("write failed: " + p.string());
}

/// moments.csv, tv_history.csv and support_histogram.csv.
inline void emit_plotdata(const Trajectory& tr, const std::filesystem::path& out_dir, std::size_t bins = 50) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    const std::size_t d = tr.dim;
    {
        std::ostringstream os;
        os << "t,mass";
        for (std::size_t k = 0; k < d; ++k) os << ",m1_x" << k << ",m2_x" << k;
        os << '\n';
        for (std::size_t s = 0; s < tr.states.size(); ++s) {
            const auto& mu = tr.states[s];
            std::vector<double> m1(d, 0.0), m2(d, 0.0);
            for (std::size_t i = 0; i < mu.size(); ++i)
                for (std::size_t k = 0; k < d; ++k) {
                    const double x = mu.location(i)[k];
                    m1[k] += mu.weight(i) * x;
                    m2[k] += mu.weight(i) * x * x;
                }
            os << format_double(tr.times[s]) << ',' << format_double(total_mass(mu));
            for (std::size_t k = 0; k < d; ++k) os << ',' << format_double(m1[k]) << ',' << format_double(m2[k]);
            os << '\n';
        }
        write_text(out_dir / "moments.csv", os.str());
    }
    {
        std::ostringstream os;
        os << "t,tv,min_weight,mass_outside,atoms\n";
        const auto& g = tr.grid;
        for (std::size_t i = 0; i < g.times.size(); ++i)
            os << format_double(g.times[i]) << ',' << format_double(g.tv[i]) << ',' << format_double(g.min_weight[i])
               << ',' << format_double(g.mass_outside[i]) << ',' << g.atoms[i] << '\n';
        write_text(out_dir / "tv_history.csv", os.str());
    }
    {
        // Bins span each axis' coordinate range over all snapshots.
        std::ostringstream os;
        os << "t,axis,bin_lo,bin_hi,mass\n";
        std::vector<double> lo(d, std::numeric_limits<double>::infinity()), hi(d, -lo[0]);
        for (const auto& mu : tr.states)
            for (std::size_t i = 0; i < mu.size(); ++i)
                for (std::size_t k = 0; k < d; ++k) {
                    lo[k] = std::min(lo[k], mu.location(i)[k]);
                    hi[k] = std::max(hi[k], mu.location(i)[k]);
                }
        for (std::size_t s = 0; s < tr.states.size(); ++s) {
            const auto& mu = tr.states[s];
            for (std::size_t k = 0; k < d; ++k) {
                if (!(lo[k] <= hi[k])) continue;
                const double width = hi[k] > lo[k] ? (hi[k] - lo[k]) / static_cast<double>(bins) : 1.0;
                std::vector<double> mass(bins, 0.0);
                for (std::size_t i = 0; i < mu.size(); ++i) {
                    auto b = static_cast<std::size_t>((mu.location(i)[k] - lo[k]) / width);
                    mass[std::min(b, bins - 1)] += mu.weight(i);
                }
                for (std::size_t b = 0; b < bins; ++b)
                    os << format_double(tr.times[s]) << ',' << k << ','
                       << format_double(lo[k] + width * static_cast<double>(b)) << ','
                       << format_double(lo[k] + width * static_cast<double>(b + 1)) << ',' << format_double(mass[b])
                       << '\n';
            }
        }
        write_text(out_dir / "support_histogram.csv", os.str());
    }
}

/// Writes snapshots.csv, trajectory.json and the plot data into `out_dir`.
inline void write_run_outputs(const Trajectory& tr, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    write_snapshots_csv(out_dir / "snapshots.csv", tr.times, tr.states, tr.dim);
    write_text(out_dir / "trajectory.json", trajectory_json(tr).dump(2) + "\n");
    emit_plotdata(tr, out_dir);
}

inline void write_resolved_config(const RunConfig& rc, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    write_text(out_dir / "resolved_config.json", rc.resolved.dump(2) + "\n");
}

}  // namespace measdyn
