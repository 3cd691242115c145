// measdyn: solve / verify / distance front end.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "measdyn/measdyn.hpp"

namespace fs = std::filesystem;
using namespace measdyn;

namespace {

constexpr int kExitViolations = 1;
constexpr int kExitBlowUp = 2;
constexpr int kExitIterationFailure = 3;
constexpr int kExitConfig = 64;

fs::path output_root(const std::string& out) {
    const char* env = std::getenv("MEASDYN_OUT");
    if (out.empty()) return env && *env ? fs::path(env) : fs::path("out");
    const fs::path p(out);
    if (env && *env && p.is_relative()) return fs::path(env) / p;
    return p;
}

int exit_code(Termination t) {
    switch (t) {
        case Termination::horizon_reached: return 0;
        case Termination::blow_up: return kExitBlowUp;
        case Termination::iteration_failure: return kExitIterationFailure;
    }
    return kExitIterationFailure;
}

struct SolveArgs {
    std::string config, out;
    std::optional<double> dt, tmax;
    std::optional<std::uint64_t> seed;
};

int run_solve(const SolveArgs& a, std::optional<std::uint64_t> global_seed, bool quiet) {
    RunConfig rc;
    try {
        json j = parse_json_file(a.config);
        if (!j.is_object()) throw ConfigError("/", "expected a JSON object");
        if (a.dt || a.tmax) {
            if (!j.contains("solver")) j["solver"] = json::object();
            if (a.dt) j["solver"]["dt"] = *a.dt;
            if (a.tmax) j["solver"]["t_max"] = *a.tmax;
        }
        if (a.seed) j["seed"] = *a.seed;
        else if (global_seed) j["seed"] = *global_seed;
        rc = load_config_json(j, fs::path(a.config).parent_path());
        for (const auto& name : rc.diagnostics) default_cases(name);
    } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
    const fs::path out = output_root(a.out);
    try {
        write_resolved_config(rc, out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    SolverConfig cfg = rc.solver;
    if (!quiet) {
        cfg.on_window = [](const WindowRecord& w) {
            std::printf("window t=%s len=%s iters=%d contraction=%s L_N=%s C_R=%s\n", format_double(w.start).c_str(),
                        format_double(w.length).c_str(), w.picard_iters, format_double(w.contraction).c_str(),
                        format_double(w.lip_n).c_str(), format_double(w.c_r).c_str());
        };
    }
    const Trajectory tr = solve(rc.initial, rc.model, cfg);
    write_run_outputs(tr, out);
    if (!quiet) {
        std::printf("%s: %zu windows, %zu snapshots, prune error %s, outflow %s -> %s\n", to_string(tr.termination),
                    tr.windows.size(), tr.times.size(), format_double(tr.accumulated_prune_error).c_str(),
                    format_double(tr.outflow).c_str(), out.string().c_str());
        if (!tr.message.empty()) std::printf("%s\n", tr.message.c_str());
    }
    // Requested suites run with the config seed; reports go to <out>/diagnostics.
    std::size_t violations = 0;
    if (!rc.diagnostics.empty()) fs::create_directories(out / "diagnostics");
    for (const auto& name : rc.diagnostics) {
        const PropertyReport rep = run_suite(name, rc.seed, default_cases(name));
        write_text(out / "diagnostics" / (name + ".json"), rep.to_json().dump(2) + "\n");
        violations += rep.violations;
        if (!quiet) std::printf("diagnostics %s: %zu violations\n", name.c_str(), rep.violations);
    }
    if (tr.termination == Termination::horizon_reached && violations > 0) return kExitViolations;
    return exit_code(tr.termination);
}

struct VerifyArgs {
    std::string suite, report;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> cases, only_case;
};

int run_verify(const VerifyArgs& a, std::optional<std::uint64_t> global_seed, bool quiet) {
    std::size_t n = 0;
    try {
        n = a.cases ? *a.cases : default_cases(a.suite);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    const std::uint64_t seed = a.seed ? *a.seed : global_seed.value_or(0);
    const PropertyReport rep = run_suite(a.suite, seed, n, a.only_case);
    if (!a.report.empty()) {
        fs::path p = output_root(a.report);
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        write_text(p, rep.to_json().dump(2) + "\n");
    }
    for (const auto& c : rep.outcomes)
        if (c.violated)
            std::printf("VIOLATION case %zu margin %s: %s\n  replay: %s\n", c.index, format_double(c.margin).c_str(),
                        c.detail.c_str(), rep.replay_command(c).c_str());
    if (!quiet)
        std::printf("%s: %zu cases, %zu violations, worst margin %s\n", rep.name.c_str(), rep.outcomes.size(),
                    rep.violations, rep.outcomes.empty() ? "n/a" : format_double(rep.worst_margin).c_str());
    return rep.passed() ? 0 : kExitViolations;
}

int run_distance(const std::string& fa, const std::string& fb, const std::string& form_name) {
    SnapshotFile a, b;
    try {
        a = read_snapshots_csv(fa);
        b = read_snapshots_csv(fb, a.dim);
    } catch (const Error& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return kExitConfig;
    }
    const NormForm form = form_name == "max" ? NormForm::max : NormForm::sum;
    std::printf("t,bl_distance\n");
    std::size_t j = 0, shared = 0;
    for (std::size_t i = 0; i < a.times.size(); ++i) {
        while (j < b.times.size() && b.times[j] < a.times[i]) ++j;
        if (j < b.times.size() && b.times[j] == a.times[i]) {
            std::printf("%s,%s\n", format_double(a.times[i]).c_str(),
                        format_double(bl_distance(a.states[i], b.states[j], form)).c_str());
            ++shared;
        }
    }
    if (shared == 0) {
        // No common snapshot time: compare the last state of each file.
        const AtomicMeasure ea = a.states.empty() ? AtomicMeasure(a.dim, {}, {}) : a.states.back();
        const AtomicMeasure eb = b.states.empty() ? AtomicMeasure(a.dim, {}, {}) : b.states.back();
        std::printf("final,%s\n", format_double(bl_distance(ea, eb, form)).c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Measure-valued population dynamics solver"};
    app.require_subcommand(1);
    bool quiet = false;
    std::optional<std::uint64_t> global_seed;
    app.add_flag("--quiet", quiet, "suppress progress output");
    app.add_option("--seed", global_seed, "seed used when a subcommand does not set one");

    SolveArgs sa;
    auto* solve_cmd = app.add_subcommand("solve", "integrate a model configuration");
    solve_cmd->add_option("--config", sa.config, "JSON configuration")->required()->check(CLI::ExistingFile);
    solve_cmd->add_option("--out", sa.out, "output directory (relative to $MEASDYN_OUT if set)");
    solve_cmd->add_option("--dt", sa.dt, "override solver.dt");
    solve_cmd->add_option("--tmax", sa.tmax, "override solver.t_max");
    solve_cmd->add_option("--seed", sa.seed, "override the config seed");

    VerifyArgs va;
    auto* verify_cmd = app.add_subcommand("verify", "run a property suite");
    verify_cmd->add_option("--suite", va.suite, "suite name, optionally suffixed ':model'")->required();
    verify_cmd->add_option("--seed", va.seed, "base seed");
    verify_cmd->add_option("--cases", va.cases, "number of cases (suite default if omitted)");
    verify_cmd->add_option("--report", va.report, "write a JSON report here");
    verify_cmd->add_option("--only-case", va.only_case, "run a single case index");

    std::string fa, fb, form = "sum";
    auto* dist_cmd = app.add_subcommand("distance", "BL distance between snapshot CSV files");
    dist_cmd->add_option("fileA", fa)->required()->check(CLI::ExistingFile);
    dist_cmd->add_option("fileB", fb)->required()->check(CLI::ExistingFile);
    dist_cmd->add_option("--form", form, "dual norm form")->check(CLI::IsMember({"sum", "max"}));

    auto* list_cmd = app.add_subcommand("suites", "list registered property suites");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (*solve_cmd) return run_solve(sa, global_seed, quiet);
        if (*verify_cmd) return run_verify(va, global_seed, quiet);
        if (*dist_cmd) return run_distance(fa, fb, form);
        if (*list_cmd) {
            for (const auto& s : suite_names()) std::printf("%s\n", s.c_str());
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIterationFailure;
    }
    return 0;
}
