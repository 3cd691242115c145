#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "measdyn/diagnostics.hpp"
#include "measdyn/io.hpp"
#include "measdyn/presets.hpp"

using namespace measdyn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("measdyn_io_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::string config_error(const json& j) {
    try {
        load_config_json(j);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(Format, RoundTripExact) {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) EXPECT_EQ(parse_double(format_double(v), "x"), v);
    EXPECT_THROW(parse_double("1.5abc", "here"), ConfigError);
}

TEST(SnapshotCsv, HeaderAndRows) {
    EXPECT_EQ(snapshot_header(2), "t,atom_id,x0,x1,weight");
    const fs::path d = scratch("rows");
    write_snapshots_csv(d / "s.csv", {0.0, 0.5}, {AtomicMeasure::dirac({0.1, 0.2}, 0.3), AtomicMeasure(2)}, 2);
    EXPECT_EQ(slurp(d / "s.csv"), "t,atom_id,x0,x1,weight\n0,0,0.1,0.2,0.3\n");
}

TEST(SnapshotCsv, RoundTripIsExact) {
    Rng rng(77);
    RandomMeasureSpec s;
    s.dim = 2;
    s.lower = {0, 0};
    s.upper = {1, 1};
    std::vector<AtomicMeasure> states;
    std::vector<double> times;
    for (int i = 0; i < 5; ++i) {
        states.push_back(random_measure(rng, s));
        times.push_back(0.1 * i);
    }
    const fs::path d = scratch("roundtrip");
    write_snapshots_csv(d / "s.csv", times, states, 2);
    const auto f = read_snapshots_csv(d / "s.csv", 2);
    EXPECT_EQ(f.times, times);
    ASSERT_EQ(f.states.size(), states.size());
    for (std::size_t i = 0; i < states.size(); ++i) EXPECT_EQ(f.states[i], states[i]);
}

TEST(SnapshotCsv, HeaderMismatchNamesExpectedHeader) {
    const fs::path d = scratch("badheader");
    std::ofstream(d / "s.csv") << "t,id,x,w\n0,0,0.5,1\n";
    try {
        read_snapshots_csv(d / "s.csv", 1);
        FAIL() << "expected a ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("t,atom_id,x0,weight"), std::string::npos) << e.what();
    }
    std::ofstream(d / "t.csv") << "t,atom_id,x0,weight\n0,0,0.5\n";
    EXPECT_THROW(read_snapshots_csv(d / "t.csv", 1), ConfigError);
}

TEST(Config, PresetsLoad) {
    for (const auto& name : presets::model_names()) {
        const auto rc = load_config_json(presets::by_name(name));
        EXPECT_EQ(rc.model_name, name);
        EXPECT_FALSE(rc.initial.empty());
    }
}

TEST(Config, MinimalSpeGetsDefaults) {
    const json j = {{"model", "spe"},
                    {"rates", {{"b", presets::scalar("constant", {{"value", 1.0}})}}},
                    {"kernel", {{"family", "copy"}}},
                    {"domain", {{"lower", {0.0}}, {"upper", {1.0}}}},
                    {"initial", {{"atoms", {{{"x", {0.5}}, {"w", 0.2}}}}}}};
    const auto rc = load_config_json(j);
    EXPECT_EQ(rc.solver.dt, 1e-3);
    EXPECT_EQ(rc.solver.picard_tol, 1e-8);
    EXPECT_EQ(rc.solver.max_picard_iters, 25);
    EXPECT_EQ(rc.resolved["solver"]["dt"], 1e-3);
    EXPECT_EQ(rc.resolved["eps"], 0.0);
    EXPECT_EQ(rc.resolved["rates"]["m"]["params"]["value"], 0.0);
}

TEST(Config, UnknownKeysAreRejectedByName) {
    json j = presets::spe();
    j["mutation_rte"] = 0.1;
    EXPECT_NE(config_error(j).find("mutation_rte"), std::string::npos);
    j = presets::spe();
    j["solver"]["dtt"] = 0.1;
    EXPECT_NE(config_error(j).find("/solver/dtt"), std::string::npos);
    j = presets::spe();
    j["rates"]["b"]["family"] = "cubic";
    EXPECT_NE(config_error(j).find("/rates/b"), std::string::npos);
}

TEST(Config, SchemaViolations) {
    json j = presets::spe();
    j.erase("initial");
    EXPECT_NE(config_error(j).find("/initial"), std::string::npos);
    j = presets::spe();
    j["eps"] = 2.0;
    EXPECT_FALSE(config_error(j).empty());
    j = presets::spe();
    j["initial"]["atoms"][0]["x"] = {1.5};
    EXPECT_NE(config_error(j).find("/initial"), std::string::npos);
    j = presets::spe();
    j["solver"]["dt"] = -1.0;
    EXPECT_NE(config_error(j).find("/solver"), std::string::npos);
    j = presets::spe();
    j["model"] = "unknown";
    EXPECT_NE(config_error(j).find("/model"), std::string::npos);
}

TEST(Config, FileErrorsNameTheLine) {
    const fs::path d = scratch("parse");
    std::ofstream(d / "c.json") << "{\n  \"model\": \"spe\",\n  oops\n}\n";
    try {
        load_config(d / "c.json");
        FAIL() << "expected a ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
}

TEST(Config, CsvInitialData) {
    const fs::path d = scratch("csvinit");
    const auto mu = AtomicMeasure::from_atoms(1, {{{0.25}, 0.1}, {{0.75}, 0.3}});
    write_snapshots_csv(d / "init.csv", {0.0, 1.0}, {AtomicMeasure::dirac({0.5}), mu}, 1);
    json j = presets::spe();
    j["initial"] = {{"csv", "init.csv"}, {"time", 1.0}};
    std::ofstream(d / "c.json") << j.dump();
    const auto rc = load_config(d / "c.json");
    EXPECT_EQ(rc.initial, mu);
    EXPECT_TRUE(fs::path(rc.resolved["initial"]["csv"].get<std::string>()).is_absolute());
}

TEST(Config, RandomInitialDataIsSeeded) {
    json j = presets::spe();
    j["initial"] = {{"random", {{"min_atoms", 3}, {"max_atoms", 6}}}};
    j["seed"] = 11;
    const auto a = load_config_json(j), b = load_config_json(j);
    EXPECT_EQ(a.initial, b.initial);
    j["seed"] = 12;
    EXPECT_FALSE(load_config_json(j).initial == a.initial);
    for (double w : a.initial.weights()) EXPECT_GE(w, 0.0);
}

TEST(Config, ResolvedConfigReloadsToSameRun) {
    const auto rc = load_config_json(presets::age());
    const auto again = load_config_json(rc.resolved);
    EXPECT_EQ(again.resolved, rc.resolved);
    EXPECT_EQ(again.initial, rc.initial);
}

TEST(Plotdata, EmptyTrajectoryHeadersOnly) {
    const fs::path d = scratch("empty");
    Trajectory tr;
    tr.dim = 2;
    emit_plotdata(tr, d);
    EXPECT_EQ(slurp(d / "moments.csv"), "t,mass,m1_x0,m2_x0,m1_x1,m2_x1\n");
    EXPECT_EQ(slurp(d / "tv_history.csv"), "t,tv,min_weight,mass_outside,atoms\n");
    EXPECT_EQ(slurp(d / "support_histogram.csv"), "t,axis,bin_lo,bin_hi,mass\n");
}

TEST(Plotdata, ConstantTrajectoryHasConstantColumns) {
    const auto u0 = AtomicMeasure::from_atoms(1, {{{0.2}, 0.5}, {{0.8}, 0.25}});
    const auto M = make_linear_model(1, 0.0, VectorFieldSpec::zero(1));
    SolverConfig cfg;
    cfg.t_max = 0.01;
    const auto tr = solve(u0, M, cfg);
    const fs::path d = scratch("const");
    emit_plotdata(tr, d);
    std::istringstream is(slurp(d / "moments.csv"));
    std::string line;
    std::getline(is, line);
    std::string first_tail;
    int rows = 0;
    while (std::getline(is, line)) {
        const std::string tail = line.substr(line.find(','));
        if (rows == 0) first_tail = tail;
        EXPECT_EQ(tail, first_tail);
        ++rows;
    }
    EXPECT_EQ(rows, 11);
    const double m1 = 0.5 * 0.2 + 0.25 * 0.8, m2 = 0.5 * 0.2 * 0.2 + 0.25 * 0.8 * 0.8;
    EXPECT_EQ(first_tail, ",0.75," + format_double(m1) + "," + format_double(m2));
}

TEST(Plotdata, LogisticMassIsMonotoneAndTracksOracle) {
    const auto rc = load_config_json(presets::logistic_dirac(0.2));
    const auto tr = solve(rc.initial, rc.model, rc.solver);
    const fs::path d = scratch("logistic");
    emit_plotdata(tr, d);
    std::istringstream is(slurp(d / "moments.csv"));
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "t,mass,m1_x0,m2_x0");
    std::vector<double> ts, mass;
    while (std::getline(is, line)) {
        const auto cells = split_commas(line);
        ts.push_back(parse_double(cells[0], "t"));
        mass.push_back(parse_double(cells[1], "mass"));
    }
    const auto ref = dirac_ode_oracle(SpeRates{ScalarField::constant(1.0),
                                               PopulationMortality::logistic_in_P(ScalarField::constant(0.0), 1.0)},
                                      {0.5}, 0.2, ts);
    ASSERT_EQ(mass.size(), 101u);
    for (std::size_t i = 1; i < mass.size(); ++i) {
        EXPECT_GT(mass[i], mass[i - 1]);
        EXPECT_LT(mass[i], 1.0);
        EXPECT_NEAR(mass[i], ref[i], 1e-3);
    }
}
