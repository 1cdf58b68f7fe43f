#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "sdcbf/errors.hpp"
#include "sdcbf/harness.hpp"

using namespace sdcbf;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
    const fs::path dir = fs::temp_directory_path() / "sdcbf_harness_tests";
    fs::create_directories(dir);
    return dir;
}

fs::path write_config(const std::string& name, const std::string& body) {
    const fs::path p = scratch_dir() / name;
    std::ofstream out(p);
    out << body;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("builtin scenario catalogue") {
    const auto names = builtin_scenario_names();
    REQUIRE(names.size() == 4);

    const auto lyap = builtin_scenario("single_lyapunov");
    CHECK(lyap.system == "single_pendulum");
    CHECK(lyap.safe_set == "lyapunov");
    CHECK(lyap.tableau == "euler");
    CHECK(lyap.nominal == "fl_pd");
    CHECK(lyap.ics.kind == InitialConditionSpec::Kind::UniformInSet);
    CHECK(lyap.ics.count == 100);
    REQUIRE(lyap.periods.size() == 11);
    CHECK(lyap.periods.front() == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(lyap.periods.back() == doctest::Approx(0.5).epsilon(1e-12));
    // sampling box must cover the unit sublevel set of x'Px, P = [[s3,1],[1,s3]]
    const double half = std::sqrt(std::sqrt(3.0) / 2.0);
    CHECK(lyap.ics.lo(0) == doctest::Approx(-half).epsilon(1e-12));
    CHECK(lyap.ics.hi(1) == doctest::Approx(half).epsilon(1e-12));

    const auto ell = builtin_scenario("single_config_ellipsoid");
    CHECK(ell.tableau == "midpoint");
    CHECK(ell.nominal == "zero");
    CHECK(ell.ics.kind == InitialConditionSpec::Kind::Grid);
    CHECK(ell.ics.shape == std::vector<int>{9, 9});
    CHECK(ell.ics.lo(0) == -1.0);
    CHECK(ell.ics.hi(1) == 5.0);

    const auto half_sp = builtin_scenario("single_halfspace");
    CHECK(half_sp.safe_set == "halfspace");
    CHECK(half_sp.ics.lo(0) == -0.1);

    const auto ball = builtin_scenario("double_config_ball");
    CHECK(ball.system == "double_pendulum");
    CHECK(ball.periods.front() == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(ball.periods.back() == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(ball.ics.lo.size() == 4);

    CHECK_THROWS_AS(builtin_scenario("triple_lyapunov"), ConfigError);
}

TEST_CASE("log spacing has constant ratio and pinned endpoints") {
    const auto hs = log_spaced_periods(0.05, 0.5, 11);
    REQUIRE(hs.size() == 11);
    CHECK(hs.front() == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(hs.back() == doctest::Approx(0.5).epsilon(1e-12));
    const double ratio = hs[1] / hs[0];
    for (size_t i = 1; i + 1 < hs.size(); ++i) {
        CHECK(hs[i + 1] / hs[i] == doctest::Approx(ratio).epsilon(1e-9));
    }
    CHECK_THROWS_AS(log_spaced_periods(0.0, 0.5, 11), ConfigError);
    CHECK_THROWS_AS(log_spaced_periods(0.5, 0.05, 11), ConfigError);
    CHECK_THROWS_AS(log_spaced_periods(0.05, 0.5, 1), ConfigError);
}

TEST_CASE("config loading: builtins, overrides, rejects") {
    const auto good = write_config("good.cfg",
                                   "# demo\n"
                                   "scenario = single_config_ellipsoid\n"
                                   "horizon = 2.5\n"
                                   "jobs = 2\n"
                                   "ic.shape = 3x3\n"
                                   "periods.values = 0.1, 0.2\n");
    const auto cfg = load_config(good.string());
    CHECK(cfg.scenario == "single_config_ellipsoid");
    CHECK(cfg.horizon == 2.5);
    CHECK(cfg.jobs == 2);
    CHECK(cfg.ics_overridden);
    CHECK(cfg.ics.shape == std::vector<int>{3, 3});
    REQUIRE(cfg.periods.size() == 2);
    CHECK(cfg.periods[0] == 0.1);

    const auto empty = write_config("empty.cfg", "# nothing but comments\n\n");
    CHECK_THROWS_WITH_AS(load_config(empty.string()),
                         doctest::Contains("scenario name is required"), ConfigError);

    const auto unknown = write_config("unknown.cfg",
                                      "scenario = single_halfspace\n"
                                      "\n"
                                      "bogus = 1\n");
    CHECK_THROWS_WITH_AS(load_config(unknown.string()), doctest::Contains("line 3"),
                         ConfigError);

    const auto headless = write_config("headless.cfg", "horizon = 1.0\n");
    CHECK_THROWS_AS(load_config(headless.string()), ConfigError);

    const auto badnum = write_config("badnum.cfg",
                                     "scenario = single_halfspace\n"
                                     "horizon = fast\n");
    CHECK_THROWS_WITH_AS(load_config(badnum.string()), doctest::Contains("needs a number"),
                         ConfigError);

    CHECK_THROWS_AS(load_config((scratch_dir() / "missing.cfg").string()), ConfigError);
}

TEST_CASE("environment seed override") {
    const auto p = write_config("seeded.cfg",
                                "scenario = single_lyapunov\n"
                                "seed = 5\n");
    CHECK(load_config(p.string()).seed == 5);

    setenv("SDCBF_SEED", "777", 1);
    CHECK(load_config(p.string()).seed == 777);

    setenv("SDCBF_SEED", "banana", 1);
    CHECK_THROWS_AS(load_config(p.string()), ConfigError);
    unsetenv("SDCBF_SEED");
}

TEST_CASE("custom tableau from config reproduces the midpoint step") {
    const auto p = write_config("custom.cfg",
                                "system = single_pendulum\n"
                                "safe_set = config_ellipsoid\n"
                                "tableau = custom\n"
                                "tableau.weights = 0, 1\n"
                                "tableau.coeffs = 0, 0; 0.5, 0\n"
                                "nominal = zero\n"
                                "periods.values = 0.1\n");
    const auto cfg = load_config(p.string());
    const auto sc = build_setup(cfg);
    CHECK(sc.tableau.stages() == 2);

    const auto mid = standard_tableau("midpoint");
    Vector x(2);
    x << 0.4, -0.8;
    Vector u(1);
    u << 1.3;
    const Vector a = rk_step(sc.tableau, sc.system, x, u, 0.2);
    const Vector b = rk_step(mid, sc.system, x, u, 0.2);
    CHECK((a - b).norm() == 0.0);

    const auto broken = write_config("custom_broken.cfg",
                                     "system = single_pendulum\n"
                                     "safe_set = config_ellipsoid\n"
                                     "tableau = custom\n"
                                     "nominal = zero\n"
                                     "periods.values = 0.1\n");
    CHECK_THROWS_AS(build_setup(load_config(broken.string())), ConfigError);
}

TEST_CASE("setup validation catches incompatible pieces") {
    auto cfg = builtin_scenario("single_config_ellipsoid");
    cfg.safe_set = "config_ball";  // needs a 4-dim state
    CHECK_THROWS_AS(build_setup(cfg), ConfigError);

    auto no_periods = builtin_scenario("single_halfspace");
    no_periods.periods.clear();
    CHECK_THROWS_AS(build_setup(no_periods), ConfigError);
}

TEST_CASE("full-scale populations only apply without explicit overrides") {
    auto grid = builtin_scenario("single_config_ellipsoid");
    CHECK(build_initial_conditions(grid).size() == 81);
    grid.full_scale = true;
    CHECK(build_initial_conditions(grid).size() == 41 * 41);
    grid.ics.shape = {3, 3};
    grid.ics_overridden = true;
    CHECK(build_initial_conditions(grid).size() == 9);

    auto uni = builtin_scenario("single_lyapunov");
    uni.full_scale = true;
    CHECK(build_initial_conditions(uni).size() == 500);
}

TEST_CASE("run_scenario writes deterministic artifacts") {
    auto cfg = builtin_scenario("single_config_ellipsoid");
    cfg.periods = {0.1, 0.3};
    cfg.ics.shape = {3, 3};
    cfg.ics_overridden = true;
    cfg.horizon = 1.0;
    cfg.jobs = 1;
    cfg.out_dir = (scratch_dir() / "run_a").string();

    const auto res_a = run_scenario(cfg);
    CHECK(res_a.exit_code == 0);
    REQUIRE(res_a.rows.size() == 2);
    REQUIRE(res_a.artifacts.size() == 4);
    for (const auto& a : res_a.artifacts) CHECK(fs::exists(a));

    const std::string manifest = slurp(fs::path(cfg.out_dir) / "manifest.txt");
    CHECK(manifest.find("toolkit_version = " + std::string(kToolkitVersion)) !=
          std::string::npos);
    CHECK(manifest.find("seed = 1") != std::string::npos);
    CHECK(manifest.find("solver_failures = 0") != std::string::npos);

    auto cfg_b = cfg;
    cfg_b.jobs = 4;
    cfg_b.out_dir = (scratch_dir() / "run_b").string();
    const auto res_b = run_scenario(cfg_b);
    CHECK(res_b.exit_code == 0);

    for (const char* name : {"summary.csv", "trajectories.csv", "max_distance.dat"}) {
        const std::string a = slurp(fs::path(cfg.out_dir) / name);
        const std::string b = slurp(fs::path(cfg_b.out_dir) / name);
        CHECK(a == b);
        CHECK(!a.empty());
    }

    const std::string summary = slurp(fs::path(cfg.out_dir) / "summary.csv");
    CHECK(summary.rfind("scenario,h,max_distance,n_failures\n", 0) == 0);
}

TEST_CASE("exception to exit code map") {
    CHECK(exit_code_for(ConfigError("x")) == 2);
    CHECK(exit_code_for(SolverError("x")) == 3);
    CHECK(exit_code_for(SdcbfViolation("x")) == 3);
    CHECK(exit_code_for(IntegrationError("x")) == 4);
    CHECK(exit_code_for(NumericError("x")) == 1);
    CHECK(exit_code_for(std::runtime_error("x")) == 1);
}
