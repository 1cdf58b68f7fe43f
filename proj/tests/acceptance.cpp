// Acceptance gate: one pass/fail line per criterion, nonzero exit on any
// failure. Runs the desk-scale closed-loop sweeps once and reuses them for
// both the decrement certificate and the safety-trend checks.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sdcbf/errors.hpp"
#include "sdcbf/harness.hpp"

using namespace sdcbf;

namespace {

constexpr double kResidualBound = 1e-8;       // recorded decrement residuals
constexpr double kOracleSlack = 1e-6;         // vs grid-oracle best distance
constexpr double kConvexityBound = 1e-9;      // probe violation
constexpr double kExactMapBound = 1e-9;       // linear fixture agreement
constexpr double kCareResidualBound = 1e-12;  // Riccati residual
constexpr double kConstantRelTol = 1e-2;      // coercivity constants vs derived
constexpr double kTrendSlack = 1.1;           // delta(h) monotonicity slack
constexpr double kEulerLo = 1.7, kEulerHi = 2.3;
constexpr double kMidpointLo = 2.7, kMidpointHi = 3.3;

int failures = 0;

void report(int n, bool ok, const std::string& detail) {
    std::printf("[%s] %d %s\n", ok ? "PASS" : "FAIL", n, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

// ---- criterion 1: consistency orders --------------------------------------

void check_consistency() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto sys = to_control_affine(pendulum_model("single_pendulum"));
    auto zero = [](const Vector&) { return Vector::Zero(1); };
    const ExactMapOracle oracle;

    InitialConditionSpec grid;
    grid.kind = InitialConditionSpec::Kind::Grid;
    grid.lo = vec2(-1.0, -1.0);
    grid.hi = vec2(1.0, 1.0);
    grid.shape = {9, 9};
    const auto states = sample_initial_conditions(grid);
    const auto periods = log_spaced_periods(1e-4, 1e-2, 9);

    const double euler =
        consistency_order(sys, zero, standard_tableau("euler"), oracle, states, periods).slope;
    const double mid =
        consistency_order(sys, zero, standard_tableau("midpoint"), oracle, states, periods)
            .slope;
    const double secs = seconds_since(t0);

    const bool ok = euler > kEulerLo && euler < kEulerHi && mid > kMidpointLo &&
                    mid < kMidpointHi && secs < 60.0;
    report(1, ok,
           "consistency orders on 9x9 grid: euler " + fmt(euler) + ", midpoint " + fmt(mid) +
               " (" + fmt(secs) + "s)");
}

// ---- criteria 2 and 4: desk-scale sweeps ----------------------------------

struct ScenarioSweep {
    std::string name;
    std::vector<SweepRow> rows;
};

std::vector<ScenarioSweep> run_desk_sweeps() {
    std::vector<ScenarioSweep> out;
    for (const auto& name : builtin_scenario_names()) {
        const ScenarioConfig cfg = builtin_scenario(name);
        const ScenarioSetup sc = build_setup(cfg);
        const auto ics = build_initial_conditions(cfg);
        out.push_back({name, sweep_max_distance(sc, ics, cfg.periods)});
    }
    return out;
}

void check_decrement_certificate(const std::vector<ScenarioSweep>& sweeps, double secs) {
    long total_failures = 0;
    double worst = -1e300;
    for (const auto& sw : sweeps) {
        for (const auto& row : sw.rows) {
            total_failures += row.n_failures;
            worst = std::max(worst, row.max_residual);
        }
    }
    const bool ok = total_failures == 0 && worst <= kResidualBound;
    report(2, ok,
           "decrement certificate across 4 scenarios x 11 periods: max residual " + fmt(worst) +
               ", solver failures " + std::to_string(total_failures) + " (" + fmt(secs) + "s)");
}

void check_safety_trend(const std::vector<ScenarioSweep>& sweeps, double secs) {
    bool ok = secs < 600.0;
    std::string detail;
    for (const auto& sw : sweeps) {
        const auto& rows = sw.rows;
        if (rows.size() < 2) {
            ok = false;
            continue;
        }
        if (rows.front().max_distance > rows.back().max_distance) ok = false;

        // minimal passing invariance margin per period, from h_max down
        std::vector<double> delta(rows.size());
        for (size_t i = 0; i < rows.size(); ++i) {
            delta[i] = std::max(0.0, -rows[i].min_barrier);
        }
        for (size_t i = rows.size() - 1; i > 0; --i) {
            if (delta[i - 1] > kTrendSlack * delta[i] + 1e-12) ok = false;
        }
        detail += sw.name + " d[" + fmt(rows.front().max_distance) + " -> " +
                  fmt(rows.back().max_distance) + "] ";
    }
    report(4, ok, "practical-safety trend: " + detail + "(" + fmt(secs) + "s)");
}

// ---- criterion 3: solver optimality ---------------------------------------

struct Instance {
    Vector kd;
    std::function<double(const Vector&)> phi;
};

double grid_oracle_1d(const Instance& inst) {
    const double kd = inst.kd(0);
    double best = 1e300;
    Vector u(1);
    for (int i = 0; i < 100000; ++i) {
        u(0) = -20.0 + 40.0 * i / 99999.0;
        if (inst.phi(u) <= 0.0) best = std::min(best, std::abs(u(0) - kd));
    }
    return best;
}

double grid_oracle_2d(const Instance& inst) {
    double best = 1e300;
    Vector u(2);
    for (int i = 0; i < 316; ++i) {
        u(0) = -20.0 + 40.0 * i / 315.0;
        for (int j = 0; j < 316; ++j) {
            u(1) = -20.0 + 40.0 * j / 315.0;
            if (inst.phi(u) <= 0.0) best = std::min(best, (u - inst.kd).norm());
        }
    }
    return best;
}

void check_solver_optimality() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(20260815);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto box = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    SolverConfig cfg;
    long solved = 0, optimal = 0, feasible = 0;
    const int per_family = 250;

    for (int family = 0; family < 4; ++family) {
        for (int i = 0; i < per_family; ++i) {
            Instance inst;
            if (family == 0) {  // scalar affine a (u - r)
                const double a = (unit(rng) < 0.5 ? -1.0 : 1.0) * box(0.5, 2.0);
                const double r = box(-3.0, 3.0);
                inst.kd = Vector::Constant(1, box(-5.0, 5.0));
                inst.phi = [a, r](const Vector& u) { return a * (u(0) - r); };
            } else if (family == 1) {  // planar affine a'u - b
                Vector a(2);
                a << box(-2.0, 2.0), box(-2.0, 2.0);
                if (a.norm() < 0.3) a << 1.0, -0.5;
                const double b = box(-3.0, 3.0);
                inst.kd = vec2(box(-5.0, 5.0), box(-5.0, 5.0));
                inst.phi = [a, b](const Vector& u) { return a.dot(u) - b; };
            } else if (family == 2) {  // scalar concave set: c (u - r1)(u - r2)
                const double c = box(0.2, 2.0);
                const double r1 = box(-6.0, 0.0);
                const double r2 = r1 + box(0.5, 6.0);
                inst.kd = Vector::Constant(1, box(-12.0, 12.0));
                inst.phi = [c, r1, r2](const Vector& u) {
                    return c * (u(0) - r1) * (u(0) - r2);
                };
            } else {  // planar ellipse (u - c)'M(u - c) - 1
                Matrix r(2, 2);
                r << box(-1.0, 1.0), box(-1.0, 1.0), box(-1.0, 1.0), box(-1.0, 1.0);
                const Matrix m = r.transpose() * r + 0.1 * Matrix::Identity(2, 2);
                const Vector c = vec2(box(-5.0, 5.0), box(-5.0, 5.0));
                inst.kd = vec2(box(-10.0, 10.0), box(-10.0, 10.0));
                inst.phi = [m, c](const Vector& u) {
                    const Vector d = u - c;
                    return d.dot(m * d) - 1.0;
                };
            }

            Vector u;
            try {
                u = project_single_constraint(inst.kd, inst.phi, cfg);
            } catch (const std::exception&) {
                continue;
            }
            ++solved;
            if (inst.phi(u) <= kResidualBound) ++feasible;
            const double best =
                inst.kd.size() == 1 ? grid_oracle_1d(inst) : grid_oracle_2d(inst);
            if ((u - inst.kd).norm() <= best + kOracleSlack) ++optimal;
        }
    }
    const double secs = seconds_since(t0);
    const long total = 4L * per_family;
    const bool ok = solved == total && feasible == total && optimal == total && secs < 30.0;
    report(3, ok,
           "solver optimality on " + std::to_string(total) + " instances: solved " +
               std::to_string(solved) + ", feasible " + std::to_string(feasible) +
               ", within oracle slack " + std::to_string(optimal) + " (" + fmt(secs) + "s)");
}

// ---- criterion 5: coercivity constants ------------------------------------

struct CollarCase {
    std::string set;
    double sigma, mu;
    int resolution;
};

bool collar_inequality_holds(const SafeSetSpec& set, const BarrierFamily& b, double sigma,
                             double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int want = 10000;
    int kept = 0;
    long attempts = 0;
    while (kept < want) {
        if (++attempts > 200L * want) return false;  // sampler starved
        Vector x;
        if (set.kind == SafeSetKind::ConfigEllipsoid1d) {
            x = vec2((unit(rng) < 0.5 ? -1.0 : 1.0) * (1.0 + bound * unit(rng)),
                     -5.0 + 10.0 * unit(rng));
        } else if (set.kind == SafeSetKind::Halfspace1d) {
            x = vec2(-0.1 - bound * unit(rng), -5.0 + 10.0 * unit(rng));
        } else if (set.kind == SafeSetKind::ConfigBall2d) {
            Vector dir(2);
            dir << gauss(rng), gauss(rng);
            dir.normalize();
            x = Vector(4);
            x.head(2) = (1.0 + bound * unit(rng)) * dir;
            x(2) = -1.0 + 2.0 * unit(rng);
            x(3) = -1.0 + 2.0 * unit(rng);
        } else {  // lyapunov sublevel set: rejection-sample the collar
            x = vec2(-1.5 + 3.0 * unit(rng), -1.5 + 3.0 * unit(rng));
        }
        const double d = distance_to_set(set, x);
        if (d <= 0.0 || d > bound) continue;
        ++kept;
        if (eval_barrier(b, x) > -0.5 * sigma * d + 1e-12) return false;
    }
    return true;
}

void check_coercivity() {
    const auto t0 = std::chrono::steady_clock::now();
    const double s3 = std::sqrt(3.0);
    const std::vector<CollarCase> cases = {
        {"config_ellipsoid", 2.0, 2.0, 10000},
        {"config_ball", 2.0, 2.0, 10000},
        {"lyapunov", 2.0 * std::sqrt(s3 - 1.0), 2.0 * (s3 + 1.0), 20000},
    };

    bool ok = true;
    std::string detail;
    std::mt19937_64 rng(5u);
    for (const auto& c : cases) {
        const SafeSetSpec set = SafeSetSpec::from_name(c.set);
        const BarrierFamily b = make_barrier(set);
        const auto rep = coercivity_constants(b, set, 0.5, c.resolution);
        const bool match = std::abs(rep.sigma - c.sigma) <= kConstantRelTol * c.sigma &&
                           std::abs(rep.mu - c.mu) <= kConstantRelTol * c.mu;
        const double bound = c.sigma / c.mu;
        const bool collar = collar_inequality_holds(set, b, c.sigma, bound, rng);
        if (!match || !collar) ok = false;
        detail += c.set + " (" + fmt(rep.sigma) + "," + fmt(rep.mu) + ") ";
    }

    // halfspace collar: flat boundary, sigma = 1, no curvature limit
    const SafeSetSpec hs = SafeSetSpec::from_name("halfspace");
    if (!collar_inequality_holds(hs, make_barrier(hs), 1.0, 0.5, rng)) ok = false;

    report(5, ok, "coercivity constants " + detail + "+ collar inequality on 1e4 points/set (" +
                      fmt(seconds_since(t0)) + "s)");
}

// ---- criterion 6: CARE ------------------------------------------------------

void check_care() {
    const Matrix p = care_double_integrator();
    const double s3 = std::sqrt(3.0);
    Matrix want(2, 2);
    want << s3, 1.0, 1.0, s3;

    Matrix a(2, 2), q(2, 2);
    a << 0.0, 1.0, 0.0, 0.0;
    q << 1.0, 0.0, 0.0, 1.0;
    Matrix bbt(2, 2);
    bbt << 0.0, 0.0, 0.0, 1.0;
    const Matrix residual = a.transpose() * p + p * a - p * bbt * p + q;

    const bool ok = (p - want).cwiseAbs().maxCoeff() <= 1e-9 &&
                    residual.cwiseAbs().maxCoeff() <= kCareResidualBound;
    report(6, ok,
           "care solution P=[[sqrt3,1],[1,sqrt3]], residual " +
               fmt(residual.cwiseAbs().maxCoeff()));
}

// ---- criterion 7: convexity probes ----------------------------------------

void check_convexity() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto single = to_control_affine(pendulum_model("single_pendulum"));
    const auto dbl = to_control_affine(pendulum_model("double_pendulum"));
    const auto mid = standard_tableau("midpoint");
    const auto euler = standard_tableau("euler");
    const int trials = 10000;

    Vector x4(4);
    x4 << 0.5, -0.5, 0.4, 0.2;
    const double v1 = convexity_probe(make_barrier(SafeSetSpec::from_name("config_ellipsoid")),
                                      mid, single, vec2(0.8, 2.0), 0.2, trials, 71);
    const double v2 = convexity_probe(make_barrier(SafeSetSpec::from_name("halfspace")), mid,
                                      single, vec2(0.3, -0.4), 0.2, trials, 72);
    const double v3 = convexity_probe(make_barrier(SafeSetSpec::from_name("config_ball")), mid,
                                      dbl, x4, 0.05, trials, 73);
    const double v4 = convexity_probe(make_barrier(SafeSetSpec::from_name("lyapunov")), euler,
                                      single, vec2(0.4, -0.1), 0.2, trials, 74);

    const double worst = std::max(std::max(v1, v2), std::max(v3, v4));
    report(7, worst <= kConvexityBound,
           "convexity probe, 1e4 triples per scenario: worst violation " + fmt(worst) + " (" +
               fmt(seconds_since(t0)) + "s)");
}

// ---- criterion 8: exact-map oracle ----------------------------------------

void check_exact_map() {
    ControlAffineSystem lin;
    lin.state_dim = 1;
    lin.input_dim = 1;
    lin.drift = [](const Vector& x) { return x; };
    lin.actuation = [](const Vector&) { return Matrix::Ones(1, 1); };
    lin.working_region = Box::centered(1, 1e6);

    const ExactMapOracle oracle;
    double worst = 0.0;
    for (double h : log_spaced_periods(0.01, 1.0, 25)) {
        for (double x0 : {-1.5, 0.2, 1.0}) {
            for (double u0 : {-0.7, 0.0, 2.0}) {
                const Vector got =
                    exact_step(oracle, lin, Vector::Constant(1, x0), Vector::Constant(1, u0), h);
                const double want = std::exp(h) * x0 + (std::exp(h) - 1.0) * u0;
                worst = std::max(worst, std::abs(got(0) - want));
            }
        }
    }
    report(8, worst <= kExactMapBound,
           "exact-map oracle vs closed-form linear response: max error " + fmt(worst));
}

// ---- criterion 9: determinism ----------------------------------------------

std::string file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void check_determinism() {
    const auto t0 = std::chrono::steady_clock::now();
    namespace fs = std::filesystem;
    const fs::path base = fs::temp_directory_path() / "sdcbf_acceptance";
    fs::create_directories(base);

    auto run_once = [&](const std::string& tag, int jobs) {
        ScenarioConfig cfg = builtin_scenario("single_halfspace");
        cfg.jobs = jobs;
        cfg.out_dir = (base / tag).string();
        const RunResult res = run_scenario(cfg);
        return std::make_pair(res.exit_code, file_bytes(fs::path(cfg.out_dir) / "summary.csv"));
    };

    const auto [code1, sum1] = run_once("jobs1", 1);
    const auto [code4, sum4] = run_once("jobs4", 4);
    const auto [code1b, sum1b] = run_once("jobs1_rerun", 1);

    const bool ok = code1 == 0 && code4 == 0 && code1b == 0 && !sum1.empty() &&
                    sum1 == sum4 && sum1 == sum1b;
    report(9, ok,
           "summary csv byte-identical across reruns and worker counts (" +
               fmt(seconds_since(t0)) + "s)");
}

}  // namespace

int main() {
    check_consistency();

    const auto sweep_t0 = std::chrono::steady_clock::now();
    const auto sweeps = run_desk_sweeps();
    const double sweep_secs = seconds_since(sweep_t0);
    check_decrement_certificate(sweeps, sweep_secs);
    check_solver_optimality();
    check_safety_trend(sweeps, sweep_secs);
    check_coercivity();
    check_care();
    check_convexity();
    check_exact_map();
    check_determinism();

    if (failures) {
        std::printf("acceptance: %d criterion(s) failed\n", failures);
        return 1;
    }
    std::printf("acceptance: all 9 criteria passed\n");
    return 0;
}
