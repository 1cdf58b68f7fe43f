#include "sdcbf/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "sdcbf/errors.hpp"

namespace sdcbf {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

double parse_double(const std::string& v, const std::string& key, int line) {
    try {
        size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config line " + std::to_string(line) + ": key '" + key +
                          "' needs a number, got '" + v + "'");
    }
}

long parse_long(const std::string& v, const std::string& key, int line) {
    try {
        size_t pos = 0;
        const long d = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config line " + std::to_string(line) + ": key '" + key +
                          "' needs an integer, got '" + v + "'");
    }
}

bool parse_bool(const std::string& v, const std::string& key, int line) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config line " + std::to_string(line) + ": key '" + key +
                      "' needs true/false, got '" + v + "'");
}

Vector parse_vector(const std::string& v, const std::string& key, int line) {
    const auto parts = split(v, ',');
    Vector out(parts.size());
    for (size_t i = 0; i < parts.size(); ++i) {
        out(i) = parse_double(parts[i], key, line);
    }
    return out;
}

std::vector<int> parse_shape(const std::string& v, const std::string& key, int line) {
    const char sep = v.find('x') != std::string::npos ? 'x' : ',';
    std::vector<int> out;
    for (const auto& p : split(v, sep)) {
        out.push_back(static_cast<int>(parse_long(p, key, line)));
    }
    return out;
}

Box ellipse_bounding_box(const Matrix& p) {
    const Matrix pinv = p.inverse();
    Box b;
    b.lo = Vector(2);
    b.hi = Vector(2);
    for (int i = 0; i < 2; ++i) {
        const double half = std::sqrt(pinv(i, i));
        b.lo(i) = -half;
        b.hi(i) = half;
    }
    return b;
}

}  // namespace

std::vector<double> log_spaced_periods(double min, double max, int count) {
    if (!(min > 0.0) || !(max > min) || count < 2) {
        throw ConfigError("log_spaced_periods: need 0 < min < max and count >= 2");
    }
    std::vector<double> out(count);
    const double l0 = std::log(min), l1 = std::log(max);
    for (int i = 0; i < count; ++i) {
        out[i] = std::exp(l0 + (l1 - l0) * i / (count - 1));
    }
    return out;
}

std::vector<std::string> builtin_scenario_names() {
    return {"single_lyapunov", "single_config_ellipsoid", "single_halfspace",
            "double_config_ball"};
}

ScenarioConfig builtin_scenario(const std::string& name) {
    ScenarioConfig cfg;
    cfg.scenario = name;
    cfg.horizon = 10.0;
    if (name == "single_lyapunov") {
        cfg.system = "single_pendulum";
        cfg.safe_set = "lyapunov";
        cfg.tableau = "euler";
        cfg.nominal = "fl_pd";
        cfg.periods = log_spaced_periods(0.05, 0.5);
        cfg.ics.kind = InitialConditionSpec::Kind::UniformInSet;
        cfg.ics.set = SafeSetSpec::from_name("lyapunov");
        const Box bb = ellipse_bounding_box(cfg.ics.set->quadratic_form);
        cfg.ics.lo = bb.lo;
        cfg.ics.hi = bb.hi;
        cfg.ics.count = 100;
        return cfg;
    }
    if (name == "single_config_ellipsoid") {
        cfg.system = "single_pendulum";
        cfg.safe_set = "config_ellipsoid";
        cfg.tableau = "midpoint";
        cfg.nominal = "zero";
        cfg.periods = log_spaced_periods(0.05, 0.5);
        cfg.ics.kind = InitialConditionSpec::Kind::Grid;
        cfg.ics.lo = Vector(2);
        cfg.ics.hi = Vector(2);
        cfg.ics.lo << -1.0, -5.0;
        cfg.ics.hi << 1.0, 5.0;
        cfg.ics.shape = {9, 9};
        return cfg;
    }
    if (name == "single_halfspace") {
        cfg.system = "single_pendulum";
        cfg.safe_set = "halfspace";
        cfg.tableau = "midpoint";
        cfg.nominal = "zero";
        cfg.periods = log_spaced_periods(0.05, 0.5);
        cfg.ics.kind = InitialConditionSpec::Kind::Grid;
        cfg.ics.lo = Vector(2);
        cfg.ics.hi = Vector(2);
        cfg.ics.lo << -0.1, -5.0;
        cfg.ics.hi << 1.0, 5.0;
        cfg.ics.shape = {9, 9};
        return cfg;
    }
    if (name == "double_config_ball") {
        cfg.system = "double_pendulum";
        cfg.safe_set = "config_ball";
        cfg.tableau = "midpoint";
        cfg.nominal = "zero";
        cfg.periods = log_spaced_periods(0.01, 0.1);
        cfg.ics.kind = InitialConditionSpec::Kind::UniformInSet;
        cfg.ics.set = SafeSetSpec::from_name("config_ball");
        cfg.ics.lo = Vector::Constant(4, -1.0);
        cfg.ics.hi = Vector::Constant(4, 1.0);
        cfg.ics.count = 100;
        return cfg;
    }
    std::string names;
    for (const auto& n : builtin_scenario_names()) names += " " + n;
    throw ConfigError("unknown scenario '" + name + "'; builtins:" + names);
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");

    struct Entry {
        std::string value;
        int line;
    };
    std::vector<std::pair<std::string, Entry>> entries;
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw = raw.substr(0, hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected 'key = value', got '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        }
        entries.emplace_back(key, Entry{value, lineno});
    }
    if (entries.empty()) {
        throw ConfigError("config '" + path + "' is empty: a scenario name is required");
    }

    ScenarioConfig cfg;
    bool have_base = false;
    for (const auto& [key, e] : entries) {
        if (key == "scenario") {
            cfg = builtin_scenario(e.value);
            have_base = true;
            break;
        }
    }
    if (!have_base) {
        bool have_parts = false;
        for (const auto& [key, e] : entries) {
            if (key == "system") have_parts = true;
        }
        if (!have_parts) {
            throw ConfigError("config '" + path +
                              "': set 'scenario = <builtin>' or a full explicit setup "
                              "starting with 'system = ...'");
        }
    }

    std::optional<double> pmin, pmax;
    std::optional<int> pcount;
    for (const auto& [key, e] : entries) {
        const std::string& v = e.value;
        const int ln = e.line;
        if (key == "scenario") {
            continue;  // applied above
        } else if (key == "system") {
            cfg.system = v;
        } else if (key == "safe_set") {
            cfg.safe_set = v;
        } else if (key == "tableau") {
            cfg.tableau = v;
        } else if (key == "tableau.weights") {
            cfg.tableau_weights = parse_vector(v, key, ln);
        } else if (key == "tableau.coeffs") {
            const auto rows = split(v, ';');
            Matrix a(rows.size(), rows.size());
            for (size_t r = 0; r < rows.size(); ++r) {
                const Vector row = parse_vector(rows[r], key, ln);
                if (row.size() != static_cast<Eigen::Index>(rows.size())) {
                    throw ConfigError("config line " + std::to_string(ln) +
                                      ": tableau.coeffs must be square");
                }
                a.row(r) = row;
            }
            cfg.tableau_coeffs = a;
        } else if (key == "nominal") {
            cfg.nominal = v;
        } else if (key == "alpha") {
            cfg.alpha = v;
        } else if (key == "alpha.gain") {
            cfg.alpha_gain = parse_double(v, key, ln);
        } else if (key == "periods.values") {
            const Vector vals = parse_vector(v, key, ln);
            cfg.periods.assign(vals.data(), vals.data() + vals.size());
        } else if (key == "periods.min") {
            pmin = parse_double(v, key, ln);
        } else if (key == "periods.max") {
            pmax = parse_double(v, key, ln);
        } else if (key == "periods.count") {
            pcount = static_cast<int>(parse_long(v, key, ln));
        } else if (key == "horizon") {
            cfg.horizon = parse_double(v, key, ln);
        } else if (key == "ic.kind") {
            if (v == "grid") {
                cfg.ics.kind = InitialConditionSpec::Kind::Grid;
            } else if (v == "uniform_in_set") {
                cfg.ics.kind = InitialConditionSpec::Kind::UniformInSet;
            } else {
                throw ConfigError("config line " + std::to_string(ln) +
                                  ": ic.kind must be grid or uniform_in_set");
            }
        } else if (key == "ic.count") {
            cfg.ics.count = static_cast<int>(parse_long(v, key, ln));
            cfg.ics_overridden = true;
        } else if (key == "ic.shape") {
            cfg.ics.shape = parse_shape(v, key, ln);
            cfg.ics_overridden = true;
        } else if (key == "ic.lo") {
            cfg.ics.lo = parse_vector(v, key, ln);
        } else if (key == "ic.hi") {
            cfg.ics.hi = parse_vector(v, key, ln);
        } else if (key == "seed") {
            cfg.seed = static_cast<std::uint64_t>(parse_long(v, key, ln));
        } else if (key == "out") {
            cfg.out_dir = v;
        } else if (key == "jobs") {
            cfg.jobs = static_cast<int>(parse_long(v, key, ln));
        } else if (key == "full_scale") {
            cfg.full_scale = parse_bool(v, key, ln);
        } else if (key == "diagnostics.intersample") {
            cfg.intersample = parse_bool(v, key, ln);
        } else if (key == "solver.feas_tol") {
            cfg.solver.feas_tol = parse_double(v, key, ln);
        } else if (key == "solver.kkt_tol") {
            cfg.solver.kkt_tol = parse_double(v, key, ln);
        } else if (key == "solver.max_newton_iters") {
            cfg.solver.max_newton_iters = static_cast<int>(parse_long(v, key, ln));
        } else if (key == "solver.bracket_growth") {
            cfg.solver.bracket_growth = parse_double(v, key, ln);
        } else {
            throw ConfigError("config line " + std::to_string(ln) + ": unknown key '" + key +
                              "'");
        }
    }
    if (pmin || pmax || pcount) {
        if (!(pmin && pmax)) {
            throw ConfigError("config '" + path + "': periods.min and periods.max go together");
        }
        cfg.periods = log_spaced_periods(*pmin, *pmax, pcount.value_or(11));
    }

    if (const char* env = std::getenv("SDCBF_SEED")) {
        try {
            cfg.seed = std::stoull(env);
        } catch (const std::exception&) {
            throw ConfigError("SDCBF_SEED must be an unsigned integer, got '" +
                              std::string(env) + "'");
        }
    }
    return cfg;
}

ScenarioSetup build_setup(const ScenarioConfig& cfg) {
    if (cfg.system.empty() || cfg.safe_set.empty() || cfg.tableau.empty() ||
        cfg.nominal.empty()) {
        throw ConfigError("scenario is missing system/safe_set/tableau/nominal");
    }
    if (cfg.periods.empty()) throw ConfigError("scenario has no sample periods");
    for (double h : cfg.periods) {
        if (!(h > 0.0)) throw ConfigError("sample periods must be positive");
    }

    ScenarioSetup sc;
    sc.name = cfg.scenario.empty() ? cfg.system + "_" + cfg.safe_set : cfg.scenario;
    const MechanicalSystem mech = pendulum_model(cfg.system);
    sc.system = to_control_affine(mech);
    const SafeSetSpec set = SafeSetSpec::from_name(cfg.safe_set);
    if (set.state_dim() != sc.system.state_dim) {
        throw ConfigError("safe set '" + cfg.safe_set + "' expects state dimension " +
                          std::to_string(set.state_dim()) + " but system '" + cfg.system +
                          "' has " + std::to_string(sc.system.state_dim));
    }
    sc.safe_set = set;
    sc.barrier = make_barrier(set, alpha_from_name(cfg.alpha, cfg.alpha_gain));
    if (cfg.tableau == "custom") {
        if (!cfg.tableau_weights || !cfg.tableau_coeffs) {
            throw ConfigError("tableau = custom needs tableau.weights and tableau.coeffs");
        }
        sc.tableau = ButcherTableau::make("custom", *cfg.tableau_weights, *cfg.tableau_coeffs);
    } else {
        sc.tableau = standard_tableau(cfg.tableau);
    }
    sc.nominal = make_nominal(cfg.nominal, mech);
    sc.solver = cfg.solver;
    sc.horizon = cfg.horizon;
    return sc;
}

std::vector<Vector> build_initial_conditions(const ScenarioConfig& cfg) {
    InitialConditionSpec spec = cfg.ics;
    spec.seed = cfg.seed;
    if (cfg.full_scale && !cfg.ics_overridden) {
        if (spec.kind == InitialConditionSpec::Kind::Grid) {
            spec.shape.assign(spec.shape.size(), 41);
        } else {
            spec.count = 500;
        }
    }
    return sample_initial_conditions(spec);
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return 2;
    if (dynamic_cast<const SolverError*>(&e)) return 3;  // includes SdcbfViolation
    if (dynamic_cast<const IntegrationError*>(&e)) return 4;
    return 1;
}

namespace {

std::string describe_ics(const ScenarioConfig& cfg) {
    std::ostringstream os;
    if (cfg.ics.kind == InitialConditionSpec::Kind::Grid) {
        os << "grid";
        for (size_t i = 0; i < cfg.ics.shape.size(); ++i) {
            os << (i == 0 ? " " : "x") << cfg.ics.shape[i];
        }
    } else {
        os << "uniform_in_set count=" << cfg.ics.count;
    }
    return os.str();
}

}  // namespace

RunResult run_scenario(const ScenarioConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const ScenarioSetup sc = build_setup(cfg);
    const std::vector<Vector> ics = build_initial_conditions(cfg);

    namespace fs = std::filesystem;
    const fs::path dir = cfg.out_dir.empty() ? fs::path("runs") / sc.name : fs::path(cfg.out_dir);
    fs::create_directories(dir);

    std::ofstream traj(dir / "trajectories.csv");
    if (!traj) throw ConfigError("cannot write to output directory '" + dir.string() + "'");
    write_trajectory_header(traj);

    long solver_failures = 0, integration_failures = 0;
    TrajectorySink sink = [&](int pi, int trial, const TrajectoryRecord& rec) {
        write_trajectory_rows(traj, sc.name, cfg.periods[pi], trial, rec);
        if (rec.failure == RolloutFailure::Solver ||
            rec.failure == RolloutFailure::SdcbfViolation) {
            ++solver_failures;
        } else if (rec.failure == RolloutFailure::Integration) {
            ++integration_failures;
        }
    };

    RolloutOptions opt;
    opt.intersample_diagnostic = cfg.intersample;
    RunResult res;
    res.rows = sweep_max_distance(sc, ics, cfg.periods, cfg.jobs, opt, sink);
    traj.close();

    std::ofstream summary(dir / "summary.csv");
    write_summary_csv(summary, sc.name, res.rows);
    summary.close();

    std::ofstream dat(dir / "max_distance.dat");
    write_curve_dat(dat, sc.name, res.rows);
    dat.close();

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ofstream manifest(dir / "manifest.txt");
    manifest << "toolkit_version = " << kToolkitVersion << "\n";
    manifest << "scenario = " << sc.name << "\n";
    manifest << "system = " << cfg.system << "\n";
    manifest << "safe_set = " << cfg.safe_set << "\n";
    manifest << "tableau = " << cfg.tableau << "\n";
    manifest << "nominal = " << cfg.nominal << "\n";
    manifest << "alpha = " << cfg.alpha << "\n";
    manifest << "horizon = " << format_double(cfg.horizon) << "\n";
    manifest << "seed = " << cfg.seed << "\n";
    manifest << "jobs = " << cfg.jobs << "\n";
    manifest << "full_scale = " << (cfg.full_scale ? "true" : "false") << "\n";
    manifest << "initial_conditions = " << describe_ics(cfg) << " (" << ics.size() << " states)\n";
    manifest << "periods =";
    for (double h : cfg.periods) manifest << " " << format_double(h);
    manifest << "\n";
    manifest << "solver.feas_tol = " << format_double(cfg.solver.feas_tol) << "\n";
    manifest << "solver.kkt_tol = " << format_double(cfg.solver.kkt_tol) << "\n";
    manifest << "solver.max_newton_iters = " << cfg.solver.max_newton_iters << "\n";
    manifest << "solver.bracket_growth = " << format_double(cfg.solver.bracket_growth) << "\n";
    manifest << "solver_failures = " << solver_failures << "\n";
    manifest << "integration_failures = " << integration_failures << "\n";
    manifest << "wall_time_s = " << format_double(wall) << "\n";
    manifest << "artifacts = trajectories.csv summary.csv max_distance.dat\n";
    manifest.close();

    res.artifacts = {(dir / "trajectories.csv").string(), (dir / "summary.csv").string(),
                     (dir / "max_distance.dat").string(), (dir / "manifest.txt").string()};
    res.exit_code = solver_failures > 0 ? 3 : (integration_failures > 0 ? 4 : 0);
    return res;
}

}  // namespace sdcbf
