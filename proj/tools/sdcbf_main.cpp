#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sdcbf/errors.hpp"
#include "sdcbf/harness.hpp"

namespace {

using namespace sdcbf;

struct CommonArgs {
    std::string config_path;
    std::string scenario;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int jobs = -1;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "config file (key = value lines)");
        cmd->add_option("--scenario", scenario, "builtin scenario name");
        cmd->add_option("--out", out, "output directory");
        cmd->add_option("--seed", seed, "RNG seed (overrides config and SDCBF_SEED)")
            ->each([this](const std::string&) { seed_set = true; });
        cmd->add_option("--jobs", jobs, "worker threads, 0 = all cores");
    }

    ScenarioConfig resolve() const {
        ScenarioConfig cfg;
        if (!config_path.empty()) {
            cfg = load_config(config_path);
        } else if (!scenario.empty()) {
            cfg = builtin_scenario(scenario);
            if (const char* env = std::getenv("SDCBF_SEED")) {
                try {
                    cfg.seed = std::stoull(env);
                } catch (const std::exception&) {
                    throw ConfigError("SDCBF_SEED must be an unsigned integer, got '" +
                                      std::string(env) + "'");
                }
            }
        } else {
            throw ConfigError("pass --config FILE or --scenario NAME");
        }
        if (seed_set) cfg.seed = seed;
        if (!out.empty()) cfg.out_dir = out;
        if (jobs >= 0) cfg.jobs = jobs;
        return cfg;
    }
};

Vector parse_state(const std::string& text) {
    std::vector<double> vals;
    std::string cur;
    for (char c : text + ",") {
        if (c == ',') {
            if (!cur.empty()) vals.push_back(std::stod(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    Vector x(vals.size());
    for (size_t i = 0; i < vals.size(); ++i) x(i) = vals[i];
    return x;
}

int cmd_sweep(const CommonArgs& args, bool full_scale) {
    ScenarioConfig cfg = args.resolve();
    if (full_scale) cfg.full_scale = true;
    const RunResult res = run_scenario(cfg);
    std::cout << "scenario " << (cfg.scenario.empty() ? cfg.system : cfg.scenario) << ": "
              << res.rows.size() << " periods\n";
    for (const auto& row : res.rows) {
        std::cout << "  h=" << format_double(row.h)
                  << " max_distance=" << format_double(row.max_distance)
                  << " failures=" << row.n_failures << "\n";
    }
    for (const auto& a : res.artifacts) std::cout << "wrote " << a << "\n";
    return res.exit_code;
}

int cmd_simulate(const CommonArgs& args, const std::string& x0_text, double h) {
    const ScenarioConfig cfg = args.resolve();
    const ScenarioSetup sc = build_setup(cfg);
    Vector x0;
    if (!x0_text.empty()) {
        x0 = parse_state(x0_text);
    } else {
        const auto ics = build_initial_conditions(cfg);
        x0 = ics.front();
    }
    const double period = h > 0.0 ? h : cfg.periods.front();

    const TrajectoryRecord rec = simulate_closed_loop(sc, x0, period);

    namespace fs = std::filesystem;
    const fs::path dir = cfg.out_dir.empty() ? fs::path("runs") / sc.name : fs::path(cfg.out_dir);
    fs::create_directories(dir);
    std::ofstream out(dir / "trajectory.csv");
    write_trajectory_header(out);
    write_trajectory_rows(out, sc.name, period, 0, rec);
    out.close();

    double max_d = 0.0;
    for (double d : rec.distances) max_d = std::max(max_d, d);
    std::cout << "steps=" << rec.inputs.size() << " max_distance=" << format_double(max_d)
              << " admissible=" << (rec.admissibility_ok ? "yes" : "no") << "\n";
    std::cout << "wrote " << (dir / "trajectory.csv").string() << "\n";
    switch (rec.failure) {
        case RolloutFailure::None:
            return 0;
        case RolloutFailure::Integration:
            std::cerr << "integration failure: " << rec.failure_detail << "\n";
            return 4;
        default:
            std::cerr << "solver failure: " << rec.failure_detail << "\n";
            return 3;
    }
}

int cmd_consistency(const CommonArgs& args, double hmin, double hmax, int hcount,
                    int grid_per_dim) {
    const ScenarioConfig cfg = args.resolve();
    const ScenarioSetup sc = build_setup(cfg);

    InitialConditionSpec grid_spec;
    grid_spec.kind = InitialConditionSpec::Kind::Grid;
    grid_spec.lo = Vector::Constant(sc.system.state_dim, -1.0);
    grid_spec.hi = Vector::Constant(sc.system.state_dim, 1.0);
    grid_spec.shape.assign(sc.system.state_dim, grid_per_dim);
    const auto grid = sample_initial_conditions(grid_spec);

    auto zero = [m = sc.system.input_dim](const Vector&) { return Vector::Zero(m); };
    const auto periods = log_spaced_periods(hmin, hmax, hcount);
    const ConsistencyFit fit =
        consistency_order(sc.system, zero, sc.tableau, sc.oracle, grid, periods);

    std::cout << "tableau=" << sc.tableau.name << " slope=" << format_double(fit.slope) << "\n";
    for (size_t i = 0; i < periods.size(); ++i) {
        std::cout << "  h=" << format_double(periods[i])
                  << " max_error=" << format_double(fit.max_errors[i]) << "\n";
    }
    if (!args.out.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(args.out);
        std::ofstream out(fs::path(args.out) / "consistency.csv");
        out << "h,max_error\n";
        for (size_t i = 0; i < periods.size(); ++i) {
            out << format_double(periods[i]) << ',' << format_double(fit.max_errors[i]) << '\n';
        }
        std::cout << "wrote " << (fs::path(args.out) / "consistency.csv").string() << "\n";
    }
    return 0;
}

int cmd_verify_barrier(const CommonArgs& args, double collar, int resolution) {
    const ScenarioConfig cfg = args.resolve();
    const ScenarioSetup sc = build_setup(cfg);
    const CoercivityReport rep = coercivity_constants(sc.barrier, sc.safe_set, collar, resolution);
    const std::string text = rep.to_text(sc.safe_set.name());
    std::cout << text;
    if (!args.out.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(args.out);
        std::ofstream out(fs::path(args.out) / "coercivity.txt");
        out << text;
        std::cout << "wrote " << (fs::path(args.out) / "coercivity.txt").string() << "\n";
    }
    return 0;
}

int cmd_probe_convexity(const CommonArgs& args, int trials, double h) {
    const ScenarioConfig cfg = args.resolve();
    const ScenarioSetup sc = build_setup(cfg);
    auto states = build_initial_conditions(cfg);
    if (states.size() > 10) states.resize(10);
    const double period = h > 0.0 ? h : cfg.periods.front();
    const int per_state = std::max(1, trials / static_cast<int>(states.size()));

    double worst = -1e300;
    for (size_t i = 0; i < states.size(); ++i) {
        worst = std::max(worst, convexity_probe(sc.barrier, sc.tableau, sc.system, states[i],
                                                period, per_state, cfg.seed + i));
    }
    std::cout << "max_violation=" << format_double(worst) << " (h=" << format_double(period)
              << ", " << states.size() << " states x " << per_state << " triples)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sampled-data safety filter toolkit"};
    app.require_subcommand(1);

    CommonArgs sweep_args, sim_args, cons_args, verify_args, probe_args;

    auto* sweep = app.add_subcommand("sweep", "closed-loop sweep over periods and initial states");
    sweep_args.attach(sweep);
    bool full_scale = false;
    sweep->add_flag("--full-scale", full_scale, "full-size initial-condition populations");

    auto* sim = app.add_subcommand("simulate", "single closed-loop rollout");
    sim_args.attach(sim);
    std::string x0_text;
    double sim_h = 0.0;
    sim->add_option("--x0", x0_text, "initial state, comma separated");
    sim->add_option("--period", sim_h, "sample period (default: smallest scenario period)");

    auto* cons = app.add_subcommand("consistency", "one-step error order measurement");
    cons_args.attach(cons);
    double hmin = 1e-4, hmax = 1e-2;
    int hcount = 9, grid_per_dim = 9;
    cons->add_option("--hmin", hmin, "smallest period");
    cons->add_option("--hmax", hmax, "largest period");
    cons->add_option("--hcount", hcount, "number of periods");
    cons->add_option("--grid", grid_per_dim, "grid points per state dimension on [-1,1]^n");

    auto* verify = app.add_subcommand("verify-barrier", "coercivity constants report");
    verify_args.attach(verify);
    double collar = 0.5;
    int resolution = 10000;
    verify->add_option("--collar", collar, "collar width eps'");
    verify->add_option("--resolution", resolution, "boundary/collar sample count");

    auto* probe = app.add_subcommand("probe-convexity", "decrement-residual convexity probe");
    probe_args.attach(probe);
    int trials = 10000;
    double probe_h = 0.0;
    probe->add_option("--trials", trials, "total sampled triples");
    probe->add_option("--period", probe_h, "sample period (default: smallest scenario period)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (sweep->parsed()) return cmd_sweep(sweep_args, full_scale);
        if (sim->parsed()) return cmd_simulate(sim_args, x0_text, sim_h);
        if (cons->parsed()) return cmd_consistency(cons_args, hmin, hmax, hcount, grid_per_dim);
        if (verify->parsed()) return cmd_verify_barrier(verify_args, collar, resolution);
        if (probe->parsed()) return cmd_probe_convexity(probe_args, trials, probe_h);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return sdcbf::exit_code_for(e);
    }
    return 0;
}
