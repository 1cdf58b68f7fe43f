#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sdcbf/analysis.hpp"
#include "sdcbf/types.hpp"

namespace sdcbf {

/// Resolved experiment description. Built from a builtin scenario name plus
/// overrides in a flat key=value config file with dotted sections.
struct ScenarioConfig {
    std::string scenario;  // builtin name, empty for fully explicit configs
    std::string system;
    std::string safe_set;
    std::string tableau;
    std::string nominal;
    std::string alpha = "identity";
    double alpha_gain = 1.0;
    std::optional<Vector> tableau_weights;  // explicit (b, a) override
    std::optional<Matrix> tableau_coeffs;
    std::vector<double> periods;
    double horizon = 10.0;
    InitialConditionSpec ics;
    bool ics_overridden = false;  // config set ic.count / ic.shape explicitly
    std::uint64_t seed = 1;
    std::string out_dir;
    SolverConfig solver;
    int jobs = 0;        // 0 = hardware concurrency
    bool full_scale = false;  // 41x41 grids / 500 draws instead of desk scale
    bool intersample = false;
};

/// Builtin experiment definitions (desk-scale initial-condition populations):
///   single_lyapunov          euler tableau, fl_pd nominal, uniform in the set
///   single_config_ellipsoid  midpoint, zero nominal, 9x9 grid on [-1,1]x[-5,5]
///   single_halfspace         midpoint, zero nominal, 9x9 grid on [-0.1,1]x[-5,5]
///   double_config_ball       midpoint, zero nominal, uniform in the set
ScenarioConfig builtin_scenario(const std::string& name);
std::vector<std::string> builtin_scenario_names();

/// Parses a config file. Lines are `key = value`, `#` starts a comment,
/// unknown keys are rejected with their line number, an empty file is an
/// error (a scenario name or a full explicit setup is required). The
/// SDCBF_SEED environment variable overrides the seed.
ScenarioConfig load_config(const std::string& path);

/// 11 logarithmically spaced periods over [min, max].
std::vector<double> log_spaced_periods(double min, double max, int count = 11);

ScenarioSetup build_setup(const ScenarioConfig& cfg);
std::vector<Vector> build_initial_conditions(const ScenarioConfig& cfg);

struct RunResult {
    int exit_code = 0;
    std::vector<SweepRow> rows;
    std::vector<std::string> artifacts;
};

/// Full sweep for one scenario: writes trajectories.csv, summary.csv,
/// max_distance.dat (gnuplot) and manifest.txt under cfg.out_dir. Returns
/// exit code 0 on success, 3 when any trajectory hit a solver/SD-CBF
/// failure, 4 for integration failures.
RunResult run_scenario(const ScenarioConfig& cfg);

/// Process exit code for an escaped error: 2 config, 3 solver/SD-CBF
/// violation, 4 integration, 1 anything else.
int exit_code_for(const std::exception& e);

}  // namespace sdcbf
