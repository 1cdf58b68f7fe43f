#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sdcbf/barrier.hpp"
#include "sdcbf/controller.hpp"
#include "sdcbf/discretization.hpp"
#include "sdcbf/dynamics.hpp"
#include "sdcbf/types.hpp"

namespace sdcbf {

/// Everything a closed-loop experiment needs, assembled once per scenario.
struct ScenarioSetup {
    std::string name;
    ControlAffineSystem system;
    BarrierFamily barrier;
    SafeSetSpec safe_set;
    ButcherTableau tableau;
    std::function<Vector(const Vector&)> nominal;
    SolverConfig solver;
    ExactMapOracle oracle;
    double horizon = 10.0;
};

enum class RolloutFailure { None, Solver, SdcbfViolation, Integration };

/// Sampled closed-loop trajectory. Lengths always satisfy
/// |states| == |inputs| + 1 == |sample_times|; failed rollouts truncate at the
/// failing step and carry the failure annotation.
struct TrajectoryRecord {
    std::vector<double> sample_times;
    std::vector<Vector> states;
    std::vector<Vector> inputs;
    std::vector<double> barrier_values;       // s(x_k), one per state
    std::vector<double> decrement_residuals;  // phi(x_k, u_k), one per input
    std::vector<double> distances;            // d_C(x_k), one per state
    std::vector<std::uint8_t> admissible;     // per state: path stayed in the working region
    bool admissibility_ok = true;
    RolloutFailure failure = RolloutFailure::None;
    std::string failure_detail;
    std::vector<double> intersample_peak_distances;  // diagnostic only, empty unless requested
};

struct RolloutOptions {
    bool intersample_diagnostic = false;  // record inter-sample distance peaks (non-normative)
    int intersample_points = 10;
};

/// Rolls the sampled-data loop x_{k+1} = exact_step(x_k, filter(x_k), h) for
/// floor(horizon / h) steps, logging barrier values, residuals and distances.
TrajectoryRecord simulate_closed_loop(const ScenarioSetup& sc, const Vector& x0, double h,
                                      const RolloutOptions& opt = {});

struct InitialConditionSpec {
    enum class Kind { Grid, UniformInSet } kind = Kind::Grid;
    Vector lo, hi;                   // sampling box (both kinds)
    std::vector<int> shape;          // grid points per dimension, endpoints included
    int count = 100;                 // UniformInSet draw count
    std::optional<SafeSetSpec> set;  // UniformInSet membership region
    std::uint64_t seed = 0;
};

/// Grid: row-major lattice over [lo, hi] including the endpoints.
/// UniformInSet: seeded rejection sampling from the box, keeping states with
/// nonnegative barrier value; throws SamplingError when the acceptance rate
/// collapses below 1e-3.
std::vector<Vector> sample_initial_conditions(const InitialConditionSpec& spec);

struct SweepRow {
    double h = 0.0;
    double max_distance = 0.0;  // worst sampled d_C over all trials
    long n_failures = 0;
    double max_residual = 0.0;  // worst recorded decrement residual
    double min_barrier = 0.0;   // most negative sampled s
};

using TrajectorySink =
    std::function<void(int period_index, int trial_index, const TrajectoryRecord&)>;

/// Runs every initial condition at every period and aggregates worst-case
/// sampled distances. Trials within one period run on `jobs` workers
/// (0 = hardware concurrency); results and sink order do not depend on the
/// worker count. Per-trajectory failures land in n_failures, not exceptions.
std::vector<SweepRow> sweep_max_distance(const ScenarioSetup& sc,
                                         const std::vector<Vector>& initial_conditions,
                                         const std::vector<double>& periods, int jobs = 0,
                                         const RolloutOptions& opt = {},
                                         const TrajectorySink& sink = nullptr);

struct ConsistencyFit {
    double slope = 0.0;      // log-log order estimate
    double intercept = 0.0;
    std::vector<double> max_errors;  // max one-step error per period, grid-wide
};

/// Measures max one-step error over a state grid for each period and fits
/// log E against log h by least squares.
ConsistencyFit consistency_order(const ControlAffineSystem& sys,
                                 const std::function<Vector(const Vector&)>& controller,
                                 const ButcherTableau& tab, const ExactMapOracle& oracle,
                                 const std::vector<Vector>& grid,
                                 const std::vector<double>& periods);

struct InvarianceResult {
    bool ok = true;
    std::ptrdiff_t first_violation = -1;  // sample index with s < -delta
};

/// True iff every recorded barrier value stays at or above -delta.
InvarianceResult invariance_check(const TrajectoryRecord& rec, double delta);

/// Max convexity violation phi(l u1 + (1-l) u2) - l phi(u1) - (1-l) phi(u2)
/// over seeded random input pairs and interpolation weights at state x.
/// Requires block structure with stages == chain_length - blocks_used + 1.
double convexity_probe(const BarrierFamily& b, const ButcherTableau& tab,
                       const ControlAffineSystem& sys, const Vector& x, double h, int trials,
                       std::uint64_t seed);

/// CSV/plot emission. All floats are printed with "%.15g" so repeated runs
/// are byte-identical.
std::string format_double(double v);
void write_trajectory_header(std::ostream& os);
void write_trajectory_rows(std::ostream& os, const std::string& scenario, double h, int trial,
                           const TrajectoryRecord& rec);
void write_summary_csv(std::ostream& os, const std::string& scenario,
                       const std::vector<SweepRow>& rows);
void write_curve_dat(std::ostream& os, const std::string& scenario,
                     const std::vector<SweepRow>& rows);

}  // namespace sdcbf
