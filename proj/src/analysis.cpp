#include "sdcbf/analysis.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <ostream>
#include <random>
#include <thread>

#include "sdcbf/errors.hpp"

namespace sdcbf {

TrajectoryRecord simulate_closed_loop(const ScenarioSetup& sc, const Vector& x0, double h,
                                      const RolloutOptions& opt) {
    if (!(h > 0.0)) throw NumericError("simulate_closed_loop: sample period must be positive");
    if (!(sc.horizon > 0.0)) throw NumericError("simulate_closed_loop: horizon must be positive");
    if (x0.size() != sc.system.state_dim) {
        throw NumericError("simulate_closed_loop: initial state dimension mismatch");
    }

    const long steps = static_cast<long>(std::floor(sc.horizon / h + 1e-9));
    SdcbfController ctrl{sc.nominal, sc.barrier, sc.tableau, sc.system, sc.solver};

    TrajectoryRecord rec;
    rec.sample_times.reserve(steps + 1);
    rec.states.reserve(steps + 1);
    Vector x = x0;
    rec.sample_times.push_back(0.0);
    rec.states.push_back(x);
    rec.barrier_values.push_back(eval_barrier(sc.barrier, x));
    rec.distances.push_back(distance_to_set(sc.safe_set, x));
    rec.admissible.push_back(sc.system.working_region.contains(x) ? 1 : 0);

    for (long k = 0; k < steps; ++k) {
        Vector u;
        try {
            u = sdcbf_filter(ctrl, x, h);
        } catch (const SdcbfViolation& e) {
            rec.failure = RolloutFailure::SdcbfViolation;
            rec.failure_detail = e.what();
            break;
        } catch (const SolverError& e) {
            rec.failure = RolloutFailure::Solver;
            rec.failure_detail = e.what();
            break;
        }
        const double residual = decrement_residual(sc.barrier, sc.tableau, sc.system, x, u, h);

        ExactMapOracle::Result step;
        try {
            step = sc.oracle.integrate(sc.system, x, u, h);
        } catch (const IntegrationError& e) {
            rec.failure = RolloutFailure::Integration;
            rec.failure_detail = e.what();
            break;
        }

        if (opt.intersample_diagnostic) {
            double peak = 0.0;
            for (int j = 1; j <= opt.intersample_points; ++j) {
                const double tau = h * j / opt.intersample_points;
                const Vector xj = exact_step(sc.oracle, sc.system, x, u, tau);
                peak = std::max(peak, distance_to_set(sc.safe_set, xj));
            }
            rec.intersample_peak_distances.push_back(peak);
        }

        rec.inputs.push_back(u);
        rec.decrement_residuals.push_back(residual);
        x = step.state;
        rec.sample_times.push_back(static_cast<double>(k + 1) * h);
        rec.states.push_back(x);
        rec.barrier_values.push_back(eval_barrier(sc.barrier, x));
        rec.distances.push_back(distance_to_set(sc.safe_set, x));
        const bool still_admissible = rec.admissible.back() == 1 && step.admissible;
        rec.admissible.push_back(still_admissible ? 1 : 0);
    }

    rec.admissibility_ok = !rec.admissible.empty() && rec.admissible.back() == 1;
    return rec;
}

std::vector<Vector> sample_initial_conditions(const InitialConditionSpec& spec) {
    const Eigen::Index dim = spec.lo.size();
    if (spec.hi.size() != dim || dim == 0) {
        throw ConfigError("sample_initial_conditions: box bounds missing or mismatched");
    }
    if ((spec.hi.array() < spec.lo.array()).any()) {
        throw ConfigError("sample_initial_conditions: box upper bound below lower bound");
    }

    std::vector<Vector> out;
    if (spec.kind == InitialConditionSpec::Kind::Grid) {
        if (spec.shape.size() != static_cast<size_t>(dim)) {
            throw ConfigError("sample_initial_conditions: grid shape rank mismatch");
        }
        long total = 1;
        for (int n : spec.shape) {
            if (n < 1) throw ConfigError("sample_initial_conditions: grid shape entries must be >= 1");
            total *= n;
        }
        out.reserve(total);
        std::vector<int> idx(dim, 0);
        for (long lin = 0; lin < total; ++lin) {
            Vector x(dim);
            for (Eigen::Index d = 0; d < dim; ++d) {
                const int n = spec.shape[d];
                x(d) = n == 1 ? spec.lo(d)
                              : spec.lo(d) + (spec.hi(d) - spec.lo(d)) * idx[d] / (n - 1);
            }
            out.push_back(x);
            for (Eigen::Index d = dim - 1; d >= 0; --d) {  // row-major: last index fastest
                if (++idx[d] < spec.shape[d]) break;
                idx[d] = 0;
            }
        }
        return out;
    }

    if (!spec.set) {
        throw ConfigError("sample_initial_conditions: uniform_in_set needs a safe set");
    }
    const BarrierFamily b = make_barrier(*spec.set);
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    out.reserve(spec.count);
    long attempts = 0;
    const long attempt_limit = 1000 + 1000L * spec.count;
    while (static_cast<int>(out.size()) < spec.count) {
        if (++attempts > attempt_limit) {
            throw SamplingError("sample_initial_conditions: acceptance rate below 1e-3");
        }
        Vector x(dim);
        for (Eigen::Index d = 0; d < dim; ++d) {
            x(d) = spec.lo(d) + (spec.hi(d) - spec.lo(d)) * unit(rng);
        }
        if (eval_barrier(b, x) >= 0.0) out.push_back(x);
    }
    return out;
}

namespace {

void parallel_for(long n, int jobs, const std::function<void(long)>& body) {
    int workers = jobs > 0 ? jobs : static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    workers = static_cast<int>(std::min<long>(workers, n));
    if (workers <= 1) {
        for (long i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<long> next{0};
    std::exception_ptr first_error = nullptr;
    std::mutex error_mutex;
    auto run = [&] {
        while (true) {
            const long i = next.fetch_add(1);
            if (i >= n) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

std::vector<SweepRow> sweep_max_distance(const ScenarioSetup& sc,
                                         const std::vector<Vector>& initial_conditions,
                                         const std::vector<double>& periods, int jobs,
                                         const RolloutOptions& opt, const TrajectorySink& sink) {
    std::vector<SweepRow> rows;
    rows.reserve(periods.size());
    const long trials = static_cast<long>(initial_conditions.size());

    for (size_t pi = 0; pi < periods.size(); ++pi) {
        const double h = periods[pi];
        std::vector<TrajectoryRecord> records(trials);
        parallel_for(trials, jobs, [&](long i) {
            records[i] = simulate_closed_loop(sc, initial_conditions[i], h, opt);
        });

        SweepRow row;
        row.h = h;
        row.max_distance = 0.0;
        row.max_residual = -std::numeric_limits<double>::infinity();
        row.min_barrier = std::numeric_limits<double>::infinity();
        for (long i = 0; i < trials; ++i) {
            const TrajectoryRecord& r = records[i];
            for (double d : r.distances) row.max_distance = std::max(row.max_distance, d);
            for (double phi : r.decrement_residuals) {
                row.max_residual = std::max(row.max_residual, phi);
            }
            for (double s : r.barrier_values) row.min_barrier = std::min(row.min_barrier, s);
            if (r.failure != RolloutFailure::None) ++row.n_failures;
            if (sink) sink(static_cast<int>(pi), static_cast<int>(i), r);
        }
        rows.push_back(row);
    }
    return rows;
}

ConsistencyFit consistency_order(const ControlAffineSystem& sys,
                                 const std::function<Vector(const Vector&)>& controller,
                                 const ButcherTableau& tab, const ExactMapOracle& oracle,
                                 const std::vector<Vector>& grid,
                                 const std::vector<double>& periods) {
    if (grid.empty() || periods.size() < 2) {
        throw NumericError("consistency_order: needs a state grid and at least two periods");
    }
    ConsistencyFit fit;
    fit.max_errors.reserve(periods.size());
    for (double h : periods) {
        double worst = 0.0;
        for (const Vector& x : grid) {
            worst = std::max(worst, one_step_error(sys, controller, tab, oracle, x, h));
        }
        fit.max_errors.push_back(worst);
    }

    // Least squares on log E = slope * log h + intercept.
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    long used = 0;
    for (size_t i = 0; i < periods.size(); ++i) {
        if (fit.max_errors[i] <= 0.0) continue;  // exact agreement carries no order signal
        const double lx = std::log(periods[i]);
        const double ly = std::log(fit.max_errors[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++used;
    }
    if (used < 2) throw NumericError("consistency_order: too few nonzero errors to fit");
    const double denom = used * sxx - sx * sx;
    fit.slope = (used * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / used;
    return fit;
}

InvarianceResult invariance_check(const TrajectoryRecord& rec, double delta) {
    for (size_t k = 0; k < rec.barrier_values.size(); ++k) {
        if (rec.barrier_values[k] < -delta) {
            return {false, static_cast<std::ptrdiff_t>(k)};
        }
    }
    return {true, -1};
}

double convexity_probe(const BarrierFamily& b, const ButcherTableau& tab,
                       const ControlAffineSystem& sys, const Vector& x, double h, int trials,
                       std::uint64_t seed) {
    if (!sys.block_structure || !b.structure) {
        throw NumericError("convexity_probe: needs block structure on both system and barrier");
    }
    const int expected_stages = sys.block_structure->chain_length - b.structure->blocks_used + 1;
    if (tab.stages() != expected_stages) {
        throw NumericError("convexity_probe: tableau stages must equal chain_length - "
                           "blocks_used + 1 (" + std::to_string(expected_stages) + ")");
    }

    auto phi = [&](const Vector& u) { return decrement_residual(b, tab, sys, x, u, h); };
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> box(-10.0, 10.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int m = sys.input_dim;
    double worst = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < trials; ++t) {
        Vector u1(m), u2(m);
        for (int i = 0; i < m; ++i) {
            u1(i) = box(rng);
            u2(i) = box(rng);
        }
        const double lam = unit(rng);
        const double lhs = phi(lam * u1 + (1.0 - lam) * u2);
        const double rhs = lam * phi(u1) + (1.0 - lam) * phi(u2);
        worst = std::max(worst, lhs - rhs);
    }
    return worst;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.15g", v);
    return buf;
}

void write_trajectory_header(std::ostream& os) {
    os << "scenario,h,trial,k,t,s_value,phi_residual,distance,admissible\n";
}

void write_trajectory_rows(std::ostream& os, const std::string& scenario, double h, int trial,
                           const TrajectoryRecord& rec) {
    for (size_t k = 0; k < rec.states.size(); ++k) {
        os << scenario << ',' << format_double(h) << ',' << trial << ',' << k << ','
           << format_double(rec.sample_times[k]) << ',' << format_double(rec.barrier_values[k])
           << ',';
        if (k < rec.decrement_residuals.size()) os << format_double(rec.decrement_residuals[k]);
        os << ',' << format_double(rec.distances[k]) << ','
           << static_cast<int>(rec.admissible[k]) << '\n';
    }
}

void write_summary_csv(std::ostream& os, const std::string& scenario,
                       const std::vector<SweepRow>& rows) {
    os << "scenario,h,max_distance,n_failures\n";
    for (const SweepRow& r : rows) {
        os << scenario << ',' << format_double(r.h) << ',' << format_double(r.max_distance)
           << ',' << r.n_failures << '\n';
    }
}

void write_curve_dat(std::ostream& os, const std::string& scenario,
                     const std::vector<SweepRow>& rows) {
    os << "# scenario: " << scenario << "\n";
    os << "# h max_distance n_failures\n";
    for (const SweepRow& r : rows) {
        os << format_double(r.h) << ' ' << format_double(r.max_distance) << ' ' << r.n_failures
           << '\n';
    }
}

}  // namespace sdcbf
