#pragma once

#include <functional>
#include <string>

#include "sdcbf/barrier.hpp"
#include "sdcbf/discretization.hpp"
#include "sdcbf/dynamics.hpp"
#include "sdcbf/types.hpp"

namespace sdcbf {

struct SolverConfig {
    double feas_tol = 1e-8;
    double kkt_tol = 1e-8;
    int max_newton_iters = 100;
    double bracket_growth = 2.0;
};

/// Nominal controllers by name:
///  "zero"  - identically zero input;
///  "fl_pd" - feedback linearization with auxiliary PD action,
///            u = C(q,qd) qd + G(q) + D(q) (-kp q - kd qd), kp = 1, kd = 2.
std::function<Vector(const Vector&)> make_nominal(const std::string& kind,
                                                  const MechanicalSystem& mech);

Vector nominal_control(const std::string& kind, const MechanicalSystem& mech, const Vector& x);

/// Minimum-intervention projection of `nominal_input` onto the sublevel set
/// {u : constraint(u) <= 0} of a convex function, i.e. the unique minimizer of
/// 0.5 ||u - nominal_input||^2 subject to constraint(u) <= 0.
///
/// Returns nominal_input unchanged when it is already feasible to feas_tol.
/// Affine constraints take a closed-form halfspace projection; otherwise a
/// scalar dual search runs damped Newton inner solves under outer bracketing.
/// Throws SdcbfViolation when the constraint is certified infeasible
/// (minimum over the box ||u||_inf <= 1e3 is positive) and SolverError when
/// iteration budgets are exhausted.
Vector project_single_constraint(const Vector& nominal_input,
                                 const std::function<double(const Vector&)>& constraint,
                                 const SolverConfig& cfg);

/// Sampled-data safety filter: nominal controller plus a barrier decrement
/// constraint on the approximate discrete-time model.
struct SdcbfController {
    std::function<Vector(const Vector&)> nominal;
    BarrierFamily barrier;
    ButcherTableau tableau;
    ControlAffineSystem system;
    SolverConfig solver;
};

/// Filtered input at state x for sample period h: projects the nominal input
/// onto the decrement constraint of the controller's approximate model.
Vector sdcbf_filter(const SdcbfController& ctrl, const Vector& x, double h);

}  // namespace sdcbf
