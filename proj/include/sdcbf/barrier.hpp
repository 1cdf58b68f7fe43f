#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "sdcbf/discretization.hpp"
#include "sdcbf/dynamics.hpp"
#include "sdcbf/types.hpp"

namespace sdcbf {

/// Extended class-K comparison function: zero at zero, strictly increasing.
struct Alpha {
    std::string name = "identity";
    double gain = 1.0;  // used by "linear"

    double operator()(double v) const { return name == "identity" ? v : gain * v; }
};

Alpha alpha_from_name(const std::string& name, double gain = 1.0);

/// Structural side channel for barriers on chain-of-integrator systems: the
/// barrier reads only the first `blocks_used` state blocks, through `reduced`.
struct BarrierStructure {
    std::function<double(const Vector&)> reduced;  // takes the stacked used blocks
    int blocks_used = 1;                           // q
    bool concave_in_last = false;                  // concavity in the last used block
};

/// Barrier candidate: positive inside the safe set, zero on its boundary,
/// negative outside. Period-independent throughout this toolkit.
struct BarrierFamily {
    std::function<double(const Vector&)> value;  // s
    Alpha alpha;
    std::optional<BarrierStructure> structure;
    std::optional<double> lipschitz_bound;  // M, set by estimate_lipschitz when wanted
    double margin = 0.25;                   // collar width the family is certified on
};

double eval_barrier(const BarrierFamily& b, const Vector& x);

enum class SafeSetKind {
    LyapunovSublevel,   // {x in R^2 : x^T P x <= 1}
    ConfigEllipsoid1d,  // {(q, qd) in R^2 : q^2 <= 1}
    Halfspace1d,        // {(q, qd) in R^2 : q >= -offset}
    ConfigBall2d,       // {(q, qd) in R^4 : ||q||_2 <= 1}
};

struct SafeSetSpec {
    SafeSetKind kind = SafeSetKind::ConfigEllipsoid1d;
    Matrix quadratic_form;  // P, LyapunovSublevel only
    double offset = 0.1;    // Halfspace1d only

    int state_dim() const;
    std::string name() const;
    /// Accepted names: "lyapunov", "config_ellipsoid", "halfspace", "config_ball".
    static SafeSetSpec from_name(const std::string& name);
};

/// Builds the barrier family for a safe set, including block structure for the
/// configuration-dependent sets (blocks_used = 1) and the full-state Lyapunov
/// set (blocks_used = 2).
BarrierFamily make_barrier(const SafeSetSpec& set, const Alpha& alpha = Alpha{});

/// Euclidean distance to the safe set (0 for members). The Lyapunov sublevel
/// case uses iterative point-to-ellipse projection to 1e-10.
double distance_to_set(const SafeSetSpec& set, const Vector& x);

/// Decrement residual of the sampled-data barrier constraint:
/// phi = -s(F_h(x, u)) + s(x) - h * alpha(s(x)), nonpositive iff the
/// constraint holds at (x, u).
double decrement_residual(const BarrierFamily& b, const ButcherTableau& tab,
                          const ControlAffineSystem& sys, const Vector& x, const Vector& u,
                          double h);

/// Constants certifying coercivity of a barrier near its safe set.
struct CoercivityReport {
    double sigma = 0.0;       // min boundary gradient norm
    double mu = 0.0;          // max Hessian spectral norm on the collar
    double eps = 0.0;         // certified collar width: min(eps_prime, sigma/mu)
    double eps_prime = 0.0;   // requested collar width
    long boundary_samples = 0;
    long collar_samples = 0;

    /// Margin delta(eta) strictly below sigma * eta / 2.
    double delta_for(double eta) const { return 0.5 * sigma * eta * (1.0 - 1e-6); }

    std::string to_text(const std::string& set_name) const;
};

/// Samples sigma over the set boundary and mu over the collar. Throws
/// NumericError when the sampled boundary gradient degenerates (zero is not a
/// regular value of the barrier). The halfspace set has an affine barrier and
/// unbounded safe set: sigma = 1 by sampling, mu = 0, eps = eps_prime.
CoercivityReport coercivity_constants(const BarrierFamily& b, const SafeSetSpec& set,
                                      double eps_prime = 0.5, int resolution = 10000);

/// Lipschitz bound for s over a box: max sampled gradient norm inflated 5%.
double estimate_lipschitz(const BarrierFamily& b, const Box& region, int samples = 20000,
                          std::uint64_t seed = 12345);

/// Stabilizing solution of the continuous algebraic Riccati equation for the
/// double integrator with identity state cost and unit input cost; closed form
/// for this fixed instance.
Matrix care_double_integrator();

}  // namespace sdcbf
