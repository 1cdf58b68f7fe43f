#pragma once

#include <functional>
#include <optional>
#include <string>

#include "sdcbf/types.hpp"

namespace sdcbf {

/// Chain-of-integrators layout: the state splits into `chain_length` blocks of
/// `block_size` entries, each block the derivative of the one before it, with
/// drift nonlinearity and actuation confined to the last block.
struct BlockIntegratorInfo {
    int block_size = 0;    // entries per block
    int chain_length = 0;  // number of blocks
};

/// Control-affine vector field xdot = f(x) + g(x) u on a working region.
struct ControlAffineSystem {
    int state_dim = 0;
    int input_dim = 0;
    std::function<Vector(const Vector&)> drift;      // f
    std::function<Matrix(const Vector&)> actuation;  // g
    std::optional<BlockIntegratorInfo> block_structure;
    Box working_region;
};

/// Evaluates f(x) + g(x) u. Throws NumericError on dimension mismatch or
/// non-finite results.
Vector eval_vector_field(const ControlAffineSystem& sys, const Vector& x, const Vector& u);

/// Fully actuated mechanical system D(q) qdd + C(q, qd) qd + G(q) = u.
struct MechanicalSystem {
    int config_dim = 0;
    std::function<Matrix(const Vector&)> inertia;                  // D(q)
    std::function<Matrix(const Vector&, const Vector&)> coriolis;  // C(q, qd)
    std::function<Vector(const Vector&)> gravity;                  // G(q)
};

/// Inverted pendulum models, angles measured clockwise from upright, the
/// second angle relative to the first link. Dimensionless coefficients.
/// Accepted names: "single_pendulum", "double_pendulum".
MechanicalSystem pendulum_model(const std::string& name);

/// Lifts a mechanical system to first-order control-affine form with state
/// x = (q, qd): drift (qd, -D^-1 (C qd + G)), actuation (0, D^-1). Tags the
/// result with block structure (block_size = config_dim, chain_length = 2).
/// Evaluation throws NumericError when cond(D(q)) exceeds `cond_limit`.
ControlAffineSystem to_control_affine(const MechanicalSystem& mech, double cond_limit = 1e12);

/// True when drift/actuation at x match the block-integrator layout: the first
/// (chain_length - 1) * block_size drift rows copy the shifted state blocks and
/// the corresponding actuation rows vanish.
bool has_block_integrator_form(const ControlAffineSystem& sys, const Vector& x, double tol = 1e-12);

}  // namespace sdcbf
