#pragma once

#include <functional>
#include <string>

#include "sdcbf/dynamics.hpp"
#include "sdcbf/types.hpp"

namespace sdcbf {

/// Explicit Runge-Kutta scheme: nonnegative weights summing to one and a
/// strictly lower triangular coefficient matrix.
struct ButcherTableau {
    std::string name;
    Vector weights;  // b, one entry per stage
    Matrix coeffs;   // a, stages x stages, strictly lower triangular

    int stages() const { return static_cast<int>(weights.size()); }

    /// Validates the explicit-scheme contract; throws ConfigError on violation.
    static ButcherTableau make(std::string name, Vector weights, Matrix coeffs);
};

/// Named schemes: "euler" (1 stage) and "midpoint" (2 stages).
ButcherTableau standard_tableau(const std::string& kind);

/// One step of the approximate discrete-time map under zero-order hold:
/// x + h * sum_i b_i (f(z_i) + g(z_i) u) with stage states
/// z_i = x + h * sum_{j<i} a_ij (f(z_j) + g(z_j) u), z_1 = x.
Vector rk_step(const ButcherTableau& tab, const ControlAffineSystem& sys,
               const Vector& x, const Vector& u, double h);

/// High-accuracy reference for the exact discrete-time map: Dormand-Prince
/// 5(4) embedded adaptive pair integrating xdot = f(x) + g(x) u with the
/// input held constant over the step.
struct ExactMapOracle {
    static constexpr const char* method = "dormand_prince_54";
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    int max_steps = 100000;

    struct Result {
        Vector state;
        bool admissible = true;  // stayed inside the system working region
        int steps_taken = 0;
    };

    /// Integrates over [0, h]. Throws IntegrationError on step exhaustion or
    /// step-size underflow; leaving the working region only clears the
    /// admissible flag.
    Result integrate(const ControlAffineSystem& sys, const Vector& x, const Vector& u,
                     double h) const;
};

/// Reference end state after one sample period. Convenience over integrate().
Vector exact_step(const ExactMapOracle& oracle, const ControlAffineSystem& sys,
                  const Vector& x, const Vector& u, double h);

/// One-step consistency gap || exact_step(x, k(x), h) - rk_step(x, k(x), h) ||_2.
double one_step_error(const ControlAffineSystem& sys,
                      const std::function<Vector(const Vector&)>& controller,
                      const ButcherTableau& tab, const ExactMapOracle& oracle,
                      const Vector& x, double h);

}  // namespace sdcbf
