#include "sdcbf/discretization.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "sdcbf/errors.hpp"

namespace sdcbf {

ButcherTableau ButcherTableau::make(std::string name, Vector weights, Matrix coeffs) {
    const int p = static_cast<int>(weights.size());
    if (p < 1) throw ConfigError("tableau '" + name + "': needs at least one stage");
    if (coeffs.rows() != p || coeffs.cols() != p) {
        throw ConfigError("tableau '" + name + "': coefficient matrix must be " +
                          std::to_string(p) + "x" + std::to_string(p));
    }
    if ((weights.array() < 0.0).any()) {
        throw ConfigError("tableau '" + name + "': stage weights must be nonnegative");
    }
    if (std::abs(weights.sum() - 1.0) > 1e-12) {
        throw ConfigError("tableau '" + name + "': stage weights must sum to 1");
    }
    for (int i = 0; i < p; ++i) {
        for (int j = i; j < p; ++j) {
            if (coeffs(i, j) != 0.0) {
                throw ConfigError("tableau '" + name +
                                  "': coefficients must be strictly lower triangular "
                                  "(explicit scheme)");
            }
        }
    }
    ButcherTableau t;
    t.name = std::move(name);
    t.weights = std::move(weights);
    t.coeffs = std::move(coeffs);
    return t;
}

ButcherTableau standard_tableau(const std::string& kind) {
    if (kind == "euler") {
        Vector b(1);
        b << 1.0;
        return ButcherTableau::make("euler", b, Matrix::Zero(1, 1));
    }
    if (kind == "midpoint") {
        Vector b(2);
        b << 0.0, 1.0;
        Matrix a = Matrix::Zero(2, 2);
        a(1, 0) = 0.5;
        return ButcherTableau::make("midpoint", b, a);
    }
    throw ConfigError("standard_tableau: unknown scheme '" + kind + "'");
}

Vector rk_step(const ButcherTableau& tab, const ControlAffineSystem& sys,
               const Vector& x, const Vector& u, double h) {
    if (h < 0.0) throw NumericError("rk_step: negative sample period");
    const int p = tab.stages();
    std::vector<Vector> k(p);
    for (int i = 0; i < p; ++i) {
        Vector z = x;
        for (int j = 0; j < i; ++j) {
            const double a = tab.coeffs(i, j);
            if (a != 0.0) z += h * a * k[j];
        }
        k[i] = eval_vector_field(sys, z, u);
    }
    Vector out = x;
    for (int i = 0; i < p; ++i) {
        const double b = tab.weights(i);
        if (b != 0.0) out += h * b * k[i];
    }
    if (!out.allFinite()) throw NumericError("rk_step: non-finite stage value");
    return out;
}

namespace {

// Dormand-Prince 5(4) coefficients. Row i of kA holds a_i1..a_i6; kB is the
// 5th-order propagating weight vector, kE = kB - kB_hat feeds the embedded
// 4th-order error estimate directly.
constexpr double kA[7][6] = {
    {0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
    {1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0},
    {3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0},
    {44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0},
    {19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0},
    {9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0},
    {35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0},
};

constexpr double kB[7] = {35.0 / 384.0,       0.0,          500.0 / 1113.0, 125.0 / 192.0,
                          -2187.0 / 6784.0,   11.0 / 84.0,  0.0};

constexpr double kE[7] = {35.0 / 384.0 - 5179.0 / 57600.0,
                          0.0,
                          500.0 / 1113.0 - 7571.0 / 16695.0,
                          125.0 / 192.0 - 393.0 / 640.0,
                          -2187.0 / 6784.0 + 92097.0 / 339200.0,
                          11.0 / 84.0 - 187.0 / 2100.0,
                          -1.0 / 40.0};

}  // namespace

ExactMapOracle::Result ExactMapOracle::integrate(const ControlAffineSystem& sys,
                                                 const Vector& x, const Vector& u,
                                                 double h) const {
    if (h < 0.0) throw NumericError("ExactMapOracle: negative sample period");
    Result res;
    res.state = x;
    res.admissible = sys.working_region.contains(x);
    if (h == 0.0) return res;

    const int n = sys.state_dim;
    Vector y = x;
    double t = 0.0;
    double dt = h;
    std::vector<Vector> k(7, Vector(n));

    while (t < h * (1.0 - 1e-15)) {
        if (res.steps_taken >= max_steps) {
            throw IntegrationError("ExactMapOracle: exceeded max_steps (" +
                                   std::to_string(max_steps) + ") at t = " + std::to_string(t));
        }
        dt = std::min(dt, h - t);

        k[0] = eval_vector_field(sys, y, u);
        for (int i = 1; i < 7; ++i) {
            Vector z = y;
            for (int j = 0; j < i; ++j) {
                if (kA[i][j] != 0.0) z += (dt * kA[i][j]) * k[j];
            }
            k[i] = eval_vector_field(sys, z, u);
        }
        Vector y_next = y;
        Vector err = Vector::Zero(n);
        for (int i = 0; i < 7; ++i) {
            if (kB[i] != 0.0) y_next += (dt * kB[i]) * k[i];
            if (kE[i] != 0.0) err += (dt * kE[i]) * k[i];
        }

        double err_norm = 0.0;
        for (int i = 0; i < n; ++i) {
            const double scale = abs_tol + rel_tol * std::max(std::abs(y(i)), std::abs(y_next(i)));
            const double r = err(i) / scale;
            err_norm += r * r;
        }
        err_norm = std::sqrt(err_norm / n);
        if (!std::isfinite(err_norm)) err_norm = 1e12;  // force rejection

        ++res.steps_taken;
        if (err_norm <= 1.0) {
            t += dt;
            y = y_next;
            if (res.admissible && !sys.working_region.contains(y)) res.admissible = false;
        }
        const double factor =
            err_norm < 1e-30 ? 5.0 : std::clamp(0.9 * std::pow(err_norm, -0.2), 0.2, 5.0);
        dt *= factor;
        if (dt < h * 1e-14) {
            throw IntegrationError("ExactMapOracle: step size underflow at t = " +
                                   std::to_string(t));
        }
    }
    res.state = y;
    return res;
}

Vector exact_step(const ExactMapOracle& oracle, const ControlAffineSystem& sys,
                  const Vector& x, const Vector& u, double h) {
    return oracle.integrate(sys, x, u, h).state;
}

double one_step_error(const ControlAffineSystem& sys,
                      const std::function<Vector(const Vector&)>& controller,
                      const ButcherTableau& tab, const ExactMapOracle& oracle,
                      const Vector& x, double h) {
    const Vector u = controller(x);
    const Vector exact = exact_step(oracle, sys, x, u, h);
    const Vector approx = rk_step(tab, sys, x, u, h);
    return (exact - approx).norm();
}

}  // namespace sdcbf
