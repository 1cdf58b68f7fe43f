#include "sdcbf/dynamics.hpp"

#include <cmath>

#include "sdcbf/errors.hpp"

namespace sdcbf {

Vector eval_vector_field(const ControlAffineSystem& sys, const Vector& x, const Vector& u) {
    if (x.size() != sys.state_dim || u.size() != sys.input_dim) {
        throw NumericError("eval_vector_field: dimension mismatch (state " +
                           std::to_string(x.size()) + "/" + std::to_string(sys.state_dim) +
                           ", input " + std::to_string(u.size()) + "/" +
                           std::to_string(sys.input_dim) + ")");
    }
    Vector out = sys.drift(x) + sys.actuation(x) * u;
    if (!out.allFinite()) {
        throw NumericError("eval_vector_field: non-finite vector field value");
    }
    return out;
}

MechanicalSystem pendulum_model(const std::string& name) {
    MechanicalSystem m;
    if (name == "single_pendulum") {
        m.config_dim = 1;
        m.inertia = [](const Vector&) { return Matrix::Identity(1, 1); };
        m.coriolis = [](const Vector&, const Vector&) { return Matrix::Zero(1, 1); };
        m.gravity = [](const Vector& q) {
            Vector g(1);
            g << -std::sin(q(0));
            return g;
        };
        return m;
    }
    if (name == "double_pendulum") {
        m.config_dim = 2;
        m.inertia = [](const Vector& q) {
            const double c2 = std::cos(q(1));
            Matrix d(2, 2);
            d << 3.0 + 2.0 * c2, 1.0 + c2,
                 1.0 + c2,       1.0;
            return d;
        };
        m.coriolis = [](const Vector& q, const Vector& qd) {
            const double s2 = std::sin(q(1));
            Matrix c(2, 2);
            c << 0.0,                                 -(2.0 * qd(0) + qd(1)) * s2,
                 0.5 * (2.0 * qd(0) + qd(1)) * s2,    -0.5 * qd(0) * s2;
            return c;
        };
        m.gravity = [](const Vector& q) {
            Vector g(2);
            g << -2.0 * std::sin(q(0)) - std::sin(q(0) + q(1)),
                 -std::sin(q(0) + q(1));
            return g;
        };
        return m;
    }
    throw ConfigError("pendulum_model: unknown system name '" + name + "'");
}

ControlAffineSystem to_control_affine(const MechanicalSystem& mech, double cond_limit) {
    const int m = mech.config_dim;
    const int n = 2 * m;

    auto solve_inertia = [mech, cond_limit, m](const Vector& q, const Matrix& rhs) {
        const Matrix d = mech.inertia(q);
        Eigen::JacobiSVD<Matrix> svd(d, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const double smin = svd.singularValues()(m - 1);
        const double smax = svd.singularValues()(0);
        if (!(smin > 0.0) || smax / smin > cond_limit) {
            throw NumericError("to_control_affine: inertia matrix singular or ill-conditioned "
                               "(cond > " + std::to_string(cond_limit) + ")");
        }
        return Matrix(svd.solve(rhs));
    };

    ControlAffineSystem sys;
    sys.state_dim = n;
    sys.input_dim = m;
    sys.drift = [mech, solve_inertia, m](const Vector& x) {
        const Vector q = x.head(m);
        const Vector qd = x.tail(m);
        Vector out(2 * m);
        out.head(m) = qd;
        out.tail(m) = -solve_inertia(q, mech.coriolis(q, qd) * qd + mech.gravity(q));
        return out;
    };
    sys.actuation = [solve_inertia, m](const Vector& x) {
        const Vector q = x.head(m);
        Matrix out = Matrix::Zero(2 * m, m);
        out.bottomRows(m) = solve_inertia(q, Matrix::Identity(m, m));
        return out;
    };
    sys.block_structure = BlockIntegratorInfo{m, 2};
    sys.working_region = Box::centered(n, 1e6);
    return sys;
}

bool has_block_integrator_form(const ControlAffineSystem& sys, const Vector& x, double tol) {
    if (!sys.block_structure) return false;
    const int bs = sys.block_structure->block_size;
    const int gamma = sys.block_structure->chain_length;
    if (bs * gamma != sys.state_dim) return false;

    const int head_rows = (gamma - 1) * bs;
    const Vector f = sys.drift(x);
    const Matrix g = sys.actuation(x);
    const Vector shifted = x.tail(head_rows);  // blocks 2..gamma
    return (f.head(head_rows) - shifted).lpNorm<Eigen::Infinity>() <= tol &&
           g.topRows(head_rows).lpNorm<Eigen::Infinity>() <= tol;
}

}  // namespace sdcbf
