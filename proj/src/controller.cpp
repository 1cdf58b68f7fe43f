#include "sdcbf/controller.hpp"

#include <cmath>
#include <sstream>

#include "sdcbf/errors.hpp"
#include "sdcbf/numdiff.hpp"

namespace sdcbf {

std::function<Vector(const Vector&)> make_nominal(const std::string& kind,
                                                  const MechanicalSystem& mech) {
    const int m = mech.config_dim;
    if (kind == "zero") {
        return [m](const Vector&) { return Vector::Zero(m); };
    }
    if (kind == "fl_pd") {
        const double kp = 1.0, kd = 2.0;
        return [mech, m, kp, kd](const Vector& x) {
            const Vector q = x.head(m);
            const Vector qd = x.tail(m);
            return Vector(mech.coriolis(q, qd) * qd + mech.gravity(q) +
                          mech.inertia(q) * (-kp * q - kd * qd));
        };
    }
    throw ConfigError("make_nominal: unknown controller '" + kind + "'");
}

Vector nominal_control(const std::string& kind, const MechanicalSystem& mech, const Vector& x) {
    return make_nominal(kind, mech)(x);
}

namespace {

using Constraint = std::function<double(const Vector&)>;

// Step sizes tuned for the smooth low-curvature constraints this solver sees;
// central differences are exact for the affine/quadratic instances up to
// roundoff, and truncation stays negligible for the quartic residuals of the
// two-stage schemes.
constexpr double kGradStep = 1e-3;
constexpr double kHessStep = 1e-2;
constexpr double kLambdaCap = 1e14;
constexpr double kCertBoxHalfWidth = 1e3;
constexpr double kProbeStep = 4.0;
constexpr double kModelRelTol = 1e-9;

double checked_eval(const Constraint& phi, const Vector& u) {
    const double v = phi(u);
    if (!std::isfinite(v)) throw SolverError("projection: constraint evaluated non-finite");
    return v;
}

// Local quadratic model phi(kd + v) ~ c + b.v + 0.5 v'Av fitted from wide
// central differences around kd. The wide step keeps the fit exact (up to
// roundoff) whenever phi really is affine or quadratic in the input, which is
// what the one-step decrement of an explicit scheme looks like when the
// barrier reads only the blocks the scheme propagates affinely.
struct QuadModel {
    double c = 0.0;
    Vector b;
    Matrix a;
    double scale = 1.0;
    bool affine = false;
    bool verified = false;

    double value(const Vector& v) const { return c + b.dot(v) + 0.5 * v.dot(a * v); }
    Vector gradient(const Vector& v) const { return b + a * v; }
};

QuadModel fit_quadratic_model(const Vector& kd, const Constraint& phi, double phi0) {
    const Eigen::Index m = kd.size();
    const double t = kProbeStep;
    QuadModel q;
    q.c = phi0;
    q.b = Vector(m);
    q.a = Matrix::Zero(m, m);
    q.scale = std::max(1.0, std::abs(phi0));

    Vector fp(m), fm(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        Vector up = kd, um = kd;
        up(i) += t;
        um(i) -= t;
        fp(i) = checked_eval(phi, up);
        fm(i) = checked_eval(phi, um);
        q.scale = std::max({q.scale, std::abs(fp(i)), std::abs(fm(i))});
        q.b(i) = (fp(i) - fm(i)) / (2.0 * t);
        q.a(i, i) = (fp(i) - 2.0 * phi0 + fm(i)) / (t * t);
    }
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = i + 1; j < m; ++j) {
            Vector upp = kd;
            upp(i) += t;
            upp(j) += t;
            const double cross = checked_eval(phi, upp) - fp(i) - fp(j) + phi0;
            q.a(i, j) = q.a(j, i) = cross / (t * t);
        }
    }

    q.affine = (t * t * q.a).cwiseAbs().maxCoeff() <= 1e-10 * q.scale;

    // Validate the fit at points off the probe stencil before trusting it.
    Vector v1 = Vector::Constant(m, 0.6 * t);
    if (m > 1) v1(1) = -0.8 * t;
    Vector v2 = -0.37 * v1;
    bool ok = true;
    for (const Vector& v : {v1, v2}) {
        const double truth = checked_eval(phi, kd + v);
        if (std::abs(truth - q.value(v)) > kModelRelTol * q.scale) ok = false;
    }
    q.verified = ok;
    return q;
}

// Dual curve of the model problem min 0.5||v||^2 s.t. q(v) <= 0:
// v(lam) = -lam (I + lam A)^{-1} b with A clamped to its positive part.
struct ModelDual {
    Matrix a_psd;
    Vector b;

    explicit ModelDual(const QuadModel& q) : b(q.b) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(q.a);
        const Vector lam_pos = es.eigenvalues().cwiseMax(0.0);
        a_psd = es.eigenvectors() * lam_pos.asDiagonal() * es.eigenvectors().transpose();
    }

    Vector point(double lam) const {
        const Eigen::Index m = b.size();
        Matrix ih = Matrix::Identity(m, m) + lam * a_psd;
        return Vector(ih.ldlt().solve(-lam * b));
    }
};

// Root of g(lam) = q(v(lam)) by safeguarded Newton; g decreases from q.c > 0.
// Returns a negative value when the model minimum never crosses zero.
double model_dual_root(const QuadModel& q, const ModelDual& dual) {
    double lam_lo = 0.0;
    double lam_hi = 1.0;
    while (q.value(dual.point(lam_hi)) > 0.0) {
        lam_lo = lam_hi;
        lam_hi *= 2.0;
        if (lam_hi > kLambdaCap) return -1.0;
    }
    double lam = 0.5 * (lam_lo + lam_hi);
    for (int it = 0; it < 100; ++it) {
        const Vector v = dual.point(lam);
        const double g = q.value(v);
        if (g > 0.0) lam_lo = lam; else lam_hi = lam;
        if (std::abs(g) <= 1e-14 * q.scale) break;
        const Vector grad = q.gradient(v);
        const Eigen::Index m = v.size();
        Matrix ih = Matrix::Identity(m, m) + lam * dual.a_psd;
        const double dg = -grad.dot(Vector(ih.ldlt().solve(grad)));
        double next = dg < 0.0 ? lam - g / dg : 0.5 * (lam_lo + lam_hi);
        if (!(next > lam_lo && next < lam_hi)) next = 0.5 * (lam_lo + lam_hi);
        if (std::abs(next - lam) <= 1e-15 * (1.0 + lam)) { lam = next; break; }
        lam = next;
    }
    return lam;
}

// Minimizer of 0.5 ||u - kd||^2 + lam * phi(u), damped Newton from u_start.
Vector inner_minimize(const Vector& kd, const Constraint& phi, double lam, Vector u,
                      const SolverConfig& cfg, std::ostringstream& trace) {
    auto objective = [&](const Vector& v) { return 0.5 * (v - kd).squaredNorm() + lam * phi(v); };
    for (int it = 0; it < cfg.max_newton_iters; ++it) {
        const Vector grad = (u - kd) + lam * gradient_fd(phi, u, kGradStep);
        const double scale = std::max(1.0, (u - kd).norm());
        if (grad.norm() <= 0.2 * cfg.kkt_tol * scale) return u;

        Matrix hess = Matrix::Identity(u.size(), u.size()) + lam * hessian_fd(phi, u, kHessStep);
        Eigen::LDLT<Matrix> ldlt(hess);
        Vector dir = ldlt.info() == Eigen::Success ? Vector(ldlt.solve(-grad)) : Vector(-grad);
        if (!dir.allFinite() || dir.dot(grad) >= 0.0) dir = -grad;

        const double f0 = objective(u);
        double t = 1.0;
        bool moved = false;
        while (t > 1e-14) {
            const Vector cand = u + t * dir;
            if (objective(cand) <= f0 + 1e-4 * t * grad.dot(dir)) {
                u = cand;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if (!moved) {
            trace << " inner-stall(lam=" << lam << ",it=" << it << ",|grad|=" << grad.norm()
                  << ")";
            return u;
        }
    }
    trace << " inner-budget(lam=" << lam << ")";
    return u;
}

// Certificate search: minimize phi over the box ||u||_inf <= kCertBoxHalfWidth.
Vector minimize_over_box(const Constraint& phi, Vector u, const SolverConfig& cfg) {
    auto clamp_box = [](Vector v) {
        return Vector(v.cwiseMax(-kCertBoxHalfWidth).cwiseMin(kCertBoxHalfWidth));
    };
    u = clamp_box(u);
    for (int it = 0; it < 3 * cfg.max_newton_iters; ++it) {
        const Vector grad = gradient_fd(phi, u, kGradStep);
        Matrix hess = hessian_fd(phi, u, kHessStep);
        hess.diagonal().array() += 1e-12;
        Eigen::LDLT<Matrix> ldlt(hess);
        Vector dir = ldlt.info() == Eigen::Success ? Vector(ldlt.solve(-grad)) : Vector(-grad);
        if (!dir.allFinite() || dir.dot(grad) >= 0.0) dir = -grad;

        const double f0 = checked_eval(phi, u);
        double t = 1.0;
        bool moved = false;
        while (t > 1e-14) {
            const Vector cand = clamp_box(u + t * dir);
            if (checked_eval(phi, cand) < f0 - 1e-14 * std::max(1.0, std::abs(f0))) {
                u = cand;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if (!moved) break;
    }
    return u;
}

}  // namespace

Vector project_single_constraint(const Vector& nominal_input, const Constraint& constraint,
                                 const SolverConfig& cfg) {
    const Vector& kd = nominal_input;
    const Eigen::Index m = kd.size();
    const double phi0 = checked_eval(constraint, kd);
    if (phi0 <= cfg.feas_tol) return kd;

    std::ostringstream trace;
    trace << "phi(kd)=" << phi0;

    const QuadModel model = fit_quadratic_model(kd, constraint, phi0);

    if (model.affine) {
        const double gnorm2 = model.b.squaredNorm();
        if (gnorm2 <= 1e-16) {
            throw SdcbfViolation(
                "projection: constraint is constant and positive (value " +
                std::to_string(phi0) + "); no admissible input exists");
        }
        const Vector u = kd - (phi0 / gnorm2) * model.b;
        if (std::abs(checked_eval(constraint, u)) <= cfg.feas_tol) return u;
        trace << " affine-path-rejected";
    } else if (model.verified) {
        const ModelDual dual(model);
        const double lam_root = model_dual_root(model, dual);
        if (lam_root < 0.0) {
            // Model never crosses zero; certify against the real constraint
            // before declaring the barrier violated.
            const Vector u_min = minimize_over_box(constraint, kd, cfg);
            const double phi_min = checked_eval(constraint, u_min);
            if (phi_min > cfg.feas_tol) {
                std::ostringstream msg;
                msg << "decrement constraint infeasible: min over ||u||_inf <= "
                    << kCertBoxHalfWidth << " is " << phi_min << " > feas_tol=" << cfg.feas_tol
                    << "; trace:" << trace.str();
                throw SdcbfViolation(msg.str());
            }
            if (phi_min >= -cfg.feas_tol) return u_min;
            trace << " model-infeasible-but-constraint-feasible";
        } else {
            // Polish the multiplier against the real constraint; for an
            // exactly quadratic phi the first iterate already lands on the
            // boundary to roundoff.
            double lam = lam_root;
            Vector u = kd + dual.point(lam);
            double g = checked_eval(constraint, u);
            bool candidate = true;
            if (std::abs(g) > 0.5 * cfg.feas_tol) {
                double lam_lo, lam_hi, g_lo, g_hi;
                if (g > 0.0) {
                    lam_lo = lam;
                    g_lo = g;
                    lam_hi = std::max(2.0 * lam, 1.0);
                    g_hi = checked_eval(constraint, kd + dual.point(lam_hi));
                    int grow = 0;
                    while (g_hi > 0.0) {
                        lam_lo = lam_hi;
                        g_lo = g_hi;
                        lam_hi *= 2.0;
                        if (++grow > 60) break;
                        g_hi = checked_eval(constraint, kd + dual.point(lam_hi));
                    }
                } else {
                    lam_lo = 0.0;
                    g_lo = phi0;
                    lam_hi = lam;
                    g_hi = g;
                }
                bool landed = false;
                if (g_lo > 0.0 && g_hi <= 0.0) {
                    for (int it = 0; it < 200; ++it) {
                        const double denom = g_lo - g_hi;
                        lam = denom > 0.0 ? (lam_lo * (-g_hi) + lam_hi * g_lo) / denom
                                          : 0.5 * (lam_lo + lam_hi);
                        if (!(lam > lam_lo && lam < lam_hi)) lam = 0.5 * (lam_lo + lam_hi);
                        u = kd + dual.point(lam);
                        g = checked_eval(constraint, u);
                        if (std::abs(g) <= 0.5 * cfg.feas_tol) {
                            landed = true;
                            break;
                        }
                        if (g > 0.0) {
                            lam_lo = lam;
                            g_lo = g;
                            g_hi *= 0.5;
                        } else {
                            lam_hi = lam;
                            g_hi = g;
                            g_lo *= 0.5;
                        }
                    }
                } else {
                    trace << " model-polish-bracket-failed";
                }
                if (!landed && std::abs(g) > 0.5 * cfg.feas_tol) {
                    trace << " model-path-rejected(phi=" << g << ")";
                    candidate = false;  // fall through to the general search
                }
            }
            if (candidate) {
                const Vector grad_final = model.gradient(u - kd);
                const double lam_ls = grad_final.squaredNorm() > 0.0
                                          ? (kd - u).dot(grad_final) / grad_final.squaredNorm()
                                          : 0.0;
                const double kkt_resid =
                    ((u - kd) + std::max(lam_ls, 0.0) * grad_final).norm() /
                    std::max(1.0, (u - kd).norm());
                if (kkt_resid <= cfg.kkt_tol) return u;
                trace << " model-kkt-rejected(" << kkt_resid << ")";
            }
        }
    } else {
        trace << " model-unverified(scale=" << model.scale << ")";
    }

    // Scalar dual search: u(lam) minimizes 0.5||u-kd||^2 + lam*phi(u) and
    // g(lam) = phi(u(lam)) decreases from phi0 > 0; find its root.
    double lam_lo = 0.0, g_lo = phi0;
    double lam_hi = 1.0;
    Vector u = kd;
    double g_hi = 0.0;
    while (true) {
        u = inner_minimize(kd, constraint, lam_hi, u, cfg, trace);
        g_hi = checked_eval(constraint, u);
        trace << " bracket(lam=" << lam_hi << ",phi=" << g_hi << ")";
        if (g_hi <= 0.0) break;
        lam_lo = lam_hi;
        g_lo = g_hi;
        lam_hi *= cfg.bracket_growth;
        if (lam_hi > kLambdaCap) {
            const Vector u_min = minimize_over_box(constraint, kd, cfg);
            const double phi_min = checked_eval(constraint, u_min);
            if (phi_min > cfg.feas_tol) {
                std::ostringstream msg;
                msg << "decrement constraint infeasible: min over ||u||_inf <= "
                    << kCertBoxHalfWidth << " is " << phi_min << " > feas_tol=" << cfg.feas_tol
                    << "; trace:" << trace.str();
                throw SdcbfViolation(msg.str());
            }
            if (phi_min <= cfg.feas_tol && phi_min >= -cfg.feas_tol) return u_min;
            throw SolverError("projection: dual bracket exhausted despite feasible "
                              "constraint; trace:" + trace.str());
        }
    }

    if (std::abs(g_hi) > 0.5 * cfg.feas_tol) {
        // Illinois-damped regula falsi on g(lam).
        double lam = lam_hi;
        for (int it = 0; it < 200; ++it) {
            const double denom = g_lo - g_hi;
            lam = std::abs(denom) > 0.0 ? (lam_lo * (-g_hi) + lam_hi * g_lo) / denom
                                        : 0.5 * (lam_lo + lam_hi);
            if (!(lam > lam_lo && lam < lam_hi)) lam = 0.5 * (lam_lo + lam_hi);
            u = inner_minimize(kd, constraint, lam, u, cfg, trace);
            const double g = checked_eval(constraint, u);
            if (std::abs(g) <= 0.5 * cfg.feas_tol) break;
            if (g > 0.0) {
                lam_lo = lam;
                g_lo = g;
                g_hi *= 0.5;  // Illinois scaling keeps the bracket moving
            } else {
                lam_hi = lam;
                g_hi = g;
                g_lo *= 0.5;
            }
            if (it == 199) {
                throw SolverError("projection: dual root search exhausted 200 iterations; "
                                  "trace:" + trace.str());
            }
        }

        // Land on the feasible side if the last iterate sits slightly outside.
        if (checked_eval(constraint, u) > cfg.feas_tol) {
            u = inner_minimize(kd, constraint, lam_hi, u, cfg, trace);
        }
    }

    const double phi_final = checked_eval(constraint, u);
    const Vector grad_final = gradient_fd(constraint, u, kGradStep);
    const double lam_final =
        grad_final.squaredNorm() > 0.0 ? (kd - u).dot(grad_final) / grad_final.squaredNorm() : 0.0;
    const double kkt_resid = ((u - kd) + std::max(lam_final, 0.0) * grad_final).norm() /
                             std::max(1.0, (u - kd).norm());
    if (phi_final > cfg.feas_tol || kkt_resid > cfg.kkt_tol) {
        std::ostringstream msg;
        msg << "projection: verification failed (phi=" << phi_final << ", kkt=" << kkt_resid
            << "); trace:" << trace.str();
        throw SolverError(msg.str());
    }
    return u;
}

Vector sdcbf_filter(const SdcbfController& ctrl, const Vector& x, double h) {
    const Vector kd = ctrl.nominal(x);
    auto phi = [&](const Vector& u) {
        return decrement_residual(ctrl.barrier, ctrl.tableau, ctrl.system, x, u, h);
    };
    return project_single_constraint(kd, phi, ctrl.solver);
}

}  // namespace sdcbf
