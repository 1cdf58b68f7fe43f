#include "sdcbf/barrier.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "sdcbf/errors.hpp"
#include "sdcbf/numdiff.hpp"

namespace sdcbf {

Alpha alpha_from_name(const std::string& name, double gain) {
    if (name == "identity") return Alpha{"identity", 1.0};
    if (name == "linear") {
        if (!(gain > 0.0)) throw ConfigError("alpha 'linear': gain must be positive");
        return Alpha{"linear", gain};
    }
    throw ConfigError("alpha_from_name: unknown comparison function '" + name + "'");
}

double eval_barrier(const BarrierFamily& b, const Vector& x) {
    const double v = b.value(x);
    if (!std::isfinite(v)) throw NumericError("eval_barrier: non-finite barrier value");
    return v;
}

int SafeSetSpec::state_dim() const {
    return kind == SafeSetKind::ConfigBall2d ? 4 : 2;
}

std::string SafeSetSpec::name() const {
    switch (kind) {
        case SafeSetKind::LyapunovSublevel: return "lyapunov";
        case SafeSetKind::ConfigEllipsoid1d: return "config_ellipsoid";
        case SafeSetKind::Halfspace1d: return "halfspace";
        case SafeSetKind::ConfigBall2d: return "config_ball";
    }
    return "unknown";
}

SafeSetSpec SafeSetSpec::from_name(const std::string& name) {
    SafeSetSpec s;
    if (name == "lyapunov") {
        s.kind = SafeSetKind::LyapunovSublevel;
        s.quadratic_form = care_double_integrator();
    } else if (name == "config_ellipsoid") {
        s.kind = SafeSetKind::ConfigEllipsoid1d;
    } else if (name == "halfspace") {
        s.kind = SafeSetKind::Halfspace1d;
    } else if (name == "config_ball") {
        s.kind = SafeSetKind::ConfigBall2d;
    } else {
        throw ConfigError("SafeSetSpec: unknown safe set '" + name + "'");
    }
    return s;
}

BarrierFamily make_barrier(const SafeSetSpec& set, const Alpha& alpha) {
    BarrierFamily b;
    b.alpha = alpha;
    switch (set.kind) {
        case SafeSetKind::LyapunovSublevel: {
            const Matrix p = set.quadratic_form;
            if (p.rows() != 2 || p.cols() != 2) {
                throw ConfigError("make_barrier: lyapunov set needs a 2x2 quadratic form");
            }
            b.value = [p](const Vector& x) { return 1.0 - x.dot(p * x); };
            b.structure = BarrierStructure{b.value, 2, true};
            b.margin = 0.3;
            break;
        }
        case SafeSetKind::ConfigEllipsoid1d:
            b.value = [](const Vector& x) { return 1.0 - x(0) * x(0); };
            b.structure = BarrierStructure{
                [](const Vector& q) { return 1.0 - q(0) * q(0); }, 1, true};
            b.margin = 0.5;
            break;
        case SafeSetKind::Halfspace1d: {
            const double c = set.offset;
            b.value = [c](const Vector& x) { return x(0) + c; };
            b.structure = BarrierStructure{[c](const Vector& q) { return q(0) + c; }, 1, true};
            b.margin = 0.5;
            break;
        }
        case SafeSetKind::ConfigBall2d:
            b.value = [](const Vector& x) { return 1.0 - x.head(2).squaredNorm(); };
            b.structure = BarrierStructure{
                [](const Vector& q) { return 1.0 - q.squaredNorm(); }, 1, true};
            b.margin = 0.5;
            break;
    }
    return b;
}

namespace {

// Distance from z to the ellipse {y : y^T P y = 1} for z outside it, solved in
// the eigenbasis of P: the projection is y_i = z_i / (1 + t lambda_i) where t
// is the positive root of sum_i lambda_i z_i^2 / (1 + t lambda_i)^2 = 1.
double ellipse_exterior_distance(const Matrix& p, const Vector& x) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(p);
    const Vector lam = es.eigenvalues();
    const Vector z = es.eigenvectors().transpose() * x;

    auto g = [&](double t) {
        double acc = -1.0;
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            const double d = 1.0 + t * lam(i);
            acc += lam(i) * z(i) * z(i) / (d * d);
        }
        return acc;
    };
    auto dg = [&](double t) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            const double d = 1.0 + t * lam(i);
            acc -= 2.0 * lam(i) * lam(i) * z(i) * z(i) / (d * d * d);
        }
        return acc;
    };

    double lo = 0.0, hi = 1.0;
    int grow = 0;
    while (g(hi) > 0.0) {
        lo = hi;
        hi *= 2.0;
        if (++grow > 80) throw NumericError("distance_to_set: ellipse projection bracket failed");
    }
    double t = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double val = g(t);
        if (val > 0.0) lo = t; else hi = t;
        if (std::abs(val) <= 1e-12) break;
        double step = val / dg(t);
        double tn = t - step;
        if (!(tn > lo && tn < hi)) tn = 0.5 * (lo + hi);  // bisection safeguard
        if (std::abs(tn - t) <= 1e-14 * (1.0 + t)) { t = tn; break; }
        t = tn;
        if (it == 199) {
            throw NumericError("distance_to_set: ellipse projection did not converge "
                               "after 200 iterations");
        }
    }
    Vector y(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) y(i) = z(i) / (1.0 + t * lam(i));
    return (z - y).norm();
}

}  // namespace

double distance_to_set(const SafeSetSpec& set, const Vector& x) {
    if (x.size() != set.state_dim()) {
        throw NumericError("distance_to_set: state dimension mismatch");
    }
    switch (set.kind) {
        case SafeSetKind::LyapunovSublevel:
            if (x.dot(set.quadratic_form * x) <= 1.0) return 0.0;
            return ellipse_exterior_distance(set.quadratic_form, x);
        case SafeSetKind::ConfigEllipsoid1d:
            return std::max(0.0, std::abs(x(0)) - 1.0);
        case SafeSetKind::Halfspace1d:
            return std::max(0.0, -(x(0) + set.offset));
        case SafeSetKind::ConfigBall2d:
            return std::max(0.0, x.head(2).norm() - 1.0);
    }
    return 0.0;
}

double decrement_residual(const BarrierFamily& b, const ButcherTableau& tab,
                          const ControlAffineSystem& sys, const Vector& x, const Vector& u,
                          double h) {
    if (!(h > 0.0)) throw NumericError("decrement_residual: sample period must be positive");
    const double s_now = eval_barrier(b, x);
    const double s_next = eval_barrier(b, rk_step(tab, sys, x, u, h));
    return -s_next + s_now - h * b.alpha(s_now);
}

namespace {

// Velocity fibers are unconstrained for the configuration-dependent sets; the
// sampling boxes below match the experiment ranges.
constexpr double kSingleFiberHalfWidth = 5.0;
constexpr double kDoubleFiberHalfWidth = 1.0;

std::vector<Vector> boundary_samples(const SafeSetSpec& set, int resolution) {
    std::vector<Vector> pts;
    pts.reserve(static_cast<size_t>(resolution) + 4);
    switch (set.kind) {
        case SafeSetKind::LyapunovSublevel: {
            Eigen::SelfAdjointEigenSolver<Matrix> es(set.quadratic_form);
            const Matrix axes =
                es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal();
            for (int i = 0; i < resolution; ++i) {
                const double t = 2.0 * M_PI * i / resolution;
                Vector c(2);
                c << std::cos(t), std::sin(t);
                pts.push_back(axes * c);
            }
            break;
        }
        case SafeSetKind::ConfigEllipsoid1d: {
            const int half = resolution / 2;
            for (int i = 0; i < half; ++i) {
                const double qd = -kSingleFiberHalfWidth +
                                  2.0 * kSingleFiberHalfWidth * i / (half - 1);
                Vector a(2), c(2);
                a << 1.0, qd;
                c << -1.0, qd;
                pts.push_back(a);
                pts.push_back(c);
            }
            break;
        }
        case SafeSetKind::Halfspace1d: {
            for (int i = 0; i < resolution; ++i) {
                const double qd = -kSingleFiberHalfWidth +
                                  2.0 * kSingleFiberHalfWidth * i / (resolution - 1);
                Vector a(2);
                a << -set.offset, qd;
                pts.push_back(a);
            }
            break;
        }
        case SafeSetKind::ConfigBall2d: {
            const int fibers = 8;
            const int angles = std::max(4, resolution / fibers);
            for (int j = 0; j < fibers; ++j) {
                Vector qd(2);
                qd << -kDoubleFiberHalfWidth + 2.0 * kDoubleFiberHalfWidth * j / (fibers - 1),
                      kDoubleFiberHalfWidth - 2.0 * kDoubleFiberHalfWidth * j / (fibers - 1);
                for (int i = 0; i < angles; ++i) {
                    const double t = 2.0 * M_PI * i / angles;
                    Vector x(4);
                    x << std::cos(t), std::sin(t), qd(0), qd(1);
                    pts.push_back(x);
                }
            }
            break;
        }
    }
    return pts;
}

Box collar_bounding_box(const SafeSetSpec& set, double eps_prime) {
    switch (set.kind) {
        case SafeSetKind::LyapunovSublevel: {
            const Matrix pinv = set.quadratic_form.inverse();
            Box b;
            b.lo = Vector(2);
            b.hi = Vector(2);
            for (int i = 0; i < 2; ++i) {
                const double half = std::sqrt(pinv(i, i)) + eps_prime;
                b.lo(i) = -half;
                b.hi(i) = half;
            }
            return b;
        }
        case SafeSetKind::ConfigEllipsoid1d: {
            Box b;
            b.lo = Vector(2);
            b.hi = Vector(2);
            b.lo << -1.0 - eps_prime, -kSingleFiberHalfWidth;
            b.hi << 1.0 + eps_prime, kSingleFiberHalfWidth;
            return b;
        }
        case SafeSetKind::Halfspace1d: {
            Box b;
            b.lo = Vector(2);
            b.hi = Vector(2);
            b.lo << -set.offset - eps_prime, -kSingleFiberHalfWidth;
            b.hi << -set.offset + 1.0, kSingleFiberHalfWidth;
            return b;
        }
        case SafeSetKind::ConfigBall2d: {
            Box b;
            b.lo = Vector(4);
            b.hi = Vector(4);
            const double half = 1.0 + eps_prime;
            b.lo << -half, -half, -kDoubleFiberHalfWidth, -kDoubleFiberHalfWidth;
            b.hi << half, half, kDoubleFiberHalfWidth, kDoubleFiberHalfWidth;
            return b;
        }
    }
    return Box::centered(set.state_dim(), 1.0 + eps_prime);
}

}  // namespace

std::string CoercivityReport::to_text(const std::string& set_name) const {
    std::ostringstream os;
    os << "coercivity report\n";
    os << "safe_set: " << set_name << "\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", sigma);
    os << "sigma: " << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.12g", mu);
    os << "mu: " << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.12g", eps_prime);
    os << "eps_prime: " << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.12g", eps);
    os << "eps: " << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.12g", delta_for(0.1));
    os << "delta(eta=0.1): " << buf << "\n";
    os << "boundary_samples: " << boundary_samples << "\n";
    os << "collar_samples: " << collar_samples << "\n";
    return os.str();
}

CoercivityReport coercivity_constants(const BarrierFamily& b, const SafeSetSpec& set,
                                      double eps_prime, int resolution) {
    if (!(eps_prime > 0.0)) throw NumericError("coercivity_constants: collar must be positive");
    if (resolution < 16) throw NumericError("coercivity_constants: resolution too small");

    CoercivityReport rep;
    rep.eps_prime = eps_prime;

    const auto boundary = boundary_samples(set, resolution);
    double min_grad = std::numeric_limits<double>::infinity();
    for (const auto& x : boundary) {
        min_grad = std::min(min_grad, gradient_fd(b.value, x).norm());
    }
    rep.boundary_samples = static_cast<long>(boundary.size());
    if (!(min_grad > 1e-8)) {
        throw NumericError("coercivity_constants: boundary gradient degenerates (zero is not "
                           "a regular value of the barrier)");
    }
    rep.sigma = min_grad;

    if (set.kind == SafeSetKind::Halfspace1d) {
        // Affine barrier on an unbounded set: curvature is identically zero and
        // the collar is whatever the caller asked for.
        rep.mu = 0.0;
        rep.eps = eps_prime;
        rep.collar_samples = 0;
        return rep;
    }

    const Box box = collar_bounding_box(set, eps_prime);
    std::mt19937_64 rng(0x5dcbfULL ^ static_cast<std::uint64_t>(resolution));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double max_hess = 0.0;
    long kept = 0;
    while (kept < resolution) {
        Vector x(box.lo.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            x(i) = box.lo(i) + (box.hi(i) - box.lo(i)) * unit(rng);
        }
        if (distance_to_set(set, x) > eps_prime) continue;
        ++kept;
        max_hess = std::max(max_hess, spectral_norm_sym(hessian_fd(b.value, x)));
    }
    rep.collar_samples = kept;
    rep.mu = max_hess;
    rep.eps = rep.mu > 0.0 ? std::min(eps_prime, rep.sigma / rep.mu) : eps_prime;
    return rep;
}

double estimate_lipschitz(const BarrierFamily& b, const Box& region, int samples,
                          std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double max_grad = 0.0;
    for (int k = 0; k < samples; ++k) {
        Vector x(region.lo.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            x(i) = region.lo(i) + (region.hi(i) - region.lo(i)) * unit(rng);
        }
        max_grad = std::max(max_grad, gradient_fd(b.value, x).norm());
    }
    return 1.05 * max_grad;
}

Matrix care_double_integrator() {
    const double r3 = std::sqrt(3.0);
    Matrix p(2, 2);
    p << r3, 1.0,
         1.0, r3;
    return p;
}

}  // namespace sdcbf
