#pragma once

#include <cmath>
#include <functional>

#include "sdcbf/types.hpp"

namespace sdcbf {

using ScalarField = std::function<double(const Vector&)>;

/// Central-difference gradient of a scalar field.
inline Vector gradient_fd(const ScalarField& f, const Vector& x, double step = 1e-6) {
    Vector g(x.size());
    Vector xp = x, xm = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double hi = step * std::max(1.0, std::abs(x(i)));
        xp(i) = x(i) + hi;
        xm(i) = x(i) - hi;
        g(i) = (f(xp) - f(xm)) / (2.0 * hi);
        xp(i) = x(i);
        xm(i) = x(i);
    }
    return g;
}

/// Central-difference Hessian of a scalar field (symmetric by construction).
inline Matrix hessian_fd(const ScalarField& f, const Vector& x, double step = 1e-4) {
    const Eigen::Index n = x.size();
    Matrix h(n, n);
    const double f0 = f(x);
    Vector w = x;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double hi = step * std::max(1.0, std::abs(x(i)));
        w(i) = x(i) + hi;
        const double fp = f(w);
        w(i) = x(i) - hi;
        const double fm = f(w);
        w(i) = x(i);
        h(i, i) = (fp - 2.0 * f0 + fm) / (hi * hi);
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double hj = step * std::max(1.0, std::abs(x(j)));
            w(i) = x(i) + hi; w(j) = x(j) + hj;
            const double fpp = f(w);
            w(j) = x(j) - hj;
            const double fpm = f(w);
            w(i) = x(i) - hi; w(j) = x(j) + hj;
            const double fmp = f(w);
            w(j) = x(j) - hj;
            const double fmm = f(w);
            w(i) = x(i); w(j) = x(j);
            h(i, j) = h(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
        }
    }
    return h;
}

/// Spectral norm of a symmetric matrix.
inline double spectral_norm_sym(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es((m + m.transpose()) / 2.0);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace sdcbf
