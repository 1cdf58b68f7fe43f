#pragma once

#include <Eigen/Dense>

namespace sdcbf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Axis-aligned box in state space, used as the working region X.
struct Box {
    Vector lo;
    Vector hi;

    bool contains(const Vector& x) const {
        if (x.size() != lo.size()) return false;
        return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
    }

    static Box centered(int dim, double half_width) {
        Box b;
        b.lo = Vector::Constant(dim, -half_width);
        b.hi = Vector::Constant(dim, half_width);
        return b;
    }
};

inline constexpr const char* kToolkitVersion = "0.1.0";

}  // namespace sdcbf
