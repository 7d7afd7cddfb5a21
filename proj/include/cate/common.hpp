#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cate {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Config errors abort a run (CLI exit code 1); numerical guards are
// recoverable per replication (CLI exit code 2 when fatal).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericalGuardError : std::runtime_error {
    explicit NumericalGuardError(const std::string& msg) : std::runtime_error(msg) {}
};

// Largest integer strictly smaller than s: strict_floor(2.0) = 1, strict_floor(2.5) = 2.
// Polynomial degrees derived from smoothness exponents use this everywhere.
inline int strict_floor(double s) {
    if (!(s > 0.0)) throw ConfigError("strict_floor: exponent must be positive, got " + std::to_string(s));
    double c = std::ceil(s);
    return static_cast<int>(c) - 1;
}

inline double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r *= static_cast<double>(n - k + i) / i;
    return r;
}

// Axis-aligned box, closed on both ends.
struct Box {
    Vec lo, hi;
    int dim() const { return static_cast<int>(lo.size()); }
    double volume() const {
        double v = 1.0;
        for (int j = 0; j < dim(); ++j) v *= hi[j] - lo[j];
        return v;
    }
    bool contains(const Vec& x) const {
        for (int j = 0; j < dim(); ++j)
            if (x[j] < lo[j] || x[j] > hi[j]) return false;
        return true;
    }
};

inline Box unit_box(int d) {
    Box b;
    b.lo = Vec::Zero(d);
    b.hi = Vec::Ones(d);
    return b;
}

inline Box cube_at(const Vec& center, double side) {
    Box b;
    b.lo = center.array() - side / 2.0;
    b.hi = center.array() + side / 2.0;
    return b;
}

// Intersection of two boxes; empty result reported through the bool.
inline bool intersect(const Box& a, const Box& b, Box& out) {
    out.lo = a.lo.cwiseMax(b.lo);
    out.hi = a.hi.cwiseMin(b.hi);
    for (int j = 0; j < out.dim(); ++j)
        if (out.lo[j] >= out.hi[j]) return false;
    return true;
}

}  // namespace cate
