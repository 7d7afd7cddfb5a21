#pragma once

#include <functional>
#include <map>
#include <mutex>

#include "cate/common.hpp"

namespace cate {

// Gauss-Legendre nodes and weights on [0,1]; exact for polynomials of degree <= 2n-1.
struct GaussRule {
    Vec nodes, weights;
};

// Golub-Welsch: eigenvalues of the Jacobi matrix give the nodes on [-1,1],
// squared first eigenvector components give the weights.
inline GaussRule gauss_legendre_01(int n) {
    if (n < 1) throw ConfigError("gauss_legendre_01: need at least one node");
    static std::map<int, GaussRule> cache;
    static std::mutex mu;
    {
        std::lock_guard<std::mutex> lk(mu);
        auto it = cache.find(n);
        if (it != cache.end()) return it->second;
    }
    Mat J = Mat::Zero(n, n);
    for (int i = 1; i < n; ++i) {
        double b = i / std::sqrt(4.0 * i * i - 1.0);
        J(i, i - 1) = b;
        J(i - 1, i) = b;
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(J);
    GaussRule r;
    r.nodes = Vec(n);
    r.weights = Vec(n);
    for (int i = 0; i < n; ++i) {
        r.nodes[i] = 0.5 * (es.eigenvalues()[i] + 1.0);        // map [-1,1] -> [0,1]
        double v0 = es.eigenvectors()(0, i);
        r.weights[i] = v0 * v0;                                 // total mass 1 on [0,1]
    }
    {
        std::lock_guard<std::mutex> lk(mu);
        cache.emplace(n, r);
    }
    return r;
}

// Tensor-product rule over an axis-aligned box; callback receives node and weight.
// Weights include the box volume, so summing f(x)*w integrates f over the box.
inline void for_each_tensor_node(const Box& box, int nodes_per_axis,
                                 const std::function<void(const Vec&, double)>& fn) {
    const int d = box.dim();
    GaussRule r = gauss_legendre_01(nodes_per_axis);
    std::vector<int> idx(d, 0);
    Vec x(d);
    while (true) {
        double w = box.volume() > 0.0 ? 1.0 : 0.0;
        for (int j = 0; j < d; ++j) {
            x[j] = box.lo[j] + (box.hi[j] - box.lo[j]) * r.nodes[idx[j]];
            w *= (box.hi[j] - box.lo[j]) * r.weights[idx[j]];
        }
        if (w != 0.0) fn(x, w);
        int j = 0;
        while (j < d && ++idx[j] == nodes_per_axis) idx[j++] = 0;
        if (j == d) break;
    }
}

inline double integrate_box(const Box& box, int nodes_per_axis,
                            const std::function<double(const Vec&)>& f) {
    double s = 0.0;
    for_each_tensor_node(box, nodes_per_axis, [&](const Vec& x, double w) { s += w * f(x); });
    return s;
}

}  // namespace cate
