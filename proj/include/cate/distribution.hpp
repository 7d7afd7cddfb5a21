#pragma once

#include "cate/basis.hpp"
#include "cate/common.hpp"
#include "cate/construction.hpp"
#include "cate/quadrature.hpp"

namespace cate {

// Covariate distribution restricted to the estimation window and mapped onto
// [0,1]^d (v = 1/2 + (x-x0)/h). Stored as a probability measure with disjoint
// constant-density pieces, alongside window_mass = h^{-d} F(window): the
// physical density of the localized (unnormalized) measure is
// window_mass * density[i]. For uniform F and an interior window the mass is
// 1 and physical = probability. Keeping the mass separate lets the Gram
// matrix and moment integrals use one consistent measure while the stored
// distribution still integrates to 1.
struct StretchedDistribution {
    std::vector<Box> pieces;      // disjoint, inside [0,1]^d
    std::vector<double> density;  // probability density value on each piece
    double window_mass = 1.0;

    int dim() const { return pieces.empty() ? 0 : pieces[0].dim(); }
    double total_mass() const {
        double m = 0.0;
        for (std::size_t i = 0; i < pieces.size(); ++i) m += density[i] * pieces[i].volume();
        return m;
    }
    double density_at(const Vec& v) const {
        for (std::size_t i = 0; i < pieces.size(); ++i)
            if (pieces[i].contains(v)) return density[i];
        return 0.0;
    }
    double physical_density_at(const Vec& v) const { return window_mass * density_at(v); }

    static StretchedDistribution uniform01(int d) {
        StretchedDistribution sd;
        sd.pieces.push_back(unit_box(d));
        sd.density.push_back(1.0);
        sd.window_mass = 1.0;
        return sd;
    }
    // raw[i] is the physical (pre-normalization) density on boxes[i]; the mass
    // is their integral and the stored density is raw / mass.
    static StretchedDistribution from_physical(std::vector<Box> boxes, std::vector<double> raw) {
        if (boxes.size() != raw.size() || boxes.empty())
            throw ConfigError("StretchedDistribution: pieces/density mismatch");
        double mass = 0.0;
        for (std::size_t i = 0; i < boxes.size(); ++i) {
            if (raw[i] < 0.0) throw ConfigError("StretchedDistribution: negative density");
            mass += raw[i] * boxes[i].volume();
        }
        if (!(mass > 0.0)) throw ConfigError("StretchedDistribution: zero total mass in window");
        StretchedDistribution sd;
        sd.pieces = std::move(boxes);
        sd.density = std::move(raw);
        for (double& v : sd.density) v /= mass;
        sd.window_mass = mass;
        return sd;
    }
};

// The lower-bound construction's covariate distribution, restricted to the
// frame's window and stretched. Pieces are the sub-cubes and far-region slabs
// clipped to the window; the physical density is f on all of them.
inline StretchedDistribution construction_covariate_distribution(const LowerBoundConfig& c,
                                                                 const LocalizedFrame& frame) {
    if (frame.dim() != c.d) throw ConfigError("construction distribution: dimension mismatch");
    SupportSet sup(c);
    Box win = frame.window();
    std::vector<Box> boxes;
    std::vector<double> raw;
    auto add_clipped = [&](const Box& piece) {
        Box cut;
        if (!intersect(piece, win, cut)) return;
        Box v;
        v.lo = Vec(c.d);
        v.hi = Vec(c.d);
        for (int a = 0; a < c.d; ++a) {
            v.lo[a] = 0.5 + (cut.lo[a] - frame.x0[a]) / frame.h;
            v.hi[a] = 0.5 + (cut.hi[a] - frame.x0[a]) / frame.h;
        }
        boxes.push_back(v);
        raw.push_back(sup.f_value());
    };
    for (const Box& b : sup.support_cubes()) add_clipped(b);
    for (const Box& b : sup.far_boxes()) add_clipped(b);
    if (boxes.empty())
        throw ConfigError("construction distribution: window does not meet the support");
    StretchedDistribution sd = StretchedDistribution::from_physical(std::move(boxes), std::move(raw));
    // from_physical normalizes by the mass in *v*-units, which is exactly
    // h^{-d} F(window) because the stretch has Jacobian h^{-d}.
    return sd;
}

// Integrate fn against the probability measure (multiply by window_mass for
// the physical localized measure). Pieces can be split further by the caller;
// nodes_per_axis Gauss points are exact for polynomial integrands of degree
// <= 2*nodes_per_axis - 1 per axis.
template <class F>
double integrate(const StretchedDistribution& sd, int nodes_per_axis, F&& fn) {
    double total = 0.0;
    for (std::size_t i = 0; i < sd.pieces.size(); ++i) {
        if (sd.density[i] == 0.0) continue;
        double piece = 0.0;
        for_each_tensor_node(sd.pieces[i], nodes_per_axis,
                             [&](const Vec& v, double w) { piece += w * fn(v); });
        total += sd.density[i] * piece;
    }
    return total;
}

}  // namespace cate
