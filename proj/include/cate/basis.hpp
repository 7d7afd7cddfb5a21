#pragma once

#include <functional>
#include <memory>

#include "cate/common.hpp"

namespace cate {

// Shifted Legendre polynomials, orthonormal on [0,1] under Lebesgue measure:
//   rho_m(u) = sum_{l=0..m} (-1)^{l+m} sqrt(2m+1) C(m,l) C(m+l,l) u^l.
// Evaluation uses the three-term recurrence on t = 2u-1, which is algebraically
// identical and stays stable at degrees where the monomial form cancels badly.
inline void legendre_shifted_all(int max_degree, double u, double* out) {
    const double t = 2.0 * u - 1.0;
    double pm1 = 1.0, p = t;
    out[0] = 1.0;
    if (max_degree >= 1) out[1] = std::sqrt(3.0) * t;
    for (int m = 2; m <= max_degree; ++m) {
        double pn = ((2.0 * m - 1.0) * t * p - (m - 1.0) * pm1) / m;
        pm1 = p;
        p = pn;
        out[m] = std::sqrt(2.0 * m + 1.0) * pn;
    }
}

inline double legendre_shifted(int m, double u) {
    if (m < 0) throw ConfigError("legendre_shifted: degree must be >= 0");
    std::vector<double> buf(m + 1);
    legendre_shifted_all(m, u, buf.data());
    return buf[m];
}

// Monomial-coefficient form of rho_m; test oracle for the recurrence and the
// documented definition. Unstable past m ~ 20, use only at small degree.
inline double legendre_shifted_coeff_form(int m, double u) {
    double s = 0.0;
    for (int l = 0; l <= m; ++l) {
        double sign = ((l + m) % 2 == 0) ? 1.0 : -1.0;
        s += sign * std::sqrt(2.0 * m + 1.0) * binomial(m, l) * binomial(m + l, l) * std::pow(u, l);
    }
    return s;
}

// Multi-indices of total degree <= degree in graded-lex order: ascending total
// degree, ties broken lexicographically on (m_1,...,m_d). Index 0 is the
// constant, so coefficient 0 of any fit is the level.
inline std::vector<std::vector<int>> graded_multi_indices(int d, int degree) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur(d, 0);
    for (int total = 0; total <= degree; ++total) {
        // enumerate compositions of `total` into d parts, lexicographically
        std::function<void(int, int)> rec = [&](int pos, int rem) {
            if (pos == d - 1) {
                cur[pos] = rem;
                out.push_back(cur);
                return;
            }
            for (int v = 0; v <= rem; ++v) {
                cur[pos] = v;
                rec(pos + 1, rem - v);
            }
        };
        rec(0, total);
    }
    return out;
}

// Tensor products of shifted Legendre polynomials with total degree <= degree;
// q = C(d+degree, degree) functions, orthonormal on [0,1]^d.
struct TensorBasisSpec {
    int d = 1;
    int degree = 0;
    std::vector<std::vector<int>> indices;

    TensorBasisSpec() = default;
    TensorBasisSpec(int d_, int degree_) : d(d_), degree(degree_) {
        if (d < 1) throw ConfigError("TensorBasisSpec: dimension must be >= 1");
        if (degree < 0) throw ConfigError("TensorBasisSpec: degree must be >= 0");
        indices = graded_multi_indices(d, degree);
    }
    int size() const { return static_cast<int>(indices.size()); }
};

inline void eval_tensor_basis(const TensorBasisSpec& spec, const Vec& v, Vec& out) {
    const int d = spec.d;
    if (v.size() != d) throw ConfigError("eval_tensor_basis: point dimension mismatch");
    Mat per_axis(spec.degree + 1, d);
    std::vector<double> col(spec.degree + 1);
    for (int j = 0; j < d; ++j) {
        legendre_shifted_all(spec.degree, v[j], col.data());
        for (int m = 0; m <= spec.degree; ++m) per_axis(m, j) = col[m];
    }
    out.resize(spec.size());
    for (int i = 0; i < spec.size(); ++i) {
        double p = 1.0;
        for (int j = 0; j < d; ++j) p *= per_axis(spec.indices[i][j], j);
        out[i] = p;
    }
}

inline Vec eval_tensor_basis(const TensorBasisSpec& spec, const Vec& v) {
    Vec out;
    eval_tensor_basis(spec, v, out);
    return out;
}

// Local window at x0 with bandwidth h: the cube of side h centered at x0.
// stretch() maps it onto [0,1]^d; the kernel is the normalized indicator.
struct LocalizedFrame {
    Vec x0;
    double h = 0.0;

    LocalizedFrame() = default;
    LocalizedFrame(Vec x0_, double h_) : x0(std::move(x0_)), h(h_) {
        if (!(h > 0.0)) throw ConfigError("LocalizedFrame: bandwidth must be positive");
    }
    int dim() const { return static_cast<int>(x0.size()); }

    bool in_window(const Vec& x) const {
        for (int j = 0; j < dim(); ++j)
            if (std::abs(x[j] - x0[j]) > h / 2.0) return false;
        return true;
    }
    Vec stretch(const Vec& x) const {
        return (Vec::Constant(dim(), 0.5) + (x - x0) / h).eval();
    }
    // K_h(x) = h^{-d} 1(||x - x0||_inf <= h/2)
    double kernel_weight(const Vec& x) const {
        return in_window(x) ? std::pow(h, -dim()) : 0.0;
    }
    Box window() const { return cube_at(x0, h); }
};

// A finite basis on [0,1]^d that is polynomial on each of a finite list of
// boxes (one box for tensor families, one per cube for piecewise families).
// pieces() drives exact Gram quadrature.
class BasisSet {
public:
    virtual ~BasisSet() = default;
    virtual int size() const = 0;
    virtual int dim() const = 0;
    virtual void eval(const Vec& v, Vec& out) const = 0;
    virtual std::vector<Box> pieces() const = 0;
    virtual int piece_degree() const = 0;

    Vec eval(const Vec& v) const {
        Vec out;
        eval(v, out);
        return out;
    }
};

// First k functions of the graded tensor Legendre family; any prefix of an
// orthonormal family is orthonormal, so every k >= 1 is admissible.
class TensorPrefixBasis : public BasisSet {
public:
    TensorPrefixBasis(int d, int k) : d_(d), k_(k) {
        if (k < 1) throw ConfigError("TensorPrefixBasis: size must be >= 1");
        int degree = 0;
        while (static_cast<double>(binomial(d + degree, degree)) < k) ++degree;
        spec_ = TensorBasisSpec(d, degree);
    }
    using BasisSet::eval;
    int size() const override { return k_; }
    int dim() const override { return d_; }
    void eval(const Vec& v, Vec& out) const override {
        Vec full = eval_tensor_basis(spec_, v);
        out = full.head(k_);
    }
    std::vector<Box> pieces() const override { return {unit_box(d_)}; }
    int piece_degree() const override { return spec_.degree; }
    const TensorBasisSpec& spec() const { return spec_; }

private:
    int d_, k_;
    TensorBasisSpec spec_;
};

// Blocked basis on disjoint sub-cubes of [0,1]^d: each cube carries the tensor
// Legendre block of the given total degree, rescaled to the cube and normalized
// so the whole family is orthonormal under the uniform probability measure on
// the cube union. A single cube [0,1]^d with scale 1 reduces to the plain
// tensor family.
struct PiecewiseCubeBasisSpec {
    std::vector<Vec> centers;
    std::vector<double> sides;
    int block_degree = 0;
};

class PiecewiseCubeBasis : public BasisSet {
public:
    explicit PiecewiseCubeBasis(const PiecewiseCubeBasisSpec& spec) : spec_(spec) {
        if (spec.centers.empty()) throw ConfigError("PiecewiseCubeBasis: no cubes");
        if (spec.centers.size() != spec.sides.size())
            throw ConfigError("PiecewiseCubeBasis: centers/sides length mismatch");
        d_ = static_cast<int>(spec.centers[0].size());
        block_ = TensorBasisSpec(d_, spec.block_degree);
        double vol_union = 0.0;
        for (std::size_t j = 0; j < spec.centers.size(); ++j) {
            if (!(spec.sides[j] > 0.0)) throw ConfigError("PiecewiseCubeBasis: cube side must be positive");
            boxes_.push_back(cube_at(spec.centers[j], spec.sides[j]));
            vol_union += boxes_.back().volume();
        }
        for (std::size_t a = 0; a < boxes_.size(); ++a)
            for (std::size_t b = a + 1; b < boxes_.size(); ++b) {
                Box dummy;
                if (intersect(boxes_[a], boxes_[b], dummy))
                    throw ConfigError("PiecewiseCubeBasis: cubes " + std::to_string(a) + " and " +
                                      std::to_string(b) + " overlap");
            }
        norms_.resize(boxes_.size());
        for (std::size_t j = 0; j < boxes_.size(); ++j)
            norms_[j] = std::sqrt(vol_union / boxes_[j].volume());
    }

    using BasisSet::eval;
    int size() const override { return static_cast<int>(boxes_.size()) * block_.size(); }
    int dim() const override { return d_; }
    int cube_count() const { return static_cast<int>(boxes_.size()); }
    int block_size() const { return block_.size(); }

    // Blocks of cubes not containing v are identically zero.
    void eval(const Vec& v, Vec& out) const override {
        out = Vec::Zero(size());
        for (std::size_t j = 0; j < boxes_.size(); ++j) {
            if (!boxes_[j].contains(v)) continue;
            Vec local(d_);
            for (int c = 0; c < d_; ++c)
                local[c] = (v[c] - boxes_[j].lo[c]) / (boxes_[j].hi[c] - boxes_[j].lo[c]);
            Vec blk = eval_tensor_basis(block_, local);
            out.segment(static_cast<int>(j) * block_.size(), block_.size()) = norms_[j] * blk;
            break;  // cubes are disjoint up to shared faces; first match wins
        }
    }
    std::vector<Box> pieces() const override { return boxes_; }
    int piece_degree() const override { return block_.degree; }

private:
    PiecewiseCubeBasisSpec spec_;
    int d_;
    TensorBasisSpec block_;
    std::vector<Box> boxes_;
    std::vector<double> norms_;
};

inline std::shared_ptr<PiecewiseCubeBasis> build_piecewise_cube_basis(const PiecewiseCubeBasisSpec& spec) {
    return std::make_shared<PiecewiseCubeBasis>(spec);
}

// rho_h(x) = rho(1/2 + (x-x0)/h) when x is in the window, zero outside.
inline Vec eval_localized_basis(const BasisSet& basis, const LocalizedFrame& frame, const Vec& x) {
    if (!frame.in_window(x)) return Vec::Zero(basis.size());
    return basis.eval(frame.stretch(x));
}

}  // namespace cate
