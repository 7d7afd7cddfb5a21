#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cate/basis.hpp"
#include "cate/quadrature.hpp"
#include "cate/rng.hpp"

using namespace cate;

TEST_CASE("shifted Legendre values against the closed coefficient form") {
    // The recurrence and the explicit monomial-coefficient expansion are two
    // independent routes; they must agree while the coefficient form is still
    // well conditioned.
    for (int m = 0; m <= 10; ++m) {
        for (int i = 0; i <= 40; ++i) {
            double u = i / 40.0;
            double a = legendre_shifted(m, u);
            double b = legendre_shifted_coeff_form(m, u);
            CHECK(a == doctest::Approx(b).epsilon(1e-9));
        }
    }
}

TEST_CASE("shifted Legendre endpoint and center values") {
    // P~_m(1) = sqrt(2m+1), P~_m(0) = (-1)^m sqrt(2m+1).
    for (int m = 0; m <= 8; ++m) {
        double s = std::sqrt(2.0 * m + 1.0);
        CHECK(legendre_shifted(m, 1.0) == doctest::Approx(s).epsilon(1e-12));
        CHECK(legendre_shifted(m, 0.0) == doctest::Approx((m % 2 ? -1.0 : 1.0) * s).epsilon(1e-12));
    }
    CHECK(legendre_shifted(2, 0.0) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-14));
    // odd degrees vanish at the midpoint
    CHECK(legendre_shifted(1, 0.5) == doctest::Approx(0.0));
    CHECK(legendre_shifted(3, 0.5) == doctest::Approx(0.0));
}

TEST_CASE("univariate orthonormality on [0,1]") {
    GaussRule r = gauss_legendre_01(40);
    for (int a = 0; a <= 12; ++a)
        for (int b = a; b <= 12; ++b) {
            double ip = 0.0;
            for (int i = 0; i < 40; ++i)
                ip += r.weights[i] * legendre_shifted(a, r.nodes[i]) * legendre_shifted(b, r.nodes[i]);
            CHECK(std::abs(ip - (a == b ? 1.0 : 0.0)) < 1e-12);
        }
}

TEST_CASE("graded multi-index enumeration") {
    TensorBasisSpec spec(2, 2);
    REQUIRE(spec.size() == 6);  // C(2+2, 2)
    // graded by total degree, lexicographic inside a degree level
    std::vector<std::vector<int>> expect = {{0, 0}, {0, 1}, {1, 0}, {0, 2}, {1, 1}, {2, 0}};
    for (int i = 0; i < 6; ++i) CHECK(spec.indices[static_cast<std::size_t>(i)] == expect[static_cast<std::size_t>(i)]);

    TensorBasisSpec s3(3, 4);
    CHECK(s3.size() == 35);  // C(3+4, 4)
    int prev = -1;
    for (const auto& idx : s3.indices) {
        int total = 0;
        for (int e : idx) total += e;
        CHECK(total >= prev);  // degree never decreases along the enumeration
        prev = std::max(prev, total);
    }
}

TEST_CASE("tensor basis orthonormality up to degree 4 in d = 1, 2, 3") {
    for (int d = 1; d <= 3; ++d) {
        int degree = (d == 3) ? 3 : 4;  // keep the d = 3 Gram affordable
        TensorBasisSpec spec(d, degree);
        Mat gram = Mat::Zero(spec.size(), spec.size());
        for_each_tensor_node(unit_box(d), 12, [&](const Vec& u, double w) {
            Vec r = eval_tensor_basis(spec, u);
            gram += w * r * r.transpose();
        });
        double err = (gram - Mat::Identity(spec.size(), spec.size())).cwiseAbs().maxCoeff();
        CHECK(err < 1e-10);
    }
}

TEST_CASE("prefix basis equals the head of the full family") {
    TensorPrefixBasis basis(2, 4);
    TensorBasisSpec full(2, basis.piece_degree());
    Rng rng(5);
    for (int t = 0; t < 50; ++t) {
        Vec v(2);
        v << rng.uniform(), rng.uniform();
        Vec a = basis.eval(v);
        Vec b = eval_tensor_basis(full, v).head(4);
        CHECK((a - b).cwiseAbs().maxCoeff() < 1e-14);
    }
    CHECK(basis.size() == 4);
    CHECK(basis.pieces().size() == 1);
    // smallest degree with C(2+D,D) >= 4 is D = 2
    CHECK(basis.piece_degree() == 2);
}

TEST_CASE("piecewise cube basis is orthonormal under the union-uniform law") {
    PiecewiseCubeBasisSpec spec;
    spec.block_degree = 1;
    spec.centers = {Vec::Constant(1, 0.2), Vec::Constant(1, 0.5), Vec::Constant(1, 0.8)};
    spec.sides = {0.1, 0.2, 0.1};
    PiecewiseCubeBasis basis(spec);
    REQUIRE(basis.size() == 6);

    double vol_union = 0.4;
    Mat gram = Mat::Zero(basis.size(), basis.size());
    for (const Box& b : basis.pieces())
        for_each_tensor_node(b, 8, [&](const Vec& u, double w) {
            Vec r = basis.eval(u);
            gram += (w / vol_union) * r * r.transpose();
        });
    double err = (gram - Mat::Identity(basis.size(), basis.size())).cwiseAbs().maxCoeff();
    CHECK(err < 1e-12);
}

TEST_CASE("piecewise cube basis rejects overlapping cubes") {
    PiecewiseCubeBasisSpec spec;
    spec.block_degree = 0;
    spec.centers = {Vec::Constant(1, 0.5), Vec::Constant(1, 0.55)};
    spec.sides = {0.2, 0.2};
    CHECK_THROWS_AS(PiecewiseCubeBasis{spec}, ConfigError);
}

TEST_CASE("localized frame stretches the window onto the unit cube") {
    Vec x0 = Vec::Constant(2, 0.5);
    LocalizedFrame frame(x0, 0.2);
    Vec inside = x0;
    inside[0] += 0.09;
    CHECK(frame.in_window(inside));
    Vec outside = x0;
    outside[0] += 0.11;
    CHECK(!frame.in_window(outside));
    Vec v = frame.stretch(inside);
    CHECK(v[0] == doctest::Approx(0.95));
    CHECK(v[1] == doctest::Approx(0.5));
    CHECK(frame.kernel_weight(inside) == doctest::Approx(25.0));  // h^{-d} = 0.2^{-2}
    CHECK(frame.kernel_weight(outside) == 0.0);
}

TEST_CASE("gauss rules integrate polynomials to machine precision") {
    // order-n Gauss is exact through degree 2n-1
    GaussRule r = gauss_legendre_01(6);
    for (int p = 0; p <= 11; ++p) {
        double val = 0.0;
        for (int i = 0; i < 6; ++i) val += r.weights[i] * std::pow(r.nodes[i], p);
        CHECK(val == doctest::Approx(1.0 / (p + 1)).epsilon(1e-13));
    }
    double w_total = 0.0;
    for (double w : r.weights) w_total += w;
    CHECK(w_total == doctest::Approx(1.0).epsilon(1e-14));
}
