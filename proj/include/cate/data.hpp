#pragma once

#include "cate/common.hpp"

namespace cate {

// Observations (X, A, Y) in struct-of-arrays form; A is 0/1, Y binary or real.
struct Dataset {
    Mat x;   // n x d
    Vec a;
    Vec y;

    int n() const { return static_cast<int>(x.rows()); }
    int dim() const { return static_cast<int>(x.cols()); }

    void reserve(int n, int d) {
        x.resize(n, d);
        a.resize(n);
        y.resize(n);
    }
    Vec point(int i) const { return x.row(i).transpose(); }
};

}  // namespace cate
