#pragma once

#include <cstddef>
#include <vector>

#include "amvcast/errors.hpp"

namespace amvcast {

/// Dense (N, C, H, W) tensor, row-major, contiguous.
template <class T>
struct Tensor4 {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> v;

    Tensor4() = default;
    Tensor4(int n_, int c_, int h_, int w_) : n(n_), c(c_), h(h_), w(w_) {
        if (n_ < 1 || c_ < 1 || h_ < 1 || w_ < 1) {
            throw ShapeError("tensor dims must all be at least 1");
        }
        v.assign(static_cast<std::size_t>(n_) * c_ * h_ * w_, T(0));
    }

    std::size_t size() const { return v.size(); }

    std::size_t index(int in, int ic, int ih, int iw) const {
        return ((static_cast<std::size_t>(in) * c + ic) * h + ih) * w + iw;
    }

    T& at(int in, int ic, int ih, int iw) { return v[index(in, ic, ih, iw)]; }
    T at(int in, int ic, int ih, int iw) const { return v[index(in, ic, ih, iw)]; }

    T* plane(int in, int ic) { return v.data() + index(in, ic, 0, 0); }
    const T* plane(int in, int ic) const { return v.data() + index(in, ic, 0, 0); }

    bool same_shape(const Tensor4& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
};

using Tensor4f = Tensor4<float>;
using Tensor4d = Tensor4<double>;

}  // namespace amvcast
