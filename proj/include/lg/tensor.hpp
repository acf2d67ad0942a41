#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace lg {

// Dense 4-D float tensor, row-major (n, c, h, w). Used for activations
// (batch, channels, height, width) and conv weights (kernels, channels, kh, kw).
struct Tensor4 {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<float> v;

    Tensor4() = default;
    Tensor4(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_), v(static_cast<size_t>(n_) * c_ * h_ * w_, 0.0f) {}

    size_t size() const { return v.size(); }

    float& at(int i, int j, int y, int x) {
        return v[((static_cast<size_t>(i) * c + j) * h + y) * w + x];
    }
    float at(int i, int j, int y, int x) const {
        return v[((static_cast<size_t>(i) * c + j) * h + y) * w + x];
    }

    float* plane(int i, int j) {
        return v.data() + (static_cast<size_t>(i) * c + j) * h * w;
    }
    const float* plane(int i, int j) const {
        return v.data() + (static_cast<size_t>(i) * c + j) * h * w;
    }

    void zero() { std::fill(v.begin(), v.end(), 0.0f); }
};

// Row-major matrix, used for the classifier head.
struct Mat {
    int rows = 0, cols = 0;
    std::vector<float> v;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0f) {}

    float& at(int r, int c_) { return v[static_cast<size_t>(r) * cols + c_]; }
    float at(int r, int c_) const { return v[static_cast<size_t>(r) * cols + c_]; }
    float* row(int r) { return v.data() + static_cast<size_t>(r) * cols; }
    const float* row(int r) const { return v.data() + static_cast<size_t>(r) * cols; }
};

}  // namespace lg
