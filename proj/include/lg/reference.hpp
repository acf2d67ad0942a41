#pragma once

#include <cstdint>
#include <vector>

#include "lg/engine.hpp"

namespace lg {
namespace ref {

// Serial reference network evaluation: straight nested-loop convolution with
// one gather per output element, no parallelism, no shared code with the
// OpenMP kernels. Kept for testing (forward oracle, 64-bit finite-difference
// recomputation) and as the baseline of the kernel benchmark.

template <typename T>
struct PlainWeights {
    std::vector<std::vector<T>> conv_w;  // flattened (k,c,kh,kw)
    std::vector<std::vector<T>> conv_b;
    std::vector<std::vector<T>> skip_w;
    std::vector<std::vector<T>> skip_b;
    std::vector<T> head_w;
    std::vector<T> head_b;
};

template <typename T>
PlainWeights<T> widen(const NetworkWeights& w) {
    PlainWeights<T> p;
    for (const auto& t : w.conv_w) p.conv_w.emplace_back(t.v.begin(), t.v.end());
    for (const auto& b : w.conv_b) p.conv_b.emplace_back(b.begin(), b.end());
    for (const auto& t : w.skip_w) p.skip_w.emplace_back(t.v.begin(), t.v.end());
    for (const auto& b : w.skip_b) p.skip_b.emplace_back(b.begin(), b.end());
    p.head_w.assign(w.head_w.v.begin(), w.head_w.v.end());
    p.head_b.assign(w.head_b.begin(), w.head_b.end());
    return p;
}

// Logits of the whole batch, flattened batch-major.
template <typename T>
std::vector<T> forward_logits(const NetworkSpec& spec, const PlainWeights<T>& w,
                              const Batch& batch);

// Mean softmax cross-entropy of the batch.
template <typename T>
T forward_loss(const NetworkSpec& spec, const PlainWeights<T>& w, const Batch& batch);

extern template std::vector<float> forward_logits<float>(const NetworkSpec&,
                                                         const PlainWeights<float>&, const Batch&);
extern template std::vector<double> forward_logits<double>(const NetworkSpec&,
                                                           const PlainWeights<double>&,
                                                           const Batch&);
extern template float forward_loss<float>(const NetworkSpec&, const PlainWeights<float>&,
                                          const Batch&);
extern template double forward_loss<double>(const NetworkSpec&, const PlainWeights<double>&,
                                            const Batch&);

// Serial single-tensor convolution, used directly by kernel-level tests and
// the benchmark.
void conv2d_serial(const Tensor4& in, const Tensor4& w, const std::vector<float>& bias,
                   Tensor4& out, int stride, int pad);

}  // namespace ref
}  // namespace lg
