#pragma once

#include <vector>

#include "lg/tensor.hpp"

namespace lg {

// OpenMP-parallel compute kernels. Every output element is produced by exactly
// one thread with a fixed serial accumulation order, so results are bitwise
// identical for any thread count.

void conv2d_forward(const Tensor4& in, const Tensor4& w, const std::vector<float>& bias,
                    Tensor4& out, int stride, int pad);

// dL/d(input) given dL/d(output).
void conv2d_backward_input(const Tensor4& w, const Tensor4& dout, Tensor4& din,
                           int stride, int pad);

// dL/d(weights), dL/d(bias); accumulates over the batch.
void conv2d_backward_weights(const Tensor4& in, const Tensor4& dout, Tensor4& dw,
                             std::vector<float>& db, int stride, int pad);

// 2x2 max pool, stride 2, no padding; floor semantics on odd dims.
// argmax records the flat input offset of each selected element.
void maxpool2_forward(const Tensor4& in, Tensor4& out, std::vector<int>& argmax);
void maxpool2_backward(const Tensor4& dout, const std::vector<int>& argmax, Tensor4& din);

void relu_forward(Tensor4& x);
// din *= (activated output > 0), elementwise.
void relu_backward(const Tensor4& activated, Tensor4& din);

// out[b] = W * in[b] + bias for each row of a flattened batch.
void fc_forward(const float* in, int batch, int in_dim, const float* w, const float* bias,
                int out_dim, float* out);
void fc_backward(const float* in, const float* dout, int batch, int in_dim, int out_dim,
                 const float* w, float* dw, float* db, float* din);

// Numerically stable softmax cross-entropy. probs holds softmax(logits);
// returns mean loss. dlogits = (probs - onehot) / batch when requested.
double softmax_cross_entropy(const float* logits, const int* labels, int batch, int classes,
                             float* probs, float* dlogits);

}  // namespace lg
