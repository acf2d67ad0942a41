#include "lg/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace lg {

void conv2d_forward(const Tensor4& in, const Tensor4& w, const std::vector<float>& bias,
                    Tensor4& out, int stride, int pad) {
    const int B = in.n, C = in.c, H = in.h, W = in.w;
    const int K = w.n, kh = w.h, kw = w.w;
    const int OH = (H + 2 * pad - kh) / stride + 1;
    const int OW = (W + 2 * pad - kw) / stride + 1;
    out = Tensor4(B, K, OH, OW);

#pragma omp parallel for collapse(2) schedule(static)
    for (int b = 0; b < B; ++b) {
        for (int k = 0; k < K; ++k) {
            float* op = out.plane(b, k);
            const float bk = bias.empty() ? 0.0f : bias[k];
            for (int i = 0; i < OH * OW; ++i)
                op[i] = bk;
            for (int c = 0; c < C; ++c) {
                const float* ip = in.plane(b, c);
                const float* wp = w.plane(k, c);
                for (int fy = 0; fy < kh; ++fy) {
                    for (int fx = 0; fx < kw; ++fx) {
                        const float wv = wp[fy * kw + fx];
                        if (wv == 0.0f)
                            continue;
                        for (int oy = 0; oy < OH; ++oy) {
                            const int iy = oy * stride + fy - pad;
                            if (iy < 0 || iy >= H)
                                continue;
                            float* orow = op + oy * OW;
                            const float* irow = ip + iy * W;
                            for (int ox = 0; ox < OW; ++ox) {
                                const int ix = ox * stride + fx - pad;
                                if (ix >= 0 && ix < W)
                                    orow[ox] += wv * irow[ix];
                            }
                        }
                    }
                }
            }
        }
    }
}

void conv2d_backward_input(const Tensor4& w, const Tensor4& dout, Tensor4& din,
                           int stride, int pad) {
    const int B = dout.n, K = dout.c, OH = dout.h, OW = dout.w;
    const int C = din.c, H = din.h, W = din.w;
    const int kh = w.h, kw = w.w;

#pragma omp parallel for collapse(2) schedule(static)
    for (int b = 0; b < B; ++b) {
        for (int c = 0; c < C; ++c) {
            float* dp = din.plane(b, c);
            for (int i = 0; i < H * W; ++i)
                dp[i] = 0.0f;
            for (int k = 0; k < K; ++k) {
                const float* gp = dout.plane(b, k);
                const float* wp = w.plane(k, c);
                for (int fy = 0; fy < kh; ++fy) {
                    for (int fx = 0; fx < kw; ++fx) {
                        const float wv = wp[fy * kw + fx];
                        if (wv == 0.0f)
                            continue;
                        for (int oy = 0; oy < OH; ++oy) {
                            const int iy = oy * stride + fy - pad;
                            if (iy < 0 || iy >= H)
                                continue;
                            const float* grow = gp + oy * OW;
                            float* drow = dp + iy * W;
                            for (int ox = 0; ox < OW; ++ox) {
                                const int ix = ox * stride + fx - pad;
                                if (ix >= 0 && ix < W)
                                    drow[ix] += wv * grow[ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

void conv2d_backward_weights(const Tensor4& in, const Tensor4& dout, Tensor4& dw,
                             std::vector<float>& db, int stride, int pad) {
    const int B = in.n, C = in.c, H = in.h, W = in.w;
    const int K = dout.c, OH = dout.h, OW = dout.w;
    const int kh = dw.h, kw = dw.w;
    db.assign(K, 0.0f);

#pragma omp parallel for collapse(2) schedule(static)
    for (int k = 0; k < K; ++k) {
        for (int c = 0; c < C; ++c) {
            float* wp = dw.plane(k, c);
            for (int i = 0; i < kh * kw; ++i)
                wp[i] = 0.0f;
            for (int b = 0; b < B; ++b) {
                const float* gp = dout.plane(b, k);
                const float* ip = in.plane(b, c);
                for (int fy = 0; fy < kh; ++fy) {
                    for (int fx = 0; fx < kw; ++fx) {
                        float acc = 0.0f;
                        for (int oy = 0; oy < OH; ++oy) {
                            const int iy = oy * stride + fy - pad;
                            if (iy < 0 || iy >= H)
                                continue;
                            const float* grow = gp + oy * OW;
                            const float* irow = ip + iy * W;
                            for (int ox = 0; ox < OW; ++ox) {
                                const int ix = ox * stride + fx - pad;
                                if (ix >= 0 && ix < W)
                                    acc += grow[ox] * irow[ix];
                            }
                        }
                        wp[fy * kw + fx] += acc;
                    }
                }
            }
        }
    }

#pragma omp parallel for schedule(static)
    for (int k = 0; k < K; ++k) {
        float acc = 0.0f;
        for (int b = 0; b < B; ++b) {
            const float* gp = dout.plane(b, k);
            for (int i = 0; i < OH * OW; ++i)
                acc += gp[i];
        }
        db[k] = acc;
    }
}

void maxpool2_forward(const Tensor4& in, Tensor4& out, std::vector<int>& argmax) {
    const int B = in.n, C = in.c, H = in.h, W = in.w;
    const int OH = H / 2, OW = W / 2;
    out = Tensor4(B, C, OH, OW);
    argmax.assign(out.size(), 0);

#pragma omp parallel for collapse(2) schedule(static)
    for (int b = 0; b < B; ++b) {
        for (int c = 0; c < C; ++c) {
            const float* ip = in.plane(b, c);
            float* op = out.plane(b, c);
            int* ap = argmax.data() + (static_cast<size_t>(b) * C + c) * OH * OW;
            for (int oy = 0; oy < OH; ++oy) {
                for (int ox = 0; ox < OW; ++ox) {
                    const int iy = oy * 2, ix = ox * 2;
                    int best = iy * W + ix;
                    float bv = ip[best];
                    const int cand[3] = {iy * W + ix + 1, (iy + 1) * W + ix, (iy + 1) * W + ix + 1};
                    for (int t = 0; t < 3; ++t) {
                        if (ip[cand[t]] > bv) {
                            bv = ip[cand[t]];
                            best = cand[t];
                        }
                    }
                    op[oy * OW + ox] = bv;
                    ap[oy * OW + ox] = best;
                }
            }
        }
    }
}

void maxpool2_backward(const Tensor4& dout, const std::vector<int>& argmax, Tensor4& din) {
    const int B = dout.n, C = dout.c, OH = dout.h, OW = dout.w;
    const int HW = din.h * din.w;

#pragma omp parallel for collapse(2) schedule(static)
    for (int b = 0; b < B; ++b) {
        for (int c = 0; c < C; ++c) {
            float* dp = din.plane(b, c);
            for (int i = 0; i < HW; ++i)
                dp[i] = 0.0f;
            const float* gp = dout.plane(b, c);
            const int* ap = argmax.data() + (static_cast<size_t>(b) * C + c) * OH * OW;
            for (int i = 0; i < OH * OW; ++i)
                dp[ap[i]] += gp[i];
        }
    }
}

void relu_forward(Tensor4& x) {
    const size_t n = x.size();
    float* p = x.v.data();
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
        p[i] = p[i] > 0.0f ? p[i] : 0.0f;
}

void relu_backward(const Tensor4& activated, Tensor4& din) {
    const size_t n = din.size();
    float* d = din.v.data();
    const float* a = activated.v.data();
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
        if (a[i] <= 0.0f)
            d[i] = 0.0f;
}

void fc_forward(const float* in, int batch, int in_dim, const float* w, const float* bias,
                int out_dim, float* out) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int b = 0; b < batch; ++b) {
        for (int o = 0; o < out_dim; ++o) {
            const float* ip = in + static_cast<size_t>(b) * in_dim;
            const float* wp = w + static_cast<size_t>(o) * in_dim;
            float acc = bias ? bias[o] : 0.0f;
            for (int i = 0; i < in_dim; ++i)
                acc += wp[i] * ip[i];
            out[static_cast<size_t>(b) * out_dim + o] = acc;
        }
    }
}

void fc_backward(const float* in, const float* dout, int batch, int in_dim, int out_dim,
                 const float* w, float* dw, float* db, float* din) {
#pragma omp parallel for schedule(static)
    for (int o = 0; o < out_dim; ++o) {
        float* dwp = dw + static_cast<size_t>(o) * in_dim;
        for (int i = 0; i < in_dim; ++i)
            dwp[i] = 0.0f;
        float dbo = 0.0f;
        for (int b = 0; b < batch; ++b) {
            const float g = dout[static_cast<size_t>(b) * out_dim + o];
            const float* ip = in + static_cast<size_t>(b) * in_dim;
            for (int i = 0; i < in_dim; ++i)
                dwp[i] += g * ip[i];
            dbo += g;
        }
        db[o] = dbo;
    }

    if (din) {
#pragma omp parallel for schedule(static)
        for (int b = 0; b < batch; ++b) {
            float* dp = din + static_cast<size_t>(b) * in_dim;
            for (int i = 0; i < in_dim; ++i)
                dp[i] = 0.0f;
            const float* gp = dout + static_cast<size_t>(b) * out_dim;
            for (int o = 0; o < out_dim; ++o) {
                const float g = gp[o];
                const float* wp = w + static_cast<size_t>(o) * in_dim;
                for (int i = 0; i < in_dim; ++i)
                    dp[i] += g * wp[i];
            }
        }
    }
}

double softmax_cross_entropy(const float* logits, const int* labels, int batch, int classes,
                             float* probs, float* dlogits) {
    double total = 0.0;
    for (int b = 0; b < batch; ++b) {
        const float* lp = logits + static_cast<size_t>(b) * classes;
        float* pp = probs + static_cast<size_t>(b) * classes;
        float mx = lp[0];
        for (int c = 1; c < classes; ++c)
            mx = std::max(mx, lp[c]);
        double denom = 0.0;
        for (int c = 0; c < classes; ++c) {
            pp[c] = std::exp(lp[c] - mx);
            denom += pp[c];
        }
        for (int c = 0; c < classes; ++c)
            pp[c] = static_cast<float>(pp[c] / denom);
        total += -std::log(std::max(static_cast<double>(pp[labels[b]]), 1e-12));
        if (dlogits) {
            float* dp = dlogits + static_cast<size_t>(b) * classes;
            for (int c = 0; c < classes; ++c)
                dp[c] = (pp[c] - (c == labels[b] ? 1.0f : 0.0f)) / static_cast<float>(batch);
        }
    }
    return total / batch;
}

}  // namespace lg
