#include "lg/reference.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace lg {
namespace ref {

namespace {

template <typename T>
struct Plane {
    std::vector<T> v;
    int c = 0, h = 0, w = 0;  // per-sample shape

    T get(int b, int ci, int y, int x) const {
        return v[((static_cast<size_t>(b) * c + ci) * h + y) * w + x];
    }
    void set(int b, int ci, int y, int x, T val) {
        v[((static_cast<size_t>(b) * c + ci) * h + y) * w + x] = val;
    }
};

template <typename T>
Plane<T> conv_gather(const Plane<T>& in, int batch, const std::vector<T>& w,
                     const std::vector<T>& bias, int kernels, int kh, int kw, int stride,
                     int pad) {
    Plane<T> out;
    out.c = kernels;
    out.h = (in.h + 2 * pad - kh) / stride + 1;
    out.w = (in.w + 2 * pad - kw) / stride + 1;
    out.v.assign(static_cast<size_t>(batch) * kernels * out.h * out.w, T(0));
    for (int b = 0; b < batch; ++b)
        for (int k = 0; k < kernels; ++k)
            for (int oy = 0; oy < out.h; ++oy)
                for (int ox = 0; ox < out.w; ++ox) {
                    T acc = bias.empty() ? T(0) : bias[k];
                    for (int ci = 0; ci < in.c; ++ci)
                        for (int fy = 0; fy < kh; ++fy)
                            for (int fx = 0; fx < kw; ++fx) {
                                const int iy = oy * stride + fy - pad;
                                const int ix = ox * stride + fx - pad;
                                if (iy < 0 || iy >= in.h || ix < 0 || ix >= in.w)
                                    continue;
                                const T wv =
                                    w[((static_cast<size_t>(k) * in.c + ci) * kh + fy) * kw + fx];
                                acc += wv * in.get(b, ci, iy, ix);
                            }
                    out.set(b, k, oy, ox, acc);
                }
    return out;
}

template <typename T>
Plane<T> maxpool_gather(const Plane<T>& in, int batch) {
    Plane<T> out;
    out.c = in.c;
    out.h = in.h / 2;
    out.w = in.w / 2;
    out.v.assign(static_cast<size_t>(batch) * out.c * out.h * out.w, T(0));
    for (int b = 0; b < batch; ++b)
        for (int ci = 0; ci < in.c; ++ci)
            for (int oy = 0; oy < out.h; ++oy)
                for (int ox = 0; ox < out.w; ++ox) {
                    T best = in.get(b, ci, oy * 2, ox * 2);
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            T cand = in.get(b, ci, oy * 2 + dy, ox * 2 + dx);
                            if (cand > best)
                                best = cand;
                        }
                    out.set(b, ci, oy, ox, best);
                }
    return out;
}

}  // namespace

template <typename T>
std::vector<T> forward_logits(const NetworkSpec& spec, const PlainWeights<T>& w,
                              const Batch& batch) {
    const int B = batch.images.n;
    std::map<int, Plane<T>> outputs;
    Plane<T> input;
    input.c = batch.images.c;
    input.h = batch.images.h;
    input.w = batch.images.w;
    input.v.assign(batch.images.v.begin(), batch.images.v.end());
    outputs[0] = std::move(input);

    // Skip layers keyed by the conv layer they feed.
    std::map<int, std::vector<const LayerSpec*>> skips_into;
    for (const auto& l : spec.layers)
        if (l.kind == LayerKind::skip_connection)
            skips_into[l.skip_target].push_back(&l);

    auto skip_index = [&](int layer_id) {
        int i = 0;
        for (const auto& l : spec.layers) {
            if (l.kind != LayerKind::skip_connection)
                continue;
            if (l.layer_id == layer_id)
                return i;
            ++i;
        }
        throw std::runtime_error("skip layer not found");
    };

    int prev = 0;
    int conv_i = 0;
    for (const auto& l : spec.layers) {
        if (l.kind == LayerKind::skip_connection)
            continue;
        const Plane<T>& cur = outputs.at(prev);
        if (l.kind == LayerKind::conv) {
            Plane<T> pre = conv_gather(cur, B, w.conv_w[conv_i], w.conv_b[conv_i], l.kernel_count,
                                       l.kernel_h, l.kernel_w, l.stride, l.padding);
            auto it = skips_into.find(l.layer_id);
            if (it != skips_into.end()) {
                for (const LayerSpec* sl : it->second) {
                    const int si = skip_index(sl->layer_id);
                    Plane<T> so = conv_gather(outputs.at(sl->skip_source), B, w.skip_w[si],
                                              w.skip_b[si], sl->kernel_count, sl->kernel_h,
                                              sl->kernel_w, sl->stride, sl->padding);
                    for (size_t i = 0; i < pre.v.size(); ++i)
                        pre.v[i] += so.v[i];
                }
            }
            for (T& x : pre.v)
                x = x > T(0) ? x : T(0);
            outputs[l.layer_id] = std::move(pre);
            ++conv_i;
        } else if (l.kind == LayerKind::pool) {
            outputs[l.layer_id] = maxpool_gather(outputs.at(prev), B);
        } else {
            throw std::runtime_error("reference forward: unsupported layer kind");
        }
        prev = l.layer_id;
    }

    const Plane<T>& feat = outputs.at(prev);
    const int in_dim = feat.c * feat.h * feat.w;
    const int classes = spec.head_classes;
    std::vector<T> logits(static_cast<size_t>(B) * classes, T(0));
    for (int b = 0; b < B; ++b)
        for (int o = 0; o < classes; ++o) {
            T acc = w.head_b[o];
            for (int i = 0; i < in_dim; ++i)
                acc += w.head_w[static_cast<size_t>(o) * in_dim + i] *
                       feat.v[static_cast<size_t>(b) * in_dim + i];
            logits[static_cast<size_t>(b) * classes + o] = acc;
        }
    return logits;
}

template <typename T>
T forward_loss(const NetworkSpec& spec, const PlainWeights<T>& w, const Batch& batch) {
    const int B = batch.images.n;
    const int classes = spec.head_classes;
    std::vector<T> logits = forward_logits(spec, w, batch);
    T total = T(0);
    for (int b = 0; b < B; ++b) {
        const T* lp = logits.data() + static_cast<size_t>(b) * classes;
        T mx = lp[0];
        for (int c = 1; c < classes; ++c)
            mx = std::max(mx, lp[c]);
        T denom = T(0);
        for (int c = 0; c < classes; ++c)
            denom += std::exp(lp[c] - mx);
        total += -(lp[batch.labels[b]] - mx - std::log(denom));
    }
    return total / T(B);
}

template std::vector<float> forward_logits<float>(const NetworkSpec&, const PlainWeights<float>&,
                                                  const Batch&);
template std::vector<double> forward_logits<double>(const NetworkSpec&,
                                                    const PlainWeights<double>&, const Batch&);
template float forward_loss<float>(const NetworkSpec&, const PlainWeights<float>&, const Batch&);
template double forward_loss<double>(const NetworkSpec&, const PlainWeights<double>&,
                                     const Batch&);

void conv2d_serial(const Tensor4& in, const Tensor4& w, const std::vector<float>& bias,
                   Tensor4& out, int stride, int pad) {
    const int OH = (in.h + 2 * pad - w.h) / stride + 1;
    const int OW = (in.w + 2 * pad - w.w) / stride + 1;
    out = Tensor4(in.n, w.n, OH, OW);
    for (int b = 0; b < in.n; ++b)
        for (int k = 0; k < w.n; ++k)
            for (int oy = 0; oy < OH; ++oy)
                for (int ox = 0; ox < OW; ++ox) {
                    float acc = bias.empty() ? 0.0f : bias[k];
                    for (int c = 0; c < in.c; ++c)
                        for (int fy = 0; fy < w.h; ++fy)
                            for (int fx = 0; fx < w.w; ++fx) {
                                const int iy = oy * stride + fy - pad;
                                const int ix = ox * stride + fx - pad;
                                if (iy < 0 || iy >= in.h || ix < 0 || ix >= in.w)
                                    continue;
                                acc += w.at(k, c, fy, fx) * in.at(b, c, iy, ix);
                            }
                    out.at(b, k, oy, ox) = acc;
                }
}

}  // namespace ref
}  // namespace lg
