#include "lg/engine.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "lg/kernels.hpp"

namespace lg {

Batch make_batch(const Samples& s, const std::vector<int>& order, size_t first, size_t count) {
    Batch b;
    b.images = Tensor4(static_cast<int>(count), s.channels, s.height, s.width);
    b.labels.resize(count);
    const size_t rec = s.pixels_per_record();
    for (size_t i = 0; i < count; ++i) {
        const int idx = order[first + i];
        const uint8_t* src = s.pixels.data() + static_cast<size_t>(idx) * rec;
        float* dst = b.images.v.data() + i * rec;
        for (size_t p = 0; p < rec; ++p)
            dst[p] = static_cast<float>(src[p]) * (1.0f / 255.0f);
        b.labels[i] = s.labels[idx];
    }
    return b;
}

ShapeInfo infer_shapes(const NetworkSpec& spec) {
    ShapeInfo info;
    int c = spec.input_channels, h = spec.input_height, w = spec.input_width;
    for (const auto& l : spec.layers) {
        switch (l.kind) {
            case LayerKind::conv: {
                if (l.channel_count != c) {
                    std::ostringstream os;
                    os << "layer " << l.layer_id << ": channel_count " << l.channel_count
                       << " does not match incoming channels " << c;
                    throw std::runtime_error(os.str());
                }
                h = (h + 2 * l.padding - l.kernel_h) / l.stride + 1;
                w = (w + 2 * l.padding - l.kernel_w) / l.stride + 1;
                c = l.kernel_count;
                if (h <= 0 || w <= 0)
                    throw std::runtime_error("layer " + std::to_string(l.layer_id) +
                                             ": spatial dims collapse to zero");
                break;
            }
            case LayerKind::pool:
                h /= 2;
                w /= 2;
                if (h == 0 || w == 0)
                    throw std::runtime_error("layer " + std::to_string(l.layer_id) +
                                             ": pool collapses spatial dims to zero");
                break;
            case LayerKind::fully_connected:
                c = l.units;
                h = w = 1;
                break;
            case LayerKind::skip_connection:
                break;  // off the main path
        }
        if (l.kind != LayerKind::skip_connection)
            info.conv_out.push_back({h, w});
    }
    info.feat_channels = c;
    info.feat_h = h;
    info.feat_w = w;
    info.head_inputs = c * h * w;
    return info;
}

float he_bound(int fan_in) {
    return std::sqrt(6.0f / static_cast<float>(fan_in));
}

NetworkWeights make_zero_weights(const NetworkSpec& spec) {
    NetworkWeights w;
    w.spec = spec;
    ShapeInfo info = infer_shapes(spec);
    for (const auto& l : spec.layers) {
        if (l.kind == LayerKind::conv) {
            w.conv_w.emplace_back(l.kernel_count, l.channel_count, l.kernel_h, l.kernel_w);
            w.conv_b.emplace_back(l.kernel_count, 0.0f);
        } else if (l.kind == LayerKind::skip_connection) {
            w.skip_w.emplace_back(l.kernel_count, l.channel_count, l.kernel_h, l.kernel_w);
            w.skip_b.emplace_back(l.kernel_count, 0.0f);
        }
    }
    w.head_w = Mat(spec.head_classes, info.head_inputs);
    w.head_b.assign(spec.head_classes, 0.0f);
    return w;
}

NetworkWeights make_random_weights(const NetworkSpec& spec, Rng& rng) {
    NetworkWeights w = make_zero_weights(spec);
    for (auto& t : w.conv_w) {
        const float b = he_bound(t.c * t.h * t.w);
        for (float& x : t.v)
            x = rng.uniform_float(-b, b);
    }
    for (auto& t : w.skip_w) {
        const float b = he_bound(t.c * t.h * t.w);
        for (float& x : t.v)
            x = rng.uniform_float(-b, b);
    }
    const float hb = he_bound(w.head_w.cols);
    for (float& x : w.head_w.v)
        x = rng.uniform_float(-hb, hb);
    return w;
}

size_t NetworkWeights::parameter_count() const {
    size_t n = 0;
    for (const auto& t : conv_w) n += t.size();
    for (const auto& b : conv_b) n += b.size();
    for (const auto& t : skip_w) n += t.size();
    for (const auto& b : skip_b) n += b.size();
    n += head_w.v.size() + head_b.size();
    return n;
}

namespace {

// Everything the backward pass needs from one forward pass.
struct Trace {
    // Post-activation output of each main-path layer, keyed by layer_id;
    // entry 0 holds the input batch.
    std::map<int, Tensor4> outputs;
    std::map<int, std::vector<int>> pool_argmax;
    std::map<int, Tensor4> skip_out;  // keyed by skip layer_id
    std::vector<float> flat;          // head input (alias of final output data)
    std::vector<float> logits;
    std::vector<float> probs;
    int final_layer_id = 0;
};

struct LayerIndex {
    std::map<int, std::vector<const LayerSpec*>> skips_into;  // target conv id -> skips
    std::vector<const LayerSpec*> main_path;
};

LayerIndex index_layers(const NetworkSpec& spec) {
    LayerIndex idx;
    for (const auto& l : spec.layers) {
        if (l.kind == LayerKind::skip_connection)
            idx.skips_into[l.skip_target].push_back(&l);
        else
            idx.main_path.push_back(&l);
    }
    return idx;
}

int conv_index_of(const NetworkSpec& spec, int layer_id) {
    int pos = spec.conv_position(layer_id);
    if (pos < 0)
        throw std::runtime_error("layer " + std::to_string(layer_id) + " is not a conv layer");
    return pos;
}

int skip_index_of(const NetworkSpec& spec, int layer_id) {
    auto ids = spec.skip_layer_ids();
    for (size_t i = 0; i < ids.size(); ++i)
        if (ids[i] == layer_id)
            return static_cast<int>(i);
    throw std::runtime_error("layer " + std::to_string(layer_id) + " is not a skip layer");
}

void run_forward(const NetworkWeights& w, const Batch& batch, Trace& tr) {
    const NetworkSpec& spec = w.spec;
    if (batch.images.c != spec.input_channels || batch.images.h != spec.input_height ||
        batch.images.w != spec.input_width) {
        std::ostringstream os;
        os << "input batch shape (" << batch.images.c << "," << batch.images.h << ","
           << batch.images.w << ") does not match spec input (" << spec.input_channels << ","
           << spec.input_height << "," << spec.input_width << ")";
        throw std::runtime_error(os.str());
    }

    LayerIndex idx = index_layers(spec);
    tr.outputs[0] = batch.images;
    int prev_id = 0;

    for (const LayerSpec* l : idx.main_path) {
        const Tensor4& cur = tr.outputs[prev_id];
        switch (l->kind) {
            case LayerKind::conv: {
                const int ci = conv_index_of(spec, l->layer_id);
                Tensor4 pre;
                conv2d_forward(cur, w.conv_w[ci], w.conv_b[ci], pre, l->stride, l->padding);
                auto it = idx.skips_into.find(l->layer_id);
                if (it != idx.skips_into.end()) {
                    for (const LayerSpec* sl : it->second) {
                        const Tensor4& src = tr.outputs.at(sl->skip_source);
                        const int si = skip_index_of(spec, sl->layer_id);
                        Tensor4 so;
                        conv2d_forward(src, w.skip_w[si], w.skip_b[si], so, sl->stride, sl->padding);
                        if (so.h != pre.h || so.w != pre.w || so.c != pre.c) {
                            std::ostringstream os;
                            os << "skip layer " << sl->layer_id << ": output shape (" << so.c << ","
                               << so.h << "," << so.w << ") does not match target pre-activation ("
                               << pre.c << "," << pre.h << "," << pre.w << ")";
                            throw std::runtime_error(os.str());
                        }
                        for (size_t i = 0; i < pre.size(); ++i)
                            pre.v[i] += so.v[i];
                        tr.skip_out[sl->layer_id] = std::move(so);
                    }
                }
                relu_forward(pre);
                tr.outputs[l->layer_id] = std::move(pre);
                break;
            }
            case LayerKind::pool: {
                Tensor4 out;
                std::vector<int> arg;
                maxpool2_forward(cur, out, arg);
                tr.outputs[l->layer_id] = std::move(out);
                tr.pool_argmax[l->layer_id] = std::move(arg);
                break;
            }
            case LayerKind::fully_connected:
                throw std::runtime_error("layer " + std::to_string(l->layer_id) +
                                         ": mid-stack fully_connected layers are not supported");
            case LayerKind::skip_connection:
                break;
        }
        prev_id = l->layer_id;
    }
    tr.final_layer_id = prev_id;

    const Tensor4& feat = tr.outputs[prev_id];
    const int batch_n = feat.n;
    const int in_dim = feat.c * feat.h * feat.w;
    if (in_dim != w.head_w.cols)
        throw std::runtime_error("head input size mismatch");
    tr.logits.assign(static_cast<size_t>(batch_n) * spec.head_classes, 0.0f);
    fc_forward(feat.v.data(), batch_n, in_dim, w.head_w.v.data(), w.head_b.data(),
               spec.head_classes, tr.logits.data());
}

}  // namespace

Mat forward(const NetworkWeights& w, const Batch& batch) {
    Trace tr;
    run_forward(w, batch, tr);
    Mat logits(batch.images.n, w.spec.head_classes);
    logits.v = tr.logits;
    return logits;
}

std::map<int, Tensor4> forward_activations(const NetworkWeights& w, const Batch& batch) {
    Trace tr;
    run_forward(w, batch, tr);
    tr.outputs.erase(0);
    return std::move(tr.outputs);
}

StepInfo compute_gradients(const NetworkWeights& w, const Batch& batch, Gradients& grads) {
    const NetworkSpec& spec = w.spec;
    Trace tr;
    run_forward(w, batch, tr);

    const int batch_n = batch.images.n;
    const int classes = spec.head_classes;
    tr.probs.assign(tr.logits.size(), 0.0f);
    std::vector<float> dlogits(tr.logits.size(), 0.0f);
    StepInfo info;
    info.loss = softmax_cross_entropy(tr.logits.data(), batch.labels.data(), batch_n, classes,
                                      tr.probs.data(), dlogits.data());
    for (int b = 0; b < batch_n; ++b) {
        const float* pp = tr.probs.data() + static_cast<size_t>(b) * classes;
        int arg = 0;
        for (int c = 1; c < classes; ++c)
            if (pp[c] > pp[arg])
                arg = c;
        if (arg == batch.labels[b])
            ++info.correct;
    }

    // Head backward.
    const Tensor4& feat = tr.outputs.at(tr.final_layer_id);
    const int in_dim = feat.c * feat.h * feat.w;
    grads.head_w = Mat(w.head_w.rows, w.head_w.cols);
    grads.head_b.assign(w.head_b.size(), 0.0f);
    Tensor4 dfeat(feat.n, feat.c, feat.h, feat.w);
    fc_backward(feat.v.data(), dlogits.data(), batch_n, in_dim, classes, w.head_w.v.data(),
                grads.head_w.v.data(), grads.head_b.data(), dfeat.v.data());

    grads.conv_w.clear();
    grads.conv_b.clear();
    grads.skip_w.clear();
    grads.skip_b.clear();
    for (const auto& t : w.conv_w) grads.conv_w.emplace_back(t.n, t.c, t.h, t.w);
    for (const auto& b : w.conv_b) grads.conv_b.emplace_back(b.size(), 0.0f);
    for (const auto& t : w.skip_w) grads.skip_w.emplace_back(t.n, t.c, t.h, t.w);
    for (const auto& b : w.skip_b) grads.skip_b.emplace_back(b.size(), 0.0f);

    LayerIndex idx = index_layers(spec);
    // Accumulated gradient w.r.t. each main-path layer's post-activation
    // output, fed by the next main-path layer and by skip sources.
    std::map<int, Tensor4> pending;
    pending[tr.final_layer_id] = std::move(dfeat);

    for (auto it = idx.main_path.rbegin(); it != idx.main_path.rend(); ++it) {
        const LayerSpec* l = *it;
        int prev_id = 0;
        {
            auto pit = it;
            ++pit;
            if (pit != idx.main_path.rend())
                prev_id = (*pit)->layer_id;
        }
        Tensor4& dout = pending.at(l->layer_id);
        const Tensor4& in = tr.outputs.at(prev_id);

        if (l->kind == LayerKind::conv) {
            const int ci = conv_index_of(spec, l->layer_id);
            const Tensor4& activated = tr.outputs.at(l->layer_id);
            relu_backward(activated, dout);  // dout is now d(pre-activation)

            // Skip layers that add into this pre-activation.
            auto sit = idx.skips_into.find(l->layer_id);
            if (sit != idx.skips_into.end()) {
                for (const LayerSpec* sl : sit->second) {
                    const int si = skip_index_of(spec, sl->layer_id);
                    const Tensor4& src = tr.outputs.at(sl->skip_source);
                    conv2d_backward_weights(src, dout, grads.skip_w[si], grads.skip_b[si],
                                            sl->stride, sl->padding);
                    Tensor4 dsrc(src.n, src.c, src.h, src.w);
                    conv2d_backward_input(w.skip_w[si], dout, dsrc, sl->stride, sl->padding);
                    auto pit = pending.find(sl->skip_source);
                    if (pit == pending.end()) {
                        pending[sl->skip_source] = std::move(dsrc);
                    } else {
                        for (size_t i = 0; i < dsrc.size(); ++i)
                            pit->second.v[i] += dsrc.v[i];
                    }
                }
            }

            conv2d_backward_weights(in, dout, grads.conv_w[ci], grads.conv_b[ci], l->stride,
                                    l->padding);
            if (prev_id != 0) {
                Tensor4 din(in.n, in.c, in.h, in.w);
                conv2d_backward_input(w.conv_w[ci], dout, din, l->stride, l->padding);
                auto pit = pending.find(prev_id);
                if (pit == pending.end()) {
                    pending[prev_id] = std::move(din);
                } else {
                    for (size_t i = 0; i < din.size(); ++i)
                        pit->second.v[i] += din.v[i];
                }
            }
        } else if (l->kind == LayerKind::pool) {
            Tensor4 din(in.n, in.c, in.h, in.w);
            maxpool2_backward(dout, tr.pool_argmax.at(l->layer_id), din);
            auto pit = pending.find(prev_id);
            if (pit == pending.end()) {
                pending[prev_id] = std::move(din);
            } else {
                for (size_t i = 0; i < din.size(); ++i)
                    pit->second.v[i] += din.v[i];
            }
        }
        pending.erase(l->layer_id);
    }
    return info;
}

namespace {

void sgd_apply(std::vector<float>& w, const std::vector<float>& g, std::vector<float>& vel,
               float lr, float momentum) {
    if (momentum > 0.0f) {
        if (vel.size() != w.size())
            vel.assign(w.size(), 0.0f);
        for (size_t i = 0; i < w.size(); ++i) {
            vel[i] = momentum * vel[i] + g[i];
            w[i] -= lr * vel[i];
        }
    } else {
        for (size_t i = 0; i < w.size(); ++i)
            w[i] -= lr * g[i];
    }
}

StepInfo train_step_impl(NetworkWeights& w, const Batch& batch, const SgdOpts& opts,
                         SgdState* state) {
    Gradients g;
    StepInfo info = compute_gradients(w, batch, g);
    if (!std::isfinite(info.loss))
        throw training_diverged("non-finite training loss");

    SgdState dummy;
    SgdState& st = state ? *state : dummy;
    if (opts.momentum > 0.0f && !st.initialized) {
        st.conv_v.resize(w.conv_w.size());
        st.conv_bv.resize(w.conv_b.size());
        st.skip_v.resize(w.skip_w.size());
        st.skip_bv.resize(w.skip_b.size());
        st.initialized = true;
    }

    for (size_t i = 0; i < w.conv_w.size(); ++i) {
        if (opts.momentum > 0.0f && st.conv_v[i].size() != w.conv_w[i].size())
            st.conv_v[i] = Tensor4(w.conv_w[i].n, w.conv_w[i].c, w.conv_w[i].h, w.conv_w[i].w);
        sgd_apply(w.conv_w[i].v, g.conv_w[i].v,
                  opts.momentum > 0.0f ? st.conv_v[i].v : g.conv_w[i].v, opts.lr, opts.momentum);
        sgd_apply(w.conv_b[i], g.conv_b[i],
                  opts.momentum > 0.0f ? st.conv_bv[i] : g.conv_b[i], opts.lr, opts.momentum);
    }
    for (size_t i = 0; i < w.skip_w.size(); ++i) {
        if (opts.momentum > 0.0f && st.skip_v[i].size() != w.skip_w[i].size())
            st.skip_v[i] = Tensor4(w.skip_w[i].n, w.skip_w[i].c, w.skip_w[i].h, w.skip_w[i].w);
        sgd_apply(w.skip_w[i].v, g.skip_w[i].v,
                  opts.momentum > 0.0f ? st.skip_v[i].v : g.skip_w[i].v, opts.lr, opts.momentum);
        sgd_apply(w.skip_b[i], g.skip_b[i],
                  opts.momentum > 0.0f ? st.skip_bv[i] : g.skip_b[i], opts.lr, opts.momentum);
    }
    sgd_apply(w.head_w.v, g.head_w.v, opts.momentum > 0.0f ? st.head_v.v : g.head_w.v, opts.lr,
              opts.momentum);
    sgd_apply(w.head_b, g.head_b, opts.momentum > 0.0f ? st.head_bv : g.head_b, opts.lr,
              opts.momentum);
    return info;
}

}  // namespace

float train_step(NetworkWeights& w, const Batch& batch, const SgdOpts& opts, SgdState* state) {
    return static_cast<float>(train_step_impl(w, batch, opts, state).loss);
}

TrainResult train(NetworkWeights& w, const Samples& task, const TrainBudget& budget) {
    if (task.count() == 0)
        throw std::invalid_argument("train: task is empty");
    TrainResult res;
    if (budget.epochs == 0) {
        res.train_accuracy = evaluate(w, task, budget.batch_size);
        return res;
    }

    Rng rng(derive_seed(budget.seed, {kStreamTrain}));
    SgdOpts opts{budget.lr, budget.momentum};
    SgdState state;
    std::vector<int> order(task.count());
    std::iota(order.begin(), order.end(), 0);

    const size_t n = task.count();
    const size_t bs = static_cast<size_t>(budget.batch_size);
    for (int epoch = 0; epoch < budget.epochs; ++epoch) {
        // Fisher-Yates with the run's own rng; fixed shuffle order per seed.
        for (size_t i = n - 1; i > 0; --i) {
            size_t j = rng.below(i + 1);
            std::swap(order[i], order[j]);
        }
        long long correct = 0;
        double loss_sum = 0.0;
        int batches = 0;
        for (size_t first = 0; first < n; first += bs) {
            const size_t count = std::min(bs, n - first);
            Batch b = make_batch(task, order, first, count);
            StepInfo info = train_step_impl(w, b, opts, &state);
            correct += info.correct;
            loss_sum += info.loss;
            ++batches;
        }
        if (epoch == budget.epochs - 1) {
            res.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
            res.final_loss = loss_sum / batches;
        }
    }
    return res;
}

double evaluate(const NetworkWeights& w, const Samples& dataset, int batch_size) {
    if (dataset.count() == 0)
        throw std::invalid_argument("evaluate: dataset is empty");
    std::vector<int> order(dataset.count());
    std::iota(order.begin(), order.end(), 0);
    long long correct = 0;
    const size_t n = dataset.count();
    const size_t bs = static_cast<size_t>(batch_size);
    for (size_t first = 0; first < n; first += bs) {
        const size_t count = std::min(bs, n - first);
        Batch b = make_batch(dataset, order, first, count);
        Mat logits = forward(w, b);
        for (size_t i = 0; i < count; ++i) {
            const float* row = logits.row(static_cast<int>(i));
            int arg = 0;
            for (int c = 1; c < logits.cols; ++c)
                if (row[c] > row[arg])
                    arg = c;
            if (arg == b.labels[i])
                ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

LossInfo batch_loss(const NetworkWeights& w, const Batch& batch) {
    Mat logits = forward(w, batch);
    std::vector<float> probs(logits.v.size());
    LossInfo out;
    out.loss = softmax_cross_entropy(logits.v.data(), batch.labels.data(), batch.images.n,
                                     logits.cols, probs.data(), nullptr);
    for (int b = 0; b < batch.images.n; ++b) {
        const float* pp = probs.data() + static_cast<size_t>(b) * logits.cols;
        int arg = 0;
        for (int c = 1; c < logits.cols; ++c)
            if (pp[c] > pp[arg])
                arg = c;
        if (arg == batch.labels[b])
            ++out.correct;
    }
    return out;
}

}  // namespace lg
