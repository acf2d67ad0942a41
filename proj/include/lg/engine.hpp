#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include <stdexcept>

#include "lg/netspec.hpp"
#include "lg/rng.hpp"
#include "lg/tensor.hpp"

namespace lg {

// Raw labeled images as stored in datasets: unsigned 8-bit pixels, labels
// already remapped to a task-local range. Pixels are normalized to [0,1]
// floats at batch assembly, not at load.
struct Samples {
    int channels = 0, height = 0, width = 0;
    std::vector<uint8_t> pixels;  // record-major, c*h*w per record
    std::vector<int> labels;

    size_t count() const { return labels.size(); }
    size_t pixels_per_record() const {
        return static_cast<size_t>(channels) * height * width;
    }
};

struct Batch {
    Tensor4 images;           // normalized floats
    std::vector<int> labels;  // task-local ids
};

// Assemble a normalized float batch from sample records [first, first+count).
Batch make_batch(const Samples& s, const std::vector<int>& order, size_t first, size_t count);

// All trainable parameters of a network. Conv and skip weights are
// (kernel, channel, kh, kw) tensors; biases are per-kernel vectors; the head
// is a dense classes x features matrix over the flattened final feature map.
struct NetworkWeights {
    NetworkSpec spec;
    std::vector<Tensor4> conv_w;              // per main-path conv layer
    std::vector<std::vector<float>> conv_b;
    std::vector<Tensor4> skip_w;              // per skip layer, spec order
    std::vector<std::vector<float>> skip_b;
    Mat head_w;                               // head_classes x flattened features
    std::vector<float> head_b;

    size_t parameter_count() const;
};

// Spatial size of the final feature map and the flattened head input size.
struct ShapeInfo {
    std::vector<std::pair<int, int>> conv_out;  // h, w after each main-path layer
    int feat_channels = 0, feat_h = 0, feat_w = 0;
    int head_inputs = 0;
};
ShapeInfo infer_shapes(const NetworkSpec& spec);

// Fan-in-scaled uniform (He-style) initialization for all weights; biases 0.
NetworkWeights make_random_weights(const NetworkSpec& spec, Rng& rng);
NetworkWeights make_zero_weights(const NetworkSpec& spec);
float he_bound(int fan_in);

// Logits (batch x classes). Skip-connection outputs are added to the target
// layer's pre-activation. Throws on shape mismatch, naming the layer.
Mat forward(const NetworkWeights& w, const Batch& batch);

// Post-activation output of every main-path layer, keyed by layer_id.
// Used by the inheritance oracles to compare feature maps.
std::map<int, Tensor4> forward_activations(const NetworkWeights& w, const Batch& batch);

// Raised when a training step produces a non-finite loss; evolution treats
// the individual as failed and continues.
struct training_diverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SgdOpts {
    float lr = 0.1f;
    float momentum = 0.0f;
};

// Momentum buffers live outside NetworkWeights so weights stay a pure value.
struct SgdState {
    std::vector<Tensor4> conv_v;
    std::vector<std::vector<float>> conv_bv;
    std::vector<Tensor4> skip_v;
    std::vector<std::vector<float>> skip_bv;
    Mat head_v;
    std::vector<float> head_bv;
    bool initialized = false;
};

// Gradient of the mean cross-entropy w.r.t. every trainable weight,
// mirroring the NetworkWeights layout.
struct Gradients {
    std::vector<Tensor4> conv_w;
    std::vector<std::vector<float>> conv_b;
    std::vector<Tensor4> skip_w;
    std::vector<std::vector<float>> skip_b;
    Mat head_w;
    std::vector<float> head_b;
};

struct StepInfo {
    double loss = 0.0;
    int correct = 0;
};

StepInfo compute_gradients(const NetworkWeights& w, const Batch& batch, Gradients& grads);

// One SGD update on all trainable weights. Returns the mean cross-entropy of
// the batch before the update. Throws on non-finite loss.
float train_step(NetworkWeights& w, const Batch& batch, const SgdOpts& opts,
                 SgdState* state = nullptr);

struct TrainBudget {
    int epochs = 3;
    float lr = 0.1f;
    int batch_size = 32;
    uint64_t seed = 0;
    float momentum = 0.0f;
};

struct TrainResult {
    double train_accuracy = 0.0;  // final-epoch training accuracy
    double final_loss = 0.0;
};

// Seeded epoch shuffles; deterministic given the budget seed. With
// epochs == 0 the weights are untouched and the accuracy of the initial
// weights on the task is returned.
TrainResult train(NetworkWeights& w, const Samples& task, const TrainBudget& budget);

// Top-1 accuracy; never mutates weights; invariant to batch partitioning.
// Throws on an empty dataset.
double evaluate(const NetworkWeights& w, const Samples& dataset, int batch_size = 64);

// Mean cross-entropy and per-sample argmax correctness for one batch.
struct LossInfo {
    double loss = 0.0;
    int correct = 0;
};
LossInfo batch_loss(const NetworkWeights& w, const Batch& batch);

}  // namespace lg
