#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace lg {

enum class LayerKind { conv, pool, fully_connected, skip_connection };

std::string layer_kind_name(LayerKind k);
LayerKind layer_kind_from_name(const std::string& s);

// One layer of a network description. Conv and skip layers carry kernel and
// channel counts; pool and fully_connected layers carry none. Skip layers sit
// off the main path: they read the output of conv layer `skip_source` and add
// their 1x1 (or kxk) convolution to the pre-activation of conv layer
// `skip_target`.
struct LayerSpec {
    int layer_id = 0;  // 1-based position in the layer list
    LayerKind kind = LayerKind::conv;
    int kernel_count = 0;   // n_K, conv/skip only
    int channel_count = 0;  // n_C, conv/skip only
    int kernel_h = 0, kernel_w = 0;
    int stride = 1;
    int padding = 0;
    int skip_source = 0;  // layer_id of source conv layer (skip only)
    int skip_target = 0;  // layer_id of target conv layer (skip only)
    int units = 0;        // fully_connected only
};

struct NetworkSpec {
    std::string name;
    std::vector<LayerSpec> layers;
    int input_channels = 0, input_height = 0, input_width = 0;
    int head_classes = 0;  // mutable at inheritance time

    const LayerSpec* layer_by_id(int id) const;
    // Main-path conv layer ids, in order. Gene index sets are per entry here.
    std::vector<int> conv_layer_ids() const;
    std::vector<int> conv_widths() const;  // n_K per main-path conv layer
    std::vector<int> skip_layer_ids() const;
    // Index into conv_layer_ids() of a given conv layer_id, or -1.
    int conv_position(int layer_id) const;
};

struct SpecViolation {
    int layer_id = 0;
    std::string reason;
};

// Returns every violated invariant, ordered by layer_id. Violations are data,
// not failures; an empty list means the spec is valid.
std::vector<SpecViolation> validate_network_spec(const NetworkSpec& spec);

// Fixed desk-scale architectures. Valid names: mini-vgg-6, mini-vgg-6-N,
// mini-vgg-6-W, mini-vgg-8, mini-res-6, mini-res-6-N, mini-res-6-W, mini-res-8.
// Throws std::invalid_argument listing valid names for anything else.
NetworkSpec builtin_spec(const std::string& name);
std::vector<std::string> builtin_spec_names();

nlohmann::ordered_json spec_to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const nlohmann::json& j);

// Resolves a spec argument that is either a builtin name or a path to a
// spec JSON document.
NetworkSpec resolve_spec(const std::string& name_or_path);

struct LearngeneStructure;  // genome.hpp

// Fraction of the spec's conv + skip weight count owned by the gene's
// channels. Head weights excluded. Throws if the structure does not validate
// against the spec.
double parameter_fraction(const LearngeneStructure& structure, const NetworkSpec& spec);

// Total conv + skip weight count of the spec (denominator of the fraction).
size_t total_conv_weight_count(const NetworkSpec& spec);

}  // namespace lg
