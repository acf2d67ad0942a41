#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "lg/netspec.hpp"
#include "lg/rng.hpp"

namespace lg {

struct NetworkWeights;  // engine.hpp

// Per-layer index sets identifying which kernels and channels belong to a
// learngene. Indices are 1-based and kept sorted. Entry i corresponds to the
// i-th main-path conv layer of the spec; skip-layer sets are derived, never
// stored (K_sc = K of the target conv layer, C_sc = K of the source layer).
struct LearngeneStructure {
    std::string spec_name;
    std::vector<std::vector<int>> kernels;   // K_l
    std::vector<std::vector<int>> channels;  // C_l; channels[0] = full input set
    // n_K^l of the spec the gene was extracted against. Inheritance compares
    // these against the target's widths to decide whether rank reindexing is
    // needed at all.
    std::vector<int> source_widths;

    size_t layer_count() const { return kernels.size(); }

    // Derived (K_sc, C_sc) for the given skip layer id.
    std::pair<std::vector<int>, std::vector<int>> skip_sets(const NetworkSpec& spec,
                                                            int skip_layer_id) const;
};

// A structure plus the weight values of every gene-owned channel.
// values[l] is |K_l| x |C_l| x kh x kw, row-major in rank order of the sorted
// index sets. A layer flagged in pim_layer carries no stored values; its
// kernels are materialized as partial identity mappings at inheritance time.
struct LearngeneWeights {
    LearngeneStructure structure;
    std::vector<std::vector<float>> values;
    std::vector<std::pair<int, int>> spatial;  // kh, kw per layer
    std::vector<bool> pim_layer;
    // Skip-layer slices (|K_sc| x |C_sc| x kh x kw), one per skip layer of the
    // source spec, in spec order. Empty when the source had no skip layers.
    std::vector<std::vector<float>> skip_values;
    std::vector<std::pair<int, int>> skip_spatial;

    uint64_t gene_id = 0;
    int64_t parent_id = -1;  // -1 = root (no recorded parent)

    size_t parameter_count() const;
};

struct MutationParams {
    double p_m = 0.2;    // per-layer mutation probability
    double alpha = 0.9;  // growth coefficient of the kernel-change probability
    bool allow_empty_layers = false;
};

// Uniform random structure with ceil(c * n_K^l) kernels per conv layer,
// channels aligned (C_{l+1} = K_l, C_1 = full input channels).
// Throws on c <= 0, c > 1, or a spec that does not validate.
LearngeneStructure init_random_structure(const NetworkSpec& spec, double c, Rng& rng);

// Every broken alignment, bound violation, or layer-count mismatch,
// deterministically ordered by layer position.
std::vector<SpecViolation> validate_structure(const LearngeneStructure& structure,
                                              const NetworkSpec& spec);

// Probability of growing (vs shrinking) a kernel in a layer:
// min(1, alpha * |K_l| / (n_K^l - |K_l|)), with the saturated layer pinned to 1.
double growth_probability(int gene_size, int layer_width, double alpha);

// One mutation pass over all layers: per layer, repeated kernel grow/shrink
// events while r <= p_m. Grow on a full layer and shrink at the minimum size
// are no-op events that still consume their draws.
LearngeneStructure mutate(const LearngeneStructure& structure, const NetworkSpec& spec,
                          const MutationParams& params, Rng& rng);

// Copies the gene-owned slices out of a trained network. The source is not
// modified. Throws if the structure does not validate against the weights' spec.
LearngeneWeights extract_learngene(const NetworkWeights& weights,
                                   const LearngeneStructure& structure);

// Carry a parent gene's values onto a mutated structure: slices present in
// both keep the parent's weights, slices the mutation grew start at exactly 0
// (they fill in like missing channels at inheritance). Skip slices rebuild
// from the re-derived sets the same way.
LearngeneWeights regraft(const LearngeneWeights& parent, const LearngeneStructure& structure,
                         const NetworkSpec& spec);

size_t gene_parameter_count(const LearngeneStructure& structure, const NetworkSpec& spec);

}  // namespace lg
