#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lg/engine.hpp"
#include "lg/genome.hpp"

namespace lg {

// Audit record of how a gene was fitted into a target spec.
struct InheritancePlan {
    uint64_t gene_id = 0;
    std::string source_spec;
    std::string target_spec;
    bool reindexed = false;
    std::vector<int> pim_positions;  // insert-after gene layer index, 1-based
    // Old kernel index -> new kernel index per gene layer (post-PIM layout).
    std::vector<std::vector<std::pair<int, int>>> kernel_map;
    std::vector<std::string> cross_arch_actions;
};

nlohmann::ordered_json plan_to_json(const InheritancePlan& plan);

// Even spread of `insertions` positions across a `gene_layers`-deep stack,
// ties broken toward later layers. Returned values are insert-after indices.
std::vector<int> default_pim_positions(int gene_layers, int insertions);

// Rank-contiguous remap: K'_l = [1, |K_l|], C'_l = [1, |C_l|]; weight slices
// ride along by rank, so the value arrays are unchanged. Errors if a layer's
// set is larger than the target width.
LearngeneWeights reindex_structure(const LearngeneWeights& gene,
                                   const std::vector<int>& target_widths);

// Full kernel (channels x kh x kw floats) of a partial-identity-mapping layer:
// a gene kernel passes its own channel through a centered 1; everything else
// is 0. Non-gene kernels are fan-in-scaled random. Spatial dims must be odd.
std::vector<float> pim_kernel(int k, const std::vector<int>& K_l, int channels, int kh, int kw,
                              Rng& rng);

// Deepen a gene by target_depth - current layers. Inserted layers carry
// K = C = K_l of the preceding gene layer and are materialized as partial
// identity mappings at inheritance time.
LearngeneWeights insert_pim_layers(const LearngeneWeights& gene, int target_depth,
                                   const std::optional<std::vector<int>>& positions = std::nullopt);

// Initialize a fresh network of the target spec from a gene:
// reindex if the width profile differs, insert PIM layers if the target is
// deeper, place gene slices, zero-fill the missing channels of gene kernels,
// randomly initialize everything else. Plain->residual targets zero the
// gene-relevant skip kernels; residual->plain targets drop skip slices.
NetworkWeights inherit(const LearngeneWeights& gene, const NetworkSpec& target, Rng& rng,
                       InheritancePlan* plan_out = nullptr);

}  // namespace lg
