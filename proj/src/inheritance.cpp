#include "lg/inheritance.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace lg {

nlohmann::ordered_json plan_to_json(const InheritancePlan& plan) {
    nlohmann::ordered_json j;
    j["gene_id"] = plan.gene_id;
    j["source_spec"] = plan.source_spec;
    j["target_spec"] = plan.target_spec;
    j["reindexed"] = plan.reindexed;
    j["pim_positions"] = plan.pim_positions;
    j["kernel_map"] = nlohmann::ordered_json::array();
    for (const auto& layer : plan.kernel_map) {
        nlohmann::ordered_json jl = nlohmann::ordered_json::array();
        for (const auto& [from, to] : layer)
            jl.push_back({from, to});
        j["kernel_map"].push_back(jl);
    }
    j["cross_arch_actions"] = plan.cross_arch_actions;
    return j;
}

std::vector<int> default_pim_positions(int gene_layers, int insertions) {
    std::vector<int> pos;
    for (int i = 1; i <= insertions; ++i) {
        // round(i * n / (m+1)) with .5 going up, in integer arithmetic
        int p = (2 * i * gene_layers + (insertions + 1)) / (2 * (insertions + 1));
        pos.push_back(std::max(1, p));
    }
    return pos;
}

LearngeneWeights reindex_structure(const LearngeneWeights& gene,
                                   const std::vector<int>& target_widths) {
    if (target_widths.size() != gene.structure.layer_count())
        throw std::invalid_argument("reindex: target width profile has " +
                                    std::to_string(target_widths.size()) + " layers, gene has " +
                                    std::to_string(gene.structure.layer_count()));
    for (size_t l = 0; l < target_widths.size(); ++l) {
        if (static_cast<int>(gene.structure.kernels[l].size()) > target_widths[l]) {
            std::ostringstream os;
            os << "gene cannot fit: layer " << l + 1 << " has " << gene.structure.kernels[l].size()
               << " gene kernels but the target width is " << target_widths[l];
            throw std::invalid_argument(os.str());
        }
    }

    LearngeneWeights out = gene;
    for (size_t l = 0; l < out.structure.kernels.size(); ++l) {
        auto& K = out.structure.kernels[l];
        auto& C = out.structure.channels[l];
        for (size_t i = 0; i < K.size(); ++i)
            K[i] = static_cast<int>(i) + 1;
        for (size_t i = 0; i < C.size(); ++i)
            C[i] = static_cast<int>(i) + 1;
    }
    out.structure.source_widths = target_widths;
    return out;
}

std::vector<float> pim_kernel(int k, const std::vector<int>& K_l, int channels, int kh, int kw,
                              Rng& rng) {
    if (kh % 2 == 0 || kw % 2 == 0)
        throw std::invalid_argument("PIM kernels need odd spatial dims, got " +
                                    std::to_string(kh) + "x" + std::to_string(kw));
    std::vector<float> kernel(static_cast<size_t>(channels) * kh * kw, 0.0f);
    const bool in_gene = std::binary_search(K_l.begin(), K_l.end(), k);
    if (in_gene) {
        // Centered 1 on the kernel's own channel, zeros everywhere else.
        const size_t center = (static_cast<size_t>(k - 1) * kh + kh / 2) * kw + kw / 2;
        kernel[center] = 1.0f;
    } else {
        const float b = he_bound(channels * kh * kw);
        for (float& x : kernel)
            x = rng.uniform_float(-b, b);
    }
    return kernel;
}

LearngeneWeights insert_pim_layers(const LearngeneWeights& gene, int target_depth,
                                   const std::optional<std::vector<int>>& positions) {
    const int n_a = static_cast<int>(gene.structure.layer_count());
    if (target_depth < n_a)
        throw std::invalid_argument("target depth " + std::to_string(target_depth) +
                                    " is shallower than the gene (" + std::to_string(n_a) + ")");
    const int m = target_depth - n_a;
    if (m == 0)
        return gene;

    std::vector<int> pos = positions ? *positions : default_pim_positions(n_a, m);
    if (static_cast<int>(pos.size()) != m)
        throw std::invalid_argument("expected " + std::to_string(m) + " PIM positions, got " +
                                    std::to_string(pos.size()));
    for (int p : pos)
        if (p < 1 || p > n_a)
            throw std::invalid_argument("PIM position " + std::to_string(p) + " out of range [1, " +
                                        std::to_string(n_a) + "]");
    std::sort(pos.begin(), pos.end());

    LearngeneWeights out;
    out.gene_id = gene.gene_id;
    out.parent_id = gene.parent_id;
    out.structure.spec_name = gene.structure.spec_name;
    out.skip_values = gene.skip_values;
    out.skip_spatial = gene.skip_spatial;

    size_t pi = 0;
    for (int l = 0; l < n_a; ++l) {
        out.structure.kernels.push_back(gene.structure.kernels[l]);
        out.structure.channels.push_back(gene.structure.channels[l]);
        out.structure.source_widths.push_back(gene.structure.source_widths[l]);
        out.values.push_back(gene.values[l]);
        out.spatial.push_back(gene.spatial[l]);
        out.pim_layer.push_back(gene.pim_layer[l]);
        while (pi < pos.size() && pos[pi] == l + 1) {
            // PIM layer: K = C = K_l of the layer it follows; identity weights
            // are materialized at inheritance.
            out.structure.kernels.push_back(gene.structure.kernels[l]);
            out.structure.channels.push_back(gene.structure.kernels[l]);
            out.structure.source_widths.push_back(gene.structure.source_widths[l]);
            out.values.emplace_back();
            out.spatial.push_back(gene.spatial[l]);
            out.pim_layer.push_back(true);
            ++pi;
        }
    }
    return out;
}

namespace {

// Rank of idx in the sorted set (0-based), or -1.
int rank_in(const std::vector<int>& set, int idx) {
    auto it = std::lower_bound(set.begin(), set.end(), idx);
    if (it == set.end() || *it != idx)
        return -1;
    return static_cast<int>(it - set.begin());
}

}  // namespace

NetworkWeights inherit(const LearngeneWeights& gene_in, const NetworkSpec& target, Rng& rng,
                       InheritancePlan* plan_out) {
    auto spec_violations = validate_network_spec(target);
    if (!spec_violations.empty())
        throw std::invalid_argument("target spec invalid: " + spec_violations.front().reason);

    InheritancePlan plan;
    plan.gene_id = gene_in.gene_id;
    plan.source_spec = gene_in.structure.spec_name;
    plan.target_spec = target.name;

    const auto target_widths = target.conv_widths();
    const int n_d = static_cast<int>(target_widths.size());
    const int n_a = static_cast<int>(gene_in.structure.layer_count());
    if (n_d < n_a)
        throw std::invalid_argument("inheritance into shallower networks is unsupported (gene " +
                                    std::to_string(n_a) + " layers, target " + std::to_string(n_d) +
                                    ")");

    if (static_cast<int>(gene_in.structure.channels.empty()
                             ? 0
                             : gene_in.structure.channels[0].size()) != target.input_channels)
        throw std::invalid_argument("gene input channel arity does not match target input");

    // Deepen first so the layer mapping is 1:1, then reindex if the width
    // profile changed.
    LearngeneWeights gene = gene_in;
    if (n_d > n_a) {
        gene = insert_pim_layers(gene_in, n_d);
        plan.pim_positions = default_pim_positions(n_a, n_d - n_a);
    }

    const bool same_widths = gene.structure.source_widths == target_widths;
    std::vector<std::vector<int>> old_kernels = gene.structure.kernels;
    if (!same_widths) {
        gene = reindex_structure(gene, target_widths);
        plan.reindexed = true;
    }
    for (size_t l = 0; l < gene.structure.kernels.size(); ++l) {
        std::vector<std::pair<int, int>> m;
        for (size_t i = 0; i < gene.structure.kernels[l].size(); ++i)
            m.push_back({old_kernels[l][i], gene.structure.kernels[l][i]});
        plan.kernel_map.push_back(std::move(m));
    }

    // Bounds check against the target (reindex already guarantees this when
    // it ran; the same-width path needs it for malformed genes).
    for (int l = 0; l < n_d; ++l) {
        if (!gene.structure.kernels[l].empty() &&
            gene.structure.kernels[l].back() > target_widths[l])
            throw std::invalid_argument("gene kernel index " +
                                        std::to_string(gene.structure.kernels[l].back()) +
                                        " exceeds target width at conv layer " + std::to_string(l + 1));
    }

    NetworkWeights w = make_zero_weights(target);
    const auto conv_ids = target.conv_layer_ids();

    for (int l = 0; l < n_d; ++l) {
        const LayerSpec* ls = target.layer_by_id(conv_ids[l]);
        Tensor4& t = w.conv_w[l];
        const auto& K = gene.structure.kernels[l];
        const auto& C = gene.structure.channels[l];
        const int kh = ls->kernel_h, kw = ls->kernel_w;
        const float bound = he_bound(t.c * kh * kw);

        if (gene.pim_layer[l]) {
            for (int k = 1; k <= t.n; ++k) {
                std::vector<float> kern = pim_kernel(k, K, t.c, kh, kw, rng);
                std::copy(kern.begin(), kern.end(), t.plane(k - 1, 0));
            }
            continue;
        }

        if (!gene.values[l].empty() &&
            gene.values[l].size() != K.size() * C.size() * static_cast<size_t>(kh) * kw)
            throw std::invalid_argument("gene value slice of layer " + std::to_string(l + 1) +
                                        " does not match its spatial dims " + std::to_string(kh) +
                                        "x" + std::to_string(kw));

        for (int k = 1; k <= t.n; ++k) {
            const int kr = rank_in(K, k);
            if (kr < 0) {
                // Non-gene kernel: fan-in-scaled random, all channels.
                float* p = t.plane(k - 1, 0);
                for (int i = 0; i < t.c * kh * kw; ++i)
                    p[i] = rng.uniform_float(-bound, bound);
            } else {
                // Gene kernel: gene channels get the stored slice, missing
                // channels stay exactly 0.
                for (size_t ci = 0; ci < C.size(); ++ci) {
                    const float* src =
                        gene.values[l].data() + ((static_cast<size_t>(kr) * C.size()) + ci) * kh * kw;
                    std::copy(src, src + kh * kw, t.plane(k - 1, C[ci] - 1));
                }
            }
        }
    }

    // Skip layers. Gene skip slices carry over only when the source and
    // target skip topologies agree position-for-position; everything else
    // falls back to the zero-filled gene slice.
    const auto target_skips = target.skip_layer_ids();
    std::vector<std::pair<int, int>> source_skip_endpoints;
    if (!gene.skip_values.empty()) {
        // Recover source endpoints in conv-position space from the source spec.
        bool resolved = false;
        for (const auto& n : builtin_spec_names()) {
            if (n == gene.structure.spec_name) {
                NetworkSpec src_spec = builtin_spec(n);
                for (int sid : src_spec.skip_layer_ids()) {
                    const LayerSpec* sl = src_spec.layer_by_id(sid);
                    source_skip_endpoints.push_back({src_spec.conv_position(sl->skip_source),
                                                     src_spec.conv_position(sl->skip_target)});
                }
                resolved = true;
                break;
            }
        }
        if (!resolved)
            plan.cross_arch_actions.push_back(
                "source spec not resolvable; gene skip slices dropped");
    }

    for (size_t s = 0; s < target_skips.size(); ++s) {
        const LayerSpec* sl = target.layer_by_id(target_skips[s]);
        Tensor4& t = w.skip_w[s];
        const int kh = sl->kernel_h, kw = sl->kernel_w;
        const float bound = he_bound(t.c * kh * kw);
        const int src_pos = target.conv_position(sl->skip_source);
        const int dst_pos = target.conv_position(sl->skip_target);
        const auto& K_sc = gene.structure.kernels[dst_pos];
        const auto& C_sc = gene.structure.kernels[src_pos];

        // Match against a source skip at the same conv positions. Reindexed
        // genes keep rank order so slices still carry over; deepened genes
        // shift conv positions, so their skip slices do not.
        int match = -1;
        if (plan.pim_positions.empty())
            for (size_t q = 0; q < source_skip_endpoints.size(); ++q)
                if (source_skip_endpoints[q] == std::make_pair(src_pos, dst_pos))
                    match = static_cast<int>(q);

        for (int k = 1; k <= t.n; ++k) {
            const int kr = rank_in(K_sc, k);
            if (kr < 0) {
                float* p = t.plane(k - 1, 0);
                for (int i = 0; i < t.c * kh * kw; ++i)
                    p[i] = rng.uniform_float(-bound, bound);
            } else if (match >= 0) {
                const auto& vals = gene.skip_values[match];
                for (size_t ci = 0; ci < C_sc.size(); ++ci) {
                    const float* src =
                        vals.data() + ((static_cast<size_t>(kr) * C_sc.size()) + ci) * kh * kw;
                    std::copy(src, src + kh * kw, t.plane(k - 1, C_sc[ci] - 1));
                }
            }
            // Gene kernels without a carried slice stay exactly 0: the
            // gene-relevant skip slice of a cross-architecture inheritance.
        }
        if (match < 0 && !K_sc.empty())
            plan.cross_arch_actions.push_back("skip layer " + std::to_string(target_skips[s]) +
                                              ": gene-relevant kernels zero-filled");
    }
    if (!gene.skip_values.empty() && target_skips.empty())
        plan.cross_arch_actions.push_back("source skip slices dropped (plain target)");
    if (plan.pim_positions.size() || plan.reindexed || !plan.cross_arch_actions.empty())
        plan.cross_arch_actions.push_back("pool positions follow the target spec");

    // Fresh head.
    const float hb = he_bound(w.head_w.cols);
    for (float& x : w.head_w.v)
        x = rng.uniform_float(-hb, hb);

    if (plan_out)
        *plan_out = plan;
    return w;
}

}  // namespace lg
