#include "lg/genome.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "lg/engine.hpp"

namespace lg {

std::pair<std::vector<int>, std::vector<int>> LearngeneStructure::skip_sets(
    const NetworkSpec& spec, int skip_layer_id) const {
    const LayerSpec* sl = spec.layer_by_id(skip_layer_id);
    if (!sl || sl->kind != LayerKind::skip_connection)
        throw std::invalid_argument("layer " + std::to_string(skip_layer_id) + " is not a skip layer");
    int src_pos = spec.conv_position(sl->skip_source);
    int dst_pos = spec.conv_position(sl->skip_target);
    if (src_pos < 0 || dst_pos < 0 || static_cast<size_t>(dst_pos) >= kernels.size())
        throw std::invalid_argument("skip endpoints outside structure");
    return {kernels[dst_pos], kernels[src_pos]};
}

size_t LearngeneWeights::parameter_count() const {
    size_t n = 0;
    for (size_t l = 0; l < structure.kernels.size(); ++l)
        n += structure.kernels[l].size() * structure.channels[l].size() *
             static_cast<size_t>(spatial[l].first) * spatial[l].second;
    for (size_t s = 0; s < skip_values.size(); ++s)
        n += skip_values[s].size();
    return n;
}

namespace {

std::vector<int> full_set(int n) {
    std::vector<int> v(n);
    for (int i = 0; i < n; ++i)
        v[i] = i + 1;
    return v;
}

std::vector<int> random_subset(int n, int take, Rng& rng) {
    // Partial Fisher-Yates over [1, n], then sort.
    std::vector<int> pool = full_set(n);
    for (int i = 0; i < take; ++i) {
        size_t j = i + rng.below(pool.size() - i);
        std::swap(pool[i], pool[j]);
    }
    std::vector<int> out(pool.begin(), pool.begin() + take);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

LearngeneStructure init_random_structure(const NetworkSpec& spec, double c, Rng& rng) {
    if (c <= 0.0 || c > 1.0)
        throw std::invalid_argument("init fraction c must be in (0, 1]");
    auto violations = validate_network_spec(spec);
    if (!violations.empty())
        throw std::invalid_argument("spec invalid: " + violations.front().reason);

    LearngeneStructure s;
    s.spec_name = spec.name;
    auto widths = spec.conv_widths();
    s.source_widths = widths;
    s.kernels.resize(widths.size());
    s.channels.resize(widths.size());
    for (size_t l = 0; l < widths.size(); ++l) {
        int take = static_cast<int>(std::ceil(c * widths[l]));
        take = std::max(1, std::min(take, widths[l]));
        s.kernels[l] = random_subset(widths[l], take, rng);
    }
    s.channels[0] = full_set(spec.input_channels);
    for (size_t l = 1; l < widths.size(); ++l)
        s.channels[l] = s.kernels[l - 1];
    return s;
}

std::vector<SpecViolation> validate_structure(const LearngeneStructure& structure,
                                              const NetworkSpec& spec) {
    std::vector<SpecViolation> out;
    auto conv_ids = spec.conv_layer_ids();
    auto widths = spec.conv_widths();

    if (structure.kernels.size() != conv_ids.size() ||
        structure.channels.size() != conv_ids.size()) {
        out.push_back({0, "structure layer count does not match spec conv layer count"});
        return out;
    }

    auto check_bounds = [&](const std::vector<int>& set, int bound, int layer_id,
                            const char* which) {
        int prev = 0;
        for (int idx : set) {
            if (idx < 1 || idx > bound) {
                std::ostringstream os;
                os << which << " index " << idx << " out of bounds [1, " << bound << "]";
                out.push_back({layer_id, os.str()});
            }
            if (idx <= prev)
                out.push_back({layer_id, std::string(which) + " indices not strictly increasing"});
            prev = idx;
        }
    };

    for (size_t l = 0; l < conv_ids.size(); ++l) {
        const LayerSpec* ls = spec.layer_by_id(conv_ids[l]);
        check_bounds(structure.kernels[l], ls->kernel_count, conv_ids[l], "kernel");
        check_bounds(structure.channels[l], ls->channel_count, conv_ids[l], "channel");
        if (structure.kernels[l].empty())
            out.push_back({conv_ids[l], "empty kernel set"});
    }

    // C_1 must be the full input channel set.
    if (!conv_ids.empty() && structure.channels[0] != full_set(spec.input_channels))
        out.push_back({conv_ids[0], "C_1 must cover all input channels"});

    // Alignment K_l = C_{l+1} between consecutive main-path conv layers.
    for (size_t l = 0; l + 1 < conv_ids.size(); ++l) {
        if (structure.kernels[l] != structure.channels[l + 1]) {
            std::ostringstream os;
            os << "C of layer " << conv_ids[l + 1] << " does not equal K of layer " << conv_ids[l];
            out.push_back({conv_ids[l + 1], os.str()});
        }
    }

    std::stable_sort(out.begin(), out.end(),
                     [](const SpecViolation& a, const SpecViolation& b) { return a.layer_id < b.layer_id; });
    return out;
}

double growth_probability(int gene_size, int layer_width, double alpha) {
    if (layer_width <= 0)
        throw std::invalid_argument("layer width must be positive");
    if (gene_size < 0 || gene_size > layer_width)
        throw std::invalid_argument("gene size out of range");
    if (gene_size == layer_width)
        return 1.0;  // saturated layer: raw form divides by zero, pin to 1
    double p = alpha * static_cast<double>(gene_size) / static_cast<double>(layer_width - gene_size);
    return std::min(1.0, std::max(0.0, p));
}

LearngeneStructure mutate(const LearngeneStructure& structure, const NetworkSpec& spec,
                          const MutationParams& params, Rng& rng) {
    auto violations = validate_structure(structure, spec);
    if (!violations.empty())
        throw std::invalid_argument("cannot mutate invalid structure: " + violations.front().reason);

    LearngeneStructure s = structure;
    auto widths = spec.conv_widths();
    const int min_size = params.allow_empty_layers ? 0 : 1;

    for (size_t l = 0; l < s.kernels.size(); ++l) {
        std::set<int> K(s.kernels[l].begin(), s.kernels[l].end());
        const int width = widths[l];
        double r = rng.uniform();
        while (r <= params.p_m) {
            const double s_draw = rng.uniform();
            const double p_plus = growth_probability(static_cast<int>(K.size()), width, params.alpha);
            if (s_draw <= p_plus) {
                // Grow: pick uniformly from the complement; saturated layer is a no-op.
                const int free_count = width - static_cast<int>(K.size());
                if (free_count > 0) {
                    uint64_t pick = rng.below(static_cast<uint64_t>(free_count));
                    for (int idx = 1; idx <= width; ++idx) {
                        if (K.count(idx))
                            continue;
                        if (pick == 0) {
                            K.insert(idx);
                            break;
                        }
                        --pick;
                    }
                }
            } else {
                // Shrink: uniform removal; at the minimum size the event is a no-op.
                if (static_cast<int>(K.size()) > min_size && !K.empty()) {
                    uint64_t pick = rng.below(K.size());
                    auto it = K.begin();
                    std::advance(it, static_cast<long>(pick));
                    K.erase(it);
                }
            }
            r = rng.uniform();
        }
        s.kernels[l].assign(K.begin(), K.end());
    }

    // Re-derive channel alignment after the kernel pass.
    s.channels[0] = full_set(spec.input_channels);
    for (size_t l = 1; l < s.kernels.size(); ++l)
        s.channels[l] = s.kernels[l - 1];
    return s;
}

LearngeneWeights extract_learngene(const NetworkWeights& weights,
                                   const LearngeneStructure& structure) {
    const NetworkSpec& spec = weights.spec;
    auto violations = validate_structure(structure, spec);
    if (!violations.empty())
        throw std::invalid_argument("structure does not fit network spec: " +
                                    violations.front().reason);

    LearngeneWeights g;
    g.structure = structure;
    auto conv_ids = spec.conv_layer_ids();
    g.values.resize(conv_ids.size());
    g.spatial.resize(conv_ids.size());
    g.pim_layer.assign(conv_ids.size(), false);

    for (size_t l = 0; l < conv_ids.size(); ++l) {
        const LayerSpec* ls = spec.layer_by_id(conv_ids[l]);
        const Tensor4& w = weights.conv_w[l];
        const auto& K = structure.kernels[l];
        const auto& C = structure.channels[l];
        g.spatial[l] = {ls->kernel_h, ls->kernel_w};
        g.values[l].reserve(K.size() * C.size() * ls->kernel_h * ls->kernel_w);
        for (int k : K)
            for (int c : C) {
                const float* p = w.plane(k - 1, c - 1);
                g.values[l].insert(g.values[l].end(), p, p + ls->kernel_h * ls->kernel_w);
            }
    }

    auto skip_ids = spec.skip_layer_ids();
    g.skip_values.resize(skip_ids.size());
    g.skip_spatial.resize(skip_ids.size());
    for (size_t s = 0; s < skip_ids.size(); ++s) {
        const LayerSpec* ls = spec.layer_by_id(skip_ids[s]);
        auto sets = structure.skip_sets(spec, skip_ids[s]);
        const Tensor4& w = weights.skip_w[s];
        g.skip_spatial[s] = {ls->kernel_h, ls->kernel_w};
        g.skip_values[s].reserve(sets.first.size() * sets.second.size() * ls->kernel_h *
                                 ls->kernel_w);
        for (int k : sets.first)
            for (int c : sets.second) {
                const float* p = w.plane(k - 1, c - 1);
                g.skip_values[s].insert(g.skip_values[s].end(), p, p + ls->kernel_h * ls->kernel_w);
            }
    }
    return g;
}

LearngeneWeights regraft(const LearngeneWeights& parent, const LearngeneStructure& structure,
                         const NetworkSpec& spec) {
    auto violations = validate_structure(structure, spec);
    if (!violations.empty())
        throw std::invalid_argument("regraft structure invalid: " + violations.front().reason);
    if (structure.layer_count() != parent.structure.layer_count())
        throw std::invalid_argument("regraft structure layer count mismatch");

    auto rank_of = [](const std::vector<int>& set, int idx) -> int {
        auto it = std::lower_bound(set.begin(), set.end(), idx);
        return (it != set.end() && *it == idx) ? static_cast<int>(it - set.begin()) : -1;
    };

    LearngeneWeights g;
    g.structure = structure;
    g.structure.spec_name = spec.name;
    g.structure.source_widths = spec.conv_widths();
    g.spatial = parent.spatial;
    g.pim_layer = parent.pim_layer;
    g.skip_spatial = parent.skip_spatial;
    g.gene_id = parent.gene_id;
    g.parent_id = parent.parent_id;

    g.values.resize(structure.layer_count());
    for (size_t l = 0; l < structure.layer_count(); ++l) {
        const int kh = parent.spatial[l].first, kw = parent.spatial[l].second;
        const auto& K_new = structure.kernels[l];
        const auto& C_new = structure.channels[l];
        const auto& K_old = parent.structure.kernels[l];
        const auto& C_old = parent.structure.channels[l];
        g.values[l].assign(K_new.size() * C_new.size() * static_cast<size_t>(kh) * kw, 0.0f);
        for (size_t ki = 0; ki < K_new.size(); ++ki) {
            const int ko = rank_of(K_old, K_new[ki]);
            if (ko < 0)
                continue;
            for (size_t ci = 0; ci < C_new.size(); ++ci) {
                const int co = rank_of(C_old, C_new[ci]);
                if (co < 0)
                    continue;
                const float* src =
                    parent.values[l].data() + ((static_cast<size_t>(ko) * C_old.size()) + co) * kh * kw;
                float* dst = g.values[l].data() + ((ki * C_new.size()) + ci) * kh * kw;
                std::copy(src, src + kh * kw, dst);
            }
        }
    }

    auto skip_ids = spec.skip_layer_ids();
    g.skip_values.resize(skip_ids.size());
    for (size_t s = 0; s < skip_ids.size(); ++s) {
        const int kh = parent.skip_spatial[s].first, kw = parent.skip_spatial[s].second;
        auto new_sets = structure.skip_sets(spec, skip_ids[s]);
        auto old_sets = parent.structure.skip_sets(spec, skip_ids[s]);
        g.skip_values[s].assign(
            new_sets.first.size() * new_sets.second.size() * static_cast<size_t>(kh) * kw, 0.0f);
        for (size_t ki = 0; ki < new_sets.first.size(); ++ki) {
            const int ko = rank_of(old_sets.first, new_sets.first[ki]);
            if (ko < 0)
                continue;
            for (size_t ci = 0; ci < new_sets.second.size(); ++ci) {
                const int co = rank_of(old_sets.second, new_sets.second[ci]);
                if (co < 0)
                    continue;
                const float* src = parent.skip_values[s].data() +
                                   ((static_cast<size_t>(ko) * old_sets.second.size()) + co) * kh * kw;
                float* dst =
                    g.skip_values[s].data() + ((ki * new_sets.second.size()) + ci) * kh * kw;
                std::copy(src, src + kh * kw, dst);
            }
        }
    }
    return g;
}

size_t gene_parameter_count(const LearngeneStructure& structure, const NetworkSpec& spec) {
    size_t n = 0;
    auto conv_ids = spec.conv_layer_ids();
    for (size_t l = 0; l < conv_ids.size(); ++l) {
        const LayerSpec* ls = spec.layer_by_id(conv_ids[l]);
        n += structure.kernels[l].size() * structure.channels[l].size() *
             static_cast<size_t>(ls->kernel_h) * ls->kernel_w;
    }
    for (int sid : spec.skip_layer_ids()) {
        const LayerSpec* ls = spec.layer_by_id(sid);
        auto sets = structure.skip_sets(spec, sid);
        n += sets.first.size() * sets.second.size() * static_cast<size_t>(ls->kernel_h) *
             ls->kernel_w;
    }
    return n;
}

}  // namespace lg
