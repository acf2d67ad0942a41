#include "lg/netspec.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "lg/genome.hpp"

namespace lg {

std::string layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::conv: return "conv";
        case LayerKind::pool: return "pool";
        case LayerKind::fully_connected: return "fully_connected";
        case LayerKind::skip_connection: return "skip_connection";
    }
    return "?";
}

LayerKind layer_kind_from_name(const std::string& s) {
    if (s == "conv") return LayerKind::conv;
    if (s == "pool") return LayerKind::pool;
    if (s == "fully_connected") return LayerKind::fully_connected;
    if (s == "skip_connection") return LayerKind::skip_connection;
    throw std::invalid_argument("unknown layer kind: " + s);
}

const LayerSpec* NetworkSpec::layer_by_id(int id) const {
    for (const auto& l : layers)
        if (l.layer_id == id)
            return &l;
    return nullptr;
}

std::vector<int> NetworkSpec::conv_layer_ids() const {
    std::vector<int> ids;
    for (const auto& l : layers)
        if (l.kind == LayerKind::conv)
            ids.push_back(l.layer_id);
    return ids;
}

std::vector<int> NetworkSpec::conv_widths() const {
    std::vector<int> widths;
    for (const auto& l : layers)
        if (l.kind == LayerKind::conv)
            widths.push_back(l.kernel_count);
    return widths;
}

std::vector<int> NetworkSpec::skip_layer_ids() const {
    std::vector<int> ids;
    for (const auto& l : layers)
        if (l.kind == LayerKind::skip_connection)
            ids.push_back(l.layer_id);
    return ids;
}

int NetworkSpec::conv_position(int layer_id) const {
    int pos = 0;
    for (const auto& l : layers) {
        if (l.kind != LayerKind::conv)
            continue;
        if (l.layer_id == layer_id)
            return pos;
        ++pos;
    }
    return -1;
}

std::vector<SpecViolation> validate_network_spec(const NetworkSpec& spec) {
    std::vector<SpecViolation> out;
    auto add = [&](int id, std::string reason) { out.push_back({id, std::move(reason)}); };

    if (spec.input_channels <= 0 || spec.input_height <= 0 || spec.input_width <= 0)
        add(0, "input_shape must be positive");
    if (spec.head_classes <= 0)
        add(0, "head_classes must be positive");

    for (size_t i = 0; i < spec.layers.size(); ++i) {
        const auto& l = spec.layers[i];
        if (l.layer_id != static_cast<int>(i) + 1)
            add(l.layer_id, "layer_id must equal 1-based list position");
        switch (l.kind) {
            case LayerKind::conv:
            case LayerKind::skip_connection:
                if (l.kernel_count <= 0)
                    add(l.layer_id, "kernel_count must be positive");
                if (l.channel_count <= 0)
                    add(l.layer_id, "channel_count must be positive");
                if (l.kernel_h <= 0 || l.kernel_w <= 0)
                    add(l.layer_id, "kernel spatial dims must be positive");
                if (l.stride <= 0)
                    add(l.layer_id, "stride must be positive");
                break;
            case LayerKind::pool:
            case LayerKind::fully_connected:
                if (l.kernel_count != 0 || l.channel_count != 0)
                    add(l.layer_id, "pool/fully_connected layers carry no kernels or channels");
                break;
        }
    }

    // Adjacent-layer alignment on the main path: n_C^{l+1} = n_K^l.
    const LayerSpec* prev_conv = nullptr;
    bool fc_seen = false;
    for (const auto& l : spec.layers) {
        if (l.kind == LayerKind::conv) {
            if (fc_seen)
                add(l.layer_id, "conv layer after fully_connected layer breaks the main path");
            int expect = prev_conv ? prev_conv->kernel_count : spec.input_channels;
            if (l.channel_count != expect) {
                std::ostringstream os;
                os << "channel_count " << l.channel_count << " does not match "
                   << (prev_conv ? "kernel_count of layer " + std::to_string(prev_conv->layer_id)
                                 : std::string("input channels"))
                   << " (" << expect << ")";
                add(l.layer_id, os.str());
            }
            prev_conv = &l;
        } else if (l.kind == LayerKind::fully_connected) {
            fc_seen = true;
        }
    }

    // Skip layers reference existing conv layers and satisfy the
    // skip alignment: n_K^sc = n_K^{l_j}, n_C^sc = n_K^{l_i}, l_j > l_i.
    for (const auto& l : spec.layers) {
        if (l.kind != LayerKind::skip_connection)
            continue;
        const LayerSpec* src = spec.layer_by_id(l.skip_source);
        const LayerSpec* dst = spec.layer_by_id(l.skip_target);
        if (!src || src->kind != LayerKind::conv) {
            add(l.layer_id, "skip_source does not name a conv layer");
            continue;
        }
        if (!dst || dst->kind != LayerKind::conv) {
            add(l.layer_id, "skip_target does not name a conv layer");
            continue;
        }
        if (l.skip_target <= l.skip_source)
            add(l.layer_id, "skip target must come after source");
        if (l.kernel_count != dst->kernel_count) {
            std::ostringstream os;
            os << "skip kernel_count " << l.kernel_count << " != kernel_count of target layer "
               << dst->layer_id << " (" << dst->kernel_count << ")";
            add(l.layer_id, os.str());
        }
        if (l.channel_count != src->kernel_count) {
            std::ostringstream os;
            os << "skip channel_count " << l.channel_count << " != kernel_count of source layer "
               << src->layer_id << " (" << src->kernel_count << ")";
            add(l.layer_id, os.str());
        }
    }

    std::stable_sort(out.begin(), out.end(),
                     [](const SpecViolation& a, const SpecViolation& b) { return a.layer_id < b.layer_id; });
    return out;
}

namespace {

struct Builder {
    NetworkSpec spec;
    int next_id = 1;

    Builder(std::string name, int c, int h, int w, int classes) {
        spec.name = std::move(name);
        spec.input_channels = c;
        spec.input_height = h;
        spec.input_width = w;
        spec.head_classes = classes;
    }

    int conv(int kernels, int channels, int kh = 3, int kw = 3, int pad = 1) {
        LayerSpec l;
        l.layer_id = next_id++;
        l.kind = LayerKind::conv;
        l.kernel_count = kernels;
        l.channel_count = channels;
        l.kernel_h = kh;
        l.kernel_w = kw;
        l.stride = 1;
        l.padding = pad;
        spec.layers.push_back(l);
        return l.layer_id;
    }

    void pool() {
        LayerSpec l;
        l.layer_id = next_id++;
        l.kind = LayerKind::pool;
        l.kernel_h = 2;
        l.kernel_w = 2;
        l.stride = 2;
        spec.layers.push_back(l);
    }

    void skip(int src_id, int dst_id) {
        const LayerSpec* src = spec.layer_by_id(src_id);
        const LayerSpec* dst = spec.layer_by_id(dst_id);
        LayerSpec l;
        l.layer_id = next_id++;
        l.kind = LayerKind::skip_connection;
        l.kernel_count = dst->kernel_count;
        l.channel_count = src->kernel_count;
        l.kernel_h = 1;
        l.kernel_w = 1;
        l.stride = 1;
        l.padding = 0;
        l.skip_source = src_id;
        l.skip_target = dst_id;
        spec.layers.push_back(l);
    }
};

std::vector<int> scale_widths(const std::vector<int>& base, const std::string& variant) {
    std::vector<int> w = base;
    if (variant == "N") {
        for (int& x : w) x = x / 2;
    } else if (variant == "W") {
        for (int& x : w) x = static_cast<int>(x * 1.25 + 0.5);
    }
    return w;
}

NetworkSpec make_vgg6(const std::string& name, const std::string& variant) {
    auto w = scale_widths({16, 32, 64, 64, 128, 128}, variant);
    Builder b(name, 3, 16, 16, 10);
    int c = 3;
    b.conv(w[0], c); b.pool();
    b.conv(w[1], w[0]); b.pool();
    b.conv(w[2], w[1]);
    b.conv(w[3], w[2]); b.pool();
    b.conv(w[4], w[3]);
    b.conv(w[5], w[4]); b.pool();
    return b.spec;
}

NetworkSpec make_vgg8(const std::string& name) {
    // vgg-6 widths with mid-stack duplicates after stack positions 2 and 4,
    // matching the default even-spread deepening positions.
    std::vector<int> w = {16, 32, 32, 64, 64, 64, 128, 128};
    Builder b(name, 3, 16, 16, 10);
    b.conv(w[0], 3); b.pool();
    b.conv(w[1], w[0]);
    b.conv(w[2], w[1]); b.pool();
    b.conv(w[3], w[2]);
    b.conv(w[4], w[3]);
    b.conv(w[5], w[4]); b.pool();
    b.conv(w[6], w[5]);
    b.conv(w[7], w[6]); b.pool();
    return b.spec;
}

NetworkSpec make_res6(const std::string& name, const std::string& variant) {
    auto w = scale_widths({16, 32, 64, 64, 128, 128}, variant);
    Builder b(name, 3, 16, 16, 10);
    b.conv(w[0], 3); b.pool();
    b.conv(w[1], w[0]); b.pool();
    int c3 = b.conv(w[2], w[1]);
    int c4 = b.conv(w[3], w[2]);
    b.skip(c3, c4); b.pool();
    int c5 = b.conv(w[4], w[3]);
    int c6 = b.conv(w[5], w[4]);
    b.skip(c5, c6); b.pool();
    return b.spec;
}

NetworkSpec make_res8(const std::string& name) {
    std::vector<int> w = {16, 32, 64, 64, 64, 128, 128, 128};
    Builder b(name, 3, 16, 16, 10);
    b.conv(w[0], 3); b.pool();
    b.conv(w[1], w[0]); b.pool();
    int c3 = b.conv(w[2], w[1]);
    b.conv(w[3], w[2]);
    int c5 = b.conv(w[4], w[3]);
    b.skip(c3, c5); b.pool();
    int c6 = b.conv(w[5], w[4]);
    b.conv(w[6], w[5]);
    int c8 = b.conv(w[7], w[6]);
    b.skip(c6, c8); b.pool();
    return b.spec;
}

}  // namespace

std::vector<std::string> builtin_spec_names() {
    return {"mini-vgg-6", "mini-vgg-6-N", "mini-vgg-6-W", "mini-vgg-8",
            "mini-res-6", "mini-res-6-N", "mini-res-6-W", "mini-res-8"};
}

NetworkSpec builtin_spec(const std::string& name) {
    if (name == "mini-vgg-6") return make_vgg6(name, "");
    if (name == "mini-vgg-6-N") return make_vgg6(name, "N");
    if (name == "mini-vgg-6-W") return make_vgg6(name, "W");
    if (name == "mini-vgg-8") return make_vgg8(name);
    if (name == "mini-res-6") return make_res6(name, "");
    if (name == "mini-res-6-N") return make_res6(name, "N");
    if (name == "mini-res-6-W") return make_res6(name, "W");
    if (name == "mini-res-8") return make_res8(name);
    std::ostringstream os;
    os << "unknown spec '" << name << "'; valid names:";
    for (const auto& n : builtin_spec_names())
        os << " " << n;
    throw std::invalid_argument(os.str());
}

nlohmann::ordered_json spec_to_json(const NetworkSpec& spec) {
    nlohmann::ordered_json j;
    j["format_version"] = 1;
    j["name"] = spec.name;
    j["input_shape"] = {spec.input_channels, spec.input_height, spec.input_width};
    j["head_classes"] = spec.head_classes;
    j["layers"] = nlohmann::ordered_json::array();
    for (const auto& l : spec.layers) {
        nlohmann::ordered_json jl;
        jl["layer_id"] = l.layer_id;
        jl["kind"] = layer_kind_name(l.kind);
        if (l.kind == LayerKind::conv || l.kind == LayerKind::skip_connection) {
            jl["kernel_count"] = l.kernel_count;
            jl["channel_count"] = l.channel_count;
        }
        if (l.kind != LayerKind::fully_connected) {
            jl["spatial"] = {l.kernel_h, l.kernel_w};
            jl["stride"] = l.stride;
            jl["padding"] = l.padding;
        }
        if (l.kind == LayerKind::skip_connection)
            jl["skip_endpoints"] = {l.skip_source, l.skip_target};
        if (l.kind == LayerKind::fully_connected)
            jl["units"] = l.units;
        j["layers"].push_back(jl);
    }
    return j;
}

NetworkSpec spec_from_json(const nlohmann::json& j) {
    int version = j.at("format_version").get<int>();
    if (version != 1)
        throw std::runtime_error("unsupported spec format_version " + std::to_string(version));
    NetworkSpec spec;
    spec.name = j.at("name").get<std::string>();
    auto shape = j.at("input_shape");
    spec.input_channels = shape.at(0).get<int>();
    spec.input_height = shape.at(1).get<int>();
    spec.input_width = shape.at(2).get<int>();
    spec.head_classes = j.at("head_classes").get<int>();
    for (const auto& jl : j.at("layers")) {
        LayerSpec l;
        l.layer_id = jl.at("layer_id").get<int>();
        l.kind = layer_kind_from_name(jl.at("kind").get<std::string>());
        if (jl.contains("kernel_count")) l.kernel_count = jl["kernel_count"].get<int>();
        if (jl.contains("channel_count")) l.channel_count = jl["channel_count"].get<int>();
        if (jl.contains("spatial")) {
            l.kernel_h = jl["spatial"].at(0).get<int>();
            l.kernel_w = jl["spatial"].at(1).get<int>();
        }
        if (jl.contains("stride")) l.stride = jl["stride"].get<int>();
        if (jl.contains("padding")) l.padding = jl["padding"].get<int>();
        if (jl.contains("skip_endpoints")) {
            l.skip_source = jl["skip_endpoints"].at(0).get<int>();
            l.skip_target = jl["skip_endpoints"].at(1).get<int>();
        }
        if (jl.contains("units")) l.units = jl["units"].get<int>();
        spec.layers.push_back(l);
    }
    return spec;
}

NetworkSpec resolve_spec(const std::string& name_or_path) {
    for (const auto& n : builtin_spec_names())
        if (n == name_or_path)
            return builtin_spec(name_or_path);
    std::ifstream in(name_or_path);
    if (!in)
        throw std::runtime_error("spec '" + name_or_path + "' is neither a builtin name nor a readable file");
    nlohmann::json j = nlohmann::json::parse(in);
    return spec_from_json(j);
}

size_t total_conv_weight_count(const NetworkSpec& spec) {
    size_t total = 0;
    for (const auto& l : spec.layers)
        if (l.kind == LayerKind::conv || l.kind == LayerKind::skip_connection)
            total += static_cast<size_t>(l.kernel_count) * l.channel_count * l.kernel_h * l.kernel_w;
    return total;
}

double parameter_fraction(const LearngeneStructure& structure, const NetworkSpec& spec) {
    auto violations = validate_structure(structure, spec);
    if (!violations.empty())
        throw std::invalid_argument("structure invalid for spec: " + violations.front().reason);

    size_t owned = 0;
    auto conv_ids = spec.conv_layer_ids();
    for (size_t i = 0; i < conv_ids.size(); ++i) {
        const LayerSpec* l = spec.layer_by_id(conv_ids[i]);
        owned += structure.kernels[i].size() * structure.channels[i].size() *
                 static_cast<size_t>(l->kernel_h) * l->kernel_w;
    }
    for (int sid : spec.skip_layer_ids()) {
        const LayerSpec* l = spec.layer_by_id(sid);
        auto sets = structure.skip_sets(spec, sid);
        owned += sets.first.size() * sets.second.size() *
                 static_cast<size_t>(l->kernel_h) * l->kernel_w;
    }
    size_t total = total_conv_weight_count(spec);
    return total == 0 ? 0.0 : static_cast<double>(owned) / static_cast<double>(total);
}

}  // namespace lg
