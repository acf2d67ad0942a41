#include "lg/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace lg {

uint32_t crc32(const void* data, size_t len, uint32_t seed) {
    static uint32_t table[256];
    static bool init = false;
    if (!init) {
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k)
                c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            table[i] = c;
        }
        init = true;
    }
    uint32_t c = seed ^ 0xffffffffu;
    const uint8_t* p = static_cast<const uint8_t*>(data);
    for (size_t i = 0; i < len; ++i)
        c = table[(c ^ p[i]) & 0xff] ^ (c >> 8);
    return c ^ 0xffffffffu;
}

namespace {

void append_u32(std::string& s, uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    s.append(b, 4);
}

uint32_t read_u32(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

void atomic_write_bytes(const std::string& path, const std::string& bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot write " + tmp);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out)
            throw std::runtime_error("write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

std::string read_all(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return s;
}

}  // namespace

void atomic_write_text(const std::string& path, const std::string& text) {
    atomic_write_bytes(path, text);
}

void save_container(const std::string& path, const nlohmann::ordered_json& manifest,
                    const std::vector<const std::vector<float>*>& blobs) {
    std::string body;
    body.append("LGCK", 4);
    const std::string mtext = manifest.dump();
    append_u32(body, static_cast<uint32_t>(mtext.size()));
    body += mtext;
    for (const auto* b : blobs)
        body.append(reinterpret_cast<const char*>(b->data()), b->size() * sizeof(float));
    append_u32(body, crc32(body.data(), body.size()));
    atomic_write_bytes(path, body);
}

Container load_container(const std::string& path) {
    const std::string bytes = read_all(path);
    if (bytes.size() < 12)
        throw std::runtime_error(path + ": too small for a checkpoint container");
    if (std::memcmp(bytes.data(), "LGCK", 4) != 0)
        throw std::runtime_error(path + ": bad magic (expected LGCK)");
    const uint32_t stored_crc =
        read_u32(reinterpret_cast<const uint8_t*>(bytes.data()) + bytes.size() - 4);
    const uint32_t actual = crc32(bytes.data(), bytes.size() - 4);
    if (stored_crc != actual)
        throw std::runtime_error(path + ": checksum mismatch (corrupted checkpoint)");

    const uint32_t mlen = read_u32(reinterpret_cast<const uint8_t*>(bytes.data()) + 4);
    if (8 + static_cast<size_t>(mlen) + 4 > bytes.size())
        throw std::runtime_error(path + ": manifest length exceeds file size");
    Container c;
    c.manifest = nlohmann::json::parse(bytes.substr(8, mlen));
    const size_t blob_bytes = bytes.size() - 4 - 8 - mlen;
    if (blob_bytes % sizeof(float) != 0)
        throw std::runtime_error(path + ": blob section is not a whole number of floats");
    c.blob.resize(blob_bytes / sizeof(float));
    std::memcpy(c.blob.data(), bytes.data() + 8 + mlen, blob_bytes);
    return c;
}

namespace {

// Shared pair-file writer: manifest JSON at <path>, raw f32 blob at <path>.bin.
void save_pair(const std::string& path, nlohmann::ordered_json manifest,
               const std::vector<const std::vector<float>*>& blobs) {
    std::string blob;
    size_t offset = 0;
    nlohmann::ordered_json shapes = manifest["blobs"];
    manifest["blobs"] = nlohmann::ordered_json::array();
    size_t bi = 0;
    for (const auto& entry : shapes) {
        nlohmann::ordered_json e = entry;
        e["offset"] = offset;
        e["count"] = blobs[bi]->size();
        offset += blobs[bi]->size();
        blob.append(reinterpret_cast<const char*>(blobs[bi]->data()),
                    blobs[bi]->size() * sizeof(float));
        manifest["blobs"].push_back(e);
        ++bi;
    }
    const size_t slash = path.find_last_of('/');
    manifest["blob_file"] = (slash == std::string::npos ? path : path.substr(slash + 1)) + ".bin";
    manifest["blob_crc32"] = crc32(blob.data(), blob.size());
    atomic_write_bytes(path + ".bin", blob);
    atomic_write_bytes(path, manifest.dump(2) + "\n");
}

struct PairFile {
    nlohmann::json manifest;
    std::vector<float> blob;

    std::vector<float> slice(const nlohmann::json& entry) const {
        const size_t off = entry.at("offset").get<size_t>();
        const size_t count = entry.at("count").get<size_t>();
        if (off + count > blob.size())
            throw std::runtime_error("blob slice out of range");
        return std::vector<float>(blob.begin() + off, blob.begin() + off + count);
    }
};

PairFile load_pair(const std::string& path) {
    PairFile p;
    p.manifest = nlohmann::json::parse(read_all(path));
    const int version = p.manifest.at("format_version").get<int>();
    if (version != 1)
        throw std::runtime_error(path + ": unsupported checkpoint format_version " +
                                 std::to_string(version));
    const std::string bytes = read_all(path + ".bin");
    if (bytes.size() % sizeof(float) != 0)
        throw std::runtime_error(path + ".bin: not a whole number of floats");
    const uint32_t expect = p.manifest.at("blob_crc32").get<uint32_t>();
    const uint32_t actual = crc32(bytes.data(), bytes.size());
    if (expect != actual)
        throw std::runtime_error(path + ".bin: checksum mismatch");
    p.blob.resize(bytes.size() / sizeof(float));
    std::memcpy(p.blob.data(), bytes.data(), bytes.size());
    return p;
}

}  // namespace

void save_network_weights(const NetworkWeights& w, const std::string& path) {
    nlohmann::ordered_json m;
    m["format_version"] = 1;
    m["kind"] = "network";
    m["spec"] = spec_to_json(w.spec);
    m["blobs"] = nlohmann::ordered_json::array();
    std::vector<const std::vector<float>*> blobs;
    auto add = [&](const std::string& name, std::vector<int> shape, const std::vector<float>* v) {
        nlohmann::ordered_json e;
        e["name"] = name;
        e["shape"] = shape;
        m["blobs"].push_back(e);
        blobs.push_back(v);
    };
    for (size_t i = 0; i < w.conv_w.size(); ++i) {
        const auto& t = w.conv_w[i];
        add("conv_w" + std::to_string(i), {t.n, t.c, t.h, t.w}, &t.v);
        add("conv_b" + std::to_string(i), {static_cast<int>(w.conv_b[i].size())}, &w.conv_b[i]);
    }
    for (size_t i = 0; i < w.skip_w.size(); ++i) {
        const auto& t = w.skip_w[i];
        add("skip_w" + std::to_string(i), {t.n, t.c, t.h, t.w}, &t.v);
        add("skip_b" + std::to_string(i), {static_cast<int>(w.skip_b[i].size())}, &w.skip_b[i]);
    }
    add("head_w", {w.head_w.rows, w.head_w.cols}, &w.head_w.v);
    add("head_b", {static_cast<int>(w.head_b.size())}, &w.head_b);
    save_pair(path, m, blobs);
}

NetworkWeights load_network_weights(const std::string& path) {
    PairFile p = load_pair(path);
    if (p.manifest.at("kind").get<std::string>() != "network")
        throw std::runtime_error(path + ": not a network checkpoint");
    NetworkWeights w = make_zero_weights(spec_from_json(p.manifest.at("spec")));
    size_t bi = 0;
    const auto& blobs = p.manifest.at("blobs");
    auto take = [&](std::vector<float>& dst, const std::string& name) {
        const auto& e = blobs.at(bi++);
        if (e.at("name").get<std::string>() != name)
            throw std::runtime_error(path + ": blob order mismatch at " + name);
        dst = p.slice(e);
    };
    for (size_t i = 0; i < w.conv_w.size(); ++i) {
        std::vector<float> v;
        take(v, "conv_w" + std::to_string(i));
        if (v.size() != w.conv_w[i].size())
            throw std::runtime_error(path + ": conv weight size mismatch");
        w.conv_w[i].v = std::move(v);
        take(w.conv_b[i], "conv_b" + std::to_string(i));
    }
    for (size_t i = 0; i < w.skip_w.size(); ++i) {
        std::vector<float> v;
        take(v, "skip_w" + std::to_string(i));
        if (v.size() != w.skip_w[i].size())
            throw std::runtime_error(path + ": skip weight size mismatch");
        w.skip_w[i].v = std::move(v);
        take(w.skip_b[i], "skip_b" + std::to_string(i));
    }
    std::vector<float> hv;
    take(hv, "head_w");
    if (hv.size() != w.head_w.v.size())
        throw std::runtime_error(path + ": head weight size mismatch");
    w.head_w.v = std::move(hv);
    take(w.head_b, "head_b");
    return w;
}

nlohmann::ordered_json gene_meta_to_json(const LearngeneWeights& g) {
    nlohmann::ordered_json m;
    m["gene_id"] = g.gene_id;
    m["parent_id"] = g.parent_id;
    m["spec_name"] = g.structure.spec_name;
    m["source_widths"] = g.structure.source_widths;
    m["kernels"] = g.structure.kernels;
    m["channels"] = g.structure.channels;
    m["spatial"] = nlohmann::ordered_json::array();
    for (auto [h, w] : g.spatial)
        m["spatial"].push_back({h, w});
    m["pim_layer"] = nlohmann::ordered_json::array();
    for (size_t i = 0; i < g.pim_layer.size(); ++i)
        m["pim_layer"].push_back(static_cast<bool>(g.pim_layer[i]));
    m["skip_spatial"] = nlohmann::ordered_json::array();
    for (auto [h, w] : g.skip_spatial)
        m["skip_spatial"].push_back({h, w});
    return m;
}

LearngeneWeights gene_meta_from_json(const nlohmann::json& j) {
    LearngeneWeights g;
    g.gene_id = j.at("gene_id").get<uint64_t>();
    g.parent_id = j.at("parent_id").get<int64_t>();
    g.structure.spec_name = j.at("spec_name").get<std::string>();
    g.structure.source_widths = j.at("source_widths").get<std::vector<int>>();
    g.structure.kernels = j.at("kernels").get<std::vector<std::vector<int>>>();
    g.structure.channels = j.at("channels").get<std::vector<std::vector<int>>>();
    for (const auto& s : j.at("spatial"))
        g.spatial.push_back({s.at(0).get<int>(), s.at(1).get<int>()});
    for (const auto& b : j.at("pim_layer"))
        g.pim_layer.push_back(b.get<bool>());
    for (const auto& s : j.at("skip_spatial"))
        g.skip_spatial.push_back({s.at(0).get<int>(), s.at(1).get<int>()});
    g.values.resize(g.structure.kernels.size());
    g.skip_values.resize(g.skip_spatial.size());
    return g;
}

void save_gene(const LearngeneWeights& g, const std::string& path) {
    nlohmann::ordered_json m;
    m["format_version"] = 1;
    m["kind"] = "gene";
    nlohmann::ordered_json meta = gene_meta_to_json(g);
    for (auto& [k, v] : meta.items())
        m[k] = v;
    m["blobs"] = nlohmann::ordered_json::array();
    std::vector<const std::vector<float>*> blobs;
    for (size_t i = 0; i < g.values.size(); ++i) {
        nlohmann::ordered_json e;
        e["name"] = "values" + std::to_string(i);
        m["blobs"].push_back(e);
        blobs.push_back(&g.values[i]);
    }
    for (size_t i = 0; i < g.skip_values.size(); ++i) {
        nlohmann::ordered_json e;
        e["name"] = "skip_values" + std::to_string(i);
        m["blobs"].push_back(e);
        blobs.push_back(&g.skip_values[i]);
    }
    save_pair(path, m, blobs);
}

LearngeneWeights load_gene(const std::string& path) {
    PairFile p = load_pair(path);
    if (p.manifest.at("kind").get<std::string>() != "gene")
        throw std::runtime_error(path + ": not a gene checkpoint");
    LearngeneWeights g = gene_meta_from_json(p.manifest);
    const auto& blobs = p.manifest.at("blobs");
    size_t bi = 0;
    for (size_t i = 0; i < g.values.size(); ++i)
        g.values[i] = p.slice(blobs.at(bi++));
    for (size_t i = 0; i < g.skip_values.size(); ++i)
        g.skip_values[i] = p.slice(blobs.at(bi++));
    return g;
}

}  // namespace lg
