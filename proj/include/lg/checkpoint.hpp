#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "lg/engine.hpp"
#include "lg/genome.hpp"

namespace lg {

uint32_t crc32(const void* data, size_t len, uint32_t seed = 0);

// Single-file container: "LGCK" magic, u32 manifest length, manifest JSON,
// concatenated little-endian f32 blobs, trailing u32 CRC32 of all preceding
// bytes. Blob offsets in the manifest are float counts from the blob section
// start.
void save_container(const std::string& path, const nlohmann::ordered_json& manifest,
                    const std::vector<const std::vector<float>*>& blobs);
struct Container {
    nlohmann::json manifest;
    std::vector<float> blob;  // whole blob section
};
Container load_container(const std::string& path);

// Weight checkpoints are a file pair: <path> is the JSON manifest (spec,
// shapes, byte offsets, format version), <path>.bin the little-endian f32
// blob. Learngenes use the same pair with the structure index sets in the
// manifest.
void save_network_weights(const NetworkWeights& w, const std::string& path);
NetworkWeights load_network_weights(const std::string& path);

void save_gene(const LearngeneWeights& g, const std::string& path);
LearngeneWeights load_gene(const std::string& path);

// JSON (de)serialization of gene structure and metadata, shared by the gene
// file pair and the evolution checkpoints. Values go to blobs, not JSON.
nlohmann::ordered_json gene_meta_to_json(const LearngeneWeights& g);
LearngeneWeights gene_meta_from_json(const nlohmann::json& j);

void atomic_write_text(const std::string& path, const std::string& text);

}  // namespace lg
