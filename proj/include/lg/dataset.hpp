#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lg/engine.hpp"
#include "lg/rng.hpp"

namespace lg {

enum class DatasetFormat { flat_records, cifar10_binary };

DatasetFormat dataset_format_from_name(const std::string& s);

struct ImageDataset {
    uint16_t version = 1;
    std::vector<std::string> class_names;
    int height = 0, width = 0, channels = 0;
    std::vector<uint8_t> labels;  // one per record
    std::vector<uint8_t> pixels;  // record-major, h*w*c bytes per record

    size_t count() const { return labels.size(); }
    int class_count() const { return static_cast<int>(class_names.size()); }
    size_t pixels_per_record() const {
        return static_cast<size_t>(height) * width * channels;
    }
    // Record indices per class id.
    std::vector<std::vector<int>> index_by_class() const;
};

// Parses the flat-records container or a cifar10 binary batch file.
// Malformed input raises std::runtime_error with the offending byte offset.
ImageDataset load_dataset(const std::string& path, DatasetFormat format);

void save_flat_records(const ImageDataset& ds, const std::string& path);

// 2x2 box-average downsample of every record.
ImageDataset downsample2x(const ImageDataset& ds);

// Deterministic cap of records per class (first n in record order).
ImageDataset limit_per_class(const ImageDataset& ds, int max_per_class);

// Procedural 16x16 RGB dataset: each class is a fixed combination of an
// oriented grating and a colored shape overlay drawn from shared primitive
// pools, so features transfer across class partitions. Fully determined by
// the seed.
ImageDataset synth_dataset(int classes, int per_class, uint64_t seed);

// Gather the records of the given classes, remapping labels to [0, k) in the
// order the classes are listed. Pixels stay 8-bit; normalization happens at
// batch assembly.
Samples gather_samples(const ImageDataset& ds, const std::vector<int>& classes,
                       const std::vector<std::vector<int>>& per_class_indices);

// Per-class deterministic train/holdout split. Indices are shuffled by a
// seed derived from (seed, class id), so a class splits identically wherever
// it appears.
struct ClassSplit {
    std::vector<std::vector<int>> train;    // per class id
    std::vector<std::vector<int>> holdout;
};
ClassSplit split_classes(const ImageDataset& ds, double holdout_fraction, uint64_t seed);

}  // namespace lg
