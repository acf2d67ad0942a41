#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace lg {

struct Report {
    std::string csv;
    std::string summary;
};

// Reads <run_dir>/generations.ndjson and renders the per-generation CSV plus
// a text summary. Deterministic: identical inputs give identical output.
Report make_report(const std::string& run_dir);

// Weight fraction recomputed from recorded per-layer (|K|, |C|) sizes and the
// spec name alone. This is an independent path from parameter_fraction and is
// cross-checked against it in the acceptance suite.
double fraction_from_layer_sizes(const std::vector<std::pair<size_t, size_t>>& layer_sizes,
                                 const std::string& spec_name);

std::vector<nlohmann::json> load_generation_records(const std::string& run_dir);

}  // namespace lg
