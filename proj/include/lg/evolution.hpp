#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lg/config.hpp"
#include "lg/dataset.hpp"
#include "lg/genome.hpp"

namespace lg {

// Disjoint class partition of the dataset: survival environments vs unseen
// evaluation environments. Classes beyond train+val stay reserved for novelty
// protocols.
struct World {
    std::vector<int> train_classes;
    std::vector<int> val_classes;
};

World partition_world(const ImageDataset& ds, int n_t, int n_v, uint64_t seed);

struct Task {
    std::vector<int> classes;  // k distinct class ids from the training world
};

Task sample_task(const World& world, int k, Rng& rng);

struct GenePoolEntry {
    LearngeneWeights gene;
    double score = 0.0;
    int generation_admitted = 0;
};

// Ancestry forest over every gene that was ever a pool candidate. Node ids
// are gene ids; roots have parent -1.
struct GeneTree {
    std::vector<std::pair<uint64_t, int64_t>> nodes;  // (gene_id, parent_id), insertion order
    std::map<uint64_t, int64_t> parent_of;

    void add_node(uint64_t gene_id, int64_t parent_id);
    bool contains(uint64_t gene_id) const { return parent_of.count(gene_id) != 0; }
    // Path length between an ancestor and a descendant along parent links,
    // or -1 if not an ancestor.
    int path_length(uint64_t ancestor, uint64_t descendant) const;
};

struct EvolutionState {
    int generation = 0;  // next generation to run
    std::vector<GenePoolEntry> pool;
    GeneTree tree;
    uint64_t next_gene_id = 1;
};

struct ScoredCandidate {
    double score = 0.0;
    size_t params = 0;
    uint64_t gene_id = 0;
};

// Winner precedence: higher score, then fewer parameters, then smaller id.
bool candidate_beats(const ScoredCandidate& a, const ScoredCandidate& b);

// Partition the population into ceil(n/delta) groups by uniform draw without
// replacement (the last group may be smaller) and return each group's best
// candidate index, in group order.
std::vector<int> tournament_select(const std::vector<ScoredCandidate>& population, int delta,
                                   Rng& rng);

// Eq-3-style ancestral credit: starting at the winner's parent (tau = 0) and
// walking to the root, every ancestor currently in the pool receives
// eta^tau * winner_score. Ancestors missing from the pool are skipped but
// still counted in tau. Returns false for an orphan winner (parent not in
// the tree), which skips the update.
bool update_ancestor_scores(std::vector<GenePoolEntry>& pool, const GeneTree& tree,
                            int64_t winner_parent_id, double winner_score, double eta);

// Top-eps winners by score become pool candidates and tree leaves; a full
// pool evicts its lowest-score entry only when the candidate beats it.
// Generation 0 seeds the pool with all winners up to capacity.
void admit_to_pool(std::vector<GenePoolEntry>& pool, GeneTree& tree,
                   std::vector<std::pair<LearngeneWeights, double>> winners, int eps,
                   int capacity, int generation, std::vector<uint64_t>* admitted_out = nullptr);

// Eq-4 parent distribution: score_i / sum(scores); uniform when every score
// is zero. Throws on a negative score.
std::vector<double> parent_probabilities(const std::vector<GenePoolEntry>& pool);

// Inherit the gene into a fresh critic network, train it on the validation
// world's train split, and return holdout accuracy. A critic whose training
// diverges (non-finite loss) scores 0.
double score_learngene(const LearngeneWeights& gene, const World& world, const ImageDataset& ds,
                       const ClassSplit& split, const NetworkSpec& critic_spec,
                       const EvolutionConfig& cfg, uint64_t critic_seed);

using GenerationRecord = nlohmann::ordered_json;

// One full pass of the nested learning/evolution cycle; mutates state in
// place and returns the generation record.
GenerationRecord run_generation(EvolutionState& state, const EvolutionConfig& cfg,
                                const ImageDataset& ds, const World& world,
                                const ClassSplit& split);

struct EvolveResult {
    EvolutionState state;
    World world;
    std::vector<GenerationRecord> records;
};

// Runs cfg.generations generations, appending records to
// <out_dir>/generations.ndjson and checkpointing <out_dir>/checkpoint.lgck
// every generation. Pass a checkpoint path to resume. Under no_evolution a
// single network trains on the whole training world instead and its gene
// becomes the pool.
EvolveResult evolve(const RunConfig& cfg, const ImageDataset& ds,
                    const std::optional<std::string>& resume_path = std::nullopt);

void save_evolution_checkpoint(const EvolutionState& state, const EvolutionConfig& cfg,
                               const World& world, const std::string& path);
struct LoadedCheckpoint {
    EvolutionState state;
    EvolutionConfig cfg;
    World world;
};
LoadedCheckpoint load_evolution_checkpoint(const std::string& path);

}  // namespace lg
