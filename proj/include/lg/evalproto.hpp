#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lg/dataset.hpp"
#include "lg/evolution.hpp"
#include "lg/genome.hpp"

namespace lg {

struct FineTuneBudget {
    int epochs = 3;
    double lr = 0.05;
    int batch = 16;
};

struct FineTuneOutcome {
    double holdout_accuracy = 0.0;
    double train_accuracy = 0.0;
};

// Held-out-class protocol: initialize a network of `target` (from the gene,
// or He-random when gene is null), fine-tune on the train split of the given
// classes, report holdout accuracy.
FineTuneOutcome finetune_eval(const LearngeneWeights* gene, const NetworkSpec& target,
                              const ImageDataset& ds, const ClassSplit& split,
                              const std::vector<int>& classes, const FineTuneBudget& budget,
                              uint64_t seed);

struct ProbeResult {
    std::vector<int> iterations;
    // [seed][iteration index]
    std::vector<std::vector<double>> gene_acc;
    std::vector<std::vector<double>> random_acc;
    std::vector<double> gene_mean, gene_std;
    std::vector<double> random_mean, random_std;
};

// Early-iteration accuracy table: for each seed, fine-tune a gene-initialized
// network and a He-random twin on the novelty-class train split, recording
// holdout accuracy after each listed update-iteration count. The input gene
// is never mutated.
ProbeResult probe_instinct(const LearngeneWeights& gene, const NetworkSpec& target,
                           const ImageDataset& ds, const ClassSplit& split,
                           const std::vector<int>& novelty_classes,
                           const std::vector<int>& iterations, int seeds,
                           const FineTuneBudget& budget, uint64_t master_seed);

struct EpisodicResult {
    double mean = 0.0;
    double ci95 = 0.0;
    std::vector<double> per_episode;
};

// n-way k-shot episodes over the novelty classes: sample classes and support
// images, inherit into the target, fine-tune on the support set under the
// budget, evaluate on the query set. 95% CI via normal approximation.
EpisodicResult episodic_eval(const LearngeneWeights& gene, const NetworkSpec& target,
                             const ImageDataset& ds, const std::vector<int>& novelty_classes,
                             int n_way, int k_shot, int query_per_class, int episodes,
                             const FineTuneBudget& budget, uint64_t master_seed);

}  // namespace lg
