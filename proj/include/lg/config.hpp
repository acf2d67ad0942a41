#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace lg {

// Flat key = value text with # comments. Unknown keys are rejected so typos
// fail loudly.
std::map<std::string, std::string> parse_ini(const std::string& text);
std::map<std::string, std::string> load_ini(const std::string& path);

struct EvolutionConfig {
    // world
    std::string spec_name = "mini-vgg-6";
    int train_classes = 8;      // n_t
    int val_classes = 2;        // n_v
    double holdout_fraction = 0.2;
    int max_per_class = 0;      // 0 = unlimited

    // loop
    int population = 8;         // n_p
    int tournament_size = 2;    // delta
    int pool_capacity = 10;     // rho_max
    int admissions = 2;         // epsilon
    double parental_decay = 0.5;   // eta
    double mutation_prob = 0.2;    // p_m
    double mutation_alpha = 0.9;   // alpha
    double init_fraction = 0.25;   // c
    int task_classes = 4;          // k
    int task_classes_final = 0;    // >0 enables a linear ramp of k over generations
    int generations = 15;
    uint64_t seed = 1;
    int workers = 0;            // 0 = OpenMP default
    bool allow_empty_layers = false;

    // budgets
    int train_epochs = 2;
    double train_lr = 0.1;
    int train_batch = 32;
    double train_momentum = 0.0;
    int critic_epochs = 2;
    double critic_lr = 0.1;
    int critic_batch = 32;
    int ancestor_epochs = 2;    // generation-0 ancestor pre-training

    // ablations
    bool no_mutation = false;
    bool random_tournaments_and_pool = false;
    bool population_one = false;
    bool no_evolution = false;

    // k for a given generation index under the optional linear ramp
    int task_k(int generation) const;

    // Winners per generation: ceil(n_p / delta).
    int winners_per_generation() const;

    std::vector<std::string> validate() const;
    nlohmann::ordered_json to_json() const;
    static EvolutionConfig from_json(const nlohmann::json& j);
};

struct RunConfig {
    EvolutionConfig evo;
    std::string dataset_path;
    std::string dataset_format = "flat-records";
    bool downsample = false;
    std::string out_dir = "run";

    // evaluation protocols
    int finetune_epochs = 3;
    std::vector<int> probe_iterations = {0, 10, 30};
    int probe_seeds = 5;
    double eval_lr = 0.05;
    int eval_batch = 16;
    int episodes = 100;
    int n_way = 2;
    int k_shot = 5;
    int query_per_class = 15;

    std::vector<std::string> validate() const;
};

RunConfig run_config_from_ini(const std::map<std::string, std::string>& kv);
void apply_ablation_flag(RunConfig& cfg, const std::string& flag);

}  // namespace lg
