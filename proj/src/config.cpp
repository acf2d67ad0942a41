#include "lg/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace lg {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos)
        return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

std::map<std::string, std::string> parse_ini(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(lineno) +
                                     ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty())
            throw std::runtime_error("config line " + std::to_string(lineno) + ": empty key");
        kv[key] = val;
    }
    return kv;
}

std::map<std::string, std::string> load_ini(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open config file " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_ini(text);
}

int EvolutionConfig::task_k(int generation) const {
    if (task_classes_final <= 0 || generations <= 1)
        return task_classes;
    const double t = static_cast<double>(generation) / (generations - 1);
    return task_classes +
           static_cast<int>(std::lround(t * (task_classes_final - task_classes)));
}

int EvolutionConfig::winners_per_generation() const {
    return (population + tournament_size - 1) / tournament_size;
}

std::vector<std::string> EvolutionConfig::validate() const {
    std::vector<std::string> errs;
    auto need = [&](bool ok, const std::string& msg) {
        if (!ok)
            errs.push_back(msg);
    };
    need(population >= 1, "population must be >= 1");
    need(tournament_size >= 1 && tournament_size <= population,
         "tournament_size must be in [1, population]");
    need(pool_capacity >= 1, "pool_capacity must be >= 1");
    need(admissions >= 1 && admissions <= winners_per_generation(),
         "admissions must be in [1, winners per generation]");
    need(parental_decay > 0.0 && parental_decay < 1.0, "parental_decay must be in (0, 1)");
    need(mutation_prob >= 0.0 && mutation_prob < 1.0, "mutation_prob must be in [0, 1)");
    need(mutation_alpha > 0.0, "mutation_alpha must be positive");
    need(init_fraction > 0.0 && init_fraction <= 1.0, "init_fraction must be in (0, 1]");
    need(task_classes >= 2, "task_classes must be >= 2");
    need(task_classes <= train_classes, "task_classes must be <= train_classes");
    need(task_classes_final <= train_classes, "task_classes_final must be <= train_classes");
    need(generations >= 0, "generations must be >= 0");
    need(train_classes >= 1 && val_classes >= 1, "train/val class counts must be >= 1");
    need(holdout_fraction > 0.0 && holdout_fraction < 1.0, "holdout_fraction must be in (0, 1)");
    need(train_epochs >= 0 && critic_epochs >= 0, "epoch budgets must be >= 0");
    need(train_lr > 0.0 && critic_lr > 0.0, "learning rates must be positive");
    need(train_batch >= 1 && critic_batch >= 1, "batch sizes must be >= 1");
    return errs;
}

nlohmann::ordered_json EvolutionConfig::to_json() const {
    nlohmann::ordered_json j;
    j["spec"] = spec_name;
    j["train_classes"] = train_classes;
    j["val_classes"] = val_classes;
    j["holdout_fraction"] = holdout_fraction;
    j["max_per_class"] = max_per_class;
    j["population"] = population;
    j["tournament_size"] = tournament_size;
    j["pool_capacity"] = pool_capacity;
    j["admissions"] = admissions;
    j["parental_decay"] = parental_decay;
    j["mutation_prob"] = mutation_prob;
    j["mutation_alpha"] = mutation_alpha;
    j["init_fraction"] = init_fraction;
    j["task_classes"] = task_classes;
    j["task_classes_final"] = task_classes_final;
    j["generations"] = generations;
    j["seed"] = seed;
    j["workers"] = workers;
    j["allow_empty_layers"] = allow_empty_layers;
    j["train_epochs"] = train_epochs;
    j["train_lr"] = train_lr;
    j["train_batch"] = train_batch;
    j["train_momentum"] = train_momentum;
    j["critic_epochs"] = critic_epochs;
    j["critic_lr"] = critic_lr;
    j["critic_batch"] = critic_batch;
    j["ancestor_epochs"] = ancestor_epochs;
    j["no_mutation"] = no_mutation;
    j["random_tournaments_and_pool"] = random_tournaments_and_pool;
    j["population_one"] = population_one;
    j["no_evolution"] = no_evolution;
    return j;
}

EvolutionConfig EvolutionConfig::from_json(const nlohmann::json& j) {
    EvolutionConfig c;
    c.spec_name = j.at("spec").get<std::string>();
    c.train_classes = j.at("train_classes").get<int>();
    c.val_classes = j.at("val_classes").get<int>();
    c.holdout_fraction = j.at("holdout_fraction").get<double>();
    c.max_per_class = j.at("max_per_class").get<int>();
    c.population = j.at("population").get<int>();
    c.tournament_size = j.at("tournament_size").get<int>();
    c.pool_capacity = j.at("pool_capacity").get<int>();
    c.admissions = j.at("admissions").get<int>();
    c.parental_decay = j.at("parental_decay").get<double>();
    c.mutation_prob = j.at("mutation_prob").get<double>();
    c.mutation_alpha = j.at("mutation_alpha").get<double>();
    c.init_fraction = j.at("init_fraction").get<double>();
    c.task_classes = j.at("task_classes").get<int>();
    c.task_classes_final = j.at("task_classes_final").get<int>();
    c.generations = j.at("generations").get<int>();
    c.seed = j.at("seed").get<uint64_t>();
    c.workers = j.at("workers").get<int>();
    c.allow_empty_layers = j.at("allow_empty_layers").get<bool>();
    c.train_epochs = j.at("train_epochs").get<int>();
    c.train_lr = j.at("train_lr").get<double>();
    c.train_batch = j.at("train_batch").get<int>();
    c.train_momentum = j.at("train_momentum").get<double>();
    c.critic_epochs = j.at("critic_epochs").get<int>();
    c.critic_lr = j.at("critic_lr").get<double>();
    c.critic_batch = j.at("critic_batch").get<int>();
    c.ancestor_epochs = j.at("ancestor_epochs").get<int>();
    c.no_mutation = j.at("no_mutation").get<bool>();
    c.random_tournaments_and_pool = j.at("random_tournaments_and_pool").get<bool>();
    c.population_one = j.at("population_one").get<bool>();
    c.no_evolution = j.at("no_evolution").get<bool>();
    return c;
}

std::vector<std::string> RunConfig::validate() const {
    std::vector<std::string> errs = evo.validate();
    if (dataset_path.empty())
        errs.push_back("dataset path is required");
    if (!std::is_sorted(probe_iterations.begin(), probe_iterations.end()))
        errs.push_back("probe_iterations must be sorted ascending");
    if (probe_seeds < 1)
        errs.push_back("probe_seeds must be >= 1");
    if (n_way < 2)
        errs.push_back("n_way must be >= 2");
    if (k_shot < 1 || episodes < 1 || query_per_class < 1)
        errs.push_back("episodic parameters must be >= 1");
    if (eval_lr <= 0 || eval_batch < 1 || finetune_epochs < 0)
        errs.push_back("eval budget parameters out of range");
    return errs;
}

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw std::runtime_error("config key '" + key + "': expected boolean, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& v) {
    std::vector<int> out;
    std::istringstream in(v);
    std::string tok;
    while (std::getline(in, tok, ','))
        out.push_back(std::stoi(trim(tok)));
    return out;
}

}  // namespace

RunConfig run_config_from_ini(const std::map<std::string, std::string>& kv) {
    RunConfig cfg;
    std::set<std::string> seen;
    auto get = [&](const std::string& key, auto&& setter) {
        auto it = kv.find(key);
        if (it != kv.end()) {
            setter(it->second);
            seen.insert(key);
        }
    };
    auto as_int = [](const std::string& v) { return std::stoi(v); };
    auto as_double = [](const std::string& v) { return std::stod(v); };

    EvolutionConfig& e = cfg.evo;
    get("spec", [&](const std::string& v) { e.spec_name = v; });
    get("train_classes", [&](const std::string& v) { e.train_classes = as_int(v); });
    get("val_classes", [&](const std::string& v) { e.val_classes = as_int(v); });
    get("holdout_fraction", [&](const std::string& v) { e.holdout_fraction = as_double(v); });
    get("max_per_class", [&](const std::string& v) { e.max_per_class = as_int(v); });
    get("population", [&](const std::string& v) { e.population = as_int(v); });
    get("tournament_size", [&](const std::string& v) { e.tournament_size = as_int(v); });
    get("pool_capacity", [&](const std::string& v) { e.pool_capacity = as_int(v); });
    get("admissions", [&](const std::string& v) { e.admissions = as_int(v); });
    get("parental_decay", [&](const std::string& v) { e.parental_decay = as_double(v); });
    get("mutation_prob", [&](const std::string& v) { e.mutation_prob = as_double(v); });
    get("mutation_alpha", [&](const std::string& v) { e.mutation_alpha = as_double(v); });
    get("init_fraction", [&](const std::string& v) { e.init_fraction = as_double(v); });
    get("task_classes", [&](const std::string& v) { e.task_classes = as_int(v); });
    get("task_classes_final", [&](const std::string& v) { e.task_classes_final = as_int(v); });
    get("generations", [&](const std::string& v) { e.generations = as_int(v); });
    get("seed", [&](const std::string& v) { e.seed = std::stoull(v); });
    get("workers", [&](const std::string& v) { e.workers = as_int(v); });
    get("allow_empty_layers",
        [&](const std::string& v) { e.allow_empty_layers = parse_bool(v, "allow_empty_layers"); });
    get("train_epochs", [&](const std::string& v) { e.train_epochs = as_int(v); });
    get("train_lr", [&](const std::string& v) { e.train_lr = as_double(v); });
    get("train_batch", [&](const std::string& v) { e.train_batch = as_int(v); });
    get("train_momentum", [&](const std::string& v) { e.train_momentum = as_double(v); });
    get("critic_epochs", [&](const std::string& v) { e.critic_epochs = as_int(v); });
    get("critic_lr", [&](const std::string& v) { e.critic_lr = as_double(v); });
    get("critic_batch", [&](const std::string& v) { e.critic_batch = as_int(v); });
    get("ancestor_epochs", [&](const std::string& v) { e.ancestor_epochs = as_int(v); });
    get("no_mutation", [&](const std::string& v) { e.no_mutation = parse_bool(v, "no_mutation"); });
    get("random_tournaments_and_pool", [&](const std::string& v) {
        e.random_tournaments_and_pool = parse_bool(v, "random_tournaments_and_pool");
    });
    get("population_one",
        [&](const std::string& v) { e.population_one = parse_bool(v, "population_one"); });
    get("no_evolution",
        [&](const std::string& v) { e.no_evolution = parse_bool(v, "no_evolution"); });

    get("dataset", [&](const std::string& v) { cfg.dataset_path = v; });
    get("dataset_format", [&](const std::string& v) { cfg.dataset_format = v; });
    get("downsample", [&](const std::string& v) { cfg.downsample = parse_bool(v, "downsample"); });
    get("out_dir", [&](const std::string& v) { cfg.out_dir = v; });
    get("finetune_epochs", [&](const std::string& v) { cfg.finetune_epochs = as_int(v); });
    get("probe_iterations", [&](const std::string& v) { cfg.probe_iterations = parse_int_list(v); });
    get("probe_seeds", [&](const std::string& v) { cfg.probe_seeds = as_int(v); });
    get("eval_lr", [&](const std::string& v) { cfg.eval_lr = as_double(v); });
    get("eval_batch", [&](const std::string& v) { cfg.eval_batch = as_int(v); });
    get("episodes", [&](const std::string& v) { cfg.episodes = as_int(v); });
    get("n_way", [&](const std::string& v) { cfg.n_way = as_int(v); });
    get("k_shot", [&](const std::string& v) { cfg.k_shot = as_int(v); });
    get("query_per_class", [&](const std::string& v) { cfg.query_per_class = as_int(v); });

    for (const auto& [key, val] : kv)
        if (!seen.count(key))
            throw std::runtime_error("unknown config key '" + key + "'");

    if (cfg.evo.population_one) {
        cfg.evo.population = 1;
        cfg.evo.tournament_size = 1;
        cfg.evo.admissions = 1;
    }
    return cfg;
}

void apply_ablation_flag(RunConfig& cfg, const std::string& flag) {
    if (flag == "no_mutation")
        cfg.evo.no_mutation = true;
    else if (flag == "random_tournaments_and_pool")
        cfg.evo.random_tournaments_and_pool = true;
    else if (flag == "population_one") {
        cfg.evo.population_one = true;
        cfg.evo.population = 1;
        cfg.evo.tournament_size = 1;
        cfg.evo.admissions = 1;
    } else if (flag == "no_evolution")
        cfg.evo.no_evolution = true;
    else
        throw std::runtime_error("unknown ablation flag '" + flag +
                                 "' (expected no_mutation, random_tournaments_and_pool, "
                                 "population_one, no_evolution)");
}

}  // namespace lg
