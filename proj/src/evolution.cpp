#include "lg/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "lg/checkpoint.hpp"
#include "lg/engine.hpp"
#include "lg/inheritance.hpp"

namespace lg {

World partition_world(const ImageDataset& ds, int n_t, int n_v, uint64_t seed) {
    const int n = ds.class_count();
    if (n_t + n_v > n)
        throw std::invalid_argument("dataset has " + std::to_string(n) + " classes, need " +
                                    std::to_string(n_t + n_v));
    auto by_class = ds.index_by_class();
    for (int c = 0; c < n; ++c)
        if (by_class[c].empty())
            throw std::invalid_argument("class " + std::to_string(c) + " has no samples");

    std::vector<int> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    Rng rng(derive_seed(seed, {kStreamWorld}));
    for (size_t i = ids.size(); i > 1; --i)
        std::swap(ids[i - 1], ids[rng.below(i)]);

    World w;
    w.train_classes.assign(ids.begin(), ids.begin() + n_t);
    w.val_classes.assign(ids.begin() + n_t, ids.begin() + n_t + n_v);
    std::sort(w.train_classes.begin(), w.train_classes.end());
    std::sort(w.val_classes.begin(), w.val_classes.end());
    return w;
}

Task sample_task(const World& world, int k, Rng& rng) {
    if (k > static_cast<int>(world.train_classes.size()))
        throw std::invalid_argument("task size k=" + std::to_string(k) + " exceeds " +
                                    std::to_string(world.train_classes.size()) +
                                    " training classes");
    std::vector<int> pool = world.train_classes;
    Task t;
    for (int i = 0; i < k; ++i) {
        size_t j = i + rng.below(pool.size() - i);
        std::swap(pool[i], pool[j]);
        t.classes.push_back(pool[i]);
    }
    return t;
}

void GeneTree::add_node(uint64_t gene_id, int64_t parent_id) {
    if (contains(gene_id))
        throw std::logic_error("gene " + std::to_string(gene_id) + " already in tree");
    if (parent_id >= 0 && !contains(static_cast<uint64_t>(parent_id)))
        throw std::logic_error("parent " + std::to_string(parent_id) + " not in tree");
    nodes.push_back({gene_id, parent_id});
    parent_of[gene_id] = parent_id;
}

int GeneTree::path_length(uint64_t ancestor, uint64_t descendant) const {
    int tau = 0;
    uint64_t cur = descendant;
    for (;;) {
        if (cur == ancestor)
            return tau;
        auto it = parent_of.find(cur);
        if (it == parent_of.end() || it->second < 0)
            return -1;
        cur = static_cast<uint64_t>(it->second);
        ++tau;
    }
}

bool candidate_beats(const ScoredCandidate& a, const ScoredCandidate& b) {
    if (a.score != b.score)
        return a.score > b.score;
    if (a.params != b.params)
        return a.params < b.params;
    return a.gene_id < b.gene_id;
}

std::vector<int> tournament_select(const std::vector<ScoredCandidate>& population, int delta,
                                   Rng& rng) {
    if (population.empty())
        throw std::invalid_argument("tournament over an empty population");
    if (delta < 1)
        throw std::invalid_argument("tournament size must be >= 1");

    std::vector<int> order(population.size());
    std::iota(order.begin(), order.end(), 0);
    for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.below(i)]);

    std::vector<int> winners;
    for (size_t first = 0; first < order.size(); first += static_cast<size_t>(delta)) {
        const size_t last = std::min(order.size(), first + static_cast<size_t>(delta));
        int best = order[first];
        for (size_t i = first + 1; i < last; ++i)
            if (candidate_beats(population[order[i]], population[best]))
                best = order[i];
        winners.push_back(best);
    }
    return winners;
}

bool update_ancestor_scores(std::vector<GenePoolEntry>& pool, const GeneTree& tree,
                            int64_t winner_parent_id, double winner_score, double eta) {
    if (winner_parent_id < 0 || !tree.contains(static_cast<uint64_t>(winner_parent_id)))
        return false;

    int tau = 0;
    int64_t cur = winner_parent_id;
    while (cur >= 0) {
        for (auto& entry : pool)
            if (entry.gene.gene_id == static_cast<uint64_t>(cur))
                entry.score += std::pow(eta, tau) * winner_score;
        auto it = tree.parent_of.find(static_cast<uint64_t>(cur));
        cur = (it == tree.parent_of.end()) ? -1 : it->second;
        ++tau;
    }
    return true;
}

void admit_to_pool(std::vector<GenePoolEntry>& pool, GeneTree& tree,
                   std::vector<std::pair<LearngeneWeights, double>> winners, int eps,
                   int capacity, int generation, std::vector<uint64_t>* admitted_out) {
    // Order candidates by score, then fewer params, then smaller id.
    std::stable_sort(winners.begin(), winners.end(), [](const auto& a, const auto& b) {
        ScoredCandidate ca{a.second, a.first.parameter_count(), a.first.gene_id};
        ScoredCandidate cb{b.second, b.first.parameter_count(), b.first.gene_id};
        return candidate_beats(ca, cb);
    });

    const size_t take = generation == 0 ? winners.size() : static_cast<size_t>(eps);
    for (size_t i = 0; i < std::min(take, winners.size()); ++i) {
        auto& [gene, score] = winners[i];
        tree.add_node(gene.gene_id, gene.parent_id);
        bool pooled = false;
        if (static_cast<int>(pool.size()) < capacity) {
            pooled = true;
        } else {
            auto weakest = std::min_element(pool.begin(), pool.end(), [](const auto& a, const auto& b) {
                if (a.score != b.score)
                    return a.score < b.score;
                return a.gene.gene_id > b.gene.gene_id;
            });
            if (weakest != pool.end() && score > weakest->score) {
                pool.erase(weakest);
                pooled = true;
            }
        }
        if (pooled) {
            GenePoolEntry entry;
            entry.gene = std::move(gene);
            entry.score = score;
            entry.generation_admitted = generation;
            pool.push_back(std::move(entry));
            if (admitted_out)
                admitted_out->push_back(pool.back().gene.gene_id);
        }
    }
}

std::vector<double> parent_probabilities(const std::vector<GenePoolEntry>& pool) {
    if (pool.empty())
        throw std::invalid_argument("parent probabilities over an empty pool");
    double sum = 0.0;
    for (const auto& e : pool) {
        if (e.score < 0.0)
            throw std::invalid_argument("negative pool score violates the score invariant");
        sum += e.score;
    }
    std::vector<double> p(pool.size());
    if (sum == 0.0) {
        std::fill(p.begin(), p.end(), 1.0 / pool.size());
    } else {
        for (size_t i = 0; i < pool.size(); ++i)
            p[i] = pool[i].score / sum;
    }
    return p;
}

namespace {

Samples task_train_samples(const ImageDataset& ds, const ClassSplit& split,
                           const std::vector<int>& classes) {
    return gather_samples(ds, classes, split.train);
}

size_t draw_from(const std::vector<double>& probs, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc)
            return i;
    }
    return probs.size() - 1;
}

}  // namespace

double score_learngene(const LearngeneWeights& gene, const World& world, const ImageDataset& ds,
                       const ClassSplit& split, const NetworkSpec& critic_spec,
                       const EvolutionConfig& cfg, uint64_t critic_seed) {
    if (world.val_classes.empty())
        throw std::invalid_argument("validation world is empty");

    NetworkSpec spec = critic_spec;
    spec.head_classes = static_cast<int>(world.val_classes.size());

    Rng inherit_rng(derive_seed(critic_seed, {1}));
    try {
        NetworkWeights critic = inherit(gene, spec, inherit_rng);
        Samples train_split = gather_samples(ds, world.val_classes, split.train);
        TrainBudget budget;
        budget.epochs = cfg.critic_epochs;
        budget.lr = static_cast<float>(cfg.critic_lr);
        budget.batch_size = cfg.critic_batch;
        budget.seed = derive_seed(critic_seed, {2});
        budget.momentum = static_cast<float>(cfg.train_momentum);
        train(critic, train_split, budget);
        Samples holdout = gather_samples(ds, world.val_classes, split.holdout);
        return evaluate(critic, holdout);
    } catch (const training_diverged&) {
        return 0.0;
    }
}

GenerationRecord run_generation(EvolutionState& state, const EvolutionConfig& cfg,
                                const ImageDataset& ds, const World& world,
                                const ClassSplit& split) {
    const int gen = state.generation;
    const int n_p = cfg.population;
    const int k = cfg.task_k(gen);
    const NetworkSpec base_spec = builtin_spec(cfg.spec_name);

    NetworkSpec task_spec = base_spec;
    task_spec.head_classes = k;

    // Parent genes for this generation. Ids are allocated up front so the
    // parallel section never touches shared state.
    std::vector<LearngeneWeights> parents(n_p);
    std::vector<int64_t> parent_ids(n_p, -1);
    if (gen > 0) {
        std::vector<double> probs;
        if (cfg.random_tournaments_and_pool)
            probs.assign(state.pool.size(), 1.0 / state.pool.size());
        else
            probs = parent_probabilities(state.pool);
        Rng rng(derive_seed(cfg.seed, {static_cast<uint64_t>(gen), kStreamParents}));
        for (int i = 0; i < n_p; ++i) {
            const size_t j = draw_from(probs, rng);
            parents[i] = state.pool[j].gene;
            parent_ids[i] = static_cast<int64_t>(state.pool[j].gene.gene_id);
        }
    }

    std::vector<uint64_t> gene_ids(n_p);
    for (int i = 0; i < n_p; ++i)
        gene_ids[i] = state.next_gene_id + static_cast<uint64_t>(i);
    state.next_gene_id += static_cast<uint64_t>(n_p);

    struct IndividualResult {
        LearngeneWeights gene;
        Task task;
        double train_acc = 0.0;
        double score = 0.0;
        bool failed = false;
    };
    std::vector<IndividualResult> results(n_p);
    std::exception_ptr first_error;

    // Individuals are fully independent: every random draw below derives from
    // (master seed, generation, individual), so any worker count produces
    // identical results. Exceptions other than a diverged individual are
    // captured and rethrown after the region.
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1) num_threads( \
        cfg.workers > 0 ? cfg.workers : omp_get_max_threads())
#endif
    for (int i = 0; i < n_p; ++i) {
        IndividualResult& res = results[i];
        const uint64_t gseed = derive_seed(cfg.seed, {static_cast<uint64_t>(gen), 0, static_cast<uint64_t>(i)});
        try {
            // Structure for this individual: fresh random at generation 0,
            // otherwise the parent's, mutated unless disabled.
            LearngeneWeights parent_gene;
            if (gen == 0) {
                Rng srng(derive_seed(gseed, {kStreamInitStructure}));
                LearngeneStructure structure =
                    init_random_structure(task_spec, cfg.init_fraction, srng);

                // Freshly trained ancestor provides the initial gene values.
                Rng arng(derive_seed(gseed, {kStreamAncestor}));
                NetworkWeights ancestor = make_random_weights(task_spec, arng);
                Rng trng(derive_seed(gseed, {kStreamTask}));
                Task atask = sample_task(world, k, trng);
                TrainBudget abudget;
                abudget.epochs = cfg.ancestor_epochs;
                abudget.lr = static_cast<float>(cfg.train_lr);
                abudget.batch_size = cfg.train_batch;
                abudget.seed = derive_seed(gseed, {kStreamTrain, 1});
                abudget.momentum = static_cast<float>(cfg.train_momentum);
                train(ancestor, task_train_samples(ds, split, atask.classes), abudget);
                parent_gene = extract_learngene(ancestor, structure);
            } else {
                parent_gene = parents[i];
            }

            LearngeneStructure structure = parent_gene.structure;
            if (!cfg.no_mutation) {
                MutationParams mp;
                mp.p_m = cfg.mutation_prob;
                mp.alpha = cfg.mutation_alpha;
                mp.allow_empty_layers = cfg.allow_empty_layers;
                Rng mrng(derive_seed(gseed, {kStreamMutate}));
                structure = mutate(structure, task_spec, mp, mrng);
            }
            LearngeneWeights seed_gene = regraft(parent_gene, structure, task_spec);

            // Fresh descendant network inherits the gene and lives one task.
            Rng irng(derive_seed(gseed, {kStreamInherit}));
            NetworkWeights net = inherit(seed_gene, task_spec, irng);
            Rng trng(derive_seed(gseed, {kStreamTask, 7}));
            res.task = sample_task(world, k, trng);
            TrainBudget budget;
            budget.epochs = cfg.train_epochs;
            budget.lr = static_cast<float>(cfg.train_lr);
            budget.batch_size = cfg.train_batch;
            budget.seed = derive_seed(gseed, {kStreamTrain, 2});
            budget.momentum = static_cast<float>(cfg.train_momentum);
            TrainResult tr = train(net, task_train_samples(ds, split, res.task.classes), budget);
            res.train_acc = tr.train_accuracy;

            res.gene = extract_learngene(net, structure);
            res.gene.gene_id = gene_ids[i];
            res.gene.parent_id = parent_ids[i];

            res.score = score_learngene(res.gene, world, ds, split, base_spec, cfg,
                                        derive_seed(gseed, {kStreamCritic}));
        } catch (const training_diverged&) {
            res.failed = true;
            res.score = 0.0;
            if (res.gene.structure.kernels.empty()) {
                // Failed before extraction; an all-zero gene keeps the
                // downstream bookkeeping aligned.
                Rng srng(derive_seed(gseed, {kStreamInitStructure, 9}));
                LearngeneStructure structure =
                    init_random_structure(task_spec, cfg.init_fraction, srng);
                res.gene = extract_learngene(make_zero_weights(task_spec), structure);
            }
            res.gene.gene_id = gene_ids[i];
            res.gene.parent_id = parent_ids[i];
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
            {
                if (!first_error)
                    first_error = std::current_exception();
            }
        }
    }
    if (first_error)
        std::rethrow_exception(first_error);

    // Selection and pool maintenance run serially at the generation barrier.
    std::vector<ScoredCandidate> candidates(n_p);
    for (int i = 0; i < n_p; ++i)
        candidates[i] = {results[i].score, results[i].gene.parameter_count(),
                         results[i].gene.gene_id};

    Rng trng(derive_seed(cfg.seed, {static_cast<uint64_t>(gen), kStreamTournament}));
    std::vector<int> winner_idx;
    if (cfg.random_tournaments_and_pool) {
        const int n_w = cfg.winners_per_generation();
        std::vector<int> order(n_p);
        std::iota(order.begin(), order.end(), 0);
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[trng.below(i)]);
        winner_idx.assign(order.begin(), order.begin() + n_w);
    } else {
        winner_idx = tournament_select(candidates, cfg.tournament_size, trng);
    }

    for (int wi : winner_idx)
        update_ancestor_scores(state.pool, state.tree, results[wi].gene.parent_id,
                               results[wi].score, cfg.parental_decay);

    std::vector<std::pair<LearngeneWeights, double>> winner_genes;
    for (int wi : winner_idx)
        winner_genes.push_back({results[wi].gene, results[wi].score});
    std::vector<uint64_t> admitted;
    admit_to_pool(state.pool, state.tree, std::move(winner_genes), cfg.admissions,
                  cfg.pool_capacity, gen, &admitted);

    // Generation record.
    GenerationRecord rec;
    rec["generation"] = gen;
    rec["spec"] = cfg.spec_name;
    rec["task_k"] = k;
    const NetworkSpec count_spec = task_spec;
    rec["individuals"] = nlohmann::ordered_json::array();
    double s_sum = 0, s_min = 1e30, s_max = -1e30, p_sum = 0;
    for (int i = 0; i < n_p; ++i) {
        const auto& r = results[i];
        nlohmann::ordered_json ji;
        ji["gene_id"] = r.gene.gene_id;
        ji["parent_id"] = r.gene.parent_id;
        ji["task_classes"] = r.task.classes;
        ji["train_acc"] = r.train_acc;
        ji["score"] = r.score;
        ji["gene_params"] = r.gene.parameter_count();
        ji["failed"] = r.failed;
        rec["individuals"].push_back(ji);
        s_sum += r.score;
        s_min = std::min(s_min, r.score);
        s_max = std::max(s_max, r.score);
        p_sum += static_cast<double>(r.gene.parameter_count());
    }
    rec["score_mean"] = s_sum / n_p;
    rec["score_min"] = s_min;
    rec["score_max"] = s_max;
    rec["mean_gene_params"] = p_sum / n_p;
    rec["winners"] = nlohmann::ordered_json::array();
    for (int wi : winner_idx)
        rec["winners"].push_back(results[wi].gene.gene_id);
    rec["admitted"] = admitted;
    rec["pool"] = nlohmann::ordered_json::array();
    double pool_sum = 0;
    for (const auto& e : state.pool) {
        nlohmann::ordered_json jp;
        jp["gene_id"] = e.gene.gene_id;
        jp["score"] = e.score;
        jp["params"] = e.gene.parameter_count();
        jp["fraction"] = parameter_fraction(e.gene.structure, count_spec);
        nlohmann::ordered_json sizes = nlohmann::ordered_json::array();
        for (size_t l = 0; l < e.gene.structure.kernels.size(); ++l)
            sizes.push_back({e.gene.structure.kernels[l].size(), e.gene.structure.channels[l].size()});
        jp["layer_sizes"] = sizes;
        jp["generation_admitted"] = e.generation_admitted;
        rec["pool"].push_back(jp);
        pool_sum += e.score;
    }
    rec["pool_score_mean"] = state.pool.empty() ? 0.0 : pool_sum / state.pool.size();

    state.generation += 1;
    return rec;
}

void save_evolution_checkpoint(const EvolutionState& state, const EvolutionConfig& cfg,
                               const World& world, const std::string& path) {
    nlohmann::ordered_json m;
    m["format_version"] = 1;
    m["kind"] = "evolution";
    m["config"] = cfg.to_json();
    m["generation"] = state.generation;
    m["next_gene_id"] = state.next_gene_id;
    m["world"] = {{"train_classes", world.train_classes}, {"val_classes", world.val_classes}};
    m["tree"] = nlohmann::ordered_json::array();
    for (const auto& [id, parent] : state.tree.nodes)
        m["tree"].push_back({id, parent});

    std::vector<const std::vector<float>*> blobs;
    m["pool"] = nlohmann::ordered_json::array();
    size_t offset = 0;
    for (const auto& e : state.pool) {
        nlohmann::ordered_json jp;
        jp["score"] = e.score;
        jp["generation_admitted"] = e.generation_admitted;
        jp["gene"] = gene_meta_to_json(e.gene);
        nlohmann::ordered_json jblobs = nlohmann::ordered_json::array();
        for (const auto& v : e.gene.values) {
            jblobs.push_back({{"offset", offset}, {"count", v.size()}});
            offset += v.size();
            blobs.push_back(&v);
        }
        for (const auto& v : e.gene.skip_values) {
            jblobs.push_back({{"offset", offset}, {"count", v.size()}});
            offset += v.size();
            blobs.push_back(&v);
        }
        jp["blobs"] = jblobs;
        m["pool"].push_back(jp);
    }
    save_container(path, m, blobs);
}

LoadedCheckpoint load_evolution_checkpoint(const std::string& path) {
    Container c = load_container(path);
    const auto& m = c.manifest;
    const int version = m.at("format_version").get<int>();
    if (version != 1)
        throw std::runtime_error(path + ": checkpoint format_version " + std::to_string(version) +
                                 " is not supported (migration refused)");
    if (m.at("kind").get<std::string>() != "evolution")
        throw std::runtime_error(path + ": not an evolution checkpoint");

    LoadedCheckpoint out;
    out.cfg = EvolutionConfig::from_json(m.at("config"));
    out.state.generation = m.at("generation").get<int>();
    out.state.next_gene_id = m.at("next_gene_id").get<uint64_t>();
    out.world.train_classes = m.at("world").at("train_classes").get<std::vector<int>>();
    out.world.val_classes = m.at("world").at("val_classes").get<std::vector<int>>();
    for (const auto& n : m.at("tree"))
        out.state.tree.add_node(n.at(0).get<uint64_t>(), n.at(1).get<int64_t>());

    for (const auto& jp : m.at("pool")) {
        GenePoolEntry e;
        e.score = jp.at("score").get<double>();
        e.generation_admitted = jp.at("generation_admitted").get<int>();
        e.gene = gene_meta_from_json(jp.at("gene"));
        size_t bi = 0;
        const auto& jblobs = jp.at("blobs");
        auto slice = [&](std::vector<float>& dst) {
            const auto& jb = jblobs.at(bi++);
            const size_t off = jb.at("offset").get<size_t>();
            const size_t count = jb.at("count").get<size_t>();
            if (off + count > c.blob.size())
                throw std::runtime_error(path + ": blob slice out of range");
            dst.assign(c.blob.begin() + off, c.blob.begin() + off + count);
        };
        for (auto& v : e.gene.values)
            slice(v);
        for (auto& v : e.gene.skip_values)
            slice(v);
        out.state.pool.push_back(std::move(e));
    }
    return out;
}

namespace {

// The w/o-evolution baseline: one network trained on the whole training
// world, gene extracted with the best available structure.
EvolveResult run_no_evolution(const RunConfig& rcfg, const ImageDataset& ds, const World& world,
                              const ClassSplit& split,
                              const std::optional<std::string>& resume_path) {
    const EvolutionConfig& cfg = rcfg.evo;
    NetworkSpec spec = builtin_spec(cfg.spec_name);
    spec.head_classes = static_cast<int>(world.train_classes.size());

    LearngeneStructure structure;
    if (resume_path) {
        LoadedCheckpoint prev = load_evolution_checkpoint(*resume_path);
        const GenePoolEntry* best = nullptr;
        for (const auto& e : prev.state.pool)
            if (!best || e.score > best->score)
                best = &e;
        if (!best)
            throw std::runtime_error("resume checkpoint has an empty pool");
        structure = best->gene.structure;
    } else {
        Rng srng(derive_seed(cfg.seed, {kStreamInitStructure}));
        structure = init_random_structure(spec, cfg.init_fraction, srng);
    }

    Rng arng(derive_seed(cfg.seed, {kStreamAncestor}));
    NetworkWeights net = make_random_weights(spec, arng);
    TrainBudget budget;
    budget.epochs = cfg.ancestor_epochs;
    budget.lr = static_cast<float>(cfg.train_lr);
    budget.batch_size = cfg.train_batch;
    budget.seed = derive_seed(cfg.seed, {kStreamTrain});
    budget.momentum = static_cast<float>(cfg.train_momentum);
    TrainResult tr = train(net, gather_samples(ds, world.train_classes, split.train), budget);

    EvolveResult out;
    out.world = world;
    out.state.next_gene_id = 2;
    LearngeneWeights gene = extract_learngene(net, structure);
    gene.gene_id = 1;
    gene.parent_id = -1;
    const double score = score_learngene(gene, world, ds, split, builtin_spec(cfg.spec_name), cfg,
                                         derive_seed(cfg.seed, {kStreamCritic}));
    out.state.tree.add_node(1, -1);
    GenePoolEntry entry;
    entry.gene = std::move(gene);
    entry.score = score;
    entry.generation_admitted = 0;
    out.state.pool.push_back(std::move(entry));
    out.state.generation = 1;

    GenerationRecord rec;
    rec["generation"] = 0;
    rec["mode"] = "no_evolution";
    rec["train_acc"] = tr.train_accuracy;
    rec["score"] = score;
    rec["gene_params"] = out.state.pool[0].gene.parameter_count();
    NetworkSpec frac_spec = builtin_spec(cfg.spec_name);
    rec["fraction"] = parameter_fraction(out.state.pool[0].gene.structure, frac_spec);
    out.records.push_back(rec);
    return out;
}

void append_records(const std::string& dir, const std::vector<GenerationRecord>& records,
                    int from_generation) {
    std::filesystem::create_directories(dir);
    const std::string path = dir + "/generations.ndjson";

    // On resume, keep only the records before the resumed generation so the
    // final log matches an uninterrupted run line for line.
    std::vector<std::string> keep;
    if (from_generation > 0 && std::filesystem::exists(path)) {
        std::ifstream in(path);
        std::string line;
        while (std::getline(in, line) && static_cast<int>(keep.size()) < from_generation)
            keep.push_back(line);
    }
    std::ostringstream text;
    for (const auto& l : keep)
        text << l << "\n";
    for (const auto& r : records)
        text << r.dump() << "\n";
    atomic_write_text(path, text.str());
}

}  // namespace

EvolveResult evolve(const RunConfig& rcfg, const ImageDataset& raw_ds,
                    const std::optional<std::string>& resume_path) {
    auto errs = rcfg.evo.validate();
    if (!errs.empty())
        throw std::invalid_argument("invalid config: " + errs.front());

    ImageDataset ds =
        rcfg.evo.max_per_class > 0 ? limit_per_class(raw_ds, rcfg.evo.max_per_class) : raw_ds;
    const ClassSplit split = split_classes(ds, rcfg.evo.holdout_fraction, rcfg.evo.seed);

    World world;
    EvolutionState state;
    EvolutionConfig cfg = rcfg.evo;
    if (resume_path && !cfg.no_evolution) {
        LoadedCheckpoint prev = load_evolution_checkpoint(*resume_path);
        state = std::move(prev.state);
        world = std::move(prev.world);
        cfg = prev.cfg;
        cfg.generations = rcfg.evo.generations;  // allow extending a finished run
    } else {
        world = partition_world(ds, cfg.train_classes, cfg.val_classes, cfg.seed);
        state.next_gene_id = 1;
    }

    if (cfg.no_evolution) {
        EvolveResult out = run_no_evolution(rcfg, ds, world, split, resume_path);
        append_records(rcfg.out_dir, out.records, 0);
        save_evolution_checkpoint(out.state, cfg, out.world, rcfg.out_dir + "/checkpoint.lgck");
        return out;
    }

    EvolveResult out;
    const int first_generation = state.generation;
    while (state.generation < cfg.generations) {
        GenerationRecord rec = run_generation(state, cfg, ds, world, split);
        out.records.push_back(std::move(rec));
        append_records(rcfg.out_dir, out.records, first_generation);
        save_evolution_checkpoint(state, cfg, world, rcfg.out_dir + "/checkpoint.lgck");
    }
    out.state = std::move(state);
    out.world = std::move(world);
    return out;
}

}  // namespace lg
