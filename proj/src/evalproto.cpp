#include "lg/evalproto.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "lg/engine.hpp"
#include "lg/inheritance.hpp"

namespace lg {

namespace {

NetworkWeights init_network(const LearngeneWeights* gene, const NetworkSpec& target,
                            uint64_t seed) {
    Rng rng(derive_seed(seed, {kStreamInherit}));
    if (gene)
        return inherit(*gene, target, rng);
    return make_random_weights(target, rng);
}

// SGD over shuffled epochs with holdout evaluation at listed iteration
// counts. An iteration is one optimizer update.
std::vector<double> train_with_probes(NetworkWeights& w, const Samples& train_set,
                                      const Samples& holdout, const std::vector<int>& iterations,
                                      const FineTuneBudget& budget, uint64_t seed) {
    std::vector<double> acc;
    SgdOpts opts{static_cast<float>(budget.lr), 0.0f};
    SgdState state;
    Rng rng(derive_seed(seed, {kStreamTrain}));
    std::vector<int> order(train_set.count());
    std::iota(order.begin(), order.end(), 0);

    size_t next_probe = 0;
    int iter = 0;
    const int max_iter = iterations.empty() ? 0 : iterations.back();
    while (next_probe < iterations.size() && iterations[next_probe] <= iter) {
        acc.push_back(evaluate(w, holdout));
        ++next_probe;
    }
    while (iter < max_iter) {
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.below(i)]);
        for (size_t first = 0; first < order.size() && iter < max_iter;
             first += static_cast<size_t>(budget.batch)) {
            const size_t count =
                std::min(static_cast<size_t>(budget.batch), order.size() - first);
            Batch b = make_batch(train_set, order, first, count);
            train_step(w, b, opts, &state);
            ++iter;
            while (next_probe < iterations.size() && iterations[next_probe] == iter) {
                acc.push_back(evaluate(w, holdout));
                ++next_probe;
            }
        }
    }
    return acc;
}

void mean_std(const std::vector<std::vector<double>>& table, std::vector<double>& mean,
              std::vector<double>& stdev) {
    if (table.empty())
        return;
    const size_t cols = table[0].size();
    mean.assign(cols, 0.0);
    stdev.assign(cols, 0.0);
    for (const auto& row : table)
        for (size_t c = 0; c < cols; ++c)
            mean[c] += row[c];
    for (size_t c = 0; c < cols; ++c)
        mean[c] /= table.size();
    for (const auto& row : table)
        for (size_t c = 0; c < cols; ++c)
            stdev[c] += (row[c] - mean[c]) * (row[c] - mean[c]);
    for (size_t c = 0; c < cols; ++c)
        stdev[c] = table.size() > 1 ? std::sqrt(stdev[c] / (table.size() - 1)) : 0.0;
}

}  // namespace

FineTuneOutcome finetune_eval(const LearngeneWeights* gene, const NetworkSpec& target,
                              const ImageDataset& ds, const ClassSplit& split,
                              const std::vector<int>& classes, const FineTuneBudget& budget,
                              uint64_t seed) {
    if (classes.empty())
        throw std::invalid_argument("finetune_eval: no classes given");
    NetworkSpec spec = target;
    spec.head_classes = static_cast<int>(classes.size());
    NetworkWeights w = init_network(gene, spec, seed);

    Samples train_set = gather_samples(ds, classes, split.train);
    TrainBudget tb;
    tb.epochs = budget.epochs;
    tb.lr = static_cast<float>(budget.lr);
    tb.batch_size = budget.batch;
    tb.seed = derive_seed(seed, {kStreamTrain});
    TrainResult tr = train(w, train_set, tb);

    FineTuneOutcome out;
    out.train_accuracy = tr.train_accuracy;
    out.holdout_accuracy = evaluate(w, gather_samples(ds, classes, split.holdout));
    return out;
}

ProbeResult probe_instinct(const LearngeneWeights& gene, const NetworkSpec& target,
                           const ImageDataset& ds, const ClassSplit& split,
                           const std::vector<int>& novelty_classes,
                           const std::vector<int>& iterations, int seeds,
                           const FineTuneBudget& budget, uint64_t master_seed) {
    if (novelty_classes.empty())
        throw std::invalid_argument("probe_instinct: empty novelty split");
    if (!std::is_sorted(iterations.begin(), iterations.end()))
        throw std::invalid_argument("probe_instinct: iterations must be sorted ascending");

    NetworkSpec spec = target;
    spec.head_classes = static_cast<int>(novelty_classes.size());
    Samples train_set = gather_samples(ds, novelty_classes, split.train);
    Samples holdout = gather_samples(ds, novelty_classes, split.holdout);

    ProbeResult res;
    res.iterations = iterations;
    for (int s = 0; s < seeds; ++s) {
        const uint64_t seed = derive_seed(master_seed, {kStreamEval, static_cast<uint64_t>(s)});
        NetworkWeights gw = init_network(&gene, spec, seed);
        res.gene_acc.push_back(train_with_probes(gw, train_set, holdout, iterations, budget, seed));
        NetworkWeights rw = init_network(nullptr, spec, seed);
        res.random_acc.push_back(
            train_with_probes(rw, train_set, holdout, iterations, budget, seed));
    }
    mean_std(res.gene_acc, res.gene_mean, res.gene_std);
    mean_std(res.random_acc, res.random_mean, res.random_std);
    return res;
}

EpisodicResult episodic_eval(const LearngeneWeights& gene, const NetworkSpec& target,
                             const ImageDataset& ds, const std::vector<int>& novelty_classes,
                             int n_way, int k_shot, int query_per_class, int episodes,
                             const FineTuneBudget& budget, uint64_t master_seed) {
    if (static_cast<int>(novelty_classes.size()) < n_way)
        throw std::invalid_argument("episodic_eval: need at least n_way novelty classes");
    auto by_class = ds.index_by_class();
    EpisodicResult res;

    NetworkSpec spec = target;
    spec.head_classes = n_way;

    for (int e = 0; e < episodes; ++e) {
        const uint64_t eseed = derive_seed(master_seed, {kStreamEval, static_cast<uint64_t>(e)});
        Rng rng(eseed);

        // n_way distinct classes, then disjoint support/query samples per class.
        std::vector<int> classes = novelty_classes;
        for (int i = 0; i < n_way; ++i) {
            size_t j = i + rng.below(classes.size() - i);
            std::swap(classes[i], classes[j]);
        }
        classes.resize(n_way);

        Samples support, query;
        support.channels = query.channels = ds.channels;
        support.height = query.height = ds.height;
        support.width = query.width = ds.width;
        const size_t rec = ds.pixels_per_record();
        for (int local = 0; local < n_way; ++local) {
            auto idx = by_class[classes[local]];
            if (static_cast<int>(idx.size()) < k_shot + 1)
                throw std::invalid_argument("episodic_eval: class " +
                                            std::to_string(classes[local]) + " has only " +
                                            std::to_string(idx.size()) + " samples, need " +
                                            std::to_string(k_shot + 1));
            for (size_t i = idx.size(); i > 1; --i)
                std::swap(idx[i - 1], idx[rng.below(i)]);
            const int q = std::min(query_per_class, static_cast<int>(idx.size()) - k_shot);
            for (int i = 0; i < k_shot; ++i) {
                support.pixels.insert(support.pixels.end(),
                                      ds.pixels.begin() + static_cast<size_t>(idx[i]) * rec,
                                      ds.pixels.begin() + static_cast<size_t>(idx[i] + 1) * rec);
                support.labels.push_back(local);
            }
            for (int i = k_shot; i < k_shot + q; ++i) {
                query.pixels.insert(query.pixels.end(),
                                    ds.pixels.begin() + static_cast<size_t>(idx[i]) * rec,
                                    ds.pixels.begin() + static_cast<size_t>(idx[i] + 1) * rec);
                query.labels.push_back(local);
            }
        }

        NetworkWeights w = init_network(&gene, spec, eseed);
        TrainBudget tb;
        tb.epochs = budget.epochs;
        tb.lr = static_cast<float>(budget.lr);
        tb.batch_size = budget.batch;
        tb.seed = derive_seed(eseed, {kStreamTrain});
        train(w, support, tb);
        res.per_episode.push_back(evaluate(w, query));
    }

    double sum = 0;
    for (double a : res.per_episode)
        sum += a;
    res.mean = sum / episodes;
    double var = 0;
    for (double a : res.per_episode)
        var += (a - res.mean) * (a - res.mean);
    const double stdev = episodes > 1 ? std::sqrt(var / (episodes - 1)) : 0.0;
    res.ci95 = 1.96 * stdev / std::sqrt(static_cast<double>(episodes));
    return res;
}

}  // namespace lg
