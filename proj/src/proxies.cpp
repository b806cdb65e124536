#include "zico/proxies.hpp"

#include <algorithm>
#include <cmath>

#include "zico/errors.hpp"
#include "zico/rng.hpp"

namespace zico {

LossKind loss_kind_from_name(const std::string& name) {
    if (name == "classification") return LossKind::classification;
    if (name == "regression") return LossKind::regression;
    throw validation_error("unknown loss kind \"" + name + "\"");
}

namespace {

Tensor batch_loss(Graph& g, Tensor logits, const Batch& batch, LossKind kind, int classes) {
    if (batch.labels.empty())
        throw validation_error("proxy loss: batch has no labels");
    if (kind == LossKind::classification) return g.cross_entropy(logits, batch.labels);
    std::vector<double> onehot(size_t(batch.size) * size_t(classes), 0.0);
    for (int i = 0; i < batch.size; ++i) {
        const int lab = batch.labels[size_t(i)];
        if (lab < 0 || lab >= classes)
            throw validation_error("proxy loss: label " + std::to_string(lab) +
                                   " outside the " + std::to_string(classes) + "-class head");
        onehot[size_t(i) * size_t(classes) + size_t(lab)] = 1.0;
    }
    Tensor target = g.input(Shape{batch.size, classes}, std::move(onehot));
    return g.mse_loss(logits, target);
}

// One forward/backward on a fresh graph; gradients land in the ParamSet.
void backward_once(const Network& net, const Batch& batch, LossKind kind, const char* who) {
    net.params.zero_grad();
    Graph g;
    Tensor logits = net.forward(g, batch.inputs, batch.size);
    Tensor loss = batch_loss(g, logits, batch, kind, net.config.num_classes);
    if (!std::isfinite(loss.scalar()))
        throw numeric_error(std::string(who) + ": non-finite loss");
    g.backward(loss);
}

double zico_family(const GradStats& stats, int mode) {
    int max_layer = 0;
    for (const auto& e : stats.entries) max_layer = std::max(max_layer, e.layer);
    std::vector<double> layer_sum(size_t(max_layer) + 1, 0.0);
    for (const auto& e : stats.entries)
        for (size_t i = 0; i < e.mean_abs.size(); ++i) {
            double term = 0.0;
            if (mode == 0) term = e.mean_abs[i] / std::max(e.std_abs[i], kZicoStdClamp);
            if (mode == 1) term = e.mean_abs[i];
            if (mode == 2) term = 1.0 / std::max(e.std_abs[i], kZicoStdClamp);
            layer_sum[size_t(e.layer)] += term;
        }
    double score = 0.0;
    for (int l = 1; l <= max_layer; ++l) score += std::log(std::max(layer_sum[size_t(l)], kZicoLogClamp));
    return score;
}

} // namespace

GradStats collect_grad_stats(const Network& net, const std::vector<Batch>& batches,
                             LossKind kind) {
    if (batches.size() < 2)
        throw validation_error("collect_grad_stats: need at least 2 batches, got " +
                               std::to_string(batches.size()));
    const int N = int(batches.size());

    // |grad| snapshots per batch, one row per trainable scalar in ParamSet
    // order.
    std::vector<std::vector<double>> snaps(static_cast<size_t>(N));
    for (int bi = 0; bi < N; ++bi) {
        net.params.zero_grad();
        Graph g;
        Tensor logits = net.forward(g, batches[size_t(bi)].inputs, batches[size_t(bi)].size);
        Tensor loss = batch_loss(g, logits, batches[size_t(bi)], kind, net.config.num_classes);
        if (!std::isfinite(loss.scalar()))
            throw numeric_error("collect_grad_stats: non-finite loss on batch " +
                                std::to_string(bi));
        g.backward(loss);
        auto& row = snaps[size_t(bi)];
        for (const auto& p : net.params.items) {
            if (!p->trainable) continue;
            for (const double gv : p->grad) {
                if (!std::isfinite(gv))
                    throw numeric_error("collect_grad_stats: non-finite gradient on batch " +
                                        std::to_string(bi));
                row.push_back(std::fabs(gv));
            }
        }
    }

    GradStats stats;
    stats.batches = N;
    size_t offset = 0;
    std::vector<double> vals(static_cast<size_t>(N));
    for (const auto& p : net.params.items) {
        if (!p->trainable) continue;
        GradStats::Entry e;
        e.name = p->name;
        e.layer = p->layer;
        const size_t count = size_t(p->numel());
        e.mean_abs.resize(count);
        e.std_abs.resize(count);
        for (size_t i = 0; i < count; ++i) {
            for (int b = 0; b < N; ++b) vals[size_t(b)] = snaps[size_t(b)][offset + i];
            // Summing in sorted order makes the statistics independent of
            // batch order down to the last bit.
            std::sort(vals.begin(), vals.end());
            double sum = 0.0;
            for (const double v : vals) sum += v;
            const double mean = sum / double(N);
            double sq = 0.0;
            for (const double v : vals) sq += (v - mean) * (v - mean);
            e.mean_abs[i] = mean;
            e.std_abs[i] = std::sqrt(sq / double(N));
        }
        offset += count;
        stats.entries.push_back(std::move(e));
    }
    return stats;
}

double zico(const GradStats& stats) { return zico_family(stats, 0); }
double zico_mean_only(const GradStats& stats) { return zico_family(stats, 1); }
double zico_std_only(const GradStats& stats) { return zico_family(stats, 2); }

double grad_norm(const Network& net, const Batch& batch, LossKind kind) {
    backward_once(net, batch, kind, "grad_norm");
    double sq = 0.0;
    for (const auto& p : net.params.items) {
        if (!p->trainable) continue;
        for (const double gv : p->grad) {
            if (!std::isfinite(gv)) throw numeric_error("grad_norm: non-finite gradient");
            sq += gv * gv;
        }
    }
    return std::sqrt(sq);
}

double snip(const Network& net, const Batch& batch, LossKind kind) {
    backward_once(net, batch, kind, "snip");
    double score = 0.0;
    for (const auto& p : net.params.items) {
        if (!p->trainable) continue;
        for (size_t i = 0; i < p->grad.size(); ++i) {
            if (!std::isfinite(p->grad[i])) throw numeric_error("snip: non-finite gradient");
            score += std::fabs(p->value[i] * p->grad[i]);
        }
    }
    return score;
}

double synflow(const Network& net) {
    std::vector<std::vector<double>> saved;
    saved.reserve(net.params.items.size());
    for (const auto& p : net.params.items) {
        saved.push_back(p->value);
        for (auto& v : p->value) v = std::fabs(v);
    }
    double score = 0.0;
    try {
        net.params.zero_grad();
        Graph g;
        const int d = net.config.input_channels * net.config.input_size * net.config.input_size;
        Tensor logits = net.forward(g, std::vector<double>(size_t(d), 1.0), 1);
        g.backward(g.sum(logits));
        for (const auto& p : net.params.items) {
            if (!p->trainable) continue;
            for (size_t i = 0; i < p->grad.size(); ++i) score += p->grad[i] * p->value[i];
        }
    } catch (...) {
        for (size_t i = 0; i < saved.size(); ++i) net.params.items[i]->value = saved[i];
        throw;
    }
    for (size_t i = 0; i < saved.size(); ++i) net.params.items[i]->value = std::move(saved[i]);
    return score;
}

const std::vector<std::string>& proxy_names() {
    static const std::vector<std::string> names = {"zico",      "zico_mean_only", "zico_std_only",
                                                   "grad_norm", "snip",           "synflow",
                                                   "params",    "flops"};
    return names;
}

std::vector<Batch> make_proxy_batches(const SpaceConfig& cfg, int n_batches, int batch_size,
                                      uint64_t seed) {
    if (n_batches < 1)
        throw validation_error("make_proxy_batches: need at least one batch");
    if (batch_size < 1)
        throw validation_error("make_proxy_batches: batch_size must be positive");
    const int dim = cfg.input_channels * cfg.input_size * cfg.input_size;
    const int need = n_batches * batch_size;
    const int per_class = (need + cfg.num_classes - 1) / cfg.num_classes;
    const Dataset ds =
        synth_clusters(cfg.num_classes, per_class, dim, 1.0, derive_seed(seed, "proxy-data"));
    std::vector<Batch> batches = batch_iter(ds, batch_size, derive_seed(seed, "proxy-batches"));
    batches.resize(n_batches);
    return batches;
}

double score_proxy(const std::string& name, const SpaceConfig& cfg, const Genome& g,
                   const std::vector<Batch>& batches, LossKind kind, uint64_t init_seed) {
    if (name == "params") return double(count_params(build_network_spec(cfg, g)));
    if (name == "flops") return double(count_flops(build_network_spec(cfg, g)));
    if (name == "synflow") return synflow(instantiate_network(cfg, g, init_seed));
    if (name == "grad_norm" || name == "snip") {
        if (batches.empty()) throw validation_error(name + ": needs at least one batch");
        const Network net = instantiate_network(cfg, g, init_seed);
        return name == "snip" ? snip(net, batches[0], kind) : grad_norm(net, batches[0], kind);
    }
    if (name == "zico" || name == "zico_mean_only" || name == "zico_std_only") {
        const Network net = instantiate_network(cfg, g, init_seed);
        const GradStats stats = collect_grad_stats(net, batches, kind);
        if (name == "zico_mean_only") return zico_mean_only(stats);
        if (name == "zico_std_only") return zico_std_only(stats);
        return zico(stats);
    }
    throw validation_error("unknown proxy \"" + name + "\"");
}

} // namespace zico
