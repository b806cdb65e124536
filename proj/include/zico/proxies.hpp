#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "zico/dataset.hpp"
#include "zico/space.hpp"

namespace zico {

// Classification uses cross-entropy on the integer labels; regression uses
// squared error against the one-hot encoding of those labels, which keeps
// the loss defined for any classifier head width.
enum class LossKind { classification, regression };

LossKind loss_kind_from_name(const std::string& name);

// Per-parameter gradient statistics across a fixed batch set: for every
// trainable scalar, the mean and population standard deviation (divisor N)
// of |grad| over the N batches. Parameters are never updated.
struct GradStats {
    int batches = 0;
    struct Entry {
        std::string name;
        int layer = 0;
        std::vector<double> mean_abs;
        std::vector<double> std_abs;

        bool operator==(const Entry&) const = default;
    };
    std::vector<Entry> entries;

    bool operator==(const GradStats&) const = default;
};

GradStats collect_grad_stats(const Network& net, const std::vector<Batch>& batches,
                             LossKind kind);

constexpr double kZicoStdClamp = 1e-8;
constexpr double kZicoLogClamp = 1e-12;

// Layerwise log-sum of per-scalar terms. zico uses mean/std (the inverse
// coefficient of variation), the ablation variants keep only one factor.
// Inner sums are clamped below by kZicoLogClamp before the log, so all
// three are total functions.
double zico(const GradStats& stats);
double zico_mean_only(const GradStats& stats);
double zico_std_only(const GradStats& stats);

// Single-batch baselines. grad_norm is the Euclidean norm of the
// concatenated parameter gradient; snip is sum |param * grad|.
double grad_norm(const Network& net, const Batch& batch, LossKind kind);
double snip(const Network& net, const Batch& batch, LossKind kind);

// Data-free baseline: parameters are replaced by their absolute values, an
// all-ones input is fed through, and the score is sum grad * |param| of the
// summed output. Original parameter values are restored before returning.
double synflow(const Network& net);

// Canonical proxy order used by reports.
const std::vector<std::string>& proxy_names();

// Deterministic synthetic batch set shaped to the space's input geometry,
// for gradient-based proxy scoring when no external dataset is supplied.
std::vector<Batch> make_proxy_batches(const SpaceConfig& cfg, int n_batches, int batch_size,
                                      uint64_t seed);

// Scores one candidate under a named proxy. Batch-based proxies use the
// given fixed batch set (the first batch for grad_norm/snip); params and
// flops delegate to the spec counters without instantiating. init_seed
// seeds the candidate's parameter initialization.
double score_proxy(const std::string& name, const SpaceConfig& cfg, const Genome& g,
                   const std::vector<Batch>& batches, LossKind kind, uint64_t init_seed);

} // namespace zico
