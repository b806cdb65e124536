#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "zico/dataset.hpp"
#include "zico/space.hpp"

namespace zico {

struct TrainConfig {
    int epochs = 3;
    int batch_size = 32;
    double lr = 0.05;
    bool cosine = true;  // per-step cosine decay to zero; false = constant
    double momentum = 0.9;
    double weight_decay = 0.0;
    uint64_t seed = 0;
};

struct TrainOutcome {
    double accuracy = 0.0;  // held-out top-1, 0 when training diverged
    bool diverged = false;
    double train_seconds = 0.0;
};

// SGD with momentum on cross-entropy. A non-finite loss ends the run with
// accuracy 0 and the divergence flag instead of an exception so benchmark
// sweeps stay total.
TrainOutcome train_candidate(const SpaceConfig& space, const Genome& genome,
                             const Dataset& train, const Dataset& test,
                             const TrainConfig& cfg);

struct BenchmarkRecord {
    Genome genome;
    std::map<std::string, double> proxies;  // every canonical proxy
    double accuracy = 0.0;
    bool diverged = false;
    double train_seconds = 0.0;
    uint64_t seed = 0;  // per-candidate seed all its randomness derives from
};

struct ProxyCorrelation {
    std::string proxy;
    std::optional<double> tau;  // absent when a proxy is constant over the sample
    std::optional<double> rho;
};

struct CorrelationReport {
    std::vector<ProxyCorrelation> rows;  // canonical proxy order
    int n = 0;
    std::string dataset_tag;
    uint64_t config_digest = 0;
};

struct BenchmarkConfig {
    SpaceConfig space;
    TrainConfig train;
    int sample = 0;            // 0 = enumerate the whole space
    int proxy_batches = 2;     // batch count for gradient-statistics scoring
    int proxy_batch_size = 32;
    double test_fraction = 0.2;
    uint64_t seed = 0;
    std::string dataset_tag = "synthetic";
};

struct BenchmarkResult {
    std::vector<BenchmarkRecord> records;
    CorrelationReport report;
};

// Scores every proxy at initialization and then trains each candidate to its
// ground-truth accuracy. Candidates run on up to `jobs` threads; each one is
// seeded independently so the result is identical for any job count.
BenchmarkResult run_benchmark(const BenchmarkConfig& cfg, const Dataset& dataset, int jobs);

CorrelationReport correlate_records(const std::vector<BenchmarkRecord>& records,
                                    const std::string& dataset_tag, uint64_t config_digest);

struct AblationRow {
    int value = 0;  // batch count or batch size
    std::optional<double> tau;
    bool is_default = false;
};

// Rank correlation of the gradient-statistics score against the recorded
// accuracies when the score is recomputed with n = min_n..max_n batches.
std::vector<AblationRow> run_ablation_batches(const BenchmarkConfig& cfg, const Dataset& dataset,
                                              const std::vector<BenchmarkRecord>& records,
                                              int min_n, int max_n, int jobs);

// Same sweep over per-batch sample counts.
std::vector<AblationRow> run_ablation_batchsize(const BenchmarkConfig& cfg,
                                                const Dataset& dataset,
                                                const std::vector<BenchmarkRecord>& records,
                                                const std::vector<int>& sizes, int jobs);

// Fixed column order: genome, params, flops, zico, zico_mean_only,
// zico_std_only, grad_norm, snip, synflow, accuracy, seed. 17 significant
// digits so parse(emit(x)) == x.
void emit_csv(const std::vector<BenchmarkRecord>& records, const std::string& path);
std::vector<BenchmarkRecord> parse_benchmark_csv(const std::string& path);

}  // namespace zico
