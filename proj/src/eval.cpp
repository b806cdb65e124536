#include "zico/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <unordered_set>

#include "json.hpp"
#include "zico/errors.hpp"
#include "zico/numerics.hpp"
#include "zico/proxies.hpp"
#include "zico/rng.hpp"
#include "zico/util.hpp"

namespace zico {

namespace {

double now_seconds() {
    const auto t = std::chrono::steady_clock::now().time_since_epoch();
    return std::chrono::duration<double>(t).count();
}

// Top-1 accuracy over the test split; nullopt when a logit goes non-finite.
std::optional<double> eval_accuracy(const Network& net, const Dataset& test) {
    const int chunk = 256;
    int correct = 0;
    for (int start = 0; start < test.M; start += chunk) {
        const int count = std::min(chunk, test.M - start);
        std::vector<double> inputs(test.samples.begin() + size_t(start) * size_t(test.d),
                                   test.samples.begin() + size_t(start + count) * size_t(test.d));
        Graph g;
        const Tensor logits = net.forward(g, inputs, count);
        const std::vector<double>& v = logits.val();
        const int classes = int(v.size()) / count;
        for (int i = 0; i < count; ++i) {
            int arg = 0;
            for (int k = 0; k < classes; ++k) {
                const double z = v[size_t(i) * classes + k];
                if (!std::isfinite(z)) return std::nullopt;
                if (z > v[size_t(i) * classes + arg]) arg = k;
            }
            if (arg == test.labels[start + i]) ++correct;
        }
    }
    return double(correct) / double(test.M);
}

}  // namespace

TrainOutcome train_candidate(const SpaceConfig& space, const Genome& genome,
                             const Dataset& train, const Dataset& test,
                             const TrainConfig& cfg) {
    if (cfg.epochs < 1) throw validation_error("train_candidate: epochs must be at least 1");
    if (!(cfg.lr > 0.0)) throw validation_error("train_candidate: learning rate must be positive");
    if (cfg.batch_size < 1)
        throw validation_error("train_candidate: batch_size must be positive");
    if (train.labels.size() != size_t(train.M) || test.labels.size() != size_t(test.M))
        throw validation_error("train_candidate: classification labels required on both splits");

    const double started = now_seconds();
    TrainOutcome out;
    const Network net = instantiate_network(space, genome, derive_seed(cfg.seed, "init"));

    std::vector<std::vector<double>> velocity(net.params.items.size());
    for (size_t p = 0; p < net.params.items.size(); ++p)
        velocity[p].assign(net.params.items[p]->value.size(), 0.0);

    const int steps_per_epoch = (train.M + cfg.batch_size - 1) / cfg.batch_size;
    const int total_steps = cfg.epochs * steps_per_epoch;
    int step = 0;
    for (int epoch = 0; epoch < cfg.epochs && !out.diverged; ++epoch) {
        const auto batches = batch_iter(train, cfg.batch_size, derive_seed(cfg.seed, uint64_t(epoch)));
        for (const Batch& b : batches) {
            net.params.zero_grad();
            Graph g;
            const Tensor logits = net.forward(g, b.inputs, b.size);
            const Tensor loss = g.cross_entropy(logits, b.labels);
            if (!std::isfinite(loss.scalar())) {
                out.diverged = true;
                break;
            }
            g.backward(loss);
            const double lr =
                cfg.cosine
                    ? cfg.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * double(step) / double(total_steps)))
                    : cfg.lr;
            for (size_t p = 0; p < net.params.items.size(); ++p) {
                const auto& par = net.params.items[p];
                if (!par->trainable) continue;
                std::vector<double>& vel = velocity[p];
                for (size_t k = 0; k < par->value.size(); ++k) {
                    vel[k] = cfg.momentum * vel[k] + par->grad[k] +
                             cfg.weight_decay * par->value[k];
                    par->value[k] -= lr * vel[k];
                }
            }
            ++step;
        }
    }

    if (!out.diverged) {
        const std::optional<double> acc = eval_accuracy(net, test);
        if (acc)
            out.accuracy = *acc;
        else
            out.diverged = true;
    }
    out.train_seconds = now_seconds() - started;
    return out;
}

namespace {

struct BenchData {
    Dataset train, test;
    std::vector<Batch> proxy_batches;
};

BenchData prepare_bench_data(const BenchmarkConfig& cfg, const Dataset& dataset) {
    if (dataset.labels.size() != size_t(dataset.M))
        throw validation_error("run_benchmark: dataset needs classification labels");
    if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0))
        throw validation_error("run_benchmark: test_fraction must lie in (0, 1)");
    BenchData bd;
    const Dataset std_ds = standardize_features(dataset);
    const int test_count = std::max(1, int(std::lround(cfg.test_fraction * dataset.M)));
    const int train_count = dataset.M - test_count;
    if (train_count < 1)
        throw validation_error("run_benchmark: dataset too small to split");
    auto parts = split_dataset(std_ds, train_count, derive_seed(cfg.seed, "split"));
    bd.train = std::move(parts.first);
    bd.test = std::move(parts.second);
    return bd;
}

// Fixed proxy batch set: first n full batches of a seeded shuffle of the
// train split. The same seed is used at every ablation setting so smaller
// configurations are prefixes of larger ones.
std::vector<Batch> proxy_batch_set(const BenchmarkConfig& cfg, const Dataset& train,
                                   int n_batches, int batch_size) {
    if (n_batches < 1 || batch_size < 1)
        throw validation_error("proxy batch set: counts must be positive");
    std::vector<Batch> batches =
        batch_iter(train, batch_size, derive_seed(cfg.seed, "proxy-batches"));
    while (!batches.empty() && batches.back().size < batch_size) batches.pop_back();
    if (int(batches.size()) < n_batches)
        throw validation_error("proxy batch set: train split yields only " +
                               std::to_string(batches.size()) + " full batches of " +
                               std::to_string(batch_size) + ", need " +
                               std::to_string(n_batches));
    batches.resize(n_batches);
    return batches;
}

std::vector<Genome> pick_genomes(const BenchmarkConfig& cfg) {
    if (cfg.sample < 0) throw validation_error("run_benchmark: sample must be nonnegative");
    if (cfg.sample == 0) return enumerate_space(cfg.space);
    std::vector<Genome> out;
    std::unordered_set<uint64_t> seen;
    const int max_attempts = cfg.sample * 1000;
    for (int attempt = 0; attempt < max_attempts && int(out.size()) < cfg.sample; ++attempt) {
        Genome g = genome_random(cfg.space, derive_seed(cfg.seed, uint64_t(attempt)));
        if (seen.insert(genome_digest(g)).second) out.push_back(std::move(g));
    }
    if (int(out.size()) < cfg.sample)
        throw validation_error("run_benchmark: could not draw " + std::to_string(cfg.sample) +
                               " distinct genomes from the space");
    return out;
}

uint64_t benchmark_config_digest(const BenchmarkConfig& cfg) {
    nlohmann::json j;
    j["space"] = {{"kind", cfg.space.kind},
                  {"alphabet", cfg.space.alphabet},
                  {"ladder", cfg.space.ladder},
                  {"stages", cfg.space.stages},
                  {"cells_per_stage", cfg.space.cells_per_stage},
                  {"stage_widths", cfg.space.stage_widths},
                  {"input_channels", cfg.space.input_channels},
                  {"input_size", cfg.space.input_size},
                  {"num_classes", cfg.space.num_classes}};
    j["train"] = {{"epochs", cfg.train.epochs},
                  {"batch_size", cfg.train.batch_size},
                  {"lr", cfg.train.lr},
                  {"cosine", cfg.train.cosine},
                  {"momentum", cfg.train.momentum},
                  {"weight_decay", cfg.train.weight_decay}};
    j["sample"] = cfg.sample;
    j["proxy_batches"] = cfg.proxy_batches;
    j["proxy_batch_size"] = cfg.proxy_batch_size;
    j["test_fraction"] = cfg.test_fraction;
    j["seed"] = cfg.seed;
    j["dataset_tag"] = cfg.dataset_tag;
    return fnv1a64(j.dump());
}

}  // namespace

CorrelationReport correlate_records(const std::vector<BenchmarkRecord>& records,
                                    const std::string& dataset_tag, uint64_t config_digest) {
    CorrelationReport rep;
    rep.n = int(records.size());
    rep.dataset_tag = dataset_tag;
    rep.config_digest = config_digest;
    std::vector<double> acc(records.size());
    for (size_t i = 0; i < records.size(); ++i) acc[i] = records[i].accuracy;
    for (const std::string& name : proxy_names()) {
        std::vector<double> xs(records.size());
        for (size_t i = 0; i < records.size(); ++i) xs[i] = records[i].proxies.at(name);
        rep.rows.push_back({name, kendall_tau(xs, acc), spearman_rho(xs, acc)});
    }
    return rep;
}

BenchmarkResult run_benchmark(const BenchmarkConfig& cfg, const Dataset& dataset, int jobs) {
    const std::vector<Genome> genomes = pick_genomes(cfg);
    if (genomes.size() > 100000)
        throw validation_error("run_benchmark: space too large to enumerate, pass a sample size");
    const BenchData bd = prepare_bench_data(cfg, dataset);
    const std::vector<Batch> batches =
        proxy_batch_set(cfg, bd.train, cfg.proxy_batches, cfg.proxy_batch_size);

    BenchmarkResult res;
    res.records.resize(genomes.size());
    parallel_for(int(genomes.size()), jobs, [&](int i) {
        const Genome& g = genomes[i];
        BenchmarkRecord r;
        r.genome = g;
        r.seed = derive_seed(cfg.seed, genome_digest(g));
        const uint64_t init_seed = derive_seed(r.seed, "init");
        for (const std::string& name : proxy_names())
            r.proxies[name] =
                score_proxy(name, cfg.space, g, batches, LossKind::classification, init_seed);
        TrainConfig tc = cfg.train;
        tc.seed = derive_seed(r.seed, "train");
        const TrainOutcome out = train_candidate(cfg.space, g, bd.train, bd.test, tc);
        r.accuracy = out.accuracy;
        r.diverged = out.diverged;
        r.train_seconds = out.train_seconds;
        res.records[int(i)] = std::move(r);
    });
    res.report = correlate_records(res.records, cfg.dataset_tag, benchmark_config_digest(cfg));
    return res;
}

namespace {

std::vector<AblationRow> ablation_sweep(const BenchmarkConfig& cfg, const Dataset& dataset,
                                        const std::vector<BenchmarkRecord>& records,
                                        const std::vector<int>& batch_counts,
                                        const std::vector<int>& batch_sizes, int default_value,
                                        bool sweep_counts, int jobs) {
    if (records.size() < 2)
        throw validation_error("ablation: need at least two benchmark records");
    const BenchData bd = prepare_bench_data(cfg, dataset);
    std::vector<double> acc(records.size());
    for (size_t i = 0; i < records.size(); ++i) acc[i] = records[i].accuracy;

    const int settings = int(sweep_counts ? batch_counts.size() : batch_sizes.size());
    std::vector<AblationRow> rows(settings);
    for (int si = 0; si < settings; ++si) {
        const int n = sweep_counts ? batch_counts[si] : batch_counts[0];
        const int bs = sweep_counts ? batch_sizes[0] : batch_sizes[si];
        const std::vector<Batch> batches = proxy_batch_set(cfg, bd.train, n, bs);
        std::vector<double> xs(records.size());
        parallel_for(int(records.size()), jobs, [&](int i) {
            const uint64_t init_seed = derive_seed(records[i].seed, "init");
            xs[i] = score_proxy("zico", cfg.space, records[i].genome, batches,
                                LossKind::classification, init_seed);
        });
        rows[si] = {sweep_counts ? n : bs, kendall_tau(xs, acc),
                    (sweep_counts ? n : bs) == default_value};
    }
    return rows;
}

}  // namespace

std::vector<AblationRow> run_ablation_batches(const BenchmarkConfig& cfg, const Dataset& dataset,
                                              const std::vector<BenchmarkRecord>& records,
                                              int min_n, int max_n, int jobs) {
    if (min_n < 2)
        throw validation_error("run_ablation_batches: at least two batches are required");
    if (max_n < min_n) throw validation_error("run_ablation_batches: empty batch-count range");
    std::vector<int> counts;
    for (int n = min_n; n <= max_n; ++n) counts.push_back(n);
    return ablation_sweep(cfg, dataset, records, counts, {cfg.proxy_batch_size}, 2, true, jobs);
}

std::vector<AblationRow> run_ablation_batchsize(const BenchmarkConfig& cfg,
                                                const Dataset& dataset,
                                                const std::vector<BenchmarkRecord>& records,
                                                const std::vector<int>& sizes, int jobs) {
    if (sizes.empty()) throw validation_error("run_ablation_batchsize: no sizes given");
    for (const int s : sizes)
        if (s < 1)
            throw validation_error("run_ablation_batchsize: batch size must be positive");
    return ablation_sweep(cfg, dataset, records, {cfg.proxy_batches}, sizes, 128, false, jobs);
}

namespace {

std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (const char c : s) {
        out += c;
        if (c == '"') out += '"';
    }
    out += '"';
    return out;
}

// Splits one CSV line honoring double-quoted fields with "" escapes.
std::vector<std::string> csv_split(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

constexpr const char* kCsvHeader =
    "genome,params,flops,zico,zico_mean_only,zico_std_only,grad_norm,snip,synflow,"
    "accuracy,seed";

constexpr const char* kCsvProxyOrder[] = {"params",    "flops", "zico",   "zico_mean_only",
                                          "zico_std_only", "grad_norm", "snip", "synflow"};

}  // namespace

void emit_csv(const std::vector<BenchmarkRecord>& records, const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw io_error("emit_csv: cannot open " + path);
    std::fputs(kCsvHeader, f);
    std::fputc('\n', f);
    for (const auto& r : records) {
        std::string line = csv_quote(genome_serialize(r.genome));
        for (const char* name : kCsvProxyOrder) line += "," + fmt_g17(r.proxies.at(name));
        line += "," + fmt_g17(r.accuracy);
        line += "," + std::to_string(r.seed);
        line += "\n";
        std::fputs(line.c_str(), f);
    }
    std::fclose(f);
}

std::vector<BenchmarkRecord> parse_benchmark_csv(const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw io_error("parse_benchmark_csv: cannot open " + path);
    std::string text;
    char buf[4096];
    size_t got;
    while ((got = std::fread(buf, 1, sizeof(buf), f)) > 0) text.append(buf, got);
    std::fclose(f);

    std::vector<BenchmarkRecord> records;
    size_t pos = 0;
    bool first = true;
    while (pos < text.size()) {
        size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        const std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        if (line.empty()) continue;
        if (first) {
            if (line != kCsvHeader)
                throw parse_error("parse_benchmark_csv: unexpected header in " + path);
            first = false;
            continue;
        }
        const std::vector<std::string> fields = csv_split(line);
        if (fields.size() != 11)
            throw parse_error("parse_benchmark_csv: expected 11 fields, got " +
                              std::to_string(fields.size()));
        BenchmarkRecord r;
        r.genome = genome_parse(fields[0]);
        for (size_t k = 0; k < 8; ++k) r.proxies[kCsvProxyOrder[k]] = std::strtod(fields[k + 1].c_str(), nullptr);
        r.accuracy = std::strtod(fields[9].c_str(), nullptr);
        r.seed = std::strtoull(fields[10].c_str(), nullptr, 10);
        records.push_back(std::move(r));
    }
    if (first) throw parse_error("parse_benchmark_csv: empty file " + path);
    return records;
}

}  // namespace zico
