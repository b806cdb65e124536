#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "zico/dataset.hpp"
#include "zico/errors.hpp"
#include "zico/eval.hpp"
#include "zico/numerics.hpp"
#include "zico/proxies.hpp"
#include "zico/rng.hpp"
#include "zico/search.hpp"
#include "zico/space.hpp"
#include "zico/theory.hpp"
#include "zico/util.hpp"

namespace {

using namespace zico;

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

SpaceConfig space_by_name(const std::string& name) {
    if (name == "cell") return desk_cell_space();
    if (name == "binary") return desk_binary_space();
    if (name == "width") return desk_width_space();
    throw validation_error("unknown space \"" + name + "\" (expected cell, binary, or width)");
}

std::string out_path(const std::string& dir, const std::string& name) {
    std::filesystem::create_directories(dir);
    return (std::filesystem::path(dir) / name).string();
}

std::string digest_hex(uint64_t digest) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, digest);
    return buf;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return text;
}

std::string opt_g17(const std::optional<double>& v) { return v ? fmt_g17(*v) : "n/a"; }

// The config file mirrors the flags: top-level {seed, out, jobs} plus one
// object per subcommand holding that command's flag names (dashes become
// underscores). Explicit command-line flags win over file values.
class FileConfig {
public:
    void load(const std::string& path) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_text_file(path));
        } catch (const nlohmann::json::exception& e) {
            throw parse_error("config file " + path + ": " + e.what());
        }
        if (!j.is_object()) throw parse_error("config file " + path + ": expected an object");
        root_ = std::move(j);
    }

    template <typename T>
    void top(const char* key, T& value) const {
        fetch(root_, key, value);
    }

    template <typename T>
    void sub(const std::string& section, const char* key, T& value) const {
        if (!root_.contains(section)) return;
        const nlohmann::json& s = root_.at(section);
        if (!s.is_object())
            throw parse_error("config section \"" + section + "\" must be an object");
        fetch(s, key, value);
    }

private:
    template <typename T>
    static void fetch(const nlohmann::json& j, const char* key, T& value) {
        if (!j.contains(key)) return;
        try {
            value = j.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw parse_error(std::string("config key \"") + key + "\" has the wrong type");
        }
    }

    nlohmann::json root_;
};

// ---------------------------------------------------------------------------
// theorems
// ---------------------------------------------------------------------------

struct TheoremFlags {
    std::string which = "all";
    int trials = 0;  // 0 = per-suite default
};

int cmd_theorems(const TheoremFlags& fl, uint64_t seed, const std::string& out) {
    const bool all = fl.which == "all";
    if (!all && fl.which != "1" && fl.which != "2" && fl.which != "4" && fl.which != "lemma1")
        throw validation_error("--which must be one of 1, 2, 4, lemma1, all");
    if (fl.trials < 0) throw validation_error("--trials must be positive");
    bool ok = true;

    if (all || fl.which == "1") {
        LinearBoundConfig bc;
        bc.seed = derive_seed(seed, "linear-bound");
        if (fl.trials) bc.trials = fl.trials;
        const auto bound = run_linear_bound_population(bc);
        int ok5 = 0;
        for (const auto& r : bound) ok5 += eq5_holds(r.trial) ? 1 : 0;
        std::printf("eq5 satisfied: %d/%zu\n", ok5, bound.size());
        ok = ok && ok5 == int(bound.size());

        LinearTrendConfig tc;
        tc.seed = derive_seed(seed, "linear-trend");
        if (fl.trials) tc.trials = fl.trials;
        const auto trend = run_linear_trend_population(tc);
        int ok6 = 0;
        std::vector<double> mu2, sig2, loss;
        for (const auto& r : trend) {
            ok6 += eq6_holds(r.trial) ? 1 : 0;
            mu2.push_back(r.trial.sum_mu2);
            sig2.push_back(r.trial.sum_sigma2);
            loss.push_back(r.trial.loss_after);
        }
        std::printf("eq6 satisfied: %d/%zu\n", ok6, trend.size());
        const auto rho_mu = spearman_rho(mu2, loss);
        const auto rho_sig = spearman_rho(sig2, loss);
        std::printf("trend rho(sum mu^2, loss_after) = %s\n", opt_g17(rho_mu).c_str());
        std::printf("trend rho(sum sigma^2, loss_after) = %s\n", opt_g17(rho_sig).c_str());
        ok = ok && ok6 == int(trend.size());
        ok = ok && rho_mu && *rho_mu <= -0.3 && rho_sig && *rho_sig >= 0.3;
        if (!out.empty()) {
            write_linear_csv(out_path(out, "linear_bound.csv"), bound);
            write_linear_csv(out_path(out, "linear_trend.csv"), trend);
        }
    }

    if (all || fl.which == "2") {
        GramBoundConfig gc;
        gc.seed = derive_seed(seed, "gram-bound");
        if (fl.trials) gc.trials = fl.trials;
        const auto rows = run_gram_bound_population(gc);
        int disp = 0, lmin = 0, lmax = 0;
        for (const auto& r : rows) {
            disp += r.report.disp_ok ? 1 : 0;
            lmin += r.report.lambda_min_ok ? 1 : 0;
            lmax += r.report.lambda_max_ok ? 1 : 0;
        }
        const double n = double(rows.size());
        const double floor = (1.0 - gc.delta) * (1.0 - gc.epsilon);
        std::printf("gram displacement within radius: %d/%zu\n", disp, rows.size());
        std::printf("gram lambda_min within bound: %d/%zu\n", lmin, rows.size());
        std::printf("gram lambda_max within bound: %d/%zu\n", lmax, rows.size());
        std::printf("required fraction: %s\n", fmt_g17(floor).c_str());
        ok = ok && disp >= floor * n && lmin >= floor * n && lmax >= floor * n;
        if (!out.empty()) write_gram_csv(out_path(out, "gram_bound.csv"), rows);
    }

    if (all || fl.which == "4") {
        ReluCorrConfig cc;
        cc.seed = derive_seed(seed, "relu-corr");
        if (fl.trials) cc.trials = fl.trials;
        const auto rows = run_relu_correlation_population(cc);
        std::vector<double> sig, tr, te;
        for (const auto& r : rows) {
            sig.push_back(r.sigma);
            tr.push_back(r.train_loss);
            te.push_back(r.test_loss);
        }
        const auto rho_tr = spearman_rho(sig, tr);
        const auto rho_te = spearman_rho(sig, te);
        std::printf("relu rho(sigma, train_loss) = %s\n", opt_g17(rho_tr).c_str());
        std::printf("relu rho(sigma, test_loss) = %s\n", opt_g17(rho_te).c_str());
        ok = ok && rho_tr && *rho_tr > 0.3 && rho_te && *rho_te > 0.3;
        if (!out.empty()) write_relu_corr_csv(out_path(out, "relu_corr.csv"), rows);
    }

    if (all || fl.which == "lemma1") {
        Lemma1Config lc;
        lc.seed = derive_seed(seed, "lemma1");
        if (fl.trials) lc.runs = fl.trials;
        const auto rows = run_lemma1_population(lc);
        int steps = 0, sat = 0, composed = 0;
        for (const auto& r : rows) {
            steps += r.report.steps;
            sat += r.report.satisfied;
            composed += r.report.composed ? 1 : 0;
        }
        // Informative only: the factor-decay regime needs widths far beyond
        // desk scale, so this never gates the exit code.
        std::printf("decay per-step satisfied: %d/%d (informative)\n", sat, steps);
        std::printf("decay composed satisfied: %d/%zu (informative)\n", composed, rows.size());
        if (!out.empty()) write_lemma1_csv(out_path(out, "lemma1.csv"), rows);
    }

    return ok ? 0 : 1;
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

struct ScoreFlags {
    std::string genome_path;
    std::string proxy = "zico";
    std::string space;  // empty = infer from the genome tag
    std::string data = "synth";
    int batches = 2;
    int batch_size = 128;
};

int cmd_score(const ScoreFlags& fl, uint64_t seed) {
    if (fl.genome_path.empty()) throw validation_error("--genome is required");
    const Genome g = genome_parse(read_text_file(fl.genome_path));
    SpaceConfig sc = space_by_name(fl.space.empty() ? g.space : fl.space);
    validate_genome(sc, g);

    std::vector<Batch> batches;
    const bool needs_data =
        fl.proxy != "params" && fl.proxy != "flops" && fl.proxy != "synflow";
    if (needs_data) {
        if (fl.data == "synth") {
            batches = make_proxy_batches(sc, fl.batches, fl.batch_size, derive_seed(seed, "score"));
        } else if (fl.data.rfind("idx:", 0) == 0) {
            const std::string spec = fl.data.substr(4);
            const size_t comma = spec.find(',');
            if (comma == std::string::npos)
                throw validation_error("--data idx: expects idx:IMAGES,LABELS");
            const Dataset ds = load_idx(spec.substr(0, comma), spec.substr(comma + 1));
            if (ds.height != ds.width)
                throw validation_error("--data: only square images are supported");
            sc.input_channels = ds.channels;
            sc.input_size = ds.height;
            sc.num_classes = ds.num_classes;
            std::vector<Batch> all =
                batch_iter(ds, fl.batch_size, derive_seed(seed, "score"));
            while (!all.empty() && all.back().size < fl.batch_size) all.pop_back();
            if (int(all.size()) < fl.batches)
                throw validation_error("--data: dataset yields fewer full batches than --batches");
            all.resize(fl.batches);
            batches = std::move(all);
        } else {
            throw validation_error("--data must be \"synth\" or \"idx:IMAGES,LABELS\"");
        }
    }

    const uint64_t digest = genome_digest(g);
    const double value = score_proxy(fl.proxy, sc, g, batches, LossKind::classification,
                                     derive_seed(seed, digest));
    nlohmann::json j;
    j["genome_digest"] = digest_hex(digest);
    j["proxy"] = fl.proxy;
    j["seed"] = seed;
    j["value"] = value;
    std::printf("%s\n", j.dump().c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// search
// ---------------------------------------------------------------------------

struct SearchFlags {
    std::string space = "cell";
    std::string proxy = "zico";
    int64_t budget = 0;
    int steps = 1000;
    int population = 8;
    int batches = 2;
    int batch_size = 32;
};

int cmd_search(const SearchFlags& fl, uint64_t seed, const std::string& out) {
    SearchConfig cfg;
    cfg.space = space_by_name(fl.space);
    cfg.proxy = fl.proxy;
    cfg.budget = fl.budget;
    cfg.steps = fl.steps;
    cfg.population_cap = fl.population;
    cfg.n_batches = fl.batches;
    cfg.batch_size = fl.batch_size;
    cfg.seed = seed;
    const SearchResult res = evolve(cfg);
    std::printf("best score %s flops %" PRId64 "\n", fmt_g17(res.best_score).c_str(),
                res.best_flops);
    std::printf("best genome %s\n", genome_serialize(res.best).c_str());
    if (!out.empty()) {
        FILE* f = std::fopen(out_path(out, "best_genome.json").c_str(), "wb");
        if (!f) throw io_error("cannot open " + out_path(out, "best_genome.json"));
        const std::string text = genome_serialize(res.best) + "\n";
        std::fwrite(text.data(), 1, text.size(), f);
        std::fclose(f);
        write_search_log(out_path(out, "search_log.jsonl"), res);
    }
    return 0;
}

// ---------------------------------------------------------------------------
// bench / ablate
// ---------------------------------------------------------------------------

struct BenchFlags {
    std::string space = "binary";
    int sample = 0;  // 0 = enumerate
    int per_class = 64;
    double spread = 0.3;
    int epochs = 3;
    int train_batch_size = 32;
    double lr = 0.05;
    bool constant_lr = false;
    double momentum = 0.9;
    double weight_decay = 0.0;
    int proxy_batches = 2;
    int proxy_batch_size = 32;
    std::string axis = "batches";  // ablate only
};

BenchmarkConfig bench_config(const BenchFlags& fl, uint64_t seed) {
    BenchmarkConfig cfg;
    cfg.space = space_by_name(fl.space);
    cfg.sample = fl.sample;
    cfg.train.epochs = fl.epochs;
    cfg.train.batch_size = fl.train_batch_size;
    cfg.train.lr = fl.lr;
    cfg.train.cosine = !fl.constant_lr;
    cfg.train.momentum = fl.momentum;
    cfg.train.weight_decay = fl.weight_decay;
    cfg.proxy_batches = fl.proxy_batches;
    cfg.proxy_batch_size = fl.proxy_batch_size;
    cfg.seed = seed;
    return cfg;
}

Dataset bench_dataset(const BenchFlags& fl, const BenchmarkConfig& cfg) {
    if (fl.per_class < 1) throw validation_error("--per-class must be positive");
    if (cfg.space.input_channels != 1)
        throw validation_error("bench: synthetic texture data is single-channel");
    return synth_textures(cfg.space.num_classes, fl.per_class, cfg.space.input_size, fl.spread,
                          derive_seed(cfg.seed, "bench-data"));
}

void print_report(const CorrelationReport& rep) {
    std::printf("%-16s %-24s %s\n", "proxy", "tau", "rho");
    for (const auto& row : rep.rows)
        std::printf("%-16s %-24s %s\n", row.proxy.c_str(), opt_g17(row.tau).c_str(),
                    opt_g17(row.rho).c_str());
    std::printf("n=%d dataset=%s config=%s\n", rep.n, rep.dataset_tag.c_str(),
                digest_hex(rep.config_digest).c_str());
}

void write_report_json(const CorrelationReport& rep, const std::string& path) {
    nlohmann::json j;
    j["n"] = rep.n;
    j["dataset_tag"] = rep.dataset_tag;
    j["config_digest"] = digest_hex(rep.config_digest);
    j["proxies"] = nlohmann::json::array();
    for (const auto& row : rep.rows) {
        nlohmann::json r;
        r["proxy"] = row.proxy;
        if (row.tau)
            r["tau"] = *row.tau;
        else
            r["tau"] = nullptr;
        if (row.rho)
            r["rho"] = *row.rho;
        else
            r["rho"] = nullptr;
        j["proxies"].push_back(std::move(r));
    }
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw io_error("cannot open " + path);
    const std::string text = j.dump(2) + "\n";
    std::fwrite(text.data(), 1, text.size(), f);
    std::fclose(f);
}

int cmd_bench(const BenchFlags& fl, uint64_t seed, const std::string& out, int jobs) {
    const BenchmarkConfig cfg = bench_config(fl, seed);
    const Dataset ds = bench_dataset(fl, cfg);
    const BenchmarkResult res = run_benchmark(cfg, ds, jobs);
    print_report(res.report);
    if (!out.empty()) {
        emit_csv(res.records, out_path(out, "bench.csv"));
        write_report_json(res.report, out_path(out, "bench_report.json"));
    }
    return 0;
}

int cmd_ablate(const BenchFlags& fl, uint64_t seed, const std::string& out, int jobs) {
    if (fl.axis != "batches" && fl.axis != "batchsize")
        throw validation_error("--axis must be batches or batchsize");
    const BenchmarkConfig cfg = bench_config(fl, seed);
    const Dataset ds = bench_dataset(fl, cfg);
    const BenchmarkResult res = run_benchmark(cfg, ds, jobs);

    std::vector<AblationRow> rows;
    if (fl.axis == "batches") {
        rows = run_ablation_batches(cfg, ds, res.records, 2, 10, jobs);
    } else {
        rows = run_ablation_batchsize(cfg, ds, res.records, {1, 2, 4, 8, 16, 32, 64, 128}, jobs);
    }
    std::printf("%-10s %-24s %s\n", fl.axis == "batches" ? "batches" : "batchsize", "tau",
                "default");
    for (const auto& r : rows)
        std::printf("%-10d %-24s %s\n", r.value, opt_g17(r.tau).c_str(),
                    r.is_default ? "yes" : "no");
    if (!out.empty()) {
        const std::string path = out_path(out, "ablate_" + fl.axis + ".csv");
        FILE* f = std::fopen(path.c_str(), "wb");
        if (!f) throw io_error("cannot open " + path);
        std::fputs("value,tau,default\n", f);
        for (const auto& r : rows) {
            std::string line = std::to_string(r.value) + ",";
            if (r.tau) line += fmt_g17(*r.tau);
            line += r.is_default ? ",1\n" : ",0\n";
            std::fputs(line.c_str(), f);
        }
        std::fclose(f);
    }
    return 0;
}

// ---------------------------------------------------------------------------
// entry
// ---------------------------------------------------------------------------

int run(int argc, char** argv) {
    CLI::App app{"gradient-statistics proxy toolkit for zero-shot architecture search"};
    app.require_subcommand(1);
    // Global flags (--seed, --out, --jobs, --config) remain valid after the
    // subcommand name.
    app.fallthrough();

    uint64_t seed = 0;
    std::string out;
    int jobs = 1;
    std::string config_path;

    // Two-phase configuration: read --config first so its values become the
    // defaults CLI11 falls back to, then let explicit flags override.
    FileConfig file;
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config") config_path = argv[i + 1];
    if (!config_path.empty()) file.load(config_path);

    TheoremFlags thf;
    ScoreFlags scf;
    SearchFlags sef;
    BenchFlags bef, abf;

    file.top("seed", seed);
    file.top("out", out);
    file.top("jobs", jobs);
    file.sub("theorems", "which", thf.which);
    file.sub("theorems", "trials", thf.trials);
    file.sub("score", "genome", scf.genome_path);
    file.sub("score", "proxy", scf.proxy);
    file.sub("score", "space", scf.space);
    file.sub("score", "data", scf.data);
    file.sub("score", "batches", scf.batches);
    file.sub("score", "batch_size", scf.batch_size);
    file.sub("search", "space", sef.space);
    file.sub("search", "proxy", sef.proxy);
    file.sub("search", "budget", sef.budget);
    file.sub("search", "steps", sef.steps);
    file.sub("search", "population", sef.population);
    file.sub("search", "batches", sef.batches);
    file.sub("search", "batch_size", sef.batch_size);
    for (BenchFlags* bf : {&bef, &abf}) {
        const std::string sec = bf == &bef ? "bench" : "ablate";
        file.sub(sec, "space", bf->space);
        file.sub(sec, "sample", bf->sample);
        file.sub(sec, "per_class", bf->per_class);
        file.sub(sec, "spread", bf->spread);
        file.sub(sec, "epochs", bf->epochs);
        file.sub(sec, "train_batch_size", bf->train_batch_size);
        file.sub(sec, "lr", bf->lr);
        file.sub(sec, "constant_lr", bf->constant_lr);
        file.sub(sec, "momentum", bf->momentum);
        file.sub(sec, "weight_decay", bf->weight_decay);
        file.sub(sec, "proxy_batches", bf->proxy_batches);
        file.sub(sec, "proxy_batch_size", bf->proxy_batch_size);
    }
    file.sub("ablate", "axis", abf.axis);

    app.add_option("--seed", seed, "global random seed");
    app.add_option("--out", out, "directory for output artifacts");
    app.add_option("--jobs", jobs, "worker threads for independent tasks");
    app.add_option("--config", config_path, "JSON config file mirroring the flags");

    CLI::App* t = app.add_subcommand("theorems", "run the theoretical-bound experiment suites");
    t->add_option("--which", thf.which, "1, 2, 4, lemma1, or all");
    t->add_option("--trials", thf.trials, "override the per-suite trial count");

    CLI::App* s = app.add_subcommand("score", "score one genome with one proxy");
    s->add_option("--genome", scf.genome_path, "path to a genome JSON file");
    s->add_option("--proxy", scf.proxy, "proxy name");
    s->add_option("--space", scf.space, "cell, binary, or width (default: genome tag)");
    s->add_option("--data", scf.data, "synth or idx:IMAGES,LABELS");
    s->add_option("--batches", scf.batches, "number of scoring batches");
    s->add_option("--batch-size", scf.batch_size, "samples per scoring batch");

    CLI::App* e = app.add_subcommand("search", "budget-constrained evolutionary search");
    e->add_option("--space", sef.space, "cell, binary, or width");
    e->add_option("--proxy", sef.proxy, "selection proxy");
    e->add_option("--budget", sef.budget, "multiply-accumulate budget per inference");
    e->add_option("--steps", sef.steps, "mutation steps");
    e->add_option("--population", sef.population, "population cap");
    e->add_option("--batches", sef.batches, "scoring batches");
    e->add_option("--batch-size", sef.batch_size, "samples per scoring batch");

    CLI::App* b = app.add_subcommand("bench", "train candidates and correlate proxies");
    CLI::App* a = app.add_subcommand("ablate", "benchmark plus a proxy-setting sweep");
    for (auto [cmd, bf] : {std::pair{b, &bef}, std::pair{a, &abf}}) {
        cmd->add_option("--space", bf->space, "cell, binary, or width");
        cmd->add_option("--sample", bf->sample, "random sample size (0 = enumerate)");
        cmd->add_option("--per-class", bf->per_class, "synthetic samples per class");
        cmd->add_option("--spread", bf->spread, "synthetic cluster spread");
        cmd->add_option("--epochs", bf->epochs, "training epochs");
        cmd->add_option("--train-batch-size", bf->train_batch_size, "training batch size");
        cmd->add_option("--lr", bf->lr, "peak learning rate");
        cmd->add_flag("--constant-lr", bf->constant_lr, "disable cosine decay");
        cmd->add_option("--momentum", bf->momentum, "SGD momentum");
        cmd->add_option("--weight-decay", bf->weight_decay, "L2 penalty");
        cmd->add_option("--proxy-batches", bf->proxy_batches, "batches for proxy scoring");
        cmd->add_option("--proxy-batch-size", bf->proxy_batch_size, "proxy batch size");
    }
    a->add_option("--axis", abf.axis, "batches or batchsize");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }

    if (t->parsed()) return cmd_theorems(thf, seed, out);
    if (s->parsed()) return cmd_score(scf, seed);
    if (e->parsed()) return cmd_search(sef, seed, out);
    if (b->parsed()) return cmd_bench(bef, seed, out, jobs);
    if (a->parsed()) return cmd_ablate(abf, seed, out, jobs);
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const validation_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const parse_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const io_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
