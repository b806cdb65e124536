#include "zico/search.hpp"

#include <cstdio>
#include <unordered_map>

#include "json.hpp"
#include "zico/errors.hpp"
#include "zico/proxies.hpp"
#include "zico/rng.hpp"
#include "zico/util.hpp"

namespace zico {

namespace {

bool proxy_needs_batches(const std::string& proxy) {
    return proxy != "params" && proxy != "flops" && proxy != "synflow";
}

struct Scorer {
    const SearchConfig& cfg;
    std::vector<Batch> batches;
    std::unordered_map<uint64_t, double> cache;

    explicit Scorer(const SearchConfig& c) : cfg(c) {
        if (proxy_needs_batches(cfg.proxy))
            batches = make_proxy_batches(cfg.space, cfg.n_batches, cfg.batch_size, cfg.seed);
    }

    // Scores depend only on (seed, digest, batch set), so a digest-keyed
    // cache changes nothing but the cost of duplicate candidates.
    double operator()(const Genome& g, uint64_t digest) {
        auto it = cache.find(digest);
        if (it != cache.end()) return it->second;
        const uint64_t init_seed = derive_seed(cfg.seed, digest);
        const double s =
            score_proxy(cfg.proxy, cfg.space, g, batches, LossKind::classification, init_seed);
        cache.emplace(digest, s);
        return s;
    }
};

void validate_search_config(const SearchConfig& cfg) {
    if (cfg.steps < 0) throw validation_error("evolve: steps must be nonnegative");
    if (cfg.population_cap < 1)
        throw validation_error("evolve: population cap must be at least 1");
    if (cfg.budget <= 0) throw validation_error("evolve: budget must be positive");
}

}  // namespace

SearchResult evolve(const SearchConfig& cfg) {
    validate_search_config(cfg);
    Scorer score(cfg);

    SearchResult res;
    Genome f0 = minimal_genome(cfg.space);
    const int64_t flops0 = count_flops(build_network_spec(cfg.space, f0));
    if (flops0 > cfg.budget)
        throw validation_error("evolve: the minimal genome needs " + std::to_string(flops0) +
                               " MACs, over the budget of " + std::to_string(cfg.budget));

    const uint64_t digest0 = genome_digest(f0);
    const double s0 = score(f0, digest0);
    res.population.push_back({f0, s0, 0, flops0});
    res.best_score = s0;
    res.steps.push_back({0, "init", digest0, flops0, s0, "", s0});

    Rng rng(derive_seed(cfg.seed, "evolve"));
    for (int t = 1; t <= cfg.steps; ++t) {
        const int pick = rng.uniform_int(int(res.population.size()));
        const Genome child =
            genome_mutate(cfg.space, res.population[pick].genome, rng.next_u64());
        const uint64_t digest = genome_digest(child);
        const int64_t flops = count_flops(build_network_spec(cfg.space, child));
        if (flops > cfg.budget) {
            res.steps.push_back(
                {t, "reject", digest, flops, std::nullopt, "over_budget", res.best_score});
            continue;
        }
        const double s = score(child, digest);
        // the population is a set of networks, so re-adding a member leaves
        // it untouched and only the log records the revisit
        bool present = false;
        for (const auto& e : res.population)
            if (genome_digest(e.genome) == digest) {
                present = true;
                break;
            }
        if (present) {
            res.steps.push_back({t, "accept", digest, flops, s, "duplicate", res.best_score});
            continue;
        }
        res.population.push_back({child, s, t, flops});
        if (int(res.population.size()) > cfg.population_cap) {
            size_t worst = 0;
            for (size_t i = 1; i < res.population.size(); ++i) {
                const auto& e = res.population[i];
                const auto& w = res.population[worst];
                if (e.score < w.score || (e.score == w.score && e.step < w.step)) worst = i;
            }
            res.population.erase(res.population.begin() + ptrdiff_t(worst));
        }
        if (s > res.best_score) res.best_score = s;
        res.steps.push_back({t, "accept", digest, flops, s, "", res.best_score});
    }

    size_t top = 0;
    for (size_t i = 1; i < res.population.size(); ++i) {
        const auto& e = res.population[i];
        const auto& b = res.population[top];
        if (e.score > b.score ||
            (e.score == b.score && genome_less(e.genome, b.genome)))
            top = i;
    }
    res.best = res.population[top].genome;
    res.best_score = res.population[top].score;
    res.best_flops = res.population[top].flops;
    return res;
}

Genome brute_force_best(const SearchConfig& cfg) {
    if (cfg.budget <= 0) throw validation_error("brute_force_best: budget must be positive");
    const std::vector<Genome> all = enumerate_space(cfg.space);
    if (all.size() > 100000)
        throw validation_error("brute_force_best: space has " + std::to_string(all.size()) +
                               " genomes, over the exhaustive limit of 100000");
    Scorer score(cfg);

    const Genome* best = nullptr;
    double best_score = 0.0;
    for (const Genome& g : all) {
        if (count_flops(build_network_spec(cfg.space, g)) > cfg.budget) continue;
        const double s = score(g, genome_digest(g));
        if (!best || s > best_score || (s == best_score && genome_less(g, *best))) {
            best = &g;
            best_score = s;
        }
    }
    if (!best)
        throw validation_error("brute_force_best: no genome meets the budget of " +
                               std::to_string(cfg.budget));
    return *best;
}

std::string search_log_jsonl(const SearchResult& res) {
    std::string out;
    for (const auto& st : res.steps) {
        nlohmann::json j;
        j["step"] = st.step;
        j["action"] = st.action;
        j["digest"] = st.digest;
        j["flops"] = st.flops;
        if (st.score) j["score"] = *st.score;
        if (!st.reason.empty()) j["reason"] = st.reason;
        j["best_score"] = st.best_score;
        out += j.dump();
        out += '\n';
    }
    nlohmann::json fin;
    fin["final"] = nlohmann::json::parse(genome_serialize(res.best));
    fin["best_score"] = res.best_score;
    fin["best_flops"] = res.best_flops;
    out += fin.dump();
    out += '\n';
    return out;
}

void write_search_log(const std::string& path, const SearchResult& res) {
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw io_error("write_search_log: cannot open " + path);
    const std::string text = search_log_jsonl(res);
    std::fwrite(text.data(), 1, text.size(), f);
    std::fclose(f);
}

}  // namespace zico
