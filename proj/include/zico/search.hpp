#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "zico/space.hpp"

namespace zico {

struct SearchConfig {
    SpaceConfig space;
    std::string proxy = "zico";
    int64_t budget = 0;      // multiply-accumulates per inference
    int steps = 1000;        // mutation iterations after seeding
    int population_cap = 8;  // surviving candidates
    int n_batches = 2;       // scoring batches for gradient proxies
    int batch_size = 32;
    uint64_t seed = 0;
};

struct PopulationEntry {
    Genome genome;
    double score = 0.0;
    int step = 0;  // insertion step, breaks eviction ties oldest-first
    int64_t flops = 0;
};

struct SearchStep {
    int step = 0;
    std::string action;  // "init" | "accept" | "reject"
    uint64_t digest = 0;
    int64_t flops = 0;
    std::optional<double> score;  // absent on reject
    std::string reason;           // set on reject
    double best_score = 0.0;      // running maximum over scored candidates
};

struct SearchResult {
    Genome best;
    double best_score = 0.0;
    int64_t best_flops = 0;
    std::vector<SearchStep> steps;
    std::vector<PopulationEntry> population;  // final state
};

// Evolutionary loop: seed with the minimal genome, then repeatedly sample a
// uniform parent, mutate one gene, keep the child if it fits the budget, and
// evict the lowest-scoring member (oldest first on ties) when the population
// overflows. The population is a set, so a revisited genome is logged with
// reason "duplicate" and leaves it unchanged. Pure function of the config;
// the per-candidate scoring seed is derived from the global seed and the
// genome digest, and the scoring batch set is fixed once per search.
SearchResult evolve(const SearchConfig& cfg);

// Exhaustive oracle for small spaces (at most 1e5 genomes): argmax of the
// proxy over the feasible set, ties broken by lexicographically smallest
// gene vector. Uses the same scoring context as evolve.
Genome brute_force_best(const SearchConfig& cfg);

// One JSON object per line, one line per step, then a final line with the
// winning genome. Byte-stable across reruns of the same config.
std::string search_log_jsonl(const SearchResult& res);
void write_search_log(const std::string& path, const SearchResult& res);

}  // namespace zico
