#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "zico/tensor.hpp"

namespace zico {

// Edge operations of the cell DAG, in canonical alphabet order. Gene values
// are these codes, so a restricted alphabet is a subset of {0..4}.
enum class EdgeOp : int { none = 0, skip = 1, conv1x1 = 2, conv3x3 = 3, avgpool3x3 = 4 };

constexpr int kCellEdges = 6;

// Edge endpoints (from, to) of the 4-node cell, in gene order.
constexpr std::array<std::pair<int, int>, kCellEdges> kCellEdgeList = {
    {{0, 1}, {0, 2}, {1, 2}, {0, 3}, {1, 3}, {2, 3}}};

const char* edge_op_name(EdgeOp op);

struct SpaceConfig {
    std::string kind = "cell";                             // "cell" or "width"
    std::vector<int> alphabet = {0, 1, 2, 3, 4};           // cell spaces: permitted op codes
    std::vector<int> ladder = {8, 16, 24, 32, 40, 48, 56, 64};  // width spaces: channel choices
    int stages = 2;
    int cells_per_stage = 1;
    std::vector<int> stage_widths = {8, 16};               // cell spaces: fixed channels per stage
    int input_channels = 1;
    int input_size = 16;                                   // square inputs
    int num_classes = 10;

    int genome_length() const { return kind == "cell" ? kCellEdges : stages; }
    // The value set a single gene ranges over.
    const std::vector<int>& gene_values() const { return kind == "cell" ? alphabet : ladder; }
};

// Desk-scale presets. The binary space restricts cell edges to
// {none, conv3x3}, giving 2^6 = 64 genomes, small enough to enumerate and
// train exhaustively.
SpaceConfig desk_cell_space();
SpaceConfig desk_binary_space();
SpaceConfig desk_width_space();

struct Genome {
    std::string space;        // "cell" or "width"
    std::vector<int> genes;   // op codes (cell) or channel counts (width)

    bool operator==(const Genome&) const = default;
};

// Lexicographic order on the gene vector, used for deterministic tie-breaks.
bool genome_less(const Genome& a, const Genome& b);

// Throws validation_error when the genome does not belong to the configured
// space (wrong tag, wrong length, gene outside the configured value set).
void validate_genome(const SpaceConfig& cfg, const Genome& g);

// The guaranteed-feasible search seed: all-skip for cell spaces (lowest op
// code when skip is not in the alphabet), narrowest width everywhere for
// width spaces. Owns no cell parameters, so any budget that admits the
// skeleton admits it.
Genome minimal_genome(const SpaceConfig& cfg);

Genome genome_random(const SpaceConfig& cfg, uint64_t seed);

// Resamples exactly one gene, uniformly over its value set minus the
// current value.
Genome genome_mutate(const SpaceConfig& cfg, const Genome& g, uint64_t seed);

// Every genome exactly once, odometer order (last gene fastest). Spaces
// larger than 10^6 throw validation_error.
std::vector<Genome> enumerate_space(const SpaceConfig& cfg);

// Canonical JSON form {"genes":[...],"space":"...","v":1}. Parsing
// validates against the canonical value set of the named space (full 5-op
// alphabet for "cell", full ladder for "width"); membership in a restricted
// config is validate_genome's job.
std::string genome_serialize(const Genome& g);
Genome genome_parse(const std::string& text);

// FNV-1a over the canonical serialization.
uint64_t genome_digest(const Genome& g);

enum class LayerKind { conv, linear, avg_pool, global_pool, identity, zero };

struct LayerDesc {
    LayerKind kind;
    std::string name;
    int in_ch = 0, out_ch = 0;
    int kernel = 0, stride = 1, pad = 0;
    bool bias = false;
    bool relu = false;
    int in_h = 0, in_w = 0;
    int out_h = 0, out_w = 0;
};

struct NetworkSpec {
    int input_channels = 0;
    int input_size = 0;
    int num_classes = 0;
    std::vector<LayerDesc> layers;
};

NetworkSpec build_network_spec(const SpaceConfig& cfg, const Genome& g);

// Exact trainable scalar count / multiply-accumulate count for one input.
// Only conv and linear layers contribute; pooling, skip and zero layers are
// free by convention.
int64_t count_params(const NetworkSpec& spec);
int64_t count_flops(const NetworkSpec& spec);
int64_t layer_params(const LayerDesc& d);
int64_t layer_macs(const LayerDesc& d);

// A materialized candidate: parameters in macro order (stem first,
// classifier last, one layer index per weight-bearing layer) plus enough
// structure to rebuild the forward graph.
struct Network {
    SpaceConfig config;
    Genome genome;
    NetworkSpec spec;
    ParamSet params;

    // Builds the forward graph for a flat [batch x (C*H*W)] input block and
    // returns the logits tensor. The graph is fresh per call.
    Tensor forward(Graph& g, const std::vector<double>& inputs, int batch) const;
};

Network instantiate_network(const SpaceConfig& cfg, const Genome& g, uint64_t seed);

} // namespace zico
