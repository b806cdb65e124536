#include "zico/space.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "zico/errors.hpp"
#include "zico/rng.hpp"

namespace zico {

const char* edge_op_name(EdgeOp op) {
    switch (op) {
        case EdgeOp::none: return "none";
        case EdgeOp::skip: return "skip";
        case EdgeOp::conv1x1: return "conv1x1";
        case EdgeOp::conv3x3: return "conv3x3";
        case EdgeOp::avgpool3x3: return "avgpool3x3";
    }
    return "?";
}

namespace {

const std::vector<int> kCanonicalOps = {0, 1, 2, 3, 4};
const std::vector<int> kCanonicalLadder = {8, 16, 24, 32, 40, 48, 56, 64};

void validate_config(const SpaceConfig& cfg) {
    if (cfg.kind != "cell" && cfg.kind != "width")
        throw validation_error("space config: unknown kind \"" + cfg.kind + "\"");
    if (cfg.stages < 1) throw validation_error("space config: need at least one stage");
    if (cfg.input_channels < 1 || cfg.input_size < 1)
        throw validation_error("space config: input shape must be positive");
    if (cfg.num_classes < 2) throw validation_error("space config: need at least 2 classes");
    if (cfg.kind == "cell") {
        if (cfg.alphabet.empty()) throw validation_error("space config: empty op alphabet");
        for (const int a : cfg.alphabet)
            if (std::find(kCanonicalOps.begin(), kCanonicalOps.end(), a) == kCanonicalOps.end())
                throw validation_error("space config: op code " + std::to_string(a) +
                                       " is not a cell operation");
        if (cfg.cells_per_stage < 1)
            throw validation_error("space config: need at least one cell per stage");
        if (int(cfg.stage_widths.size()) != cfg.stages)
            throw validation_error("space config: stage_widths length must equal stage count");
        for (const int w : cfg.stage_widths)
            if (w < 1) throw validation_error("space config: stage width must be positive");
    } else {
        if (cfg.ladder.empty()) throw validation_error("space config: empty width ladder");
        for (const int w : cfg.ladder)
            if (w < 1) throw validation_error("space config: ladder width must be positive");
    }
}

void check_gene_membership(const std::vector<int>& values, int gene_index, int value,
                           const std::string& what) {
    if (std::find(values.begin(), values.end(), value) == values.end())
        throw parse_error("genome: gene " + std::to_string(gene_index) + ": value " +
                          std::to_string(value) + " is not in the " + what);
}

} // namespace

SpaceConfig desk_cell_space() { return SpaceConfig{}; }

SpaceConfig desk_binary_space() {
    SpaceConfig cfg;
    cfg.alphabet = {int(EdgeOp::none), int(EdgeOp::conv3x3)};
    return cfg;
}

SpaceConfig desk_width_space() {
    SpaceConfig cfg;
    cfg.kind = "width";
    return cfg;
}

bool genome_less(const Genome& a, const Genome& b) {
    return std::lexicographical_compare(a.genes.begin(), a.genes.end(), b.genes.begin(),
                                        b.genes.end());
}

void validate_genome(const SpaceConfig& cfg, const Genome& g) {
    validate_config(cfg);
    if (g.space != cfg.kind)
        throw validation_error("genome: space tag \"" + g.space + "\" does not match the \"" +
                               cfg.kind + "\" config");
    if (int(g.genes.size()) != cfg.genome_length())
        throw validation_error("genome: expected " + std::to_string(cfg.genome_length()) +
                               " genes, got " + std::to_string(g.genes.size()));
    const auto& values = cfg.gene_values();
    for (size_t i = 0; i < g.genes.size(); ++i)
        if (std::find(values.begin(), values.end(), g.genes[i]) == values.end())
            throw validation_error("genome: gene " + std::to_string(i) + ": value " +
                                   std::to_string(g.genes[i]) + " is outside the configured space");
}

Genome minimal_genome(const SpaceConfig& cfg) {
    validate_config(cfg);
    Genome g;
    g.space = cfg.kind;
    if (cfg.kind == "cell") {
        // All-skip keeps the whole stem signal flowing while owning no
        // parameters; alphabets without skip fall back to their lowest code.
        const int skip = int(EdgeOp::skip);
        const bool has_skip =
            std::find(cfg.alphabet.begin(), cfg.alphabet.end(), skip) != cfg.alphabet.end();
        const int v = has_skip ? skip : *std::min_element(cfg.alphabet.begin(), cfg.alphabet.end());
        g.genes.assign(size_t(kCellEdges), v);
    } else {
        const int w = *std::min_element(cfg.ladder.begin(), cfg.ladder.end());
        g.genes.assign(size_t(cfg.stages), w);
    }
    return g;
}

Genome genome_random(const SpaceConfig& cfg, uint64_t seed) {
    validate_config(cfg);
    Rng rng(seed);
    const auto& values = cfg.gene_values();
    Genome g;
    g.space = cfg.kind;
    g.genes.resize(size_t(cfg.genome_length()));
    for (auto& gene : g.genes) gene = values[size_t(rng.uniform_int(int(values.size())))];
    return g;
}

Genome genome_mutate(const SpaceConfig& cfg, const Genome& g, uint64_t seed) {
    validate_genome(cfg, g);
    const auto& values = cfg.gene_values();
    if (values.size() < 2)
        throw validation_error("genome_mutate: a 1-symbol space has no mutations");
    Rng rng(seed);
    const int pos = rng.uniform_int(int(g.genes.size()));
    std::vector<int> other;
    for (const int v : values)
        if (v != g.genes[size_t(pos)]) other.push_back(v);
    Genome out = g;
    out.genes[size_t(pos)] = other[size_t(rng.uniform_int(int(other.size())))];
    return out;
}

std::vector<Genome> enumerate_space(const SpaceConfig& cfg) {
    validate_config(cfg);
    const auto& values = cfg.gene_values();
    const int len = cfg.genome_length();
    double total = 1.0;
    for (int i = 0; i < len; ++i) total *= double(values.size());
    if (total > 1e6)
        throw validation_error("enumerate_space: space has " + std::to_string(total) +
                               " genomes, enumeration is capped at 1e6");
    std::vector<Genome> out;
    out.reserve(size_t(total));
    std::vector<size_t> odo(size_t(len), 0);
    for (;;) {
        Genome g;
        g.space = cfg.kind;
        g.genes.resize(size_t(len));
        for (int i = 0; i < len; ++i) g.genes[size_t(i)] = values[odo[size_t(i)]];
        out.push_back(std::move(g));
        int i = len - 1;
        while (i >= 0 && ++odo[size_t(i)] == values.size()) odo[size_t(i--)] = 0;
        if (i < 0) break;
    }
    return out;
}

std::string genome_serialize(const Genome& g) {
    nlohmann::json j;
    j["space"] = g.space;
    j["genes"] = g.genes;
    j["v"] = 1;
    return j.dump();
}

Genome genome_parse(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("genome: ") + e.what());
    }
    if (!j.is_object()) throw parse_error("genome: expected a JSON object");
    if (!j.contains("space")) throw parse_error("genome: missing \"space\" field");
    if (!j["space"].is_string()) throw parse_error("genome: \"space\" must be a string");
    const std::string space = j["space"].get<std::string>();
    if (space != "cell" && space != "width")
        throw parse_error("genome: unknown space tag \"" + space + "\"");
    if (j.contains("v") && j["v"] != 1)
        throw parse_error("genome: unsupported schema version");
    if (!j.contains("genes") || !j["genes"].is_array())
        throw parse_error("genome: missing \"genes\" array");

    Genome g;
    g.space = space;
    const auto& arr = j["genes"];
    for (size_t i = 0; i < arr.size(); ++i) {
        if (!arr[i].is_number_integer())
            throw parse_error("genome: gene " + std::to_string(i) + ": expected an integer");
        const int v = arr[i].get<int>();
        if (space == "cell")
            check_gene_membership(kCanonicalOps, int(i), v, "5-symbol cell alphabet");
        else
            check_gene_membership(kCanonicalLadder, int(i), v, "canonical width ladder");
        g.genes.push_back(v);
    }
    if (space == "cell" && int(g.genes.size()) != kCellEdges)
        throw parse_error("genome: cell genome needs exactly " + std::to_string(kCellEdges) +
                          " genes, got " + std::to_string(g.genes.size()));
    if (space == "width" && g.genes.empty())
        throw parse_error("genome: width genome needs at least one gene");
    return g;
}

uint64_t genome_digest(const Genome& g) {
    const std::string s = genome_serialize(g);
    uint64_t h = 14695981039346656037ULL;
    for (const char c : s) {
        h ^= uint64_t(uint8_t(c));
        h *= 1099511628211ULL;
    }
    return h;
}

namespace {

// One structural walk serves spec building and graph execution; handles are
// indices into builder-owned value lists.
class NetBuilder {
public:
    virtual ~NetBuilder() = default;
    virtual int conv(const std::string& name, int x, int cout, int k, int stride, int pad,
                     bool bias, bool relu) = 0;
    virtual int avg_pool(const std::string& name, int x, int k, int stride, int pad) = 0;
    virtual int zero_like(const std::string& name, int x) = 0;
    virtual int identity(const std::string& name, int x) = 0;
    virtual int add(int a, int b) = 0;
    virtual int global_pool(const std::string& name, int x) = 0;
    virtual int linear(const std::string& name, int x, int out) = 0;
};

int walk_cell(NetBuilder& b, const Genome& g, int input, int width, const std::string& prefix) {
    std::array<int, 4> node{};
    node[0] = input;
    int gene = 0;
    for (int j = 1; j < 4; ++j) {
        int acc = 0;
        bool live = false;
        for (int i = 0; i < j; ++i, ++gene) {
            const std::string ename = prefix + ".edge" + std::to_string(gene);
            int v = 0;
            switch (EdgeOp(g.genes[size_t(gene)])) {
                case EdgeOp::none: continue;
                case EdgeOp::skip: v = b.identity(ename, node[size_t(i)]); break;
                case EdgeOp::conv1x1:
                    v = b.conv(ename, node[size_t(i)], width, 1, 1, 0, false, true);
                    break;
                case EdgeOp::conv3x3:
                    v = b.conv(ename, node[size_t(i)], width, 3, 1, 1, false, true);
                    break;
                case EdgeOp::avgpool3x3: v = b.avg_pool(ename, node[size_t(i)], 3, 1, 1); break;
            }
            acc = live ? b.add(acc, v) : v;
            live = true;
        }
        node[size_t(j)] = live ? acc : b.zero_like(prefix + ".node" + std::to_string(j), input);
    }
    // The residual keeps a stem-to-classifier path alive for every genome.
    return b.add(input, node[3]);
}

int walk_network(NetBuilder& b, const SpaceConfig& cfg, const Genome& g, int input) {
    int x = input;
    if (cfg.kind == "cell") {
        x = b.conv("stem", x, cfg.stage_widths[0], 3, 1, 1, true, true);
        for (int s = 0; s < cfg.stages; ++s) {
            for (int c = 0; c < cfg.cells_per_stage; ++c)
                x = walk_cell(b, g, x, cfg.stage_widths[size_t(s)],
                              "stage" + std::to_string(s) + ".cell" + std::to_string(c));
            if (s + 1 < cfg.stages) {
                const std::string name = "transition" + std::to_string(s);
                x = b.conv(name, x, cfg.stage_widths[size_t(s) + 1], 3, 1, 1, true, true);
                x = b.avg_pool(name + ".pool", x, 2, 2, 0);
            }
        }
    } else {
        x = b.conv("stem", x, g.genes[0], 3, 1, 1, true, true);
        for (int s = 0; s < cfg.stages; ++s) {
            const std::string name = "block" + std::to_string(s);
            x = b.conv(name, x, g.genes[size_t(s)], 3, 1, 1, true, true);
            x = b.avg_pool(name + ".pool", x, 2, 2, 0);
        }
    }
    x = b.global_pool("pool", x);
    return b.linear("classifier", x, cfg.num_classes);
}

struct Extent {
    int ch, h, w;
};

class SpecBuilder : public NetBuilder {
public:
    std::vector<LayerDesc> layers;

    explicit SpecBuilder(Extent input) { vals_.push_back(input); }

    int conv(const std::string& name, int x, int cout, int k, int stride, int pad, bool bias,
             bool relu) override {
        const Extent in = vals_[size_t(x)];
        LayerDesc d;
        d.kind = LayerKind::conv;
        d.name = name;
        d.in_ch = in.ch;
        d.out_ch = cout;
        d.kernel = k;
        d.stride = stride;
        d.pad = pad;
        d.bias = bias;
        d.relu = relu;
        d.in_h = in.h;
        d.in_w = in.w;
        d.out_h = out_extent(name, in.h, k, stride, pad);
        d.out_w = out_extent(name, in.w, k, stride, pad);
        layers.push_back(d);
        return push({cout, d.out_h, d.out_w});
    }

    int avg_pool(const std::string& name, int x, int k, int stride, int pad) override {
        const Extent in = vals_[size_t(x)];
        LayerDesc d;
        d.kind = LayerKind::avg_pool;
        d.name = name;
        d.in_ch = in.ch;
        d.out_ch = in.ch;
        d.kernel = k;
        d.stride = stride;
        d.pad = pad;
        d.in_h = in.h;
        d.in_w = in.w;
        d.out_h = out_extent(name, in.h, k, stride, pad);
        d.out_w = out_extent(name, in.w, k, stride, pad);
        layers.push_back(d);
        return push({in.ch, d.out_h, d.out_w});
    }

    int zero_like(const std::string& name, int x) override {
        const Extent in = vals_[size_t(x)];
        LayerDesc d;
        d.kind = LayerKind::zero;
        d.name = name;
        d.in_ch = d.out_ch = in.ch;
        d.in_h = d.out_h = in.h;
        d.in_w = d.out_w = in.w;
        layers.push_back(d);
        return push(in);
    }

    int identity(const std::string& name, int x) override {
        const Extent in = vals_[size_t(x)];
        LayerDesc d;
        d.kind = LayerKind::identity;
        d.name = name;
        d.in_ch = d.out_ch = in.ch;
        d.in_h = d.out_h = in.h;
        d.in_w = d.out_w = in.w;
        layers.push_back(d);
        return x;
    }

    int add(int a, int b) override {
        const Extent ea = vals_[size_t(a)];
        const Extent eb = vals_[size_t(b)];
        if (ea.ch != eb.ch || ea.h != eb.h || ea.w != eb.w)
            throw validation_error("network spec: mismatched shapes in cell aggregation");
        return a;
    }

    int global_pool(const std::string& name, int x) override {
        const Extent in = vals_[size_t(x)];
        LayerDesc d;
        d.kind = LayerKind::global_pool;
        d.name = name;
        d.in_ch = d.out_ch = in.ch;
        d.in_h = in.h;
        d.in_w = in.w;
        d.out_h = d.out_w = 1;
        layers.push_back(d);
        return push({in.ch, 1, 1});
    }

    int linear(const std::string& name, int x, int out) override {
        const Extent in = vals_[size_t(x)];
        LayerDesc d;
        d.kind = LayerKind::linear;
        d.name = name;
        d.in_ch = in.ch;
        d.out_ch = out;
        d.bias = true;
        d.in_h = d.in_w = d.out_h = d.out_w = 1;
        layers.push_back(d);
        return push({out, 1, 1});
    }

private:
    std::vector<Extent> vals_;

    int push(Extent e) {
        vals_.push_back(e);
        return int(vals_.size()) - 1;
    }

    static int out_extent(const std::string& name, int in, int k, int stride, int pad) {
        const int padded = in + 2 * pad;
        if (k > padded)
            throw validation_error("network spec: " + name + ": kernel " + std::to_string(k) +
                                   " exceeds padded extent " + std::to_string(padded));
        if ((padded - k) % stride != 0)
            throw validation_error("network spec: " + name + ": extent " + std::to_string(in) +
                                   " is incompatible with kernel " + std::to_string(k) +
                                   " stride " + std::to_string(stride));
        return (padded - k) / stride + 1;
    }
};

class ExecBuilder : public NetBuilder {
public:
    ExecBuilder(Graph& g, const ParamSet& params) : g_(g), params_(params) {}

    int seed_input(Tensor t) { return push(t); }
    Tensor value(int x) const { return vals_[size_t(x)]; }

    void finish() const {
        if (cursor_ != params_.items.size())
            throw error("network forward: consumed " + std::to_string(cursor_) + " of " +
                        std::to_string(params_.items.size()) + " parameter tensors");
    }

    int conv(const std::string& name, int x, int cout, int k, int stride, int pad, bool bias,
             bool relu) override {
        (void)cout;
        (void)k;
        Tensor y = g_.conv2d(vals_[size_t(x)], g_.leaf(fetch(name + ".w")), stride, pad);
        if (bias) y = g_.bias_add(y, g_.leaf(fetch(name + ".b")));
        if (relu) y = g_.relu(y);
        return push(y);
    }

    int avg_pool(const std::string&, int x, int k, int stride, int pad) override {
        return push(g_.avg_pool2d(vals_[size_t(x)], k, stride, pad));
    }

    int zero_like(const std::string&, int x) override {
        return push(g_.constant(vals_[size_t(x)].shape(), 0.0));
    }

    int identity(const std::string&, int x) override { return x; }

    int add(int a, int b) override { return push(g_.add(vals_[size_t(a)], vals_[size_t(b)])); }

    int global_pool(const std::string&, int x) override {
        return push(g_.global_avg_pool(vals_[size_t(x)]));
    }

    int linear(const std::string& name, int x, int) override {
        Tensor y = g_.matmul(vals_[size_t(x)], g_.leaf(fetch(name + ".w")));
        return push(g_.bias_add(y, g_.leaf(fetch(name + ".b"))));
    }

private:
    Graph& g_;
    const ParamSet& params_;
    std::vector<Tensor> vals_;
    size_t cursor_ = 0;

    int push(Tensor t) {
        vals_.push_back(t);
        return int(vals_.size()) - 1;
    }

    std::shared_ptr<Param> fetch(const std::string& name) {
        if (cursor_ >= params_.items.size())
            throw error("network forward: parameter list exhausted at " + name);
        auto p = params_.items[cursor_++];
        if (p->name != name)
            throw error("network forward: expected parameter " + name + ", found " + p->name);
        return p;
    }
};

} // namespace

NetworkSpec build_network_spec(const SpaceConfig& cfg, const Genome& g) {
    validate_genome(cfg, g);
    SpecBuilder b({cfg.input_channels, cfg.input_size, cfg.input_size});
    walk_network(b, cfg, g, 0);
    NetworkSpec spec;
    spec.input_channels = cfg.input_channels;
    spec.input_size = cfg.input_size;
    spec.num_classes = cfg.num_classes;
    spec.layers = std::move(b.layers);
    return spec;
}

int64_t layer_params(const LayerDesc& d) {
    switch (d.kind) {
        case LayerKind::conv:
            return int64_t(d.kernel) * d.kernel * d.in_ch * d.out_ch + (d.bias ? d.out_ch : 0);
        case LayerKind::linear: return int64_t(d.in_ch) * d.out_ch + (d.bias ? d.out_ch : 0);
        default: return 0;
    }
}

int64_t layer_macs(const LayerDesc& d) {
    switch (d.kind) {
        case LayerKind::conv:
            return int64_t(d.kernel) * d.kernel * d.in_ch * d.out_ch * d.out_h * d.out_w;
        case LayerKind::linear: return int64_t(d.in_ch) * d.out_ch;
        default: return 0;
    }
}

int64_t count_params(const NetworkSpec& spec) {
    int64_t total = 0;
    for (const auto& d : spec.layers) total += layer_params(d);
    return total;
}

int64_t count_flops(const NetworkSpec& spec) {
    int64_t total = 0;
    for (const auto& d : spec.layers) total += layer_macs(d);
    return total;
}

Network instantiate_network(const SpaceConfig& cfg, const Genome& g, uint64_t seed) {
    Network net;
    net.config = cfg;
    net.genome = g;
    net.spec = build_network_spec(cfg, g);
    int layer = 0;
    for (const LayerDesc& d : net.spec.layers) {
        if (d.kind == LayerKind::conv) {
            ++layer;
            const int fan_in = d.kernel * d.kernel * d.in_ch;
            net.params.add(d.name + ".w", layer, Shape{d.out_ch, d.in_ch, d.kernel, d.kernel},
                           fan_in);
            if (d.bias) net.params.add(d.name + ".b", layer, Shape{d.out_ch}, fan_in, true);
        } else if (d.kind == LayerKind::linear) {
            ++layer;
            net.params.add(d.name + ".w", layer, Shape{d.in_ch, d.out_ch}, d.in_ch);
            if (d.bias) net.params.add(d.name + ".b", layer, Shape{d.out_ch}, d.in_ch, true);
        }
    }
    kaiming_init(net.params, seed);
    return net;
}

Tensor Network::forward(Graph& g, const std::vector<double>& inputs, int batch) const {
    if (batch < 1) throw validation_error("network forward: batch must be >= 1");
    const int d = config.input_channels * config.input_size * config.input_size;
    if (inputs.size() != size_t(batch) * size_t(d))
        throw validation_error("network forward: input block holds " +
                               std::to_string(inputs.size()) + " values, expected " +
                               std::to_string(batch) + " x " + std::to_string(d));
    ExecBuilder b(g, params);
    const int in = b.seed_input(
        g.input(Shape{batch, config.input_channels, config.input_size, config.input_size}, inputs));
    const int out = walk_network(b, config, genome, in);
    b.finish();
    return b.value(out);
}

} // namespace zico
