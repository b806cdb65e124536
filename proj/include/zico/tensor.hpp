#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "zico/errors.hpp"

namespace zico {

struct Shape {
    std::vector<int> dims;

    Shape() = default;
    Shape(std::initializer_list<int> d) : dims(d) {}
    explicit Shape(std::vector<int> d) : dims(std::move(d)) {}

    int rank() const { return int(dims.size()); }
    int operator[](int i) const { return dims[size_t(i)]; }
    int numel() const {
        int n = 1;
        for (const int d : dims) n *= d;
        return n;
    }
    bool operator==(const Shape& o) const { return dims == o.dims; }
    std::string str() const;
};

// A trainable (or frozen) parameter buffer. Lives outside any Graph so its
// values persist across forward passes; backward() accumulates into grad.
struct Param {
    std::string name;
    int layer = 1; // layer group index, contiguous 1..D within a ParamSet
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    int fan_in = 0;
    bool is_bias = false;
    bool trainable = true;

    int numel() const { return shape.numel(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

struct ParamSet {
    std::vector<std::shared_ptr<Param>> items;

    std::shared_ptr<Param> add(std::string name, int layer, Shape shape, int fan_in,
                               bool is_bias = false, bool trainable = true);
    // Gradient buffers are scratch state, so clearing them is a const
    // operation on the set.
    void zero_grad() const;
    long long total_trainable() const;
    int num_layers() const; // D
    void renumber_layers(); // compact layer ids to 1..D preserving order
};

// Weights ~ Normal(0, sqrt(2/fan_in)), biases exactly 0. Deterministic per
// seed and independent of call-site ordering (per-param derived seeds).
void kaiming_init(ParamSet& params, uint64_t seed);

class Graph;

// Lightweight handle to a node inside a Graph. Valid while the graph lives.
struct Tensor {
    Graph* g = nullptr;
    int id = -1;

    const Shape& shape() const;
    const std::vector<double>& val() const;
    const std::vector<double>& grad() const;
    double scalar() const;
};

enum class ConvImpl { direct, im2col };

// Define-by-run computation graph. Nodes are appended in topological order;
// one backward pass walks them once in reverse.
class Graph {
public:
    Tensor input(Shape shape, std::vector<double> values);
    Tensor constant(Shape shape, double fill);
    Tensor leaf(const std::shared_ptr<Param>& p);

    Tensor matmul(Tensor a, Tensor b);
    Tensor add(Tensor a, Tensor b);
    Tensor scale(Tensor x, double c);
    Tensor bias_add(Tensor x, Tensor b); // [N,K]+[K] or [N,C,H,W]+[C]
    Tensor relu(Tensor x);
    Tensor conv2d(Tensor x, Tensor w, int stride, int pad, ConvImpl impl = ConvImpl::im2col);
    Tensor avg_pool2d(Tensor x, int k) { return avg_pool2d(x, k, k, 0); }
    Tensor avg_pool2d(Tensor x, int k, int stride, int pad);
    Tensor global_avg_pool(Tensor x); // [N,C,H,W] -> [N,C]
    Tensor flatten(Tensor x);         // [N,...] -> [N,rest]
    Tensor sum(Tensor x);             // scalar
    Tensor cross_entropy(Tensor logits, const std::vector<int>& labels);
    Tensor mse_loss(Tensor pred, Tensor target); // sum of half squared residuals

    // Fills every node's grad buffer with d(loss)/d(node), clearing whatever
    // a previous pass left there, and accumulates d(loss)/d(param) into the
    // Param grad of every trainable leaf. Repeated calls therefore keep node
    // gradients fresh while leaf gradients add up until ParamSet::zero_grad.
    void backward(Tensor loss);

    size_t num_nodes() const { return nodes_.size(); }
    size_t backward_visits() const { return backward_visits_; }

    // multiply-accumulate count of every matmul/conv executed so far,
    // per leading batch element; the flops instantiate-and-count oracle
    long long recorded_macs_per_sample() const { return macs_per_sample_; }

private:
    friend struct Tensor;

    struct Node {
        Shape shape;
        std::vector<double> val;
        std::vector<double> grad;
        std::function<void()> back; // empty for inputs/constants
        std::shared_ptr<Param> param;
    };

    Tensor make(Shape shape);
    Node& at(int id) { return nodes_[size_t(id)]; }
    void check_same_graph(Tensor t) const;

    std::vector<Node> nodes_;
    size_t backward_visits_ = 0;
    long long macs_per_sample_ = 0;
};

// Central finite-difference check of analytic parameter gradients.
// build must construct a scalar loss from current param values.
struct GradCheckEntry {
    std::string param;
    double max_rel_err = 0.0;
};
struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_err = 0.0;
};
GradCheckReport grad_check(ParamSet& params, const std::function<Tensor(Graph&)>& build,
                           double h = 1e-5);

} // namespace zico
