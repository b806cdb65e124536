#include "zico/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "zico/rng.hpp"

namespace zico {

std::string Shape::str() const {
    std::string s = "[";
    for (size_t i = 0; i < dims.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(dims[i]);
    }
    return s + "]";
}

std::shared_ptr<Param> ParamSet::add(std::string name, int layer, Shape shape, int fan_in,
                                     bool is_bias, bool trainable) {
    auto p = std::make_shared<Param>();
    p->name = std::move(name);
    p->layer = layer;
    p->shape = std::move(shape);
    p->value.assign(size_t(p->shape.numel()), 0.0);
    p->grad.assign(size_t(p->shape.numel()), 0.0);
    p->fan_in = fan_in;
    p->is_bias = is_bias;
    p->trainable = trainable;
    items.push_back(p);
    return p;
}

void ParamSet::zero_grad() const {
    for (const auto& p : items) p->zero_grad();
}

long long ParamSet::total_trainable() const {
    long long n = 0;
    for (const auto& p : items)
        if (p->trainable) n += p->numel();
    return n;
}

int ParamSet::num_layers() const {
    int d = 0;
    for (const auto& p : items) d = std::max(d, p->layer);
    return d;
}

void ParamSet::renumber_layers() {
    std::map<int, int> remap;
    for (const auto& p : items)
        remap.emplace(p->layer, 0);
    int next = 1;
    for (auto& [old_id, new_id] : remap) new_id = next++;
    for (auto& p : items) p->layer = remap[p->layer];
}

void kaiming_init(ParamSet& params, uint64_t seed) {
    for (size_t i = 0; i < params.items.size(); ++i) {
        Param& p = *params.items[i];
        if (p.is_bias) {
            std::fill(p.value.begin(), p.value.end(), 0.0);
            continue;
        }
        if (p.fan_in <= 0)
            throw validation_error("kaiming_init: parameter '" + p.name + "' has zero fan_in");
        Rng rng(derive_seed(seed, uint64_t(i)));
        const double std_dev = std::sqrt(2.0 / double(p.fan_in));
        for (auto& v : p.value) v = std_dev * rng.normal();
    }
}

const Shape& Tensor::shape() const { return g->at(id).shape; }
const std::vector<double>& Tensor::val() const { return g->at(id).val; }
const std::vector<double>& Tensor::grad() const { return g->at(id).grad; }

double Tensor::scalar() const {
    const auto& n = g->at(id);
    if (n.shape.numel() != 1)
        throw dim_error("scalar() on tensor of shape " + n.shape.str());
    return n.val[0];
}

Tensor Graph::make(Shape shape) {
    Node n;
    n.shape = std::move(shape);
    n.val.assign(size_t(n.shape.numel()), 0.0);
    n.grad.assign(size_t(n.shape.numel()), 0.0);
    nodes_.push_back(std::move(n));
    return Tensor{this, int(nodes_.size()) - 1};
}

void Graph::check_same_graph(Tensor t) const {
    if (t.g != this || t.id < 0 || size_t(t.id) >= nodes_.size())
        throw validation_error("tensor does not belong to this graph");
}

Tensor Graph::input(Shape shape, std::vector<double> values) {
    if (int(values.size()) != shape.numel())
        throw dim_error("input: " + std::to_string(values.size()) + " values for shape " +
                        shape.str());
    Tensor t = make(std::move(shape));
    at(t.id).val = std::move(values);
    return t;
}

Tensor Graph::constant(Shape shape, double fill) {
    Tensor t = make(std::move(shape));
    auto& v = at(t.id).val;
    std::fill(v.begin(), v.end(), fill);
    return t;
}

Tensor Graph::leaf(const std::shared_ptr<Param>& p) {
    Tensor t = make(p->shape);
    Node& n = at(t.id);
    n.val = p->value;
    n.param = p;
    Graph* g = this;
    const int id = t.id;
    n.back = [g, id] {
        Node& self = g->at(id);
        if (!self.param->trainable) return;
        auto& pg = self.param->grad;
        for (size_t i = 0; i < pg.size(); ++i) pg[i] += self.grad[i];
    };
    return t;
}

Tensor Graph::matmul(Tensor a, Tensor b) {
    check_same_graph(a);
    check_same_graph(b);
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.rank() != 2 || sb.rank() != 2 || sa[1] != sb[0])
        throw dim_error("matmul: incompatible shapes " + sa.str() + " and " + sb.str());
    const int m = sa[0], k = sa[1], n = sb[1];
    Tensor c = make(Shape{m, n});
    {
        const auto& av = at(a.id).val;
        const auto& bv = at(b.id).val;
        auto& cv = at(c.id).val;
        for (int i = 0; i < m; ++i)
            for (int p = 0; p < k; ++p) {
                const double aip = av[size_t(i * k + p)];
                if (aip == 0.0) continue;
                for (int j = 0; j < n; ++j) cv[size_t(i * n + j)] += aip * bv[size_t(p * n + j)];
            }
    }
    macs_per_sample_ += (long long)(m)*k * n / std::max(1, m); // per leading row
    Graph* g = this;
    const int ia = a.id, ib = b.id, ic = c.id;
    at(c.id).back = [g, ia, ib, ic, m, k, n] {
        const auto& dc = g->at(ic).grad;
        const auto& av = g->at(ia).val;
        const auto& bv = g->at(ib).val;
        auto& da = g->at(ia).grad;
        auto& db = g->at(ib).grad;
        // dA = dC * B^T
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                const double d = dc[size_t(i * n + j)];
                if (d == 0.0) continue;
                for (int p = 0; p < k; ++p) da[size_t(i * k + p)] += d * bv[size_t(p * n + j)];
            }
        // dB = A^T * dC
        for (int p = 0; p < k; ++p)
            for (int i = 0; i < m; ++i) {
                const double aip = av[size_t(i * k + p)];
                if (aip == 0.0) continue;
                for (int j = 0; j < n; ++j) db[size_t(p * n + j)] += aip * dc[size_t(i * n + j)];
            }
    };
    return c;
}

Tensor Graph::add(Tensor a, Tensor b) {
    check_same_graph(a);
    check_same_graph(b);
    if (!(a.shape() == b.shape()))
        throw dim_error("add: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    Tensor c = make(a.shape());
    {
        const auto& av = at(a.id).val;
        const auto& bv = at(b.id).val;
        auto& cv = at(c.id).val;
        for (size_t i = 0; i < cv.size(); ++i) cv[i] = av[i] + bv[i];
    }
    Graph* g = this;
    const int ia = a.id, ib = b.id, ic = c.id;
    at(c.id).back = [g, ia, ib, ic] {
        const auto& dc = g->at(ic).grad;
        auto& da = g->at(ia).grad;
        auto& db = g->at(ib).grad;
        for (size_t i = 0; i < dc.size(); ++i) {
            da[i] += dc[i];
            db[i] += dc[i];
        }
    };
    return c;
}

Tensor Graph::scale(Tensor x, double c) {
    check_same_graph(x);
    Tensor y = make(x.shape());
    {
        const auto& xv = at(x.id).val;
        auto& yv = at(y.id).val;
        for (size_t i = 0; i < yv.size(); ++i) yv[i] = c * xv[i];
    }
    Graph* g = this;
    const int ix = x.id, iy = y.id;
    at(y.id).back = [g, ix, iy, c] {
        const auto& dy = g->at(iy).grad;
        auto& dx = g->at(ix).grad;
        for (size_t i = 0; i < dy.size(); ++i) dx[i] += c * dy[i];
    };
    return y;
}

Tensor Graph::bias_add(Tensor x, Tensor b) {
    check_same_graph(x);
    check_same_graph(b);
    const Shape& sx = x.shape();
    const Shape& sb = b.shape();
    int channels = 0, inner = 0;
    if (sx.rank() == 2 && sb.rank() == 1 && sb[0] == sx[1]) {
        channels = sx[1];
        inner = 1;
    } else if (sx.rank() == 4 && sb.rank() == 1 && sb[0] == sx[1]) {
        channels = sx[1];
        inner = sx[2] * sx[3];
    } else {
        throw dim_error("bias_add: shapes " + sx.str() + " and " + sb.str());
    }
    const int outer = sx[0];
    Tensor y = make(sx);
    {
        const auto& xv = at(x.id).val;
        const auto& bv = at(b.id).val;
        auto& yv = at(y.id).val;
        for (int o = 0; o < outer; ++o)
            for (int c = 0; c < channels; ++c) {
                const double bias = bv[size_t(c)];
                const size_t base = size_t((o * channels + c) * inner);
                for (int i = 0; i < inner; ++i) yv[base + i] = xv[base + i] + bias;
            }
    }
    Graph* g = this;
    const int ix = x.id, ib = b.id, iy = y.id;
    at(y.id).back = [g, ix, ib, iy, outer, channels, inner] {
        const auto& dy = g->at(iy).grad;
        auto& dx = g->at(ix).grad;
        auto& db = g->at(ib).grad;
        for (int o = 0; o < outer; ++o)
            for (int c = 0; c < channels; ++c) {
                const size_t base = size_t((o * channels + c) * inner);
                double acc = 0.0;
                for (int i = 0; i < inner; ++i) {
                    dx[base + i] += dy[base + i];
                    acc += dy[base + i];
                }
                db[size_t(c)] += acc;
            }
    };
    return y;
}

Tensor Graph::relu(Tensor x) {
    check_same_graph(x);
    Tensor y = make(x.shape());
    {
        const auto& xv = at(x.id).val;
        auto& yv = at(y.id).val;
        for (size_t i = 0; i < yv.size(); ++i) yv[i] = xv[i] > 0.0 ? xv[i] : 0.0;
    }
    Graph* g = this;
    const int ix = x.id, iy = y.id;
    // subgradient at exactly 0 is 0
    at(y.id).back = [g, ix, iy] {
        const auto& dy = g->at(iy).grad;
        const auto& xv = g->at(ix).val;
        auto& dx = g->at(ix).grad;
        for (size_t i = 0; i < dy.size(); ++i)
            if (xv[i] > 0.0) dx[i] += dy[i];
    };
    return y;
}

namespace {

void conv_out_extent(int in, int k, int stride, int pad, int& out, const char* axis) {
    const int span = in + 2 * pad - k;
    if (k > in + 2 * pad)
        throw dim_error(std::string("conv2d: kernel exceeds padded input on ") + axis);
    if (span % stride != 0)
        throw dim_error(std::string("conv2d: non-integral output extent on ") + axis);
    out = span / stride + 1;
    if (out <= 0) throw dim_error(std::string("conv2d: non-positive output extent on ") + axis);
}

} // namespace

Tensor Graph::conv2d(Tensor x, Tensor w, int stride, int pad, ConvImpl impl) {
    check_same_graph(x);
    check_same_graph(w);
    const Shape& sx = x.shape();
    const Shape& sw = w.shape();
    if (sx.rank() != 4 || sw.rank() != 4)
        throw dim_error("conv2d: need 4-d input and kernel, got " + sx.str() + ", " + sw.str());
    if (sx[1] != sw[1])
        throw dim_error("conv2d: channel mismatch " + sx.str() + " vs " + sw.str());
    if (stride < 1 || pad < 0) throw validation_error("conv2d: bad stride/pad");
    const int n = sx[0], cin = sx[1], h = sx[2], win = sx[3];
    const int f = sw[0], kh = sw[2], kw = sw[3];
    int ho = 0, wo = 0;
    conv_out_extent(h, kh, stride, pad, ho, "H");
    conv_out_extent(win, kw, stride, pad, wo, "W");
    Tensor y = make(Shape{n, f, ho, wo});
    macs_per_sample_ += (long long)(kh)*kw * cin * f * ho * wo;

    const auto& xv = at(x.id).val;
    const auto& wv = at(w.id).val;
    auto& yv = at(y.id).val;

    if (impl == ConvImpl::direct) {
        for (int b = 0; b < n; ++b)
            for (int of = 0; of < f; ++of)
                for (int oy = 0; oy < ho; ++oy)
                    for (int ox = 0; ox < wo; ++ox) {
                        double acc = 0.0;
                        for (int c = 0; c < cin; ++c)
                            for (int ky = 0; ky < kh; ++ky) {
                                const int iy = oy * stride - pad + ky;
                                if (iy < 0 || iy >= h) continue;
                                for (int kx = 0; kx < kw; ++kx) {
                                    const int ix = ox * stride - pad + kx;
                                    if (ix < 0 || ix >= win) continue;
                                    acc += xv[size_t(((b * cin + c) * h + iy) * win + ix)] *
                                           wv[size_t(((of * cin + c) * kh + ky) * kw + kx)];
                                }
                            }
                        yv[size_t(((b * f + of) * ho + oy) * wo + ox)] = acc;
                    }
    } else {
        // im2col: rows = n*ho*wo, cols = cin*kh*kw; out_mat = col * W^T
        const int cols = cin * kh * kw;
        const long long rows = (long long)n * ho * wo;
        std::vector<double> col(size_t(rows * cols), 0.0);
        for (int b = 0; b < n; ++b)
            for (int oy = 0; oy < ho; ++oy)
                for (int ox = 0; ox < wo; ++ox) {
                    const size_t r = size_t((b * ho + oy) * wo + ox) * size_t(cols);
                    for (int c = 0; c < cin; ++c)
                        for (int ky = 0; ky < kh; ++ky) {
                            const int iy = oy * stride - pad + ky;
                            if (iy < 0 || iy >= h) continue;
                            const size_t xrow = size_t((b * cin + c) * h + iy) * size_t(win);
                            const size_t crow = r + size_t((c * kh + ky) * kw);
                            for (int kx = 0; kx < kw; ++kx) {
                                const int ix = ox * stride - pad + kx;
                                if (ix < 0 || ix >= win) continue;
                                col[crow + kx] = xv[xrow + ix];
                            }
                        }
                }
        for (long long r = 0; r < rows; ++r) {
            const int b = int(r / (ho * wo));
            const int pix = int(r % (ho * wo));
            for (int of = 0; of < f; ++of) {
                double acc = 0.0;
                const size_t cbase = size_t(r) * size_t(cols);
                const size_t wbase = size_t(of) * size_t(cols);
                for (int cc = 0; cc < cols; ++cc) acc += col[cbase + cc] * wv[wbase + cc];
                yv[size_t((b * f + of) * ho * wo + pix)] = acc;
            }
        }
    }

    Graph* g = this;
    const int ixid = x.id, iwid = w.id, iyid = y.id;
    at(y.id).back = [g, ixid, iwid, iyid, n, cin, h, win, f, kh, kw, stride, pad, ho, wo] {
        const auto& dy = g->at(iyid).grad;
        const auto& xval = g->at(ixid).val;
        const auto& wval = g->at(iwid).val;
        auto& dx = g->at(ixid).grad;
        auto& dw = g->at(iwid).grad;
        for (int b = 0; b < n; ++b)
            for (int of = 0; of < f; ++of)
                for (int oy = 0; oy < ho; ++oy)
                    for (int ox = 0; ox < wo; ++ox) {
                        const double d = dy[size_t(((b * f + of) * ho + oy) * wo + ox)];
                        if (d == 0.0) continue;
                        for (int c = 0; c < cin; ++c)
                            for (int ky = 0; ky < kh; ++ky) {
                                const int iy = oy * stride - pad + ky;
                                if (iy < 0 || iy >= h) continue;
                                for (int kx = 0; kx < kw; ++kx) {
                                    const int ix = ox * stride - pad + kx;
                                    if (ix < 0 || ix >= win) continue;
                                    const size_t xi = size_t(((b * cin + c) * h + iy) * win + ix);
                                    const size_t wi =
                                        size_t(((of * cin + c) * kh + ky) * kw + kx);
                                    dx[xi] += d * wval[wi];
                                    dw[wi] += d * xval[xi];
                                }
                            }
                    }
    };
    return y;
}

Tensor Graph::avg_pool2d(Tensor x, int k, int stride, int pad) {
    check_same_graph(x);
    const Shape& sx = x.shape();
    if (sx.rank() != 4) throw dim_error("avg_pool2d: need 4-d input, got " + sx.str());
    if (k < 1 || stride < 1 || pad < 0) throw validation_error("avg_pool2d: bad k/stride/pad");
    const int n = sx[0], c = sx[1], h = sx[2], w = sx[3];
    int ho = 0, wo = 0;
    conv_out_extent(h, k, stride, pad, ho, "H");
    conv_out_extent(w, k, stride, pad, wo, "W");
    Tensor y = make(Shape{n, c, ho, wo});
    const double inv = 1.0 / double(k * k); // padded positions count in the divisor
    {
        const auto& xv = at(x.id).val;
        auto& yv = at(y.id).val;
        for (int b = 0; b < n; ++b)
            for (int ch = 0; ch < c; ++ch)
                for (int oy = 0; oy < ho; ++oy)
                    for (int ox = 0; ox < wo; ++ox) {
                        double acc = 0.0;
                        for (int ky = 0; ky < k; ++ky) {
                            const int iy = oy * stride - pad + ky;
                            if (iy < 0 || iy >= h) continue;
                            for (int kx = 0; kx < k; ++kx) {
                                const int ix = ox * stride - pad + kx;
                                if (ix < 0 || ix >= w) continue;
                                acc += xv[size_t(((b * c + ch) * h + iy) * w + ix)];
                            }
                        }
                        yv[size_t(((b * c + ch) * ho + oy) * wo + ox)] = acc * inv;
                    }
    }
    Graph* g = this;
    const int ix = x.id, iy = y.id;
    at(y.id).back = [g, ix, iy, n, c, h, w, k, stride, pad, ho, wo, inv] {
        const auto& dy = g->at(iy).grad;
        auto& dx = g->at(ix).grad;
        for (int b = 0; b < n; ++b)
            for (int ch = 0; ch < c; ++ch)
                for (int oy = 0; oy < ho; ++oy)
                    for (int ox = 0; ox < wo; ++ox) {
                        const double d =
                            dy[size_t(((b * c + ch) * ho + oy) * wo + ox)] * inv;
                        if (d == 0.0) continue;
                        for (int ky = 0; ky < k; ++ky) {
                            const int iyy = oy * stride - pad + ky;
                            if (iyy < 0 || iyy >= h) continue;
                            for (int kx = 0; kx < k; ++kx) {
                                const int ixx = ox * stride - pad + kx;
                                if (ixx < 0 || ixx >= w) continue;
                                dx[size_t(((b * c + ch) * h + iyy) * w + ixx)] += d;
                            }
                        }
                    }
    };
    return y;
}

Tensor Graph::global_avg_pool(Tensor x) {
    check_same_graph(x);
    const Shape& sx = x.shape();
    if (sx.rank() != 4) throw dim_error("global_avg_pool: need 4-d input, got " + sx.str());
    const int n = sx[0], c = sx[1], hw = sx[2] * sx[3];
    Tensor y = make(Shape{n, c});
    const double inv = 1.0 / double(hw);
    {
        const auto& xv = at(x.id).val;
        auto& yv = at(y.id).val;
        for (int b = 0; b < n; ++b)
            for (int ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                const size_t base = size_t(b * c + ch) * size_t(hw);
                for (int i = 0; i < hw; ++i) acc += xv[base + i];
                yv[size_t(b * c + ch)] = acc * inv;
            }
    }
    Graph* g = this;
    const int ix = x.id, iy = y.id;
    at(y.id).back = [g, ix, iy, n, c, hw, inv] {
        const auto& dy = g->at(iy).grad;
        auto& dx = g->at(ix).grad;
        for (int b = 0; b < n; ++b)
            for (int ch = 0; ch < c; ++ch) {
                const double d = dy[size_t(b * c + ch)] * inv;
                const size_t base = size_t(b * c + ch) * size_t(hw);
                for (int i = 0; i < hw; ++i) dx[base + i] += d;
            }
    };
    return y;
}

Tensor Graph::flatten(Tensor x) {
    check_same_graph(x);
    const Shape& sx = x.shape();
    if (sx.rank() < 2) throw dim_error("flatten: need rank >= 2, got " + sx.str());
    const int n = sx[0];
    const int rest = sx.numel() / n;
    Tensor y = make(Shape{n, rest});
    at(y.id).val = at(x.id).val;
    Graph* g = this;
    const int ix = x.id, iy = y.id;
    at(y.id).back = [g, ix, iy] {
        const auto& dy = g->at(iy).grad;
        auto& dx = g->at(ix).grad;
        for (size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
    };
    return y;
}

Tensor Graph::sum(Tensor x) {
    check_same_graph(x);
    Tensor y = make(Shape{1});
    {
        const auto& xv = at(x.id).val;
        double acc = 0.0;
        for (const double v : xv) acc += v;
        at(y.id).val[0] = acc;
    }
    Graph* g = this;
    const int ix = x.id, iy = y.id;
    at(y.id).back = [g, ix, iy] {
        const double d = g->at(iy).grad[0];
        auto& dx = g->at(ix).grad;
        for (auto& v : dx) v += d;
    };
    return y;
}

Tensor Graph::cross_entropy(Tensor logits, const std::vector<int>& labels) {
    check_same_graph(logits);
    const Shape& sl = logits.shape();
    if (sl.rank() != 2) throw dim_error("cross_entropy: logits must be 2-d, got " + sl.str());
    const int n = sl[0], k = sl[1];
    if (int(labels.size()) != n)
        throw dim_error("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                        std::to_string(n) + " rows");
    for (const int lab : labels)
        if (lab < 0 || lab >= k)
            throw validation_error("cross_entropy: label " + std::to_string(lab) +
                                   " outside [0, " + std::to_string(k) + ")");
    Tensor y = make(Shape{1});
    // keep softmax rows for the backward pass
    auto softmax = std::make_shared<std::vector<double>>(size_t(n) * size_t(k));
    {
        const auto& lv = at(logits.id).val;
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            const size_t base = size_t(i) * size_t(k);
            double mx = lv[base];
            for (int j = 1; j < k; ++j) mx = std::max(mx, lv[base + j]);
            double z = 0.0;
            for (int j = 0; j < k; ++j) z += std::exp(lv[base + j] - mx);
            const double lse = mx + std::log(z);
            for (int j = 0; j < k; ++j) (*softmax)[base + j] = std::exp(lv[base + j] - lse);
            total += lse - lv[base + size_t(labels[size_t(i)])];
        }
        at(y.id).val[0] = total / double(n);
    }
    Graph* g = this;
    const int il = logits.id, iy = y.id;
    auto labs = labels;
    at(y.id).back = [g, il, iy, n, k, softmax, labs] {
        const double d = g->at(iy).grad[0] / double(n);
        auto& dl = g->at(il).grad;
        for (int i = 0; i < n; ++i) {
            const size_t base = size_t(i) * size_t(k);
            for (int j = 0; j < k; ++j) {
                double v = (*softmax)[base + j];
                if (j == labs[size_t(i)]) v -= 1.0;
                dl[base + j] += d * v;
            }
        }
    };
    return y;
}

Tensor Graph::mse_loss(Tensor pred, Tensor target) {
    check_same_graph(pred);
    check_same_graph(target);
    if (!(pred.shape() == target.shape()))
        throw dim_error("mse_loss: shape mismatch " + pred.shape().str() + " vs " +
                        target.shape().str());
    Tensor y = make(Shape{1});
    {
        const auto& pv = at(pred.id).val;
        const auto& tv = at(target.id).val;
        double acc = 0.0;
        for (size_t i = 0; i < pv.size(); ++i) {
            const double r = pv[i] - tv[i];
            acc += 0.5 * r * r;
        }
        at(y.id).val[0] = acc;
    }
    Graph* g = this;
    const int ip = pred.id, it = target.id, iy = y.id;
    at(y.id).back = [g, ip, it, iy] {
        const double d = g->at(iy).grad[0];
        const auto& pv = g->at(ip).val;
        const auto& tv = g->at(it).val;
        auto& dp = g->at(ip).grad;
        auto& dt = g->at(it).grad;
        for (size_t i = 0; i < pv.size(); ++i) {
            const double r = pv[i] - tv[i];
            dp[i] += d * r;
            dt[i] -= d * r;
        }
    };
    return y;
}

void Graph::backward(Tensor loss) {
    check_same_graph(loss);
    if (at(loss.id).shape.numel() != 1)
        throw validation_error("backward: loss must be scalar, got " +
                               at(loss.id).shape.str());
    // Node gradients are scratch for one pass; Param gradients persist, so
    // repeated calls behave like gradient accumulation over the leaves.
    for (auto& n : nodes_) std::fill(n.grad.begin(), n.grad.end(), 0.0);
    at(loss.id).grad[0] = 1.0;
    backward_visits_ = 0;
    for (int i = loss.id; i >= 0; --i) {
        ++backward_visits_;
        if (at(i).back) at(i).back();
    }
}

GradCheckReport grad_check(ParamSet& params, const std::function<Tensor(Graph&)>& build,
                           double h) {
    long long total = 0;
    for (const auto& p : params.items)
        if (p->trainable) total += p->numel();
    if (total >= 10000)
        throw validation_error("grad_check: " + std::to_string(total) +
                               " parameters exceed the desk-scale limit of 10^4");

    params.zero_grad();
    {
        Graph g;
        Tensor loss = build(g);
        g.backward(loss);
    }
    std::vector<std::vector<double>> analytic;
    for (const auto& p : params.items) analytic.push_back(p->grad);

    GradCheckReport report;
    for (size_t pi = 0; pi < params.items.size(); ++pi) {
        Param& p = *params.items[pi];
        if (!p.trainable) continue;
        GradCheckEntry entry;
        entry.param = p.name;
        for (int i = 0; i < p.numel(); ++i) {
            const double keep = p.value[size_t(i)];
            p.value[size_t(i)] = keep + h;
            double up, down;
            {
                Graph g;
                up = build(g).scalar();
            }
            p.value[size_t(i)] = keep - h;
            {
                Graph g;
                down = build(g).scalar();
            }
            p.value[size_t(i)] = keep;
            const double numeric = (up - down) / (2.0 * h);
            const double a = analytic[pi][size_t(i)];
            const double rel =
                std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
            entry.max_rel_err = std::max(entry.max_rel_err, rel);
        }
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.entries.push_back(std::move(entry));
    }
    return report;
}

} // namespace zico
