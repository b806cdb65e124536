#include <cmath>
#include <vector>

#include "doctest.h"
#include "zico/errors.hpp"
#include "zico/rng.hpp"
#include "zico/tensor.hpp"

using namespace zico;

TEST_CASE("matmul hand case and identity") {
    Graph g;
    const Tensor a = g.input(Shape{2, 2}, {1, 2, 3, 4});
    const Tensor b = g.input(Shape{2, 1}, {1, 1});
    const Tensor c = g.matmul(a, b);
    CHECK(c.shape() == Shape{2, 1});
    CHECK(c.val()[0] == 3.0);
    CHECK(c.val()[1] == 7.0);

    const Tensor eye = g.input(Shape{2, 2}, {1, 0, 0, 1});
    const Tensor same = g.matmul(a, eye);
    CHECK(same.val() == a.val());
}

TEST_CASE("matmul backward distributes row sums of the right factor") {
    Graph g;
    const Tensor a = g.input(Shape{2, 3}, {1, 2, 3, 4, 5, 6});
    const Tensor ones = g.constant(Shape{3, 4}, 1.0);
    const Tensor loss = g.sum(g.matmul(a, ones));
    g.backward(loss);
    for (const double v : a.grad()) CHECK(v == 4.0);
}

TEST_CASE("matmul shape mismatch throws") {
    Graph g;
    const Tensor a = g.input(Shape{2, 3}, std::vector<double>(6, 1.0));
    const Tensor b = g.input(Shape{2, 3}, std::vector<double>(6, 1.0));
    CHECK_THROWS_AS(g.matmul(a, b), dim_error);
}

TEST_CASE("conv2d hand case: diagonal 2x2 kernel picks corners") {
    Graph g;
    const Tensor x = g.input(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
    const Tensor w = g.input(Shape{1, 1, 2, 2}, {1, 0, 0, 1});
    const Tensor y = g.conv2d(x, w, 1, 0);
    CHECK(y.shape() == Shape{1, 1, 1, 1});
    CHECK(y.val()[0] == 5.0);
}

TEST_CASE("conv2d 1x1 unit kernel is the identity") {
    Graph g;
    const std::vector<double> vals = {0.5, -1.5, 2.0, 3.5, 0.0, 1.0, -2.0, 4.0};
    const Tensor x = g.input(Shape{1, 2, 2, 2}, vals);
    const Tensor w = g.input(Shape{2, 2, 1, 1}, {1, 0, 0, 1});
    const Tensor y = g.conv2d(x, w, 1, 0);
    CHECK(y.val() == vals);
}

TEST_CASE("conv2d direct and im2col paths agree") {
    Rng rng(17);
    std::vector<double> xv(size_t(2 * 3 * 5 * 5)), wv(size_t(4 * 3 * 3 * 3));
    for (auto& v : xv) v = rng.normal();
    for (auto& v : wv) v = rng.normal();
    Graph g;
    const Tensor x = g.input(Shape{2, 3, 5, 5}, xv);
    const Tensor w = g.input(Shape{4, 3, 3, 3}, wv);
    const Tensor a = g.conv2d(x, w, 2, 1, ConvImpl::direct);
    const Tensor b = g.conv2d(x, w, 2, 1, ConvImpl::im2col);
    REQUIRE(a.shape() == b.shape());
    for (size_t i = 0; i < a.val().size(); ++i)
        CHECK(a.val()[i] == doctest::Approx(b.val()[i]).epsilon(1e-12));
}

TEST_CASE("conv2d rejects non-integral and oversized extents") {
    Graph g;
    const Tensor x = g.input(Shape{1, 1, 4, 4}, std::vector<double>(16, 1.0));
    const Tensor w3 = g.input(Shape{1, 1, 3, 3}, std::vector<double>(9, 1.0));
    CHECK_THROWS_AS(g.conv2d(x, w3, 2, 0), dim_error); // (4-3)/2 not integral
    const Tensor w5 = g.input(Shape{1, 1, 5, 5}, std::vector<double>(25, 1.0));
    CHECK_THROWS_AS(g.conv2d(x, w5, 1, 0), dim_error); // kernel exceeds input
}

TEST_CASE("conv2d kernel gradient matches finite differences") {
    Rng rng(23);
    ParamSet params;
    auto w = params.add("w", 1, Shape{2, 1, 2, 2}, 4);
    for (auto& v : w->value) v = rng.normal();
    std::vector<double> xv(size_t(1 * 1 * 4 * 4));
    for (auto& v : xv) v = rng.normal();

    const auto report = grad_check(params, [&](Graph& g) {
        const Tensor x = g.input(Shape{1, 1, 4, 4}, xv);
        return g.sum(g.conv2d(x, g.leaf(w), 1, 1));
    });
    REQUIRE(report.entries.size() == 1);
    CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("relu forward clamps negatives and zero") {
    Graph g;
    const Tensor x = g.input(Shape{3}, {-1, 0, 2});
    const Tensor y = g.relu(x);
    CHECK(y.val() == std::vector<double>{0, 0, 2});

    const Tensor z = g.relu(y);
    CHECK(z.val() == y.val()); // idempotent
}

TEST_CASE("relu backward is 1 above zero, 0 below and exactly at zero") {
    Graph g;
    const Tensor x = g.input(Shape{3}, {-1, 0, 2});
    const Tensor loss = g.sum(g.relu(x));
    g.backward(loss);
    CHECK(x.grad() == std::vector<double>{0, 0, 1});
}

TEST_CASE("elementwise and pooling hand cases") {
    Graph g;
    const Tensor a = g.input(Shape{2}, {1, 2});
    const Tensor b = g.input(Shape{2}, {3, 4});
    CHECK(g.add(a, b).val() == std::vector<double>{4, 6});
    CHECK(g.scale(a, 2.5).val() == std::vector<double>{2.5, 5});

    const Tensor img = g.input(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
    const Tensor pooled = g.avg_pool2d(img, 2);
    CHECK(pooled.shape() == Shape{1, 1, 1, 1});
    CHECK(pooled.val()[0] == 2.5);

    const Tensor cmap = g.constant(Shape{2, 3, 4, 4}, 1.25);
    const Tensor gap = g.global_avg_pool(cmap);
    CHECK(gap.shape() == Shape{2, 3});
    for (const double v : gap.val()) CHECK(v == 1.25);

    const Tensor flat = g.flatten(img);
    CHECK(flat.shape() == Shape{1, 4});
    CHECK(flat.val() == img.val());

    const Tensor mismatched = g.input(Shape{3}, {1, 2, 3});
    CHECK_THROWS_AS(g.add(a, mismatched), dim_error);
}

TEST_CASE("bias_add broadcasts over rows and channel maps") {
    Graph g;
    const Tensor x = g.input(Shape{2, 3}, {0, 0, 0, 1, 1, 1});
    const Tensor b = g.input(Shape{3}, {1, 2, 3});
    CHECK(g.bias_add(x, b).val() == std::vector<double>{1, 2, 3, 2, 3, 4});

    const Tensor img = g.input(Shape{1, 2, 2, 2}, std::vector<double>(8, 0.0));
    const Tensor cb = g.input(Shape{2}, {5, -5});
    const auto& v = g.bias_add(img, cb).val();
    for (int i = 0; i < 4; ++i) CHECK(v[size_t(i)] == 5.0);
    for (int i = 4; i < 8; ++i) CHECK(v[size_t(i)] == -5.0);
}

TEST_CASE("cross_entropy at uniform logits is ln K") {
    Graph g;
    const Tensor logits = g.constant(Shape{4, 10}, 0.7);
    const Tensor loss = g.cross_entropy(logits, {0, 3, 7, 9});
    CHECK(loss.scalar() == doctest::Approx(std::log(10.0)).epsilon(1e-15));
}

TEST_CASE("cross_entropy saturates to 0 when the true class dominates") {
    Graph g;
    std::vector<double> lv(3 * 4, 0.0);
    lv[size_t(0 * 4 + 1)] = 30.0;
    lv[size_t(1 * 4 + 2)] = 30.0;
    lv[size_t(2 * 4 + 0)] = 30.0;
    const Tensor logits = g.input(Shape{3, 4}, lv);
    const Tensor loss = g.cross_entropy(logits, {1, 2, 0});
    CHECK(loss.scalar() >= 0.0);
    CHECK(loss.scalar() < 1e-9);
}

TEST_CASE("cross_entropy rejects out-of-range labels") {
    Graph g;
    const Tensor logits = g.constant(Shape{2, 3}, 0.0);
    CHECK_THROWS_AS(g.cross_entropy(logits, {0, 3}), validation_error);
    CHECK_THROWS_AS(g.cross_entropy(logits, {-1, 0}), validation_error);
}

TEST_CASE("cross_entropy gradient matches finite differences") {
    Rng rng(29);
    ParamSet params;
    auto w = params.add("logits", 1, Shape{3, 4}, 4);
    for (auto& v : w->value) v = rng.normal();

    const auto report = grad_check(params, [&](Graph& g) {
        return g.cross_entropy(g.leaf(w), {2, 0, 3});
    });
    CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("mse_loss sums half squared residuals") {
    Graph g;
    const Tensor p = g.input(Shape{2}, {1, 3});
    const Tensor t = g.input(Shape{2}, {0, 3});
    CHECK(g.mse_loss(p, t).scalar() == 0.5);
    CHECK(g.mse_loss(t, t).scalar() == 0.0);

    const Tensor bad = g.input(Shape{3}, {0, 0, 0});
    CHECK_THROWS_AS(g.mse_loss(p, bad), dim_error);
}

TEST_CASE("backward of sum gives all-ones and leaf grads accumulate on repeat") {
    ParamSet params;
    auto p = params.add("p", 0, Shape{4}, 4);
    p->value = {1, -2, 3, -4};

    Graph g;
    const Tensor x = g.leaf(p);
    const Tensor loss = g.sum(g.scale(x, 2.0));
    g.backward(loss);
    CHECK(x.grad() == std::vector<double>{2, 2, 2, 2});
    CHECK(p->grad == std::vector<double>{2, 2, 2, 2});

    // node grads are recomputed per pass, leaf grads add up
    g.backward(loss);
    CHECK(x.grad() == std::vector<double>{2, 2, 2, 2});
    CHECK(p->grad == std::vector<double>{4, 4, 4, 4});

    params.zero_grad();
    CHECK(p->grad == std::vector<double>{0, 0, 0, 0});
}

TEST_CASE("backward of half squared norm reproduces the input") {
    Graph g;
    const Tensor x = g.input(Shape{3}, {0.5, -1.5, 2.0});
    const Tensor zero = g.constant(Shape{3}, 0.0);
    g.backward(g.mse_loss(x, zero));
    CHECK(x.grad() == std::vector<double>{0.5, -1.5, 2.0});
}

TEST_CASE("backward rejects non-scalar loss and visits each node once") {
    Graph g;
    const Tensor x = g.input(Shape{2}, {1, 2});
    CHECK_THROWS_AS(g.backward(x), validation_error);

    const Tensor loss = g.sum(g.scale(g.relu(x), 2.0));
    g.backward(loss);
    CHECK(g.backward_visits() == g.num_nodes());
}

TEST_CASE("kaiming_init draws the configured variance, zero biases") {
    ParamSet params;
    auto w = params.add("w", 1, Shape{100000}, 8);
    auto b = params.add("b", 1, Shape{64}, 8, true);
    kaiming_init(params, 99);

    double sum = 0.0, sum2 = 0.0;
    for (const double v : w->value) {
        sum += v;
        sum2 += v * v;
    }
    const double n = double(w->numel());
    const double var = sum2 / n - (sum / n) * (sum / n);
    CHECK(std::abs(var - 0.25) < 0.25 * 0.05); // target 2/fan_in = 0.25

    for (const double v : b->value) CHECK(v == 0.0);
}

TEST_CASE("kaiming_init is deterministic per seed") {
    ParamSet a, b;
    auto wa = a.add("w", 1, Shape{3, 3}, 3);
    auto wb = b.add("w", 1, Shape{3, 3}, 3);
    kaiming_init(a, 7);
    kaiming_init(b, 7);
    CHECK(wa->value == wb->value);

    kaiming_init(b, 8);
    CHECK(wa->value != wb->value);
}

TEST_CASE("kaiming_init rejects zero fan_in") {
    ParamSet params;
    params.add("w", 1, Shape{2, 2}, 0);
    CHECK_THROWS_AS(kaiming_init(params, 1), validation_error);
}

TEST_CASE("grad_check on a linear model is near machine precision") {
    Rng rng(37);
    ParamSet params;
    auto w = params.add("w", 1, Shape{3, 2}, 3);
    auto b = params.add("b", 1, Shape{2}, 3, true);
    for (auto& v : w->value) v = rng.normal();
    for (auto& v : b->value) v = rng.normal();
    std::vector<double> xv(size_t(4 * 3));
    for (auto& v : xv) v = rng.normal();

    const auto report = grad_check(params, [&](Graph& g) {
        const Tensor x = g.input(Shape{4, 3}, xv);
        return g.cross_entropy(g.bias_add(g.matmul(x, g.leaf(w)), g.leaf(b)), {0, 1, 0, 1});
    });
    CHECK(report.max_rel_err < 1e-8);
}

TEST_CASE("grad_check on a conv relu pool linear stack stays under 1e-5") {
    ParamSet params;
    auto cw = params.add("conv", 1, Shape{3, 2, 3, 3}, 2 * 3 * 3);
    auto lw = params.add("fc", 2, Shape{3, 2}, 3);
    kaiming_init(params, 55);
    Rng rng(56);
    std::vector<double> xv(size_t(2 * 2 * 4 * 4));
    for (auto& v : xv) v = rng.normal();

    const auto report = grad_check(params, [&](Graph& g) {
        const Tensor x = g.input(Shape{2, 2, 4, 4}, xv);
        const Tensor feat = g.global_avg_pool(g.relu(g.conv2d(x, g.leaf(cw), 1, 1)));
        return g.cross_entropy(g.matmul(feat, g.leaf(lw)), {0, 1});
    });
    CHECK(report.max_rel_err < 1e-5);
}

TEST_CASE("grad_check with no parameters returns an empty report") {
    ParamSet params;
    const auto report = grad_check(params, [](Graph& g) {
        return g.sum(g.constant(Shape{2}, 1.0));
    });
    CHECK(report.entries.empty());
    CHECK(report.max_rel_err == 0.0);
}

TEST_CASE("mac counter matches hand counts for conv and matmul") {
    Graph g;
    const Tensor x = g.input(Shape{1, 3, 8, 8}, std::vector<double>(3 * 64, 1.0));
    const Tensor w = g.input(Shape{8, 3, 3, 3}, std::vector<double>(8 * 27, 0.1));
    g.conv2d(x, w, 1, 1);
    CHECK(g.recorded_macs_per_sample() == 13824); // 3*3*3*8*64

    Graph g2;
    const Tensor a = g2.input(Shape{5, 10}, std::vector<double>(50, 1.0));
    const Tensor b = g2.input(Shape{10, 5}, std::vector<double>(50, 1.0));
    g2.matmul(a, b);
    CHECK(g2.recorded_macs_per_sample() == 50); // 10 in, 5 out, per row
}

TEST_CASE("forward ops are deterministic") {
    std::vector<double> xv(size_t(1 * 2 * 4 * 4));
    Rng rng(61);
    for (auto& v : xv) v = rng.normal();
    std::vector<double> wv(size_t(2 * 2 * 3 * 3));
    for (auto& v : wv) v = rng.normal();

    auto run = [&] {
        Graph g;
        const Tensor x = g.input(Shape{1, 2, 4, 4}, xv);
        const Tensor w = g.input(Shape{2, 2, 3, 3}, wv);
        return g.global_avg_pool(g.relu(g.conv2d(x, w, 1, 1))).val();
    };
    CHECK(run() == run());
}
