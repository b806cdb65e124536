#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "zico/errors.hpp"
#include "zico/numerics.hpp"
#include "zico/theory.hpp"

using namespace zico;

namespace {

Dataset regression_rows(std::vector<double> samples, std::vector<double> targets, int d) {
    Dataset ds;
    ds.d = d;
    ds.M = int(samples.size()) / d;
    ds.samples = std::move(samples);
    ds.targets = std::move(targets);
    ds.normalized = true;
    ds.label_bound = 1.0;
    return ds;
}

} // namespace

TEST_CASE("linear trial hand case: x=1, y=0.5, a=1, eta=1 lands on the optimum") {
    const auto ds = regression_rows({1.0}, {0.5}, 1);
    const auto t = run_linear_trial(ds, {1.0}, 1.0);

    // residual 0.5, gradient 0.5, update a_hat = 1 - 0.5 = 0.5
    CHECK(t.grads == std::vector<double>{0.5});
    CHECK(t.a_hat == std::vector<double>{0.5});
    CHECK(t.loss_before == 0.125);
    CHECK(t.loss_after == 0.0);

    // G/2 = 0.125 cancels against the mean term exactly, so the bound is
    // tight here
    CHECK(t.bound_eq5 == 0.0);
    CHECK(eq5_holds(t));

    // eta = 1/M since M = 1, so the variance-form bound exists; one sample
    // means zero variance
    REQUIRE(t.bound_eq6.has_value());
    CHECK(*t.bound_eq6 == 0.0);
    CHECK(eq6_holds(t));
}

TEST_CASE("linear trial at the optimum keeps everything at zero") {
    // rows (1,0) and (0,1), targets equal to a.x, so every gradient is zero
    const auto ds = regression_rows({1, 0, 0, 1}, {0.3, 0.7}, 2);
    const auto t = run_linear_trial(ds, {0.3, 0.7}, 0.7);
    CHECK(t.loss_before == 0.0);
    CHECK(t.loss_after == 0.0);
    CHECK(t.G == 0.0);
    CHECK(t.bound_eq5 == 0.0);
    CHECK(eq5_holds(t));
    CHECK_FALSE(t.bound_eq6.has_value()); // eta != 1/M for M = 2
}

TEST_CASE("linear trial validates its preconditions") {
    const auto ds = regression_rows({1.0}, {0.5}, 1);
    CHECK_THROWS_AS(run_linear_trial(ds, {1.0}, 0.0), validation_error);
    CHECK_THROWS_AS(run_linear_trial(ds, {1.0}, 2.0), validation_error);
    CHECK_THROWS_AS(run_linear_trial(ds, {1.0, 2.0}, 1.0), validation_error);

    auto un = ds;
    un.normalized = false;
    CHECK_THROWS_AS(run_linear_trial(un, {1.0}, 1.0), validation_error);

    auto untargeted = ds;
    untargeted.targets.clear();
    CHECK_THROWS_AS(run_linear_trial(untargeted, {1.0}, 1.0), validation_error);

    // eq6_holds demands the eta = 1/M form
    const auto t = run_linear_trial(ds, {1.0}, 0.5);
    CHECK_FALSE(t.bound_eq6.has_value());
    CHECK_THROWS_AS(eq6_holds(t), validation_error);
}

TEST_CASE("bound_eq6 appears exactly at eta equal to 1/M") {
    Rng rng(3);
    const auto ds = make_corr_data(8, 4, 0.2, rng);
    CHECK(run_linear_trial(ds, std::vector<double>(4, 0.1), 1.0 / 8.0).bound_eq6.has_value());
    CHECK_FALSE(
        run_linear_trial(ds, std::vector<double>(4, 0.1), 1.0 / 8.0 + 1e-6).bound_eq6.has_value());
}

TEST_CASE("make_corr_data emits unit rows with bounded targets") {
    Rng rng(5);
    const auto ds = make_corr_data(16, 8, 0.6, rng);
    CHECK(ds.M == 16);
    CHECK(ds.d == 8);
    CHECK(ds.normalized);
    REQUIRE(ds.targets.size() == 16);
    for (int i = 0; i < ds.M; ++i) {
        double norm2 = 0.0;
        for (int j = 0; j < ds.d; ++j) norm2 += ds.row(i)[j] * ds.row(i)[j];
        CHECK(norm2 == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(ds.targets[size_t(i)] >= 0.0);
        CHECK(ds.targets[size_t(i)] < 1.0);
    }

    // higher coherence pulls rows together
    Rng r1(7), r2(7);
    const auto tight = make_corr_data(12, 8, 0.9, r1);
    const auto loose = make_corr_data(12, 8, 0.0, r2);
    auto mean_cos = [](const Dataset& d) {
        double acc = 0.0;
        int n = 0;
        for (int i = 0; i < d.M; ++i)
            for (int j = i + 1; j < d.M; ++j) {
                double dot = 0.0;
                for (int k = 0; k < d.d; ++k) dot += d.row(i)[k] * d.row(j)[k];
                acc += dot;
                ++n;
            }
        return acc / n;
    };
    CHECK(mean_cos(tight) > mean_cos(loose) + 0.3);
}

TEST_CASE("bound population holds eq5 on every trial") {
    LinearBoundConfig cfg;
    cfg.trials = 150;
    cfg.seed = 11;
    const auto rows = run_linear_bound_population(cfg);
    REQUIRE(rows.size() == 150);
    for (const auto& r : rows) {
        CHECK(eq5_holds(r.trial));
        CHECK_FALSE(r.trial.bound_eq6.has_value()); // random eta never hits 1/M
    }
}

TEST_CASE("trend population holds both bounds and the documented correlations") {
    LinearTrendConfig cfg;
    cfg.trials = 300;
    cfg.seed = 13;
    const auto rows = run_linear_trend_population(cfg);
    REQUIRE(rows.size() == 300);

    std::vector<double> mu2, sig2, losses;
    for (const auto& r : rows) {
        CHECK(eq5_holds(r.trial));
        REQUIRE(r.trial.bound_eq6.has_value());
        CHECK(eq6_holds(r.trial));
        mu2.push_back(r.trial.sum_mu2);
        sig2.push_back(r.trial.sum_sigma2);
        losses.push_back(r.trial.loss_after);
    }
    const auto rho_mu = spearman_rho(mu2, losses);
    const auto rho_sig = spearman_rho(sig2, losses);
    REQUIRE(rho_mu.has_value());
    REQUIRE(rho_sig.has_value());
    CHECK(*rho_mu <= -0.3);
    CHECK(*rho_sig >= 0.3);
}

TEST_CASE("population runs are reproducible per seed") {
    LinearTrendConfig cfg;
    cfg.trials = 20;
    cfg.seed = 17;
    const auto a = run_linear_trend_population(cfg);
    const auto b = run_linear_trend_population(cfg);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].trial.loss_after == b[i].trial.loss_after);
        CHECK(a[i].trial.bound_eq5 == b[i].trial.bound_eq5);
    }
}

TEST_CASE("linear csv writer emits one row per trial with the fixed header") {
    LinearTrendConfig cfg;
    cfg.trials = 3;
    cfg.seed = 19;
    const auto rows = run_linear_trend_population(cfg);
    const std::string path = "/tmp/zico_test_linear.csv";
    write_linear_csv(path, rows);

    std::ifstream in(path);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line ==
          "seed,M,d,coherence,eta,sum_mu2,sum_sigma2,loss_before,loss_after,bound_eq5,bound_eq6,"
          "eq5_ok,eq6_ok");
    int count = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++count;
    CHECK(count == 3);
    std::remove(path.c_str());
}

TEST_CASE("gram matrix hand case with two neurons") {
    // x1 = (1,0), x2 = (s,s) with s = sqrt(2)/2; w1 = (1,1) activates both,
    // w2 = (-1,1) activates only x2
    const double s = std::sqrt(0.5);
    const std::vector<double> X = {1, 0, s, s};
    const std::vector<double> W = {1, 1, -1, 1};
    const auto gm = gram_matrix(X, 2, 2, W, 2);

    CHECK(gm.H[0] == doctest::Approx(0.5).epsilon(1e-15));         // x1: only w1
    CHECK(gm.H[3] == doctest::Approx(1.0).epsilon(1e-15));         // x2: both
    CHECK(gm.H[1] == doctest::Approx(s / 2.0).epsilon(1e-15));     // sqrt(2)/4
    CHECK(gm.H[1] == gm.H[2]);
    CHECK(gm.lambda_min <= gm.lambda_max);

    // trace equals the eigenvalue sum
    double evsum = 0.0;
    for (const double v : gm.eigenvalues) evsum += v;
    CHECK(evsum == doctest::Approx(gm.H[0] + gm.H[3]).epsilon(1e-9));
}

TEST_CASE("gram matrix with every neuron active reduces to the input kernel") {
    Rng rng(23);
    const auto ds = make_unit_data(6, 4, 0.5, rng);
    std::vector<double> W(size_t(3) * 4);
    for (auto& v : W) v = std::fabs(rng.normal()) + 0.5; // positive weights
    // positive rows guarantee activation only for nonnegative inputs, so
    // shift the data too
    std::vector<double> X(ds.samples);
    for (auto& v : X) v = std::fabs(v);
    std::vector<double> norms(6, 0.0);
    for (int i = 0; i < 6; ++i) {
        double n2 = 0.0;
        for (int j = 0; j < 4; ++j) n2 += X[size_t(i * 4 + j)] * X[size_t(i * 4 + j)];
        norms[size_t(i)] = std::sqrt(n2);
        for (int j = 0; j < 4; ++j) X[size_t(i * 4 + j)] /= norms[size_t(i)];
    }

    const auto gm = gram_matrix(X, 6, 4, W, 3);
    for (int i = 0; i < 6; ++i) {
        CHECK(gm.H[size_t(i * 6 + i)] == doctest::Approx(1.0).epsilon(1e-12));
        for (int j = 0; j < 6; ++j) {
            double dot = 0.0;
            for (int k = 0; k < 4; ++k) dot += X[size_t(i * 4 + k)] * X[size_t(j * 4 + k)];
            CHECK(gm.H[size_t(i * 6 + j)] == doctest::Approx(dot).epsilon(1e-12));
        }
    }
}

TEST_CASE("gram matrix demands unit rows and positive sizes") {
    const std::vector<double> X = {2, 0, 0, 1}; // first row norm 2
    const std::vector<double> W = {1, 1};
    CHECK_THROWS_AS(gram_matrix(X, 2, 2, W, 1), validation_error);
    CHECK_THROWS_AS(gram_matrix({1, 0}, 1, 2, W, 0), validation_error);
}

TEST_CASE("gram matrix is PSD with diagonal in the unit interval") {
    Rng rng(29);
    const auto ds = make_unit_data(10, 6, 0.2, rng);
    std::vector<double> W(size_t(16) * 6);
    for (auto& v : W) v = rng.normal();
    const auto gm = gram_matrix(ds.samples, 10, 6, W, 16);
    CHECK(gm.lambda_min >= -1e-10);
    for (int i = 0; i < 10; ++i) {
        CHECK(gm.H[size_t(i * 10 + i)] >= 0.0);
        CHECK(gm.H[size_t(i * 10 + i)] <= 1.0 + 1e-12);
    }
}

TEST_CASE("relu epoch at eta zero leaves the weights and losses alone") {
    Rng rng(31);
    const auto ds = make_unit_data(24, 8, 0.3, rng);
    ReluRunConfig cfg;
    cfg.m = 16;
    cfg.eta = 0.0;
    cfg.batch_size = 4;
    cfg.gram = GramRecord::endpoints;
    Rng run_rng(33);
    const auto trial = run_relu_epoch(ds, 16, cfg, run_rng);

    CHECK(trial.t == 4);
    REQUIRE(trial.W.size() == 2);
    CHECK(trial.W[0] == trial.W[1]);
    CHECK(trial.train_loss == trial.train_loss0);
    REQUIRE(trial.gram.size() == 2);
    CHECK(trial.gram[0].H == trial.gram[1].H);
    CHECK(trial.test_loss > 0.0);
}

TEST_CASE("relu epoch is deterministic when the generator is replayed") {
    Rng data_rng(37);
    const auto ds = make_unit_data(32, 8, 0.3, data_rng);
    ReluRunConfig cfg;
    cfg.m = 32;
    cfg.eta = 0.05;
    cfg.batch_size = 8;

    Rng r1(41);
    Rng r2 = r1;
    const auto a = run_relu_epoch(ds, 24, cfg, r1);
    const auto b = run_relu_epoch(ds, 24, cfg, r2);
    CHECK(a.W.back() == b.W.back());
    CHECK(a.train_loss == b.train_loss);
    CHECK(a.test_loss == b.test_loss);
    CHECK(a.sigma_pooled == b.sigma_pooled);
    CHECK(a.s == b.s);
}

TEST_CASE("relu epoch honors max_steps and records per-step losses") {
    Rng data_rng(43);
    const auto ds = make_unit_data(20, 6, 0.2, data_rng);
    ReluRunConfig cfg;
    cfg.m = 8;
    cfg.eta = 0.02;
    cfg.batch_size = 5;
    cfg.max_steps = 2;
    cfg.gram = GramRecord::steps;
    Rng rng(47);
    const auto trial = run_relu_epoch(ds, 20, cfg, rng);

    CHECK(trial.t == 2);
    CHECK(trial.gram.size() == 3);            // H(0), H(1), H(2)
    CHECK(trial.step_train_loss.size() == 3); // L(0), L(1), L(2)
    CHECK(trial.W.size() == 3);
    CHECK(trial.test_loss == 0.0); // nothing held out
    CHECK(trial.step_train_loss[0] == trial.train_loss0);
    CHECK(trial.step_train_loss.back() == trial.train_loss);
}

TEST_CASE("gram_bound_threshold has the documented edge behavior") {
    Rng data_rng(53);
    const auto ds = make_unit_data(12, 8, 0.1, data_rng);
    ReluRunConfig cfg;
    cfg.m = 16;
    cfg.eta = 0.01;
    cfg.batch_size = 4;
    cfg.max_steps = 0;
    cfg.gram = GramRecord::endpoints;
    Rng rng(59);
    const auto trial = run_relu_epoch(ds, 12, cfg, rng);

    CHECK(trial.t == 0);
    const BoundParams params;
    CHECK(std::isinf(gram_bound_threshold(trial, params)));

    // zero steps also means every bound holds with equality
    const auto report = check_gram_bounds(trial, params);
    CHECK(report.max_displacement == 0.0);
    CHECK(report.disp_ok);
    CHECK(report.lambda_min_ok);
    CHECK(report.lambda_max_ok);
    CHECK(report.lambda_min_0 == report.lambda_min_t);
}

TEST_CASE("check_gram_bounds accepts a tiny learning rate and reports the radii") {
    Rng data_rng(61);
    const auto ds = make_unit_data(12, 8, 0.1, data_rng);
    ReluRunConfig cfg;
    cfg.m = 16;
    cfg.eta = 1e-12;
    cfg.batch_size = 4;
    cfg.gram = GramRecord::endpoints;
    Rng rng(67);
    const auto trial = run_relu_epoch(ds, 12, cfg, rng);

    const auto report = check_gram_bounds(trial, BoundParams{});
    CHECK(report.disp_ok);
    CHECK(report.lambda_min_ok);
    CHECK(report.lambda_max_ok);
    CHECK(report.max_displacement < 1e-9);
    CHECK(report.C > 0.0);
    CHECK(report.K > 0.0);
    CHECK(report.phi == doctest::Approx(chi2_inv_cdf(8, 0.9)).epsilon(1e-12));
}

TEST_CASE("check_gram_bounds rejects a learning rate above the threshold") {
    Rng data_rng(71);
    const auto ds = make_unit_data(12, 8, 0.1, data_rng);
    ReluRunConfig cfg;
    cfg.m = 16;
    cfg.eta = 10.0; // far above any plausible threshold
    cfg.batch_size = 4;
    cfg.gram = GramRecord::endpoints;
    Rng rng(73);
    const auto trial = run_relu_epoch(ds, 12, cfg, rng);

    CHECK_THROWS_AS(check_gram_bounds(trial, BoundParams{}), validation_error);
    try {
        check_gram_bounds(trial, BoundParams{});
    } catch (const validation_error& e) {
        CHECK(std::string(e.what()).find("threshold") != std::string::npos);
    }
}

TEST_CASE("check_gram_bounds needs recorded endpoints") {
    Rng data_rng(79);
    const auto ds = make_unit_data(12, 8, 0.1, data_rng);
    ReluRunConfig cfg;
    cfg.m = 8;
    cfg.eta = 0.001;
    cfg.batch_size = 4;
    Rng rng(83);
    const auto trial = run_relu_epoch(ds, 12, cfg, rng); // GramRecord::none
    CHECK_THROWS_AS(check_gram_bounds(trial, BoundParams{}), validation_error);
}

TEST_CASE("lemma1 decay report has coherent bookkeeping") {
    Rng data_rng(89);
    const auto ds = make_unit_data(8, 8, 0.0, data_rng);
    ReluRunConfig cfg;
    cfg.m = 64;
    cfg.eta = 0.5;
    cfg.batch_size = 1;
    cfg.gram = GramRecord::steps;
    Rng rng(97);
    const auto trial = run_relu_epoch(ds, 8, cfg, rng);

    const auto report = check_lemma1_decay(trial);
    CHECK(report.steps == 8);
    CHECK(report.satisfied >= 0);
    CHECK(report.satisfied <= 8);
    CHECK(report.loss0 == trial.train_loss0);
    CHECK(report.loss_final == trial.train_loss);
    CHECK(report.sum_lambda_min > 0.0);

    // a trial without step records is unusable here
    ReluRunConfig plain = cfg;
    plain.gram = GramRecord::endpoints;
    Rng rng2(97);
    const auto bare = run_relu_epoch(ds, 8, plain, rng2);
    CHECK_THROWS_AS(check_lemma1_decay(bare), validation_error);
}

TEST_CASE("gram bound population satisfies the probability floor") {
    GramBoundConfig cfg;
    cfg.trials = 60;
    cfg.seed = 101;
    const auto rows = run_gram_bound_population(cfg);
    REQUIRE(rows.size() == 60);

    int disp = 0, lmin = 0, lmax = 0, usable = 0;
    for (const auto& r : rows) {
        if (r.precondition_failed) continue;
        ++usable;
        disp += r.report.disp_ok;
        lmin += r.report.lambda_min_ok;
        lmax += r.report.lambda_max_ok;
        CHECK(r.eta > 0.0);
        CHECK(r.eta <= r.report.threshold);
    }
    REQUIRE(usable > 0);
    const double floor = (1 - cfg.delta) * (1 - cfg.epsilon);
    CHECK(double(disp) / usable >= floor);
    CHECK(double(lmin) / usable >= floor);
    CHECK(double(lmax) / usable >= floor);
}

TEST_CASE("relu correlation population trends positive") {
    ReluCorrConfig cfg;
    cfg.trials = 60;
    cfg.seed = 103;
    const auto rows = run_relu_correlation_population(cfg);
    REQUIRE(rows.size() == 60);

    std::vector<double> sigmas, train_losses, test_losses;
    for (const auto& r : rows) {
        CHECK(r.sigma > 0.0);
        sigmas.push_back(r.sigma);
        train_losses.push_back(r.train_loss);
        test_losses.push_back(r.test_loss);
    }
    CHECK(*spearman_rho(sigmas, train_losses) > 0.3);
    CHECK(*spearman_rho(sigmas, test_losses) > 0.3);
}

TEST_CASE("population csv writers produce their documented headers") {
    GramBoundConfig gcfg;
    gcfg.trials = 2;
    gcfg.seed = 107;
    write_gram_csv("/tmp/zico_test_gram.csv", run_gram_bound_population(gcfg));
    std::ifstream gin("/tmp/zico_test_gram.csv");
    std::string line;
    REQUIRE(std::getline(gin, line));
    CHECK(line ==
          "seed,eta,threshold,phi,C,K,max_displacement,lambda_min_0,lambda_min_t,lambda_max_0,"
          "lambda_max_t,disp_ok,lambda_min_ok,lambda_max_ok,precondition_failed");
    std::remove("/tmp/zico_test_gram.csv");

    ReluCorrConfig rcfg;
    rcfg.trials = 2;
    rcfg.seed = 109;
    write_relu_corr_csv("/tmp/zico_test_corr.csv", run_relu_correlation_population(rcfg));
    std::ifstream rin("/tmp/zico_test_corr.csv");
    REQUIRE(std::getline(rin, line));
    CHECK(line == "seed,m,sigma,train_loss,test_loss");
    std::remove("/tmp/zico_test_corr.csv");

    Lemma1Config lcfg;
    lcfg.runs = 2;
    lcfg.seed = 113;
    write_lemma1_csv("/tmp/zico_test_lemma.csv", run_lemma1_population(lcfg));
    std::ifstream lin("/tmp/zico_test_lemma.csv");
    REQUIRE(std::getline(lin, line));
    CHECK(line == "seed,steps,satisfied,composed,loss0,loss_final,sum_lambda_min");
    std::remove("/tmp/zico_test_lemma.csv");
}
