#include "zico/theory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "zico/errors.hpp"
#include "zico/numerics.hpp"
#include "zico/util.hpp"

namespace zico {

namespace {

void normalize_row(std::vector<double>& v, size_t off, size_t n) {
    double sq = 0.0;
    for (size_t j = 0; j < n; ++j) sq += v[off + j] * v[off + j];
    const double norm = std::sqrt(sq);
    if (!(norm > 0.0))
        throw numeric_error("make_unit_data: zero-norm vector during data synthesis");
    for (size_t j = 0; j < n; ++j) v[off + j] /= norm;
}

// h_i = (1/sqrt(m)) sum_r s_r relu(w_r . x_i) over the given rows
double half_sq_loss(const double* X, const double* y, int rows, int d,
                    const std::vector<double>& W, const std::vector<double>& s, int m) {
    const double inv_sqrt_m = 1.0 / std::sqrt(double(m));
    double loss = 0.0;
    for (int i = 0; i < rows; ++i) {
        const double* x = X + size_t(i) * size_t(d);
        double h = 0.0;
        for (int r = 0; r < m; ++r) {
            const double* w = W.data() + size_t(r) * size_t(d);
            double pre = 0.0;
            for (int j = 0; j < d; ++j) pre += w[j] * x[j];
            if (pre > 0.0) h += s[r] * pre;
        }
        const double resid = h * inv_sqrt_m - y[i];
        loss += 0.5 * resid * resid;
    }
    return loss;
}

// First-layer gradient of the half-squared loss over one batch. The ReLU
// subgradient at exactly zero is taken as zero.
void batch_grad(const double* X, const double* y, int rows, int d,
                const std::vector<double>& W, const std::vector<double>& s, int m,
                std::vector<double>& g) {
    const double inv_sqrt_m = 1.0 / std::sqrt(double(m));
    g.assign(size_t(m) * size_t(d), 0.0);
    std::vector<double> pre(m);
    for (int i = 0; i < rows; ++i) {
        const double* x = X + size_t(i) * size_t(d);
        double h = 0.0;
        for (int r = 0; r < m; ++r) {
            const double* w = W.data() + size_t(r) * size_t(d);
            double p = 0.0;
            for (int j = 0; j < d; ++j) p += w[j] * x[j];
            pre[r] = p;
            if (p > 0.0) h += s[r] * p;
        }
        const double resid = h * inv_sqrt_m - y[i];
        for (int r = 0; r < m; ++r) {
            if (pre[r] <= 0.0) continue;
            const double coeff = resid * s[r] * inv_sqrt_m;
            double* gr = g.data() + size_t(r) * size_t(d);
            for (int j = 0; j < d; ++j) gr[j] += coeff * x[j];
        }
    }
}

} // namespace

Dataset make_unit_data(int M, int d, double coherence, Rng& rng) {
    if (M < 1 || d < 1) throw validation_error("make_unit_data: M and d must be positive");
    if (coherence < 0.0 || coherence >= 1.0)
        throw validation_error("make_unit_data: coherence must lie in [0, 1)");

    std::vector<double> base(d);
    for (int j = 0; j < d; ++j) base[j] = rng.normal();
    normalize_row(base, 0, size_t(d));

    Dataset ds;
    ds.M = M;
    ds.d = d;
    ds.width = d;
    ds.samples.resize(size_t(M) * size_t(d));
    const double wb = std::sqrt(coherence);
    const double wn = std::sqrt(1.0 - coherence);
    const double noise_scale = 1.0 / std::sqrt(double(d));
    for (int i = 0; i < M; ++i) {
        const size_t off = size_t(i) * size_t(d);
        for (int j = 0; j < d; ++j)
            ds.samples[off + j] = wb * base[j] + wn * noise_scale * rng.normal();
        normalize_row(ds.samples, off, size_t(d));
    }
    ds.targets.resize(M);
    for (int i = 0; i < M; ++i) ds.targets[i] = rng.uniform();
    ds.normalized = true;
    ds.label_bound = 1.0;
    return ds;
}

GramMatrix gram_matrix(const std::vector<double>& X, int M, int d, const std::vector<double>& W,
                       int m) {
    if (M < 1 || d < 1) throw validation_error("gram_matrix: M and d must be positive");
    if (m < 1) throw validation_error("gram_matrix: m must be positive");
    if (X.size() != size_t(M) * size_t(d))
        throw validation_error("gram_matrix: X size does not match M x d");
    if (W.size() != size_t(m) * size_t(d))
        throw validation_error("gram_matrix: W size does not match m x d");
    for (int i = 0; i < M; ++i) {
        double sq = 0.0;
        for (int j = 0; j < d; ++j) sq += X[size_t(i) * d + j] * X[size_t(i) * d + j];
        if (std::fabs(sq - 1.0) > 1e-9)
            throw validation_error("gram_matrix: row " + std::to_string(i) +
                                   " of X is not unit-norm");
    }

    // The activation indicator here uses >= at zero; on a zero preactivation
    // the pattern still counts even though the training subgradient is zero.
    std::vector<unsigned char> act(size_t(M) * size_t(m));
    for (int i = 0; i < M; ++i) {
        const double* x = X.data() + size_t(i) * size_t(d);
        for (int r = 0; r < m; ++r) {
            const double* w = W.data() + size_t(r) * size_t(d);
            double pre = 0.0;
            for (int j = 0; j < d; ++j) pre += w[j] * x[j];
            act[size_t(i) * m + r] = pre >= 0.0 ? 1 : 0;
        }
    }

    GramMatrix gm;
    gm.M = M;
    gm.H.assign(size_t(M) * size_t(M), 0.0);
    for (int i = 0; i < M; ++i) {
        for (int j = 0; j <= i; ++j) {
            int shared = 0;
            for (int r = 0; r < m; ++r) shared += act[size_t(i) * m + r] & act[size_t(j) * m + r];
            double dot = 0.0;
            for (int k = 0; k < d; ++k)
                dot += X[size_t(i) * d + k] * X[size_t(j) * d + k];
            const double h = dot * double(shared) / double(m);
            gm.H[size_t(i) * M + j] = h;
            gm.H[size_t(j) * M + i] = h;
        }
    }
    gm.eigenvalues = sym_eigen(gm.H, M);
    gm.lambda_min = gm.eigenvalues.front();
    gm.lambda_max = gm.eigenvalues.back();
    return gm;
}

ReluTrial run_relu_epoch(const Dataset& data, int train_count, const ReluRunConfig& cfg,
                         Rng& rng) {
    if (data.M < 1 || data.d < 1)
        throw validation_error("run_relu_epoch: dataset is empty");
    if (data.targets.size() != size_t(data.M))
        throw validation_error("run_relu_epoch: dataset lacks regression targets");
    if (train_count < 1 || train_count > data.M)
        throw validation_error("run_relu_epoch: train_count out of range");
    if (cfg.m < 1) throw validation_error("run_relu_epoch: width m must be positive");
    if (cfg.batch_size < 1) throw validation_error("run_relu_epoch: batch_size must be positive");
    if (cfg.eta < 0.0) throw validation_error("run_relu_epoch: eta must be nonnegative");

    const int M = train_count, d = data.d, m = cfg.m;
    const double* X = data.samples.data();
    const double* y = data.targets.data();

    ReluTrial trial;
    trial.M = M;
    trial.d = d;
    trial.m = m;
    trial.eta = cfg.eta;

    std::vector<double> W(size_t(m) * size_t(d));
    for (auto& w : W) w = rng.normal();
    trial.s.resize(m);
    for (int r = 0; r < m; ++r) trial.s[r] = rng.sign();

    const bool steps_mode = cfg.gram == GramRecord::steps;
    const bool want_gram = cfg.gram != GramRecord::none;
    const std::vector<double> train_X(X, X + size_t(M) * size_t(d));

    trial.W.push_back(W);
    if (want_gram) trial.gram.push_back(gram_matrix(train_X, M, d, W, m));
    trial.train_loss0 = half_sq_loss(X, y, M, d, W, trial.s, m);
    if (steps_mode) trial.step_train_loss.push_back(trial.train_loss0);

    std::vector<std::vector<double>> grads;
    std::vector<double> g;
    for (int start = 0; start < M; start += cfg.batch_size) {
        if (cfg.max_steps >= 0 && trial.t >= cfg.max_steps) break;
        const int count = std::min(cfg.batch_size, M - start);
        batch_grad(X + size_t(start) * size_t(d), y + start, count, d, W, trial.s, m, g);
        grads.push_back(g);
        for (size_t k = 0; k < W.size(); ++k) W[k] -= cfg.eta * g[k];
        ++trial.t;
        if (steps_mode) {
            trial.W.push_back(W);
            trial.gram.push_back(gram_matrix(train_X, M, d, W, m));
            trial.step_train_loss.push_back(half_sq_loss(X, y, M, d, W, trial.s, m));
        }
    }
    if (!steps_mode) {
        trial.W.push_back(W);
        if (want_gram) trial.gram.push_back(gram_matrix(train_X, M, d, W, m));
    }

    // Per-weight spread of the batch gradients across the epoch, then the
    // pooled value the stability threshold is stated in.
    trial.grad_sigma.assign(W.size(), 0.0);
    if (trial.t > 0) {
        double var_total = 0.0;
        for (size_t k = 0; k < W.size(); ++k) {
            double mean = 0.0;
            for (const auto& gb : grads) mean += gb[k];
            mean /= double(trial.t);
            double var = 0.0;
            for (const auto& gb : grads) {
                const double dev = gb[k] - mean;
                var += dev * dev;
            }
            var /= double(trial.t);
            trial.grad_sigma[k] = std::sqrt(var);
            var_total += var;
        }
        trial.sigma_pooled = std::sqrt(var_total / double(W.size()));
    }

    trial.train_loss = half_sq_loss(X, y, M, d, W, trial.s, m);
    if (data.M > train_count) {
        const int rest = data.M - train_count;
        trial.test_loss = half_sq_loss(X + size_t(train_count) * size_t(d), y + train_count,
                                       rest, d, W, trial.s, m);
    }
    if (!std::isfinite(trial.train_loss) || !std::isfinite(trial.test_loss))
        throw numeric_error("run_relu_epoch: loss diverged to a non-finite value");
    return trial;
}

double gram_bound_threshold(const ReluTrial& trial, const BoundParams& params) {
    if (!(params.delta > 0.0 && params.delta < 1.0) ||
        !(params.epsilon > 0.0 && params.epsilon < 1.0))
        throw validation_error("gram_bound_threshold: delta and epsilon must lie in (0, 1)");
    if (trial.gram.empty())
        throw validation_error("gram_bound_threshold: trial has no recorded Gram matrix");
    const double phi = chi2_inv_cdf(trial.d, 1.0 - params.epsilon);
    if (trial.t == 0 || trial.sigma_pooled == 0.0)
        return std::numeric_limits<double>::infinity();
    const double lam0 = trial.gram.front().lambda_min;
    const double Md = double(trial.M);
    const double num = lam0 * std::sqrt(std::numbers::pi) * params.delta;
    const double den =
        2.0 * Md * Md * std::sqrt(2.0) * phi * double(trial.t) * trial.sigma_pooled;
    return num / den;
}

GramBoundReport check_gram_bounds(const ReluTrial& trial, const BoundParams& params) {
    if (trial.gram.size() < 2 || trial.W.size() < 2)
        throw validation_error("check_gram_bounds: trial lacks recorded Gram endpoints");
    GramBoundReport rep;
    rep.phi = chi2_inv_cdf(trial.d, 1.0 - params.epsilon);
    rep.threshold = gram_bound_threshold(trial, params);
    if (trial.eta > rep.threshold)
        throw validation_error("check_gram_bounds: eta " + fmt_g17(trial.eta) +
                               " exceeds the precondition threshold " + fmt_g17(rep.threshold));

    const double sqrt_phi = std::sqrt(rep.phi);
    const double Md = double(trial.M);
    const double scale = trial.eta * double(trial.t) * trial.sigma_pooled * sqrt_phi;
    rep.C = scale;
    rep.K = 2.0 * std::sqrt(2.0) * Md * Md * scale / (std::sqrt(std::numbers::pi) * params.delta);

    const std::vector<double>& W0 = trial.W.front();
    const std::vector<double>& Wt = trial.W.back();
    for (int r = 0; r < trial.m; ++r) {
        double sq = 0.0;
        for (int j = 0; j < trial.d; ++j) {
            const size_t k = size_t(r) * size_t(trial.d) + j;
            const double dev = Wt[k] - W0[k];
            sq += dev * dev;
        }
        rep.max_displacement = std::max(rep.max_displacement, std::sqrt(sq));
    }

    const GramMatrix& H0 = trial.gram.front();
    const GramMatrix& Ht = trial.gram.back();
    rep.lambda_min_0 = H0.lambda_min;
    rep.lambda_min_t = Ht.lambda_min;
    rep.lambda_max_0 = H0.lambda_max;
    rep.lambda_max_t = Ht.lambda_max;
    rep.disp_ok = rep.max_displacement <= rep.C;
    rep.lambda_min_ok = rep.lambda_min_t >= rep.lambda_min_0 - rep.K;
    rep.lambda_max_ok = rep.lambda_max_t <= rep.lambda_max_0 + rep.K;
    return rep;
}

DecayReport check_lemma1_decay(const ReluTrial& trial) {
    if (int(trial.gram.size()) != trial.t + 1 ||
        int(trial.step_train_loss.size()) != trial.t + 1)
        throw validation_error("check_lemma1_decay: trial lacks per-step records");
    DecayReport rep;
    rep.steps = trial.t;
    rep.loss0 = trial.step_train_loss.front();
    rep.loss_final = trial.step_train_loss.back();
    for (int k = 1; k <= trial.t; ++k) {
        const double lam = trial.gram[k].lambda_min;
        rep.sum_lambda_min += lam;
        if (trial.step_train_loss[k] <= std::exp(-lam) * trial.step_train_loss[k - 1])
            ++rep.satisfied;
    }
    rep.composed = rep.loss_final <= std::exp(-rep.sum_lambda_min) * rep.loss0;
    return rep;
}

std::vector<ReluCorrRow> run_relu_correlation_population(const ReluCorrConfig& cfg) {
    if (cfg.trials < 1)
        throw validation_error("run_relu_correlation_population: trials must be positive");
    if (cfg.train < 1 || cfg.test < 1)
        throw validation_error("run_relu_correlation_population: split sizes must be positive");
    if (cfg.min_m < 1 || cfg.min_m > cfg.max_m)
        throw validation_error("run_relu_correlation_population: bad width range");

    Rng data_rng(derive_seed(cfg.seed, "relu-corr-data"));
    const Dataset all = make_unit_data(cfg.train + cfg.test, cfg.d, cfg.coherence, data_rng);

    std::vector<ReluCorrRow> rows;
    rows.reserve(cfg.trials);
    for (int i = 0; i < cfg.trials; ++i) {
        const uint64_t ts = derive_seed(cfg.seed, uint64_t(i));
        Rng rng(ts);
        const int m = cfg.min_m + rng.uniform_int(cfg.max_m - cfg.min_m + 1);
        ReluRunConfig rc;
        rc.m = m;
        rc.eta = cfg.eta;
        rc.batch_size = cfg.batch_size;
        const ReluTrial t = run_relu_epoch(all, cfg.train, rc, rng);
        rows.push_back({ts, m, t.sigma_pooled, t.train_loss, t.test_loss});
    }
    return rows;
}

std::vector<GramTrialRow> run_gram_bound_population(const GramBoundConfig& cfg) {
    if (cfg.trials < 1)
        throw validation_error("run_gram_bound_population: trials must be positive");
    if (!(cfg.eta_fraction > 0.0 && cfg.eta_fraction < 1.0))
        throw validation_error("run_gram_bound_population: eta_fraction must lie in (0, 1)");

    const BoundParams bp{cfg.delta, cfg.epsilon};
    std::vector<GramTrialRow> rows;
    rows.reserve(cfg.trials);
    for (int i = 0; i < cfg.trials; ++i) {
        const uint64_t ts = derive_seed(cfg.seed, uint64_t(i));
        Rng rng(ts);
        const Dataset ds = make_unit_data(cfg.M, cfg.d, 0.0, rng);

        // Zero-rate probe measures the gradient spread and initial spectrum
        // without moving the weights; copying the generator replays the same
        // initialization for the real run.
        Rng saved = rng;
        ReluRunConfig probe;
        probe.m = cfg.m;
        probe.eta = 0.0;
        probe.batch_size = cfg.batch_size;
        probe.gram = GramRecord::endpoints;
        const ReluTrial pt = run_relu_epoch(ds, cfg.M, probe, rng);
        const double thr = gram_bound_threshold(pt, bp);

        GramTrialRow row;
        row.seed = ts;
        if (!std::isfinite(thr) || !(thr > 0.0)) {
            row.precondition_failed = true;
            rows.push_back(row);
            continue;
        }
        row.eta = cfg.eta_fraction * thr;

        rng = saved;
        ReluRunConfig real = probe;
        real.eta = row.eta;
        const ReluTrial rt = run_relu_epoch(ds, cfg.M, real, rng);
        try {
            row.report = check_gram_bounds(rt, bp);
        } catch (const validation_error&) {
            // The real run's measured spread can exceed the probe's and push
            // the chosen rate over the line; score it as a failed trial.
            row.precondition_failed = true;
        }
        rows.push_back(row);
    }
    return rows;
}

std::vector<Lemma1Row> run_lemma1_population(const Lemma1Config& cfg) {
    if (cfg.runs < 1) throw validation_error("run_lemma1_population: runs must be positive");
    std::vector<Lemma1Row> rows;
    rows.reserve(cfg.runs);
    for (int i = 0; i < cfg.runs; ++i) {
        const uint64_t ts = derive_seed(cfg.seed, uint64_t(i));
        Rng rng(ts);
        const Dataset ds = make_unit_data(cfg.M, cfg.d, cfg.coherence, rng);
        ReluRunConfig rc;
        rc.m = cfg.m;
        rc.eta = cfg.eta;
        rc.batch_size = cfg.batch_size;
        rc.gram = GramRecord::steps;
        const ReluTrial t = run_relu_epoch(ds, cfg.M, rc, rng);
        rows.push_back({ts, check_lemma1_decay(t)});
    }
    return rows;
}

void write_relu_corr_csv(const std::string& path, const std::vector<ReluCorrRow>& rows) {
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw io_error("write_relu_corr_csv: cannot open " + path);
    std::fputs("seed,m,sigma,train_loss,test_loss\n", f);
    for (const auto& r : rows) {
        std::string line = std::to_string(r.seed) + "," + std::to_string(r.m);
        line += "," + fmt_g17(r.sigma) + "," + fmt_g17(r.train_loss) + "," +
                fmt_g17(r.test_loss) + "\n";
        std::fputs(line.c_str(), f);
    }
    std::fclose(f);
}

void write_gram_csv(const std::string& path, const std::vector<GramTrialRow>& rows) {
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw io_error("write_gram_csv: cannot open " + path);
    std::fputs("seed,eta,threshold,phi,C,K,max_displacement,lambda_min_0,lambda_min_t,"
               "lambda_max_0,lambda_max_t,disp_ok,lambda_min_ok,lambda_max_ok,"
               "precondition_failed\n",
               f);
    for (const auto& r : rows) {
        const GramBoundReport& p = r.report;
        std::string line = std::to_string(r.seed);
        line += "," + fmt_g17(r.eta) + "," + fmt_g17(p.threshold) + "," + fmt_g17(p.phi);
        line += "," + fmt_g17(p.C) + "," + fmt_g17(p.K) + "," + fmt_g17(p.max_displacement);
        line += "," + fmt_g17(p.lambda_min_0) + "," + fmt_g17(p.lambda_min_t);
        line += "," + fmt_g17(p.lambda_max_0) + "," + fmt_g17(p.lambda_max_t);
        line += p.disp_ok ? ",1" : ",0";
        line += p.lambda_min_ok ? ",1" : ",0";
        line += p.lambda_max_ok ? ",1" : ",0";
        line += r.precondition_failed ? ",1\n" : ",0\n";
        std::fputs(line.c_str(), f);
    }
    std::fclose(f);
}

void write_lemma1_csv(const std::string& path, const std::vector<Lemma1Row>& rows) {
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw io_error("write_lemma1_csv: cannot open " + path);
    std::fputs("seed,steps,satisfied,composed,loss0,loss_final,sum_lambda_min\n", f);
    for (const auto& r : rows) {
        const DecayReport& p = r.report;
        std::string line = std::to_string(r.seed);
        line += "," + std::to_string(p.steps) + "," + std::to_string(p.satisfied);
        line += p.composed ? ",1" : ",0";
        line += "," + fmt_g17(p.loss0) + "," + fmt_g17(p.loss_final) + "," +
                fmt_g17(p.sum_lambda_min) + "\n";
        std::fputs(line.c_str(), f);
    }
    std::fclose(f);
}

} // namespace zico
