#include "zico/theory.hpp"

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "zico/errors.hpp"
#include "zico/util.hpp"

namespace zico {

namespace {

void normalize_inplace(std::vector<double>& v, size_t off, size_t n, const char* what) {
    double sq = 0.0;
    for (size_t j = 0; j < n; ++j) sq += v[off + j] * v[off + j];
    const double norm = std::sqrt(sq);
    if (!(norm > 0.0))
        throw numeric_error(std::string(what) + ": zero-norm vector during data synthesis");
    for (size_t j = 0; j < n; ++j) v[off + j] /= norm;
}

} // namespace

Dataset make_corr_data(int M, int d, double c, Rng& rng) {
    if (M < 1 || d < 1) throw validation_error("make_corr_data: M and d must be positive");
    if (c < 0.0 || c >= 1.0) throw validation_error("make_corr_data: coherence must lie in [0, 1)");

    std::vector<double> base(d);
    for (int j = 0; j < d; ++j) base[j] = rng.normal();
    normalize_inplace(base, 0, size_t(d), "make_corr_data");

    Dataset ds;
    ds.M = M;
    ds.d = d;
    ds.width = d;
    ds.samples.resize(size_t(M) * size_t(d));
    const double wb = std::sqrt(c);
    const double wn = std::sqrt(1.0 - c);
    for (int i = 0; i < M; ++i) {
        const size_t off = size_t(i) * size_t(d);
        for (int j = 0; j < d; ++j) ds.samples[off + j] = rng.normal();
        normalize_inplace(ds.samples, off, size_t(d), "make_corr_data");
        for (int j = 0; j < d; ++j) ds.samples[off + j] = wb * base[j] + wn * ds.samples[off + j];
        normalize_inplace(ds.samples, off, size_t(d), "make_corr_data");
    }
    ds.targets.resize(M);
    for (int i = 0; i < M; ++i) ds.targets[i] = rng.uniform();
    ds.normalized = true;
    ds.label_bound = 1.0;
    return ds;
}

LinearTrial run_linear_trial(const Dataset& data, const std::vector<double>& a_init, double eta) {
    if (data.M < 1 || data.d < 1)
        throw validation_error("run_linear_trial: dataset is empty");
    if (!data.normalized)
        throw validation_error("run_linear_trial: dataset rows must be unit-normalized");
    if (data.targets.size() != size_t(data.M))
        throw validation_error("run_linear_trial: dataset lacks regression targets");
    if (int(a_init.size()) != data.d)
        throw validation_error("run_linear_trial: a_init has dimension " +
                               std::to_string(a_init.size()) + ", expected " +
                               std::to_string(data.d));
    if (!(eta > 0.0) || !(eta < 2.0))
        throw validation_error("run_linear_trial: eta must lie in (0, 2)");

    const int M = data.M, d = data.d;
    LinearTrial t;
    t.M = M;
    t.d = d;
    t.eta = eta;
    t.a = a_init;
    t.grads.resize(size_t(M) * size_t(d));
    t.mu.assign(d, 0.0);
    t.sigma.assign(d, 0.0);

    for (int i = 0; i < M; ++i) {
        const double* x = data.row(i);
        double pred = 0.0;
        for (int j = 0; j < d; ++j) pred += x[j] * a_init[j];
        const double resid = pred - data.targets[i];
        t.loss_before += 0.5 * resid * resid;
        const size_t off = size_t(i) * size_t(d);
        for (int j = 0; j < d; ++j) {
            const double g = resid * x[j];
            t.grads[off + j] = g;
            t.G += g * g;
            t.mu[j] += g;
        }
    }
    for (int j = 0; j < d; ++j) t.mu[j] /= double(M);
    for (int j = 0; j < d; ++j) {
        double var = 0.0;
        for (int i = 0; i < M; ++i) {
            const double dev = t.grads[size_t(i) * size_t(d) + j] - t.mu[j];
            var += dev * dev;
        }
        var /= double(M);
        t.sigma[j] = std::sqrt(var);
        t.sum_mu2 += t.mu[j] * t.mu[j];
        t.sum_sigma2 += var;
    }

    t.a_hat = a_init;
    for (int j = 0; j < d; ++j) {
        double total = 0.0;
        for (int i = 0; i < M; ++i) total += t.grads[size_t(i) * size_t(d) + j];
        t.a_hat[j] -= eta * total;
    }
    for (int i = 0; i < M; ++i) {
        const double* x = data.row(i);
        double pred = 0.0;
        for (int j = 0; j < d; ++j) pred += x[j] * t.a_hat[j];
        const double resid = pred - data.targets[i];
        t.loss_after += 0.5 * resid * resid;
    }

    const double Md = double(M);
    t.bound_eq5 = t.G / 2.0 - (eta / 2.0) * Md * Md * (2.0 - eta * Md) * t.sum_mu2;
    if (eta == 1.0 / Md) t.bound_eq6 = (Md / 2.0) * t.sum_sigma2;
    return t;
}

bool eq5_holds(const LinearTrial& t) {
    return t.loss_after <= t.bound_eq5 + kBoundRelSlack * std::fabs(t.bound_eq5);
}

bool eq6_holds(const LinearTrial& t) {
    if (!t.bound_eq6)
        throw validation_error("eq6_holds: trial was not run at eta = 1/M");
    return t.loss_after <= *t.bound_eq6 + kBoundRelSlack * std::fabs(*t.bound_eq6);
}

std::vector<LinearTrialRow> run_linear_bound_population(const LinearBoundConfig& cfg) {
    if (cfg.trials < 1)
        throw validation_error("run_linear_bound_population: trials must be positive");
    std::vector<LinearTrialRow> rows;
    rows.reserve(cfg.trials);
    for (int i = 0; i < cfg.trials; ++i) {
        const uint64_t ts = derive_seed(cfg.seed, uint64_t(i));
        Rng rng(ts);
        const double c = rng.uniform(0.0, cfg.max_coherence);
        const int M = cfg.min_M + rng.uniform_int(cfg.max_M - cfg.min_M + 1);
        const int d = cfg.min_d + rng.uniform_int(cfg.max_d - cfg.min_d + 1);
        const Dataset ds = make_corr_data(M, d, c, rng);
        std::vector<double> a(d);
        for (int j = 0; j < d; ++j) a[j] = rng.normal();
        const double eta = rng.uniform(cfg.min_eta, cfg.max_eta);
        rows.push_back({ts, c, run_linear_trial(ds, a, eta)});
    }
    return rows;
}

std::vector<LinearTrialRow> run_linear_trend_population(const LinearTrendConfig& cfg) {
    if (cfg.trials < 1)
        throw validation_error("run_linear_trend_population: trials must be positive");
    const double scale = cfg.init_scale / std::sqrt(double(cfg.d));
    std::vector<LinearTrialRow> rows;
    rows.reserve(cfg.trials);
    for (int i = 0; i < cfg.trials; ++i) {
        const uint64_t ts = derive_seed(cfg.seed, uint64_t(i));
        Rng rng(ts);
        const double c = rng.uniform(0.0, cfg.max_coherence);
        const Dataset ds = make_corr_data(cfg.M, cfg.d, c, rng);
        std::vector<double> a(cfg.d);
        for (int j = 0; j < cfg.d; ++j) a[j] = scale * rng.normal();
        rows.push_back({ts, c, run_linear_trial(ds, a, 1.0 / double(cfg.M))});
    }
    return rows;
}

void write_linear_csv(const std::string& path, const std::vector<LinearTrialRow>& rows) {
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw io_error("write_linear_csv: cannot open " + path);
    std::fputs("seed,M,d,coherence,eta,sum_mu2,sum_sigma2,loss_before,loss_after,"
               "bound_eq5,bound_eq6,eq5_ok,eq6_ok\n",
               f);
    for (const auto& r : rows) {
        const LinearTrial& t = r.trial;
        std::string line = std::to_string(r.seed);
        line += "," + std::to_string(t.M) + "," + std::to_string(t.d);
        line += "," + fmt_g17(r.coherence) + "," + fmt_g17(t.eta);
        line += "," + fmt_g17(t.sum_mu2) + "," + fmt_g17(t.sum_sigma2);
        line += "," + fmt_g17(t.loss_before) + "," + fmt_g17(t.loss_after);
        line += "," + fmt_g17(t.bound_eq5);
        line += ",";
        if (t.bound_eq6) line += fmt_g17(*t.bound_eq6);
        line += eq5_holds(t) ? ",1" : ",0";
        if (t.bound_eq6)
            line += eq6_holds(t) ? ",1" : ",0";
        else
            line += ",";
        line += "\n";
        std::fputs(line.c_str(), f);
    }
    std::fclose(f);
}

} // namespace zico
