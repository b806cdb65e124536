#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "zico/dataset.hpp"
#include "zico/rng.hpp"

namespace zico {

// ---------------------------------------------------------------------------
// Single-layer linear regression: one accumulated-gradient step and the two
// closed-form loss bounds, plus the randomized populations the bound and
// trend experiments run over.
// ---------------------------------------------------------------------------

struct LinearTrial {
    int M = 0, d = 0;
    double eta = 0.0;
    std::vector<double> a, a_hat;
    std::vector<double> grads;          // per-sample gradients, M x d row-major
    double G = 0.0;                     // sum of all squared gradient entries
    std::vector<double> mu, sigma;      // per-dim mean / population std of the gradients
    double sum_mu2 = 0.0, sum_sigma2 = 0.0;
    double loss_before = 0.0, loss_after = 0.0;
    double bound_eq5 = 0.0;
    std::optional<double> bound_eq6;    // present when eta == 1/M exactly
};

// Requires unit-normalized rows, regression targets, and eta in (0, 2).
LinearTrial run_linear_trial(const Dataset& data, const std::vector<double>& a_init, double eta);

constexpr double kBoundRelSlack = 1e-9;
bool eq5_holds(const LinearTrial& t);
bool eq6_holds(const LinearTrial& t); // requires bound_eq6

// Rows are sqrt(c)*base + sqrt(1-c)*unit_noise, renormalized, so the
// pairwise cosine concentrates near c; targets are uniform in [0,1).
Dataset make_corr_data(int M, int d, double c, Rng& rng);

struct LinearTrialRow {
    uint64_t seed = 0;
    double coherence = 0.0;
    LinearTrial trial;
};

// Adversarial bound check: fresh geometry, full-scale init and a learning
// rate swept over most of (0, 2) per trial.
struct LinearBoundConfig {
    int trials = 1000;
    uint64_t seed = 0;
    int min_M = 4, max_M = 64;
    int min_d = 8, max_d = 256;
    double max_coherence = 0.95;
    double min_eta = 0.05, max_eta = 1.95;
};
std::vector<LinearTrialRow> run_linear_bound_population(const LinearBoundConfig& cfg);

// Trend population at eta = 1/M: small-scale init keeps residuals dominated
// by the labels, and per-trial coherence varies how strongly the per-sample
// gradients agree, which is exactly what the mu/sigma statistics measure.
struct LinearTrendConfig {
    int trials = 1000;
    uint64_t seed = 0;
    int M = 32, d = 64;
    double max_coherence = 0.95;
    double init_scale = 0.1;            // a ~ init_scale / sqrt(d) * N(0, I)
};
std::vector<LinearTrialRow> run_linear_trend_population(const LinearTrendConfig& cfg);

void write_linear_csv(const std::string& path, const std::vector<LinearTrialRow>& rows);

// ---------------------------------------------------------------------------
// Two-layer ReLU network h(x) = (1/sqrt(m)) sum_r s_r relu(w_r.x). One epoch
// of first-layer gradient descent over a fixed contiguous batch partition,
// with the activation-pattern Gram matrix and its spectrum.
// ---------------------------------------------------------------------------

struct GramMatrix {
    int M = 0;
    std::vector<double> H;              // M x M row-major
    std::vector<double> eigenvalues;    // ascending
    double lambda_min = 0.0, lambda_max = 0.0;
};

// H_ij = (1/m) x_i.x_j |{r : x_i.w_r >= 0 and x_j.w_r >= 0}|. Rows of X
// must be unit-norm. The activation indicator uses >= at zero.
GramMatrix gram_matrix(const std::vector<double>& X, int M, int d, const std::vector<double>& W,
                       int m);

enum class GramRecord { none, endpoints, steps };

struct ReluTrial {
    int M = 0, d = 0, m = 0, t = 0;     // train rows, input dim, width, update steps
    double eta = 0.0;
    std::vector<double> s;              // frozen +-1 output weights
    std::vector<std::vector<double>> W; // weight snapshots: {W(0), W(t)} or full history
    std::vector<double> grad_sigma;     // per-weight population std of grad across batches
    double sigma_pooled = 0.0;          // sqrt(mean per-weight grad variance)
    double train_loss0 = 0.0, train_loss = 0.0, test_loss = 0.0;
    std::vector<double> step_train_loss; // L(0..t) on the train split (steps mode)
    std::vector<GramMatrix> gram;        // none: empty; endpoints: {H(0),H(t)}; steps: H(0..t)
};

struct ReluRunConfig {
    int m = 64;
    double eta = 0.01;
    int batch_size = 4;
    int max_steps = -1;                 // cap on update steps, -1 = full epoch
    GramRecord gram = GramRecord::none;
};

// Trains on the first train_count rows and reports test loss on the rest
// (0 when nothing is held out). W and s are drawn from rng, so copying the
// generator lets a caller replay the same initialization.
ReluTrial run_relu_epoch(const Dataset& data, int train_count, const ReluRunConfig& cfg,
                         Rng& rng);

// Like make_corr_data but with N(0, I/d) noise before renormalizing,
// matching the geometry the ReLU experiments were calibrated on.
Dataset make_unit_data(int M, int d, double coherence, Rng& rng);

struct BoundParams {
    double delta = 0.1;
    double epsilon = 0.1;
};

struct GramBoundReport {
    double phi = 0.0;                   // chi-square quantile at 1 - epsilon, d dof
    double threshold = 0.0;             // learning-rate ceiling of the precondition
    double C = 0.0;                     // displacement radius
    double K = 0.0;                     // eigenvalue perturbation radius
    double max_displacement = 0.0;
    double lambda_min_0 = 0.0, lambda_min_t = 0.0;
    double lambda_max_0 = 0.0, lambda_max_t = 0.0;
    bool disp_ok = false, lambda_min_ok = false, lambda_max_ok = false;
};

// The learning-rate ceiling lambda_min(H(0)) sqrt(pi) delta /
// (2 M^2 sqrt(2) phi t sigma); infinite when t = 0 or sigma = 0.
double gram_bound_threshold(const ReluTrial& trial, const BoundParams& params);

// Checks the weight-displacement radius and both eigenvalue perturbation
// bounds on a trial with recorded Gram endpoints. Throws validation_error
// when the trial's eta exceeds the threshold (the message reports it).
GramBoundReport check_gram_bounds(const ReluTrial& trial, const BoundParams& params);

struct DecayReport {
    int steps = 0;
    int satisfied = 0;                  // per-step factor-decay checks that held
    bool composed = false;              // product form over the whole epoch
    double loss0 = 0.0, loss_final = 0.0;
    double sum_lambda_min = 0.0;
};

// Per-step check of L(k) <= exp(-lambda_min(H(k))) L(k-1) plus the composed
// bound. Requires a trial recorded with GramRecord::steps. Informative
// only: the width regime that makes these tight is far beyond desk scale.
DecayReport check_lemma1_decay(const ReluTrial& trial);

// ---------------------------------------------------------------------------
// Frozen trial populations.
// ---------------------------------------------------------------------------

struct ReluCorrConfig {
    int trials = 200;
    uint64_t seed = 0;
    int train = 256, test = 64, d = 16;
    double coherence = 0.3;
    int batch_size = 32;
    double eta = 0.01;
    int min_m = 16, max_m = 128;
};

struct ReluCorrRow {
    uint64_t seed = 0;
    int m = 0;
    double sigma = 0.0;
    double train_loss = 0.0, test_loss = 0.0;
};

std::vector<ReluCorrRow> run_relu_correlation_population(const ReluCorrConfig& cfg);
void write_relu_corr_csv(const std::string& path, const std::vector<ReluCorrRow>& rows);

struct GramBoundConfig {
    int trials = 200;
    uint64_t seed = 0;
    int M = 16, m = 64, d = 16;
    int batch_size = 4;
    double delta = 0.1, epsilon = 0.1;
    double eta_fraction = 0.5;          // chosen eta = fraction * probe threshold
};

struct GramTrialRow {
    uint64_t seed = 0;
    double eta = 0.0;
    GramBoundReport report;
    bool precondition_failed = false;   // real-run sigma pushed eta over the threshold
};

std::vector<GramTrialRow> run_gram_bound_population(const GramBoundConfig& cfg);
void write_gram_csv(const std::string& path, const std::vector<GramTrialRow>& rows);

struct Lemma1Config {
    int runs = 8;
    uint64_t seed = 0;
    int M = 8, m = 256, d = 8;
    int batch_size = 1;
    double eta = 1.5;  // large enough that the epoch-level decay regime shows
    double coherence = 0.0;
};

struct Lemma1Row {
    uint64_t seed = 0;
    DecayReport report;
};

std::vector<Lemma1Row> run_lemma1_population(const Lemma1Config& cfg);
void write_lemma1_csv(const std::string& path, const std::vector<Lemma1Row>& rows);

} // namespace zico
