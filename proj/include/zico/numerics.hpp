#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace zico {

// Symmetric eigendecomposition via cyclic Jacobi sweeps. `a` is row-major
// n x n and must be symmetric to within 1e-10 in absolute terms, otherwise
// a validation_error is thrown. Eigenvalues come back ascending. When
// `vectors` is non-null it receives the orthonormal eigenvectors as columns
// of a row-major n x n matrix, matching the eigenvalue order.
std::vector<double> sym_eigen(const std::vector<double>& a, int n,
                              std::vector<double>* vectors = nullptr);

// Regularized lower incomplete gamma P(s, x). Series expansion for
// x < s + 1, continued fraction otherwise.
double gamma_p(double s, double x);

// Inverse CDF of the chi-square distribution with `dof` degrees of freedom,
// solved by bisection on gamma_p to an absolute CDF tolerance of 1e-10.
// p = 0 returns 0; p < 0 or p >= 1 throws validation_error.
double chi2_inv_cdf(int dof, double p);

// Pearson correlation of two equal-length vectors. Returns nullopt when
// either vector has zero variance.
std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y);

// Kendall rank correlation, tau-b (tie-corrected). Returns nullopt when
// either vector is constant (denominator zero). kendall_tau_naive is the
// O(n^2) pair-counting definition; kendall_tau is the O(n log n)
// merge-sort formulation. Both must produce identical results.
std::optional<double> kendall_tau_naive(const std::vector<double>& x,
                                        const std::vector<double>& y);
std::optional<double> kendall_tau(const std::vector<double>& x, const std::vector<double>& y);

// Spearman rank correlation: Pearson correlation of mid-ranks (ties get the
// average of the ranks they occupy). Returns nullopt when either vector is
// constant.
std::optional<double> spearman_rho(const std::vector<double>& x, const std::vector<double>& y);

} // namespace zico
