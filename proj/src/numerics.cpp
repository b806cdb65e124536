#include "zico/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "zico/errors.hpp"

namespace zico {

std::vector<double> sym_eigen(const std::vector<double>& a, int n, std::vector<double>* vectors) {
    if (n < 1) throw validation_error("sym_eigen: matrix order must be >= 1");
    if (n > 1024) throw validation_error("sym_eigen: matrix order " + std::to_string(n) +
                                         " exceeds the supported maximum of 1024");
    if (a.size() != size_t(n) * size_t(n))
        throw validation_error("sym_eigen: buffer holds " + std::to_string(a.size()) +
                               " entries, expected " + std::to_string(size_t(n) * size_t(n)));
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (std::fabs(a[size_t(i) * n + j] - a[size_t(j) * n + i]) > 1e-10)
                throw validation_error("sym_eigen: matrix is not symmetric at (" +
                                       std::to_string(i) + ", " + std::to_string(j) + ")");

    // Work on a symmetrized copy so the tiny asymmetries we tolerated above
    // cannot bias the rotations.
    std::vector<double> m(a);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double v = 0.5 * (m[size_t(i) * n + j] + m[size_t(j) * n + i]);
            m[size_t(i) * n + j] = v;
            m[size_t(j) * n + i] = v;
        }

    std::vector<double> v;
    if (vectors) {
        v.assign(size_t(n) * size_t(n), 0.0);
        for (int i = 0; i < n; ++i) v[size_t(i) * n + i] = 1.0;
    }

    auto off_norm = [&]() {
        double s = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (i != j) s += m[size_t(i) * n + j] * m[size_t(i) * n + j];
        return std::sqrt(s);
    };

    for (int sweep = 0; sweep < 100 && off_norm() >= 1e-12; ++sweep) {
        for (int p = 0; p < n - 1; ++p)
            for (int q = p + 1; q < n; ++q) {
                const double apq = m[size_t(p) * n + q];
                if (apq == 0.0) continue;
                const double theta = (m[size_t(q) * n + q] - m[size_t(p) * n + p]) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double mkp = m[size_t(k) * n + p];
                    const double mkq = m[size_t(k) * n + q];
                    m[size_t(k) * n + p] = c * mkp - s * mkq;
                    m[size_t(k) * n + q] = s * mkp + c * mkq;
                }
                for (int k = 0; k < n; ++k) {
                    const double mpk = m[size_t(p) * n + k];
                    const double mqk = m[size_t(q) * n + k];
                    m[size_t(p) * n + k] = c * mpk - s * mqk;
                    m[size_t(q) * n + k] = s * mpk + c * mqk;
                }
                if (vectors)
                    for (int k = 0; k < n; ++k) {
                        const double vkp = v[size_t(k) * n + p];
                        const double vkq = v[size_t(k) * n + q];
                        v[size_t(k) * n + p] = c * vkp - s * vkq;
                        v[size_t(k) * n + q] = s * vkp + c * vkq;
                    }
            }
    }

    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int i, int j) {
        return m[size_t(i) * n + i] < m[size_t(j) * n + j];
    });
    std::vector<double> eig(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) eig[size_t(i)] = m[size_t(order[size_t(i)]) * n + order[size_t(i)]];
    if (vectors) {
        vectors->assign(size_t(n) * size_t(n), 0.0);
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                (*vectors)[size_t(k) * n + j] = v[size_t(k) * n + order[size_t(j)]];
    }
    return eig;
}

double gamma_p(double s, double x) {
    if (s <= 0.0) throw validation_error("gamma_p: shape must be positive");
    if (x < 0.0) throw validation_error("gamma_p: argument must be non-negative");
    if (x == 0.0) return 0.0;
    const double log_pref = -x + s * std::log(x) - std::lgamma(s);
    if (x < s + 1.0) {
        double ap = s;
        double sum = 1.0 / s;
        double del = sum;
        for (int i = 0; i < 10000; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
        }
        return sum * std::exp(log_pref);
    }
    // Upper tail by modified Lentz continued fraction, then complement.
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - s;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 10000; ++i) {
        const double an = -double(i) * (double(i) - s);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-16) break;
    }
    return 1.0 - std::exp(log_pref) * h;
}

double chi2_inv_cdf(int dof, double p) {
    if (dof < 1) throw validation_error("chi2_inv_cdf: degrees of freedom must be >= 1");
    if (p < 0.0 || p >= 1.0)
        throw validation_error("chi2_inv_cdf: probability must lie in [0, 1)");
    if (p == 0.0) return 0.0;
    const double s = 0.5 * double(dof);
    double lo = 0.0;
    double hi = 1.0;
    while (gamma_p(s, 0.5 * hi) < p) {
        hi *= 2.0;
        if (hi > 1e12) throw numeric_error("chi2_inv_cdf: failed to bracket quantile");
    }
    double mid = hi;
    for (int it = 0; it < 500; ++it) {
        mid = 0.5 * (lo + hi);
        const double f = gamma_p(s, 0.5 * mid);
        if (std::fabs(f - p) < 1e-10) return mid;
        (f < p ? lo : hi) = mid;
    }
    throw numeric_error("chi2_inv_cdf: bisection did not converge");
}

namespace {

void require_same_size(const std::vector<double>& x, const std::vector<double>& y,
                       const char* who) {
    if (x.size() != y.size())
        throw validation_error(std::string(who) + ": vectors differ in length (" +
                               std::to_string(x.size()) + " vs " + std::to_string(y.size()) + ")");
}

int64_t tie_pair_count(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    int64_t total = 0;
    size_t i = 0;
    while (i < v.size()) {
        size_t j = i;
        while (j < v.size() && v[j] == v[i]) ++j;
        const auto t = int64_t(j - i);
        total += t * (t - 1) / 2;
        i = j;
    }
    return total;
}

int64_t merge_count_inversions(std::vector<double>& v, std::vector<double>& tmp, size_t lo,
                               size_t hi) {
    if (hi - lo < 2) return 0;
    const size_t mid = lo + (hi - lo) / 2;
    int64_t cnt =
        merge_count_inversions(v, tmp, lo, mid) + merge_count_inversions(v, tmp, mid, hi);
    size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (v[j] < v[i]) {
            cnt += int64_t(mid - i);
            tmp[k++] = v[j++];
        } else {
            tmp[k++] = v[i++];
        }
    }
    while (i < mid) tmp[k++] = v[i++];
    while (j < hi) tmp[k++] = v[j++];
    std::copy(tmp.begin() + std::ptrdiff_t(lo), tmp.begin() + std::ptrdiff_t(hi),
              v.begin() + std::ptrdiff_t(lo));
    return cnt;
}

std::optional<double> tau_from_counts(int64_t num, int64_t n0, int64_t n1, int64_t n2) {
    if (n0 == n1 || n0 == n2) return std::nullopt;
    return double(num) / std::sqrt(double(n0 - n1) * double(n0 - n2));
}

std::vector<double> mid_ranks(const std::vector<double>& v) {
    const size_t n = v.size();
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](int i, int j) { return v[size_t(i)] < v[size_t(j)]; });
    std::vector<double> r(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && v[size_t(idx[j])] == v[size_t(idx[i])]) ++j;
        const double avg = 1.0 + 0.5 * double(i + j - 1);
        for (size_t k = i; k < j; ++k) r[size_t(idx[k])] = avg;
        i = j;
    }
    return r;
}

} // namespace

std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
    require_same_size(x, y, "pearson");
    const size_t n = x.size();
    if (n < 2) return std::nullopt;
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= double(n);
    my /= double(n);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

std::optional<double> kendall_tau_naive(const std::vector<double>& x,
                                        const std::vector<double>& y) {
    require_same_size(x, y, "kendall_tau");
    const size_t n = x.size();
    if (n < 2) return std::nullopt;
    int64_t concordant = 0, discordant = 0;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            if (x[i] == x[j] || y[i] == y[j]) continue;
            const bool same = (x[i] < x[j]) == (y[i] < y[j]);
            (same ? concordant : discordant) += 1;
        }
    const auto n0 = int64_t(n) * int64_t(n - 1) / 2;
    return tau_from_counts(concordant - discordant, n0, tie_pair_count(x), tie_pair_count(y));
}

std::optional<double> kendall_tau(const std::vector<double>& x, const std::vector<double>& y) {
    require_same_size(x, y, "kendall_tau");
    const size_t n = x.size();
    if (n < 2) return std::nullopt;

    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int i, int j) {
        if (x[size_t(i)] != x[size_t(j)]) return x[size_t(i)] < x[size_t(j)];
        return y[size_t(i)] < y[size_t(j)];
    });

    // Pairs tied in x, and tied in both, read off the (x, y)-sorted order.
    int64_t n1 = 0, n3 = 0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && x[size_t(idx[j])] == x[size_t(idx[i])]) ++j;
        const auto t = int64_t(j - i);
        n1 += t * (t - 1) / 2;
        size_t u = i;
        while (u < j) {
            size_t w = u;
            while (w < j && y[size_t(idx[w])] == y[size_t(idx[u])]) ++w;
            const auto tt = int64_t(w - u);
            n3 += tt * (tt - 1) / 2;
            u = w;
        }
        i = j;
    }

    // Exchanges needed to sort y once x-order is fixed count exactly the
    // discordant pairs; ties never swap because equal x groups arrive
    // y-sorted.
    std::vector<double> ybuf(n), tmp(n);
    for (size_t k = 0; k < n; ++k) ybuf[k] = y[size_t(idx[k])];
    const int64_t swaps = merge_count_inversions(ybuf, tmp, 0, n);

    const auto n0 = int64_t(n) * int64_t(n - 1) / 2;
    const int64_t n2 = tie_pair_count(y);
    const int64_t num = n0 - n1 - n2 + n3 - 2 * swaps;
    return tau_from_counts(num, n0, n1, n2);
}

std::optional<double> spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
    require_same_size(x, y, "spearman_rho");
    if (x.size() < 2) return std::nullopt;
    return pearson(mid_ranks(x), mid_ranks(y));
}

} // namespace zico
