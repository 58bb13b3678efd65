#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

namespace hem::stats {

inline double mean(std::span<const double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Unbiased sample variance (n - 1 denominator); 0 for fewer than two values.
inline double variance(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

inline double normal_two_sided(double z) { return std::erfc(std::abs(z) / std::numbers::sqrt2); }

/// Sample quantile with linear interpolation between order statistics
/// (the "type 7" rule). `sorted` must be ascending.
inline double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline std::vector<double> quantiles(std::span<const double> v, std::span<const double> probs) {
    std::vector<double> s(v.begin(), v.end());
    std::sort(s.begin(), s.end());
    std::vector<double> out;
    out.reserve(probs.size());
    for (double p : probs) out.push_back(quantile_sorted(s, p));
    return out;
}

inline double median(std::span<const double> v) {
    const double half[] = {0.5};
    return quantiles(v, half)[0];
}

/// Evenly spaced probability levels (k + 1/2) / n.
inline std::vector<double> probability_grid(std::size_t n) {
    std::vector<double> p(n);
    for (std::size_t k = 0; k < n; ++k) p[k] = (static_cast<double>(k) + 0.5) / static_cast<double>(n);
    return p;
}

/// Fraction of `sorted` that is <= x.
inline double ecdf_sorted(std::span<const double> sorted, double x) {
    if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), x);
    return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
}

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

/// Two-sided Welch t-test.
inline TestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("t-test needs at least two values per sample");
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double ma = mean(a), mb = mean(b);
    const double va = variance(a) / na, vb = variance(b) / nb;
    const double se2 = va + vb;
    if (se2 == 0.0) return {0.0, ma == mb ? 1.0 : 0.0};
    const double t = (ma - mb) / std::sqrt(se2);
    const double df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    boost::math::students_t dist(df);
    const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
    return {t, std::clamp(p, 0.0, 1.0)};
}

/// Mid-ranks (1-based) of the pooled sample; ties share the average rank.
/// Also returns sum over tie groups of (t^3 - t).
inline std::pair<std::vector<double>, double> pooled_ranks(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
    std::vector<double> rank(v.size());
    double tie_term = 0.0;
    for (std::size_t k = 0; k < idx.size();) {
        std::size_t m = k;
        while (m + 1 < idx.size() && v[idx[m + 1]] == v[idx[k]]) ++m;
        const double r = 0.5 * (static_cast<double>(k) + static_cast<double>(m)) + 1.0;
        for (std::size_t t = k; t <= m; ++t) rank[idx[t]] = r;
        const double t = static_cast<double>(m - k + 1);
        tie_term += t * t * t - t;
        k = m + 1;
    }
    return {std::move(rank), tie_term};
}

/// Two-sided Mann-Whitney U test, normal approximation with tie and
/// continuity corrections. The statistic is U for the first sample.
inline TestResult mann_whitney(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("Mann-Whitney needs non-empty samples");
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    const auto [rank, ties] = pooled_ranks(pooled);
    const double n1 = static_cast<double>(a.size()), n2 = static_cast<double>(b.size());
    const double n = n1 + n2;
    double r1 = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) r1 += rank[k];
    const double u = r1 - n1 * (n1 + 1.0) / 2.0;
    const double mu = n1 * n2 / 2.0;
    const double var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    if (!(var > 0.0)) return {u, 1.0};
    const double z = std::max(std::abs(u - mu) - 0.5, 0.0) / std::sqrt(var);
    return {u, std::clamp(normal_two_sided(z), 0.0, 1.0)};
}

/// P-P curve of two samples: at each threshold (the pooled quantiles at the
/// given levels) the pair (F_a, F_b) of empirical CDF values.
struct PpCurve {
    std::vector<double> threshold, fa, fb;

    double max_deviation() const {
        double d = 0.0;
        for (std::size_t k = 0; k < fa.size(); ++k) d = std::max(d, std::abs(fa[k] - fb[k]));
        return d;
    }
};

inline PpCurve pp_curve(std::span<const double> a, std::span<const double> b, std::size_t points) {
    std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    std::vector<double> pooled(sa);
    pooled.insert(pooled.end(), sb.begin(), sb.end());
    std::sort(pooled.begin(), pooled.end());
    PpCurve c;
    for (double p : probability_grid(points)) {
        const double x = quantile_sorted(pooled, p);
        c.threshold.push_back(x);
        c.fa.push_back(ecdf_sorted(sa, x));
        c.fb.push_back(ecdf_sorted(sb, x));
    }
    return c;
}

/// P-P curve of a sample against a reference sample: at each reference
/// quantile level p, the pair (p, F_sample(q_ref(p))).
inline PpCurve pp_against(std::span<const double> reference, std::span<const double> sample, std::size_t points) {
    std::vector<double> sr(reference.begin(), reference.end()), ss(sample.begin(), sample.end());
    std::sort(sr.begin(), sr.end());
    std::sort(ss.begin(), ss.end());
    PpCurve c;
    for (double p : probability_grid(points)) {
        const double x = quantile_sorted(sr, p);
        c.threshold.push_back(x);
        c.fa.push_back(ecdf_sorted(sr, x));
        c.fb.push_back(ecdf_sorted(ss, x));
    }
    return c;
}

/// Two-sample Kolmogorov-Smirnov distance sup |F_a - F_b|.
inline double ks_distance(std::span<const double> a, std::span<const double> b) {
    std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < sa.size() && j < sb.size()) {
        const double x = std::min(sa[i], sb[j]);
        while (i < sa.size() && sa[i] <= x) ++i;
        while (j < sb.size() && sb[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / static_cast<double>(sa.size()) -
                                 static_cast<double>(j) / static_cast<double>(sb.size())));
    }
    return d;
}

/// Spectral density at frequency zero, estimated with a Bartlett lag window.
inline double spectral_density_zero(std::span<const double> v, std::size_t max_lag) {
    const std::size_t n = v.size();
    if (n < 2) return 0.0;
    const double m = mean(v);
    auto acov = [&](std::size_t lag) {
        double s = 0.0;
        for (std::size_t t = lag; t < n; ++t) s += (v[t] - m) * (v[t - lag] - m);
        return s / static_cast<double>(n);
    };
    double s = acov(0);
    max_lag = std::min(max_lag, n - 1);
    for (std::size_t k = 1; k <= max_lag; ++k)
        s += 2.0 * (1.0 - static_cast<double>(k) / static_cast<double>(max_lag + 1)) * acov(k);
    return std::max(s, 0.0);
}

}  // namespace hem::stats
