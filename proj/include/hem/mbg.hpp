#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace hem::mbg {

// Multivariate Bernoulli restricted to non-empty vectors (the "non-empty Gibbs
// measure"). Intensity vectors keep the full length-A slot layout; the slot of
// the owning node (`self`) is ignored everywhere.

inline constexpr double overflow_guard = 30.0;

/// log(1 + e^x)
inline double softplus(double x) noexcept {
    if (x > overflow_guard) return x + std::exp(-x);
    if (x < -overflow_guard) return std::exp(x);
    return std::log1p(std::exp(x));
}

inline double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double z = std::exp(x);
    return z / (1.0 + z);
}

inline double log_sigmoid(double x) noexcept { return -softplus(-x); }

/// lambda_j = b . x_j for every j != self. `x` is A rows of length P.
inline void intensity(std::span<const double> b, std::span<const double> x, std::size_t self,
                      std::span<double> lambda) {
    const std::size_t P = b.size();
    const std::size_t A = lambda.size();
    if (x.size() != A * P) throw std::invalid_argument("intensity: feature block does not match A x P");
    for (std::size_t j = 0; j < A; ++j) {
        if (j == self) {
            lambda[j] = 0.0;
            continue;
        }
        const double* row = x.data() + j * P;
        double s = 0.0;
        for (std::size_t p = 0; p < P; ++p) s += b[p] * row[p];
        lambda[j] = s;
    }
}

inline std::vector<double> intensity(std::span<const double> b, std::span<const double> x, std::size_t self) {
    if (b.empty() || x.size() % b.size() != 0)
        throw std::invalid_argument("intensity: feature block does not match coefficient length");
    std::vector<double> lambda(x.size() / b.size());
    intensity(b, x, self, lambda);
    return lambda;
}

namespace detail {

/// q = prod_j (1 + e^lambda_j) - 1 via q <- q + a (1 + q), which adds only
/// positive terms and so keeps full relative accuracy when q is tiny. Returns
/// false when some intensity is large enough to risk overflow.
inline bool excess_product(std::span<const double> lambda, std::size_t self, double& q) noexcept {
    q = 0.0;
    for (std::size_t j = 0; j < lambda.size(); ++j) {
        if (j == self) continue;
        if (lambda[j] > overflow_guard) return false;
        const double a = std::exp(lambda[j]);
        q += a * (1.0 + q);
    }
    return q < 1e250;
}

}  // namespace detail

/// S = sum_j softplus(lambda_j), i.e. log prod_j (e^lambda_j + 1).
inline double softplus_sum(std::span<const double> lambda, std::size_t self) noexcept {
    double q;
    if (detail::excess_product(lambda, self, q)) return std::log1p(q);
    double s = 0.0;
    for (std::size_t j = 0; j < lambda.size(); ++j)
        if (j != self) s += softplus(lambda[j]);
    return s;
}

/// log Z with Z = prod_j (e^lambda_j + 1) - 1, evaluated as S + log(1 - e^-S)
/// when the direct product is out of range.
inline double log_normalizer(std::span<const double> lambda, std::size_t self) noexcept {
    double q;
    if (detail::excess_product(lambda, self, q)) return std::log(q);
    const double S = softplus_sum(lambda, self);
    return S + std::log(-std::expm1(-S));
}

/// Normalizer policy used by the inference code; swapping it is how the
/// joint-distribution test's negative control is wired.
struct ExactNormalizer {
    static double log_z(std::span<const double> lambda, std::size_t self) noexcept {
        return log_normalizer(lambda, self);
    }
};

/// Plain logistic-Bernoulli normalizer that forgets to remove the empty set.
struct UncorrectedNormalizer {
    static double log_z(std::span<const double> lambda, std::size_t self) noexcept {
        return softplus_sum(lambda, self);
    }
};

/// log Pr(u | lambda); -inf for the empty vector.
inline double log_pmf(std::span<const std::uint8_t> u, std::span<const double> lambda, std::size_t self) {
    if (u.size() != lambda.size()) throw std::invalid_argument("log_pmf: length mismatch");
    if (u[self] != 0) throw std::invalid_argument("log_pmf: owner slot must be 0");
    double dot = 0.0;
    bool any = false;
    for (std::size_t j = 0; j < u.size(); ++j) {
        if (j == self || !u[j]) continue;
        any = true;
        dot += lambda[j];
    }
    if (!any) return -std::numeric_limits<double>::infinity();
    return dot - log_normalizer(lambda, self);
}

/// Gradient of log Z: d log Z / d lambda_j = sigmoid(lambda_j) / (1 - e^-S).
inline void log_normalizer_gradient(std::span<const double> lambda, std::size_t self, std::span<double> grad) {
    const double S = softplus_sum(lambda, self);
    const double denom = -std::expm1(-S);
    for (std::size_t j = 0; j < lambda.size(); ++j)
        grad[j] = j == self ? 0.0 : sigmoid(lambda[j]) / denom;
}

/// Pr(u_j = 1 | rest): sigmoid(lambda) when some other coordinate is on,
/// otherwise 1 (the empty vector is not in the support).
inline double gibbs_prob(double lambda, bool rest_nonempty) noexcept {
    return rest_nonempty ? sigmoid(lambda) : 1.0;
}

/// Exact draw. Coordinates are first drawn independently; if that yields the
/// empty vector, a second pass draws from the law conditioned on being
/// non-empty, coordinate by coordinate, using suffix softplus sums.
template <class URBG>
void sample(std::span<const double> lambda, std::size_t self, URBG& rng, std::span<std::uint8_t> out) {
    const std::size_t A = lambda.size();
    auto uniform = [&] { return std::generate_canonical<double, 53>(rng); };
    bool any = false;
    for (std::size_t j = 0; j < A; ++j) {
        if (j == self) {
            out[j] = 0;
            continue;
        }
        out[j] = uniform() < sigmoid(lambda[j]) ? 1 : 0;
        any = any || out[j];
    }
    if (any) return;

    // suffix[j] = sum_{k >= j, k != self} softplus(lambda_k)
    std::vector<double> suffix(A + 1, 0.0);
    for (std::size_t j = A; j-- > 0;) suffix[j] = suffix[j + 1] + (j == self ? 0.0 : softplus(lambda[j]));
    const std::size_t last = self == A - 1 ? A - 2 : A - 1;
    bool need = true;
    for (std::size_t j = 0; j < A; ++j) {
        if (j == self) continue;
        double p = sigmoid(lambda[j]);
        if (need && j == last) {
            p = 1.0;
        } else if (need) {
            // Pr(u_j = 1 | u_<j all zero, u non-empty) = sigmoid / (1 - prod_{k>=j}(1 - sigmoid))
            p = std::exp(log_sigmoid(lambda[j]) - std::log(-std::expm1(-suffix[j])));
        }
        out[j] = uniform() < p ? 1 : 0;
        if (out[j]) need = false;
    }
}

template <class URBG>
std::vector<std::uint8_t> sample(std::span<const double> lambda, std::size_t self, URBG& rng) {
    std::vector<std::uint8_t> out(lambda.size(), 0);
    sample(lambda, self, rng, std::span<std::uint8_t>(out));
    return out;
}

}  // namespace hem::mbg
