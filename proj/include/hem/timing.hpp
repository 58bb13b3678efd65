#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include <boost/math/special_functions/gamma.hpp>

#include "hem/error.hpp"

namespace hem {

enum class Family { exponential, lognormal, weibull, gamma };
enum class Link { identity, log, inverse };

inline std::string_view name(Family f) {
    switch (f) {
        case Family::exponential: return "exponential";
        case Family::lognormal: return "lognormal";
        case Family::weibull: return "weibull";
        case Family::gamma: return "gamma";
    }
    return "?";
}

inline std::string_view name(Link l) {
    switch (l) {
        case Link::identity: return "identity";
        case Link::log: return "log";
        case Link::inverse: return "inverse";
    }
    return "?";
}

inline Family parse_family(std::string_view s) {
    if (s == "exponential") return Family::exponential;
    if (s == "lognormal" || s == "log-normal") return Family::lognormal;
    if (s == "weibull") return Family::weibull;
    if (s == "gamma") return Family::gamma;
    throw ConfigError("unknown timing family '" + std::string(s) + "'");
}

inline Link parse_link(std::string_view s) {
    if (s == "identity") return Link::identity;
    if (s == "log") return Link::log;
    if (s == "inverse") return Link::inverse;
    throw ConfigError("unknown link '" + std::string(s) + "'");
}

/// Default link: identity on the log-time location for the log-normal, log
/// link on the mean otherwise.
inline Link default_link(Family f) { return f == Family::lognormal ? Link::identity : Link::log; }

/// Distribution of candidate time increments.
///
/// The mean parameter mu is the distribution mean for the exponential,
/// Weibull and gamma families, and the location of log(tau) for the
/// log-normal. `aux` is sigma^2 (log-normal), shape k (Weibull) or shape
/// theta (gamma); the exponential has none.
struct TimingModel {
    Family family = Family::exponential;
    Link link = Link::log;
    std::optional<double> aux;

    static TimingModel make(Family f, std::optional<Link> link = std::nullopt, std::optional<double> aux = std::nullopt) {
        TimingModel m{f, link.value_or(default_link(f)), std::nullopt};
        if (f != Family::exponential) m.aux = aux.value_or(1.0);
        m.validate();
        return m;
    }

    bool has_aux() const noexcept { return family != Family::exponential; }

    void validate() const {
        if (has_aux() != aux.has_value())
            throw ConfigError("timing aux parameter must be present iff the family is not exponential");
        if (aux && !(*aux > 0.0)) throw ConfigError("timing aux parameter must be positive");
    }

    TimingModel with_aux(double a) const {
        TimingModel m = *this;
        m.aux = a;
        return m;
    }
};

inline double inverse_link(Link link, double eta) noexcept {
    switch (link) {
        case Link::identity: return eta;
        case Link::log: return std::exp(eta);
        case Link::inverse: return 1.0 / eta;
    }
    return eta;
}

/// mu = g^{-1}(eta . y)
inline double mean_param(std::span<const double> eta, std::span<const double> y, Link link) {
    if (eta.size() != y.size()) throw std::invalid_argument("mean_param: dimension mismatch");
    double s = 0.0;
    for (std::size_t q = 0; q < eta.size(); ++q) s += eta[q] * y[q];
    return inverse_link(link, s);
}

namespace detail {

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();
inline constexpr double half_log_2pi = 0.91893853320467274178;

inline void check_tau(double tau) {
    if (!(tau > 0.0)) throw std::domain_error("time increment must be positive, got " + std::to_string(tau));
}

/// log of the upper standard-normal tail, finite far into the tail.
inline double log_normal_upper_tail(double z) noexcept {
    if (z < 30.0) return std::log(0.5 * std::erfc(z / std::numbers::sqrt2));
    const double z2 = z * z;
    return -0.5 * z2 - std::log(z) - half_log_2pi + std::log1p(-1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2));
}

inline double weibull_scale(double mean, double k) { return mean / std::tgamma(1.0 + 1.0 / k); }

/// log Q(a, x) for the regularized upper incomplete gamma. Past the point
/// where Q underflows, uses x^(a-1) e^-x / Gamma(a) * sum_k (a-1)...(a-k) / x^k.
inline double log_gamma_q(double a, double x) {
    const double q = boost::math::gamma_q(a, x);
    if (q > 1e-290) return std::log(q);
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 60; ++k) {
        const double next = term * (a - k) / x;
        if (std::abs(next) >= std::abs(term) || next == 0.0) break;
        term = next;
        sum += term;
    }
    return (a - 1.0) * std::log(x) - x - std::lgamma(a) + std::log(sum);
}

}  // namespace detail

/// log f(tau; mu). Returns -inf when mu is outside the family's mean domain.
inline double log_pdf(double tau, double mu, const TimingModel& m) {
    detail::check_tau(tau);
    switch (m.family) {
        case Family::exponential:
            if (!(mu > 0.0)) return detail::neg_inf;
            return -std::log(mu) - tau / mu;
        case Family::lognormal: {
            const double s2 = *m.aux;
            const double z = std::log(tau) - mu;
            return -std::log(tau) - detail::half_log_2pi - 0.5 * std::log(s2) - 0.5 * z * z / s2;
        }
        case Family::weibull: {
            if (!(mu > 0.0)) return detail::neg_inf;
            const double k = *m.aux;
            const double lam = detail::weibull_scale(mu, k);
            const double r = tau / lam;
            return std::log(k) - std::log(lam) + (k - 1.0) * std::log(r) - std::pow(r, k);
        }
        case Family::gamma: {
            if (!(mu > 0.0)) return detail::neg_inf;
            const double theta = *m.aux;
            const double scale = mu / theta;
            return -std::lgamma(theta) - theta * std::log(scale) + (theta - 1.0) * std::log(tau) - tau / scale;
        }
    }
    return detail::neg_inf;
}

/// log(1 - F(tau; mu)) via complementary functions.
inline double log_survival(double tau, double mu, const TimingModel& m) {
    detail::check_tau(tau);
    switch (m.family) {
        case Family::exponential:
            if (!(mu > 0.0)) return detail::neg_inf;
            return -tau / mu;
        case Family::lognormal:
            return detail::log_normal_upper_tail((std::log(tau) - mu) / std::sqrt(*m.aux));
        case Family::weibull: {
            if (!(mu > 0.0)) return detail::neg_inf;
            const double k = *m.aux;
            return -std::pow(tau / detail::weibull_scale(mu, k), k);
        }
        case Family::gamma: {
            if (!(mu > 0.0)) return detail::neg_inf;
            const double theta = *m.aux;
            return detail::log_gamma_q(theta, tau * theta / mu);
        }
    }
    return detail::neg_inf;
}

inline double cdf(double tau, double mu, const TimingModel& m) {
    if (!(tau > 0.0)) return 0.0;
    if (m.family == Family::gamma) return boost::math::gamma_p(*m.aux, tau * *m.aux / mu);
    if (m.family == Family::lognormal)
        return 0.5 * std::erfc(-(std::log(tau) - mu) / std::sqrt(2.0 * *m.aux));
    return -std::expm1(log_survival(tau, mu, m));
}

/// Analytic mean of tau under (mu, model).
inline double increment_mean(double mu, const TimingModel& m) {
    if (m.family == Family::lognormal) return std::exp(mu + 0.5 * *m.aux);
    return mu;
}

template <class URBG>
double sample_increment(double mu, const TimingModel& m, URBG& rng) {
    switch (m.family) {
        case Family::exponential:
            return mu * std::exponential_distribution<double>(1.0)(rng);
        case Family::lognormal:
            return std::exp(mu + std::sqrt(*m.aux) * std::normal_distribution<double>(0.0, 1.0)(rng));
        case Family::weibull: {
            const double k = *m.aux;
            return std::weibull_distribution<double>(k, detail::weibull_scale(mu, k))(rng);
        }
        case Family::gamma: {
            const double theta = *m.aux;
            return std::gamma_distribution<double>(theta, mu / theta)(rng);
        }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace hem
