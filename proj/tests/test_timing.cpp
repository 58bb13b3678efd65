#include <gtest/gtest.h>

#include <algorithm>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <numbers>

#include "hem/rng.hpp"
#include "hem/timing.hpp"

using namespace hem;

namespace {

struct Case {
    TimingModel model;
    double mu;
};

std::vector<Case> cases() {
    return {
        {TimingModel::make(Family::exponential), 2.5},
        {TimingModel::make(Family::lognormal, std::nullopt, 0.8), 0.3},
        {TimingModel::make(Family::lognormal, std::nullopt, 2.0), -1.0},
        {TimingModel::make(Family::weibull, std::nullopt, 1.7), 3.0},
        {TimingModel::make(Family::weibull, std::nullopt, 0.6), 1.5},
        {TimingModel::make(Family::gamma, std::nullopt, 2.5), 4.0},
        {TimingModel::make(Family::gamma, std::nullopt, 0.7), 0.8},
    };
}

std::string label(const Case& c) { return std::string(name(c.model.family)) + " aux=" + std::to_string(c.model.aux.value_or(0)); }

double integrate_pdf(const Case& c, double lo, double hi) {
    boost::math::quadrature::tanh_sinh<double> q;
    return q.integrate([&](double t) { return t > 0 ? std::exp(log_pdf(t, c.mu, c.model)) : 0.0; }, lo, hi);
}

}  // namespace

TEST(Timing, ModelInvariants) {
    EXPECT_FALSE(TimingModel::make(Family::exponential).aux);
    EXPECT_EQ(TimingModel::make(Family::lognormal).link, Link::identity);
    EXPECT_EQ(TimingModel::make(Family::gamma).link, Link::log);
    EXPECT_THROW(TimingModel::make(Family::weibull, std::nullopt, -1.0), ConfigError);
    TimingModel bad = TimingModel::make(Family::exponential);
    bad.aux = 1.0;
    EXPECT_THROW(bad.validate(), ConfigError);
    EXPECT_EQ(parse_family("lognormal"), Family::lognormal);
    EXPECT_THROW(parse_family("pareto"), ConfigError);
}

TEST(Timing, MeanParam) {
    const std::vector<double> zero{0.0, 0.0};
    const std::vector<double> y{1.0, 3.0};
    EXPECT_EQ(mean_param(zero, y, Link::identity), 0.0);
    EXPECT_EQ(mean_param(zero, y, Link::log), 1.0);
    const double shift = mean_param(std::vector<double>{1.552}, std::vector<double>{1.0}, Link::identity);
    EXPECT_DOUBLE_EQ(shift, 1.552);
    EXPECT_NEAR(std::exp(shift), 4.720903, 1e-6);
    EXPECT_NEAR(std::exp(shift), 4.722, 2e-3);
    Engine rng(1);
    std::normal_distribution<double> n;
    for (int k = 0; k < 50; ++k) {
        std::vector<double> e(4), v(4);
        for (auto& x : e) x = n(rng);
        for (auto& x : v) x = n(rng);
        const double dot = e[0] * v[0] + e[1] * v[1] + e[2] * v[2] + e[3] * v[3];
        EXPECT_NEAR(mean_param(e, v, Link::log), std::exp(dot), 1e-12 * std::exp(dot));
        EXPECT_NEAR(mean_param(e, v, Link::inverse), 1.0 / dot, 1e-9 * std::abs(1.0 / dot));
    }
    EXPECT_THROW(mean_param(zero, std::vector<double>{1.0}, Link::log), std::invalid_argument);
}

TEST(Timing, DensityAndSurvivalExamples) {
    const auto expo = TimingModel::make(Family::exponential);
    const auto logn = TimingModel::make(Family::lognormal, std::nullopt, 1.0);
    EXPECT_NEAR(log_pdf(1.0, 1.0, expo), -1.0, 1e-15);
    EXPECT_NEAR(log_pdf(1.0, 0.0, logn), -0.5 * std::log(2 * std::numbers::pi), 1e-15);
    for (double t : {0.1, 1.0, 7.3, 500.0}) EXPECT_NEAR(log_survival(t, 3.0, expo), -t / 3.0, 1e-15);
    EXPECT_NEAR(log_survival(1.0, 0.0, logn), std::log(0.5), 1e-15);
    EXPECT_THROW(log_pdf(0.0, 1.0, expo), std::domain_error);
    EXPECT_THROW(log_survival(-1.0, 1.0, logn), std::domain_error);
}

TEST(Timing, LogNormalTailStaysFinite) {
    const auto logn = TimingModel::make(Family::lognormal, std::nullopt, 1.0);
    double prev = 0.0;
    for (double z = 1.0; z <= 37.0; z += 0.5) {
        const double ls = log_survival(std::exp(z), 0.0, logn);
        ASSERT_TRUE(std::isfinite(ls)) << z;
        EXPECT_LT(ls, prev);
        prev = ls;
        // erfc oracle where it is representable
        if (z < 26.0) {
            EXPECT_NEAR(ls, std::log(0.5 * std::erfc(z / std::numbers::sqrt2)), 1e-9 * std::abs(ls));
        }
    }
}

TEST(Timing, GammaTailStaysFiniteAndSmooth) {
    for (double theta : {0.6, 1.0, 2.5}) {
        const auto m = TimingModel::make(Family::gamma, std::nullopt, theta);
        const double mu = theta;  // so that tau * theta / mu = tau
        std::vector<double> ls;
        for (double x = 600.0; x <= 760.0; x += 0.5) ls.push_back(log_survival(x, mu, m));
        for (std::size_t k = 1; k < ls.size(); ++k) {
            ASSERT_TRUE(std::isfinite(ls[k]));
            EXPECT_LT(ls[k], ls[k - 1]);
            if (k >= 2) {
                const double x = 600.0 + 0.5 * static_cast<double>(k - 1);
                const double curvature = -(theta - 1.0) * 0.25 / (x * x);
                EXPECT_NEAR(ls[k] - 2 * ls[k - 1] + ls[k - 2], curvature, 2e-8) << theta << " x " << x;
            }
        }
        // exponential special case: log Q(1, x) = -x
        if (theta == 1.0) {
            EXPECT_NEAR(log_survival(750.0, mu, m), -750.0, 1e-9);
        }
    }
}

TEST(Timing, DensityIntegratesToOne) {
    for (const auto& c : cases()) {
        boost::math::quadrature::exp_sinh<double> q;
        const double total = integrate_pdf(c, 0.0, 1.0) +
                             q.integrate([&](double t) { return std::exp(log_pdf(1.0 + t, c.mu, c.model)); });
        EXPECT_NEAR(total, 1.0, 1e-6) << label(c);
    }
}

TEST(Timing, SurvivalPlusIntegralIsOne) {
    for (const auto& c : cases())
        for (double tau : {0.05, 0.7, 2.0, 9.0}) {
            const double head = integrate_pdf(c, 0.0, tau);
            EXPECT_NEAR(std::exp(log_survival(tau, c.mu, c.model)) + head, 1.0, 1e-8) << label(c) << " tau " << tau;
            EXPECT_NEAR(cdf(tau, c.mu, c.model), head, 1e-8) << label(c);
        }
}

TEST(Timing, SurvivalDerivativeIsDensity) {
    for (const auto& c : cases())
        for (double tau : {0.3, 1.1, 4.0}) {
            const double h = 1e-5;
            const double fd =
                -(std::exp(log_survival(tau + h, c.mu, c.model)) - std::exp(log_survival(tau - h, c.mu, c.model))) /
                (2 * h);
            EXPECT_NEAR(fd, std::exp(log_pdf(tau, c.mu, c.model)), 1e-5) << label(c);
        }
}

TEST(Timing, ExponentialSampleMean) {
    Engine rng(2);
    const auto m = TimingModel::make(Family::exponential);
    double s = 0;
    const int n = 1'000'000;
    for (int k = 0; k < n; ++k) s += sample_increment(2.0, m, rng);
    EXPECT_NEAR(s / n, 2.0, 0.01);
}

TEST(Timing, LogNormalSampleMedian) {
    Engine rng(3);
    const auto m = TimingModel::make(Family::lognormal, std::nullopt, 1.0);
    std::vector<double> v(1'000'000);
    for (auto& x : v) x = sample_increment(0.0, m, rng);
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    EXPECT_NEAR(v[v.size() / 2], 1.0, 0.01);
}

TEST(Timing, KolmogorovSmirnovAgainstCdf) {
    Engine rng(4);
    for (const auto& c : cases()) {
        std::vector<double> v(1'000'000);
        for (auto& x : v) x = sample_increment(c.mu, c.model, rng);
        std::sort(v.begin(), v.end());
        double d = 0;
        const double n = static_cast<double>(v.size());
        for (std::size_t k = 0; k < v.size(); ++k) {
            const double F = cdf(v[k], c.mu, c.model);
            d = std::max({d, F - k / n, (k + 1) / n - F});
        }
        EXPECT_LT(d, 0.002) << label(c);
    }
}

TEST(Timing, SamplerMeanMatchesMeanParameterization) {
    Engine rng(5);
    for (const auto& c : cases()) {
        double s = 0;
        const int n = 400'000;
        for (int k = 0; k < n; ++k) s += sample_increment(c.mu, c.model, rng);
        const double expect = c.model.family == Family::lognormal ? std::exp(c.mu + 0.5 * *c.model.aux) : c.mu;
        EXPECT_DOUBLE_EQ(increment_mean(c.mu, c.model), expect);
        EXPECT_NEAR(s / n / expect, 1.0, 0.01) << label(c);
    }
}
