#include <gtest/gtest.h>

#include "hem/gir.hpp"

using namespace hem;

namespace {

gir::GirConfig tiny() {
    gir::GirConfig c;
    c.E = 8;
    c.A = 3;
    c.P = 2;
    c.Q = 2;
    c.rounds = 3000;
    c.thin_start = 0;
    c.thin_stride = 1;
    c.seed = 5;
    c.covariate_seed = 6;
    c.quantiles = 100;
    return c;
}

std::vector<std::vector<double>> normal_rows(std::size_t n, double m, std::uint64_t seed) {
    Engine rng(seed);
    std::normal_distribution<double> z(m, 1.0);
    std::vector<std::vector<double>> out(n);
    for (auto& r : out) r = {z(rng)};
    return out;
}

}  // namespace

TEST(Gir, StatisticListHasTwelveEntries) {
    const auto names = gir::statistic_names(4, 3, true);
    ASSERT_EQ(names.size(), 12u);
    EXPECT_EQ(names.front(), "mean_receivers");
    EXPECT_EQ(names.back(), "aux");
    EXPECT_EQ(gir::statistic_names(4, 3, false).size(), 11u);
    gir::GirConfig c;
    c.E = 20;
    const Covariates cov = gir::synthetic_covariates(c.E, c.A, c.P, c.Q, 1);
    EXPECT_EQ(gir::forward_round(c, cov, 0).size(), 12u);
}

TEST(Gir, ForwardStatisticsEchoThePriorDraw) {
    gir::GirConfig c = tiny();
    const Covariates cov = gir::synthetic_covariates(c.E, c.A, c.P, c.Q, c.covariate_seed);
    for (std::uint64_t r = 0; r < 50; ++r) {
        const auto s = gir::forward_round(c, cov, r);
        Engine rng = Engine::stream(c.seed, {tag(StreamTag::gir_forward), r, 0});
        const ModelParams p = c.prior.draw(c.P, c.Q, c.model, rng);
        EXPECT_EQ(s[4], p.b[0]);
        EXPECT_EQ(s[5], p.b[1]);
        EXPECT_EQ(s[6], p.eta[0]);
        EXPECT_EQ(s[7], p.eta[1]);
        EXPECT_EQ(s[8], *p.aux);
        EXPECT_GE(s[0], 1.0);
        EXPECT_GT(s[2], 0.0);
    }
}

TEST(Gir, SyntheticCovariates) {
    const Covariates a = gir::synthetic_covariates(10, 4, 3, 2, 9);
    const Covariates b = gir::synthetic_covariates(10, 4, 3, 2, 9);
    const Covariates c = gir::synthetic_covariates(10, 4, 3, 2, 10);
    for (std::size_t e = 0; e < 10; ++e)
        for (std::size_t i = 0; i < 4; ++i) {
            EXPECT_EQ(a.y_row(e, i)[0], 1.0);
            for (std::size_t j = 0; j < 4; ++j) {
                if (i == j) continue;
                EXPECT_EQ(a.x_row(e, i, j)[0], 1.0);
                EXPECT_EQ(a.x_row(e, i, j)[1], b.x_row(e, i, j)[1]);
                EXPECT_NE(a.x_row(e, i, j)[1], c.x_row(e, i, j)[1]);
            }
        }
    // An event's covariates depend only on its own stream.
    const Covariates longer = gir::synthetic_covariates(12, 4, 3, 2, 9);
    EXPECT_EQ(longer.x_row(7, 1, 2)[2], a.x_row(7, 1, 2)[2]);
}

TEST(Gir, RetainedCounts) {
    gir::GirConfig c;
    c.rounds = 100000;
    c.thin_start = 10000;
    c.thin_stride = 9;
    EXPECT_EQ(c.retained(), 10000u);
    c.rounds = 20000;
    c.thin_start = 2008;
    EXPECT_EQ(c.retained(), 2000u);
    std::size_t kept = 0;
    for (std::size_t r = 0; r < c.rounds; ++r) kept += c.keeps(r);
    EXPECT_EQ(kept, 2000u);
    EXPECT_TRUE(c.keeps(2008));
    EXPECT_FALSE(c.keeps(2007));
    EXPECT_TRUE(c.keeps(19999));
}

TEST(Gir, ConfigValidation) {
    gir::GirConfig c = tiny();
    c.thin_start = c.rounds;
    EXPECT_THROW(c.validate(), ConfigError);
    c = tiny();
    c.thin_stride = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = tiny();
    c.prior.flat = true;
    EXPECT_THROW(c.validate(), ConfigError);
    c = tiny();
    c.A = 1;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Gir, CompareIdenticalSamples) {
    const auto v = normal_rows(500, 0.0, 1);
    const auto rep = gir::compare(v, v, {"x"}, 100);
    ASSERT_EQ(rep.statistics.size(), 1u);
    const auto& s = rep.statistics[0];
    EXPECT_EQ(s.max_pp_deviation, 0.0);
    EXPECT_EQ(s.pp.fa, s.pp.fb);
    EXPECT_EQ(s.t_test.p_value, 1.0);
    EXPECT_EQ(s.mann_whitney.p_value, 1.0);
    EXPECT_EQ(s.forward_quantiles, s.backward_quantiles);
    EXPECT_TRUE(rep.passes());
}

TEST(Gir, CompareDetectsShift) {
    const auto rep = gir::compare(normal_rows(2000, 0.0, 2), normal_rows(2000, 1.0, 3), {"x"}, 1000);
    EXPECT_LT(rep.statistics[0].t_test.p_value, 1e-6);
    EXPECT_LT(rep.statistics[0].mann_whitney.p_value, 1e-6);
    EXPECT_FALSE(rep.passes());
}

TEST(Gir, PValuesAndPpPointsInRange) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto rep = gir::compare(normal_rows(50, 0.0, seed), normal_rows(70, 0.2, seed + 100), {"x"}, 37);
        const auto& s = rep.statistics[0];
        for (double p : {s.t_test.p_value, s.mann_whitney.p_value}) {
            EXPECT_GE(p, 0.0);
            EXPECT_LE(p, 1.0);
        }
        for (std::size_t k = 0; k < s.pp.fa.size(); ++k) {
            EXPECT_GE(s.pp.fa[k], 0.0);
            EXPECT_LE(s.pp.fa[k], 1.0);
            EXPECT_GE(s.pp.fb[k], 0.0);
            EXPECT_LE(s.pp.fb[k], 1.0);
        }
    }
}

TEST(Gir, PriorRedrawOperatorCalibratesHarness) {
    // Replacing the transition operator with an exact prior redraw makes each
    // backward round an independent forward draw.
    const gir::GirConfig c = tiny();
    const Covariates cov = gir::synthetic_covariates(c.E, c.A, c.P, c.Q, c.covariate_seed);
    gir::Operator<mbg::ExactNormalizer> redraw = [&](Sampler<mbg::ExactNormalizer>& s, std::size_t round) {
        Engine rng = Engine::stream(99, {round});
        s.set_params(c.prior.draw(c.P, c.Q, c.model, rng));
    };
    const auto bwd = gir::backward_chain<mbg::ExactNormalizer>(c, cov, redraw);
    ASSERT_EQ(bwd.size(), c.retained());
    const auto fwd = gir::forward_samples(c, cov, c.retained());
    const auto rep = gir::compare(fwd, bwd, gir::statistic_names(c.P, c.Q, true), c.quantiles);
    for (const auto& s : rep.statistics) {
        EXPECT_GT(s.t_test.p_value, 1e-3) << s.name;
        EXPECT_GT(s.mann_whitney.p_value, 1e-3) << s.name;
        EXPECT_LT(s.max_pp_deviation, 0.06) << s.name;
    }
}

TEST(Gir, BackwardChainIsDeterministic) {
    gir::GirConfig c = tiny();
    c.rounds = 200;
    c.thin_start = 50;
    c.thin_stride = 7;
    const Covariates cov = gir::synthetic_covariates(c.E, c.A, c.P, c.Q, c.covariate_seed);
    const auto a = gir::backward_chain(c, cov);
    const auto b = gir::backward_chain(c, cov, gir::mcmc_operator<mbg::ExactNormalizer>(), Execution{3});
    EXPECT_EQ(a.size(), c.retained());
    EXPECT_EQ(a, b);
}
