#include <gtest/gtest.h>

#include "hem/config.hpp"

using namespace hem;

TEST(Config, MinimalDocumentUsesDefaults) {
    const RunConfig c = parse_run_config(Json::parse(R"({"seed": 7})"));
    EXPECT_EQ(c.seed, 7u);
    EXPECT_EQ(c.mcmc.seed, 7u);
    EXPECT_EQ(c.gir.seed, 7u);
    EXPECT_EQ(c.mcmc.outer, 55000u);
    EXPECT_EQ(c.mcmc.burn_in, 15000u);
    EXPECT_EQ(c.mcmc.thin, 40u);
    EXPECT_EQ(c.mcmc.inner_b, 20u);
    EXPECT_EQ(c.mcmc.inner_eta, 10u);
    EXPECT_EQ(c.holdout.fraction, 0.1);
    EXPECT_EQ(c.holdout.replications, 500u);
    EXPECT_EQ(c.ppc.replications, 500u);
    EXPECT_EQ(c.features.window.length, 168.0);
    EXPECT_EQ(c.prior.default_var, 2.0);
}

TEST(Config, FullSections) {
    const Json j = Json::parse(R"({
        "seed": 3,
        "features": {"receiver": ["send", "two_send"], "timing": ["PM", "manager"], "window_hours": 24},
        "timing": {"family": "weibull", "aux": 1.5},
        "prior": {"b_var": 4.0, "aux_shape": 3},
        "mcmc": {"outer": 100, "burn_in": 20, "thin": 4},
        "gir": {"events": 50, "rounds": 20000, "thin_start": 2008}
    })");
    const RunConfig c = parse_run_config(j);
    EXPECT_EQ(c.features.receiver,
              (std::vector<ReceiverStat>{ReceiverStat::intercept, ReceiverStat::send, ReceiverStat::two_send}));
    EXPECT_EQ(c.features.timing, (std::vector<TimingStat>{TimingStat::intercept, TimingStat::pm, TimingStat::manager}));
    EXPECT_EQ(c.features.window.length, 24.0);
    EXPECT_EQ(c.timing.family, Family::weibull);
    EXPECT_EQ(c.timing.link, Link::log);
    EXPECT_EQ(*c.timing.aux, 1.5);
    EXPECT_EQ(c.prior.b_var(0), 4.0);
    EXPECT_EQ(c.prior.aux_shape, 3.0);
    EXPECT_EQ(c.mcmc.stored_draws(), 20u);
    EXPECT_EQ(c.gir.E, 50u);
    EXPECT_EQ(c.gir.retained(), 2000u);
}

TEST(Config, Rejections) {
    auto parse = [](const char* text) { return parse_run_config(Json::parse(text)); };
    EXPECT_THROW(parse(R"({})"), ConfigError);
    EXPECT_THROW(parse(R"({"seed": -1})"), ConfigError);
    EXPECT_THROW(parse(R"({"seed": "x"})"), ConfigError);
    EXPECT_THROW(parse(R"({"seed": 1, "sede": 2})"), ConfigError);
    EXPECT_THROW(parse(R"({"seed": 1, "mcmc": {"outer": 10, "burn_in": 20}})"), ConfigError);
    EXPECT_THROW(parse(R"({"seed": 1, "mcmc": {"thinning": 3}})"), ConfigError);
    EXPECT_THROW(parse(R"({"seed": 1, "timing": {"family": "pareto"}})"), ConfigError);
    EXPECT_THROW(parse(R"({"seed": 1, "timing": {"family": "exponential", "aux": 2}})"), ConfigError);
    EXPECT_THROW(parse(R"({"seed": 1, "features": {"receiver": ["triangle"]}})"), ConfigError);
    EXPECT_THROW(parse(R"({"seed": 1, "prior": {"b_var": -1}})"), ConfigError);
    EXPECT_THROW(parse(R"({"seed": 1, "epoch": "yesterday"})"), ConfigError);
}

TEST(Config, Overrides) {
    Json doc = Json::parse(R"({"seed": 1, "mcmc": {"outer": 100}})");
    apply_override(doc, "mcmc.outer=400");
    apply_override(doc, "mcmc.burn_in=50");
    apply_override(doc, "paths.events=data/events.csv");
    apply_override(doc, "timing.family=\"lognormal\"");
    EXPECT_EQ(doc["mcmc"]["outer"], 400);
    EXPECT_EQ(doc["mcmc"]["burn_in"], 50);
    EXPECT_EQ(doc["paths"]["events"], "data/events.csv");
    const RunConfig c = parse_run_config(doc);
    EXPECT_EQ(c.mcmc.outer, 400u);
    EXPECT_EQ(c.paths.events, "data/events.csv");
    EXPECT_EQ(c.timing.family, Family::lognormal);
    EXPECT_THROW(apply_override(doc, "novalue"), ConfigError);
    EXPECT_THROW(apply_override(doc, "=3"), ConfigError);
    EXPECT_THROW(apply_override(doc, "a..b=3"), ConfigError);
}

TEST(Config, ResolvedEchoParsesBack) {
    const Json j = Json::parse(R"({
        "seed": 11,
        "features": {"receiver": ["cosibling"], "timing": ["weekend"]},
        "timing": {"family": "gamma", "aux": 0.7},
        "mcmc": {"outer": 60, "burn_in": 10, "thin": 5}
    })");
    const RunConfig c = parse_run_config(j);
    const Json echo = run_config_json(c);
    const RunConfig back = parse_run_config(echo);
    EXPECT_EQ(run_config_json(back), echo);
}

TEST(Config, MissingFile) { EXPECT_THROW(read_json_file("/nonexistent/config.json"), ConfigError); }
