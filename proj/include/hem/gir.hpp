#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "hem/data.hpp"
#include "hem/features.hpp"
#include "hem/generator.hpp"
#include "hem/inference.hpp"
#include "hem/parallel.hpp"
#include "hem/rng.hpp"
#include "hem/stats.hpp"
#include "hem/timing.hpp"

namespace hem::gir {

struct GirConfig {
    std::size_t E = 100, A = 5, P = 4, Q = 3;
    TimingModel model = TimingModel::make(Family::lognormal);
    std::size_t rounds = 100000;
    std::size_t thin_start = 10000;  // 0-based index of the first retained backward round
    std::size_t thin_stride = 9;
    std::uint64_t covariate_seed = 0;
    std::uint64_t seed = 0;
    std::size_t quantiles = 1000;
    PriorSpec prior;
    std::size_t inner_b = 20, inner_eta = 10;
    double scale_b = 0.1, scale_eta = 0.1, scale_aux = 0.3;
    bool adapt = true;  // proposal adaptation during the rounds before thin_start
    double alpha = 0.01;
    double max_pp_deviation = 0.03;

    void validate() const {
        if (A < 2) throw ConfigError("GiR needs at least two nodes");
        if (E == 0) throw ConfigError("GiR needs at least one event");
        if (P == 0 || Q == 0) throw ConfigError("P and Q must be positive (intercept included)");
        if (thin_stride == 0) throw ConfigError("thinning stride must be at least 1");
        if (thin_start >= rounds) throw ConfigError("rounds must exceed the thinning start");
        if (prior.flat) throw ConfigError("GiR needs a proper prior");
        model.validate();
        prior.validate(P, Q);
    }

    std::size_t retained() const noexcept { return (rounds - 1 - thin_start) / thin_stride + 1; }
    bool keeps(std::size_t r) const noexcept { return r >= thin_start && (r - thin_start) % thin_stride == 0; }

    McmcConfig mcmc() const {
        McmcConfig c;
        c.outer = rounds;
        c.burn_in = thin_start;
        c.thin = 1;
        c.inner_b = inner_b;
        c.inner_eta = inner_eta;
        c.scale_b = scale_b;
        c.scale_eta = scale_eta;
        c.scale_aux = scale_aux;
        c.adapt = adapt;
        c.seed = Engine::stream(seed, {tag(StreamTag::gir_backward), 0})();
        return c;
    }
};

/// Intercept plus standard-normal columns for every event, dyad and node.
inline Covariates synthetic_covariates(std::size_t E, std::size_t A, std::size_t P, std::size_t Q,
                                       std::uint64_t seed) {
    Covariates cov(E, A, P, Q);
    for (std::size_t e = 0; e < E; ++e) {
        Engine rng = Engine::stream(seed, {tag(StreamTag::covariates), e});
        std::normal_distribution<double> z(0.0, 1.0);
        for (std::size_t i = 0; i < A; ++i) {
            for (std::size_t j = 0; j < A; ++j) {
                auto row = cov.x_row(e, i, j);
                if (i == j) {
                    std::fill(row.begin(), row.end(), 0.0);
                    continue;
                }
                row[0] = 1.0;
                for (std::size_t p = 1; p < P; ++p) row[p] = z(rng);
            }
            auto y = cov.y_row(e, i);
            y[0] = 1.0;
            for (std::size_t q = 1; q < Q; ++q) y[q] = z(rng);
        }
    }
    return cov;
}

/// Names of the tracked statistics, in vector order.
inline std::vector<std::string> statistic_names(std::size_t P, std::size_t Q, bool has_aux) {
    std::vector<std::string> n{"mean_receivers", "var_receivers", "mean_increment", "var_increment"};
    for (std::size_t p = 1; p <= P; ++p) n.push_back("b_" + std::to_string(p));
    for (std::size_t q = 1; q <= Q; ++q) n.push_back("eta_" + std::to_string(q));
    if (has_aux) n.push_back("aux");
    return n;
}

/// Receiver-set size and increment moments of the data plus the parameters.
inline std::vector<double> statistics(const Simulation& sim, const ModelParams& params) {
    const Dataset& d = sim.data;
    std::vector<double> sizes, incr;
    for (std::size_t e = 0; e < d.size(); ++e) {
        sizes.push_back(static_cast<double>(d.event(e).receiver_count()));
        const bool first_of_race = e == 0 || sim.race_of[e] != sim.race_of[e - 1];
        incr.push_back(first_of_race ? sim.race_increment[sim.race_of[e]] : 0.0);
    }
    std::vector<double> s{stats::mean(sizes), stats::variance(sizes), stats::mean(incr), stats::variance(incr)};
    s.insert(s.end(), params.b.begin(), params.b.end());
    s.insert(s.end(), params.eta.begin(), params.eta.end());
    if (params.aux) s.push_back(*params.aux);
    return s;
}

namespace detail {

inline Simulation generate(const GirConfig& cfg, const Covariates& cov, const ModelParams& params, StreamTag t,
                           std::uint64_t round, bool keep_draws) {
    static const Epoch epoch{};
    const NodeTable nodes = NodeTable::anonymous(cfg.A);
    FixedFeatures source(cov);
    const TimingModel m = params.aux ? cfg.model.with_aux(*params.aux) : cfg.model;
    const std::uint64_t seed = cfg.seed;
    auto streams = [seed, t, round](std::size_t e, std::size_t i) {
        return Engine::stream(seed, {tag(t), round, 1, e, i});
    };
    return simulate(cfg.E, nodes, params, source, m, 0.0, epoch, streams, SimulationOptions{keep_draws});
}

inline Latents latents_of(const Simulation& sim) {
    Latents lat;
    lat.A = sim.data.node_count();
    for (const auto& d : sim.draws) lat.u.insert(lat.u.end(), d.u.begin(), d.u.end());
    return lat;
}

}  // namespace detail

/// One draw of parameters and data from the prior predictive.
inline std::vector<double> forward_round(const GirConfig& cfg, const Covariates& cov, std::uint64_t round) {
    Engine rng = Engine::stream(cfg.seed, {tag(StreamTag::gir_forward), round, 0});
    const ModelParams params = cfg.prior.draw(cfg.P, cfg.Q, cfg.model, rng);
    const Simulation sim = detail::generate(cfg, cov, params, StreamTag::gir_forward, round, false);
    return statistics(sim, params);
}

inline std::vector<std::vector<double>> forward_samples(const GirConfig& cfg, const Covariates& cov, std::size_t n,
                                                        const Execution& exec = {}) {
    std::vector<std::vector<double>> out(n);
    parallel_for(exec, n, [&](std::size_t r) { out[r] = forward_round(cfg, cov, r); });
    return out;
}

/// Transition operator applied to the backward chain once per round.
template <class Normalizer>
using Operator = std::function<void(Sampler<Normalizer>&, std::size_t round)>;

template <class Normalizer>
Operator<Normalizer> mcmc_operator() {
    return [](Sampler<Normalizer>& s, std::size_t round) { s.step(round + 1); };
}

/// Successive-conditional sampler: start from a prior draw, then alternate the
/// transition operator (parameters and candidates given data) with a fresh
/// draw of data and candidates given parameters. Returns the statistics of the
/// retained rounds.
template <class Normalizer = mbg::ExactNormalizer>
std::vector<std::vector<double>> backward_chain(const GirConfig& cfg, const Covariates& cov,
                                                Operator<Normalizer> op = mcmc_operator<Normalizer>(),
                                                const Execution& exec = {},
                                                const std::function<void(std::size_t, std::size_t)>& progress = {}) {
    Engine rng = Engine::stream(cfg.seed, {tag(StreamTag::gir_backward), 1});
    ModelParams params = cfg.prior.draw(cfg.P, cfg.Q, cfg.model, rng);
    Simulation sim = detail::generate(cfg, cov, params, StreamTag::gir_backward, 0, true);
    Sampler<Normalizer> sampler(FitData::build(sim, cov), cfg.model, cfg.prior, cfg.mcmc(), exec);
    sampler.initialize(params, detail::latents_of(sim));

    std::vector<std::vector<double>> kept;
    kept.reserve(cfg.retained());
    for (std::size_t r = 0; r < cfg.rounds; ++r) {
        op(sampler, r);
        sim = detail::generate(cfg, cov, sampler.params(), StreamTag::gir_backward, r + 1, true);
        sampler.replace_data(FitData::build(sim, cov), detail::latents_of(sim));
        if (cfg.keeps(r)) kept.push_back(statistics(sim, sampler.params()));
        if (progress) progress(r + 1, cfg.rounds);
    }
    return kept;
}

struct StatisticReport {
    std::string name;
    std::vector<double> forward, backward;
    std::vector<double> forward_quantiles, backward_quantiles;
    stats::TestResult t_test, mann_whitney;
    stats::PpCurve pp;
    double max_pp_deviation = 0.0;
};

struct GirReport {
    std::vector<StatisticReport> statistics;
    double alpha = 0.01;
    double max_pp_allowed = 0.03;

    bool statistic_passes(const StatisticReport& s) const {
        return s.t_test.p_value > alpha && s.mann_whitney.p_value > alpha && s.max_pp_deviation < max_pp_allowed;
    }
    bool passes() const {
        for (const auto& s : statistics)
            if (!statistic_passes(s)) return false;
        return true;
    }
    double min_p_value() const {
        double m = 1.0;
        for (const auto& s : statistics) m = std::min({m, s.t_test.p_value, s.mann_whitney.p_value});
        return m;
    }
};

/// Per-statistic two-sample comparison of forward and backward vectors.
inline GirReport compare(const std::vector<std::vector<double>>& forward,
                         const std::vector<std::vector<double>>& backward, const std::vector<std::string>& names,
                         std::size_t n_quantiles = 1000, double alpha = 0.01, double max_pp = 0.03) {
    GirReport rep;
    rep.alpha = alpha;
    rep.max_pp_allowed = max_pp;
    const auto grid = stats::probability_grid(n_quantiles);
    for (std::size_t k = 0; k < names.size(); ++k) {
        StatisticReport s;
        s.name = names[k];
        for (const auto& v : forward) s.forward.push_back(v.at(k));
        for (const auto& v : backward) s.backward.push_back(v.at(k));
        s.forward_quantiles = stats::quantiles(s.forward, grid);
        s.backward_quantiles = stats::quantiles(s.backward, grid);
        s.t_test = stats::welch_t_test(s.forward, s.backward);
        s.mann_whitney = stats::mann_whitney(s.forward, s.backward);
        s.pp = stats::pp_curve(s.forward, s.backward, n_quantiles);
        s.max_pp_deviation = s.pp.max_deviation();
        rep.statistics.push_back(std::move(s));
    }
    return rep;
}

/// Full test: forward samples, one backward chain, comparison.
template <class Normalizer = mbg::ExactNormalizer>
GirReport run(const GirConfig& cfg, const Execution& exec = {},
              const std::function<void(std::size_t, std::size_t)>& progress = {}) {
    cfg.validate();
    const Covariates cov = synthetic_covariates(cfg.E, cfg.A, cfg.P, cfg.Q, cfg.covariate_seed);
    const auto fwd = forward_samples(cfg, cov, cfg.retained(), exec);
    const auto bwd = backward_chain<Normalizer>(cfg, cov, mcmc_operator<Normalizer>(), exec, progress);
    return compare(fwd, bwd, statistic_names(cfg.P, cfg.Q, cfg.model.has_aux()), cfg.quantiles, cfg.alpha,
                   cfg.max_pp_deviation);
}

}  // namespace hem::gir
