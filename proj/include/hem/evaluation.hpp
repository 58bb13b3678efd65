#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "hem/data.hpp"
#include "hem/error.hpp"
#include "hem/features.hpp"
#include "hem/generator.hpp"
#include "hem/inference.hpp"
#include "hem/mbg.hpp"
#include "hem/parallel.hpp"
#include "hem/rng.hpp"
#include "hem/stats.hpp"
#include "hem/timing.hpp"

namespace hem {

// ---------------------------------------------------------------------------
//     Metrics
// ---------------------------------------------------------------------------

struct Confusion {
    std::size_t tp = 0, fp = 0, fn = 0;
};

/// F1 from counts; nullopt when there are no positives at all (undefined).
inline std::optional<double> f1_score(const Confusion& c) {
    if (c.tp == 0 && c.fp == 0 && c.fn == 0) return std::nullopt;
    if (c.tp == 0) return 0.0;
    const double precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    const double recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    return 2.0 * precision * recall / (precision + recall);
}

inline std::optional<double> f1_score(std::span<const std::uint8_t> observed, std::span<const std::uint8_t> predicted) {
    if (observed.size() != predicted.size()) throw std::invalid_argument("f1_score: length mismatch");
    Confusion c;
    for (std::size_t k = 0; k < observed.size(); ++k) {
        if (observed[k] && predicted[k]) ++c.tp;
        else if (!observed[k] && predicted[k]) ++c.fp;
        else if (observed[k] && !predicted[k]) ++c.fn;
    }
    return f1_score(c);
}

/// Median of |obs - pred| / |obs|. nullopt for obs == 0.
inline std::optional<double> mdape(double observed, std::span<const double> predictions) {
    if (observed == 0.0 || predictions.empty()) return std::nullopt;
    std::vector<double> err;
    err.reserve(predictions.size());
    for (double p : predictions) err.push_back(std::abs(observed - p) / std::abs(observed));
    return stats::median(err);
}

// ---------------------------------------------------------------------------
//     Held-out positions
// ---------------------------------------------------------------------------

struct HoldoutMask {
    std::vector<std::size_t> senders;                             // event indices
    std::vector<std::pair<std::size_t, NodeIndex>> receivers;     // (event, node), node != sender
    std::vector<std::size_t> timestamps;                          // event indices
    double fraction = 0.0;
    std::uint64_t seed = 0;

    bool empty() const noexcept { return senders.empty() && receivers.empty() && timestamps.empty(); }
};

namespace detail {

/// k distinct indices out of n, sorted.
inline std::vector<std::size_t> choose(std::size_t n, std::size_t k, Engine& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t a = 0; a < k; ++a) {
        const std::size_t b = a + static_cast<std::size_t>(rng.uniform() * static_cast<double>(n - a));
        std::swap(idx[a], idx[std::min(b, n - 1)]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

inline std::size_t share(double fraction, std::size_t n) {
    return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

}  // namespace detail

/// Uniform masks over the E senders, the E(A-1) receiver indicators and the E
/// timestamps, each holding round(fraction * size) positions.
inline HoldoutMask make_holdout(const Dataset& d, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigError("holdout fraction must be in [0, 1)");
    HoldoutMask m;
    m.fraction = fraction;
    m.seed = seed;
    const std::size_t E = d.size(), A = d.node_count();
    Engine rs = Engine::stream(seed, {tag(StreamTag::holdout), 0});
    Engine rr = Engine::stream(seed, {tag(StreamTag::holdout), 1});
    Engine rt = Engine::stream(seed, {tag(StreamTag::holdout), 2});
    m.senders = detail::choose(E, detail::share(fraction, E), rs);
    for (std::size_t k : detail::choose(E * (A - 1), detail::share(fraction, E * (A - 1)), rr)) {
        const std::size_t e = k / (A - 1);
        std::size_t j = k % (A - 1);
        if (j >= d.event(e).sender) ++j;
        m.receivers.emplace_back(e, j);
    }
    m.timestamps = detail::choose(E, detail::share(fraction, E), rt);
    return m;
}

// ---------------------------------------------------------------------------
//     Imputation steps
// ---------------------------------------------------------------------------

struct SenderImputation {
    NodeIndex sender = 0;
    std::vector<double> pi;
};

/// pi_i proportional to f(tau; mu_i) prod_{i' != i} S(tau; mu_i'). Nodes with
/// `allowed[i] == 0` get probability 0.
template <class URBG>
SenderImputation impute_sender(double tau, std::span<const double> mu, const TimingModel& model, URBG& rng,
                               std::span<const std::uint8_t> allowed = {}) {
    const std::size_t A = mu.size();
    std::vector<double> lf(A), ls(A);
    for (std::size_t i = 0; i < A; ++i) {
        lf[i] = log_pdf(tau, mu[i], model);
        ls[i] = log_survival(tau, mu[i], model);
    }
    std::vector<double> logw(A, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < A; ++i) {
        if (!allowed.empty() && !allowed[i]) continue;
        double w = lf[i];
        for (std::size_t k = 0; k < A; ++k)
            if (k != i) w += ls[k];
        logw[i] = w;
    }
    const double top = *std::max_element(logw.begin(), logw.end());
    if (!std::isfinite(top)) throw NumericalError("sender probabilities underflow for every candidate");
    SenderImputation out;
    out.pi.resize(A);
    double total = 0.0;
    for (std::size_t i = 0; i < A; ++i) total += out.pi[i] = std::exp(logw[i] - top);
    for (double& p : out.pi) p /= total;
    std::discrete_distribution<std::size_t> cat(out.pi.begin(), out.pi.end());
    out.sender = cat(rng);
    return out;
}

/// Draw of r_ej from the single-coordinate conditional of the sender's row.
template <class URBG>
std::uint8_t impute_receiver(double lambda, bool rest_nonempty, URBG& rng) {
    return std::generate_canonical<double, 53>(rng) < mbg::gibbs_prob(lambda, rest_nonempty) ? 1 : 0;
}

/// Increment draw by importance sampling: particles from f(.; mu_sender),
/// weights prod_{i != sender} S(tau; mu_i), one resampled. Doubles the
/// particle count up to three times if every weight underflows.
template <class URBG>
double impute_timestamp(std::span<const double> mu, NodeIndex sender, const TimingModel& model, URBG& rng,
                        std::size_t particles = 512) {
    for (int attempt = 0; attempt < 4; ++attempt, particles *= 2) {
        std::vector<double> tau(particles), logw(particles, 0.0);
        for (std::size_t k = 0; k < particles; ++k) {
            double t = sample_increment(mu[sender], model, rng);
            if (!(t > 0.0)) t = std::numeric_limits<double>::denorm_min();
            tau[k] = t;
            for (std::size_t i = 0; i < mu.size(); ++i)
                if (i != sender) logw[k] += log_survival(t, mu[i], model);
        }
        const double top = *std::max_element(logw.begin(), logw.end());
        if (!std::isfinite(top)) continue;
        std::vector<double> w(particles);
        for (std::size_t k = 0; k < particles; ++k) w[k] = std::exp(logw[k] - top);
        std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
        return tau[pick(rng)];
    }
    throw NumericalError("importance weights underflow for every particle");
}

// ---------------------------------------------------------------------------
//     Out-of-sample prediction
// ---------------------------------------------------------------------------

struct PredictionOptions {
    std::size_t replications = 500;
    std::size_t warmup = 0;
    std::size_t particles = 512;
    std::optional<ModelParams> init;
};

struct PredictionReport {
    std::size_t replications = 0;
    std::vector<std::size_t> sender_events;
    std::vector<double> sender_prob;  // mean pi of the true sender, per masked event
    std::vector<std::pair<std::size_t, NodeIndex>> receiver_positions;
    std::vector<std::uint8_t> receiver_observed;
    std::vector<double> receiver_marginal;  // fraction of replications imputing 1
    std::vector<double> f1;                 // per replication (defined ones only)
    std::vector<std::size_t> timestamp_events;
    std::vector<double> timestamp_observed;
    std::vector<double> timestamp_mdape;    // NaN where the observed increment is 0
    std::size_t zero_increment_excluded = 0;

    double mean_sender_prob() const { return sender_prob.empty() ? std::numeric_limits<double>::quiet_NaN() : stats::mean(sender_prob); }
    double mean_f1() const { return f1.empty() ? std::numeric_limits<double>::quiet_NaN() : stats::mean(f1); }
    double median_mdape() const {
        std::vector<double> v;
        for (double x : timestamp_mdape)
            if (!std::isnan(x)) v.push_back(x);
        return v.empty() ? std::numeric_limits<double>::quiet_NaN() : stats::median(v);
    }
};

namespace detail {

/// Working copy of the data with held-out values replaced by imputations.
struct ImputedData {
    const Dataset* base = nullptr;
    std::size_t A = 0;
    std::vector<NodeIndex> sender;
    std::vector<std::uint8_t> receivers;  // E x A
    std::vector<std::uint8_t> masked;     // E x A
    std::vector<std::uint8_t> sender_masked, time_masked;
    std::vector<double> increment;        // race increment behind each event

    bool observed_one(std::size_t e, std::size_t j) const {
        return !masked[e * A + j] && base->event(e).receivers[j] != 0;
    }

    /// Nodes that can send event e: own slot not an observed receiver, and
    /// some other slot observed on or held out.
    std::vector<std::uint8_t> feasible_senders(std::size_t e) const {
        std::vector<std::uint8_t> ok(A, 0);
        for (std::size_t i = 0; i < A; ++i) {
            if (observed_one(e, i)) continue;
            for (std::size_t j = 0; j < A; ++j)
                if (j != i && (observed_one(e, j) || masked[e * A + j])) {
                    ok[i] = 1;
                    break;
                }
        }
        return ok;
    }

    Dataset dataset() const {
        std::vector<EventRecord> ev;
        ev.reserve(base->size());
        for (std::size_t e = 0; e < base->size(); ++e) {
            EventRecord r;
            r.sender = sender[e];
            r.receivers.assign(receivers.begin() + static_cast<std::ptrdiff_t>(e * A),
                               receivers.begin() + static_cast<std::ptrdiff_t>((e + 1) * A));
            r.time = base->event(e).time;
            ev.push_back(std::move(r));
        }
        return Dataset(base->nodes(), std::move(ev), base->t0(), base->epoch());
    }

    /// Observed tie groups, with held-out timestamps split off as singleton
    /// races carrying their imputed increments.
    FitData fit_data(const FeatureSpec& spec) const {
        const Dataset d = dataset();
        Covariates cov = compute_covariates(d, spec);
        const auto ties = tie_grouping(d);
        std::vector<std::vector<std::size_t>> groups;
        std::vector<double> deltas;
        double prev = d.t0();
        for (std::size_t m = 0; m < ties.size(); ++m) {
            std::vector<std::size_t> kept;
            for (std::size_t e : ties.groups[m]) {
                if (time_masked[e]) {
                    groups.push_back({e});
                    deltas.push_back(increment[e]);
                } else {
                    kept.push_back(e);
                }
            }
            if (!kept.empty()) {
                groups.push_back(std::move(kept));
                deltas.push_back(ties.timepoints[m] - prev);
            }
            prev = ties.timepoints[m];
        }
        return FitData::assemble(A, sender, receivers, std::move(cov), groups, deltas);
    }
};

}  // namespace detail

/// Interleaves imputation of every held-out value with one sampler iteration
/// per replication. The first `warmup` replications are not recorded.
template <class Normalizer = mbg::ExactNormalizer>
PredictionReport predict(const Dataset& d, HoldoutMask mask, const FeatureSpec& spec, const TimingModel& model,
                         const PriorSpec& prior, McmcConfig cfg, const PredictionOptions& opts,
                         const Execution& exec = {}) {
    const std::size_t E = d.size(), A = d.node_count();
    std::sort(mask.senders.begin(), mask.senders.end());
    std::sort(mask.receivers.begin(), mask.receivers.end());
    std::sort(mask.timestamps.begin(), mask.timestamps.end());
    PredictionReport rep;
    rep.replications = opts.replications;
    rep.sender_events = mask.senders;
    rep.receiver_positions = mask.receivers;
    rep.timestamp_events = mask.timestamps;
    if (E == 0) return rep;

    detail::ImputedData w;
    w.base = &d;
    w.A = A;
    w.masked.assign(E * A, 0);
    w.sender_masked.assign(E, 0);
    w.time_masked.assign(E, 0);
    for (const auto& ev : d.events()) {
        w.sender.push_back(ev.sender);
        w.receivers.insert(w.receivers.end(), ev.receivers.begin(), ev.receivers.end());
    }
    const auto anchors = anchor_times(d);
    for (std::size_t e = 0; e < E; ++e) w.increment.push_back(d.event(e).time - anchors[e]);
    for (std::size_t e : mask.senders) w.sender_masked.at(e) = 1;
    for (auto [e, j] : mask.receivers) {
        if (j == d.event(e).sender) throw ConfigError("a held-out receiver slot coincides with the sender");
        w.masked.at(e * A + j) = 1;
    }
    for (std::size_t e : mask.timestamps) w.time_masked.at(e) = 1;
    for (auto [e, j] : mask.receivers) rep.receiver_observed.push_back(d.event(e).receivers[j]);
    for (std::size_t e : mask.timestamps) rep.timestamp_observed.push_back(w.increment[e]);

    // Starting state: held-out indicators on, held-out senders at their
    // lowest feasible node, held-out increments at the median increment.
    {
        std::vector<double> positive;
        for (double t : w.increment)
            if (t > 0.0) positive.push_back(t);
        const double start = positive.empty() ? 1.0 : stats::median(positive);
        for (std::size_t e : mask.timestamps) w.increment[e] = start;
        for (std::size_t k = 0; k < E * A; ++k)
            if (w.masked[k]) w.receivers[k] = 1;
        for (std::size_t e : mask.senders) {
            const auto ok = w.feasible_senders(e);
            w.sender[e] = static_cast<NodeIndex>(std::find(ok.begin(), ok.end(), 1) - ok.begin());
        }
        for (std::size_t e = 0; e < E; ++e) w.receivers[e * A + w.sender[e]] = 0;
    }

    const std::size_t total = opts.warmup + opts.replications;
    cfg.burn_in = opts.warmup;
    cfg.outer = std::max(cfg.outer, total);
    cfg.thin = 1;

    std::vector<double> sender_sum(mask.senders.size(), 0.0);
    std::vector<double> receiver_ones(mask.receivers.size(), 0.0);
    std::vector<std::vector<double>> tau_draws(mask.timestamps.size());
    std::vector<Confusion> confusion;

    std::vector<double> lambda(A), mu(A);
    auto impute_all = [&](const ModelParams& params, const FitData& fd, const TimingModel& m, Engine& rng,
                          bool record) {
        std::size_t sk = 0, rk = 0, tk = 0;
        for (std::size_t e = 0; e < E; ++e) {
            if (!w.sender_masked[e] && !w.time_masked[e] && (rk >= mask.receivers.size() || mask.receivers[rk].first != e))
                continue;
            for (std::size_t i = 0; i < A; ++i) mu[i] = mean_param(params.eta, fd.cov.y_row(e, i), m.link);
            if (w.sender_masked[e]) {
                const auto imp = impute_sender(w.increment[e], mu, m, rng, w.feasible_senders(e));
                if (record) sender_sum[sk] += imp.pi[d.event(e).sender];
                ++sk;
                w.sender[e] = imp.sender;
                w.receivers[e * A + imp.sender] = 0;
            }
            const NodeIndex s = w.sender[e];
            mbg::intensity(params.b, fd.cov.receiver_block(e).subspan(s * A * fd.P(), A * fd.P()), s, lambda);
            std::size_t count = 0;
            for (std::size_t j = 0; j < A; ++j) count += j != s && w.receivers[e * A + j];
            for (std::size_t j = 0; j < A; ++j) {
                if (j == s || !w.masked[e * A + j]) continue;
                auto& slot = w.receivers[e * A + j];
                const std::size_t rest = count - slot;
                slot = impute_receiver(lambda[j], rest > 0, rng);
                count = rest + slot;
            }
            if (count == 0) throw NumericalError("imputed receiver set is empty for event " + std::to_string(e));
            for (; rk < mask.receivers.size() && mask.receivers[rk].first == e; ++rk)
                if (record) receiver_ones[rk] += w.receivers[e * A + mask.receivers[rk].second];
            if (w.time_masked[e]) {
                const double tau = impute_timestamp(mu, s, m, rng, opts.particles);
                w.increment[e] = tau;
                if (record) tau_draws[tk].push_back(tau);
                ++tk;
            }
        }
        if (record) {
            Confusion c;
            for (std::size_t k = 0; k < mask.receivers.size(); ++k) {
                const auto [e, j] = mask.receivers[k];
                const bool obs = rep.receiver_observed[k] != 0;
                const bool pred = w.receivers[e * A + j] != 0;
                if (obs && pred) ++c.tp;
                else if (!obs && pred) ++c.fp;
                else if (obs && !pred) ++c.fn;
            }
            confusion.push_back(c);
        }
    };

    ModelParams start;
    if (opts.init) {
        start = *opts.init;
        start.validate(spec.receiver_dim(), spec.timing_dim());
    } else {
        start.b.assign(spec.receiver_dim(), 0.0);
        start.eta.assign(spec.timing_dim(), 0.0);
        if (model.has_aux()) start.aux = model.aux;
    }
    {
        Engine rng = Engine::stream(cfg.seed, {tag(StreamTag::impute), 0});
        const FitData fd0 = w.fit_data(spec);
        impute_all(start, fd0, start.aux ? model.with_aux(*start.aux) : model, rng, false);
    }

    Sampler<Normalizer> sampler(w.fit_data(spec), model, prior, cfg, exec);
    sampler.initialize(start);
    for (std::size_t n = 1; n <= total; ++n) {
        Engine rng = Engine::stream(cfg.seed, {tag(StreamTag::impute), n});
        impute_all(sampler.params(), sampler.data(), sampler.current_model(), rng, n > opts.warmup);
        sampler.replace_data(w.fit_data(spec));
        sampler.step(n);
    }

    const double N = static_cast<double>(opts.replications);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (double s : sender_sum) rep.sender_prob.push_back(N > 0 ? s / N : nan);
    for (double s : receiver_ones) rep.receiver_marginal.push_back(N > 0 ? s / N : nan);
    for (const auto& c : confusion)
        if (auto f = f1_score(c)) rep.f1.push_back(*f);
    for (std::size_t k = 0; k < mask.timestamps.size(); ++k) {
        const auto m = mdape(rep.timestamp_observed[k], tau_draws[k]);
        if (rep.timestamp_observed[k] == 0.0) ++rep.zero_increment_excluded;
        rep.timestamp_mdape.push_back(m.value_or(nan));
    }
    return rep;
}

// ---------------------------------------------------------------------------
//     Posterior predictive checks
// ---------------------------------------------------------------------------

/// N indices spread evenly over [0, n), first and last included when N > 1.
inline std::vector<std::size_t> evenly_spaced(std::size_t n, std::size_t N) {
    std::vector<std::size_t> idx;
    if (n == 0) return idx;
    for (std::size_t k = 0; k < N; ++k)
        idx.push_back(N == 1 ? n - 1 : static_cast<std::size_t>(std::llround(static_cast<double>(k) * static_cast<double>(n - 1) / static_cast<double>(N - 1))));
    return idx;
}

struct PpcResult {
    std::size_t N = 0, A = 0, max_size = 0, pp_points = 0;
    std::vector<double> observed_out, observed_in, observed_sizes;
    std::vector<double> sim_out, sim_in, sim_sizes;  // N rows each (A, A, max_size columns)
    std::vector<double> pp_levels;                    // observed CDF at the thresholds
    std::vector<double> sim_pp;                       // N x pp_points simulated CDF values

    std::span<const double> out_row(std::size_t n) const { return {sim_out.data() + n * A, A}; }
    std::span<const double> in_row(std::size_t n) const { return {sim_in.data() + n * A, A}; }
    std::span<const double> size_row(std::size_t n) const { return {sim_sizes.data() + n * max_size, max_size}; }
};

struct DatasetSummary {
    std::vector<double> out, in, sizes;  // sizes[k] = events with k+1 receivers
    std::vector<double> increments;
};

inline DatasetSummary summarize(const Dataset& d, std::size_t max_size) {
    const std::size_t A = d.node_count();
    DatasetSummary s{std::vector<double>(A, 0.0), std::vector<double>(A, 0.0), std::vector<double>(max_size, 0.0),
                     time_increments(d)};
    for (const auto& ev : d.events()) {
        s.out[ev.sender] += 1.0;
        for (std::size_t j = 0; j < A; ++j) s.in[j] += ev.receivers[j];
        const std::size_t n = ev.receiver_count();
        if (n >= 1 && n <= max_size) s.sizes[n - 1] += 1.0;
    }
    return s;
}

/// Simulates N datasets shaped like `d` (same E, nodes, t0) from the given
/// parameter draws (cycled in order) and tabulates degree, receiver-size and
/// increment-distribution statistics next to the observed ones.
inline PpcResult ppc_run(const std::vector<ModelParams>& draws, const Dataset& d, const FeatureSpec& spec,
                         const TimingModel& model, std::size_t N, std::uint64_t seed, std::size_t pp_points = 100,
                         const Execution& exec = {}) {
    if (draws.empty()) throw ConfigError("posterior predictive check needs at least one parameter draw");
    const std::size_t A = d.node_count();
    std::size_t max_size = 1;
    for (const auto& ev : d.events()) max_size = std::max(max_size, ev.receiver_count());
    const DatasetSummary obs = summarize(d, max_size);

    PpcResult r;
    r.N = N;
    r.A = A;
    r.max_size = max_size;
    r.pp_points = pp_points;
    r.observed_out = obs.out;
    r.observed_in = obs.in;
    r.observed_sizes = obs.sizes;
    r.sim_out.assign(N * A, 0.0);
    r.sim_in.assign(N * A, 0.0);
    r.sim_sizes.assign(N * max_size, 0.0);
    r.sim_pp.assign(N * pp_points, std::numeric_limits<double>::quiet_NaN());

    std::vector<double> sorted_obs(obs.increments);
    std::sort(sorted_obs.begin(), sorted_obs.end());
    std::vector<double> thresholds;
    if (!sorted_obs.empty())
        for (double p : stats::probability_grid(pp_points)) {
            const double x = stats::quantile_sorted(sorted_obs, p);
            thresholds.push_back(x);
            r.pp_levels.push_back(stats::ecdf_sorted(sorted_obs, x));
        }

    parallel_for(exec, N, [&](std::size_t n) {
        const ModelParams& p = draws[n % draws.size()];
        const TimingModel m = p.aux ? model.with_aux(*p.aux) : model;
        HistoryFeatures source(d.nodes(), spec, d.epoch());
        const Simulation sim = simulate(d.size(), d.nodes(), p, source, m, d.t0(), d.epoch(),
                                        seeded_streams(Engine::stream(seed, {tag(StreamTag::ppc), n})()),
                                        SimulationOptions{false});
        const DatasetSummary s = summarize(sim.data, max_size);
        std::copy(s.out.begin(), s.out.end(), r.sim_out.begin() + static_cast<std::ptrdiff_t>(n * A));
        std::copy(s.in.begin(), s.in.end(), r.sim_in.begin() + static_cast<std::ptrdiff_t>(n * A));
        std::copy(s.sizes.begin(), s.sizes.end(), r.sim_sizes.begin() + static_cast<std::ptrdiff_t>(n * max_size));
        std::vector<double> inc(s.increments);
        std::sort(inc.begin(), inc.end());
        if (!inc.empty())
            for (std::size_t k = 0; k < thresholds.size(); ++k)
                r.sim_pp[n * pp_points + k] = stats::ecdf_sorted(inc, thresholds[k]);
    });
    return r;
}

/// Fraction of positions whose observed value lies inside the central
/// `level` band of the simulated values (rows = replications).
inline double band_coverage(std::span<const double> observed, std::span<const double> simulated, std::size_t N,
                            double level = 0.95) {
    const std::size_t K = observed.size();
    if (K == 0 || N == 0) return std::numeric_limits<double>::quiet_NaN();
    const double lo = (1.0 - level) / 2.0;
    const double probs[] = {lo, 1.0 - lo};
    std::size_t inside = 0;
    std::vector<double> col(N);
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t n = 0; n < N; ++n) col[n] = simulated[n * K + k];
        const auto q = stats::quantiles(col, probs);
        if (observed[k] >= q[0] && observed[k] <= q[1]) ++inside;
    }
    return static_cast<double>(inside) / static_cast<double>(K);
}

// ---------------------------------------------------------------------------
//     Convergence diagnostic
// ---------------------------------------------------------------------------

/// Difference of means between the first `frac_a` and last `frac_b` of the
/// chain, standardized by spectral variance estimates (Bartlett window with
/// lag about 4% of each segment). A constant chain gives 0.
inline double geweke_diag(std::span<const double> chain, double frac_a = 0.1, double frac_b = 0.5) {
    if (!(frac_a > 0.0 && frac_b > 0.0 && frac_a + frac_b <= 1.0))
        throw ConfigError("Geweke fractions must be positive and sum to at most 1");
    const std::size_t n = chain.size();
    const auto na = static_cast<std::size_t>(std::floor(frac_a * static_cast<double>(n)));
    const auto nb = static_cast<std::size_t>(std::floor(frac_b * static_cast<double>(n)));
    if (na < 2 || nb < 2) throw ConfigError("chain too short for the Geweke diagnostic");
    const auto a = chain.first(na);
    const auto b = chain.last(nb);
    auto lag = [](std::size_t len) { return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.04 * static_cast<double>(len)))); };
    const double ma = stats::mean(a), mb = stats::mean(b);
    const double va = stats::spectral_density_zero(a, lag(na)) / static_cast<double>(na);
    const double vb = stats::spectral_density_zero(b, lag(nb)) / static_cast<double>(nb);
    const double se = std::sqrt(va + vb);
    if (se == 0.0) {
        if (ma == mb) return 0.0;
        return ma > mb ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    }
    return (ma - mb) / se;
}

}  // namespace hem
