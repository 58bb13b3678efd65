#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hem/csv.hpp"
#include "hem/data.hpp"
#include "hem/error.hpp"
#include "hem/features.hpp"
#include "hem/generator.hpp"
#include "hem/mbg.hpp"
#include "hem/model.hpp"
#include "hem/parallel.hpp"
#include "hem/rng.hpp"
#include "hem/timing.hpp"

namespace hem {

// ---------------------------------------------------------------------------
//     Priors
// ---------------------------------------------------------------------------

/// Independent normal priors on b and eta, inverse-gamma(shape, scale) on the
/// timing aux parameter. Empty mean/variance vectors broadcast the defaults
/// N(0, 2). `flat` switches every prior off (improper, likelihood only).
struct PriorSpec {
    std::vector<double> mean_b, var_b, mean_eta, var_eta;
    double default_mean = 0.0;
    double default_var = 2.0;
    double aux_shape = 2.0;
    double aux_scale = 1.0;
    bool flat = false;

    static double at(const std::vector<double>& v, std::size_t k, double fallback) {
        if (v.empty()) return fallback;
        if (v.size() == 1) return v[0];
        return v.at(k);
    }

    double b_mean(std::size_t p) const { return at(mean_b, p, default_mean); }
    double b_var(std::size_t p) const { return at(var_b, p, default_var); }
    double eta_mean(std::size_t q) const { return at(mean_eta, q, default_mean); }
    double eta_var(std::size_t q) const { return at(var_eta, q, default_var); }

    void validate(std::size_t P, std::size_t Q) const {
        auto check = [](const std::vector<double>& v, std::size_t n, const char* what) {
            if (v.size() > 1 && v.size() != n)
                throw ConfigError(std::string("prior ") + what + " has length " + std::to_string(v.size()) +
                                  ", expected " + std::to_string(n));
        };
        check(mean_b, P, "mean_b");
        check(var_b, P, "var_b");
        check(mean_eta, Q, "mean_eta");
        check(var_eta, Q, "var_eta");
        for (std::size_t p = 0; p < P; ++p)
            if (!(b_var(p) > 0.0)) throw ConfigError("prior variances must be positive");
        for (std::size_t q = 0; q < Q; ++q)
            if (!(eta_var(q) > 0.0)) throw ConfigError("prior variances must be positive");
        if (!(aux_shape > 0.0) || !(aux_scale > 0.0)) throw ConfigError("inverse-gamma hyperparameters must be positive");
    }

    double log_prior_b(std::span<const double> b) const {
        if (flat) return 0.0;
        double s = 0.0;
        for (std::size_t p = 0; p < b.size(); ++p) s += log_normal_density(b[p], b_mean(p), b_var(p));
        return s;
    }

    double log_prior_eta(std::span<const double> eta) const {
        if (flat) return 0.0;
        double s = 0.0;
        for (std::size_t q = 0; q < eta.size(); ++q) s += log_normal_density(eta[q], eta_mean(q), eta_var(q));
        return s;
    }

    double log_prior_aux(double a) const {
        if (!(a > 0.0)) return -std::numeric_limits<double>::infinity();
        if (flat) return 0.0;
        return aux_shape * std::log(aux_scale) - std::lgamma(aux_shape) - (aux_shape + 1.0) * std::log(a) -
               aux_scale / a;
    }

    template <class URBG>
    ModelParams draw(std::size_t P, std::size_t Q, const TimingModel& model, URBG& rng) const {
        if (flat) throw ConfigError("cannot draw from a flat prior");
        ModelParams out;
        std::normal_distribution<double> z(0.0, 1.0);
        for (std::size_t p = 0; p < P; ++p) out.b.push_back(b_mean(p) + std::sqrt(b_var(p)) * z(rng));
        for (std::size_t q = 0; q < Q; ++q) out.eta.push_back(eta_mean(q) + std::sqrt(eta_var(q)) * z(rng));
        if (model.has_aux()) out.aux = aux_scale / std::gamma_distribution<double>(aux_shape, 1.0)(rng);
        return out;
    }

private:
    static double log_normal_density(double x, double m, double v) {
        const double d = x - m;
        return -0.5 * std::log(2.0 * std::numbers::pi * v) - 0.5 * d * d / v;
    }
};

// ---------------------------------------------------------------------------
//     Observed data in the shape the sampler needs
// ---------------------------------------------------------------------------

/// One candidate draw to be reconstructed: its features come from `anchor`,
/// and `pinned[i]` names the event whose receivers fix row i (npos = latent).
struct ReceiverBlock {
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::size_t anchor = 0;
    std::vector<std::size_t> pinned;
};

/// A unique timepoint: increment from the previous one, the event whose
/// features give the candidate means, and the distinct senders at that time.
struct TimingGroup {
    double delta = 0.0;
    std::size_t anchor = 0;
    std::vector<NodeIndex> senders;
};

struct FitData {
    std::size_t E = 0, A = 0;
    std::vector<NodeIndex> sender;
    std::vector<std::uint8_t> receivers;  // E x A
    Covariates cov;
    std::vector<ReceiverBlock> blocks;
    std::vector<TimingGroup> groups;

    std::size_t P() const noexcept { return cov.receiver_dim(); }
    std::size_t Q() const noexcept { return cov.timing_dim(); }

    std::span<const std::uint8_t> receiver_row(std::size_t e) const { return {receivers.data() + e * A, A}; }

    /// Groups events by exact timestamp. Inside a group every distinct sender
    /// pins one row of a shared candidate draw; a sender that repeats inside
    /// the group starts another draw with no timing contribution.
    static FitData build(const Dataset& d, Covariates cov) {
        const auto ties = tie_grouping(d);
        std::vector<std::vector<std::size_t>> groups(ties.groups.begin(), ties.groups.end());
        std::vector<double> deltas(ties.size());
        double prev = d.t0();
        for (std::size_t m = 0; m < ties.size(); ++m) {
            deltas[m] = ties.timepoints[m] - prev;
            prev = ties.timepoints[m];
        }
        std::vector<NodeIndex> senders;
        std::vector<std::uint8_t> receivers;
        for (const auto& ev : d.events()) {
            senders.push_back(ev.sender);
            receivers.insert(receivers.end(), ev.receivers.begin(), ev.receivers.end());
        }
        return assemble(d.node_count(), std::move(senders), std::move(receivers), std::move(cov), groups, deltas);
    }

    static FitData build(const Dataset& d, const FeatureSpec& spec) { return build(d, compute_covariates(d, spec)); }

    /// From a simulation, using the race structure and increments the
    /// generator recorded (exact even when accumulated timestamps lose
    /// precision).
    static FitData build(const Simulation& sim, Covariates cov) {
        const Dataset& d = sim.data;
        std::vector<std::vector<std::size_t>> groups(sim.races());
        for (std::size_t e = 0; e < d.size(); ++e) groups[sim.race_of[e]].push_back(e);
        std::vector<NodeIndex> senders;
        std::vector<std::uint8_t> receivers;
        for (const auto& ev : d.events()) {
            senders.push_back(ev.sender);
            receivers.insert(receivers.end(), ev.receivers.begin(), ev.receivers.end());
        }
        return assemble(d.node_count(), std::move(senders), std::move(receivers), std::move(cov), groups,
                        sim.race_increment);
    }

    static FitData assemble(std::size_t A, std::vector<NodeIndex> senders, std::vector<std::uint8_t> receivers,
                            Covariates cov, const std::vector<std::vector<std::size_t>>& groups,
                            const std::vector<double>& deltas) {
        FitData f;
        f.E = senders.size();
        f.A = A;
        f.sender = std::move(senders);
        f.receivers = std::move(receivers);
        f.cov = std::move(cov);
        if (f.cov.events() != f.E || f.cov.nodes() != A)
            throw std::invalid_argument("covariates do not match the event data");
        for (std::size_t m = 0; m < groups.size(); ++m) {
            const auto& g = groups[m];
            if (g.empty()) continue;
            if (!(deltas[m] > 0.0))
                throw DataError(DataErrorKind::bad_value, "non-positive time increment before event " +
                                                              std::to_string(g.front()));
            TimingGroup tg{deltas[m], g.front(), {}};
            ReceiverBlock block{g.front(), std::vector<std::size_t>(A, ReceiverBlock::npos)};
            for (std::size_t e : g) {
                const NodeIndex s = f.sender[e];
                if (block.pinned[s] != ReceiverBlock::npos) {
                    f.blocks.push_back(std::move(block));
                    block = ReceiverBlock{g.front(), std::vector<std::size_t>(A, ReceiverBlock::npos)};
                }
                block.pinned[s] = e;
                if (std::find(tg.senders.begin(), tg.senders.end(), s) == tg.senders.end()) tg.senders.push_back(s);
            }
            f.blocks.push_back(std::move(block));
            std::sort(tg.senders.begin(), tg.senders.end());
            f.groups.push_back(std::move(tg));
        }
        return f;
    }
};

// ---------------------------------------------------------------------------
//     Likelihood pieces
// ---------------------------------------------------------------------------

/// Candidate receiver matrices, one A x A block per ReceiverBlock.
struct Latents {
    std::size_t A = 0;
    std::vector<std::uint8_t> u;

    std::size_t blocks() const noexcept { return A == 0 ? 0 : u.size() / (A * A); }
    std::span<std::uint8_t> row(std::size_t k, std::size_t i) { return {u.data() + (k * A + i) * A, A}; }
    std::span<const std::uint8_t> row(std::size_t k, std::size_t i) const { return {u.data() + (k * A + i) * A, A}; }

    bool operator==(const Latents&) const = default;
};

namespace detail {

inline void block_intensity(std::span<const double> b, std::span<const double> xblock, std::size_t A, std::size_t i,
                            std::span<double> lambda) {
    const std::size_t P = b.size();
    mbg::intensity(b, xblock.subspan(i * A * P, A * P), i, lambda);
}

}  // namespace detail

/// Sum over blocks and rows of log MB_G(u_ki | lambda_ki).
template <class Normalizer = mbg::ExactNormalizer>
double receiver_log_likelihood(std::span<const double> b, const FitData& data, const Latents& lat,
                               const Execution& exec = {}) {
    const std::size_t A = data.A, P = b.size();
    return deterministic_sum(exec, data.blocks.size(), [&](std::size_t k) {
        const auto x = data.cov.receiver_block(data.blocks[k].anchor);
        std::vector<double> lambda(A);
        double s = 0.0;
        for (std::size_t i = 0; i < A; ++i) {
            detail::block_intensity(b, x, A, i, lambda);
            const auto u = lat.row(k, i);
            for (std::size_t j = 0; j < A; ++j)
                if (j != i && u[j]) s += lambda[j];
            s -= Normalizer::log_z(lambda, i);
        }
        (void)P;
        return s;
    });
}

/// Gradient of the exact receiver log-likelihood with respect to b.
inline std::vector<double> receiver_log_likelihood_gradient(std::span<const double> b, const FitData& data,
                                                            const Latents& lat) {
    const std::size_t A = data.A, P = b.size();
    std::vector<double> grad(P, 0.0), lambda(A), dz(A);
    for (std::size_t k = 0; k < data.blocks.size(); ++k) {
        const auto x = data.cov.receiver_block(data.blocks[k].anchor);
        for (std::size_t i = 0; i < A; ++i) {
            detail::block_intensity(b, x, A, i, lambda);
            mbg::log_normalizer_gradient(lambda, i, dz);
            const auto u = lat.row(k, i);
            for (std::size_t j = 0; j < A; ++j) {
                if (j == i) continue;
                const double w = (u[j] ? 1.0 : 0.0) - dz[j];
                const double* row = x.data() + (i * A + j) * P;
                for (std::size_t p = 0; p < P; ++p) grad[p] += w * row[p];
            }
        }
    }
    return grad;
}

/// Timing log-likelihood over unique timepoints: densities for the senders at
/// each timepoint, survival for everyone else.
inline double timing_log_likelihood(std::span<const double> eta, const TimingModel& model, const FitData& data,
                                    const Execution& exec = {}) {
    const std::size_t A = data.A, Q = eta.size();
    return deterministic_sum(exec, data.groups.size(), [&](std::size_t m) {
        const TimingGroup& g = data.groups[m];
        double s = 0.0;
        std::size_t next = 0;
        for (std::size_t i = 0; i < A; ++i) {
            const double mu = mean_param(eta, data.cov.y_row(g.anchor, i), model.link);
            const bool sends = next < g.senders.size() && g.senders[next] == i;
            if (sends) ++next;
            s += sends ? log_pdf(g.delta, mu, model) : log_survival(g.delta, mu, model);
        }
        (void)Q;
        return s;
    });
}

/// Event-by-event form for tie-free data: density of the sender's increment
/// plus survival of the others, with every event using its own features.
inline double timing_log_likelihood_untied(std::span<const double> eta, const TimingModel& model,
                                           const Covariates& cov, std::span<const NodeIndex> senders,
                                           std::span<const double> increments) {
    double s = 0.0;
    for (std::size_t e = 0; e < senders.size(); ++e) {
        for (std::size_t i = 0; i < cov.nodes(); ++i) {
            const double mu = mean_param(eta, cov.y_row(e, i), model.link);
            s += i == senders[e] ? log_pdf(increments[e], mu, model) : log_survival(increments[e], mu, model);
        }
    }
    return s;
}

template <class Normalizer = mbg::ExactNormalizer>
double log_posterior_b(std::span<const double> b, const FitData& data, const Latents& lat, const PriorSpec& prior,
                       const Execution& exec = {}) {
    return receiver_log_likelihood<Normalizer>(b, data, lat, exec) + prior.log_prior_b(b);
}

inline double log_posterior_eta(std::span<const double> eta, const TimingModel& model, const FitData& data,
                                const PriorSpec& prior, const Execution& exec = {}) {
    double lp = timing_log_likelihood(eta, model, data, exec) + prior.log_prior_eta(eta);
    if (model.aux) lp += prior.log_prior_aux(*model.aux);
    return lp;
}

// ---------------------------------------------------------------------------
//     Metropolis-Hastings
// ---------------------------------------------------------------------------

struct MhResult {
    bool accepted = false;
    double log_target = 0.0;
};

/// One Gaussian random-walk step on x (isotropic, standard deviation `scale`).
template <class LogTarget, class URBG>
MhResult random_walk_step(std::vector<double>& x, double log_target, double scale, LogTarget&& target, URBG& rng) {
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> y(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) y[k] = x[k] + scale * z(rng);
    const double ly = target(std::span<const double>(y));
    const double u = std::generate_canonical<double, 53>(rng);
    if (std::log(u) < ly - log_target) {
        x = std::move(y);
        return {true, ly};
    }
    return {false, log_target};
}

// ---------------------------------------------------------------------------
//     Sampler
// ---------------------------------------------------------------------------

struct McmcConfig {
    std::size_t outer = 55000;
    std::size_t inner_b = 20;
    std::size_t inner_eta = 10;
    std::size_t burn_in = 15000;
    std::size_t thin = 40;
    double scale_b = 0.05;
    double scale_eta = 0.05;
    double scale_aux = 0.1;
    bool adapt = true;
    std::uint64_t seed = 0;

    void validate() const {
        if (outer < burn_in) throw ConfigError("outer iterations must be at least the burn-in");
        if (thin == 0) throw ConfigError("thinning stride must be at least 1");
        if (!(scale_b > 0.0) || !(scale_eta > 0.0) || !(scale_aux > 0.0))
            throw ConfigError("proposal scales must be positive");
    }

    std::size_t stored_draws() const noexcept { return (outer - burn_in) / thin; }
    bool stores(std::size_t o) const noexcept { return o > burn_in && (o - burn_in) % thin == 0; }
};

struct BlockStats {
    std::size_t proposed = 0;
    std::size_t accepted = 0;
    double rate() const noexcept {
        return proposed == 0 ? std::numeric_limits<double>::quiet_NaN()
                             : static_cast<double>(accepted) / static_cast<double>(proposed);
    }
};

struct Acceptance {
    BlockStats b, eta, aux;
};

template <class Normalizer = mbg::ExactNormalizer>
class Sampler {
public:
    static constexpr double target_rate_vector = 0.234;
    static constexpr double target_rate_scalar = 0.44;

    Sampler(FitData data, TimingModel model, PriorSpec prior, McmcConfig cfg, Execution exec = {})
        : data_(std::move(data)), model_(std::move(model)), prior_(std::move(prior)), cfg_(cfg), exec_(exec) {
        model_.validate();
        cfg_.validate();
        prior_.validate(data_.P(), data_.Q());
        log_scale_ = {std::log(cfg_.scale_b), std::log(cfg_.scale_eta), std::log(cfg_.scale_aux)};
    }

    /// b = 0, eta = 0, aux = 1 unless given; latent rows drawn from MB_G at
    /// the initial b; observed rows pinned.
    void initialize(std::optional<ModelParams> init = std::nullopt) {
        if (init) {
            init->validate(data_.P(), data_.Q());
            params_ = *init;
            if (model_.has_aux() && !params_.aux) params_.aux = 1.0;
            if (!model_.has_aux()) params_.aux.reset();
        } else {
            params_.b.assign(data_.P(), 0.0);
            params_.eta.assign(data_.Q(), 0.0);
            params_.aux = model_.has_aux() ? std::optional<double>(1.0) : std::nullopt;
        }
        draw_latents();
        check_finite();
    }

    /// Starts from given parameters and candidate matrices (pinned rows are
    /// overwritten by the observed data).
    void initialize(ModelParams params, Latents lat) {
        params.validate(data_.P(), data_.Q());
        params_ = std::move(params);
        if (lat.A != data_.A || lat.blocks() != data_.blocks.size())
            throw std::invalid_argument("latent matrices do not match the data");
        lat_ = std::move(lat);
        pin_rows();
        check_finite();
    }

    /// Swaps in new observed data, keeping parameters. Latent rows are kept
    /// when the block layout is unchanged and redrawn otherwise.
    void replace_data(FitData data) {
        const bool same_layout = data.A == data_.A && data.blocks.size() == data_.blocks.size();
        data_ = std::move(data);
        if (same_layout) {
            pin_rows();
        } else {
            draw_latents();
        }
    }

    /// Swaps in new observed data together with matching candidate matrices.
    void replace_data(FitData data, Latents lat) {
        if (lat.A != data.A || lat.blocks() != data.blocks.size())
            throw std::invalid_argument("latent matrices do not match the data");
        data_ = std::move(data);
        lat_ = std::move(lat);
        pin_rows();
    }

    void set_params(ModelParams params) {
        params.validate(data_.P(), data_.Q());
        params_ = std::move(params);
    }

    /// One outer iteration: latent sweep, I1 b-updates, I2 eta-updates, one aux update.
    void step(std::size_t o) {
        const bool adapting = cfg_.adapt && o <= cfg_.burn_in;
        sweep_latents(o);
        update_b(o, adapting);
        update_eta(o, adapting);
        if (model_.has_aux()) update_aux(o, adapting);
        ++iterations_;
    }

    void sweep_latents(std::size_t o) {
        const std::size_t A = data_.A;
        parallel_for(exec_, data_.blocks.size(), [&](std::size_t k) {
            Engine rng = Engine::stream(cfg_.seed, {tag(StreamTag::latent_sweep), o, k});
            const auto& block = data_.blocks[k];
            const auto x = data_.cov.receiver_block(block.anchor);
            std::vector<double> lambda(A);
            for (std::size_t i = 0; i < A; ++i) {
                if (block.pinned[i] != ReceiverBlock::npos) continue;
                detail::block_intensity(params_.b, x, A, i, lambda);
                auto u = lat_.row(k, i);
                std::size_t count = 0;
                for (std::size_t j = 0; j < A; ++j) count += u[j];
                for (std::size_t j = 0; j < A; ++j) {
                    if (j == i) continue;
                    const bool rest = count - u[j] > 0;
                    const std::uint8_t v = rng.uniform() < mbg::gibbs_prob(lambda[j], rest) ? 1 : 0;
                    count = count - u[j] + v;
                    u[j] = v;
                }
            }
        });
    }

    void update_b(std::size_t o, bool adapting = false) {
        Engine rng = Engine::stream(cfg_.seed, {tag(StreamTag::update_b), o});
        auto target = [&](std::span<const double> b) { return log_posterior_b<Normalizer>(b, data_, lat_, prior_, exec_); };
        double lp = target(params_.b);
        for (std::size_t n = 0; n < cfg_.inner_b; ++n) {
            const MhResult r = random_walk_step(params_.b, lp, std::exp(log_scale_[0]), target, rng);
            lp = r.log_target;
            record(0, r.accepted, adapting, target_rate_vector);
        }
    }

    void update_eta(std::size_t o, bool adapting = false) {
        Engine rng = Engine::stream(cfg_.seed, {tag(StreamTag::update_eta), o});
        const TimingModel m = current_model();
        auto target = [&](std::span<const double> eta) {
            return timing_log_likelihood(eta, m, data_, exec_) + prior_.log_prior_eta(eta);
        };
        double lp = target(params_.eta);
        for (std::size_t n = 0; n < cfg_.inner_eta; ++n) {
            const MhResult r = random_walk_step(params_.eta, lp, std::exp(log_scale_[1]), target, rng);
            lp = r.log_target;
            record(1, r.accepted, adapting, target_rate_vector);
        }
    }

    /// Random walk on log(aux); the target carries the log-Jacobian.
    void update_aux(std::size_t o, bool adapting = false) {
        Engine rng = Engine::stream(cfg_.seed, {tag(StreamTag::update_aux), o});
        auto target = [&](std::span<const double> la) {
            const double a = std::exp(la[0]);
            if (!(a > 0.0) || !std::isfinite(a)) return -std::numeric_limits<double>::infinity();
            return timing_log_likelihood(params_.eta, model_.with_aux(a), data_, exec_) + prior_.log_prior_aux(a) +
                   la[0];
        };
        std::vector<double> la{std::log(*params_.aux)};
        const double lp = target(la);
        const MhResult r = random_walk_step(la, lp, std::exp(log_scale_[2]), target, rng);
        params_.aux = std::exp(la[0]);
        record(2, r.accepted, adapting, target_rate_scalar);
    }

    double log_posterior() const {
        const TimingModel m = current_model();
        double lp = log_posterior_b<Normalizer>(params_.b, data_, lat_, prior_, exec_) +
                    timing_log_likelihood(params_.eta, m, data_, exec_) + prior_.log_prior_eta(params_.eta);
        if (params_.aux) lp += prior_.log_prior_aux(*params_.aux);
        return lp;
    }

    const ModelParams& params() const noexcept { return params_; }
    const Latents& latents() const noexcept { return lat_; }
    const FitData& data() const noexcept { return data_; }
    const TimingModel& model() const noexcept { return model_; }
    TimingModel current_model() const { return params_.aux ? model_.with_aux(*params_.aux) : model_; }
    const McmcConfig& config() const noexcept { return cfg_; }
    const Acceptance& acceptance() const noexcept { return post_burn_; }
    const Acceptance& burn_in_acceptance() const noexcept { return burn_; }
    std::array<double, 3> scales() const {
        return {std::exp(log_scale_[0]), std::exp(log_scale_[1]), std::exp(log_scale_[2])};
    }

private:
    void draw_latents() {
        const std::size_t A = data_.A;
        lat_.A = A;
        lat_.u.assign(data_.blocks.size() * A * A, 0);
        parallel_for(exec_, data_.blocks.size(), [&](std::size_t k) {
            const auto& block = data_.blocks[k];
            const auto x = data_.cov.receiver_block(block.anchor);
            std::vector<double> lambda(A);
            for (std::size_t i = 0; i < A; ++i) {
                if (block.pinned[i] != ReceiverBlock::npos) continue;
                Engine rng = Engine::stream(cfg_.seed, {tag(StreamTag::init), k, i});
                detail::block_intensity(params_.b, x, A, i, lambda);
                mbg::sample(std::span<const double>(lambda), i, rng, lat_.row(k, i));
            }
        });
        pin_rows();
    }

    void pin_rows() {
        for (std::size_t k = 0; k < data_.blocks.size(); ++k)
            for (std::size_t i = 0; i < data_.A; ++i) {
                const std::size_t e = data_.blocks[k].pinned[i];
                if (e == ReceiverBlock::npos) continue;
                const auto obs = data_.receiver_row(e);
                std::copy(obs.begin(), obs.end(), lat_.row(k, i).begin());
            }
    }

    void check_finite() const {
        const double lp = log_posterior();
        if (!std::isfinite(lp)) throw NumericalError("log-posterior is not finite at initialization");
    }

    void record(std::size_t block, bool accepted, bool adapting, double target) {
        Acceptance& acc = adapting || iterations_ < cfg_.burn_in ? burn_ : post_burn_;
        BlockStats& st = block == 0 ? acc.b : block == 1 ? acc.eta : acc.aux;
        ++st.proposed;
        if (accepted) ++st.accepted;
        if (adapting) {
            const double n = static_cast<double>(++adapt_steps_[block]);
            log_scale_[block] += ((accepted ? 1.0 : 0.0) - target) / std::pow(n, 0.6);
        }
    }

    FitData data_;
    TimingModel model_;
    PriorSpec prior_;
    McmcConfig cfg_;
    Execution exec_;
    ModelParams params_;
    Latents lat_;
    std::array<double, 3> log_scale_{};
    std::array<std::size_t, 3> adapt_steps_{};
    std::size_t iterations_ = 0;
    Acceptance burn_, post_burn_;
};

// ---------------------------------------------------------------------------
//     Chain driver
// ---------------------------------------------------------------------------

struct PosteriorSamples {
    std::size_t P = 0, Q = 0;
    bool has_aux = false;
    std::vector<std::size_t> iter;
    std::vector<double> logpost;
    std::vector<double> b;    // draws x P
    std::vector<double> eta;  // draws x Q
    std::vector<double> aux;  // draws (empty without aux)
    Acceptance acceptance;
    Acceptance burn_in_acceptance;
    std::array<double, 3> final_scales{};
    ModelParams last;

    std::size_t size() const noexcept { return iter.size(); }
    std::span<const double> b_draw(std::size_t n) const { return {b.data() + n * P, P}; }
    std::span<const double> eta_draw(std::size_t n) const { return {eta.data() + n * Q, Q}; }

    ModelParams draw(std::size_t n) const {
        ModelParams p;
        const auto bb = b_draw(n);
        const auto ee = eta_draw(n);
        p.b.assign(bb.begin(), bb.end());
        p.eta.assign(ee.begin(), ee.end());
        if (has_aux) p.aux = aux[n];
        return p;
    }

    /// Column names and values of the posterior table.
    std::vector<std::string> columns() const {
        std::vector<std::string> c{"iter", "logpost"};
        for (std::size_t p = 1; p <= P; ++p) c.push_back("b_" + std::to_string(p));
        for (std::size_t q = 1; q <= Q; ++q) c.push_back("eta_" + std::to_string(q));
        if (has_aux) c.push_back("aux");
        return c;
    }

    std::vector<double> column(std::size_t k) const {
        std::vector<double> out(size());
        for (std::size_t n = 0; n < size(); ++n) {
            if (k == 0) out[n] = static_cast<double>(iter[n]);
            else if (k == 1) out[n] = logpost[n];
            else if (k < 2 + P) out[n] = b[n * P + (k - 2)];
            else if (k < 2 + P + Q) out[n] = eta[n * Q + (k - 2 - P)];
            else out[n] = aux[n];
        }
        return out;
    }

    void write_csv(std::ostream& os) const {
        const auto cols = columns();
        for (std::size_t k = 0; k < cols.size(); ++k) os << (k ? "," : "") << cols[k];
        os << '\n';
        for (std::size_t n = 0; n < size(); ++n) {
            os << iter[n] << ',' << csv::format_double(logpost[n]);
            for (double v : b_draw(n)) os << ',' << csv::format_double(v);
            for (double v : eta_draw(n)) os << ',' << csv::format_double(v);
            if (has_aux) os << ',' << csv::format_double(aux[n]);
            os << '\n';
        }
    }

    /// Inverse of write_csv (acceptance statistics are not part of the table).
    static PosteriorSamples parse_csv(std::istream& in, const std::string& source = "posterior") {
        const csv::Table t = csv::parse(in);
        PosteriorSamples s;
        if (t.header.size() < 2 || t.header[0] != "iter" || t.header[1] != "logpost")
            throw DataError(DataErrorKind::missing_column, source + ": expected columns iter,logpost,...");
        for (std::size_t k = 2; k < t.header.size(); ++k) {
            const std::string& h = t.header[k];
            if (h.rfind("b_", 0) == 0 && s.Q == 0 && !s.has_aux) ++s.P;
            else if (h.rfind("eta_", 0) == 0 && !s.has_aux) ++s.Q;
            else if (h == "aux" && k + 1 == t.header.size()) s.has_aux = true;
            else throw DataError(DataErrorKind::bad_value, source + ": unexpected column '" + h + "'");
        }
        if (s.P == 0 || s.Q == 0) throw DataError(DataErrorKind::missing_column, source + ": no b_ or eta_ columns");
        for (const auto& row : t.rows) {
            if (row.size() != t.header.size()) throw DataError(DataErrorKind::bad_value, source + ": ragged row");
            s.iter.push_back(static_cast<std::size_t>(csv::parse_double(row[0], "iter")));
            s.logpost.push_back(csv::parse_double(row[1], "logpost"));
            for (std::size_t p = 0; p < s.P; ++p) s.b.push_back(csv::parse_double(row[2 + p], "b"));
            for (std::size_t q = 0; q < s.Q; ++q) s.eta.push_back(csv::parse_double(row[2 + s.P + q], "eta"));
            if (s.has_aux) s.aux.push_back(csv::parse_double(row.back(), "aux"));
        }
        if (s.size() > 0) s.last = s.draw(s.size() - 1);
        return s;
    }
};

using Progress = std::function<void(std::size_t done, std::size_t total)>;

template <class Normalizer = mbg::ExactNormalizer>
PosteriorSamples collect(Sampler<Normalizer>& s, const Progress& progress = {}) {
    const McmcConfig& cfg = s.config();
    PosteriorSamples out;
    out.P = s.data().P();
    out.Q = s.data().Q();
    out.has_aux = s.model().has_aux();
    for (std::size_t o = 1; o <= cfg.outer; ++o) {
        s.step(o);
        if (cfg.stores(o)) {
            const double lp = s.log_posterior();
            if (!std::isfinite(lp)) throw NumericalError("log-posterior became non-finite at iteration " + std::to_string(o));
            out.iter.push_back(o);
            out.logpost.push_back(lp);
            const auto& p = s.params();
            out.b.insert(out.b.end(), p.b.begin(), p.b.end());
            out.eta.insert(out.eta.end(), p.eta.begin(), p.eta.end());
            if (out.has_aux) out.aux.push_back(*p.aux);
        }
        if (progress) progress(o, cfg.outer);
    }
    out.acceptance = s.acceptance();
    out.burn_in_acceptance = s.burn_in_acceptance();
    out.final_scales = s.scales();
    out.last = s.params();
    return out;
}

template <class Normalizer = mbg::ExactNormalizer>
PosteriorSamples run_mcmc(FitData data, const TimingModel& model, const PriorSpec& prior, const McmcConfig& cfg,
                          const Execution& exec = {}, std::optional<ModelParams> init = std::nullopt,
                          const Progress& progress = {}) {
    Sampler<Normalizer> s(std::move(data), model, prior, cfg, exec);
    s.initialize(std::move(init));
    return collect(s, progress);
}

inline PosteriorSamples run_mcmc(const Dataset& d, const FeatureSpec& spec, const TimingModel& model,
                                 const PriorSpec& prior, const McmcConfig& cfg, const Execution& exec = {},
                                 const Progress& progress = {}) {
    return run_mcmc(FitData::build(d, spec), model, prior, cfg, exec, std::nullopt, progress);
}

}  // namespace hem
