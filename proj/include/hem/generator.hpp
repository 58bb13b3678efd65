#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "hem/data.hpp"
#include "hem/features.hpp"
#include "hem/mbg.hpp"
#include "hem/model.hpp"
#include "hem/rng.hpp"
#include "hem/timing.hpp"

namespace hem {

/// A source of per-event features for the generative process.
template <class S>
concept FeatureSource = requires(S& s, std::size_t e, double t, NodeIndex i, std::span<const std::uint8_t> r) {
    { s.receiver_dim() } -> std::convertible_to<std::size_t>;
    { s.timing_dim() } -> std::convertible_to<std::size_t>;
    s.begin_event(e, t);
    s.observe(i, r, t);
    { s.receiver_block() } -> std::convertible_to<std::span<const double>>;
    { s.timing_block() } -> std::convertible_to<std::span<const double>>;
};

/// Candidate receiver matrix u_e (A x A, row i = sender i's candidate set)
/// and candidate increments tau_e (length A).
struct CandidateDraw {
    std::size_t A = 0;
    std::vector<std::uint8_t> u;
    std::vector<double> tau;

    explicit CandidateDraw(std::size_t a = 0) : A(a), u(a * a, 0), tau(a, 0.0) {}

    std::span<const std::uint8_t> row(std::size_t i) const { return {u.data() + i * A, A}; }
    std::span<std::uint8_t> row(std::size_t i) { return {u.data() + i * A, A}; }
};

/// Outcome of one race: the candidate draw and the senders that achieved the
/// minimum increment (more than one only on an exact tie).
struct RaceOutcome {
    CandidateDraw draw;
    std::vector<NodeIndex> winners;
    double increment = 0.0;
};

/// Draws candidates for every node from the current feature block and picks
/// the argmin. Node i draws its receivers, then its increment, from the
/// generator returned by `rng_for(i)`.
template <class NodeStreams>
RaceOutcome race(const ModelParams& params, std::span<const double> x_block, std::span<const double> y_block,
                 std::size_t A, const TimingModel& model, NodeStreams&& rng_for) {
    const std::size_t P = params.b.size();
    const std::size_t Q = params.eta.size();
    RaceOutcome out{CandidateDraw(A), {}, 0.0};
    std::vector<double> lambda(A);
    for (std::size_t i = 0; i < A; ++i) {
        auto rng = rng_for(i);
        mbg::intensity(params.b, x_block.subspan(i * A * P, A * P), i, lambda);
        mbg::sample(std::span<const double>(lambda), i, rng, out.draw.row(i));
        const double mu = mean_param(params.eta, y_block.subspan(i * Q, Q), model.link);
        out.draw.tau[i] = sample_increment(mu, model, rng);
    }
    const double best = *std::min_element(out.draw.tau.begin(), out.draw.tau.end());
    for (std::size_t i = 0; i < A; ++i)
        if (out.draw.tau[i] == best) out.winners.push_back(i);
    out.increment = best;
    return out;
}

struct Simulation {
    Dataset data;
    std::vector<CandidateDraw> draws;    // one per race (empty unless kept)
    std::vector<std::size_t> race_of;    // event -> race index
    std::vector<double> race_increment;  // increment of each race

    std::size_t races() const noexcept { return race_increment.size(); }
};

/// Maps (event, node) to an independent, reproducible generator.
using StreamFactory = std::function<Engine(std::size_t event, std::size_t node)>;

inline StreamFactory seeded_streams(std::uint64_t seed, std::uint64_t salt = 0) {
    return [seed, salt](std::size_t e, std::size_t i) {
        return Engine::stream(seed, {tag(StreamTag::simulate), salt, e, i});
    };
}

struct SimulationOptions {
    bool keep_draws = true;
};

/// Multicast generative process. Features are taken from `source`, which is
/// told about each realized event (never about unselected candidates).
template <FeatureSource Source, class Factory>
Simulation simulate(std::size_t E, const NodeTable& nodes, const ModelParams& params, Source& source,
                    const TimingModel& model, double t0, Epoch epoch, Factory&& streams,
                    SimulationOptions opts = {}) {
    model.validate();
    params.validate(source.receiver_dim(), source.timing_dim());
    const std::size_t A = nodes.size();
    std::vector<EventRecord> events;
    events.reserve(E);
    Simulation sim;
    double t_prev = t0;
    while (events.size() < E) {
        const std::size_t e = events.size();
        source.begin_event(e, t_prev);
        RaceOutcome r = race(params, source.receiver_block(), source.timing_block(), A, model,
                             [&](std::size_t i) { return streams(e, i); });
        const double t = t_prev + r.increment;
        const std::size_t race_id = sim.race_increment.size();
        sim.race_increment.push_back(r.increment);
        for (NodeIndex s : r.winners) {
            if (events.size() == E) break;
            EventRecord ev;
            ev.sender = s;
            const auto row = r.draw.row(s);
            ev.receivers.assign(row.begin(), row.end());
            ev.time = t;
            events.push_back(std::move(ev));
            sim.race_of.push_back(race_id);
        }
        for (std::size_t k = e; k < events.size(); ++k)
            source.observe(events[k].sender, events[k].receivers, events[k].time);
        if (opts.keep_draws) sim.draws.push_back(std::move(r.draw));
        t_prev = t;
    }
    sim.data = Dataset(nodes, std::move(events), t0, epoch);
    return sim;
}

/// Multicast process with history-driven features and seeded streams.
inline Simulation simulate(std::size_t E, const NodeTable& nodes, const ModelParams& params, const FeatureSpec& spec,
                           const TimingModel& model, double t0, Epoch epoch, std::uint64_t seed,
                           SimulationOptions opts = {}) {
    HistoryFeatures source(nodes, spec, epoch);
    return simulate(E, nodes, params, source, model, t0, epoch, seeded_streams(seed), opts);
}

// ---------------------------------------------------------------------------
//     One receiver, one or more senders
// ---------------------------------------------------------------------------

struct MultiSenderEvent {
    NodeIndex receiver = 0;
    std::vector<std::uint8_t> senders;
    double time = 0.0;

    bool operator==(const MultiSenderEvent&) const = default;
};

struct ReversedDataset {
    NodeTable nodes;
    std::vector<MultiSenderEvent> events;
    double t0 = 0.0;
};

/// Reversed generative process: each potential receiver j draws a candidate
/// sender set from intensities b . x_{iej} over senders i, and an increment
/// from y_j; the earliest receiver's set becomes the event. Features stay
/// indexed [sender][receiver].
template <FeatureSource Source, class Factory>
ReversedDataset simulate_reversed(std::size_t E, const NodeTable& nodes, const ModelParams& params, Source& source,
                                  const TimingModel& model, double t0, Factory&& streams) {
    model.validate();
    params.validate(source.receiver_dim(), source.timing_dim());
    const std::size_t A = nodes.size();
    const std::size_t P = params.b.size();
    ReversedDataset out{nodes, {}, t0};
    // Transposed copy of the receiver block: row j holds x_{.j.} so the race
    // helper can be reused with receivers in the owner role.
    std::vector<double> transposed(A * A * P);
    double t_prev = t0;
    while (out.events.size() < E) {
        const std::size_t e = out.events.size();
        source.begin_event(e, t_prev);
        const auto x = source.receiver_block();
        for (std::size_t i = 0; i < A; ++i)
            for (std::size_t j = 0; j < A; ++j)
                std::copy_n(x.begin() + static_cast<std::ptrdiff_t>((i * A + j) * P), P,
                            transposed.begin() + static_cast<std::ptrdiff_t>((j * A + i) * P));
        RaceOutcome r = race(params, transposed, source.timing_block(), A, model,
                             [&](std::size_t j) { return streams(e, j); });
        const double t = t_prev + r.increment;
        const std::size_t first = out.events.size();
        for (NodeIndex j : r.winners) {
            if (out.events.size() == E) break;
            const auto row = r.draw.row(j);
            out.events.push_back({j, std::vector<std::uint8_t>(row.begin(), row.end()), t});
        }
        std::vector<std::uint8_t> one_hot(A, 0);
        for (std::size_t k = first; k < out.events.size(); ++k) {
            const auto& ev = out.events[k];
            std::fill(one_hot.begin(), one_hot.end(), 0);
            one_hot[ev.receiver] = 1;
            for (std::size_t i = 0; i < A; ++i)
                if (ev.senders[i]) source.observe(i, one_hot, ev.time);
        }
        t_prev = t;
    }
    return out;
}

inline ReversedDataset simulate_reversed(std::size_t E, const NodeTable& nodes, const ModelParams& params,
                                         const FeatureSpec& spec, const TimingModel& model, double t0, Epoch epoch,
                                         std::uint64_t seed) {
    HistoryFeatures source(nodes, spec, epoch);
    return simulate_reversed(E, nodes, params, source, model, t0, seeded_streams(seed, 1));
}

}  // namespace hem
