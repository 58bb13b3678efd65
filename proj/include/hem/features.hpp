#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hem/data.hpp"
#include "hem/error.hpp"

namespace hem {

// ---------------------------------------------------------------------------
//     Statistic catalogue
// ---------------------------------------------------------------------------

enum class ReceiverStat : std::uint8_t {
    intercept,
    gender_sender,
    gender_receiver,
    gender_homophily,
    outdegree,
    indegree,
    hyperedge_size,
    interaction,
    send,
    receive,
    two_send,
    two_receive,
    sibling,
    cosibling,
};

enum class TimingStat : std::uint8_t {
    intercept,
    gender,
    manager,
    outdegree,
    indegree,
    weekend,
    pm,
};

inline constexpr std::array<std::string_view, 14> receiver_stat_names = {
    "intercept", "gender_sender", "gender_receiver", "gender_homophily", "outdegree",
    "indegree",  "hyperedge_size", "interaction",    "send",             "receive",
    "two_send",  "two_receive",    "sibling",        "cosibling",
};

inline constexpr std::array<std::string_view, 7> timing_stat_names = {
    "intercept", "gender", "manager", "outdegree", "indegree", "weekend", "PM",
};

inline std::string_view name(ReceiverStat s) { return receiver_stat_names[static_cast<std::size_t>(s)]; }
inline std::string_view name(TimingStat s) { return timing_stat_names[static_cast<std::size_t>(s)]; }

inline ReceiverStat parse_receiver_stat(std::string_view s) {
    for (std::size_t k = 0; k < receiver_stat_names.size(); ++k)
        if (receiver_stat_names[k] == s) return static_cast<ReceiverStat>(k);
    throw ConfigError("unknown receiver statistic '" + std::string(s) + "'");
}

inline TimingStat parse_timing_stat(std::string_view s) {
    for (std::size_t k = 0; k < timing_stat_names.size(); ++k)
        if (timing_stat_names[k] == s || (k == 6 && s == "pm")) return static_cast<TimingStat>(k);
    throw ConfigError("unknown timing statistic '" + std::string(s) + "'");
}

/// History window (t_prev - length, t_prev], in hours.
struct WindowSpec {
    double length = 168.0;
};

struct FeatureSpec {
    std::vector<ReceiverStat> receiver;
    std::vector<TimingStat> timing;
    WindowSpec window;

    std::size_t receiver_dim() const noexcept { return receiver.size(); }
    std::size_t timing_dim() const noexcept { return timing.size(); }

    /// Moves the intercepts to column 0 (adding them if absent) and rejects
    /// duplicates and non-positive windows.
    static FeatureSpec make(std::vector<ReceiverStat> receiver, std::vector<TimingStat> timing,
                            WindowSpec window = {}) {
        if (!(window.length > 0.0)) throw ConfigError("window length must be positive");
        auto normalize = [](auto& v, auto intercept) {
            v.erase(std::remove(v.begin(), v.end(), intercept), v.end());
            v.insert(v.begin(), intercept);
            auto sorted = v;
            std::sort(sorted.begin(), sorted.end());
            if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
                throw ConfigError("feature listed twice");
        };
        normalize(receiver, ReceiverStat::intercept);
        normalize(timing, TimingStat::intercept);
        return FeatureSpec{std::move(receiver), std::move(timing), window};
    }

    static FeatureSpec all(WindowSpec window = {}) {
        std::vector<ReceiverStat> r;
        for (std::size_t k = 0; k < receiver_stat_names.size(); ++k) r.push_back(static_cast<ReceiverStat>(k));
        std::vector<TimingStat> t;
        for (std::size_t k = 0; k < timing_stat_names.size(); ++k) t.push_back(static_cast<TimingStat>(k));
        return make(std::move(r), std::move(t), window);
    }
};

// ---------------------------------------------------------------------------
//     Tensors
// ---------------------------------------------------------------------------

/// Features of one event: x is A x A x P (row-major, [i][j][p]), y is A x Q.
struct FeatureTensors {
    std::size_t A = 0, P = 0, Q = 0;
    std::vector<double> x;
    std::vector<double> y;

    FeatureTensors() = default;
    FeatureTensors(std::size_t a, std::size_t p, std::size_t q) : A(a), P(p), Q(q), x(a * a * p), y(a * q) {}

    double x_at(std::size_t i, std::size_t j, std::size_t p) const { return x[(i * A + j) * P + p]; }
    double y_at(std::size_t i, std::size_t q) const { return y[i * Q + q]; }
    std::span<const double> x_row(std::size_t i, std::size_t j) const { return {x.data() + (i * A + j) * P, P}; }
    std::span<const double> y_row(std::size_t i) const { return {y.data() + i * Q, Q}; }
};

/// Features for a whole event stream: x is E x A x A x P, y is E x A x Q.
class Covariates {
public:
    Covariates() = default;
    Covariates(std::size_t events, std::size_t nodes, std::size_t p, std::size_t q)
        : E_(events), A_(nodes), P_(p), Q_(q), x_(events * nodes * nodes * p), y_(events * nodes * q) {}

    std::size_t events() const noexcept { return E_; }
    std::size_t nodes() const noexcept { return A_; }
    std::size_t receiver_dim() const noexcept { return P_; }
    std::size_t timing_dim() const noexcept { return Q_; }

    std::span<const double> x_row(std::size_t e, std::size_t i, std::size_t j) const {
        return {x_.data() + ((e * A_ + i) * A_ + j) * P_, P_};
    }
    std::span<double> x_row(std::size_t e, std::size_t i, std::size_t j) {
        return {x_.data() + ((e * A_ + i) * A_ + j) * P_, P_};
    }
    std::span<const double> y_row(std::size_t e, std::size_t i) const { return {y_.data() + (e * A_ + i) * Q_, Q_}; }
    std::span<double> y_row(std::size_t e, std::size_t i) { return {y_.data() + (e * A_ + i) * Q_, Q_}; }

    /// All A x A x P receiver features of event e.
    std::span<const double> receiver_block(std::size_t e) const { return {x_.data() + e * A_ * A_ * P_, A_ * A_ * P_}; }
    std::span<const double> timing_block(std::size_t e) const { return {y_.data() + e * A_ * Q_, A_ * Q_}; }

    void set_event(std::size_t e, const FeatureTensors& f) {
        std::copy(f.x.begin(), f.x.end(), x_.begin() + static_cast<std::ptrdiff_t>(e * A_ * A_ * P_));
        std::copy(f.y.begin(), f.y.end(), y_.begin() + static_cast<std::ptrdiff_t>(e * A_ * Q_));
    }

    bool operator==(const Covariates&) const = default;

private:
    std::size_t E_ = 0, A_ = 0, P_ = 0, Q_ = 0;
    std::vector<double> x_;
    std::vector<double> y_;
};

// ---------------------------------------------------------------------------
//     Sliding-window tracker
// ---------------------------------------------------------------------------

/// Maintains window counts incrementally: events are pushed in time order and
/// expire once they fall at or before t_prev - length.
class FeatureTracker {
public:
    FeatureTracker(const NodeTable& nodes, FeatureSpec spec, Epoch epoch)
        : nodes_(&nodes),
          spec_(std::move(spec)),
          epoch_(epoch),
          A_(nodes.size()),
          send_(A_ * A_, 0),
          out_(A_, 0),
          in_(A_, 0),
          hyper_(A_, 0) {}

    const FeatureSpec& spec() const noexcept { return spec_; }
    std::size_t window_size() const noexcept { return window_.size(); }

    void expire(double t_prev) {
        const double cutoff = t_prev - spec_.window.length;
        while (!window_.empty() && window_.front().time <= cutoff) {
            apply(window_.front(), -1);
            window_.pop_front();
        }
    }

    void push(NodeIndex sender, std::span<const std::uint8_t> receivers, double time) {
        Entry en{time, sender, {}};
        for (std::size_t j = 0; j < receivers.size(); ++j)
            if (receivers[j]) en.receivers.push_back(j);
        apply(en, +1);
        window_.push_back(std::move(en));
    }

    void clear() {
        window_.clear();
        std::fill(send_.begin(), send_.end(), 0);
        std::fill(out_.begin(), out_.end(), 0);
        std::fill(in_.begin(), in_.end(), 0);
        std::fill(hyper_.begin(), hyper_.end(), 0);
    }

    /// Fills `out` from the current window; t_prev fixes the calendar statistics.
    void compute(double t_prev, FeatureTensors& out) const {
        const std::size_t A = A_, P = spec_.receiver.size(), Q = spec_.timing.size();
        if (out.A != A || out.P != P || out.Q != Q) out = FeatureTensors(A, P, Q);

        auto S = [&](std::size_t a, std::size_t b) { return static_cast<double>(send_[a * A + b]); };
        for (std::size_t i = 0; i < A; ++i) {
            for (std::size_t j = 0; j < A; ++j) {
                double* row = out.x.data() + (i * A + j) * P;
                if (i == j) {
                    std::fill(row, row + P, 0.0);
                    continue;
                }
                for (std::size_t p = 0; p < P; ++p) {
                    double v = 0.0;
                    switch (spec_.receiver[p]) {
                        case ReceiverStat::intercept: v = 1.0; break;
                        case ReceiverStat::gender_sender: v = nodes_->female(i) ? 1.0 : 0.0; break;
                        case ReceiverStat::gender_receiver: v = nodes_->female(j) ? 1.0 : 0.0; break;
                        case ReceiverStat::gender_homophily:
                            v = nodes_->female(i) == nodes_->female(j) ? 1.0 : 0.0;
                            break;
                        case ReceiverStat::outdegree: v = static_cast<double>(out_[i]); break;
                        case ReceiverStat::indegree: v = static_cast<double>(in_[j]); break;
                        case ReceiverStat::hyperedge_size: v = static_cast<double>(hyper_[i]); break;
                        case ReceiverStat::interaction:
                            v = static_cast<double>(out_[i]) * static_cast<double>(hyper_[i]);
                            break;
                        case ReceiverStat::send: v = S(i, j); break;
                        case ReceiverStat::receive: v = S(j, i); break;
                        case ReceiverStat::two_send:
                            for (std::size_t h = 0; h < A; ++h)
                                if (h != i && h != j) v += S(i, h) * S(h, j);
                            break;
                        case ReceiverStat::two_receive:
                            for (std::size_t h = 0; h < A; ++h)
                                if (h != i && h != j) v += S(h, i) * S(j, h);
                            break;
                        case ReceiverStat::sibling:
                            for (std::size_t h = 0; h < A; ++h)
                                if (h != i && h != j) v += S(h, i) * S(h, j);
                            break;
                        case ReceiverStat::cosibling:
                            for (std::size_t h = 0; h < A; ++h)
                                if (h != i && h != j) v += S(i, h) * S(j, h);
                            break;
                    }
                    row[p] = v;
                }
            }
        }

        CalendarInfo cal{};
        const bool needs_calendar = std::any_of(spec_.timing.begin(), spec_.timing.end(), [](TimingStat s) {
            return s == TimingStat::weekend || s == TimingStat::pm;
        });
        if (needs_calendar) cal = calendar_at(epoch_, t_prev);
        for (std::size_t i = 0; i < A; ++i) {
            for (std::size_t q = 0; q < Q; ++q) {
                double v = 0.0;
                switch (spec_.timing[q]) {
                    case TimingStat::intercept: v = 1.0; break;
                    case TimingStat::gender: v = nodes_->female(i) ? 1.0 : 0.0; break;
                    case TimingStat::manager: v = nodes_->manager(i) ? 1.0 : 0.0; break;
                    case TimingStat::outdegree: v = static_cast<double>(out_[i]); break;
                    case TimingStat::indegree: v = static_cast<double>(in_[i]); break;
                    case TimingStat::weekend: v = cal.weekend ? 1.0 : 0.0; break;
                    case TimingStat::pm: v = cal.pm ? 1.0 : 0.0; break;
                }
                out.y[i * Q + q] = v;
            }
        }
    }

private:
    struct Entry {
        double time;
        NodeIndex sender;
        std::vector<NodeIndex> receivers;
    };

    void apply(const Entry& en, long delta) {
        out_[en.sender] += delta;
        for (NodeIndex j : en.receivers) {
            send_[en.sender * A_ + j] += delta;
            in_[j] += delta;
            hyper_[en.sender] += delta;
        }
    }

    const NodeTable* nodes_;
    FeatureSpec spec_;
    Epoch epoch_;
    std::size_t A_;
    std::deque<Entry> window_;
    std::vector<long> send_;
    std::vector<long> out_, in_, hyper_;
};

// ---------------------------------------------------------------------------
//     Whole-dataset features
// ---------------------------------------------------------------------------

/// Time the window of each event is anchored at: the previous distinct
/// timepoint (t0 for the first group). Events sharing a timestamp share their
/// features, since they arise from one candidate draw.
inline std::vector<double> anchor_times(const Dataset& d) {
    std::vector<double> anchor(d.size());
    double prev_distinct = d.t0();
    for (std::size_t e = 0; e < d.size(); ++e) {
        if (e > 0 && d.event(e).time != d.event(e - 1).time) prev_distinct = d.event(e - 1).time;
        anchor[e] = prev_distinct;
    }
    return anchor;
}

inline Covariates compute_covariates(const Dataset& d, const FeatureSpec& spec) {
    const std::size_t A = d.node_count();
    Covariates cov(d.size(), A, spec.receiver_dim(), spec.timing_dim());
    FeatureTracker tracker(d.nodes(), spec, d.epoch());
    FeatureTensors buf(A, spec.receiver_dim(), spec.timing_dim());
    const TieGrouping ties = tie_grouping(d);
    double t_prev = d.t0();
    for (std::size_t m = 0; m < ties.size(); ++m) {
        tracker.expire(t_prev);
        tracker.compute(t_prev, buf);
        for (std::size_t e : ties.groups[m]) cov.set_event(e, buf);
        for (std::size_t e : ties.groups[m]) {
            const auto& ev = d.event(e);
            tracker.push(ev.sender, ev.receivers, ev.time);
        }
        t_prev = ties.timepoints[m];
    }
    return cov;
}

namespace detail {

inline FeatureTensors features_at(const Dataset& d, const FeatureSpec& spec, std::size_t e) {
    if (e >= d.size()) throw DataError(DataErrorKind::out_of_range, "event index " + std::to_string(e));
    const auto anchor = anchor_times(d);
    FeatureTracker tracker(d.nodes(), spec, d.epoch());
    for (std::size_t k = 0; k < e && d.event(k).time <= anchor[e]; ++k) {
        const auto& ev = d.event(k);
        tracker.push(ev.sender, ev.receivers, ev.time);
    }
    tracker.expire(anchor[e]);
    FeatureTensors out(d.node_count(), spec.receiver_dim(), spec.timing_dim());
    tracker.compute(anchor[e], out);
    return out;
}

}  // namespace detail

/// Receiver-selection features x_{iej} of event e.
inline FeatureTensors receiver_features(const Dataset& d, const FeatureSpec& spec, std::size_t e) {
    return detail::features_at(d, spec, e);
}

/// Timing features y_{ie} of event e (returned in the y block of the tensors).
inline FeatureTensors timing_features(const Dataset& d, const FeatureSpec& spec, std::size_t e) {
    return detail::features_at(d, spec, e);
}

// ---------------------------------------------------------------------------
//     Feature sources for the generative process
// ---------------------------------------------------------------------------

/// Features recomputed from the simulated history as it grows.
class HistoryFeatures {
public:
    HistoryFeatures(const NodeTable& nodes, FeatureSpec spec, Epoch epoch)
        : tracker_(nodes, std::move(spec), epoch),
          buf_(nodes.size(), tracker_.spec().receiver_dim(), tracker_.spec().timing_dim()) {}

    std::size_t receiver_dim() const noexcept { return buf_.P; }
    std::size_t timing_dim() const noexcept { return buf_.Q; }

    void begin_event(std::size_t /*e*/, double t_prev) {
        tracker_.expire(t_prev);
        tracker_.compute(t_prev, buf_);
    }
    void observe(NodeIndex sender, std::span<const std::uint8_t> receivers, double time) {
        tracker_.push(sender, receivers, time);
    }
    std::span<const double> receiver_block() const { return buf_.x; }
    std::span<const double> timing_block() const { return buf_.y; }

private:
    FeatureTracker tracker_;
    FeatureTensors buf_;
};

/// Pre-computed covariates indexed by event position; history is ignored.
class FixedFeatures {
public:
    explicit FixedFeatures(const Covariates& cov) : cov_(&cov) {}

    std::size_t receiver_dim() const noexcept { return cov_->receiver_dim(); }
    std::size_t timing_dim() const noexcept { return cov_->timing_dim(); }

    void begin_event(std::size_t e, double /*t_prev*/) { e_ = e; }
    void observe(NodeIndex, std::span<const std::uint8_t>, double) {}
    std::span<const double> receiver_block() const { return cov_->receiver_block(e_); }
    std::span<const double> timing_block() const { return cov_->timing_block(e_); }

private:
    const Covariates* cov_;
    std::size_t e_ = 0;
};

}  // namespace hem
