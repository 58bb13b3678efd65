#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hem/csv.hpp"
#include "hem/error.hpp"

namespace hem {

using NodeIndex = std::size_t;
using Epoch = std::chrono::sys_seconds;

// ---------------------------------------------------------------------------
//     Calendar time
// ---------------------------------------------------------------------------

/// Parses "YYYY-MM-DD", "YYYY-MM-DDTHH:MM", "YYYY-MM-DDTHH:MM:SS[.fff][Z]"
/// (a space may replace the T). Fractional seconds are kept by the caller
/// through the returned remainder.
inline std::optional<std::pair<Epoch, double>> parse_iso8601(std::string_view s) {
    auto num = [&](std::size_t pos, std::size_t len, int& out) {
        if (pos + len > s.size()) return false;
        auto r = std::from_chars(s.data() + pos, s.data() + pos + len, out);
        return r.ec == std::errc() && r.ptr == s.data() + pos + len;
    };
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
    if (s.size() < 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    if (!num(0, 4, y) || !num(5, 2, mo) || !num(8, 2, d)) return std::nullopt;
    double frac = 0.0;
    std::size_t pos = 10;
    if (pos < s.size() && (s[pos] == 'T' || s[pos] == ' ')) {
        if (!num(pos + 1, 2, h) || pos + 3 >= s.size() || s[pos + 3] != ':' || !num(pos + 4, 2, mi))
            return std::nullopt;
        pos += 6;
        if (pos < s.size() && s[pos] == ':') {
            if (!num(pos + 1, 2, sec)) return std::nullopt;
            pos += 3;
            if (pos < s.size() && s[pos] == '.') {
                std::size_t end = pos + 1;
                while (end < s.size() && s[end] >= '0' && s[end] <= '9') ++end;
                frac = std::stod("0" + std::string(s.substr(pos, end - pos)));
                pos = end;
            }
        }
    }
    if (pos < s.size() && s[pos] == 'Z') ++pos;
    if (pos != s.size()) return std::nullopt;

    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || sec > 60) return std::nullopt;
    const Epoch tp = sys_seconds(sys_days(ymd)) + hours(h) + minutes(mi) + seconds(sec);
    return std::make_pair(tp, frac);
}

inline Epoch parse_epoch(std::string_view s) {
    auto p = parse_iso8601(s);
    if (!p) throw DataError(DataErrorKind::bad_value, "epoch '" + std::string(s) + "' is not ISO-8601");
    return p->first;
}

/// Hours since the epoch, for a calendar timestamp.
inline double hours_since(Epoch epoch, Epoch tp, double frac_seconds = 0.0) {
    const auto secs = (tp - epoch).count();
    return (static_cast<double>(secs) + frac_seconds) / 3600.0;
}

struct CalendarInfo {
    bool weekend = false;  // Saturday or Sunday
    bool pm = false;       // hour of day >= 12
};

/// Calendar attributes of a real-valued hour offset from the epoch.
inline CalendarInfo calendar_at(Epoch epoch, double hours) {
    using namespace std::chrono;
    const auto secs = static_cast<std::int64_t>(std::floor(hours * 3600.0));
    const sys_seconds tp = epoch + seconds(secs);
    const sys_days day = floor<days>(tp);
    const weekday wd{day};
    const auto hour_of_day = duration_cast<std::chrono::hours>(tp - sys_seconds(day)).count();
    return {wd == Saturday || wd == Sunday, hour_of_day >= 12};
}

// ---------------------------------------------------------------------------
//     Nodes
// ---------------------------------------------------------------------------

struct NodeAttributes {
    bool female = false;
    bool manager = false;
};

class NodeTable {
public:
    NodeTable() = default;

    NodeTable(std::vector<std::string> labels, std::vector<NodeAttributes> attrs)
        : labels_(std::move(labels)), attrs_(std::move(attrs)) {
        if (labels_.empty()) throw DataError(DataErrorKind::empty_table, "node table has no rows");
        if (labels_.size() != attrs_.size())
            throw DataError(DataErrorKind::bad_value, "label/attribute count mismatch");
        if (labels_.size() < 2)
            throw DataError(DataErrorKind::too_few_nodes, "a network needs at least 2 nodes");
        for (std::size_t k = 0; k < labels_.size(); ++k) {
            if (!index_.emplace(labels_[k], k).second)
                throw DataError(DataErrorKind::duplicate_label, "label '" + labels_[k] + "' repeated");
        }
    }

    /// Nodes labelled n0..n{A-1} with all attributes false.
    static NodeTable anonymous(std::size_t count) {
        std::vector<std::string> labels;
        for (std::size_t k = 0; k < count; ++k) labels.push_back("n" + std::to_string(k));
        return NodeTable(std::move(labels), std::vector<NodeAttributes>(count));
    }

    std::size_t size() const noexcept { return labels_.size(); }
    const std::string& label(NodeIndex i) const { return labels_.at(i); }
    const NodeAttributes& attributes(NodeIndex i) const { return attrs_.at(i); }
    bool female(NodeIndex i) const { return attrs_.at(i).female; }
    bool manager(NodeIndex i) const { return attrs_.at(i).manager; }

    std::optional<NodeIndex> index_of(std::string_view label) const {
        auto it = index_.find(std::string(label));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    bool operator==(const NodeTable& o) const { return labels_ == o.labels_ && attrs_equal(o); }

private:
    bool attrs_equal(const NodeTable& o) const {
        return std::equal(attrs_.begin(), attrs_.end(), o.attrs_.begin(), o.attrs_.end(),
                          [](const NodeAttributes& a, const NodeAttributes& b) {
                              return a.female == b.female && a.manager == b.manager;
                          });
    }

    std::vector<std::string> labels_;
    std::vector<NodeAttributes> attrs_;
    std::unordered_map<std::string, NodeIndex> index_;
};

// ---------------------------------------------------------------------------
//     Events
// ---------------------------------------------------------------------------

/// One hyperedge event: a sender, a binary receiver vector of length A, and a
/// timestamp in hours.
struct EventRecord {
    NodeIndex sender = 0;
    std::vector<std::uint8_t> receivers;
    double time = 0.0;

    std::size_t receiver_count() const {
        return static_cast<std::size_t>(std::count(receivers.begin(), receivers.end(), std::uint8_t{1}));
    }

    bool operator==(const EventRecord&) const = default;
};

/// Throws DataError if the record breaks an event invariant.
inline void validate_event(const EventRecord& ev, std::size_t node_count, double t0, std::size_t row) {
    const std::string where = "event " + std::to_string(row);
    if (ev.sender >= node_count || ev.receivers.size() != node_count)
        throw DataError(DataErrorKind::out_of_range, where + ": node index out of range");
    if (ev.receivers[ev.sender] != 0)
        throw DataError(DataErrorKind::self_receiver, where + ": sender listed among its receivers");
    if (ev.receiver_count() == 0)
        throw DataError(DataErrorKind::empty_receivers, where + ": receiver set is empty");
    if (!(ev.time >= t0))
        throw DataError(DataErrorKind::timestamp_before_origin, where + ": timestamp precedes t0");
}

/// An ordered event stream over a node table. Immutable after construction.
class Dataset {
public:
    Dataset() = default;

    Dataset(NodeTable nodes, std::vector<EventRecord> events, double t0, Epoch epoch = Epoch{})
        : nodes_(std::move(nodes)), events_(std::move(events)), t0_(t0), epoch_(epoch) {
        for (std::size_t e = 0; e < events_.size(); ++e) {
            validate_event(events_[e], nodes_.size(), t0_, e);
            if (e > 0 && events_[e].time < events_[e - 1].time)
                throw DataError(DataErrorKind::bad_value, "events are not ordered by time");
        }
    }

    const NodeTable& nodes() const noexcept { return nodes_; }
    std::size_t node_count() const noexcept { return nodes_.size(); }
    const std::vector<EventRecord>& events() const noexcept { return events_; }
    const EventRecord& event(std::size_t e) const { return events_.at(e); }
    std::size_t size() const noexcept { return events_.size(); }
    bool empty() const noexcept { return events_.empty(); }
    double t0() const noexcept { return t0_; }
    Epoch epoch() const noexcept { return epoch_; }

    bool operator==(const Dataset& o) const {
        return nodes_ == o.nodes_ && events_ == o.events_ && t0_ == o.t0_ && epoch_ == o.epoch_;
    }

private:
    NodeTable nodes_;
    std::vector<EventRecord> events_;
    double t0_ = 0.0;
    Epoch epoch_{};
};

/// tau_1 = t_1 - t0, tau_e = t_e - t_{e-1}.
inline std::vector<double> time_increments(const Dataset& d) {
    std::vector<double> tau(d.size());
    double prev = d.t0();
    for (std::size_t e = 0; e < d.size(); ++e) {
        tau[e] = d.event(e).time - prev;
        prev = d.event(e).time;
    }
    return tau;
}

/// Events grouped by exactly equal timestamps.
struct TieGrouping {
    std::vector<double> timepoints;                 // t*_1 < ... < t*_M
    std::vector<std::vector<std::size_t>> groups;   // event indices at each timepoint

    std::size_t size() const noexcept { return timepoints.size(); }
};

inline TieGrouping tie_grouping(std::span<const double> times) {
    TieGrouping g;
    for (std::size_t e = 0; e < times.size(); ++e) {
        if (g.timepoints.empty() || times[e] != g.timepoints.back()) {
            g.timepoints.push_back(times[e]);
            g.groups.emplace_back();
        }
        g.groups.back().push_back(e);
    }
    return g;
}

inline TieGrouping tie_grouping(const Dataset& d) {
    std::vector<double> times(d.size());
    for (std::size_t e = 0; e < d.size(); ++e) times[e] = d.event(e).time;
    return tie_grouping(times);
}

// ---------------------------------------------------------------------------
//     File formats
// ---------------------------------------------------------------------------

namespace detail {

inline bool parse_flag(const std::string& v, std::string_view what) {
    if (v == "0") return false;
    if (v == "1") return true;
    throw DataError(DataErrorKind::bad_value, std::string(what) + ": expected 0 or 1, got '" + v + "'");
}

}  // namespace detail

/// Node table CSV: header `label,gender_female,is_manager`.
inline NodeTable parse_nodes(std::istream& in, const std::string& source = "nodes") {
    const csv::Table t = csv::parse(in);
    if (t.header.empty() || (t.header.size() == 1 && t.header[0].empty()))
        throw DataError(DataErrorKind::empty_table, source + ": file is empty");
    const std::size_t c_label = t.column("label", source);
    const std::size_t c_female = t.column("gender_female", source);
    const std::size_t c_manager = t.column("is_manager", source);
    if (t.rows.empty()) throw DataError(DataErrorKind::empty_table, source + ": no node rows");
    std::vector<std::string> labels;
    std::vector<NodeAttributes> attrs;
    for (const auto& row : t.rows) {
        if (row.size() != t.header.size())
            throw DataError(DataErrorKind::bad_value, source + ": ragged row");
        labels.push_back(row[c_label]);
        attrs.push_back({detail::parse_flag(row[c_female], "gender_female"),
                         detail::parse_flag(row[c_manager], "is_manager")});
    }
    return NodeTable(std::move(labels), std::move(attrs));
}

inline NodeTable load_nodes(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError(DataErrorKind::io, "cannot open node table '" + path + "'");
    return parse_nodes(in, path);
}

/// Event log CSV: header `timestamp,sender,receivers`, receivers `;`-separated.
/// Timestamps are hours, or ISO-8601 converted against `epoch`.
inline Dataset parse_events(std::istream& in, const NodeTable& nodes, double t0, Epoch epoch = Epoch{},
                            const std::string& source = "events") {
    const csv::Table t = csv::parse(in);
    const std::size_t c_time = t.column("timestamp", source);
    const std::size_t c_sender = t.column("sender", source);
    const std::size_t c_recv = t.column("receivers", source);
    const std::size_t A = nodes.size();

    auto resolve = [&](const std::string& label, std::size_t row) {
        auto idx = nodes.index_of(label);
        if (!idx)
            throw DataError(DataErrorKind::unknown_label,
                            source + " row " + std::to_string(row + 1) + ": unknown label '" + label + "'");
        return *idx;
    };

    std::vector<EventRecord> events;
    events.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        if (row.size() != t.header.size())
            throw DataError(DataErrorKind::bad_value, source + ": ragged row " + std::to_string(r + 1));
        EventRecord ev;
        const std::string& ts = row[c_time];
        if (auto iso = parse_iso8601(ts)) ev.time = hours_since(epoch, iso->first, iso->second);
        else ev.time = csv::parse_double(ts, "timestamp");

        ev.sender = resolve(row[c_sender], r);
        ev.receivers.assign(A, 0);
        std::size_t start = 0;
        const std::string& list = row[c_recv];
        while (start <= list.size()) {
            std::size_t end = list.find(';', start);
            if (end == std::string::npos) end = list.size();
            const std::string label = list.substr(start, end - start);
            if (!label.empty()) ev.receivers[resolve(label, r)] = 1;
            start = end + 1;
        }
        validate_event(ev, A, t0, r + 1);
        events.push_back(std::move(ev));
    }
    std::stable_sort(events.begin(), events.end(),
                     [](const EventRecord& a, const EventRecord& b) { return a.time < b.time; });
    return Dataset(nodes, std::move(events), t0, epoch);
}

inline Dataset load_events(const std::string& path, const NodeTable& nodes, double t0, Epoch epoch = Epoch{}) {
    std::ifstream in(path);
    if (!in) throw DataError(DataErrorKind::io, "cannot open event log '" + path + "'");
    return parse_events(in, nodes, t0, epoch, path);
}

inline void write_nodes(std::ostream& out, const NodeTable& nodes) {
    out << "label,gender_female,is_manager\n";
    for (std::size_t i = 0; i < nodes.size(); ++i)
        out << csv::escape(nodes.label(i)) << ',' << (nodes.female(i) ? 1 : 0) << ','
            << (nodes.manager(i) ? 1 : 0) << '\n';
}

/// Writes real-valued hour timestamps with round-trip precision.
inline void write_events(std::ostream& out, const Dataset& d) {
    out << "timestamp,sender,receivers\n";
    for (const auto& ev : d.events()) {
        std::string list;
        for (std::size_t j = 0; j < ev.receivers.size(); ++j) {
            if (!ev.receivers[j]) continue;
            if (!list.empty()) list += ';';
            list += d.nodes().label(j);
        }
        out << csv::format_double(ev.time) << ',' << csv::escape(d.nodes().label(ev.sender)) << ','
            << csv::escape(list) << '\n';
    }
}

}  // namespace hem
