#pragma once

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hem/data.hpp"
#include "hem/rng.hpp"

namespace fixtures {

using namespace hem;

inline NodeTable nodes(std::size_t A, std::uint64_t seed = 0) {
    Engine rng(seed + 991);
    std::vector<std::string> labels;
    std::vector<NodeAttributes> attrs;
    for (std::size_t i = 0; i < A; ++i) {
        labels.push_back("v" + std::to_string(i));
        attrs.push_back({rng.uniform() < 0.5, rng.uniform() < 0.3});
    }
    return NodeTable(labels, attrs);
}

inline EventRecord event(std::size_t A, NodeIndex s, std::initializer_list<NodeIndex> r, double t) {
    EventRecord ev;
    ev.sender = s;
    ev.receivers.assign(A, 0);
    for (auto j : r) ev.receivers[j] = 1;
    ev.time = t;
    return ev;
}

/// Random valid event stream; with `ties`, timestamps are rounded so that
/// some coincide.
inline Dataset random_dataset(std::size_t A, std::size_t E, std::uint64_t seed, bool ties = false,
                              double mean_gap = 5.0) {
    Engine rng(seed);
    std::vector<EventRecord> ev;
    double t = 0.0;
    for (std::size_t e = 0; e < E; ++e) {
        t += -std::log(1.0 - rng.uniform()) * mean_gap;
        double te = ties ? std::floor(t / mean_gap) * mean_gap + mean_gap : t;
        if (!ev.empty() && te < ev.back().time) te = ev.back().time;
        EventRecord r;
        r.sender = static_cast<NodeIndex>(rng() % A);
        r.receivers.assign(A, 0);
        do {
            for (std::size_t j = 0; j < A; ++j)
                if (j != r.sender) r.receivers[j] = rng.uniform() < 0.35;
        } while (r.receiver_count() == 0);
        r.time = te;
        ev.push_back(std::move(r));
    }
    return Dataset(nodes(A, seed), std::move(ev), 0.0);
}

}  // namespace fixtures
