#pragma once

#include "agentsoc/step.hpp"
#include "agentsoc/world.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <stdexcept>
#include <tuple>
#include <vector>

namespace agentsoc {

inline constexpr int kNoise = -1;

struct ClusterAssignment {
    int step = 0;
    std::vector<int> labels;  // per agent id: cluster id >= 0, or kNoise

    int cluster_count() const {
        int m = -1;
        for (int l : labels) m = std::max(m, l);
        return m + 1;
    }
    bool in_cluster(AgentId a) const { return labels.at(static_cast<std::size_t>(a)) != kNoise; }

    friend bool operator==(const ClusterAssignment&, const ClusterAssignment&) = default;
};

// DBSCAN over torus Chebyshev distance. A point is core when at least min_pts
// points (itself included) lie within eps. Cluster ids are dense from 0 in order of
// the lowest agent id they contain.
inline ClusterAssignment dbscan_step(const std::vector<Position>& positions, int eps, int min_pts,
                                     int side, int step = 0) {
    if (eps < 0) throw std::invalid_argument("dbscan_step: eps must be >= 0");
    if (min_pts < 2) throw std::invalid_argument("dbscan_step: min_pts must be >= 2");
    constexpr int kUnvisited = -2;
    const std::size_t n = positions.size();

    std::vector<std::vector<std::size_t>> nbrs(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (torus_chebyshev(positions[i], positions[j], side) <= eps) nbrs[i].push_back(j);
    auto is_core = [&](std::size_t i) { return static_cast<int>(nbrs[i].size()) >= min_pts; };

    ClusterAssignment out{step, std::vector<int>(n, kUnvisited)};
    int next_cluster = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (out.labels[i] != kUnvisited) continue;
        if (!is_core(i)) {
            out.labels[i] = kNoise;  // may be claimed later as a border point
            continue;
        }
        const int c = next_cluster++;
        out.labels[i] = c;
        std::deque<std::size_t> frontier(nbrs[i].begin(), nbrs[i].end());
        while (!frontier.empty()) {
            const auto q = frontier.front();
            frontier.pop_front();
            if (out.labels[q] == kNoise) out.labels[q] = c;
            if (out.labels[q] != kUnvisited) continue;
            out.labels[q] = c;
            if (is_core(q)) frontier.insert(frontier.end(), nbrs[q].begin(), nbrs[q].end());
        }
    }
    return out;
}

// Pre-move positions of one step.
inline std::vector<Position> positions_before(const StepRecord& rec) {
    std::vector<Position> out;
    out.reserve(rec.agents.size());
    for (const auto& a : rec.agents) out.push_back(a.before);
    return out;
}

// Re-labels `current` so clusters that persist from `previous` keep their label.
// Pairs (current cluster, previous label) are taken greedily by overlap, larger
// first, lower previous label on ties. Unmatched clusters take fresh ids from
// `next_label`.
inline ClusterAssignment carry_labels(const ClusterAssignment& previous,
                                      const ClusterAssignment& current, int& next_label) {
    const int nc = current.cluster_count();
    std::map<std::pair<int, int>, int> overlap;  // (current, previous) -> shared members
    for (std::size_t a = 0; a < current.labels.size(); ++a) {
        const int c = current.labels[a];
        const int p = a < previous.labels.size() ? previous.labels[a] : kNoise;
        if (c != kNoise && p != kNoise) ++overlap[{c, p}];
    }
    std::vector<std::tuple<int, int, int>> pairs;  // (-overlap, previous, current)
    for (const auto& [key, count] : overlap) pairs.emplace_back(-count, key.second, key.first);
    std::sort(pairs.begin(), pairs.end());

    std::vector<int> mapping(static_cast<std::size_t>(nc), kNoise);
    std::map<int, bool> used_previous;
    for (const auto& [neg, prev, cur] : pairs) {
        auto& slot = mapping[static_cast<std::size_t>(cur)];
        if (slot != kNoise || used_previous[prev]) continue;
        slot = prev;
        used_previous[prev] = true;
    }
    for (auto& slot : mapping)
        if (slot == kNoise) slot = next_label++;

    ClusterAssignment out{current.step, current.labels};
    for (auto& l : out.labels)
        if (l != kNoise) l = mapping[static_cast<std::size_t>(l)];
    return out;
}

// Per-step clustering of pre-move positions with labels carried across steps.
inline std::vector<ClusterAssignment> cluster_timeline(const Transcript& transcript, int eps,
                                                       int min_pts = 2) {
    std::vector<ClusterAssignment> out;
    out.reserve(transcript.records.size());
    int next_label = 0;
    for (const auto& rec : transcript.records) {
        auto raw = dbscan_step(positions_before(rec), eps, min_pts, transcript.config.side_length,
                               rec.step);
        if (out.empty()) {
            next_label = raw.cluster_count();
            out.push_back(std::move(raw));
        } else {
            out.push_back(carry_labels(out.back(), raw, next_label));
        }
    }
    return out;
}

inline std::vector<ClusterAssignment> cluster_timeline(const Transcript& transcript) {
    return cluster_timeline(transcript, transcript.config.message_range);
}

} // namespace agentsoc
