#pragma once

#include <Eigen/Dense>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgsim {

// Communication topology of the secondary controller. adjacency(i, j) > 0
// means agent i receives agent j's output voltage; pinning(i) > 0 marks a
// leader that knows the reference. Zones partition the agents and no
// adjacency weight may cross a zone boundary.
struct CommGraph {
    int n = 0;
    Eigen::MatrixXd adjacency;
    Eigen::VectorXd pinning;
    Eigen::VectorXd coupling;
    std::vector<std::vector<int>> zones;

    int directed_edge_count() const {
        int count = 0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (adjacency(i, j) > 0.0) ++count;
        return count;
    }

    void validate() const {
        if (n <= 0) throw std::invalid_argument("graph: agent count must be positive");
        if (adjacency.rows() != n || adjacency.cols() != n)
            throw std::invalid_argument("graph: adjacency must be n x n");
        if (pinning.size() != n || coupling.size() != n)
            throw std::invalid_argument("graph: pinning and coupling must have one entry per agent");
        for (int i = 0; i < n; ++i) {
            if (adjacency(i, i) != 0.0) throw std::invalid_argument("graph: self edge on agent " + std::to_string(i + 1));
            for (int j = 0; j < n; ++j)
                if (adjacency(i, j) < 0.0) throw std::invalid_argument("graph: negative adjacency weight");
            if (pinning(i) < 0.0) throw std::invalid_argument("graph: negative pinning gain");
            if (!(coupling(i) > 0.0))
                throw std::invalid_argument("graph: coupling gain of agent " + std::to_string(i + 1) + " must be > 0");
        }

        // zones are a partition of 0..n-1
        std::vector<int> zone_of(n, -1);
        for (size_t z = 0; z < zones.size(); ++z) {
            if (zones[z].empty()) throw std::invalid_argument("graph: empty zone");
            for (int a : zones[z]) {
                if (a < 0 || a >= n) throw std::invalid_argument("graph: zone member out of range");
                if (zone_of[a] != -1) throw std::invalid_argument("graph: agent " + std::to_string(a + 1) + " in two zones");
                zone_of[a] = static_cast<int>(z);
            }
        }
        for (int a = 0; a < n; ++a)
            if (zone_of[a] == -1) throw std::invalid_argument("graph: agent " + std::to_string(a + 1) + " not in any zone");

        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (adjacency(i, j) > 0.0 && zone_of[i] != zone_of[j])
                    throw std::invalid_argument("graph: edge between agents " + std::to_string(j + 1) + " and " +
                                                std::to_string(i + 1) + " crosses a zone boundary");

        // every agent must be reachable from a pinned agent, following the
        // direction information flows (j to i when a_ij > 0)
        std::vector<char> reached(n, 0);
        std::queue<int> q;
        for (int i = 0; i < n; ++i)
            if (pinning(i) > 0.0) reached[i] = 1, q.push(i);
        while (!q.empty()) {
            const int j = q.front();
            q.pop();
            for (int i = 0; i < n; ++i)
                if (adjacency(i, j) > 0.0 && !reached[i]) reached[i] = 1, q.push(i);
        }
        for (int i = 0; i < n; ++i)
            if (!reached[i])
                throw std::invalid_argument("graph: agent " + std::to_string(i + 1) +
                                            " has no path from a pinned agent in its zone");
    }
};

struct CommEdge {
    int a = 0;  // agent index
    int b = 0;
    double weight = 1.0;
};

// Builds a zone-partitioned graph with one designated leader per zone.
// Edges are bidirectional and must stay inside a zone.
inline CommGraph build_zonal_graph(int n, const std::vector<std::vector<int>>& zones, const std::vector<int>& leaders,
                                   const std::vector<CommEdge>& edges, const Eigen::VectorXd& coupling,
                                   double pinning_gain = 1.0) {
    if (zones.size() != leaders.size())
        throw std::invalid_argument("graph: need exactly one leader per zone");
    CommGraph g;
    g.n = n;
    g.adjacency = Eigen::MatrixXd::Zero(n, n);
    g.pinning = Eigen::VectorXd::Zero(n);
    g.coupling = coupling;
    g.zones = zones;
    for (size_t z = 0; z < zones.size(); ++z) {
        const int leader = leaders[z];
        bool inside = false;
        for (int a : zones[z]) inside = inside || (a == leader);
        if (!inside)
            throw std::invalid_argument("graph: leader " + std::to_string(leader + 1) + " is outside its zone");
        g.pinning(leader) = pinning_gain;
    }
    for (const auto& e : edges) {
        if (e.a < 0 || e.a >= n || e.b < 0 || e.b >= n) throw std::invalid_argument("graph: edge endpoint out of range");
        if (!(e.weight > 0.0)) throw std::invalid_argument("graph: edge weight must be > 0");
        g.adjacency(e.a, e.b) = e.weight;
        g.adjacency(e.b, e.a) = e.weight;
    }
    g.validate();
    return g;
}

// L + G: graph Laplacian of the adjacency plus the diagonal pinning matrix.
// Nonsingular exactly when every agent can be tracked back to a pinned one.
inline Eigen::MatrixXd pinned_laplacian(const CommGraph& g) {
    Eigen::MatrixXd M = -g.adjacency;
    for (int i = 0; i < g.n; ++i) M(i, i) = g.adjacency.row(i).sum() + g.pinning(i);
    return M;
}

}  // namespace mgsim
