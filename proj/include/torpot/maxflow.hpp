#pragma once

#include <cstdint>
#include <limits>
#include <queue>
#include <stdexcept>
#include <vector>

namespace torpot {

// Dinic max-flow with real capacities. Capacities here are probability
// masses, so everything is O(1) in magnitude; kFlowTol decides saturation.
class MaxFlow {
public:
    static constexpr double kFlowTol = 1e-12;

    explicit MaxFlow(int n) : g_(size_t(n)) {}

    int add_node() {
        g_.emplace_back();
        return int(g_.size()) - 1;
    }
    int node_count() const { return int(g_.size()); }

    // Returns an edge handle {u, index} usable with flow_on/residual_of.
    std::pair<int, int> add_edge(int u, int v, double cap) {
        g_[size_t(u)].push_back({v, cap, int(g_[size_t(v)].size()), cap});
        g_[size_t(v)].push_back({u, 0.0, int(g_[size_t(u)].size()) - 1, 0.0});
        return {u, int(g_[size_t(u)].size()) - 1};
    }

    double flow_on(std::pair<int, int> h) const {
        const Edge& e = g_[size_t(h.first)][size_t(h.second)];
        return e.init - e.cap;
    }

    // Augments from whatever flow is already in the network (warm start).
    double max_flow(int s, int t) {
        double pushed = 0.0;
        while (bfs(s, t)) {
            iter_.assign(g_.size(), 0);
            while (true) {
                double f = dfs(s, t, std::numeric_limits<double>::infinity());
                if (f <= kFlowTol) break;
                pushed += f;
            }
        }
        return pushed;
    }

    // Nodes reachable from s through residual capacity; min-cut side of s.
    std::vector<char> residual_reachable(int s) const {
        std::vector<char> vis(g_.size(), 0);
        std::queue<int> q;
        q.push(s);
        vis[size_t(s)] = 1;
        while (!q.empty()) {
            int u = q.front();
            q.pop();
            for (const Edge& e : g_[size_t(u)]) {
                if (e.cap > kFlowTol && !vis[size_t(e.to)]) {
                    vis[size_t(e.to)] = 1;
                    q.push(e.to);
                }
            }
        }
        return vis;
    }

private:
    struct Edge {
        int to;
        double cap;
        int rev;
        double init;
    };

    std::vector<std::vector<Edge>> g_;
    std::vector<int> level_;
    std::vector<size_t> iter_;

    bool bfs(int s, int t) {
        level_.assign(g_.size(), -1);
        std::queue<int> q;
        level_[size_t(s)] = 0;
        q.push(s);
        while (!q.empty()) {
            int u = q.front();
            q.pop();
            for (const Edge& e : g_[size_t(u)]) {
                if (e.cap > kFlowTol && level_[size_t(e.to)] < 0) {
                    level_[size_t(e.to)] = level_[size_t(u)] + 1;
                    q.push(e.to);
                }
            }
        }
        return level_[size_t(t)] >= 0;
    }
    double dfs(int u, int t, double f) {
        if (u == t) return f;
        for (size_t& i = iter_[size_t(u)]; i < g_[size_t(u)].size(); ++i) {
            Edge& e = g_[size_t(u)][i];
            if (e.cap > kFlowTol && level_[size_t(u)] < level_[size_t(e.to)]) {
                double d = dfs(e.to, t, std::min(f, e.cap));
                if (d > kFlowTol) {
                    e.cap -= d;
                    g_[size_t(e.to)][size_t(e.rev)].cap += d;
                    return d;
                }
            }
        }
        return 0.0;
    }
};

}  // namespace torpot
