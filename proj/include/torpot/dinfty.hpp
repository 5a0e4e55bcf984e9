#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "torpot/common.hpp"
#include "torpot/grid_set.hpp"
#include "torpot/maxflow.hpp"
#include "torpot/measures.hpp"
#include "torpot/torus.hpp"

namespace torpot {

inline constexpr double kFeasTol = 1e-10;  // max-flow deficit treated as feasible

struct PlanEdge {
    int i = 0;
    int j = 0;
    double c = 0.0;
};

struct TransportFeasibility {
    double r = 0.0;
    bool feasible = false;
    double deficit = 0.0;             // 1 - max transported mass
    std::vector<PlanEdge> plan;       // feasible case: c_ij on admissible edges
    std::vector<int> witness;         // infeasible case: supply indices S
    std::vector<int> neighborhood;    // demand indices within r of S
    double witness_margin = 0.0;      // sum_S a_i - sum_{N(S)} b_j
};

// Bottleneck transport between two atomic measures: feasibility of moving
// rho1 onto rho2 with every move of length <= r, via max-flow, and the
// smallest feasible r over the finite set of pairwise distances.
class BottleneckTransport {
public:
    BottleneckTransport(const WeightedAtoms& rho1, const WeightedAtoms& rho2)
        : a_(rho1.w), b_(rho2.w) {
        rho1.validate();
        rho2.validate();
        if (rho1.d != rho2.d) throw std::invalid_argument("BottleneckTransport: dim mismatch");
        n_ = int(rho1.pos.size());
        m_ = int(rho2.pos.size());
        dist_.resize(size_t(n_) * size_t(m_));
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < m_; ++j)
                dist_[size_t(i) * size_t(m_) + size_t(j)] = torus_dist(rho1.pos[size_t(i)],
                                                                       rho2.pos[size_t(j)]);
        candidates_ = dist_;
        std::sort(candidates_.begin(), candidates_.end());
        // deduplicate within relative tolerance; keep the group representative
        std::vector<double> uniq;
        for (double v : candidates_)
            if (uniq.empty() || lt_tol(uniq.back(), v)) uniq.push_back(v);
        candidates_ = std::move(uniq);
    }

    const std::vector<double>& candidates() const { return candidates_; }
    double dist(int i, int j) const { return dist_[size_t(i) * size_t(m_) + size_t(j)]; }

    // Closed-ball admissibility: edge (i,j) present iff dist(i,j) <= r
    // (relative tolerance). Warm-starts when r only grows; rebuilds otherwise.
    TransportFeasibility feasible_at(double r) {
        if (!net_ || r < r_cur_) rebuild(r);
        add_edges_up_to(r);
        flow_ += net_->max_flow(src_, snk_);

        TransportFeasibility out;
        out.r = r;
        out.deficit = 1.0 - flow_;
        out.feasible = out.deficit < kFeasTol;
        if (out.feasible) {
            for (const auto& [key, handle] : edge_handles_) {
                double f = net_->flow_on(handle);
                if (f > MaxFlow::kFlowTol)
                    out.plan.push_back({key.first, key.second, f});
            }
            // canonical order: lexicographic in (i, j)
            std::sort(out.plan.begin(), out.plan.end(), [](const PlanEdge& x, const PlanEdge& y) {
                return x.i != y.i ? x.i < y.i : x.j < y.j;
            });
        } else {
            auto vis = net_->residual_reachable(src_);
            std::vector<char> nb(size_t(m_), 0);
            KahanSum sa, sb;
            for (int i = 0; i < n_; ++i) {
                if (!vis[size_t(1 + i)]) continue;
                out.witness.push_back(i);
                sa.add(a_[size_t(i)]);
                for (int j = 0; j < m_; ++j)
                    if (!lt_tol(r, dist(i, j))) nb[size_t(j)] = 1;
            }
            for (int j = 0; j < m_; ++j)
                if (nb[size_t(j)]) {
                    out.neighborhood.push_back(j);
                    sb.add(b_[size_t(j)]);
                }
            out.witness_margin = sa.value() - sb.value();
        }
        return out;
    }

private:
    int n_ = 0, m_ = 0;
    std::vector<double> a_, b_, dist_, candidates_;
    std::optional<MaxFlow> net_;
    std::map<std::pair<int, int>, std::pair<int, int>> edge_handles_;
    double r_cur_ = -1.0;
    double flow_ = 0.0;
    int src_ = 0, snk_ = 0;

    void rebuild(double r) {
        net_.emplace(n_ + m_ + 2);
        src_ = 0;
        snk_ = n_ + m_ + 1;
        edge_handles_.clear();
        flow_ = 0.0;
        r_cur_ = -1.0;
        for (int i = 0; i < n_; ++i) net_->add_edge(src_, 1 + i, a_[size_t(i)]);
        for (int j = 0; j < m_; ++j) net_->add_edge(1 + n_ + j, snk_, b_[size_t(j)]);
        (void)r;
    }
    void add_edges_up_to(double r) {
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < m_; ++j) {
                double d = dist(i, j);
                if (!lt_tol(r, d) && lt_tol(r_cur_, d)) {
                    // capacity 2 > total mass: effectively unbounded
                    edge_handles_[{i, j}] = net_->add_edge(1 + i, 1 + n_ + j, 2.0);
                }
            }
        r_cur_ = std::max(r_cur_, r);
    }
};

struct DinftyResult {
    double r_star = 0.0;
    std::vector<PlanEdge> plan;        // optimal plan at r_star
    std::vector<int> witness;          // Hall-violating set at the predecessor radius
    double witness_margin = 0.0;
    double deficit_at_rstar = 0.0;
    double predecessor = -1.0;         // largest infeasible candidate (-1: none)
};

// d_infty between atomic measures: smallest pairwise distance at which the
// transport is feasible, found by binary search over the candidate set.
inline DinftyResult dinfty_atomic(const WeightedAtoms& rho1, const WeightedAtoms& rho2) {
    BottleneckTransport bt(rho1, rho2);
    const auto& cand = bt.candidates();
    int lo = 0, hi = int(cand.size()) - 1;
    // the largest candidate admits the complete bipartite graph: feasible
    if (!bt.feasible_at(cand[size_t(hi)]).feasible)
        throw std::runtime_error("dinfty_atomic: full edge set infeasible (masses not normalized?)");
    while (lo < hi) {
        int mid = lo + (hi - lo) / 2;
        if (bt.feasible_at(cand[size_t(mid)]).feasible)
            hi = mid;
        else
            lo = mid + 1;
    }
    DinftyResult out;
    out.r_star = cand[size_t(lo)];
    TransportFeasibility at_star = bt.feasible_at(out.r_star);
    out.plan = at_star.plan;
    out.deficit_at_rstar = at_star.deficit;
    double pred = lo > 0 ? cand[size_t(lo - 1)] : -1.0;
    out.predecessor = pred;
    TransportFeasibility below = bt.feasible_at(pred);  // rebuilds (r decreases)
    out.witness = below.witness;
    out.witness_margin = below.witness_margin;
    return out;
}

struct DinftyEnclosure {
    double lo = 0.0;
    double hi = 0.0;
    double r_hat = 0.0;  // atomic distance between the grid projections
    int N = 0;
    double midpoint() const { return 0.5 * (lo + hi); }
    double half_width() const { return 0.5 * (hi - lo); }
};

inline int default_enclosure_resolution(int d) {
    switch (d) {
        case 1: return 64;
        case 2: return 24;
        default: return 8;
    }
}

// Enclosure of d_infty(rho, uniform): project to the N-grid, solve the atomic
// problem against uniform cell-center atoms, pad by the projection error.
inline DinftyEnclosure dinfty_to_uniform(const WeightedAtoms& rho, int N,
                                         std::int64_t max_nodes = 40000) {
    Grid g(rho.d, N);
    if (g.cell_count() + rho.size() > max_nodes)
        throw std::invalid_argument(
            "dinfty_to_uniform: instance too large; reduce N to about " +
            std::to_string(int(std::floor(std::pow(double(max_nodes) / 2.0, 1.0 / rho.d)))));
    WeightedAtoms projected = density_to_atoms(grid_project(rho, N));
    WeightedAtoms unif = density_to_atoms(uniform_density(rho.d, N));
    DinftyResult r = dinfty_atomic(projected, unif);
    DinftyEnclosure out;
    out.N = N;
    out.r_hat = r.r_star;
    double pad = 2.0 * std::sqrt(double(rho.d)) / N;
    out.lo = std::max(r.r_star - pad, 0.0);
    out.hi = r.r_star + pad;
    return out;
}

inline DinftyEnclosure dinfty_to_uniform(const GridDensity& rho, int N,
                                         std::int64_t max_nodes = 40000) {
    return dinfty_to_uniform(density_to_atoms(rho), N, max_nodes);
}

// Largest circular-interval excess mass sup_I sum_I (rho - 1), computed by
// the cyclic maximum-subarray rule; exact for grid measures. d=1 only.
inline double discrepancy_1d(const GridDensity& rho) {
    if (rho.grid.d != 1) throw std::invalid_argument("discrepancy_1d: requires d = 1");
    const std::int64_t n = rho.grid.cell_count();
    const double u = 1.0 / double(n);
    // max subarray (empty allowed)
    double best = 0.0, cur = 0.0, total = 0.0;
    double worst = 0.0, curw = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        double v = rho.mass[size_t(i)] - u;
        total += v;
        cur = std::max(cur + v, 0.0);
        best = std::max(best, cur);
        curw = std::min(curw + v, 0.0);
        worst = std::min(worst, curw);
    }
    // wrap-around intervals are the complement of a non-wrapping one
    return std::max(best, total - worst);
}

struct SetFormulationReport {
    bool pass = false;
    double r_star = 0.0;
    double predecessor = -1.0;
    double witness_margin = 0.0;   // rho1(S) - rho2(N_<=pred(S)) at the predecessor
    double deficit_at_rstar = 0.0;
    int witness_size = 0;
};

// Consistency of the duality pair: just below r_star some atom set S must
// carry more rho1-mass than its closed r-neighborhood carries rho2-mass;
// at r_star no deficit remains.
inline SetFormulationReport set_formulation_check(const WeightedAtoms& rho1,
                                                  const WeightedAtoms& rho2) {
    DinftyResult r = dinfty_atomic(rho1, rho2);
    SetFormulationReport rep;
    rep.r_star = r.r_star;
    rep.predecessor = r.predecessor;
    rep.deficit_at_rstar = r.deficit_at_rstar;
    rep.witness_margin = r.witness_margin;
    rep.witness_size = int(r.witness.size());
    rep.pass = r.deficit_at_rstar < kFeasTol && rep.witness_margin > 0.0;
    return rep;
}

// rho(S) - uniform(S_r) with the closed r-expansion.  A positive value
// certifies d_infty(rho-at-centers, 1) >= r - sqrt(d)/(2N): any point of the
// continuum (r - sqrt(d)/(2N))-expansion of the centers of S lies in a cell
// whose center is within closed distance r of S.
inline double set_witness_margin(const GridDensity& rho, const GridSet& S, double r) {
    if (!(S.grid() == rho.grid)) throw std::invalid_argument("set_witness_margin: grid mismatch");
    GridSet Sr = expand(S, r, /*closed=*/true);
    KahanSum mass;
    for (std::int64_t c = 0; c < rho.grid.cell_count(); ++c)
        if (S.get(c)) mass.add(rho.mass[size_t(c)]);
    return mass.value() - set_measure(Sr);
}

}  // namespace torpot
