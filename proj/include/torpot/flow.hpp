#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "torpot/common.hpp"
#include "torpot/energy.hpp"
#include "torpot/riesz.hpp"
#include "torpot/torus.hpp"

namespace torpot {

// Smooth radial cutoff: 1 on [0, r0], 0 on [r1, inf), quintic blend between.
struct SmoothCutoff {
    double r0 = 0.15, r1 = 0.3;

    double value(double rho) const {
        if (rho <= r0) return 1.0;
        if (rho >= r1) return 0.0;
        double t = (rho - r0) / (r1 - r0);
        return 1.0 - t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
    }
    double derivative(double rho) const {
        if (rho <= r0 || rho >= r1) return 0.0;
        double t = (rho - r0) / (r1 - r0);
        return -30.0 * t * t * (1.0 - t) * (1.0 - t) / (r1 - r0);
    }
};

// Tabulated periodic kernel for d = 2.  The near-origin power-law part
// c_sing * eta(|x|) |x|^{-s} is carried analytically; the remainder is smooth
// on the whole torus and is stored (value and gradient) on an n x n grid with
// Catmull-Rom bicubic interpolation.  Build exploits the 8-fold symmetry of
// the kernel (even per axis, symmetric under coordinate swap).
class KernelTable {
public:
    KernelTable(const RieszSpec& spec, int n = 512, SmoothCutoff cutoff = {})
        : n_(n), cutoff_(cutoff), s_(spec.s) {
        if (spec.d != 2) throw std::invalid_argument("KernelTable: d = 2 only");
        if (!(spec.s < 0)) throw std::invalid_argument("KernelTable: s < 0 required");
        if (n < 64) throw std::invalid_argument("KernelTable: n >= 64");
        RieszKernel kern(spec);
        csing_ = kern.singular_coefficient();
        val_.assign(size_t(n) * n, 0.0);
        gx_.assign(size_t(n) * n, 0.0);
        gy_.assign(size_t(n) * n, 0.0);
        for (int i = 0; i <= n / 2; ++i) {
            for (int j = 0; j <= i; ++j) {
                double x = wrap_coord(double(i) / n);
                double y = wrap_coord(double(j) / n);
                double v, dgx, dgy;
                if (i == 0 && j == 0) {
                    v = kern.value(TorusPoint({0.0, 0.0}));  // finite for s < 0
                    dgx = dgy = 0.0;                         // remainder gradient is odd
                } else {
                    TorusPoint p({x, y});
                    v = kern.value(p);
                    auto g = kern.gradient(p);
                    double rho = std::sqrt(x * x + y * y);
                    auto sg = singular_gradient(x, y, rho);
                    v -= singular_value(rho);
                    dgx = g[0] - sg[0];
                    dgy = g[1] - sg[1];
                }
                scatter(i, j, v, dgx, dgy);
            }
        }
    }

    int resolution() const { return n_; }

    double value(double dx, double dy) const {
        dx = wrap_coord(dx);
        dy = wrap_coord(dy);
        double rho = std::sqrt(dx * dx + dy * dy);
        return interp(val_, dx, dy) + singular_value(rho);
    }

    std::array<double, 2> gradient(double dx, double dy) const {
        dx = wrap_coord(dx);
        dy = wrap_coord(dy);
        double rho = std::sqrt(dx * dx + dy * dy);
        auto sg = singular_gradient(dx, dy, rho);
        return {interp(gx_, dx, dy) + sg[0], interp(gy_, dx, dy) + sg[1]};
    }

private:
    double singular_value(double rho) const {
        double eta = cutoff_.value(rho);
        return eta == 0.0 ? 0.0 : csing_ * eta * std::pow(rho, -s_);
    }
    std::array<double, 2> singular_gradient(double dx, double dy, double rho) const {
        if (rho < 1e-14 || rho >= cutoff_.r1) return {0.0, 0.0};
        double radial = csing_ * (cutoff_.derivative(rho) * std::pow(rho, -s_) -
                                  s_ * cutoff_.value(rho) * std::pow(rho, -s_ - 1.0));
        return {radial * dx / rho, radial * dy / rho};
    }

    // write the value/gradient at canonical node (i, j), i >= j, into all
    // symmetric images: per-axis reflection flips the matching gradient sign,
    // coordinate swap exchanges the components.
    void scatter(int i, int j, double v, double dgx, double dgy) {
        auto put = [&](int a, int b, double ga, double gb) {
            a = (a % n_ + n_) % n_;
            b = (b % n_ + n_) % n_;
            size_t idx = size_t(a) * n_ + b;
            val_[idx] = v;
            gx_[idx] = ga;
            gy_[idx] = gb;
        };
        for (int sa = 0; sa < 2; ++sa)
            for (int sb = 0; sb < 2; ++sb) {
                int a = sa ? -i : i, b = sb ? -j : j;
                double ga = sa ? -dgx : dgx, gb = sb ? -dgy : dgy;
                put(a, b, ga, gb);
                put(b, a, gb, ga);
            }
    }

    static void weights(double t, double w[4]) {
        // Catmull-Rom cubic taps
        w[0] = 0.5 * (-t * t * t + 2 * t * t - t);
        w[1] = 0.5 * (3 * t * t * t - 5 * t * t + 2);
        w[2] = 0.5 * (-3 * t * t * t + 4 * t * t + t);
        w[3] = 0.5 * (t * t * t - t * t);
    }

    double interp(const std::vector<double>& tab, double x, double y) const {
        double u = (x + 1.0) * n_;  // shift keeps floor() away from negatives
        double v = (y + 1.0) * n_;
        int i0 = int(std::floor(u)), j0 = int(std::floor(v));
        double tu = u - i0, tv = v - j0;
        double wu[4], wv[4];
        weights(tu, wu);
        weights(tv, wv);
        double acc = 0.0;
        for (int a = 0; a < 4; ++a) {
            int ia = (i0 - 1 + a) % n_;
            const double* row = tab.data() + size_t(ia) * n_;
            double rowacc = 0.0;
            for (int b = 0; b < 4; ++b) {
                int jb = (j0 - 1 + b) % n_;
                rowacc += wv[b] * row[jb];
            }
            acc += wu[a] * rowacc;
        }
        return acc;
    }

    int n_;
    SmoothCutoff cutoff_;
    double s_, csing_;
    std::vector<double> val_, gx_, gy_;
};

// Pairwise interaction model used by the flow integrator.
struct ForceModel {
    virtual ~ForceModel() = default;
    virtual int dim() const = 0;
    virtual double value(const std::vector<double>& dx) const = 0;
    virtual std::vector<double> gradient(const std::vector<double>& dx) const = 0;
};

// Direct kernel evaluation (any d); slow but exact, for small systems.
class ExactForceModel : public ForceModel {
public:
    explicit ExactForceModel(const RieszSpec& spec,
                             std::shared_ptr<const PerturbedPotential> pert = nullptr)
        : kern_(spec), pert_(std::move(pert)), d_(spec.d) {}

    int dim() const override { return d_; }
    double value(const std::vector<double>& dx) const override {
        TorusPoint p(dx);
        double v = kern_.value(p);
        if (pert_) v -= pert_->bump(p);
        return v;
    }
    std::vector<double> gradient(const std::vector<double>& dx) const override {
        TorusPoint p(dx);
        auto g = kern_.gradient(p);
        if (pert_) {
            auto bg = pert_->bump_gradient(p);
            for (int i = 0; i < d_; ++i) g[size_t(i)] -= bg[size_t(i)];
        }
        return g;
    }

private:
    RieszKernel kern_;
    std::shared_ptr<const PerturbedPotential> pert_;
    int d_;
};

// Table-backed model for d = 2 production runs.
class TableForceModel : public ForceModel {
public:
    TableForceModel(std::shared_ptr<const KernelTable> table,
                    std::shared_ptr<const PerturbedPotential> pert = nullptr)
        : table_(std::move(table)), pert_(std::move(pert)) {}

    int dim() const override { return 2; }
    double value(const std::vector<double>& dx) const override {
        double v = table_->value(dx[0], dx[1]);
        if (pert_) v -= pert_->bump(TorusPoint(dx));
        return v;
    }
    std::vector<double> gradient(const std::vector<double>& dx) const override {
        auto g = table_->gradient(dx[0], dx[1]);
        std::vector<double> out{g[0], g[1]};
        if (pert_) {
            auto bg = pert_->bump_gradient(TorusPoint(dx));
            out[0] -= bg[0];
            out[1] -= bg[1];
        }
        return out;
    }

private:
    std::shared_ptr<const KernelTable> table_;
    std::shared_ptr<const PerturbedPotential> pert_;
};

struct FlowConfig {
    int d = 2;
    double s = -1.0;
    int n_particles = 256;
    bool perturbed = false;
    double eps = 0.1;
    double c0 = 50.0;
    enum class Integrator { euler, rk4 };
    Integrator integrator = Integrator::rk4;
    double h = 5e-3;     // rk4 default; euler uses 1e-3
    int steps = 800;
    std::uint64_t seed = 1;
    bool use_table = true;  // d = 2 only
    int table_n = 512;
    double table_tau = 1e-8;
    int snapshot_every = 0;  // 0: keep only first/last

    void validate() const {
        if (d < 1 || d > 3) throw std::invalid_argument("FlowConfig: d in {1,2,3}");
        if (!(s < 0)) throw std::invalid_argument("FlowConfig: s < 0 (integrable kernels only)");
        if (n_particles < 2) throw std::invalid_argument("FlowConfig: n_particles >= 2");
        if (!(h > 0) || steps <= 0) throw std::invalid_argument("FlowConfig: h > 0, steps > 0");
        if (perturbed && !(eps > 0 && eps < 0.5))
            throw std::invalid_argument("FlowConfig: 0 < eps < 1/2");
    }
};

struct ClusterStats {
    int n_clusters = 0;
    std::vector<int> sizes;
    double mean_radius = 0.0;  // mean over clusters of max member->centroid distance
    double max_radius = 0.0;
    double nn_mean = 0.0;  // nearest-neighbour distance statistics over particles
    double nn_std = 0.0;
    double nn_cv = 0.0;
};

// Connected components of the "distance <= link_radius" graph, torus metric.
inline ClusterStats cluster_stats(const std::vector<TorusPoint>& pts, double link_radius) {
    const size_t n = pts.size();
    ClusterStats out;
    if (n == 0) return out;
    std::vector<size_t> parent(n);
    std::iota(parent.begin(), parent.end(), size_t(0));
    std::function<size_t(size_t)> find = [&](size_t a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    std::vector<double> nn(n, std::numeric_limits<double>::infinity());
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            double dst = torus_dist(pts[i], pts[j]);
            nn[i] = std::min(nn[i], dst);
            nn[j] = std::min(nn[j], dst);
            if (dst <= link_radius) {
                size_t a = find(i), b = find(j);
                if (a != b) parent[a] = b;
            }
        }
    // group members
    std::vector<std::vector<size_t>> groups;
    {
        std::vector<int> label(n, -1);
        for (size_t i = 0; i < n; ++i) {
            size_t r = find(i);
            if (label[r] < 0) {
                label[r] = int(groups.size());
                groups.emplace_back();
            }
            groups[size_t(label[r])].push_back(i);
        }
    }
    const int d = pts[0].dim();
    for (const auto& g : groups) {
        out.sizes.push_back(int(g.size()));
        // circular mean per axis
        std::vector<double> centroid(size_t(d), 0.0);
        for (int ax = 0; ax < d; ++ax) {
            double cs = 0, sn = 0;
            for (size_t idx : g) {
                double th = 2.0 * M_PI * pts[idx].x[size_t(ax)];
                cs += std::cos(th);
                sn += std::sin(th);
            }
            centroid[size_t(ax)] = (cs == 0 && sn == 0) ? 0.0 : std::atan2(sn, cs) / (2.0 * M_PI);
        }
        TorusPoint c(centroid);
        double rad = 0.0;
        for (size_t idx : g) rad = std::max(rad, torus_dist(pts[idx], c));
        out.mean_radius += rad;
        out.max_radius = std::max(out.max_radius, rad);
    }
    out.n_clusters = int(groups.size());
    out.mean_radius /= double(groups.size());
    std::sort(out.sizes.rbegin(), out.sizes.rend());
    if (n >= 2) {
        double m = 0;
        for (double v : nn) m += v;
        m /= double(n);
        double var = 0;
        for (double v : nn) var += (v - m) * (v - m);
        var /= double(n);
        out.nn_mean = m;
        out.nn_std = std::sqrt(var);
        out.nn_cv = m > 0 ? out.nn_std / m : 0.0;
    }
    return out;
}

struct FlowResult {
    std::vector<TorusPoint> initial;
    std::vector<TorusPoint> positions;
    std::vector<double> energy;  // energy after step k (index 0 = initial)
    std::vector<std::vector<TorusPoint>> snapshots;
    std::vector<double> snapshot_times;
    bool aborted = false;
    std::string abort_reason;
};

namespace detail {

// velocity field: v_i = -(1/N) sum_{j != i} grad W(x_i - x_j), accumulated
// antisymmetrically so the total momentum vanishes identically.
inline void flow_rhs(const ForceModel& model, const std::vector<TorusPoint>& pts,
                     std::vector<std::vector<double>>& rhs) {
    const size_t n = pts.size();
    const int d = model.dim();
    for (auto& r : rhs) std::fill(r.begin(), r.end(), 0.0);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            std::vector<double> diff = torus_diff(pts[i], pts[j]);
            double r2 = 0;
            for (double v : diff) r2 += v * v;
            if (r2 < 1e-28) continue;  // coincident pair exerts no force
            auto g = model.gradient(diff);
            for (int ax = 0; ax < d; ++ax) {
                rhs[i][size_t(ax)] -= g[size_t(ax)];
                rhs[j][size_t(ax)] += g[size_t(ax)];
            }
        }
    const double inv = 1.0 / double(n);
    for (auto& r : rhs)
        for (double& v : r) v *= inv;
}

inline double flow_energy(const ForceModel& model, const std::vector<TorusPoint>& pts) {
    return energy_discrete(pts, [&](const TorusPoint& p) { return model.value(p.x); });
}

}  // namespace detail

inline std::vector<TorusPoint> random_positions(int d, int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<TorusPoint> pts;
    pts.reserve(size_t(n));
    for (int i = 0; i < n; ++i) {
        std::vector<double> x(size_t(d), 0.0);
        for (double& xi : x) xi = uniform01(rng) - 0.5;
        pts.emplace_back(std::move(x));
    }
    return pts;
}

// Builds the force model a config asks for; pass a prebuilt table to share it
// across runs with the same base kernel.
inline std::shared_ptr<const ForceModel> make_force_model(
    const FlowConfig& cfg, std::shared_ptr<const KernelTable> table = nullptr) {
    RieszSpec spec;
    spec.d = cfg.d;
    spec.s = cfg.s;
    spec.tau = cfg.table_tau;
    std::shared_ptr<const PerturbedPotential> pert;
    if (cfg.perturbed) pert = std::make_shared<PerturbedPotential>(spec, cfg.eps, cfg.c0);
    if (cfg.use_table && cfg.d == 2) {
        if (!table) table = std::make_shared<KernelTable>(spec, cfg.table_n);
        return std::make_shared<TableForceModel>(std::move(table), pert);
    }
    return std::make_shared<ExactForceModel>(spec, pert);
}

inline FlowResult run_flow(const FlowConfig& cfg,
                           std::shared_ptr<const ForceModel> model = nullptr,
                           std::vector<TorusPoint> init = {}) {
    cfg.validate();
    if (!model) model = make_force_model(cfg);
    std::vector<TorusPoint> pts =
        init.empty() ? random_positions(cfg.d, cfg.n_particles, cfg.seed) : std::move(init);
    const size_t n = pts.size();
    const int d = cfg.d;

    FlowResult out;
    out.initial = pts;
    out.energy.push_back(detail::flow_energy(*model, pts));
    if (cfg.snapshot_every > 0) {
        out.snapshots.push_back(pts);
        out.snapshot_times.push_back(0.0);
    }

    std::vector<std::vector<double>> k1(n, std::vector<double>(size_t(d))), k2 = k1, k3 = k1,
                                     k4 = k1;
    std::vector<TorusPoint> work = pts;

    auto shift = [&](const std::vector<TorusPoint>& base,
                     const std::vector<std::vector<double>>& dir, double scale,
                     std::vector<TorusPoint>& dst) {
        for (size_t i = 0; i < n; ++i)
            for (int ax = 0; ax < d; ++ax)
                dst[i].x[size_t(ax)] = base[i].x[size_t(ax)] + scale * dir[i][size_t(ax)];
    };

    const double velocity_cap = 1e6;
    for (int step = 0; step < cfg.steps; ++step) {
        detail::flow_rhs(*model, pts, k1);
        double vmax = 0;
        for (const auto& r : k1)
            for (double v : r) vmax = std::max(vmax, std::abs(v));
        if (!(vmax < velocity_cap)) {
            out.aborted = true;
            out.abort_reason = "velocity blow-up at step " + std::to_string(step);
            break;
        }
        if (cfg.integrator == FlowConfig::Integrator::euler) {
            shift(pts, k1, cfg.h, work);
        } else {
            shift(pts, k1, 0.5 * cfg.h, work);
            detail::flow_rhs(*model, work, k2);
            shift(pts, k2, 0.5 * cfg.h, work);
            detail::flow_rhs(*model, work, k3);
            shift(pts, k3, cfg.h, work);
            detail::flow_rhs(*model, work, k4);
            for (size_t i = 0; i < n; ++i)
                for (int ax = 0; ax < d; ++ax)
                    k1[i][size_t(ax)] =
                        (k1[i][size_t(ax)] + 2 * k2[i][size_t(ax)] + 2 * k3[i][size_t(ax)] +
                         k4[i][size_t(ax)]) /
                        6.0;
            shift(pts, k1, cfg.h, work);
        }
        for (size_t i = 0; i < n; ++i) {
            work[i].wrap();
            pts[i] = work[i];
        }
        double e = detail::flow_energy(*model, pts);
        if (!std::isfinite(e)) {
            out.aborted = true;
            out.abort_reason = "non-finite energy at step " + std::to_string(step);
            break;
        }
        out.energy.push_back(e);
        if (cfg.snapshot_every > 0 && (step + 1) % cfg.snapshot_every == 0) {
            out.snapshots.push_back(pts);
            out.snapshot_times.push_back(cfg.h * (step + 1));
        }
    }
    out.positions = std::move(pts);
    return out;
}

}  // namespace torpot
