#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "torpot/common.hpp"
#include "torpot/grid_set.hpp"
#include "torpot/mollifier.hpp"
#include "torpot/torus.hpp"

namespace torpot {

inline constexpr double kMassTol = 1e-12;

// Atomic probability measure sum_i w_i delta_{x_i}.
struct WeightedAtoms {
    int d = 1;
    std::vector<TorusPoint> pos;
    std::vector<double> w;

    int size() const { return int(pos.size()); }

    void validate() const {
        if (pos.empty() || pos.size() != w.size())
            throw std::invalid_argument("WeightedAtoms: empty or mismatched arrays");
        KahanSum s;
        for (double wi : w) {
            if (!(wi > 0)) throw std::invalid_argument("WeightedAtoms: weights must be positive");
            s.add(wi);
        }
        if (std::abs(s.value() - 1.0) > kMassTol)
            throw std::invalid_argument("WeightedAtoms: total mass " + std::to_string(s.value()));
        for (const auto& p : pos)
            if (p.dim() != d) throw std::invalid_argument("WeightedAtoms: dimension mismatch");
    }

    void normalize() {
        KahanSum s;
        for (double wi : w) s.add(wi);
        double t = s.value();
        if (!(t > 0)) throw std::invalid_argument("WeightedAtoms: nonpositive total mass");
        for (double& wi : w) wi /= t;
    }
};

// Probability measure given by one mass per grid cell.
struct GridDensity {
    Grid grid;
    std::vector<double> mass;

    double total_mass() const {
        KahanSum s;
        for (double m : mass) s.add(m);
        return s.value();
    }

    void validate() const {
        if (std::int64_t(mass.size()) != grid.cell_count())
            throw std::invalid_argument("GridDensity: mass array size mismatch");
        for (double m : mass)
            if (m < 0) throw std::invalid_argument("GridDensity: negative cell mass");
        if (std::abs(total_mass() - 1.0) > kMassTol)
            throw std::invalid_argument("GridDensity: total mass " + std::to_string(total_mass()));
    }

    // Density value (mass / cell volume) at a cell.
    double density_at(std::int64_t cell) const {
        return mass[size_t(cell)] * double(grid.cell_count());
    }
};

// Bin each atom's full weight into the half-open cell containing it.
inline GridDensity grid_project(const WeightedAtoms& rho, int N) {
    rho.validate();
    GridDensity out{Grid(rho.d, N), {}};
    out.mass.assign(size_t(out.grid.cell_count()), 0.0);
    for (size_t i = 0; i < rho.pos.size(); ++i)
        out.mass[size_t(out.grid.locate(rho.pos[i]))] += rho.w[i];
    return out;
}

// Atoms at cell centers carrying the cell masses; zero-mass cells dropped.
inline WeightedAtoms density_to_atoms(const GridDensity& rho) {
    WeightedAtoms out;
    out.d = rho.grid.d;
    for (std::int64_t c = 0; c < rho.grid.cell_count(); ++c) {
        if (rho.mass[size_t(c)] > 0) {
            out.pos.push_back(rho.grid.center(c));
            out.w.push_back(rho.mass[size_t(c)]);
        }
    }
    return out;
}

inline GridDensity uniform_density(int d, int N) {
    GridDensity out{Grid(d, N), {}};
    out.mass.assign(size_t(out.grid.cell_count()), 1.0 / double(out.grid.cell_count()));
    return out;
}

namespace detail {

// Shift all cells by a common constant so the total mass is exactly 1;
// then clip tiny negatives. Large clips mean the construction is invalid.
inline double renormalize_density(GridDensity& rho, double clip_fail = 1e-8) {
    const double n = double(rho.grid.cell_count());
    double excess = rho.total_mass() - 1.0;
    double shift = excess / n;
    double clipped = 0.0;
    for (double& m : rho.mass) {
        m -= shift;
        if (m < 0) {
            clipped += -m;
            m = 0.0;
        }
    }
    if (clipped > clip_fail)
        throw std::runtime_error("density renormalization clipped " + std::to_string(clipped));
    // distribute any clip residue over all cells (second tiny shift)
    double rem = rho.total_mass() - 1.0;
    for (double& m : rho.mass) {
        m -= rem / n;
        if (m < 0 && m > -1e-15) m = 0.0;
    }
    return clipped;
}

inline double unit_ball_volume(int d) {
    switch (d) {
        case 1: return 2.0;
        case 2: return M_PI;
        default: return 4.0 * M_PI / 3.0;
    }
}

}  // namespace detail

// rho = 1 - eps*|B(0;radius)| + eps * chi_{B(0;radius)}, sampled on the grid.
inline GridDensity bump_density(int d, double eps, int N, double radius = 1.0 / 3.0) {
    if (eps < 0) throw std::invalid_argument("bump_density: eps must be >= 0");
    double ball_vol = detail::unit_ball_volume(d) * std::pow(radius, d);
    if (1.0 - eps * ball_vol < 0)
        throw std::invalid_argument("bump_density: eps too large, density would go negative");
    GridDensity out{Grid(d, N), {}};
    const double n = double(out.grid.cell_count());
    out.mass.assign(size_t(out.grid.cell_count()), 0.0);
    TorusPoint origin(std::vector<double>(size_t(d), 0.0));
    for (std::int64_t c = 0; c < out.grid.cell_count(); ++c) {
        double inside = lt_tol(torus_dist(out.grid.center(c), origin), radius) ? 1.0 : 0.0;
        out.mass[size_t(c)] = (1.0 - eps * ball_vol + eps * inside) / n;
    }
    detail::renormalize_density(out);
    return out;
}

// Iterated 2nd-order discrete Laplacian of the mollifier on a fine auxiliary
// lattice: Psi_M = (-Delta_h)^M psi. The lattice is aligned so that the
// target-grid sample points are lattice points (restriction is exact) and
// discrete moments up to order 2M-1 vanish identically by summation by parts.
struct IteratedLaplacian {
    int d = 1;
    int M = 1;
    double h = 0.0;              // lattice spacing (reference coordinates)
    double origin = 0.0;         // coordinate of lattice index 0, per axis
    int n = 0;                   // lattice points per axis
    std::vector<double> values;  // Psi_M on the lattice, row-major
    double sup_norm = 0.0;

    double moment(const std::vector<int>& alpha) const {
        KahanSum s;
        std::vector<int> idx(size_t(d), 0);
        for (std::int64_t lin = 0; lin < std::int64_t(values.size()); ++lin) {
            std::int64_t r = lin;
            double mono = 1.0;
            for (int i = d - 1; i >= 0; --i) {
                int j = int(r % n);
                r /= n;
                double y = origin + j * h;
                for (int a = 0; a < alpha[size_t(i)]; ++a) mono *= y;
            }
            s.add(values[size_t(lin)] * mono);
        }
        return s.value() * std::pow(h, d);
    }
};

inline IteratedLaplacian iterated_laplacian(const Mollifier& moll, int M, double h,
                                            double origin_offset) {
    const int d = moll.dim();
    // cover [-1,1] plus M stencil margins on each side
    int lo = int(std::floor((-1.0 - origin_offset) / h)) - M - 1;
    int hi = int(std::ceil((1.0 - origin_offset) / h)) + M + 1;
    IteratedLaplacian out;
    out.d = d;
    out.M = M;
    out.h = h;
    out.origin = origin_offset + lo * h;
    out.n = hi - lo + 1;
    std::int64_t total = 1;
    for (int i = 0; i < d; ++i) total *= out.n;
    out.values.assign(size_t(total), 0.0);

    std::vector<double> y(size_t(d), 0.0);
    for (std::int64_t lin = 0; lin < total; ++lin) {
        std::int64_t r = lin;
        for (int i = d - 1; i >= 0; --i) {
            y[size_t(i)] = out.origin + double(r % out.n) * h;
            r /= out.n;
        }
        out.values[size_t(lin)] = moll.psi(y);
    }

    std::vector<std::int64_t> stride(size_t(d), 1);
    for (int i = d - 2; i >= 0; --i) stride[size_t(i)] = stride[size_t(i + 1)] * out.n;
    std::vector<double> next(out.values.size());
    for (int iter = 0; iter < M; ++iter) {
        // -Delta_h: interior stencil; out-of-range neighbors are zero, which
        // is exact because the support shrinks away from the array margin.
        for (std::int64_t lin = 0; lin < total; ++lin) {
            double acc = 0.0;
            std::int64_t r = lin;
            bool boundary = false;
            for (int i = d - 1; i >= 0; --i) {
                int j = int(r % out.n);
                r /= out.n;
                if (j == 0 || j == out.n - 1) boundary = true;
            }
            if (!boundary) {
                for (int i = 0; i < d; ++i) {
                    double up = out.values[size_t(lin + stride[size_t(i)])];
                    double dn = out.values[size_t(lin - stride[size_t(i)])];
                    acc += up - 2.0 * out.values[size_t(lin)] + dn;
                }
            }
            next[size_t(lin)] = -acc / (h * h);
        }
        out.values.swap(next);
    }
    for (double v : out.values) out.sup_norm = std::max(out.sup_norm, std::abs(v));
    return out;
}

struct OscillatoryFamily {
    GridDensity rho;
    IteratedLaplacian psi_m;  // construction lattice, for moment checks
    double c0 = 0.0;          // 1/||Psi_M||_inf unless overridden
    double clipped = 0.0;
};

// rho = 1 + c0 * Psi_M(x/eps) with c0 = 1/||Psi_M||_inf; the localized
// oscillation has vanishing moments up to order 2M-1, giving the sharp
// smallness of W_s * rho while d_infty(rho, 1) stays of size eps.
inline OscillatoryFamily oscillatory_density(int d, double eps, int M, int N, int refine = 8,
                                             double c0_override = 0.0) {
    if (!(eps > 0 && eps < 0.25)) throw std::invalid_argument("oscillatory_density: need 0 < eps < 1/4");
    if (M < 1) throw std::invalid_argument("oscillatory_density: M >= 1");
    if (eps * N < 8.0) throw std::runtime_error("oscillatory_density: under-resolved, need eps*N >= 8");
    Mollifier moll(d);
    Grid grid(d, N);

    // reference (y = x/eps) coordinates of target cell centers: spacing
    // 1/(N eps); refine by `refine` so targets are lattice points
    const double target_step = 1.0 / (double(N) * eps);
    const double h = target_step / refine;
    // one target center per axis: y0 = (0.5/N - 0.5)/eps; align lattice to it
    const double y0 = (0.5 / N - 0.5) / eps;
    const double origin_offset = y0 - std::floor(y0 / h) * h;

    OscillatoryFamily fam;
    fam.psi_m = iterated_laplacian(moll, M, h, origin_offset);
    fam.c0 = c0_override > 0 ? c0_override : 1.0 / fam.psi_m.sup_norm;

    fam.rho.grid = grid;
    const double n_cells = double(grid.cell_count());
    fam.rho.mass.assign(size_t(grid.cell_count()), 1.0 / n_cells);
    const auto& psi_m = fam.psi_m;
    for (std::int64_t c = 0; c < grid.cell_count(); ++c) {
        TorusPoint p = grid.center(c);
        // lattice index of this target point, per axis
        std::int64_t lin = 0;
        bool in_range = true;
        for (int i = 0; i < d; ++i) {
            double y = p.x[size_t(i)] / eps;
            double fi = (y - psi_m.origin) / h;
            std::int64_t j = std::int64_t(std::llround(fi));
            if (j < 0 || j >= psi_m.n) {
                in_range = false;  // Psi_M vanishes outside the lattice
                break;
            }
            lin = lin * psi_m.n + j;
        }
        if (!in_range) continue;
        fam.rho.mass[size_t(c)] += fam.c0 * psi_m.values[size_t(lin)] / n_cells;
    }
    fam.clipped = detail::renormalize_density(fam.rho);
    return fam;
}

}  // namespace torpot
