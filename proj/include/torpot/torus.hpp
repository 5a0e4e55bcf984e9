#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "torpot/common.hpp"

namespace torpot {

// Reduce a coordinate to the fundamental domain [-1/2, 1/2).
inline double wrap_coord(double x) {
    double y = x - std::floor(x + 0.5);
    if (y >= 0.5) y -= 1.0;   // guards the x = 0.5 - ulp rounding case
    if (y < -0.5) y += 1.0;
    return y;
}

// Point on the flat torus T^d = [-1/2,1/2)^d. d is small (1..3 in practice).
struct TorusPoint {
    std::vector<double> x;

    TorusPoint() = default;
    explicit TorusPoint(std::vector<double> coords) : x(std::move(coords)) { wrap(); }

    int dim() const { return int(x.size()); }
    void wrap() {
        for (double& c : x) c = wrap_coord(c);
    }
    double operator[](int i) const { return x[size_t(i)]; }
};

// Difference x - y reduced per-axis to [-1/2,1/2); the minimal displacement vector.
inline std::vector<double> torus_diff(const TorusPoint& x, const TorusPoint& y) {
    if (x.dim() != y.dim()) throw std::invalid_argument("torus_diff: dimension mismatch");
    std::vector<double> d(x.x.size());
    for (size_t i = 0; i < d.size(); ++i) d[i] = wrap_coord(x.x[i] - y.x[i]);
    return d;
}

// Geodesic (Euclidean-on-covering) distance; min over integer shifts per axis.
inline double torus_dist(const TorusPoint& x, const TorusPoint& y) {
    if (x.dim() != y.dim()) throw std::invalid_argument("torus_dist: dimension mismatch");
    double s = 0.0;
    for (size_t i = 0; i < x.x.size(); ++i) {
        double d = wrap_coord(x.x[i] - y.x[i]);
        // wrap_coord maps to [-1/2,1/2); the +1/2 image has the same |d|.
        if (d < -0.5 + 1e-300) d = 0.5;
        s += d * d;
    }
    return std::sqrt(s);
}

// Uniform N^d grid on the torus; cells are half-open boxes of side 1/N with
// centers at (j + 1/2)/N - 1/2 per axis.
struct Grid {
    int d = 1;
    int N = 2;

    Grid() = default;
    Grid(int dim, int cells) : d(dim), N(cells) {
        if (d < 1 || d > 3) throw std::invalid_argument("Grid: d must be 1..3");
        if (N < 2) throw std::invalid_argument("Grid: N must be >= 2");
    }

    std::int64_t cell_count() const {
        std::int64_t c = 1;
        for (int i = 0; i < d; ++i) c *= N;
        return c;
    }
    double cell_width() const { return 1.0 / N; }

    // Row-major linear index; axis 0 is the slowest.
    std::int64_t index(const std::vector<int>& j) const {
        std::int64_t idx = 0;
        for (int i = 0; i < d; ++i) idx = idx * N + j[size_t(i)];
        return idx;
    }
    std::vector<int> decode(std::int64_t idx) const {
        std::vector<int> j(size_t(d), 0);
        for (int i = d - 1; i >= 0; --i) {
            j[size_t(i)] = int(idx % N);
            idx /= N;
        }
        return j;
    }
    TorusPoint center(std::int64_t idx) const {
        auto j = decode(idx);
        std::vector<double> c(size_t(d), 0.0);
        for (int i = 0; i < d; ++i) c[size_t(i)] = (j[size_t(i)] + 0.5) / N - 0.5;
        return TorusPoint(std::move(c));
    }
    // Cell containing a point: per-axis floor((x+1/2)*N) with wrap.
    std::int64_t locate(const TorusPoint& p) const {
        if (p.dim() != d) throw std::invalid_argument("Grid::locate: dimension mismatch");
        std::vector<int> j(size_t(d), 0);
        for (int i = 0; i < d; ++i) {
            double u = (wrap_coord(p.x[size_t(i)]) + 0.5) * N;
            int jj = int(std::floor(u));
            if (jj >= N) jj -= N;
            if (jj < 0) jj += N;
            j[size_t(i)] = jj;
        }
        return index(j);
    }
    bool operator==(const Grid& o) const { return d == o.d && N == o.N; }
};

}  // namespace torpot
