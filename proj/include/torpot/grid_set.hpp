#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "torpot/common.hpp"
#include "torpot/torus.hpp"

namespace torpot {

// Subset of grid cells, packed one row (last axis, N bits) per word block.
// All set operations are exact combinatorics on the N^d lattice.
class GridSet {
public:
    GridSet() = default;
    explicit GridSet(Grid g) : grid_(g) {
        rows_ = 1;
        for (int i = 0; i < g.d - 1; ++i) rows_ *= g.N;
        wpr_ = (g.N + 63) / 64;
        words_.assign(size_t(rows_ * wpr_), 0ull);
    }

    const Grid& grid() const { return grid_; }
    std::int64_t cell_count() const { return grid_.cell_count(); }

    bool get(std::int64_t cell) const {
        std::int64_t row = cell / grid_.N, bit = cell % grid_.N;
        return (word(row, bit / 64) >> (bit % 64)) & 1ull;
    }
    void set(std::int64_t cell, bool v) {
        std::int64_t row = cell / grid_.N, bit = cell % grid_.N;
        std::uint64_t& w = word(row, bit / 64);
        if (v)
            w |= 1ull << (bit % 64);
        else
            w &= ~(1ull << (bit % 64));
    }

    std::int64_t popcount() const {
        std::int64_t n = 0;
        for (std::uint64_t w : words_) n += std::popcount(w);
        return n;
    }
    bool empty() const { return popcount() == 0; }
    bool full() const { return popcount() == cell_count(); }

    GridSet complement() const {
        GridSet out(grid_);
        for (size_t i = 0; i < words_.size(); ++i) out.words_[i] = ~words_[i];
        out.mask_tail();
        return out;
    }
    GridSet operator|(const GridSet& o) const {
        GridSet out(grid_);
        for (size_t i = 0; i < words_.size(); ++i) out.words_[i] = words_[i] | o.words_[i];
        return out;
    }
    GridSet operator&(const GridSet& o) const {
        GridSet out(grid_);
        for (size_t i = 0; i < words_.size(); ++i) out.words_[i] = words_[i] & o.words_[i];
        return out;
    }
    // Cells of *this not in o.
    GridSet minus(const GridSet& o) const {
        GridSet out(grid_);
        for (size_t i = 0; i < words_.size(); ++i) out.words_[i] = words_[i] & ~o.words_[i];
        return out;
    }
    bool operator==(const GridSet& o) const {
        return grid_ == o.grid_ && words_ == o.words_;
    }
    bool subset_of(const GridSet& o) const {
        for (size_t i = 0; i < words_.size(); ++i)
            if (words_[i] & ~o.words_[i]) return false;
        return true;
    }

    // Run-length encoding of the mask in linear cell order; alternating run
    // lengths starting with a (possibly zero-length) run of 0s.
    std::vector<std::int64_t> to_runs() const {
        std::vector<std::int64_t> runs;
        bool cur = false;
        std::int64_t len = 0;
        for (std::int64_t c = 0; c < cell_count(); ++c) {
            if (get(c) == cur) {
                ++len;
            } else {
                runs.push_back(len);
                cur = !cur;
                len = 1;
            }
        }
        runs.push_back(len);
        return runs;
    }
    static GridSet from_runs(Grid g, const std::vector<std::int64_t>& runs) {
        GridSet s(g);
        bool cur = false;
        std::int64_t c = 0;
        for (std::int64_t len : runs) {
            if (len < 0) throw std::invalid_argument("GridSet::from_runs: negative run");
            if (cur)
                for (std::int64_t i = 0; i < len; ++i) s.set(c + i, true);
            c += len;
            cur = !cur;
        }
        if (c != s.cell_count()) throw std::invalid_argument("GridSet::from_runs: length mismatch");
        return s;
    }

    friend GridSet expand(const GridSet& S, double r, bool closed);

private:
    Grid grid_{1, 2};
    std::int64_t rows_ = 1;
    int wpr_ = 1;  // words per row
    std::vector<std::uint64_t> words_;

    std::uint64_t& word(std::int64_t row, std::int64_t wi) { return words_[size_t(row * wpr_ + wi)]; }
    const std::uint64_t& word(std::int64_t row, std::int64_t wi) const {
        return words_[size_t(row * wpr_ + wi)];
    }
    void mask_tail() {
        int tail = grid_.N % 64;
        if (tail == 0) return;
        std::uint64_t m = (1ull << tail) - 1;
        for (std::int64_t row = 0; row < rows_; ++row) word(row, wpr_ - 1) &= m;
    }
    // out-row |= this-row rotated left by t bits (cyclic within N bits).
    void or_rotated_row(std::int64_t src_row, GridSet& out, std::int64_t dst_row, int t) const {
        const int N = grid_.N;
        t = ((t % N) + N) % N;
        const std::uint64_t* in = &words_[size_t(src_row * wpr_)];
        std::uint64_t* dst = &out.words_[size_t(dst_row * wpr_)];
        if (wpr_ == 1) {
            std::uint64_t w = in[0];
            std::uint64_t rot = (t == 0) ? w : ((w << t) | (w >> (N - t)));
            if (N < 64) rot &= (1ull << N) - 1;
            dst[0] |= rot;
            return;
        }
        // multi-word: bit i of the row moves to bit (i + t) mod N
        for (int wi = 0; wi < wpr_; ++wi) {
            std::uint64_t w = in[wi];
            while (w) {
                int b = std::countr_zero(w);
                w &= w - 1;
                std::int64_t nb = (std::int64_t(wi) * 64 + b + t) % N;
                dst[nb / 64] |= 1ull << (nb % 64);
            }
        }
    }
};

// Offsets v with |v|/N strictly below r (relative tolerance per kDistRelTol),
// restricted to one representative per torus image. closed=true switches the
// comparison to |v|/N <= r, used by transport witness certificates.
inline std::vector<std::vector<int>> expand_stencil(const Grid& g, double r, bool closed = false) {
    const int N = g.N;
    const int lo = -(N - 1) / 2, hi = N / 2;  // v_i in (-N/2, N/2]
    int reach = int(std::ceil(r * N)) + 1;
    const int a = std::max(lo, -reach), b = std::min(hi, reach);
    std::vector<std::vector<int>> stencil;
    std::vector<int> v(size_t(g.d), a);
    while (true) {
        double s = 0;
        for (int i = 0; i < g.d; ++i) s += double(v[size_t(i)]) * v[size_t(i)];
        double dist = std::sqrt(s) / N;
        bool in = closed ? !lt_tol(r, dist) : lt_tol(dist, r);
        if (in && !(s == 0)) stencil.push_back(v);
        int i = g.d - 1;
        while (i >= 0 && v[size_t(i)] == b) v[size_t(i--)] = a;
        if (i < 0) break;
        ++v[size_t(i)];
    }
    return stencil;
}

// S_r: cells whose center lies strictly within r of some center in S.
// r = 0 (or any r admitting no offsets) returns S unchanged.
inline GridSet expand(const GridSet& S, double r, bool closed = false) {
    if (r < 0) throw std::invalid_argument("expand: r must be >= 0");
    GridSet out = S;
    if (S.empty() || S.full()) return out;
    const Grid& g = S.grid();
    const int N = g.N;
    auto stencil = expand_stencil(g, r, closed);
    // group offsets by their leading (d-1) coordinates to reuse row shifts
    for (const auto& v : stencil) {
        int t = v[size_t(g.d - 1)];
        for (std::int64_t row = 0; row < S.rows_; ++row) {
            std::int64_t dst = 0;
            if (g.d >= 2) {
                auto rj = row;
                // decode row index (axes 0..d-2), add offset, re-encode
                int coord[2];
                for (int i = g.d - 2; i >= 0; --i) {
                    coord[i] = int(rj % N);
                    rj /= N;
                }
                for (int i = 0; i < g.d - 1; ++i) {
                    int c = coord[i] + v[size_t(i)];
                    c %= N;
                    if (c < 0) c += N;
                    dst = dst * N + c;
                }
            }
            S.or_rotated_row(row, out, dst, t);
        }
    }
    return out;
}

// (S_r^c)_r^c: fills sub-r features; fixed points are the r-regular sets.
inline GridSet regularize(const GridSet& S, double r) {
    if (r <= 0) throw std::invalid_argument("regularize: r must be > 0");
    if (S.empty() || S.full()) return S;
    return expand(expand(S, r).complement(), r).complement();
}

inline double set_measure(const GridSet& S) {
    return double(S.popcount()) / double(S.cell_count());
}

struct LayerDiagnostic {
    bool degenerate = false;
    double inner = 0.0;  // |S_r \ S|
    double outer = 0.0;  // |S_2r \ S_r|
    double ratio = 0.0;  // outer / inner
};

// Successive expansion layers; the ratio stays bounded on regular families.
inline LayerDiagnostic layer_diagnostic(const GridSet& S, double r) {
    if (r <= 0) throw std::invalid_argument("layer_diagnostic: r must be > 0");
    LayerDiagnostic out;
    GridSet Sr = expand(S, r);
    GridSet S2r = expand(S, 2 * r);
    if (S.empty() || S2r.full()) {
        out.degenerate = true;
        return out;
    }
    out.inner = set_measure(Sr.minus(S));
    out.outer = set_measure(S2r.minus(Sr));
    if (out.inner <= 0) {
        out.degenerate = true;  // no growth at scale r: ratio undefined
        return out;
    }
    out.ratio = out.outer / out.inner;
    return out;
}

struct IsoperimetricDiagnostic {
    bool degenerate = false;
    double layer = 0.0;     // |S_r \ S|
    double reference = 0.0; // r * min(|S|,|S^c|)^((d-1)/d)
    double ratio = 0.0;     // layer / reference
};

// Expansion-layer volume against the scale-correct surface proxy.
inline IsoperimetricDiagnostic isoperimetric_diagnostic(const GridSet& S, double r) {
    if (r <= 0) throw std::invalid_argument("isoperimetric_diagnostic: r must be > 0");
    IsoperimetricDiagnostic out;
    GridSet Sr = expand(S, r);
    if (S.empty() || Sr.full()) {
        out.degenerate = true;
        return out;
    }
    const int d = S.grid().d;
    double m = std::min(set_measure(S), 1.0 - set_measure(S));
    out.layer = set_measure(Sr.minus(S));
    out.reference = r * std::pow(m, double(d - 1) / d);
    out.ratio = out.layer / out.reference;
    return out;
}

// Cells with center strictly inside the ball B(center; radius).
inline GridSet grid_ball(Grid g, const TorusPoint& center, double radius) {
    GridSet s(g);
    for (std::int64_t c = 0; c < g.cell_count(); ++c)
        if (lt_tol(torus_dist(g.center(c), center), radius)) s.set(c, true);
    return s;
}

}  // namespace torpot
