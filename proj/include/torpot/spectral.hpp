#pragma once

#include <fftw3.h>

#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "torpot/common.hpp"
#include "torpot/measures.hpp"
#include "torpot/mollifier.hpp"
#include "torpot/riesz.hpp"
#include "torpot/torus.hpp"

namespace torpot {

// Real scalar field sampled at cell centers.
struct PotentialField {
    Grid grid;
    std::vector<double> value;

    double mean() const {
        KahanSum s;
        for (double v : value) s.add(v);
        return s.value() / double(grid.cell_count());
    }
};

// Finitely many Fourier coefficients c(k), |k|_inf <= K, k in Z^d.
struct SpectralCoeffs {
    int d = 1;
    int K = 0;
    std::vector<std::complex<double>> c;  // index: prod over axes of (k_i + K)

    std::int64_t side() const { return 2 * std::int64_t(K) + 1; }
    std::int64_t index(const std::vector<int>& k) const {
        std::int64_t idx = 0;
        for (int i = 0; i < d; ++i) {
            if (k[size_t(i)] < -K || k[size_t(i)] > K)
                throw std::out_of_range("SpectralCoeffs: mode outside cutoff");
            idx = idx * side() + (k[size_t(i)] + K);
        }
        return idx;
    }
    std::complex<double> at(const std::vector<int>& k) const { return c[size_t(index(k))]; }

    // visit every k with |k|_inf <= K
    template <class F>
    void for_each(F&& f) const {
        std::vector<int> k(size_t(d), -K);
        while (true) {
            f(const_cast<const std::vector<int>&>(k), c[size_t(index(k))]);
            int i = d - 1;
            while (i >= 0 && k[size_t(i)] == K) k[size_t(i--)] = -K;
            if (i < 0) break;
            ++k[size_t(i)];
        }
    }
};

namespace detail {

// Half-complex spectrum of a real N^d array (last axis stores N/2+1 entries).
struct HalfSpectrum {
    Grid grid;
    std::vector<std::complex<double>> data;

    std::int64_t last_dim() const { return grid.N / 2 + 1; }
    std::int64_t size() const {
        std::int64_t s = last_dim();
        for (int i = 0; i < grid.d - 1; ++i) s *= grid.N;
        return s;
    }
    // DFT value at integer frequency vector k (any sign), via Hermitian symmetry
    std::complex<double> at(std::vector<int> k) const {
        bool conj = false;
        int last = k[size_t(grid.d - 1)];
        if (((last % grid.N) + grid.N) % grid.N > grid.N / 2) {
            conj = true;
            for (int& ki : k) ki = -ki;
        }
        std::int64_t idx = 0;
        for (int i = 0; i < grid.d - 1; ++i) {
            int m = ((k[size_t(i)] % grid.N) + grid.N) % grid.N;
            idx = idx * grid.N + m;
        }
        int ml = ((k[size_t(grid.d - 1)] % grid.N) + grid.N) % grid.N;
        idx = idx * last_dim() + ml;
        std::complex<double> v = data[size_t(idx)];
        return conj ? std::conj(v) : v;
    }
};

inline HalfSpectrum fft_forward(const Grid& g, const std::vector<double>& in) {
    HalfSpectrum out;
    out.grid = g;
    out.data.assign(size_t(out.size()), {0.0, 0.0});
    std::vector<double> buf = in;  // FFTW_ESTIMATE may still clobber input
    std::vector<int> dims(size_t(g.d), g.N);
    fftw_plan plan = fftw_plan_dft_r2c(g.d, dims.data(), buf.data(),
                                       reinterpret_cast<fftw_complex*>(out.data.data()),
                                       FFTW_ESTIMATE);
    if (!plan) throw std::runtime_error("fftw_plan_dft_r2c failed");
    fftw_execute(plan);
    fftw_destroy_plan(plan);
    return out;
}

// Unnormalized inverse: out(j) = sum_k spec(k) e^{+2 pi i k.j/N} over all k,
// with negative-frequency entries implied by Hermitian symmetry.
inline std::vector<double> fft_backward(HalfSpectrum spec) {
    const Grid& g = spec.grid;
    std::vector<double> out(size_t(g.cell_count()));
    std::vector<int> dims(size_t(g.d), g.N);
    fftw_plan plan = fftw_plan_dft_c2r(g.d, dims.data(),
                                       reinterpret_cast<fftw_complex*>(spec.data.data()),
                                       out.data(), FFTW_ESTIMATE);
    if (!plan) throw std::runtime_error("fftw_plan_dft_c2r failed");
    fftw_execute(plan);  // destroys spec.data, which is a local copy
    fftw_destroy_plan(plan);
    return out;
}

// phase factor per axis turning DFT output into center-sampled coefficients:
// e^{-2 pi i k (1/(2N) - 1/2)} = (-1)^k e^{-i pi k / N}
inline std::complex<double> center_phase(int k, int N) {
    std::complex<double> p = std::polar(1.0, -M_PI * double(k) / double(N));
    return (k & 1) ? -p : p;
}

}  // namespace detail

// Fourier coefficients of a measure: rho_hat(k) = sum_cells mass e^{-2 pi i k.center}.
inline SpectralCoeffs fourier_coeffs(const GridDensity& rho, int K) {
    const Grid& g = rho.grid;
    if (!(K >= 0 && 2 * K < g.N))
        throw std::invalid_argument("fourier_coeffs: need K < N/2");
    auto spec = detail::fft_forward(g, rho.mass);
    SpectralCoeffs out;
    out.d = g.d;
    out.K = K;
    out.c.assign(size_t(1), {0, 0});
    std::int64_t total = 1;
    for (int i = 0; i < g.d; ++i) total *= out.side();
    out.c.assign(size_t(total), {0, 0});
    std::vector<int> k(size_t(g.d), -K);
    while (true) {
        std::complex<double> v = spec.at(k);
        for (int i = 0; i < g.d; ++i) v *= detail::center_phase(k[size_t(i)], g.N);
        out.c[size_t(out.index(k))] = v;
        int i = g.d - 1;
        while (i >= 0 && k[size_t(i)] == K) k[size_t(i--)] = -K;
        if (i < 0) break;
        ++k[size_t(i)];
    }
    return out;
}

// Fourier coefficients of a grid function (field): includes the cell volume.
inline SpectralCoeffs fourier_coeffs(const PotentialField& f, int K) {
    GridDensity tmp{f.grid, f.value};  // reuse the transform; values, not masses
    SpectralCoeffs out = fourier_coeffs(tmp, K);
    double vol = 1.0 / double(f.grid.cell_count());
    for (auto& c : out.c) c *= vol;
    return out;
}

// V = W_s * rho on the grid: multiply rho_hat by |k|^{-(d-s)} for
// 0 < |k|_inf <= K, zero elsewhere, and synthesize at cell centers.
inline PotentialField potential_field(const RieszSpec& spec, const GridDensity& rho) {
    spec.validate();
    const Grid& g = rho.grid;
    if (g.d != spec.d) throw std::invalid_argument("potential_field: dimension mismatch");
    if (!(2 * spec.K < g.N)) throw std::invalid_argument("potential_field: need K < N/2");
    auto sp = detail::fft_forward(g, rho.mass);
    // multiply in place; center phases cancel between analysis and synthesis
    const int N = g.N, K = spec.K;
    std::int64_t rows = 1;
    for (int i = 0; i < g.d - 1; ++i) rows *= N;
    const std::int64_t ld = sp.last_dim();
    for (std::int64_t row = 0; row < rows; ++row) {
        std::int64_t r = row;
        double ksq_head = 0.0;
        bool head_ok = true;
        std::vector<int> kh(size_t(g.d - 1));
        for (int i = g.d - 2; i >= 0; --i) {
            int m = int(r % N);
            r /= N;
            int ki = m <= N / 2 ? m : m - N;
            kh[size_t(i)] = ki;
            if (std::abs(ki) > K) head_ok = false;
            ksq_head += double(ki) * ki;
        }
        for (std::int64_t ml = 0; ml < ld; ++ml) {
            std::complex<double>& v = sp.data[size_t(row * ld + ml)];
            int kl = int(ml);  // last-axis index in r2c layout is 0..N/2
            double k2 = ksq_head + double(kl) * kl;
            if (!head_ok || kl > K || k2 == 0.0) {
                v = 0.0;
                continue;
            }
            v *= std::pow(k2, 0.5 * (spec.s - spec.d));  // |k|^{-(d-s)}
        }
    }
    PotentialField out;
    out.grid = g;
    out.value = detail::fft_backward(std::move(sp));
    return out;
}

// (sum |V|^p / N^d)^{1/p}; p = infinity gives the max.
inline double lp_norm(const PotentialField& f, double p) {
    if (!(p >= 1.0)) throw std::invalid_argument("lp_norm: need p >= 1");
    if (std::isinf(p)) {
        double m = 0.0;
        for (double v : f.value) m = std::max(m, std::abs(v));
        return m;
    }
    KahanSum s;
    for (double v : f.value) s.add(std::pow(std::abs(v), p));
    return std::pow(s.value() / double(f.grid.cell_count()), 1.0 / p);
}

// 1/2 sum_{0<|k|_inf<=K} What(k) |rho_hat(k)|^2 for a user-supplied
// coefficient function What(k) with What(0) = 0.
inline double energy_spectral(const GridDensity& rho,
                              const std::function<double(const std::vector<int>&)>& What, int K) {
    SpectralCoeffs coeffs = fourier_coeffs(rho, K);
    KahanSum s;
    coeffs.for_each([&](const std::vector<int>& k, std::complex<double> c) {
        bool zero = true;
        for (int ki : k)
            if (ki != 0) zero = false;
        if (zero) return;
        s.add(What(k) * std::norm(c));
    });
    return 0.5 * s.value();
}

// Riesz coefficient function |k|^{-(d-s)} for energy_spectral.
inline std::function<double(const std::vector<int>&)> riesz_coeff(int d, double s) {
    return [d, s](const std::vector<int>& k) {
        double k2 = 0;
        for (int ki : k) k2 += double(ki) * ki;
        return k2 == 0 ? 0.0 : std::pow(k2, 0.5 * (s - d));
    };
}

// u = sum_{k != 0} psihat(eps|k|) |k|^beta e^{2 pi i k.x} sampled at cell
// centers, and its L^q norm. Modes beyond the psihat table range carry
// coefficients < 1e-6 and are dropped.
struct MollifiedField {
    PotentialField field;
    double norm_q = 0.0;
};

inline MollifiedField mollified_field(int d, double beta, double eps, double q, int N,
                                      const PsihatTable& psihat, double rho_cut = 64.0) {
    if (!(eps > 0 && eps < 0.5)) throw std::invalid_argument("mollified_field: need 0 < eps < 1/2");
    if (d == 1 ? !(beta > -1.0) : !(beta >= 0.0))
        throw std::invalid_argument("mollified_field: beta out of range");
    Grid g(d, N);
    detail::HalfSpectrum sp;
    sp.grid = g;
    sp.data.assign(size_t(sp.size()), {0.0, 0.0});
    const std::int64_t ld = sp.last_dim();
    std::int64_t rows = 1;
    for (int i = 0; i < g.d - 1; ++i) rows *= N;
    for (std::int64_t row = 0; row < rows; ++row) {
        std::int64_t r = row;
        double ksq_head = 0.0;
        std::vector<int> kh(size_t(std::max(g.d - 1, 0)));
        bool head_in = true;
        for (int i = g.d - 2; i >= 0; --i) {
            int m = int(r % N);
            r /= N;
            int ki = m <= N / 2 ? m : m - N;
            kh[size_t(i)] = ki;
            if (std::abs(ki) >= N / 2) head_in = false;  // keep spectrum Hermitian-complete
            ksq_head += double(ki) * ki;
        }
        for (std::int64_t ml = 0; ml < ld; ++ml) {
            if (!head_in || ml >= N / 2) continue;
            double k2 = ksq_head + double(ml) * ml;
            if (k2 == 0.0) continue;
            double norm = std::sqrt(k2);
            if (eps * norm > rho_cut) continue;
            double coef = psihat(eps * norm) * std::pow(norm, beta);
            // synthesis phase: coefficients are for e^{2 pi i k.x} at centers
            std::complex<double> v(coef, 0.0);
            for (int i = 0; i < g.d - 1; ++i) v *= std::conj(detail::center_phase(kh[size_t(i)], N));
            v *= std::conj(detail::center_phase(int(ml), N));
            sp.data[size_t(row * ld + ml)] = v;
        }
    }
    MollifiedField out;
    out.field.grid = g;
    out.field.value = detail::fft_backward(std::move(sp));
    out.norm_q = lp_norm(out.field, q);
    return out;
}

}  // namespace torpot
