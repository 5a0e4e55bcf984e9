#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "torpot/common.hpp"
#include "torpot/dinfty.hpp"
#include "torpot/energy.hpp"
#include "torpot/grid_set.hpp"
#include "torpot/measures.hpp"
#include "torpot/mollifier.hpp"
#include "torpot/riesz.hpp"
#include "torpot/spectral.hpp"

namespace torpot {

inline double conjugate_exponent(double p) {
    if (std::isinf(p)) return 1.0;
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    return p / (p - 1.0);
}

// ---- certified lower bound on d_infty(rho, 1) via set witnesses ---------

struct WitnessLowerBound {
    double lower_bound = 0.0;  // best certified d_infty(rho, 1) >= lower_bound
    double best_R = 0.0;       // ball radius parameter that achieved it
    bool complement = false;   // witness was the complement of the ball
    double margin = 0.0;       // mass excess at the certifying radius
};

// Largest q with rho(S) > |S_q(closed)| by bisection (the margin is
// non-increasing in q); the certificate then gives d_infty >= q - sqrt(d)/(2N).
inline double witness_radius(const GridDensity& rho, const GridSet& S, double q_hi,
                             double* margin_out = nullptr) {
    double m0 = set_witness_margin(rho, S, 0.0);
    if (margin_out) *margin_out = m0;
    if (m0 <= 1e-13) return -1.0;
    double lo = 0.0, hi = q_hi;
    if (set_witness_margin(rho, S, hi) > 1e-13) {
        if (margin_out) *margin_out = set_witness_margin(rho, S, hi);
        return hi;
    }
    for (int it = 0; it < 40; ++it) {
        double mid = 0.5 * (lo + hi);
        double m = set_witness_margin(rho, S, mid);
        if (m > 1e-13) {
            lo = mid;
            if (margin_out) *margin_out = m;
        } else {
            hi = mid;
        }
    }
    return lo;
}

// Scan witness balls B(0; eps*R) for R in r_scan (and their complements, as
// the construction concentrates signed mass at the origin at scale eps).
inline WitnessLowerBound witness_lower_bound(const GridDensity& rho, double eps,
                                             const std::vector<double>& r_scan = {
                                                 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}) {
    const Grid& g = rho.grid;
    const double half_diag = 0.5 * std::sqrt(double(g.d)) / g.N;
    TorusPoint origin(std::vector<double>(size_t(g.d), 0.0));
    WitnessLowerBound out;
    for (double R : r_scan) {
        GridSet ball = grid_ball(g, origin, eps * R);
        for (int use_comp = 0; use_comp < 2; ++use_comp) {
            GridSet S = use_comp ? ball.complement() : ball;
            if (S.empty() || S.full()) continue;
            double margin = 0.0;
            double q = witness_radius(rho, S, 4.0 * eps + 4.0 * half_diag, &margin);
            double lb = q - half_diag;
            if (lb > out.lower_bound) {
                out.lower_bound = lb;
                out.best_R = R;
                out.complement = use_comp != 0;
                out.margin = margin;
            }
        }
    }
    return out;
}

// ---- sharpness scaling sweep --------------------------------------------

struct ScalingRow {
    double eps = 0.0;
    int N = 0;          // grid resolution used for the potential norm
    int N_witness = 0;  // grid resolution used for the d_infty lower bound
    double norm_p = 0.0;
    double dinf_lb = 0.0;
    double witness_R = 0.0;
};

struct ScalingResult {
    int d = 0;
    double s = 0.0, p = 0.0;
    int M = 1;
    std::vector<ScalingRow> rows;
    double slope_norm = 0.0;   // fitted slope of log ||W_s * rho||_p vs log eps
    double target_norm = 0.0;  // d + d/p - s
    double slope_lb = 0.0;     // fitted slope of log lower-bound vs log eps
    double target_lb = 1.0;
};

inline int pow2_at_least(double x) {
    int n = 2;
    while (n < x) n *= 2;
    return n;
}

// Oscillatory densities at scale eps: ||W_s * rho||_p ~ eps^{d + d/p - s}
// while d_infty(rho, 1) ~ eps, which is what makes the exponent sharp.
inline ScalingResult scaling_experiment(int d, double s, double p,
                                        const std::vector<double>& eps_list, int M = 1) {
    if (eps_list.size() < 2) throw std::invalid_argument("scaling_experiment: need >= 2 sweep points");
    ScalingResult out;
    out.d = d;
    out.s = s;
    out.p = p;
    out.M = M;
    out.target_norm = d + (std::isinf(p) ? 0.0 : double(d) / p) - s;
    std::vector<double> lx, ln, ll;
    for (double eps : eps_list) {
        ScalingRow row;
        row.eps = eps;
        row.N = pow2_at_least(16.0 / eps);
        OscillatoryFamily fam = oscillatory_density(d, eps, M, row.N);
        RieszSpec spec;
        spec.d = d;
        spec.s = s;
        spec.K = row.N / 2 - 1;
        PotentialField V = potential_field(spec, fam.rho);
        row.norm_p = lp_norm(V, p);

        row.N_witness = std::min(row.N, pow2_at_least(8.0 / eps));
        OscillatoryFamily wfam = (row.N_witness == row.N)
                                     ? std::move(fam)
                                     : oscillatory_density(d, eps, M, row.N_witness);
        WitnessLowerBound lb = witness_lower_bound(wfam.rho, eps);
        row.dinf_lb = lb.lower_bound;
        row.witness_R = lb.best_R;
        lx.push_back(std::log(eps));
        ln.push_back(std::log(row.norm_p));
        if (row.dinf_lb > 0) ll.push_back(std::log(row.dinf_lb));
        out.rows.push_back(row);
    }
    out.slope_norm = fit_line(lx, ln).slope;
    if (ll.size() == lx.size())
        out.slope_lb = fit_line(lx, ll).slope;
    else
        out.slope_lb = std::numeric_limits<double>::quiet_NaN();
    return out;
}

// ---- mollified-kernel norm sweep ----------------------------------------

struct UepsRow {
    double eps = 0.0;
    int N = 0;
    double norm_q = 0.0;
    double log_model_ratio = 0.0;  // norm / (1 + |log eps|)^{1/q}
};

struct UepsResult {
    int d = 0;
    double beta = 0.0, p = 0.0, q = 0.0;
    std::vector<UepsRow> rows;
    double slope = 0.0;
    double target = 0.0;  // -beta - d/p
    double ratio_spread = 0.0;  // max/min of log_model_ratio across the sweep
};

inline UepsResult ueps_experiment(int d, double beta, double p, const std::vector<double>& eps_list,
                                  const PsihatTable& psihat) {
    if (eps_list.size() < 2) throw std::invalid_argument("ueps_experiment: need >= 2 sweep points");
    UepsResult out;
    out.d = d;
    out.beta = beta;
    out.p = p;
    out.q = conjugate_exponent(p);
    out.target = -beta - (std::isinf(p) ? 0.0 : double(d) / p);
    std::vector<double> lx, ly;
    double rmin = std::numeric_limits<double>::infinity(), rmax = 0.0;
    for (double eps : eps_list) {
        UepsRow row;
        row.eps = eps;
        row.N = pow2_at_least(32.0 / eps);
        MollifiedField f = mollified_field(d, beta, eps, out.q, row.N, psihat);
        row.norm_q = f.norm_q;
        double model = std::pow(1.0 + std::abs(std::log(eps)),
                                std::isinf(out.q) ? 0.0 : 1.0 / out.q);
        row.log_model_ratio = row.norm_q / model;
        rmin = std::min(rmin, row.log_model_ratio);
        rmax = std::max(rmax, row.log_model_ratio);
        lx.push_back(std::log(eps));
        ly.push_back(std::log(row.norm_q));
        out.rows.push_back(row);
    }
    out.slope = fit_line(lx, ly).slope;
    out.ratio_spread = rmax / rmin;
    return out;
}

// ---- stability tables -----------------------------------------------------

struct StabilityRow {
    double param = 0.0;   // sweep parameter (eps or amplitude)
    double energy = 0.0;  // E_W (spectral)
    double enc_lo = 0.0, enc_mid = 0.0, enc_hi = 0.0;
    double ratio = 0.0;  // enc_mid / energy^gamma
    bool inconclusive = false;
    int suggested_N = 0;
};

struct StabilityResult {
    int d = 0;
    double s = 0.0;
    double gamma = 0.0;  // 1 / (2d - s)
    std::string family;
    std::vector<StabilityRow> rows;
    double fitted_A = 0.0;       // max ratio over conclusive rows
    double slope_loglog = 0.0;   // slope of log d_infty vs log E
};

// Generic sweep: family(param) -> GridDensity; E_W spectral with the Riesz
// coefficients; d_infty enclosure through the atomic solver.
inline StabilityResult stability_experiment(
    int d, double s, const std::string& family_name, const std::vector<double>& params,
    const std::function<GridDensity(double)>& family, int K = 16, int enclosure_N = 0) {
    StabilityResult out;
    out.d = d;
    out.s = s;
    out.gamma = 1.0 / (2.0 * d - s);
    out.family = family_name;
    std::vector<double> le, ld;
    for (double prm : params) {
        GridDensity rho = family(prm);
        StabilityRow row;
        row.param = prm;
        int Kc = std::min(K, rho.grid.N / 2 - 1);
        row.energy = energy_spectral(rho, riesz_coeff(d, s), Kc);
        int Ne = enclosure_N > 0 ? enclosure_N : default_enclosure_resolution(d);
        DinftyEnclosure enc = dinfty_to_uniform(rho, Ne);
        row.enc_lo = enc.lo;
        row.enc_mid = enc.midpoint();
        row.enc_hi = enc.hi;
        if (enc.half_width() >= row.enc_mid && row.enc_mid > 0) {
            row.inconclusive = true;
            // enclosure padding is 2 sqrt(d)/N; to get half-width below the
            // midpoint the resolution must exceed roughly 4 sqrt(d)/mid
            row.suggested_N = int(std::ceil(4.0 * std::sqrt(double(d)) / row.enc_mid));
        }
        if (row.energy > 0) {
            row.ratio = row.enc_mid / std::pow(row.energy, out.gamma);
            if (!row.inconclusive && row.enc_mid > 0) {
                le.push_back(std::log(row.energy));
                ld.push_back(std::log(row.enc_mid));
            }
        }
        out.rows.push_back(row);
    }
    for (const StabilityRow& r : out.rows)
        if (!r.inconclusive) out.fitted_A = std::max(out.fitted_A, r.ratio);
    out.slope_loglog =
        le.size() >= 2 ? fit_line(le, ld).slope : std::numeric_limits<double>::quiet_NaN();
    return out;
}

// ---- set-diagnostic calibration -------------------------------------------

struct CalibrationData {
    int d = 2;
    int N = 64;
    int count = 0;
    std::uint64_t seed = 0;
    double r_min = 0.0, r_max = 0.0;
    double layer_ratio_max = 0.0;  // max |S_2r \ S_r| / |S_r \ S| observed
    double iso_ratio_min = 0.0;    // min |S_r \ S| / (r min(|S|,|S^c|)^{(d-1)/d})
    int degenerate = 0;
    // asserted bounds with safety margins, consumed by the acceptance suite
    double layer_bound() const { return 1.25 * layer_ratio_max; }
    double iso_bound() const { return 0.8 * iso_ratio_min; }
};

// Random r-regular set: regularization of a union of random balls.
inline GridSet random_regular_set(Rng& rng, const Grid& g, double r) {
    int balls = 1 + int(uniform01(rng) * 4);
    GridSet S(g);
    for (int b = 0; b < balls; ++b) {
        std::vector<double> c(size_t(g.d), 0.0);
        for (double& ci : c) ci = uniform01(rng) - 0.5;
        double rad = (0.03 + 0.12 * uniform01(rng));
        S = S | grid_ball(g, TorusPoint(c), rad);
    }
    if (S.empty()) S.set(0, true);
    return regularize(S, r);
}

inline CalibrationData calibrate_set_diagnostics(std::uint64_t seed, int count, int d = 2,
                                                 int N = 64) {
    CalibrationData out;
    out.d = d;
    out.N = N;
    out.count = count;
    out.seed = seed;
    Grid g(d, N);
    out.r_min = 2.0 / N;
    out.r_max = 0.08;
    out.iso_ratio_min = std::numeric_limits<double>::infinity();
    Rng rng(seed);
    for (int i = 0; i < count; ++i) {
        double r = out.r_min + (out.r_max - out.r_min) * uniform01(rng);
        GridSet S = random_regular_set(rng, g, r);
        LayerDiagnostic lay = layer_diagnostic(S, r);
        IsoperimetricDiagnostic iso = isoperimetric_diagnostic(S, r);
        if (lay.degenerate || iso.degenerate) {
            ++out.degenerate;
            continue;
        }
        out.layer_ratio_max = std::max(out.layer_ratio_max, lay.ratio);
        out.iso_ratio_min = std::min(out.iso_ratio_min, iso.ratio);
    }
    if (!std::isfinite(out.iso_ratio_min)) out.iso_ratio_min = 0.0;
    return out;
}

}  // namespace torpot
