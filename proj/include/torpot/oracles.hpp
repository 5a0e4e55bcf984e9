#pragma once

// Independent reference implementations used by the test suite and by the
// `oracle` CLI subcommand.  Everything here deliberately avoids the production
// code paths (Ewald split, stencil expansion, max-flow) so agreement between
// the two is meaningful evidence.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "torpot/common.hpp"
#include "torpot/grid_set.hpp"
#include "torpot/measures.hpp"
#include "torpot/torus.hpp"

namespace torpot::oracle {

// ---- bottleneck assignment by exhaustive permutation ---------------------

// Equal-weight case n = m: min over permutations of the max matched distance.
inline double bottleneck_permutation(const WeightedAtoms& rho1, const WeightedAtoms& rho2) {
    const size_t n = rho1.pos.size();
    if (rho2.pos.size() != n || n == 0 || n > 10)
        throw std::invalid_argument("bottleneck_permutation: equal sizes, n <= 10");
    std::vector<double> dist(n * n);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j)
            dist[i * n + j] = torus_dist(rho1.pos[i], rho2.pos[j]);
    std::vector<size_t> perm(n);
    std::iota(perm.begin(), perm.end(), size_t(0));
    double best = std::numeric_limits<double>::infinity();
    do {
        double worst = 0.0;
        for (size_t i = 0; i < n; ++i) worst = std::max(worst, dist[i * n + perm[i]]);
        best = std::min(best, worst);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

// Equal-weight feasibility at radius r: exists a permutation with all matched
// distances <= r (with the same relative tolerance as the production edges).
inline bool feasible_permutation(const WeightedAtoms& rho1, const WeightedAtoms& rho2, double r) {
    double b = bottleneck_permutation(rho1, rho2);
    return !lt_tol(r, b);  // b <= r up to tolerance
}

// ---- brute-force set morphology -------------------------------------------

// O(N^{2d}) double loop over cell pairs; the production stencil version must
// match this exactly.
inline GridSet expand_brute(const GridSet& S, double r, bool closed = false) {
    const Grid& g = S.grid();
    GridSet out(g);
    if (r <= 0.0 && !closed) return S;
    std::vector<std::int64_t> members;
    for (std::int64_t c = 0; c < g.cell_count(); ++c)
        if (S.get(c)) members.push_back(c);
    for (std::int64_t c = 0; c < g.cell_count(); ++c) {
        TorusPoint pc = g.center(c);
        bool in = S.get(c);
        for (size_t mi = 0; mi < members.size() && !in; ++mi) {
            double dist = torus_dist(pc, g.center(members[mi]));
            in = closed ? !lt_tol(r, dist) : lt_tol(dist, r);
        }
        out.set(c, in);
    }
    return out;
}

inline GridSet regularize_brute(const GridSet& S, double r) {
    return expand_brute(expand_brute(S, r).complement(), r).complement();
}

// 1D discrepancy by enumerating every circular cell interval (including the
// empty one), O(N^2).
inline double discrepancy_brute(const GridDensity& rho) {
    if (rho.grid.d != 1) throw std::invalid_argument("discrepancy_brute: d = 1 only");
    const std::int64_t n = rho.grid.cell_count();
    const double u = 1.0 / double(n);
    double best = 0.0;  // empty interval
    for (std::int64_t start = 0; start < n; ++start) {
        double acc = 0.0;
        for (std::int64_t len = 1; len <= n; ++len) {
            acc += rho.mass[size_t((start + len - 1) % n)] - u;
            best = std::max(best, acc);
        }
    }
    return best;
}

// ---- spectral evaluation of the periodized Riesz kernel -------------------
//
// W_s(x) = sum_{k != 0} |k|^{s-d} e^{2 pi i k.x}
//        = (pi^sigma / Gamma(sigma)) Int_0^inf u^{sigma-1} (Theta_d(x,u) - 1) du,
// sigma = (d-s)/2, where Theta_d is the periodic heat kernel.  Theta switches
// between the q-series (u >= 1) and its modular image (u < 1); the [0,1] piece
// is integrated after the substitution u = v^{1/sigma}, which removes the
// endpoint singularity of u^{sigma-1}.

inline double theta1(double x, double u) {
    if (u >= 1.0) {
        double acc = 1.0;
        for (int k = 1; k <= 8; ++k) {
            double decay = std::exp(-M_PI * double(k) * k * u);
            acc += 2.0 * decay * std::cos(2.0 * M_PI * k * x);
            if (decay < 1e-20) break;
        }
        return acc;
    }
    // modular form: u^{-1/2} sum_j e^{-pi (x-j)^2 / u}
    double acc = 0.0;
    int span = int(std::ceil(4.0 * std::sqrt(u))) + 1;
    for (int j = -span; j <= span; ++j) {
        double t = x - j;
        double e = M_PI * t * t / u;
        if (e < 46.0) acc += std::exp(-e);
    }
    return acc / std::sqrt(u);
}

inline double theta_d(const std::vector<double>& x, double u) {
    double acc = 1.0;
    for (double xi : x) acc *= theta1(xi, u);
    return acc;
}

inline double riesz_spectral(int d, double s, const std::vector<double>& x_in) {
    if (!(s < d)) throw std::invalid_argument("riesz_spectral: s < d");
    std::vector<double> x(x_in);
    for (double& xi : x) xi = wrap_coord(xi);
    const double sigma = 0.5 * (double(d) - s);
    using boost::math::quadrature::gauss_kronrod;
    auto upper = [&](double u) { return std::pow(u, sigma - 1.0) * (theta_d(x, u) - 1.0); };
    double A = gauss_kronrod<double, 31>::integrate(upper, 1.0, 48.0, 12, 1e-12);
    auto lower = [&](double v) {
        double u = std::pow(v, 1.0 / sigma);
        return theta_d(x, u) - 1.0;
    };
    double B = gauss_kronrod<double, 31>::integrate(lower, 0.0, 1.0, 15, 1e-11) / sigma;
    return std::pow(M_PI, sigma) / boost::math::tgamma(sigma) * (A + B);
}

// 1D closed forms (independent of both production and theta paths).
inline double w1d_log(double x) {  // sum 2 cos(2 pi k x)/k = -2 log|2 sin(pi x)|
    double t = wrap_coord(x);
    if (t == 0.0) throw std::invalid_argument("w1d_log: singular at 0");
    return -2.0 * std::log(std::abs(2.0 * std::sin(M_PI * t)));
}

inline double w1d_s_minus1(double x) {  // 2 pi^2 B_2({x}) with B_2(t) = t^2 - t + 1/6
    double t = wrap_coord(x);
    if (t < 0) t += 1.0;
    return 2.0 * M_PI * M_PI * (t * t - t + 1.0 / 6.0);
}

inline double w1d_s_minus3(double x) {  // -(2 pi^4 / 3) B_4({x})
    double t = wrap_coord(x);
    if (t < 0) t += 1.0;
    double b4 = ((t - 2.0) * t + 1.0) * t * t - 1.0 / 30.0;
    return -(2.0 * M_PI * M_PI * M_PI * M_PI / 3.0) * b4;
}

// ---- incomplete-gamma forms of the Ewald t-integrals ----------------------

// Gamma(nu, a) extended to nu <= 0 by the downward recurrence
// Gamma(nu, a) = (Gamma(nu+1, a) - a^nu e^{-a}) / nu.
inline double upper_incomplete_gamma_any(double nu, double a) {
    if (!(a > 0)) throw std::invalid_argument("upper_incomplete_gamma_any: a > 0");
    if (nu > 0) return boost::math::tgamma(nu, a);
    return (upper_incomplete_gamma_any(nu + 1.0, a) - std::pow(a, nu) * std::exp(-a)) / nu;
}

// Int_1^inf t^{nu-1} e^{-a t} dt = a^{-nu} Gamma(nu, a)
inline double upper_integral_gamma(double a, double nu) {
    if (a == 0.0) {
        if (nu < 0) return -1.0 / nu;
        throw std::invalid_argument("upper_integral_gamma: diverges for a=0, nu>=0");
    }
    return std::pow(a, -nu) * upper_incomplete_gamma_any(nu, a);
}

// Int_0^1 e^{-b/t} t^{nu-1} dt = b^{nu} Gamma(-nu, b)  (substitute t -> 1/t)
inline double lower_integral_gamma(double b, double nu) {
    if (!(b > 0)) throw std::invalid_argument("lower_integral_gamma: b > 0");
    return std::pow(b, nu) * upper_incomplete_gamma_any(-nu, b);
}

}  // namespace torpot::oracle
