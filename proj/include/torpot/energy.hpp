#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "torpot/common.hpp"
#include "torpot/measures.hpp"
#include "torpot/mollifier.hpp"
#include "torpot/riesz.hpp"
#include "torpot/spectral.hpp"
#include "torpot/torus.hpp"

namespace torpot {

// W~(x) = W_s(x) - c0 eps^{-s} psi(x/eps): short-range attractive well added
// to the Riesz kernel; its Fourier coefficients dip negative in a band of
// frequencies around 1/eps, which drives cluster formation.
class PerturbedPotential {
public:
    PerturbedPotential(RieszSpec base, double eps, double c0)
        : base_(base), eps_(eps), c0_(c0), moll_(base.d), psihat_(moll_) {
        base_.validate();
        if (!(eps > 0 && eps < 0.5)) throw std::invalid_argument("PerturbedPotential: 0 < eps < 1/2");
        if (!(c0 > 0)) throw std::invalid_argument("PerturbedPotential: c0 > 0");
    }

    const RieszSpec& base() const { return base_; }
    double eps() const { return eps_; }
    double c0() const { return c0_; }
    const Mollifier& mollifier() const { return moll_; }

    // F[W~](k) = |k|^{-(d-s)} - c0 eps^{d-s} psihat(eps |k|)
    double coeff(double knorm) const {
        if (knorm <= 0) throw std::invalid_argument("PerturbedPotential::coeff: k != 0");
        return std::pow(knorm, base_.s - base_.d) -
               c0_ * std::pow(eps_, double(base_.d) - base_.s) * psihat_(eps_ * knorm);
    }
    std::function<double(const std::vector<int>&)> coeff_fn() const {
        return [this](const std::vector<int>& k) {
            double k2 = 0;
            for (int ki : k) k2 += double(ki) * ki;
            return k2 == 0 ? 0.0 : coeff(std::sqrt(k2));
        };
    }

    // perturbation value/gradient (the part subtracted from W_s)
    double bump(const TorusPoint& x) const {
        std::vector<double> y(size_t(base_.d), 0.0);
        for (int i = 0; i < base_.d; ++i) y[size_t(i)] = wrap_coord(x.x[size_t(i)]) / eps_;
        return c0_ * std::pow(eps_, -base_.s) * moll_.psi(y);
    }
    std::vector<double> bump_gradient(const TorusPoint& x) const {
        std::vector<double> y(size_t(base_.d), 0.0);
        for (int i = 0; i < base_.d; ++i) y[size_t(i)] = wrap_coord(x.x[size_t(i)]) / eps_;
        auto g = moll_.grad_psi(y);
        double f = c0_ * std::pow(eps_, -base_.s) / eps_;
        for (double& gi : g) gi *= f;
        return g;
    }

    // ||W - W~||_inf = c0 eps^{-s} psi(0): the bump peak.
    double sup_distance() const { return c0_ * std::pow(eps_, -base_.s) * moll_.peak(); }

    struct NegativityScan {
        int negative_count = 0;
        double min_coeff = 0.0;
        double min_knorm = 0.0;  // |k| where the minimum is attained
    };

    // Scan integer modes |k|_inf <= kmax for negative coefficients.
    NegativityScan scan_negative(int kmax) const {
        NegativityScan out;
        std::vector<int> k(size_t(base_.d), -kmax);
        bool first = true;
        while (true) {
            double k2 = 0;
            for (int ki : k) k2 += double(ki) * ki;
            if (k2 > 0) {
                double v = coeff(std::sqrt(k2));
                if (v < 0) ++out.negative_count;
                if (first || v < out.min_coeff) {
                    out.min_coeff = v;
                    out.min_knorm = std::sqrt(k2);
                    first = false;
                }
            }
            int i = base_.d - 1;
            while (i >= 0 && k[size_t(i)] == kmax) k[size_t(i--)] = -kmax;
            if (i < 0) break;
            ++k[size_t(i)];
        }
        return out;
    }

    // Largest coefficient over lattice magnitudes in [lo, hi]; < 0 means the
    // whole band is negative.
    double band_max_coeff(double lo, double hi) const {
        int kmax = int(std::ceil(hi)) + 1;
        double worst = -std::numeric_limits<double>::infinity();
        std::vector<int> k(size_t(base_.d), -kmax);
        while (true) {
            double k2 = 0;
            for (int ki : k) k2 += double(ki) * ki;
            double n = std::sqrt(k2);
            if (k2 > 0 && n >= lo && n <= hi) worst = std::max(worst, coeff(n));
            int i = base_.d - 1;
            while (i >= 0 && k[size_t(i)] == kmax) k[size_t(i--)] = -kmax;
            if (i < 0) break;
            ++k[size_t(i)];
        }
        return worst;
    }

    // First radius where psihat falls to 1/2 (bisection on the table).
    double half_mass_radius() const {
        double lo = 0.0, hi = 0.25;
        while (psihat_(hi) > 0.5) hi += 0.25;
        for (int it = 0; it < 80; ++it) {
            double mid = 0.5 * (lo + hi);
            (psihat_(mid) > 0.5 ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }

    double psihat(double rho) const { return psihat_(rho); }

private:
    RieszSpec base_;
    double eps_, c0_;
    Mollifier moll_;
    PsihatTable psihat_;
};

// (1/(2N^2)) sum_{i != j} W(x_i - x_j) for a pointwise kernel evaluator.
template <class Kernel>
double energy_discrete(const std::vector<TorusPoint>& pts, Kernel&& W) {
    const size_t n = pts.size();
    if (n < 2) throw std::invalid_argument("energy_discrete: need >= 2 particles");
    KahanSum s;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            std::vector<double> diff = torus_diff(pts[i], pts[j]);
            s.add(W(TorusPoint(std::move(diff))));
        }
    return s.value() / double(n * n);  // both (i,j) and (j,i), halved
}

}  // namespace torpot
