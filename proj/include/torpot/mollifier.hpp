#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "torpot/common.hpp"

namespace torpot {

// Smooth bump e^{-1/(1-|y|^2)} on |y|<1, normalized to unit integral.
// Shared by the density constructions, the perturbed kernels, and the
// mollified-field synthesis.
class Mollifier {
public:
    explicit Mollifier(int d) : d_(d) {
        if (d < 1 || d > 3) throw std::invalid_argument("Mollifier: d must be 1..3");
        Z_ = radial_integral([](double) { return 1.0; });
    }

    int dim() const { return d_; }
    double normalization() const { return Z_; }
    double peak() const { return std::exp(-1.0) / Z_; }  // psi(0)

    static double bump_raw(double r2) {
        return r2 < 1.0 ? std::exp(-1.0 / (1.0 - r2)) : 0.0;
    }

    double psi_r2(double r2) const { return bump_raw(r2) / Z_; }

    double psi(const std::vector<double>& y) const {
        double r2 = 0;
        for (double c : y) r2 += c * c;
        return psi_r2(r2);
    }

    // grad psi(y) = -2 y psi(y) / (1-|y|^2)^2
    std::vector<double> grad_psi(const std::vector<double>& y) const {
        double r2 = 0;
        for (double c : y) r2 += c * c;
        std::vector<double> g(y.size(), 0.0);
        if (r2 >= 1.0) return g;
        double f = -2.0 * psi_r2(r2) / ((1.0 - r2) * (1.0 - r2));
        for (size_t i = 0; i < y.size(); ++i) g[i] = f * y[i];
        return g;
    }

    // Continuous Fourier transform (radial): psi_hat(0) = 1.
    double psi_hat(double rho) const {
        rho = std::abs(rho);
        if (rho == 0.0) return 1.0;
        double val = 0.0;
        switch (d_) {
            case 1:
                val = radial_integral([rho](double r) { return std::cos(2 * M_PI * rho * r); });
                break;
            case 2:
                val = radial_integral(
                    [rho](double r) { return boost::math::cyl_bessel_j(0, 2 * M_PI * rho * r); });
                break;
            case 3:
                val = radial_integral([rho](double r) {
                    double u = 2 * M_PI * rho * r;
                    return u < 1e-8 ? 1.0 - u * u / 6.0 : std::sin(u) / u;
                });
                break;
        }
        return val / Z_;
    }

private:
    int d_;
    double Z_ = 1.0;

    // integral of bump(r) * w(r) * (surface factor) over r in [0,1]
    template <class W>
    double radial_integral(W w) const {
        auto f = [this, &w](double r) {
            double base = bump_raw(r * r) * w(r);
            switch (d_) {
                case 1: return 2.0 * base;
                case 2: return 2.0 * M_PI * r * base;
                default: return 4.0 * M_PI * r * r * base;
            }
        };
        return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, 1.0, 12,
                                                                             1e-12);
    }
};

// Dense radial table of psi_hat with cubic interpolation; direct quadrature
// beyond the tabulated range (rare, tails there are < 1e-6).
class PsihatTable {
public:
    PsihatTable(const Mollifier& m, double rho_max = 64.0, double step = 1.0 / 128)
        : moll_(&m), rho_max_(rho_max), step_(step) {
        int n = int(std::ceil(rho_max / step)) + 4;
        vals_.resize(size_t(n));
        for (int i = 0; i < n; ++i) vals_[size_t(i)] = m.psi_hat(i * step);
    }

    double operator()(double rho) const {
        rho = std::abs(rho);
        double u = rho / step_;
        size_t i = size_t(u);
        if (i + 2 >= vals_.size()) return moll_->psi_hat(rho);
        double t = u - double(i);
        // Catmull-Rom through the 4 surrounding samples
        double p0 = vals_[i == 0 ? 1 : i - 1], p1 = vals_[i], p2 = vals_[i + 1], p3 = vals_[i + 2];
        if (i == 0) p0 = vals_[1];  // psi_hat is even in rho
        double a = -0.5 * p0 + 1.5 * p1 - 1.5 * p2 + 0.5 * p3;
        double b = p0 - 2.5 * p1 + 2.0 * p2 - 0.5 * p3;
        double c = 0.5 * (p2 - p0);
        return ((a * t + b) * t + c) * t + p1;
    }

private:
    const Mollifier* moll_;
    double rho_max_, step_;
    std::vector<double> vals_;
};

}  // namespace torpot
