#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "torpot/common.hpp"
#include "torpot/torus.hpp"

namespace torpot {

// Parameters of the periodized Riesz kernel with Fourier coefficients
// |k|^{-(d-s)} (k != 0), zero mean.
struct RieszSpec {
    int d = 1;
    double s = 0.0;
    int J = 0;           // real-space lattice truncation |j|_inf <= J; 0 = auto
    int K = 8;           // spectral cutoff for grid synthesis
    double tau = 1e-10;  // quadrature / truncation tolerance

    void validate() const {
        if (d < 1 || d > 3) throw std::invalid_argument("RieszSpec: d must be 1..3");
        if (!(s < d)) throw std::invalid_argument("RieszSpec: need s < d");
        if (!(tau <= 1e-8) || !(tau > 0)) throw std::invalid_argument("RieszSpec: need 0 < tau <= 1e-8");
        if (K < 8) throw std::invalid_argument("RieszSpec: need K >= 8");
        if (J != 0 && J < 2) throw std::invalid_argument("RieszSpec: need J >= 2 (or 0 = auto)");
    }
    // smallest J with exp(-(J-1/2)^2) < tau
    int lattice_truncation() const {
        if (J != 0) return J;
        int j = 2;
        while (std::exp(-(j - 0.5) * (j - 0.5)) >= tau) ++j;
        return j;
    }
};

// Split constants: c * W_s(x) + C0 = (real-space sum) + (Fourier sum).
struct EwaldConstants {
    double c = 0.0;
    double C0 = 0.0;

    static EwaldConstants make(int d, double s) {
        if (!(s < d)) throw std::invalid_argument("EwaldConstants: need s < d");
        EwaldConstants e;
        e.c = std::pow(M_PI, s - 0.5 * d) * boost::math::tgamma(0.5 * (d - s));
        e.C0 = 2.0 * std::pow(M_PI, 0.5 * d) / (d - s);
        if (!(e.c > 0) || !std::isfinite(e.C0))
            throw std::runtime_error("EwaldConstants: invalid constants");
        return e;
    }
};

// Pointwise evaluator for W_s, grad W_s on the torus via the two-sided
// exponential split: both sums converge like Gaussians, so small
// truncations reach quadrature accuracy for every s < d.
class RieszKernel {
public:
    explicit RieszKernel(RieszSpec spec) : spec_(spec), ew_(EwaldConstants::make(spec.d, spec.s)) {
        spec_.validate();
        jmax_ = spec_.lattice_truncation();
        // Fourier-side truncation: coefficients decay like exp(-pi^2 |k|^2)
        kmax_ = 2;
        while (std::exp(-M_PI * M_PI * kmax_ * kmax_) >= spec_.tau) ++kmax_;
    }

    const RieszSpec& spec() const { return spec_; }
    const EwaldConstants& constants() const { return ew_; }

    // Coefficient of the |x|^{-s} singularity (s>0), or of the leading
    // |x|^{-s} = |x|^{|s|} cusp term (s<0): Gamma(s/2)/c.
    double singular_coefficient() const {
        return boost::math::tgamma(0.5 * spec_.s) / ew_.c;
    }

    double operator()(const TorusPoint& x) const { return value(x); }

    double value(const TorusPoint& x) const {
        check_point(x, spec_.s >= 0.0);
        return (real_sum(x) + fourier_sum(x) - ew_.C0) / ew_.c;
    }

    std::vector<double> gradient(const TorusPoint& x) const {
        check_point(x, true);  // gradient is singular at 0 for every s here
        const int d = spec_.d;
        std::vector<double> g(size_t(d), 0.0);
        // real-space part: d/dx int_1^inf e^{-|x-j|^2 t} t^{s/2-1} dt
        //                = -2 (x-j) * int_1^inf e^{-|x-j|^2 t} t^{s/2} dt
        iterate_lattice([&](const std::vector<double>& delta, double a) {
            double u = upper_integral(a, 0.5 * spec_.s + 1.0);
            for (int i = 0; i < d; ++i) g[size_t(i)] += -2.0 * delta[size_t(i)] * u;
        }, x);
        // Fourier part: d/dx cos(2 pi k.x) = -2 pi k sin(2 pi k.x)
        iterate_modes([&](const std::vector<int>& k, double coeff) {
            double ph = 0.0;
            for (int i = 0; i < d; ++i) ph += k[size_t(i)] * x.x[size_t(i)];
            double sn = std::sin(2.0 * M_PI * ph);
            for (int i = 0; i < d; ++i)
                g[size_t(i)] += -2.0 * M_PI * k[size_t(i)] * sn * coeff;
        });
        for (double& gi : g) gi /= ew_.c;
        return g;
    }

    // int_1^inf e^{-a t} t^{nu-1} dt, cut where the integrand drops below
    // tau * e^{-a}; closed form at a = 0 (requires nu < 0).
    double upper_integral(double a, double nu) const {
        if (a <= 0.0) {
            if (nu < 0.0) return -1.0 / nu;
            throw std::domain_error("RieszKernel: singular point");
        }
        double T = upper_cut(a, nu);
        auto f = [a, nu](double t) { return std::exp(-a * t) * std::pow(t, nu - 1.0); };
        return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, 1.0, T, 12,
                                                                             spec_.tau);
    }

private:
    RieszSpec spec_;
    EwaldConstants ew_;
    int jmax_ = 2, kmax_ = 2;
    mutable std::map<std::int64_t, double> mode_cache_;  // |k|^2 -> Fourier-side integral

    void check_point(const TorusPoint& x, bool forbid_origin) const {
        if (x.dim() != spec_.d) throw std::invalid_argument("RieszKernel: dimension mismatch");
        if (!forbid_origin) return;
        double r2 = 0;
        for (double c : x.x) {
            double w = wrap_coord(c);
            r2 += w * w;
        }
        if (r2 < 1e-28) throw std::domain_error("RieszKernel: singular point");
    }

    template <class F>
    void iterate_lattice(F&& f, const TorusPoint& x) const {
        const int d = spec_.d;
        std::vector<int> j(size_t(d), -jmax_);
        std::vector<double> delta(size_t(d), 0.0);
        while (true) {
            double a = 0.0;
            for (int i = 0; i < d; ++i) {
                delta[size_t(i)] = x.x[size_t(i)] - j[size_t(i)];
                a += delta[size_t(i)] * delta[size_t(i)];
            }
            f(delta, a);
            int i = d - 1;
            while (i >= 0 && j[size_t(i)] == jmax_) j[size_t(i--)] = -jmax_;
            if (i < 0) break;
            ++j[size_t(i)];
        }
    }

    template <class F>
    void iterate_modes(F&& f) const {
        const int d = spec_.d;
        std::vector<int> k(size_t(d), -kmax_);
        while (true) {
            std::int64_t k2 = 0;
            for (int i = 0; i < d; ++i) k2 += std::int64_t(k[size_t(i)]) * k[size_t(i)];
            if (k2 != 0) f(k, mode_integral(k2));
            int i = d - 1;
            while (i >= 0 && k[size_t(i)] == kmax_) k[size_t(i--)] = -kmax_;
            if (i < 0) break;
            ++k[size_t(i)];
        }
    }

    double real_sum(const TorusPoint& x) const {
        KahanSum s;
        iterate_lattice([&](const std::vector<double>&, double a) {
            s.add(upper_integral(a, 0.5 * spec_.s));
        }, x);
        return s.value();
    }

    double fourier_sum(const TorusPoint& x) const {
        const int d = spec_.d;
        KahanSum s;
        iterate_modes([&](const std::vector<int>& k, double coeff) {
            double ph = 0.0;
            for (int i = 0; i < d; ++i) ph += k[size_t(i)] * x.x[size_t(i)];
            s.add(std::cos(2.0 * M_PI * ph) * coeff);
        });
        return s.value();
    }

    // pi^{d/2} int_0^1 e^{-pi^2 |k|^2 / t} t^{s/2-1-d/2} dt, cached per |k|^2
    double mode_integral(std::int64_t k2) const {
        auto it = mode_cache_.find(k2);
        if (it != mode_cache_.end()) return it->second;
        const double b = M_PI * M_PI * double(k2);
        const double e = 0.5 * spec_.s - 1.0 - 0.5 * spec_.d;
        auto f = [b, e](double t) { return t > 0 ? std::exp(-b / t) * std::pow(t, e) : 0.0; };
        double v = std::pow(M_PI, 0.5 * spec_.d) *
                   boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, 0.0, 1.0, 12,
                                                                                 spec_.tau);
        mode_cache_.emplace(k2, v);
        return v;
    }

    double upper_cut(double a, double nu) const {
        // smallest T >= 2 with e^{-aT} T^{nu-1} < tau * e^{-a}
        double T = 2.0;
        while (std::exp(-a * T) * std::pow(T, nu - 1.0) >= spec_.tau * std::exp(-a) && T < 1e9)
            T *= 2.0;
        return T;
    }
};

// -log|2 sin(pi x)|: the d=1 logarithmic potential. Fourier series
// sum_{k>=1} cos(2 pi k x)/k, i.e. half of the d=1, s=0 Riesz kernel.
inline double eval_Wlog(double x) {
    double w = wrap_coord(x);
    if (w == 0.0) throw std::domain_error("eval_Wlog: singular point");
    return -std::log(std::abs(2.0 * std::sin(M_PI * w)));
}

}  // namespace torpot
