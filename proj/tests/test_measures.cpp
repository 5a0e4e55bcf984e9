#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "torpot/measures.hpp"
#include "torpot/mollifier.hpp"

using namespace torpot;

namespace {

WeightedAtoms random_atoms(int d, int n, Rng& rng, bool equal_weights = false) {
    WeightedAtoms a;
    a.d = d;
    for (int i = 0; i < n; ++i) {
        std::vector<double> x(size_t(d), 0.0);
        for (auto& c : x) c = uniform01(rng) - 0.5;
        a.pos.emplace_back(std::move(x));
        a.w.push_back(equal_weights ? 1.0 : 0.05 + uniform01(rng));
    }
    a.normalize();
    return a;
}

}  // namespace

TEST_CASE("WeightedAtoms validation and normalization", "[measures]") {
    WeightedAtoms a;
    a.d = 1;
    CHECK_THROWS_AS(a.validate(), std::invalid_argument);  // empty

    a.pos = {TorusPoint({0.1}), TorusPoint({0.3})};
    a.w = {0.5};
    CHECK_THROWS_AS(a.validate(), std::invalid_argument);  // mismatched arrays

    a.w = {0.5, -0.5};
    CHECK_THROWS_AS(a.validate(), std::invalid_argument);  // nonpositive weight

    a.w = {0.5, 0.4};
    CHECK_THROWS_AS(a.validate(), std::invalid_argument);  // mass != 1

    a.w = {3.0, 1.0};
    a.normalize();
    CHECK(a.w[0] == Catch::Approx(0.75).margin(1e-15));
    CHECK(a.w[1] == Catch::Approx(0.25).margin(1e-15));
    CHECK_NOTHROW(a.validate());

    a.d = 2;
    CHECK_THROWS_AS(a.validate(), std::invalid_argument);  // dim mismatch

    WeightedAtoms z;
    z.d = 1;
    z.pos = {TorusPoint({0.0})};
    z.w = {0.0};
    CHECK_THROWS_AS(z.normalize(), std::invalid_argument);  // zero total mass
}

TEST_CASE("GridDensity validation and density values", "[measures]") {
    GridDensity rho = uniform_density(1, 8);
    CHECK_NOTHROW(rho.validate());
    CHECK(rho.total_mass() == Catch::Approx(1.0).margin(1e-15));
    CHECK(rho.density_at(3) == Catch::Approx(1.0).margin(1e-15));

    GridDensity bad{Grid(1, 8), std::vector<double>(7, 0.125)};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);  // size mismatch

    GridDensity neg = rho;
    neg.mass[0] = -neg.mass[0];
    neg.mass[1] += 2.0 * rho.mass[0];
    CHECK_THROWS_AS(neg.validate(), std::invalid_argument);  // negative cell

    GridDensity off = rho;
    off.mass[0] += 1e-6;
    CHECK_THROWS_AS(off.validate(), std::invalid_argument);  // mass != 1
}

TEST_CASE("grid_project: fixed examples and mass conservation", "[measures]") {
    WeightedAtoms a;
    a.d = 1;
    a.pos = {TorusPoint({0.1}), TorusPoint({0.6})};
    a.w = {0.5, 0.5};
    GridDensity rho = grid_project(a, 4);
    // cells: [-.5,-.25) [-.25,0) [0,.25) [.25,.5); 0.6 wraps to -0.4
    CHECK(rho.mass[2] == 0.5);
    CHECK(rho.mass[0] == 0.5);
    CHECK(rho.mass[1] == 0.0);
    CHECK(rho.mass[3] == 0.0);

    Rng rng(7);
    for (int d = 1; d <= 3; ++d) {
        WeightedAtoms b = random_atoms(d, 40, rng);
        GridDensity p = grid_project(b, 8);
        CHECK(p.total_mass() == Catch::Approx(1.0).margin(1e-14));
        CHECK_NOTHROW(p.validate());
    }
}

TEST_CASE("density_to_atoms round-trips through grid_project", "[measures]") {
    Rng rng(13);
    for (int d = 1; d <= 2; ++d) {
        WeightedAtoms a = random_atoms(d, 25, rng);
        GridDensity rho = grid_project(a, 10);
        WeightedAtoms cells = density_to_atoms(rho);
        // zero-mass cells dropped, positive cells kept with their mass
        for (double w : cells.w) CHECK(w > 0.0);
        GridDensity back = grid_project(cells, 10);
        REQUIRE(back.mass.size() == rho.mass.size());
        for (size_t i = 0; i < rho.mass.size(); ++i)
            CHECK(back.mass[i] == Catch::Approx(rho.mass[i]).margin(1e-15));
    }
}

TEST_CASE("bump_density: gap, excess mass, and edge cases", "[measures]") {
    const int N = 400;
    const double eps = 0.12;
    GridDensity rho = bump_density(1, eps, N);
    CHECK_NOTHROW(rho.validate());
    CHECK(std::abs(rho.total_mass() - 1.0) <= 1e-12);

    // density is two-valued with gap exactly eps (uniform renormalization
    // shift preserves the gap)
    double inside = rho.density_at(rho.grid.locate(TorusPoint({0.0})));
    double outside = rho.density_at(rho.grid.locate(TorusPoint({0.49})));
    CHECK(inside - outside == Catch::Approx(eps).margin(1e-12));

    // mass(B) - |B| = eps*|B|(1-|B|) with |B| = 2/3: excess 2*eps/9 up to O(1/N)
    KahanSum excess;
    TorusPoint origin({0.0});
    for (std::int64_t c = 0; c < rho.grid.cell_count(); ++c)
        if (lt_tol(torus_dist(rho.grid.center(c), origin), 1.0 / 3.0))
            excess.add(rho.mass[size_t(c)] - 1.0 / N);
    CHECK(excess.value() == Catch::Approx(2.0 * eps / 9.0).margin(2.0 / N));

    // eps = 0 gives the uniform density
    GridDensity flat = bump_density(2, 0.0, 16);
    for (double m : flat.mass) CHECK(m == Catch::Approx(1.0 / 256.0).margin(1e-15));

    // density would go negative: 1 - eps*|B| < 0
    CHECK_THROWS_AS(bump_density(1, 1.6, 64), std::invalid_argument);
    CHECK_THROWS_AS(bump_density(1, -0.1, 64), std::invalid_argument);
}

TEST_CASE("oscillatory_density: construction contract", "[measures]") {
    for (int M : {1, 2, 3}) {
        OscillatoryFamily fam = oscillatory_density(1, 1.0 / 8.0, M, 128);
        const GridDensity& rho = fam.rho;
        CHECK_NOTHROW(rho.validate());
        CHECK(std::abs(rho.total_mass() - 1.0) <= 1e-12);
        CHECK(fam.clipped <= 1e-12);
        // |rho - 1| <= 1 + tiny by the c0 = 1/||Psi_M||_inf scaling
        double dev = 0.0;
        for (std::int64_t c = 0; c < rho.grid.cell_count(); ++c)
            dev = std::max(dev, std::abs(rho.density_at(c) - 1.0));
        CHECK(dev <= 1.0 + 1e-9);
        // the extremal cell realizes a sizable fraction of c0*sup; sharper
        // targets (larger M) need finer grids to hit their narrow peaks
        CHECK(dev > 0.25);
    }

    OscillatoryFamily fam2 = oscillatory_density(2, 1.0 / 8.0, 1, 64);
    CHECK(std::abs(fam2.rho.total_mass() - 1.0) <= 1e-12);
    CHECK(fam2.clipped <= 1e-12);

    CHECK_THROWS_AS(oscillatory_density(1, 0.3, 1, 128), std::invalid_argument);  // eps >= 1/4
    CHECK_THROWS_AS(oscillatory_density(1, 0.125, 0, 128), std::invalid_argument);
    CHECK_THROWS_AS(oscillatory_density(1, 0.05, 1, 64), std::runtime_error);  // eps*N < 8
}

TEST_CASE("oscillatory_density: M=1 excess and deficit live inside the bump", "[measures]") {
    const double eps = 1.0 / 8.0;
    OscillatoryFamily fam = oscillatory_density(1, eps, 1, 256);
    const GridDensity& rho = fam.rho;
    std::int64_t argmax = 0, argmin = 0;
    double best = -1.0, worst = 2.0;
    for (std::int64_t c = 0; c < rho.grid.cell_count(); ++c) {
        double v = rho.density_at(c);
        if (v > best) {
            best = v;
            argmax = c;
        }
        if (v < worst) {
            worst = v;
            argmin = c;
        }
    }
    // the second difference of the bump swings both ways inside |x| < eps:
    // positive around the center, strongly negative on the steep shoulders
    CHECK(best > 1.1);
    CHECK(worst < 0.5);
    CHECK(std::abs(rho.grid.center(argmax)[0]) < eps);
    CHECK(std::abs(rho.grid.center(argmin)[0]) < eps);
    // the cell at the bump's center itself carries an excess
    CHECK(rho.density_at(rho.grid.locate(TorusPoint({0.0}))) > 1.05);
    // far from the bump the density is a flat background, equal across cells
    // and ~1 up to the mass renormalization of the sampled target
    double far1 = rho.density_at(rho.grid.locate(TorusPoint({0.45})));
    double far2 = rho.density_at(rho.grid.locate(TorusPoint({-0.3})));
    CHECK(far1 == Catch::Approx(far2).margin(1e-15));
    CHECK(far1 == Catch::Approx(1.0).margin(1e-3));
}

TEST_CASE("iterated_laplacian: moments and stencil cross-check", "[measures]") {
    Mollifier m1(1);
    for (int M : {1, 2, 3}) {
        IteratedLaplacian L = iterated_laplacian(m1, M, 1.0 / 64.0, 0.3 / 64.0);
        for (int order = 0; order <= 2 * M - 1; ++order) {
            double mom = L.moment({order});
            CHECK(std::abs(mom) <= 1e-9 * std::max(1.0, L.sup_norm));
        }
        // order-2M moment does not vanish
        CHECK(std::abs(L.moment({2 * M})) > 1e-3);
    }

    // M=1: moment of order 2 equals -2 * (lattice mass of psi) ~ -2
    IteratedLaplacian L1 = iterated_laplacian(m1, 1, 1.0 / 128.0, 0.0);
    CHECK(L1.moment({2}) == Catch::Approx(-2.0).epsilon(1e-3));

    // values really are the centered second-difference of psi
    const double h = L1.h;
    for (int j : {40, 80, 120, 160}) {
        double y = L1.origin + j * h;
        double fd = -(m1.psi({y + h}) - 2.0 * m1.psi({y}) + m1.psi({y - h})) / (h * h);
        CHECK(L1.values[size_t(j)] == Catch::Approx(fd).margin(1e-9));
    }

    Mollifier m2(2);
    IteratedLaplacian L2 = iterated_laplacian(m2, 2, 1.0 / 24.0, 0.0);
    for (int a = 0; a <= 3; ++a)
        for (int b = 0; a + b <= 3; ++b)
            CHECK(std::abs(L2.moment({a, b})) <= 1e-9 * std::max(1.0, L2.sup_norm));
}

TEST_CASE("Mollifier: pointwise values, gradient, normalization", "[measures]") {
    CHECK_THROWS_AS(Mollifier(0), std::invalid_argument);
    CHECK_THROWS_AS(Mollifier(4), std::invalid_argument);

    for (int d = 1; d <= 3; ++d) {
        Mollifier m(d);
        CHECK(m.normalization() > 0.0);
        CHECK(m.peak() == Catch::Approx(m.psi(std::vector<double>(size_t(d), 0.0))).margin(1e-15));
        CHECK(m.psi(std::vector<double>(size_t(d), 1.0)) == 0.0);  // outside support
        CHECK(m.psi_hat(0.0) == 1.0);
        CHECK(m.psi_hat(-3.2) == m.psi_hat(3.2));
    }

    // unit integral: Riemann sum over [-1,1]^d
    Mollifier m1(1);
    {
        const int n = 4000;
        KahanSum s;
        for (int i = 0; i < n; ++i) {
            double y = -1.0 + (i + 0.5) * 2.0 / n;
            s.add(m1.psi({y}));
        }
        CHECK(s.value() * 2.0 / n == Catch::Approx(1.0).margin(1e-7));
    }
    Mollifier m2(2);
    {
        const int n = 400;
        KahanSum s;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double y0 = -1.0 + (i + 0.5) * 2.0 / n;
                double y1 = -1.0 + (j + 0.5) * 2.0 / n;
                s.add(m2.psi({y0, y1}));
            }
        CHECK(s.value() * 4.0 / (double(n) * n) == Catch::Approx(1.0).margin(1e-4));
    }

    // gradient vs central differences
    Rng rng(19);
    for (int d = 1; d <= 2; ++d) {
        Mollifier m(d);
        for (int t = 0; t < 30; ++t) {
            std::vector<double> y(size_t(d), 0.0);
            for (auto& c : y) c = (uniform01(rng) - 0.5) * 1.6;  // stay off |y|=1
            double r2 = 0;
            for (double c : y) r2 += c * c;
            if (r2 > 0.9 * 0.9) continue;
            auto g = m.grad_psi(y);
            for (int i = 0; i < d; ++i) {
                const double h = 1e-6;
                auto yp = y, ym = y;
                yp[size_t(i)] += h;
                ym[size_t(i)] -= h;
                double fd = (m.psi(yp) - m.psi(ym)) / (2 * h);
                CHECK(g[size_t(i)] == Catch::Approx(fd).margin(1e-6));
            }
        }
    }
}

TEST_CASE("Mollifier: psi_hat is the transform of psi", "[measures]") {
    Mollifier m(1);
    const int n = 4000;
    for (double rho : {0.4, 1.3, 3.7}) {
        KahanSum s;
        for (int i = 0; i < n; ++i) {
            double y = -1.0 + (i + 0.5) * 2.0 / n;
            s.add(m.psi({y}) * std::cos(2.0 * M_PI * rho * y));
        }
        CHECK(m.psi_hat(rho) == Catch::Approx(s.value() * 2.0 / n).margin(1e-6));
    }
}

TEST_CASE("PsihatTable interpolates psi_hat accurately", "[measures]") {
    for (int d = 1; d <= 3; ++d) {
        Mollifier m(d);
        PsihatTable tab(m, 16.0, 1.0 / 128.0);
        Rng rng(29 + d);
        for (int t = 0; t < 50; ++t) {
            double rho = uniform01(rng) * 15.0;
            CHECK(tab(rho) == Catch::Approx(m.psi_hat(rho)).margin(2e-7));
        }
        // beyond the tabulated range falls back to direct quadrature
        CHECK(tab(40.0) == m.psi_hat(40.0));
        // even in rho
        CHECK(tab(-2.5) == tab(2.5));
    }
}
