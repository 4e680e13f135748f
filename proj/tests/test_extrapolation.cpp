#include <doctest.h>

#include <cmath>

#include "test_support.hpp"
#include "wproj/errors.hpp"
#include "wproj/extrapolation.hpp"
#include "wproj/projection.hpp"
#include "wproj/quantile.hpp"

using namespace wproj;
using wtest::measures_close;

namespace {

SolverConfig tight() {
    SolverConfig cfg;
    cfg.fw_gap_tol = 1e-14;
    return cfg;
}

} // namespace

TEST_CASE("extrapolation fixes coinciding endpoints") {
    for (std::uint64_t s = 0; s < 10; ++s) {
        const int dim = 1 + static_cast<int>(s % 2);
        const DiscreteMeasure m = gen_random_measure(dim, 1 + s % 5, 1.0, 100 + s);
        CHECK(w2_distance(extrapolate(m, m, 2.0, tight()), m) <= 1e-9);
    }
}

TEST_CASE("Dirac translation geodesic extends linearly") {
    const DiscreteMeasure out = extrapolate(dirac({0.0}), dirac({1.0}), 2.0);
    REQUIRE(out.size() == 1);
    CHECK(out.atom(0)[0] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("pooled extrapolation collapses to the mean") {
    const DiscreteMeasure nu0 = measure_1d({-1.0, 1.0}, {0.5, 0.5});
    const DiscreteMeasure out = extrapolate(nu0, dirac({0.0}), 2.0);
    CHECK(measures_close(out, dirac({0.0}), 1e-12));
}

TEST_CASE("extrapolation functional values") {
    const DiscreteMeasure nu0 = measure_1d({-1.0, 1.0}, {0.5, 0.5});
    const DiscreteMeasure nu1 = dirac({0.0});
    const DiscreteMeasure m = gen_random_measure(1, 4, 1.0, 55);

    CHECK(extrapolation_functional(m, m, m, 2.0) == doctest::Approx(0.0).epsilon(1e-14));

    // rho = nu1 != nu0: the first term vanishes.
    const double f = extrapolation_functional(nu1, nu0, nu1, 2.0);
    const double w = w2_distance(nu1, nu0);
    CHECK(f == doctest::Approx(-w * w / 4.0).epsilon(1e-12));
    CHECK(f == doctest::Approx(-0.25).epsilon(1e-12));

    CHECK(g_functional(nu1, nu0, nu1, 2.0) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK_THROWS_AS(extrapolation_functional(m, m, m, 1.0), TimeNotGreaterThanOne);
}

TEST_CASE("g functional is t(t-1) times the extrapolation functional") {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const int dim = 1 + static_cast<int>(s % 2);
        const DiscreteMeasure rho = gen_random_measure(dim, 1 + s % 4, 1.0, 900 + s);
        const DiscreteMeasure n0 = gen_random_measure(dim, 1 + (s * 3) % 4, 1.0, 901 + s);
        const DiscreteMeasure n1 = gen_random_measure(dim, 1 + (s * 5) % 4, 1.0, 902 + s);
        for (double t : {1.25, 2.0, 5.0}) {
            const double lhs = g_functional(rho, n0, n1, t);
            const double rhs = t * (t - 1.0) * extrapolation_functional(rho, n0, n1, t);
            CHECK(std::abs(lhs - rhs) <= 1e-10 * (1.0 + std::abs(rhs)));
        }
    }
}

TEST_CASE("extrapolation minimizes its functional") {
    for (std::uint64_t s = 0; s < 8; ++s) {
        const int dim = 1 + static_cast<int>(s % 2);
        const DiscreteMeasure n0 = gen_random_measure(dim, 1 + s % 4, 1.0, 1300 + s);
        const DiscreteMeasure n1 = gen_random_measure(dim, 1 + (s * 3) % 4, 1.0, 1400 + s);
        const double t = 2.0;
        const DiscreteMeasure e = extrapolate(n0, n1, t, tight());
        const double fe = extrapolation_functional(e, n0, n1, t);

        RandomStream rng(4400 + s);
        for (std::size_t c = 0; c < 100; ++c) {
            // Atom perturbations of the output and fresh matching-mean draws.
            DiscreteMeasure cand = [&]() {
                if (c % 2 == 0) {
                    std::vector<double> coords = e.coords();
                    for (double& x : coords) x += rng.uniform(-0.3, 0.3);
                    return DiscreteMeasure(e.dim(), std::move(coords), e.weights());
                }
                DiscreteMeasure fresh = gen_random_measure(dim, 1 + c % 5, 1.5, 5600 + s * 37 + c);
                const Moments me = moments(e), mf = moments(fresh);
                std::vector<double> shift(static_cast<std::size_t>(dim));
                for (std::size_t k = 0; k < shift.size(); ++k) shift[k] = me.mean[k] - mf.mean[k];
                return translate(fresh, shift);
            }();
            CHECK(fe <= extrapolation_functional(cand, n0, n1, t) + 1e-7);
        }
    }
}

TEST_CASE("dissipativity on random instances") {
    for (std::uint64_t s = 0; s < 15; ++s) {
        const int dim = 1 + static_cast<int>(s % 2);
        const DiscreteMeasure n0 = gen_random_measure(dim, 1 + s % 5, 1.0, 2200 + s);
        const DiscreteMeasure n1 = gen_random_measure(dim, 1 + (s * 3) % 5, 1.0, 2300 + s);
        for (double t : {1.25, 2.0, 5.0}) {
            const DiscreteMeasure e = extrapolate(n0, n1, t, tight());
            const double base = w2_distance(n0, n1);
            CHECK(w2_distance(n0, e) <= t * base + 1e-8);
            CHECK(w2_distance(n1, e) <= (t - 1.0) * base + 1e-8);
        }
    }
}

TEST_CASE("geodesic consistency of the backward reduction") {
    // W2(nu1, E^t) = (t-1) W2(gamma(0), nu1) with gamma(0) the backward
    // projection of the dilated nu1 (constant-speed extension).
    for (std::uint64_t s = 0; s < 10; ++s) {
        const int dim = 1 + static_cast<int>(s % 2);
        const DiscreteMeasure n0 = gen_random_measure(dim, 2 + s % 4, 1.0, 3300 + s);
        const DiscreteMeasure n1 = gen_random_measure(dim, 2 + (s * 3) % 4, 1.0, 3400 + s);
        const double t = 2.0, theta = (t - 1.0) / t;
        const DiscreteMeasure e = extrapolate_via_backward(n0, n1, t, tight());
        const DiscreteMeasure gamma0 =
            backward_project(dilate(n1, 1.0 / theta), n0, tight()).projected;
        const double lhs = w2_distance(n1, e);
        const double rhs = (t - 1.0) * w2_distance(gamma0, n1);
        CHECK(std::abs(lhs - rhs) <= 1e-7 * (1.0 + rhs));
    }
}

TEST_CASE("1D strong convexity certificate") {
    // (1/2) int |Y^t - X_rho|^2 + G_t(E) <= G_t(rho) for the quantile
    // coupling, the 1D instantiation of the generalized-geodesic bound.
    for (std::uint64_t s = 0; s < 25; ++s) {
        const DiscreteMeasure n0 = gen_random_measure(1, 1 + s % 5, 1.0, 4300 + s);
        const DiscreteMeasure n1 = gen_random_measure(1, 1 + (s * 3) % 5, 1.0, 4400 + s);
        const DiscreteMeasure rho = gen_random_measure(1, 1 + (s * 7) % 5, 1.0, 4500 + s);
        for (double t : {1.25, 2.0, 5.0}) {
            const DiscreteMeasure e = extrapolate_1d(n0, n1, t);
            const double coupling_term =
                0.5 * l2_distance_sq(quantile_of(e), quantile_of(rho));
            const double lhs = coupling_term + g_functional(e, n0, n1, t);
            const double rhs = g_functional(rho, n0, n1, t);
            CHECK(lhs <= rhs + 1e-7);
        }
    }
}

TEST_CASE("PAV route and QP reduction agree in 1D") {
    for (std::uint64_t s = 0; s < 15; ++s) {
        const DiscreteMeasure n0 = gen_random_measure(1, 1 + s % 6, 1.0, 5500 + s);
        const DiscreteMeasure n1 = gen_random_measure(1, 1 + (s * 5) % 6, 1.0, 5600 + s);
        for (double t : {1.25, 2.0, 5.0}) {
            CHECK(w2_distance(extrapolate_1d(n0, n1, t),
                              extrapolate_via_backward(n0, n1, t, tight())) <= 1e-7);
        }
    }
}

TEST_CASE("extrapolation argument validation") {
    const DiscreteMeasure m = dirac({0.0});
    CHECK_THROWS_AS(extrapolate(m, m, 1.0), TimeNotGreaterThanOne);
    CHECK_THROWS_AS(extrapolate(m, dirac({0.0, 0.0}), 2.0), DimensionMismatch);
}
