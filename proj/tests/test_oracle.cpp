#include <doctest.h>

#include <cmath>

#include "test_support.hpp"
#include "wproj/convex_order.hpp"
#include "wproj/errors.hpp"
#include "wproj/extrapolation.hpp"
#include "wproj/oracle.hpp"
#include "wproj/projection.hpp"

using namespace wproj;
using wtest::dominated_pair;
using wtest::measures_close;

namespace {

// Weak objective of mu against a candidate built from mu's atom order.
double weak_objective(const DiscreteMeasure& mu, const DiscreteMeasure& out) {
    double total = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        double sq = 0.0;
        for (int k = 0; k < mu.dim(); ++k) {
            const double d = mu.atom(i)[static_cast<std::size_t>(k)] -
                             out.atom(i)[static_cast<std::size_t>(k)];
            sq += d * d;
        }
        total += mu.weight(i) * sq;
    }
    return total;
}

} // namespace

TEST_CASE("backward oracle: clamped closed-form example") {
    const DiscreteMeasure out = brute_force_backward(dirac({5.0}), measure_1d({-1.0, 1.0}, {0.5, 0.5}));
    CHECK(measures_close(out, dirac({0.0}), 1e-10));
}

TEST_CASE("backward oracle: feasible input is a fixed point") {
    auto [mu, nu] = dominated_pair(1, 2, 1.0, 42);
    REQUIRE(mu.size() * nu.size() <= 9);
    CHECK(w2_distance(brute_force_backward(mu, nu), mu) <= 1e-7);
}

TEST_CASE("backward oracle output is dominated") {
    for (std::uint64_t s = 0; s < 10; ++s) {
        const int dim = 1 + static_cast<int>(s % 2);
        const DiscreteMeasure mu = gen_random_measure(dim, 3, 1.0, 111 + s);
        const DiscreteMeasure nu = gen_random_measure(dim, 3, 1.0, 222 + s);
        CHECK(check_convex_order(brute_force_backward(mu, nu), nu, 1e-6).dominated());
    }
}

TEST_CASE("backward oracle agrees with the Frank-Wolfe solver") {
    SolverConfig tightcfg;
    tightcfg.fw_gap_tol = 1e-14;
    for (std::uint64_t s = 0; s < 12; ++s) {
        const int dim = 1 + static_cast<int>(s % 2);
        const std::size_t size = 2 + s % 2;
        const DiscreteMeasure mu = gen_random_measure(dim, size, 1.0, 5000 + s);
        const DiscreteMeasure nu = gen_random_measure(dim, size, 1.0, 6000 + s);
        const DiscreteMeasure bf = brute_force_backward(mu, nu);
        const DiscreteMeasure fw = backward_project(mu, nu, tightcfg).projected;
        CHECK(w2_distance(bf, fw) <= 1e-6);
    }
}

TEST_CASE("backward oracle size guard") {
    const DiscreteMeasure big = gen_random_measure(1, 4, 1.0, 1);
    CHECK_THROWS_AS(brute_force_backward(big, big), TooLarge);
}

TEST_CASE("grid refinement converges (Cauchy)") {
    for (std::uint64_t s = 0; s < 6; ++s) {
        const int dim = 1 + static_cast<int>(s % 2);
        const DiscreteMeasure mu = gen_random_measure(dim, 3, 1.0, 7100 + s);
        const DiscreteMeasure nu = gen_random_measure(dim, 3, 1.0, 7200 + s);
        // Raw nested grids: the grid optimum only improves.
        const double j1 = weak_objective(mu, brute_force_backward_grid(mu, nu, 1, false));
        const double j2 = weak_objective(mu, brute_force_backward_grid(mu, nu, 2, false));
        const double j4 = weak_objective(mu, brute_force_backward_grid(mu, nu, 4, false));
        CHECK(j2 <= j1 + 1e-15);
        CHECK(j4 <= j2 + 1e-15);
        // Full oracle: doubling the grid changes the refined optimum by no
        // more than the previous change (both are refinement noise).
        const double r1 = weak_objective(mu, brute_force_backward_grid(mu, nu, 1, true));
        const double r2 = weak_objective(mu, brute_force_backward_grid(mu, nu, 2, true));
        const double r4 = weak_objective(mu, brute_force_backward_grid(mu, nu, 4, true));
        CHECK(std::abs(r4 - r2) <= std::abs(r1 - r2) + 1e-10);
    }
}

TEST_CASE("extrapolation oracle: fixed point and pooled example") {
    const DiscreteMeasure m = gen_random_measure(1, 3, 1.0, 99);
    CHECK(w2_distance(brute_force_extrapolation(m, m, 2.0), m) <= 1e-6);

    const DiscreteMeasure nu0 = measure_1d({-1.0, 1.0}, {0.5, 0.5});
    const DiscreteMeasure out = brute_force_extrapolation(nu0, dirac({0.0}), 2.0);
    CHECK(measures_close(out, dirac({0.0}), 1e-6));
    // The oracle's optimum value matches the functional at the PAV solution.
    const double f_oracle = extrapolation_functional(out, nu0, dirac({0.0}), 2.0);
    const double f_exact = extrapolation_functional(extrapolate_1d(nu0, dirac({0.0}), 2.0),
                                                    nu0, dirac({0.0}), 2.0);
    CHECK(f_oracle <= f_exact + 1e-9);
}

TEST_CASE("extrapolation oracle agrees with the solver") {
    for (std::uint64_t s = 0; s < 8; ++s) {
        const int dim = 1 + static_cast<int>(s % 2);
        const DiscreteMeasure n0 = gen_random_measure(dim, 1 + s % 3, 1.0, 8100 + s);
        const DiscreteMeasure n1 = gen_random_measure(dim, 1 + (s * 3) % 3, 1.0, 8200 + s);
        for (double t : {1.25, 2.0}) {
            SolverConfig cfg;
            cfg.fw_gap_tol = 1e-14;
            CHECK(w2_distance(brute_force_extrapolation(n0, n1, t), extrapolate(n0, n1, t, cfg)) <=
                  1e-5);
        }
    }
}

TEST_CASE("extrapolation oracle guards") {
    const DiscreteMeasure four = gen_random_measure(1, 4, 1.0, 3);
    CHECK_THROWS_AS(brute_force_extrapolation(four, four, 2.0), TooLarge);
    const DiscreteMeasure d3 = gen_random_measure(3, 2, 1.0, 4);
    CHECK_THROWS_AS(brute_force_extrapolation(d3, d3, 2.0), TooLarge);
    const DiscreteMeasure ok = gen_random_measure(1, 2, 1.0, 5);
    CHECK_THROWS_AS(brute_force_extrapolation(ok, ok, 1.0), TimeNotGreaterThanOne);
}
