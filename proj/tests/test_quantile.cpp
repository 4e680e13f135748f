#include <doctest.h>

#include <cmath>
#include <vector>

#include "test_support.hpp"
#include "wproj/errors.hpp"
#include "wproj/quantile.hpp"
#include "wproj/transport.hpp"

using namespace wproj;

TEST_CASE("quantile of a Dirac is constant") {
    const QuantileFunction q = quantile_of(dirac({3.0}));
    REQUIRE(q.pieces() == 1);
    CHECK(q.values[0] == 3.0);
    CHECK(q.breaks.front() == 0.0);
    CHECK(q.breaks.back() == 1.0);
}

TEST_CASE("quantile sorts atoms") {
    const QuantileFunction q = quantile_of(measure_1d({2.0, 0.0}, {0.5, 0.5}));
    REQUIRE(q.pieces() == 2);
    CHECK(q.values[0] == 0.0);
    CHECK(q.values[1] == 2.0);
    CHECK(q.breaks[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("quantile follows the inf definition") {
    // F(-1) = 3/4 > a for a < 3/4, so X(a) = -1 there and 1 beyond.
    const QuantileFunction q = quantile_of(measure_1d({1.0, -1.0}, {0.25, 0.75}));
    REQUIRE(q.pieces() == 2);
    CHECK(q.values[0] == -1.0);
    CHECK(q.values[1] == 1.0);
    CHECK(q.breaks[1] == doctest::Approx(0.75).epsilon(1e-15));
    // Right continuity at the breakpoint.
    CHECK(q.value_at(0.75) == 1.0);
    CHECK(q.value_at(0.74999) == -1.0);
}

TEST_CASE("common refinement") {
    const QuantileFunction f = make_quantile({0.0, 0.5, 1.0}, {0.0, 2.0});
    const QuantileFunction g = make_quantile({0.0, 1.0 / 3.0, 1.0}, {-1.0, 1.0});
    auto [rf, rg] = common_refinement(f, g);
    REQUIRE(rf.breaks.size() == 4);
    CHECK(rf.breaks[1] == doctest::Approx(1.0 / 3.0));
    CHECK(rf.breaks[2] == 0.5);
    // Pointwise equality with the original.
    for (double a : {0.1, 0.4, 0.51, 0.99}) CHECK(rf.value_at(a) == f.value_at(a));
    for (double a : {0.1, 0.4, 0.51, 0.99}) CHECK(rg.value_at(a) == g.value_at(a));

    auto [ff, ff2] = common_refinement(f, f);
    CHECK(ff.breaks == f.breaks);
    CHECK(ff.values == f.values);
    CHECK(ff2.values == f.values);
}

TEST_CASE("refinement preserves integrals on random step functions") {
    for (std::uint64_t s = 0; s < 40; ++s) {
        const DiscreteMeasure a = gen_random_measure(1, 1 + s % 6, 2.0, 7000 + s);
        const DiscreteMeasure b = gen_random_measure(1, 1 + (s * 7) % 6, 2.0, 8000 + s);
        const QuantileFunction f = quantile_of(a);
        auto [rf, rg] = common_refinement(f, quantile_of(b));
        CHECK(integral(rf) == doctest::Approx(integral(f)).epsilon(1e-13));
    }
}

TEST_CASE("w2_1d basics") {
    CHECK(w2_1d(dirac({0.0}), dirac({3.0})) == doctest::Approx(3.0).epsilon(1e-15));
    const DiscreteMeasure m = gen_random_measure(1, 5, 1.0, 99);
    CHECK(w2_1d(m, m) == 0.0);
    // Shift by one: the monotone coupling moves every quantile by 1.
    const DiscreteMeasure a = measure_1d({0.0, 2.0}, {0.5, 0.5});
    const DiscreteMeasure b = measure_1d({1.0, 3.0}, {0.5, 0.5});
    CHECK(w2_1d(a, b) == doctest::Approx(1.0).epsilon(1e-14));
    // LP oracle agrees.
    CHECK(w2_lp(a, b).distance == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(w2_1d(make_measure({{0.0, 0.0}}, {1.0}), dirac({0.0})), WrongDimension);
}

TEST_CASE("w2_1d metric axioms on random triples") {
    for (std::uint64_t s = 0; s < 60; ++s) {
        const DiscreteMeasure a = gen_random_measure(1, 1 + s % 7, 2.0, 300 + s);
        const DiscreteMeasure b = gen_random_measure(1, 1 + (s * 3) % 7, 2.0, 400 + s);
        const DiscreteMeasure c = gen_random_measure(1, 1 + (s * 5) % 7, 2.0, 500 + s);
        CHECK(w2_1d(a, b) == w2_1d(b, a)); // symmetry is exact
        CHECK(w2_1d(a, c) <= w2_1d(a, b) + w2_1d(b, c) + 1e-10);
    }
}

namespace {

// Exhaustive QP oracle: minimize sum w_i (v_i - g_i)^2 over nondecreasing
// sequences with values on a fine grid.
std::vector<double> isotonic_grid_oracle(const std::vector<double>& v,
                                         const std::vector<double>& w, std::size_t grid_pts) {
    double lo = v[0], hi = v[0];
    for (double x : v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    std::vector<double> grid(grid_pts);
    for (std::size_t g = 0; g < grid_pts; ++g)
        grid[g] = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(grid_pts - 1);

    // DP over (position, last grid index).
    const std::size_t n = v.size();
    std::vector<std::vector<double>> cost(n, std::vector<double>(grid_pts));
    std::vector<std::vector<std::size_t>> arg(n, std::vector<std::size_t>(grid_pts));
    for (std::size_t g = 0; g < grid_pts; ++g) {
        const double d = v[0] - grid[g];
        cost[0][g] = w[0] * d * d;
    }
    for (std::size_t i = 1; i < n; ++i) {
        double best = cost[i - 1][0];
        std::size_t best_g = 0;
        for (std::size_t g = 0; g < grid_pts; ++g) {
            if (cost[i - 1][g] < best) {
                best = cost[i - 1][g];
                best_g = g;
            }
            const double d = v[i] - grid[g];
            cost[i][g] = best + w[i] * d * d;
            arg[i][g] = best_g;
        }
    }
    std::size_t g = 0;
    for (std::size_t cand = 0; cand < grid_pts; ++cand) {
        if (cost[n - 1][cand] < cost[n - 1][g]) g = cand;
    }
    std::vector<double> out(n);
    for (std::size_t i = n; i-- > 0;) {
        out[i] = grid[g];
        if (i > 0) g = arg[i][g];
    }
    return out;
}

} // namespace

TEST_CASE("pav matches examples") {
    const std::vector<double> uniform{1.0, 1.0, 1.0};
    CHECK(pav_isotonic(std::vector<double>{1.0, 2.0, 3.0}, uniform) ==
          std::vector<double>{1.0, 2.0, 3.0});

    // Oracle: exhaustive DP over monotone sequences on a fine grid.
    const std::vector<double> v{3.0, 1.0, 2.0};
    const auto pav = pav_isotonic(v, uniform);
    const auto grid = isotonic_grid_oracle(v, uniform, 2001);
    for (std::size_t i = 0; i < 3; ++i) CHECK(pav[i] == doctest::Approx(grid[i]).epsilon(2e-3));
    CHECK(pav == std::vector<double>{2.0, 2.0, 2.0});

    // Weighted pooled block: minimize .25(2-c)^2 + .75(1-c)^2 -> c = 1.25.
    const auto pooled = pav_isotonic(std::vector<double>{2.0, 1.0}, std::vector<double>{0.25, 0.75});
    CHECK(pooled[0] == doctest::Approx(1.25).epsilon(1e-15));
    CHECK(pooled[1] == doctest::Approx(1.25).epsilon(1e-15));

    CHECK_THROWS_AS(pav_isotonic(std::vector<double>{1.0}, std::vector<double>{1.0, 1.0}),
                    LengthMismatch);
}

TEST_CASE("pav satisfies KKT, mean preservation, homogeneity") {
    for (std::uint64_t s = 0; s < 100; ++s) {
        RandomStream rng(9000 + s);
        const std::size_t n = 1 + rng.uniform_index(0, 19);
        std::vector<double> v(n), w(n), h(n);
        for (double& x : v) x = rng.uniform(-1.0, 1.0);
        for (double& x : w) x = 0.05 + rng.next_double();
        double acc = rng.uniform(-1.0, 1.0);
        for (double& x : h) {
            x = acc;
            acc += rng.next_double();
        }
        const auto g = pav_isotonic(v, w);

        double kkt_g = 0.0, kkt_h = 0.0, mean_v = 0.0, mean_g = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            kkt_g += w[i] * (v[i] - g[i]) * g[i];
            kkt_h += w[i] * (v[i] - g[i]) * h[i];
            mean_v += w[i] * v[i];
            mean_g += w[i] * g[i];
        }
        CHECK(std::abs(kkt_g) <= 1e-10);
        CHECK(kkt_h <= 1e-10);
        CHECK(std::abs(mean_v - mean_g) <= 1e-12);

        const double c = 0.5 + 2.0 * rng.next_double();
        std::vector<double> cv(n);
        for (std::size_t i = 0; i < n; ++i) cv[i] = c * v[i];
        const auto gc = pav_isotonic(cv, w);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(gc[i] - c * g[i]) <= 1e-12);
    }
}

TEST_CASE("measure_from_quantile") {
    const DiscreteMeasure d5 = measure_from_quantile(make_quantile({0.0, 1.0}, {5.0}));
    REQUIRE(d5.size() == 1);
    CHECK(d5.atom(0)[0] == 5.0);

    // Round trip gives the canonical form.
    const DiscreteMeasure m = measure_1d({2.0, -1.0, 2.0}, {0.25, 0.5, 0.25});
    const DiscreteMeasure rt = measure_from_quantile(quantile_of(m));
    CHECK(wtest::measures_close(rt, m, 1e-14));
    REQUIRE(rt.size() == 2); // duplicates merged by the quantile

    // Adjacent equal values merge.
    const DiscreteMeasure merged =
        measure_from_quantile(make_quantile({0.0, 0.25, 0.5, 1.0}, {0.0, 0.0, 1.0}));
    REQUIRE(merged.size() == 2);
    CHECK(merged.weight(0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(merged.atom(1)[0] == 1.0);

    CHECK_THROWS_AS(measure_from_quantile(make_quantile({0.0, 0.5, 1.0}, {1.0, 0.0})), NotMonotone);
}

TEST_CASE("make_quantile validates") {
    CHECK_THROWS_AS(make_quantile({0.0, 1.0}, {1.0, 2.0}), LengthMismatch);
    CHECK_THROWS_AS(make_quantile({0.0, 0.5}, {1.0}), InvalidArgument);
    CHECK_THROWS_AS(make_quantile({0.0, 0.5, 0.5, 1.0}, {1.0, 2.0, 3.0}), InvalidArgument);
}
