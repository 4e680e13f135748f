#include <doctest.h>

#include <cmath>

#include "test_support.hpp"
#include "wproj/convex_order.hpp"
#include "wproj/errors.hpp"
#include "wproj/numeric.hpp"

using namespace wproj;
using wtest::dominated_pair;

namespace {

// Certificate soundness: marginals and conditional means within tol.
void check_certificate(const Coupling& c, double tol) {
    const std::size_t n = c.source.size(), m = c.target.size();
    const std::size_t d = static_cast<std::size_t>(c.source.dim());
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            CHECK(c.entry(i, j) >= -tol);
            row += c.entry(i, j);
        }
        CHECK(std::abs(row - c.source.weight(i)) <= tol);
        for (std::size_t k = 0; k < d; ++k) {
            double mean_k = 0.0;
            for (std::size_t j = 0; j < m; ++j) mean_k += c.entry(i, j) * c.target.atom(j)[k];
            CHECK(std::abs(mean_k - c.source.weight(i) * c.source.atom(i)[k]) <= tol);
        }
    }
    for (std::size_t j = 0; j < m; ++j) {
        double col = 0.0;
        for (std::size_t i = 0; i < n; ++i) col += c.entry(i, j);
        CHECK(std::abs(col - c.target.weight(j)) <= tol);
    }
}

} // namespace

TEST_CASE("Jensen: a Dirac at the mean is dominated") {
    const DiscreteMeasure nu = measure_1d({-1.0, 1.0}, {0.5, 0.5});
    CHECK(check_convex_order(dirac({0.0}), nu).dominated());
    CHECK(check_convex_order_lp(dirac({0.0}), nu).dominated());
}

TEST_CASE("spread is not dominated by its mean") {
    const DiscreteMeasure mu = measure_1d({-1.0, 1.0}, {0.5, 0.5});
    const OrderCheck check = check_convex_order(mu, dirac({0.0}));
    CHECK_FALSE(check.dominated());
    REQUIRE(check.witness.has_value());
    // The witness really integrates higher against mu.
    CHECK(integrate(*check.witness, mu) > integrate(*check.witness, dirac({0.0})));
}

TEST_CASE("symmetric two-point spread with explicit certificate") {
    const DiscreteMeasure mu = measure_1d({-1.0, 1.0}, {0.5, 0.5});
    const DiscreteMeasure nu = measure_1d({-2.0, 2.0}, {0.5, 0.5});
    const OrderCheck check = check_convex_order_lp(mu, nu);
    REQUIRE(check.dominated());
    REQUIRE(check.certificate.has_value());
    check_certificate(*check.certificate, 1e-9);
    // Unique martingale kernel: -1 -> {-2 w.p. 3/4, 2 w.p. 1/4}.
    CHECK(check.certificate->entry(0, 0) == doctest::Approx(0.375).epsilon(1e-9));
    CHECK(check.certificate->entry(0, 1) == doctest::Approx(0.125).epsilon(1e-9));
}

TEST_CASE("reflexivity on random measures") {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const int dim = 1 + static_cast<int>(s % 3);
        const DiscreteMeasure m = gen_random_measure(dim, 1 + s % 6, 2.0, 2100 + s);
        CHECK(check_convex_order(m, m).dominated());
    }
}

TEST_CASE("dominated pairs are recognized in both paths, with sound certificates") {
    for (std::uint64_t s = 0; s < 30; ++s) {
        const int dim = 1 + static_cast<int>(s % 2);
        auto [mu, nu] = dominated_pair(dim, 1 + s % 5, 1.5, 3000 + s);
        const OrderCheck lp = check_convex_order_lp(mu, nu);
        CHECK(lp.dominated());
        if (lp.certificate) check_certificate(*lp.certificate, 1e-8);
        const OrderCheck main = check_convex_order(mu, nu);
        CHECK(main.dominated());

        // Dominated implies equal means and no smaller second moment.
        const Moments mm = moments(mu), mn = moments(nu);
        for (std::size_t k = 0; k < mm.mean.size(); ++k)
            CHECK(std::abs(mm.mean[k] - mn.mean[k]) <= 1e-9);
        CHECK(mm.m2 <= mn.m2 + 1e-9);
    }
}

TEST_CASE("1D criterion and LP path agree on random pairs") {
    std::size_t dominated_seen = 0;
    for (std::uint64_t s = 0; s < 500; ++s) {
        DiscreteMeasure mu = gen_random_measure(1, 1 + s % 6, 1.0, 5200 + s);
        DiscreteMeasure nu = gen_random_measure(1, 1 + (s * 3) % 6, 1.0, 5300 + s);
        if (s % 2 == 0) {
            auto pair = dominated_pair(1, 1 + s % 5, 1.0, 5400 + s);
            mu = pair.first;
            nu = pair.second;
        }
        const bool a = check_convex_order(mu, nu).dominated();
        const bool b = check_convex_order_lp(mu, nu).dominated();
        CHECK(a == b);
        dominated_seen += a;
    }
    CHECK(dominated_seen > 50); // both verdicts are exercised
}

TEST_CASE("witness test: sound on dominated pairs, catches mean gaps") {
    auto [mu, nu] = dominated_pair(2, 4, 1.0, 640);
    CHECK(random_convex_witness_test(mu, nu, 300, 17).pass);

    // Means differ by 1 -> a linear witness must fire.
    const DiscreteMeasure a = dirac({0.0});
    const DiscreteMeasure b = dirac({1.0});
    const WitnessTestResult res = random_convex_witness_test(a, b, 300, 18);
    CHECK_FALSE(res.pass);
    REQUIRE(res.violating.has_value());
    CHECK(integrate(*res.violating, a) > integrate(*res.violating, b));
}

TEST_CASE("witness test agrees with the decision procedure") {
    for (std::uint64_t s = 0; s < 500; ++s) {
        DiscreteMeasure mu = gen_random_measure(1, 1 + s % 5, 1.0, 7100 + s);
        DiscreteMeasure nu = gen_random_measure(1, 1 + (s * 7) % 5, 1.0, 7200 + s);
        if (s % 3 == 0) {
            auto pair = dominated_pair(1, 1 + s % 4, 1.0, 7300 + s);
            mu = pair.first;
            nu = pair.second;
        }
        const bool dominated = check_convex_order(mu, nu).dominated();
        const WitnessTestResult res = random_convex_witness_test(mu, nu, 200, 7400 + s);
        if (dominated) CHECK(res.pass); // sampling never falsifies a true verdict
        if (!res.pass) CHECK_FALSE(dominated);
    }
}

TEST_CASE("dimension mismatch") {
    CHECK_THROWS_AS(check_convex_order(dirac({0.0}), dirac({0.0, 0.0})), DimensionMismatch);
}
