#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wproj/measure.hpp"
#include "wproj/transport.hpp"

namespace wproj {

// Convex piecewise-linear function w -> max_k (alpha_k + beta_k . w).
// Serves as a falsification witness: a convex test function integrating
// strictly higher against mu than against nu disproves mu <= nu.
struct PiecewiseLinearConvex {
    int dim = 1;
    std::vector<double> alphas;
    std::vector<double> betas; // K x dim row-major

    double operator()(std::span<const double> w) const;
    std::string describe() const;
};

double integrate(const PiecewiseLinearConvex& phi, const DiscreteMeasure& m);

enum class OrderVerdict { Dominated, NotDominated };

struct OrderCheck {
    OrderVerdict verdict = OrderVerdict::NotDominated;
    bool marginal = false;     // decision landed near the tolerance boundary
    double violation = 0.0;    // worst constraint violation (0 when dominated)
    std::optional<Coupling> certificate;          // martingale coupling (LP path)
    std::optional<PiecewiseLinearConvex> witness; // violated convex function
    std::string detail;

    bool dominated() const { return verdict == OrderVerdict::Dominated; }
};

// Decide mu <= nu in convex order. Inequalities are relaxed by
// tol * (1 + M2(nu)). 1D instances use the exact integrated-quantile
// criterion; higher dimensions go through the martingale-coupling LP.
// Throws DimensionMismatch.
OrderCheck check_convex_order(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                              double tol = 1e-9);

// LP feasibility path for any dimension: mu <= nu iff some coupling in
// Pi(mu,nu) has conditional means fixed at the mu atoms. Dominated returns
// the feasible plan as certificate; NotDominated turns the Farkas ray into a
// piecewise-linear convex witness.
OrderCheck check_convex_order_lp(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                 double tol = 1e-9);

struct WitnessTestResult {
    bool pass = true;
    double worst_margin = 0.0; // min over samples of (int phi dnu - int phi dmu)
    std::optional<PiecewiseLinearConvex> violating;
    std::size_t samples = 0;
};

// Samples `count` random piecewise-linear convex functions (deterministic
// from seed) and checks int phi dmu <= int phi dnu + tol*(1+M2(nu)).
WitnessTestResult random_convex_witness_test(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                             std::size_t count, std::uint64_t seed,
                                             double tol = 1e-9);

} // namespace wproj
