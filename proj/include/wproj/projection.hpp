#pragma once

#include <cstddef>

#include "wproj/measure.hpp"
#include "wproj/transport.hpp"

namespace wproj {

struct SolverConfig {
    // Frank-Wolfe duality-gap target, relative to (1 + initial objective).
    // Zero means "polish to the machine floor".
    double fw_gap_tol = 1e-9;
    std::size_t max_iters = 50000;
    // Pipeline time for the forward projection; must be > 1.
    double t_pipeline = 2.0;
    // Tolerance handed to convex-order feasibility checks of solver output.
    double tol_order = 1e-8;
};

// Backward projection result. projected is the pushforward of mu under the
// barycentric map of plan; objective = sum_i a_i |x_i - z_i|^2 is the weak
// transport cost, which at the optimum equals W2^2(mu, projected).
struct BackwardSolution {
    DiscreteMeasure projected;
    Coupling plan;
    BarycentricMap map;
    double objective = 0.0;
    double fw_gap = 0.0;
    bool converged = true;
    std::size_t iterations = 0;
};

// Closest measure to mu in W2 among those dominated by nu in convex order,
// by away-step Frank-Wolfe with fully-corrective refinement over the
// transportation polytope Pi(mu, nu); the linear minimization oracle is the
// transportation LP with the current gradient as cost. Any dimension.
BackwardSolution backward_project(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                  const SolverConfig& cfg = {});

// Exact 1D backward projection on the common quantile grid:
// X_out = X_mu - P_M(X_mu - X_nu). Throws WrongDimension.
DiscreteMeasure backward_project_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

// Closest measure to nu in W2 among those dominating mu, through the
// extrapolation pipeline with t = cfg.t_pipeline: extrapolate nu towards the
// dilated mu, then read the result off the geodesic between nu and the
// extrapolation at time 1/t, rescaled. For discrete nu whose optimal coupling
// onto the extrapolation splits atoms, the output keeps the split atoms (one
// per nonzero plan entry); it is exact whenever that coupling is a map, and
// in particular always in 1D.
DiscreteMeasure forward_project(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                const SolverConfig& cfg = {});

// Exact 1D forward projection: X_out = X_nu + P_M(X_mu - X_nu).
DiscreteMeasure forward_project_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

} // namespace wproj
