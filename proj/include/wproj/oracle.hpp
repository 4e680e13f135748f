#pragma once

#include "wproj/measure.hpp"

namespace wproj {

// Test-support brute-force solvers for tiny instances. They are slow on
// purpose and share no machinery with the simplex / Frank-Wolfe path: the
// backward oracle walks a dense grid over the free variables of the
// transportation polytope and refines with a derivative-free pattern search;
// the extrapolation oracle does multi-start local descent on atom locations.

// Weak transport minimizer over Pi(mu, nu), returned as the barycentric
// pushforward. Requires mu.size()*nu.size() <= 9; throws TooLarge.
DiscreteMeasure brute_force_backward(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

// Same, with the grid density scaled by `grid_mult` (used by the
// grid-refinement convergence check).
DiscreteMeasure brute_force_backward_grid(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                          std::size_t grid_mult, bool refine = true);

// Direct minimizer of the extrapolation functional over candidate measures
// carrying nu1's weights on free atom locations. Requires nu1.size() <= 3 and
// dim <= 2; throws TooLarge, TimeNotGreaterThanOne.
DiscreteMeasure brute_force_extrapolation(const DiscreteMeasure& nu0, const DiscreteMeasure& nu1,
                                          double t);

} // namespace wproj
