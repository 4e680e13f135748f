#pragma once

#include "wproj/measure.hpp"
#include "wproj/projection.hpp"
#include "wproj/quantile.hpp"

namespace wproj {

// Metric extrapolation E^t(nu0, nu1) for t > 1: the unique minimizer of
//   W2^2(rho, nu1) / (2(t-1)) - W2^2(rho, nu0) / (2t).
// 1D instances are solved exactly on the quantile grid by isotonic
// projection of t X_{nu1} + (1-t) X_{nu0}. Higher dimensions go through the
// reduction to a backward projection of the dilated nu1: the functional is a
// difference of convex terms, while the reduction is a single convex QP.
// Throws TimeNotGreaterThanOne, DimensionMismatch.
DiscreteMeasure extrapolate(const DiscreteMeasure& nu0, const DiscreteMeasure& nu1, double t,
                            const SolverConfig& cfg = {});

// The backward-projection route in any dimension, including 1D; exposed so
// the two routes can be compared against each other.
DiscreteMeasure extrapolate_via_backward(const DiscreteMeasure& nu0, const DiscreteMeasure& nu1,
                                         double t, const SolverConfig& cfg = {});

// 1D quantile/PAV route. Throws WrongDimension.
DiscreteMeasure extrapolate_1d(const DiscreteMeasure& nu0, const DiscreteMeasure& nu1, double t);

// Same computation, returned as the projected quantile function on the
// common grid (callers composing further quantile algebra avoid the
// breakpoint round-trip through a measure).
QuantileFunction extrapolate_1d_quantile(const DiscreteMeasure& nu0, const DiscreteMeasure& nu1,
                                         double t);

// W2^2(rho,nu1)/(2(t-1)) - W2^2(rho,nu0)/(2t).
double extrapolation_functional(const DiscreteMeasure& rho, const DiscreteMeasure& nu0,
                                const DiscreteMeasure& nu1, double t);

// t W2^2(nu1,mu)/2 - (t-1) W2^2(nu0,mu)/2; equals
// t(t-1) * extrapolation_functional identically.
double g_functional(const DiscreteMeasure& mu, const DiscreteMeasure& nu0,
                    const DiscreteMeasure& nu1, double t);

} // namespace wproj
