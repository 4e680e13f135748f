#pragma once

#include <span>
#include <utility>
#include <vector>

#include "wproj/measure.hpp"

namespace wproj {

// Step function on (0,1) given by strictly increasing breakpoints
// 0 = b_0 < b_1 < ... < b_k = 1 and one value per piece. Represents the
// pseudo-inverse CDF of a 1D measure (then values are nondecreasing) as well
// as the non-monotone affine combinations that appear before isotonic
// projection. The value on [b_i, b_{i+1}) is values[i]; this matches the
// right-continuity of a -> inf { x : F(x) > a }.
struct QuantileFunction {
    std::vector<double> breaks;
    std::vector<double> values;

    std::size_t pieces() const { return values.size(); }
    double width(std::size_t i) const { return breaks[i + 1] - breaks[i]; }
    bool is_monotone() const;
    double value_at(double a) const;
};

// Validates the breakpoint invariants. Throws LengthMismatch / InvalidArgument.
QuantileFunction make_quantile(std::vector<double> breaks, std::vector<double> values);

// Pseudo-inverse CDF of a 1D measure. Throws WrongDimension.
QuantileFunction quantile_of(const DiscreteMeasure& m);

// Re-expresses both step functions on the union of their breakpoints.
std::pair<QuantileFunction, QuantileFunction> common_refinement(const QuantileFunction& f,
                                                                const QuantileFunction& g);

// alpha*f + beta*g as a step function on the common refinement.
QuantileFunction affine_combination(double alpha, const QuantileFunction& f,
                                    double beta, const QuantileFunction& g);

// integral_0^1 f da and integral_0^1 (f-g)^2 da, exact piecewise sums.
double integral(const QuantileFunction& f);
double l2_distance_sq(const QuantileFunction& f, const QuantileFunction& g);

// Exact 1D 2-Wasserstein distance via quantile functions.
double w2_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

// Weighted L2 projection onto nondecreasing sequences by pool-adjacent-
// violators. Pooled blocks carry width-weighted means. O(n).
std::vector<double> pav_isotonic(std::span<const double> values, std::span<const double> widths);

// P_M applied to a step function (PAV on its pieces).
QuantileFunction isotonic_projection(const QuantileFunction& f);

// Measure whose quantile function is q; adjacent equal values merge.
// Throws NotMonotone.
DiscreteMeasure measure_from_quantile(const QuantileFunction& q);

} // namespace wproj
