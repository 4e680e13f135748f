#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "wproj/measure.hpp"

namespace wproj {

// Nonnegative plan between two discrete measures with prescribed marginals.
// plan is n x m row-major; cost is sum_ij plan_ij |x_i - y_j|^2.
struct Coupling {
    DiscreteMeasure source;
    DiscreteMeasure target;
    std::vector<double> plan;
    double cost = 0.0;

    double entry(std::size_t i, std::size_t j) const { return plan[i * target.size() + j]; }
};

// Result of the transportation LP for an arbitrary cost matrix. The dual
// potentials certify optimality: row_potential[i] + col_potential[j] <= c_ij
// everywhere, with equality on the support of the plan.
struct TransportSolution {
    std::vector<double> plan; // n x m row-major, a vertex of the polytope
    double value = 0.0;       // sum plan_ij cost_ij
    std::vector<double> row_potential;
    std::vector<double> col_potential;
    std::size_t pivots = 0;
};

// Exact transportation LP by network simplex on the bipartite graph.
// Deterministic: Dantzig pricing with lowest-index tie-breaks, falling back
// to Bland's rule if degenerate pivots accumulate. Throws SizeLimitExceeded
// when n*m > 40000.
TransportSolution solve_transport(std::span<const double> supply, std::span<const double> demand,
                                  std::span<const double> cost);

struct W2Solution {
    double distance;
    Coupling coupling;
    std::vector<double> row_potential;
    std::vector<double> col_potential;
};

// W2 distance and an optimal coupling with squared Euclidean cost.
// Throws DimensionMismatch, SizeLimitExceeded.
W2Solution w2_lp(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

// Distance-only helper; routes 1D instances through the exact quantile
// integral and everything else through the LP.
double w2_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

// Per-source-atom conditional means z_i = (sum_j pi_ij y_j) / a_i.
struct BarycentricMap {
    int dim = 0;
    std::vector<double> points; // n x dim row-major

    std::span<const double> point(std::size_t i) const {
        return {points.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
    }
    std::size_t size() const { return dim ? points.size() / static_cast<std::size_t>(dim) : 0; }
};

BarycentricMap barycentric_map(const Coupling& c);

// Measure with atoms map(i) and the source's weights.
DiscreteMeasure pushforward_measure(const DiscreteMeasure& source, const BarycentricMap& map);

// Displacement interpolation: pushforward of an optimal coupling under
// (x,y) -> (1-s)x + s y, atoms indexed by nonzero plan entries.
DiscreteMeasure geodesic_point(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double s);
DiscreteMeasure geodesic_point(const Coupling& c, double s);

} // namespace wproj
