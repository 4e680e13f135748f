#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace wproj {

// Finitely supported probability measure on R^dim. Atoms are stored row-major
// in a flat coordinate array; weights are strictly positive and sum to one
// after construction. Instances are immutable: every operation returns a new
// value, so measures can be shared freely across threads.
class DiscreteMeasure {
public:
    // Validates and normalizes: weights are rescaled to unit total mass,
    // atoms whose normalized weight falls below the drop threshold (1e-15)
    // are removed and the remaining mass renormalized. Atom order preserved.
    // Throws EmptySupport, DimensionMismatch, NonFiniteCoordinate,
    // NegativeWeight.
    DiscreteMeasure(int dim, std::vector<double> coords, std::vector<double> weights);

    // Uniform weights.
    DiscreteMeasure(int dim, std::vector<double> coords);

    int dim() const { return dim_; }
    std::size_t size() const { return weights_.size(); }

    std::span<const double> atom(std::size_t i) const {
        return {coords_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
    }
    double weight(std::size_t i) const { return weights_[i]; }

    const std::vector<double>& coords() const { return coords_; }
    const std::vector<double>& weights() const { return weights_; }

    // Atoms with normalized weight below this are dropped on construction.
    static constexpr double kWeightDropThreshold = 1e-15;

private:
    int dim_ = 0;
    std::vector<double> coords_;
    std::vector<double> weights_;
};

// Convenience constructor from per-atom point vectors.
DiscreteMeasure make_measure(const std::vector<std::vector<double>>& atoms,
                             const std::vector<double>& weights);
DiscreteMeasure make_measure(const std::vector<std::vector<double>>& atoms);

// Dirac mass at a point.
DiscreteMeasure dirac(const std::vector<double>& point);

// 1D helper: atoms/weights given as parallel lists.
DiscreteMeasure measure_1d(const std::vector<double>& atoms, const std::vector<double>& weights);

// Pushforward under x -> lambda * x. Throws NonPositiveScale for lambda <= 0.
DiscreteMeasure dilate(const DiscreteMeasure& m, double lambda);

// Pushforward under x -> x + shift.
DiscreteMeasure translate(const DiscreteMeasure& m, std::span<const double> shift);

struct Moments {
    std::vector<double> mean; // sum_i a_i x_i
    double m2 = 0.0;          // sqrt(sum_i a_i |x_i|^2)
};
Moments moments(const DiscreteMeasure& m);

// Sort atoms lexicographically and merge exactly equal ones. Used for
// structural comparisons; couplings index the original atom order, which is
// why construction never deduplicates.
DiscreteMeasure canonicalize(const DiscreteMeasure& m);

} // namespace wproj
