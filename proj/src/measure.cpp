#include "wproj/measure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "wproj/errors.hpp"
#include "wproj/numeric.hpp"

namespace wproj {

namespace {

std::vector<double> flatten(const std::vector<std::vector<double>>& atoms) {
    std::vector<double> flat;
    if (atoms.empty()) throw EmptySupport("measure has no atoms");
    const std::size_t d = atoms.front().size();
    flat.reserve(atoms.size() * d);
    for (const auto& a : atoms) {
        if (a.size() != d)
            throw DimensionMismatch("atom dimension " + std::to_string(a.size()) +
                                    " differs from first atom dimension " + std::to_string(d));
        flat.insert(flat.end(), a.begin(), a.end());
    }
    return flat;
}

} // namespace

DiscreteMeasure::DiscreteMeasure(int dim, std::vector<double> coords, std::vector<double> weights)
    : dim_(dim) {
    if (dim <= 0) throw DimensionMismatch("dim must be positive");
    if (coords.empty()) throw EmptySupport("measure has no atoms");
    if (coords.size() % static_cast<std::size_t>(dim) != 0)
        throw DimensionMismatch("coordinate count not a multiple of dim");
    const std::size_t n = coords.size() / static_cast<std::size_t>(dim);
    if (weights.size() != n)
        throw LengthMismatch("got " + std::to_string(weights.size()) + " weights for " +
                             std::to_string(n) + " atoms");
    if (!all_finite(coords)) throw NonFiniteCoordinate("atom coordinate is not finite");

    KahanSum total;
    for (double w : weights) {
        if (!std::isfinite(w)) throw NonFiniteCoordinate("weight is not finite");
        if (w < 0.0) throw NegativeWeight("weight " + std::to_string(w) + " is negative");
        total.add(w);
    }
    const double sum = total.value();
    if (!(sum > 0.0)) throw EmptySupport("total mass is not positive");

    // Normalize, drop near-zero atoms, renormalize. Order preserved.
    coords_.reserve(coords.size());
    weights_.reserve(n);
    KahanSum kept;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = weights[i] / sum;
        if (w < kWeightDropThreshold) continue;
        weights_.push_back(w);
        const auto* p = coords.data() + i * static_cast<std::size_t>(dim);
        coords_.insert(coords_.end(), p, p + dim);
        kept.add(w);
    }
    if (weights_.empty()) throw EmptySupport("all atoms below weight threshold");
    const double kept_sum = kept.value();
    for (double& w : weights_) w /= kept_sum;
}

DiscreteMeasure::DiscreteMeasure(int dim, std::vector<double> coords)
    : DiscreteMeasure(dim, coords,
                      std::vector<double>(dim > 0 ? coords.size() / static_cast<std::size_t>(dim) : 0,
                                          1.0)) {}

DiscreteMeasure make_measure(const std::vector<std::vector<double>>& atoms,
                             const std::vector<double>& weights) {
    if (atoms.empty()) throw EmptySupport("measure has no atoms");
    return DiscreteMeasure(static_cast<int>(atoms.front().size()), flatten(atoms), weights);
}

DiscreteMeasure make_measure(const std::vector<std::vector<double>>& atoms) {
    if (atoms.empty()) throw EmptySupport("measure has no atoms");
    return make_measure(atoms, std::vector<double>(atoms.size(), 1.0));
}

DiscreteMeasure dirac(const std::vector<double>& point) {
    return make_measure({point}, {1.0});
}

DiscreteMeasure measure_1d(const std::vector<double>& atoms, const std::vector<double>& weights) {
    return DiscreteMeasure(1, atoms, weights);
}

DiscreteMeasure dilate(const DiscreteMeasure& m, double lambda) {
    if (!(lambda > 0.0)) throw NonPositiveScale("dilation factor must be positive");
    std::vector<double> coords = m.coords();
    for (double& c : coords) c *= lambda;
    return DiscreteMeasure(m.dim(), std::move(coords), m.weights());
}

DiscreteMeasure translate(const DiscreteMeasure& m, std::span<const double> shift) {
    if (shift.size() != static_cast<std::size_t>(m.dim()))
        throw DimensionMismatch("shift dimension mismatch");
    std::vector<double> coords = m.coords();
    const std::size_t d = static_cast<std::size_t>(m.dim());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] += shift[i % d];
    return DiscreteMeasure(m.dim(), std::move(coords), m.weights());
}

Moments moments(const DiscreteMeasure& m) {
    const std::size_t d = static_cast<std::size_t>(m.dim());
    std::vector<KahanSum> mean(d);
    KahanSum second;
    for (std::size_t i = 0; i < m.size(); ++i) {
        const auto x = m.atom(i);
        const double a = m.weight(i);
        for (std::size_t k = 0; k < d; ++k) mean[k].add(a * x[k]);
        second.add(a * squared_norm(x));
    }
    Moments out;
    out.mean.resize(d);
    for (std::size_t k = 0; k < d; ++k) out.mean[k] = mean[k].value();
    out.m2 = std::sqrt(std::max(0.0, second.value()));
    return out;
}

DiscreteMeasure canonicalize(const DiscreteMeasure& m) {
    const std::size_t n = m.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto lex_less = [&](std::size_t i, std::size_t j) {
        const auto a = m.atom(i), b = m.atom(j);
        return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
    };
    std::stable_sort(order.begin(), order.end(), lex_less);

    std::vector<double> coords;
    std::vector<double> weights;
    for (std::size_t idx : order) {
        const auto x = m.atom(idx);
        const bool same_as_last =
            !weights.empty() &&
            std::equal(x.begin(), x.end(), coords.end() - m.dim(), coords.end());
        if (same_as_last) {
            weights.back() += m.weight(idx);
        } else {
            coords.insert(coords.end(), x.begin(), x.end());
            weights.push_back(m.weight(idx));
        }
    }
    return DiscreteMeasure(m.dim(), std::move(coords), std::move(weights));
}

} // namespace wproj
