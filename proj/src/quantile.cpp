#include "wproj/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "wproj/errors.hpp"
#include "wproj/numeric.hpp"

namespace wproj {

bool QuantileFunction::is_monotone() const {
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] < values[i - 1]) return false;
    }
    return true;
}

double QuantileFunction::value_at(double a) const {
    // Value on [b_i, b_{i+1}).
    auto it = std::upper_bound(breaks.begin(), breaks.end(), a);
    std::size_t idx = static_cast<std::size_t>(it - breaks.begin());
    if (idx == 0) return values.front();
    if (idx >= breaks.size()) return values.back();
    return values[idx - 1];
}

QuantileFunction make_quantile(std::vector<double> breaks, std::vector<double> values) {
    if (breaks.size() != values.size() + 1)
        throw LengthMismatch("need one more breakpoint than values");
    if (values.empty()) throw InvalidArgument("step function needs at least one piece");
    if (breaks.front() != 0.0 || breaks.back() != 1.0)
        throw InvalidArgument("breakpoints must start at 0 and end at 1");
    for (std::size_t i = 1; i < breaks.size(); ++i) {
        if (!(breaks[i] > breaks[i - 1]))
            throw InvalidArgument("breakpoints must be strictly increasing");
    }
    if (!all_finite(values) || !all_finite(breaks))
        throw NonFiniteCoordinate("step function entries must be finite");
    QuantileFunction q;
    q.breaks = std::move(breaks);
    q.values = std::move(values);
    return q;
}

QuantileFunction quantile_of(const DiscreteMeasure& m) {
    if (m.dim() != 1) throw WrongDimension("quantile_of needs a 1D measure");
    const std::size_t n = m.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return m.atom(i)[0] < m.atom(j)[0]; });

    std::vector<double> breaks{0.0};
    std::vector<double> values;
    KahanSum cum;
    for (std::size_t r = 0; r < n; ++r) {
        const double x = m.atom(order[r])[0];
        double w = m.weight(order[r]);
        // Merge ties so pieces carry the total mass of each support point.
        while (r + 1 < n && m.atom(order[r + 1])[0] == x) {
            ++r;
            w += m.weight(order[r]);
        }
        cum.add(w);
        values.push_back(x);
        breaks.push_back(cum.value());
    }
    breaks.back() = 1.0;
    // Guard against zero-width pieces from rounding in the cumulative sums.
    std::vector<double> b2{0.0}, v2;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (breaks[i + 1] > b2.back()) {
            b2.push_back(breaks[i + 1]);
            v2.push_back(values[i]);
        } else if (!v2.empty()) {
            // zero-width piece: drop it (carries no mass)
        }
    }
    if (v2.empty()) { b2 = {0.0, 1.0}; v2 = {values.back()}; }
    return make_quantile(std::move(b2), std::move(v2));
}

std::pair<QuantileFunction, QuantileFunction> common_refinement(const QuantileFunction& f,
                                                                const QuantileFunction& g) {
    std::vector<double> breaks;
    breaks.reserve(f.breaks.size() + g.breaks.size());
    std::merge(f.breaks.begin(), f.breaks.end(), g.breaks.begin(), g.breaks.end(),
               std::back_inserter(breaks));
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    auto refine = [&](const QuantileFunction& q) {
        std::vector<double> vals(breaks.size() - 1);
        std::size_t src = 0;
        for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
            while (src + 1 < q.values.size() && q.breaks[src + 1] <= breaks[i]) ++src;
            vals[i] = q.values[src];
        }
        return make_quantile(breaks, std::move(vals));
    };
    return {refine(f), refine(g)};
}

QuantileFunction affine_combination(double alpha, const QuantileFunction& f,
                                    double beta, const QuantileFunction& g) {
    auto [rf, rg] = common_refinement(f, g);
    for (std::size_t i = 0; i < rf.values.size(); ++i)
        rf.values[i] = alpha * rf.values[i] + beta * rg.values[i];
    return rf;
}

double integral(const QuantileFunction& f) {
    KahanSum s;
    for (std::size_t i = 0; i < f.pieces(); ++i) s.add(f.width(i) * f.values[i]);
    return s.value();
}

double l2_distance_sq(const QuantileFunction& f, const QuantileFunction& g) {
    auto [rf, rg] = common_refinement(f, g);
    KahanSum s;
    for (std::size_t i = 0; i < rf.pieces(); ++i) {
        const double d = rf.values[i] - rg.values[i];
        s.add(rf.width(i) * d * d);
    }
    return std::max(0.0, s.value());
}

double w2_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    if (mu.dim() != 1 || nu.dim() != 1) throw WrongDimension("w2_1d needs 1D measures");
    return std::sqrt(l2_distance_sq(quantile_of(mu), quantile_of(nu)));
}

std::vector<double> pav_isotonic(std::span<const double> values, std::span<const double> widths) {
    if (values.size() != widths.size())
        throw LengthMismatch("pav_isotonic: " + std::to_string(values.size()) + " values vs " +
                             std::to_string(widths.size()) + " widths");
    if (values.empty()) throw InvalidArgument("pav_isotonic: empty input");
    for (double w : widths) {
        if (!(w > 0.0)) throw InvalidArgument("pav_isotonic: widths must be positive");
    }

    struct Block {
        double mean;
        double weight;
        std::size_t count;
    };
    std::vector<Block> stack;
    stack.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        Block b{values[i], widths[i], 1};
        while (!stack.empty() && stack.back().mean > b.mean) {
            const Block& p = stack.back();
            b.mean = (p.weight * p.mean + b.weight * b.mean) / (p.weight + b.weight);
            b.weight += p.weight;
            b.count += p.count;
            stack.pop_back();
        }
        stack.push_back(b);
    }

    std::vector<double> out;
    out.reserve(values.size());
    for (const Block& b : stack) out.insert(out.end(), b.count, b.mean);
    return out;
}

QuantileFunction isotonic_projection(const QuantileFunction& f) {
    std::vector<double> widths(f.pieces());
    for (std::size_t i = 0; i < widths.size(); ++i) widths[i] = f.width(i);
    QuantileFunction out;
    out.breaks = f.breaks;
    out.values = pav_isotonic(f.values, widths);
    return out;
}

DiscreteMeasure measure_from_quantile(const QuantileFunction& q) {
    if (!q.is_monotone()) throw NotMonotone("quantile values must be nondecreasing");
    std::vector<double> atoms;
    std::vector<double> weights;
    for (std::size_t i = 0; i < q.pieces(); ++i) {
        if (!atoms.empty() && q.values[i] == atoms.back()) {
            weights.back() += q.width(i);
        } else {
            atoms.push_back(q.values[i]);
            weights.push_back(q.width(i));
        }
    }
    return DiscreteMeasure(1, std::move(atoms), std::move(weights));
}

} // namespace wproj
