#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace wproj {

// Neumaier compensated accumulator. Squared distances and plan costs are
// summed through this so that margins near the report tolerances are not
// dominated by accumulation error.
class KahanSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) {
    KahanSum s;
    for (double x : xs) s.add(x);
    return s.value();
}

// |a - b|^2 for points of equal dimension.
inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    KahanSum s;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s.add(d * d);
    }
    return s.value();
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    KahanSum s;
    for (std::size_t k = 0; k < a.size(); ++k) s.add(a[k] * b[k]);
    return s.value();
}

inline double squared_norm(std::span<const double> a) { return dot(a, a); }

inline bool all_finite(std::span<const double> xs) {
    for (double x : xs) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

} // namespace wproj
