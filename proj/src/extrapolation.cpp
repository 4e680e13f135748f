#include "wproj/extrapolation.hpp"

#include <vector>

#include "wproj/errors.hpp"
#include "wproj/quantile.hpp"
#include "wproj/transport.hpp"

namespace wproj {

QuantileFunction extrapolate_1d_quantile(const DiscreteMeasure& nu0, const DiscreteMeasure& nu1,
                                         double t) {
    if (nu0.dim() != 1 || nu1.dim() != 1) throw WrongDimension("extrapolate_1d needs 1D measures");
    if (!(t > 1.0)) throw TimeNotGreaterThanOne("extrapolation time must exceed 1");
    const QuantileFunction mix = affine_combination(t, quantile_of(nu1), 1.0 - t, quantile_of(nu0));
    return isotonic_projection(mix);
}

DiscreteMeasure extrapolate_1d(const DiscreteMeasure& nu0, const DiscreteMeasure& nu1, double t) {
    return measure_from_quantile(extrapolate_1d_quantile(nu0, nu1, t));
}

DiscreteMeasure extrapolate_via_backward(const DiscreteMeasure& nu0, const DiscreteMeasure& nu1,
                                         double t, const SolverConfig& cfg) {
    if (nu0.dim() != nu1.dim()) throw DimensionMismatch("extrapolate: dimension mismatch");
    if (!(t > 1.0)) throw TimeNotGreaterThanOne("extrapolation time must exceed 1");
    const double theta = (t - 1.0) / t;

    const DiscreteMeasure mu_dil = dilate(nu1, 1.0 / theta);
    const BackwardSolution back = backward_project(mu_dil, nu0, cfg);

    // Output atoms t x_i + (1-t) z_i carry nu1's weights; z_i is the
    // barycentric image of the dilated atom x_i / theta.
    const std::size_t d = static_cast<std::size_t>(nu1.dim());
    std::vector<double> coords(nu1.size() * d);
    for (std::size_t i = 0; i < nu1.size(); ++i) {
        const auto x = nu1.atom(i);
        const auto zi = back.map.point(i);
        for (std::size_t k = 0; k < d; ++k) coords[i * d + k] = t * x[k] + (1.0 - t) * zi[k];
    }
    return DiscreteMeasure(nu1.dim(), std::move(coords), nu1.weights());
}

DiscreteMeasure extrapolate(const DiscreteMeasure& nu0, const DiscreteMeasure& nu1, double t,
                            const SolverConfig& cfg) {
    if (nu0.dim() != nu1.dim()) throw DimensionMismatch("extrapolate: dimension mismatch");
    if (!(t > 1.0)) throw TimeNotGreaterThanOne("extrapolation time must exceed 1");
    if (nu0.dim() == 1) return extrapolate_1d(nu0, nu1, t);
    return extrapolate_via_backward(nu0, nu1, t, cfg);
}

double extrapolation_functional(const DiscreteMeasure& rho, const DiscreteMeasure& nu0,
                                const DiscreteMeasure& nu1, double t) {
    if (!(t > 1.0)) throw TimeNotGreaterThanOne("extrapolation time must exceed 1");
    const double d1 = w2_distance(rho, nu1);
    const double d0 = w2_distance(rho, nu0);
    return d1 * d1 / (2.0 * (t - 1.0)) - d0 * d0 / (2.0 * t);
}

double g_functional(const DiscreteMeasure& mu, const DiscreteMeasure& nu0,
                    const DiscreteMeasure& nu1, double t) {
    if (!(t > 1.0)) throw TimeNotGreaterThanOne("extrapolation time must exceed 1");
    const double d1 = w2_distance(nu1, mu);
    const double d0 = w2_distance(nu0, mu);
    return t * d1 * d1 / 2.0 - (t - 1.0) * d0 * d0 / 2.0;
}

} // namespace wproj
