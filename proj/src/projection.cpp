#include "wproj/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "wproj/errors.hpp"
#include "wproj/extrapolation.hpp"
#include "wproj/numeric.hpp"
#include "wproj/qp.hpp"
#include "wproj/quantile.hpp"

namespace wproj {

namespace {

// One point of the transportation polytope kept in the Frank-Wolfe
// dictionary: sparse plan entries plus the barycentric image vector
// z[i*d+k] = (sum_j plan_ij y_jk) / a_i it induces.
struct DictAtom {
    std::vector<std::pair<std::size_t, double>> cells;
    std::vector<double> z;
};

struct Workspace {
    std::size_t n, m, d;
    const DiscreteMeasure* mu;
    const DiscreteMeasure* nu;

    std::vector<double> z_of_plan(const std::vector<std::pair<std::size_t, double>>& cells) const {
        std::vector<KahanSum> acc(n * d);
        for (const auto& [cell, p] : cells) {
            const std::size_t i = cell / m, j = cell % m;
            const auto y = nu->atom(j);
            for (std::size_t k = 0; k < d; ++k) acc[i * d + k].add(p * y[k]);
        }
        std::vector<double> z(n * d);
        for (std::size_t i = 0; i < n; ++i) {
            const double ai = mu->weight(i);
            for (std::size_t k = 0; k < d; ++k) z[i * d + k] = acc[i * d + k].value() / ai;
        }
        return z;
    }

    // Weak transport objective sum_i a_i |x_i - z_i|^2.
    double objective(const std::vector<double>& z) const {
        KahanSum s;
        for (std::size_t i = 0; i < n; ++i) {
            const auto x = mu->atom(i);
            KahanSum row;
            for (std::size_t k = 0; k < d; ++k) {
                const double dk = x[k] - z[i * d + k];
                row.add(dk * dk);
            }
            s.add(mu->weight(i) * row.value());
        }
        return s.value();
    }
};

bool same_vertex(const DictAtom& a, const std::vector<std::pair<std::size_t, double>>& cells) {
    if (a.cells.size() != cells.size()) return false;
    for (std::size_t k = 0; k < cells.size(); ++k) {
        if (a.cells[k].first != cells[k].first || a.cells[k].second != cells[k].second) return false;
    }
    return true;
}

} // namespace

BackwardSolution backward_project(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                  const SolverConfig& cfg) {
    if (mu.dim() != nu.dim()) throw DimensionMismatch("backward_project: dimension mismatch");
    const std::size_t n = mu.size(), m = nu.size();
    const std::size_t d = static_cast<std::size_t>(mu.dim());
    Workspace ws{n, m, d, &mu, &nu};

    // Initial iterate: independent product coupling. It is not a vertex, so
    // it lives in the dictionary as a droppable atom like any other.
    std::vector<DictAtom> dict;
    {
        DictAtom prod;
        prod.cells.reserve(n * m);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j)
                prod.cells.emplace_back(i * m + j, mu.weight(i) * nu.weight(j));
        }
        prod.z = ws.z_of_plan(prod.cells);
        dict.push_back(std::move(prod));
    }
    std::vector<double> lambda{1.0};
    std::vector<double> z = dict[0].z;

    const double J0 = ws.objective(z);
    const double threshold = cfg.fw_gap_tol * (1.0 + J0);
    const double floor = 8.0 * std::numeric_limits<double>::epsilon() * (1.0 + J0);

    auto rebuild_state = [&]() {
        // Drop zero-weight atoms, renormalize, and recompute z from scratch.
        std::vector<DictAtom> kept;
        std::vector<double> kl;
        double total = 0.0;
        for (std::size_t k = 0; k < dict.size(); ++k) {
            if (lambda[k] > 0.0) {
                kept.push_back(std::move(dict[k]));
                kl.push_back(lambda[k]);
                total += lambda[k];
            }
        }
        dict = std::move(kept);
        lambda = std::move(kl);
        for (double& l : lambda) l /= total;
        std::vector<KahanSum> acc(n * d);
        for (std::size_t k = 0; k < dict.size(); ++k) {
            for (std::size_t c = 0; c < n * d; ++c) acc[c].add(lambda[k] * dict[k].z[c]);
        }
        for (std::size_t c = 0; c < n * d; ++c) z[c] = acc[c].value();
    };

    auto corrective = [&]() {
        const std::size_t K = dict.size();
        if (K < 2) return;
        std::vector<double> H(K * K, 0.0), g(K, 0.0);
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t l = k; l < K; ++l) {
                KahanSum s;
                for (std::size_t i = 0; i < n; ++i) {
                    KahanSum row;
                    for (std::size_t c = 0; c < d; ++c)
                        row.add(dict[k].z[i * d + c] * dict[l].z[i * d + c]);
                    s.add(mu.weight(i) * row.value());
                }
                H[k * K + l] = H[l * K + k] = 2.0 * s.value();
            }
            KahanSum s;
            for (std::size_t i = 0; i < n; ++i) {
                const auto x = mu.atom(i);
                KahanSum row;
                for (std::size_t c = 0; c < d; ++c) row.add(x[c] * dict[k].z[i * d + c]);
                s.add(mu.weight(i) * row.value());
            }
            g[k] = -2.0 * s.value();
        }
        lambda = simplex_qp(H, g, lambda);
        rebuild_state();
    };

    std::vector<double> grad(n * m);
    double gap = std::numeric_limits<double>::infinity();
    bool converged = false;
    std::size_t iter = 0;
    double best_J = J0;
    std::size_t stall = 0;

    for (; iter < cfg.max_iters; ++iter) {
        // Gradient G_ij = 2 (z_i - x_i) . y_j.
        for (std::size_t i = 0; i < n; ++i) {
            const auto x = mu.atom(i);
            for (std::size_t j = 0; j < m; ++j) {
                const auto y = nu.atom(j);
                double gij = 0.0;
                for (std::size_t k = 0; k < d; ++k) gij += (z[i * d + k] - x[k]) * y[k];
                grad[i * m + j] = 2.0 * gij;
            }
        }

        TransportSolution lmo = solve_transport(mu.weights(), nu.weights(), grad);

        // <G, pi> via the dictionary decomposition.
        KahanSum gpi;
        for (std::size_t k = 0; k < dict.size(); ++k) {
            KahanSum s;
            for (const auto& [cell, p] : dict[k].cells) s.add(p * grad[cell]);
            gpi.add(lambda[k] * s.value());
        }
        gap = gpi.value() - lmo.value;
        if (gap <= std::max(threshold, floor)) {
            converged = true;
            break;
        }

        // Away atom: dictionary point most aligned with the gradient.
        std::size_t away = 0;
        double away_score = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < dict.size(); ++k) {
            KahanSum s;
            for (const auto& [cell, p] : dict[k].cells) s.add(p * grad[cell]);
            if (s.value() > away_score) {
                away_score = s.value();
                away = k;
            }
        }

        const double fw_desc = gap;                       // <-G, s - pi>
        const double away_desc = away_score - gpi.value(); // <-G, pi - v_a>
        const bool take_fw = fw_desc >= away_desc;

        std::vector<std::pair<std::size_t, double>> s_cells;
        if (take_fw) {
            for (std::size_t cell = 0; cell < n * m; ++cell) {
                if (lmo.plan[cell] > 0.0) s_cells.emplace_back(cell, lmo.plan[cell]);
            }
        }

        std::vector<double> dz(n * d);
        double gamma_max = 1.0;
        std::size_t fw_index = dict.size();
        if (take_fw) {
            for (std::size_t k = 0; k < dict.size(); ++k) {
                if (same_vertex(dict[k], s_cells)) {
                    fw_index = k;
                    break;
                }
            }
            if (fw_index == dict.size()) {
                DictAtom atom;
                atom.cells = std::move(s_cells);
                atom.z = ws.z_of_plan(atom.cells);
                dict.push_back(std::move(atom));
                lambda.push_back(0.0);
            }
            const std::vector<double>& Zs = dict[fw_index].z;
            for (std::size_t c = 0; c < n * d; ++c) dz[c] = Zs[c] - z[c];
            gamma_max = 1.0;
        } else {
            const double la = lambda[away];
            if (la >= 1.0) break; // single-atom dictionary cannot move away
            for (std::size_t c = 0; c < n * d; ++c) dz[c] = z[c] - dict[away].z[c];
            gamma_max = la / (1.0 - la);
        }

        // Exact line search for the quadratic objective along dz.
        KahanSum lin_acc, quad_acc;
        for (std::size_t i = 0; i < n; ++i) {
            const auto x = mu.atom(i);
            KahanSum l_row, q_row;
            for (std::size_t k = 0; k < d; ++k) {
                const double dc = dz[i * d + k];
                l_row.add((z[i * d + k] - x[k]) * dc);
                q_row.add(dc * dc);
            }
            lin_acc.add(mu.weight(i) * l_row.value());
            quad_acc.add(mu.weight(i) * q_row.value());
        }
        const double lin = 2.0 * lin_acc.value();
        const double quad = quad_acc.value();
        double gamma = gamma_max;
        if (quad > 0.0) gamma = std::clamp(-lin / (2.0 * quad), 0.0, gamma_max);

        if (take_fw) {
            for (double& l : lambda) l *= (1.0 - gamma);
            lambda[fw_index] += gamma;
        } else {
            for (double& l : lambda) l *= (1.0 + gamma);
            lambda[away] -= gamma;
            if (lambda[away] < 1e-16) lambda[away] = 0.0;
        }
        for (std::size_t c = 0; c < n * d; ++c) z[c] += gamma * dz[c];

        // Fully-corrective refinement over the current dictionary. At desk
        // scale this is cheap and it lands exactly on the optimal face.
        if (dict.size() <= 96 || iter % 8 == 7) corrective();

        const double J = ws.objective(z);
        if (J < best_J - floor) {
            best_J = J;
            stall = 0;
        } else if (++stall > 200) {
            break; // no representable progress left
        }
    }

    BackwardSolution out{
        DiscreteMeasure(mu.dim(), z, mu.weights()),
        Coupling{mu, nu, {}, 0.0},
        BarycentricMap{mu.dim(), z},
        ws.objective(z),
        gap,
        converged,
        iter,
    };
    // Assemble the dense plan and its transport cost.
    out.plan.plan.assign(n * m, 0.0);
    for (std::size_t k = 0; k < dict.size(); ++k) {
        for (const auto& [cell, p] : dict[k].cells) out.plan.plan[cell] += lambda[k] * p;
    }
    KahanSum cost;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double p = out.plan.plan[i * m + j];
            if (p > 0.0) cost.add(p * squared_distance(mu.atom(i), nu.atom(j)));
        }
    }
    out.plan.cost = cost.value();
    return out;
}

namespace {

// Clamp one-ulp dips that floating subtraction can leave in a sequence that
// is nondecreasing in exact arithmetic.
void enforce_monotone(std::vector<double>& v, double tol) {
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] < v[i - 1]) {
            if (v[i - 1] - v[i] > tol) throw NotMonotone("projection produced a decreasing quantile");
            v[i] = v[i - 1];
        }
    }
}

} // namespace

DiscreteMeasure backward_project_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    if (mu.dim() != 1 || nu.dim() != 1) throw WrongDimension("backward_project_1d needs 1D measures");
    auto [qmu, qnu] = common_refinement(quantile_of(mu), quantile_of(nu));
    QuantileFunction diff;
    diff.breaks = qmu.breaks;
    diff.values.resize(qmu.pieces());
    for (std::size_t i = 0; i < qmu.pieces(); ++i) diff.values[i] = qmu.values[i] - qnu.values[i];
    const QuantileFunction pooled = isotonic_projection(diff);

    double scale = 0.0;
    std::vector<double> values(qmu.pieces());
    for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] = qmu.values[i] - pooled.values[i];
        scale = std::max(scale, std::abs(values[i]));
    }
    enforce_monotone(values, 1e-10 * (1.0 + scale));
    return measure_from_quantile(make_quantile(qmu.breaks, std::move(values)));
}

DiscreteMeasure forward_project_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    if (mu.dim() != 1 || nu.dim() != 1) throw WrongDimension("forward_project_1d needs 1D measures");
    auto [qmu, qnu] = common_refinement(quantile_of(mu), quantile_of(nu));
    QuantileFunction diff;
    diff.breaks = qmu.breaks;
    diff.values.resize(qmu.pieces());
    for (std::size_t i = 0; i < qmu.pieces(); ++i) diff.values[i] = qmu.values[i] - qnu.values[i];
    const QuantileFunction pooled = isotonic_projection(diff);

    std::vector<double> values(qnu.pieces());
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = qnu.values[i] + pooled.values[i];
    // Sum of two nondecreasing sequences; monotone even in floating point.
    return measure_from_quantile(make_quantile(qnu.breaks, std::move(values)));
}

DiscreteMeasure forward_project(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                const SolverConfig& cfg) {
    if (mu.dim() != nu.dim()) throw DimensionMismatch("forward_project: dimension mismatch");
    const double t = cfg.t_pipeline;
    if (!(t > 1.0)) throw TimeNotGreaterThanOne("forward pipeline needs t > 1");
    const double theta = (t - 1.0) / t;

    const DiscreteMeasure nu1 = dilate(mu, theta);
    if (mu.dim() == 1) {
        // The geodesic between nu and the extrapolation is quantile
        // interpolation. Staying on the quantile grid end to end avoids the
        // sqrt(ulp) mass noise that splitting plan entries or re-deriving
        // breakpoints from a measure would introduce.
        const QuantileFunction qe = extrapolate_1d_quantile(nu, nu1, t);
        auto [qn, qe_r] = common_refinement(quantile_of(nu), qe);
        std::vector<double> vals(qn.pieces());
        for (std::size_t i = 0; i < vals.size(); ++i)
            vals[i] = (theta * qn.values[i] + qe_r.values[i] / t) / theta;
        return measure_from_quantile(make_quantile(qn.breaks, std::move(vals)));
    }

    // General dimension. The extrapolation reduces to the backward
    // projection of mu itself (the dilations cancel), with conditional means
    // z and displacement samples g_i = mu_i - z_i; the extrapolation atoms
    // are (t-1) g_i and the pipeline output atoms are y_j + g_i over the
    // support of an optimal nu -> E coupling. That coupling's optimal face
    // does not depend on t (the cost differs from -<y, g> by terms fixed by
    // the marginals), but it is genuinely non-unique whenever the projection
    // pools atoms: the weak-transport optimality conditions tie the costs of
    // whole families of plans. Selecting the vertex by the t-free
    // correlation cost resolves the tie identically for every t.
    const BackwardSolution back = backward_project(mu, nu, cfg);
    const std::size_t n = mu.size(), m = nu.size();
    const std::size_t d = static_cast<std::size_t>(mu.dim());
    std::vector<double> g(n * d);
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = mu.atom(i);
        const auto z = back.map.point(i);
        for (std::size_t k = 0; k < d; ++k) g[i * d + k] = x[k] - z[k];
    }
    std::vector<double> cost(m * n);
    for (std::size_t j = 0; j < m; ++j) {
        const auto y = nu.atom(j);
        for (std::size_t i = 0; i < n; ++i) {
            double corr = 0.0;
            for (std::size_t k = 0; k < d; ++k) corr += y[k] * g[i * d + k];
            cost[j * n + i] = -corr;
        }
    }
    const TransportSolution plan = solve_transport(nu.weights(), mu.weights(), cost);

    std::vector<double> coords;
    std::vector<double> weights;
    for (std::size_t j = 0; j < m; ++j) {
        const auto y = nu.atom(j);
        for (std::size_t i = 0; i < n; ++i) {
            const double p = plan.plan[j * n + i];
            if (p <= 0.0) continue;
            for (std::size_t k = 0; k < d; ++k) coords.push_back(y[k] + g[i * d + k]);
            weights.push_back(p);
        }
    }
    return DiscreteMeasure(mu.dim(), std::move(coords), std::move(weights));
}

} // namespace wproj
