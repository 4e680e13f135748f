#include "wproj/oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "wproj/errors.hpp"
#include "wproj/extrapolation.hpp"
#include "wproj/numeric.hpp"
#include "wproj/qp.hpp"
#include "wproj/rng.hpp"

namespace wproj {

namespace {

// Free-variable parameterization of Pi(a, b): the (n-1) x (m-1) block is
// free, the last row/column absorb the marginals.
struct PlanParam {
    std::size_t n, m;
    std::vector<double> a, b;

    std::size_t dof() const { return (n - 1) * (m - 1); }

    // Fills `plan` (n*m) from free variables; returns the worst negativity.
    double expand(std::span<const double> p, std::vector<double>& plan) const {
        double worst = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            double row_rest = a[i];
            for (std::size_t j = 0; j + 1 < m; ++j) {
                const double v = p[i * (m - 1) + j];
                plan[i * m + j] = v;
                row_rest -= v;
                worst = std::min(worst, v);
            }
            plan[i * m + (m - 1)] = row_rest;
            worst = std::min(worst, row_rest);
        }
        for (std::size_t j = 0; j + 1 < m; ++j) {
            double col_rest = b[j];
            for (std::size_t i = 0; i + 1 < n; ++i) col_rest -= plan[i * m + j];
            plan[(n - 1) * m + j] = col_rest;
            worst = std::min(worst, col_rest);
        }
        double corner = b[m - 1];
        for (std::size_t i = 0; i + 1 < n; ++i) corner -= plan[i * m + (m - 1)];
        plan[(n - 1) * m + (m - 1)] = corner;
        worst = std::min(worst, corner);
        return worst;
    }
};

struct WeakObjective {
    const DiscreteMeasure* mu;
    const DiscreteMeasure* nu;

    double eval(const std::vector<double>& plan) const {
        const std::size_t n = mu->size(), m = nu->size();
        const std::size_t d = static_cast<std::size_t>(mu->dim());
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto x = mu->atom(i);
            const double ai = mu->weight(i);
            for (std::size_t k = 0; k < d; ++k) {
                double zk = 0.0;
                for (std::size_t j = 0; j < m; ++j) zk += plan[i * m + j] * nu->atom(j)[k];
                zk /= ai;
                const double diff = x[k] - zk;
                total += ai * diff * diff;
            }
        }
        return total;
    }
};

DiscreteMeasure measure_from_plan(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                  std::vector<double> plan) {
    const std::size_t n = mu.size(), m = nu.size();
    const std::size_t d = static_cast<std::size_t>(mu.dim());
    for (double& p : plan) p = std::max(0.0, p);
    std::vector<double> z(n * d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < d; ++k) {
            double zk = 0.0;
            for (std::size_t j = 0; j < m; ++j) zk += plan[i * m + j] * nu.atom(j)[k];
            z[i * d + k] = zk / mu.weight(i);
        }
    }
    return DiscreteMeasure(mu.dim(), std::move(z), mu.weights());
}

// All nonzero sign patterns over the free variables; covers every edge
// direction of the transportation polytope restricted to the free block.
std::vector<std::vector<double>> sign_patterns(std::size_t dof) {
    std::vector<std::vector<double>> dirs;
    std::vector<double> cur(dof, 0.0);
    const std::size_t total = static_cast<std::size_t>(std::pow(3.0, static_cast<double>(dof)));
    for (std::size_t code = 1; code < total; ++code) {
        std::size_t c = code;
        bool nonzero = false;
        for (std::size_t k = 0; k < dof; ++k) {
            const std::size_t digit = c % 3;
            c /= 3;
            cur[k] = digit == 0 ? 0.0 : (digit == 1 ? 1.0 : -1.0);
            nonzero |= digit != 0;
        }
        if (nonzero) dirs.push_back(cur);
    }
    return dirs;
}

} // namespace

DiscreteMeasure brute_force_backward_grid(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                          std::size_t grid_mult, bool refine) {
    if (mu.dim() != nu.dim()) throw DimensionMismatch("oracle: dimension mismatch");
    const std::size_t n = mu.size(), m = nu.size();
    if (n * m > 9)
        throw TooLarge("brute_force_backward limited to n*m <= 9 (got " + std::to_string(n * m) + ")");

    PlanParam par{n, m, mu.weights(), nu.weights()};
    WeakObjective obj{&mu, &nu};
    const std::size_t dof = par.dof();
    std::vector<double> plan(n * m, 0.0);

    if (dof == 0) {
        par.expand({}, plan);
        return measure_from_plan(mu, nu, std::move(plan));
    }

    // Per-variable upper bounds min(a_i, b_j).
    std::vector<double> ub(dof);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        for (std::size_t j = 0; j + 1 < m; ++j)
            ub[i * (m - 1) + j] = std::min(mu.weight(i), nu.weight(j));
    }

    // Segment counts are powers of two so grid_mult in {1,2,4,...} gives
    // nested grids (used by the refinement-convergence check).
    std::size_t base_segments = 0;
    switch (dof) {
        case 1: base_segments = 256; break;
        case 2: base_segments = 64; break;
        case 3: base_segments = 16; break;
        default: base_segments = 8; break;
    }
    const std::size_t pts = base_segments * std::max<std::size_t>(1, grid_mult) + 1;
    const double feas_tol = 1e-12;

    std::vector<double> best_p(dof, 0.0);
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> idx(dof, 0);
    std::vector<double> p(dof, 0.0);
    while (true) {
        for (std::size_t k = 0; k < dof; ++k)
            p[k] = ub[k] * static_cast<double>(idx[k]) / static_cast<double>(pts - 1);
        if (par.expand(p, plan) >= -feas_tol) {
            const double v = obj.eval(plan);
            if (v < best_val) {
                best_val = v;
                best_p = p;
            }
        }
        std::size_t k = 0;
        while (k < dof && ++idx[k] == pts) {
            idx[k] = 0;
            ++k;
        }
        if (k == dof) break;
    }
    // Skewed marginals can make the feasible slab thinner than the lattice
    // spacing; seed with the (always feasible) northwest-corner plan too.
    {
        std::vector<double> nw(n * m, 0.0);
        std::size_t i = 0, j = 0;
        double ra = mu.weight(0), rb = nu.weight(0);
        while (i < n && j < m) {
            const double q = std::max(0.0, std::min(ra, rb));
            nw[i * m + j] = q;
            ra -= q;
            rb -= q;
            if (ra <= rb) {
                ++i;
                if (i < n) ra = mu.weight(i);
            } else {
                ++j;
                if (j < m) rb = nu.weight(j);
            }
        }
        std::vector<double> p_nw(dof);
        for (std::size_t r = 0; r + 1 < n; ++r)
            for (std::size_t c = 0; c + 1 < m; ++c) p_nw[r * (m - 1) + c] = nw[r * m + c];
        if (par.expand(p_nw, plan) >= -feas_tol) {
            const double v = obj.eval(plan);
            if (v < best_val) {
                best_val = v;
                best_p = p_nw;
            }
        }
    }
    if (!std::isfinite(best_val)) throw SolverFailure("oracle could not find a feasible plan");

    if (refine) {
        // Pattern search over sign-pattern directions with shrinking radius.
        const auto dirs = sign_patterns(dof);
        double ub_max = 0.0;
        for (double u : ub) ub_max = std::max(ub_max, u);
        double h = ub_max / 4.0;
        const double h_min = 1e-13 * (1.0 + ub_max);
        std::vector<double> cand(dof);
        while (h > h_min) {
            bool improved = false;
            double round_best = best_val;
            std::vector<double> round_p = best_p;
            for (const auto& dir : dirs) {
                for (std::size_t k = 0; k < dof; ++k) cand[k] = best_p[k] + h * dir[k];
                if (par.expand(cand, plan) < -feas_tol) continue;
                const double v = obj.eval(plan);
                if (v < round_best) {
                    round_best = v;
                    round_p = cand;
                    improved = true;
                }
            }
            if (improved) {
                best_val = round_best;
                best_p = std::move(round_p);
            } else {
                h *= 0.5;
            }
        }
    }

    par.expand(best_p, plan);
    return measure_from_plan(mu, nu, std::move(plan));
}

DiscreteMeasure brute_force_backward(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    return brute_force_backward_grid(mu, nu, 1, true);
}

namespace {

// Exact tiny transportation solve by enumerating spanning-tree vertices of
// the bipartite graph (81 trees for 3x3). Independent of the network simplex
// and free of its pricing tolerance: the oracle differences these values at
// resolutions where solver jitter would read as landscape noise.
struct TinyTrees {
    // trees[n][m]: list of trees; each tree is a list of cells i*m+j.
    std::vector<std::vector<std::size_t>> trees[4][4];

    TinyTrees() {
        for (std::size_t n = 1; n <= 3; ++n) {
            for (std::size_t m = 1; m <= 3; ++m) {
                const std::size_t cells = n * m, need = n + m - 1;
                std::vector<std::size_t> pick;
                std::vector<std::size_t> parent(n + m);
                std::function<void(std::size_t)> rec = [&](std::size_t from) {
                    if (pick.size() == need) {
                        // union-find acyclic + spanning check
                        for (std::size_t v = 0; v < n + m; ++v) parent[v] = v;
                        std::function<std::size_t(std::size_t)> find = [&](std::size_t v) {
                            while (parent[v] != v) v = parent[v] = parent[parent[v]];
                            return v;
                        };
                        std::size_t merges = 0;
                        for (std::size_t cell : pick) {
                            const std::size_t a = cell / m, b = n + cell % m;
                            const std::size_t ra = find(a), rb = find(b);
                            if (ra == rb) return;
                            parent[ra] = rb;
                            ++merges;
                        }
                        if (merges == need) trees[n][m].push_back(pick);
                        return;
                    }
                    if (from >= cells || cells - from < need - pick.size()) return;
                    pick.push_back(from);
                    rec(from + 1);
                    pick.pop_back();
                    rec(from + 1);
                };
                rec(0);
            }
        }
    }
};

const TinyTrees& tiny_trees() {
    static const TinyTrees t;
    return t;
}

// Exact W2^2 between measures with <= 3 atoms each; optionally returns the
// optimal plan (n x m row-major).
double tiny_w2_sq(const DiscreteMeasure& a, const DiscreteMeasure& b,
                  std::vector<double>* plan_out = nullptr) {
    const std::size_t n = a.size(), m = b.size();
    std::array<double, 9> cost{};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) cost[i * m + j] = squared_distance(a.atom(i), b.atom(j));

    const auto& trees = tiny_trees().trees[n][m];
    double best = std::numeric_limits<double>::infinity();
    const std::vector<std::size_t>* best_tree = nullptr;
    std::array<double, 9> flows{}, best_flows{};
    std::array<double, 6> req{};
    std::array<int, 6> degree{};
    for (const auto& tree : trees) {
        for (std::size_t i = 0; i < n; ++i) req[i] = a.weight(i);
        for (std::size_t j = 0; j < m; ++j) req[n + j] = b.weight(j);
        degree.fill(0);
        for (std::size_t cell : tree) {
            ++degree[cell / m];
            ++degree[n + cell % m];
        }
        // Peel leaves; tree edge count is n+m-1 <= 5.
        std::array<char, 9> done{};
        bool feasible = true;
        for (std::size_t round = 0; round < tree.size(); ++round) {
            for (std::size_t e = 0; e < tree.size(); ++e) {
                if (done[e]) continue;
                const std::size_t cell = tree[e];
                const std::size_t ri = cell / m, cj = n + cell % m;
                std::size_t leaf = 0, other = 0;
                if (degree[ri] == 1) {
                    leaf = ri;
                    other = cj;
                } else if (degree[cj] == 1) {
                    leaf = cj;
                    other = ri;
                } else {
                    continue;
                }
                const double f = req[leaf];
                if (f < -1e-14) feasible = false;
                flows[e] = std::max(0.0, f);
                req[other] -= f;
                req[leaf] = 0.0;
                --degree[leaf];
                --degree[other];
                done[e] = 1;
                break;
            }
            if (!feasible) break;
        }
        if (!feasible) continue;
        double c = 0.0;
        for (std::size_t e = 0; e < tree.size(); ++e) c += flows[e] * cost[tree[e]];
        if (c < best) {
            best = c;
            best_tree = &tree;
            best_flows = flows;
        }
    }
    if (plan_out && best_tree) {
        plan_out->assign(n * m, 0.0);
        for (std::size_t e = 0; e < best_tree->size(); ++e)
            (*plan_out)[(*best_tree)[e]] = best_flows[e];
    }
    return best;
}

} // namespace

DiscreteMeasure brute_force_extrapolation(const DiscreteMeasure& nu0, const DiscreteMeasure& nu1,
                                          double t) {
    if (nu0.dim() != nu1.dim()) throw DimensionMismatch("oracle: dimension mismatch");
    if (!(t > 1.0)) throw TimeNotGreaterThanOne("extrapolation time must exceed 1");
    if (nu1.size() > 3 || nu1.dim() > 2)
        throw TooLarge("brute_force_extrapolation limited to <= 3 atoms in dim <= 2");

    const std::size_t d = static_cast<std::size_t>(nu1.dim());
    const std::size_t vars = nu1.size() * d;
    const bool tiny = nu0.size() <= 3;

    auto value = [&](const std::vector<double>& q) {
        const DiscreteMeasure rho(nu1.dim(), q, nu1.weights());
        if (tiny) {
            return tiny_w2_sq(rho, nu1) / (2.0 * (t - 1.0)) - tiny_w2_sq(rho, nu0) / (2.0 * t);
        }
        return extrapolation_functional(rho, nu0, nu1, t);
    };

    double spread = 1.0;
    for (std::size_t i = 0; i < nu0.size(); ++i)
        for (std::size_t k = 0; k < d; ++k) spread = std::max(spread, std::abs(nu0.atom(i)[k]));
    for (std::size_t i = 0; i < nu1.size(); ++i)
        for (std::size_t k = 0; k < d; ++k) spread = std::max(spread, std::abs(nu1.atom(i)[k]));
    spread *= t;

    const std::vector<double> identity(nu1.coords());
    std::vector<double> best_q = identity;
    double best_val = value(best_q);

    // The minimizer is a pushforward of nu1, with every output atom of the
    // form t x_i + (1-t) z_i for some z_i in the convex hull of nu0's atoms.
    // The functional is a difference of convex terms, so local descent alone
    // can hang in a wrong basin: descent starts combine the 32 deterministic
    // multistarts (identity, anchor assignments, random hull anchors) with
    // the best points of a coarse lattice scan over the anchor box.
    const std::size_t n1 = nu1.size(), n0 = nu0.size();
    const Moments m0 = moments(nu0);
    std::size_t combos = 1;
    for (std::size_t i = 0; i < n1; ++i) combos *= n0;

    auto anchored = [&](std::size_t i, std::span<const double> z, std::vector<double>& q) {
        for (std::size_t k = 0; k < d; ++k)
            q[i * d + k] = t * nu1.atom(i)[k] + (1.0 - t) * z[k];
    };

    std::vector<std::vector<double>> starts;
    constexpr std::size_t kStarts = 32;
    for (std::size_t s = 0; s < kStarts; ++s) {
        RandomStream rng(RandomStream::derive(0x6f7261636cULL, "bf-extra", s));
        std::vector<double> q(vars);
        if (s == 0) {
            q = identity;
        } else if (s == 1) {
            for (std::size_t i = 0; i < n1; ++i)
                anchored(i, std::span<const double>(m0.mean), q);
        } else if (s - 2 < combos) {
            std::size_t code = s - 2;
            for (std::size_t i = 0; i < n1; ++i) {
                anchored(i, nu0.atom(code % n0), q);
                code /= n0;
            }
        } else if (s % 2 == 0) {
            // Means of random nu0 subsets: pooled conditional anchors.
            for (std::size_t i = 0; i < n1; ++i) {
                std::vector<double> z(d, 0.0);
                double total = 0.0;
                for (std::size_t j = 0; j < n0; ++j) {
                    if (rng.next_double() < 0.5 || (j + 1 == n0 && total == 0.0)) {
                        for (std::size_t k = 0; k < d; ++k) z[k] += nu0.atom(j)[k];
                        total += 1.0;
                    }
                }
                for (double& c : z) c /= total;
                anchored(i, z, q);
            }
        } else {
            // Random convex combinations of nu0 atoms as anchors.
            for (std::size_t i = 0; i < n1; ++i) {
                std::vector<double> z(d, 0.0);
                double total = 0.0;
                std::vector<double> wts(n0);
                for (double& w : wts) {
                    w = -std::log(1.0 - rng.next_double());
                    total += w;
                }
                for (std::size_t j = 0; j < n0; ++j)
                    for (std::size_t k = 0; k < d; ++k) z[k] += wts[j] / total * nu0.atom(j)[k];
                anchored(i, z, q);
            }
            const double radius = 0.2 * spread * rng.next_double();
            for (double& c : q) c += rng.uniform(-radius, radius);
        }
        starts.push_back(std::move(q));
    }

    // Anchor-combination scan. The minimizer's conditional means live in the
    // convex hull of nu0's atoms, and pooling makes them block barycenters:
    // enumerate per-atom anchors (atoms, pairwise blends, centroid) and keep
    // the best combinations as additional descent starts.
    {
        std::vector<std::vector<double>> anchors;
        for (std::size_t j = 0; j < n0; ++j)
            anchors.emplace_back(nu0.atom(j).begin(), nu0.atom(j).end());
        for (std::size_t a = 0; a < n0; ++a) {
            for (std::size_t b = a + 1; b < n0; ++b) {
                for (double lam : {0.25, 0.5, 0.75}) {
                    std::vector<double> z(d);
                    for (std::size_t k = 0; k < d; ++k)
                        z[k] = lam * nu0.atom(a)[k] + (1.0 - lam) * nu0.atom(b)[k];
                    anchors.push_back(std::move(z));
                }
            }
        }
        if (n0 > 2) anchors.emplace_back(m0.mean);

        const std::size_t na = anchors.size();
        std::size_t combos2 = 1;
        for (std::size_t i = 0; i < n1; ++i) combos2 *= na;
        std::vector<double> q(vars);
        std::vector<std::pair<double, std::vector<double>>> top;
        for (std::size_t code = 0; code < combos2; ++code) {
            std::size_t c = code;
            for (std::size_t i = 0; i < n1; ++i) {
                anchored(i, anchors[c % na], q);
                c /= na;
            }
            top.emplace_back(value(q), q);
            std::push_heap(top.begin(), top.end());
            if (top.size() > 8) {
                std::pop_heap(top.begin(), top.end());
                top.pop_back();
            }
        }
        for (auto& [fv, qv] : top) starts.push_back(std::move(qv));
    }

    // Finite-difference descent with backtracking and adaptive steps.
    auto descend = [&](std::vector<double> q, double fq, std::size_t max_iters) {
        const double fd_h = 1e-6 * (1.0 + spread);
        std::vector<double> gradient(vars), trial(vars);
        double step = 0.5;
        std::size_t flat_rounds = 0;
        for (std::size_t it = 0; it < max_iters && flat_rounds < 3; ++it) {
            double gnorm = 0.0;
            for (std::size_t k = 0; k < vars; ++k) {
                trial = q;
                trial[k] = q[k] + fd_h;
                const double fp = value(trial);
                trial[k] = q[k] - fd_h;
                const double fm = value(trial);
                gradient[k] = (fp - fm) / (2.0 * fd_h);
                gnorm += gradient[k] * gradient[k];
            }
            gnorm = std::sqrt(gnorm);
            if (gnorm < 1e-12) break;
            step = std::min(2.0 * step, 1.0);
            bool moved = false;
            for (std::size_t bt = 0; bt < 24; ++bt) {
                for (std::size_t k = 0; k < vars; ++k) trial[k] = q[k] - step * gradient[k];
                const double ft = value(trial);
                if (ft < fq - 4e-16 * (1.0 + std::abs(fq))) {
                    // Parabolic refinement along the same ray; plain
                    // first-improvement zigzags down shallow valleys.
                    const double f0 = fq, f1 = ft;
                    for (std::size_t k = 0; k < vars; ++k)
                        trial[k] = q[k] - 2.0 * step * gradient[k];
                    const double f2 = value(trial);
                    double s_best = step, f_best = f1;
                    if (f2 < f_best) {
                        s_best = 2.0 * step;
                        f_best = f2;
                    }
                    const double curv = f0 - 2.0 * f1 + f2;
                    if (curv > 0.0) {
                        const double s_star =
                            std::clamp(step * (1.0 + 0.5 * (f0 - f2) / curv), 0.25 * step,
                                       4.0 * step);
                        if (std::isfinite(s_star)) {
                            for (std::size_t k = 0; k < vars; ++k)
                                trial[k] = q[k] - s_star * gradient[k];
                            const double fs = value(trial);
                            if (fs < f_best) {
                                s_best = s_star;
                                f_best = fs;
                            }
                        }
                    }
                    for (std::size_t k = 0; k < vars; ++k) q[k] -= s_best * gradient[k];
                    fq = f_best;
                    step = std::clamp(s_best, 1e-9, 1.0);
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if (!moved) {
                ++flat_rounds;
            } else {
                flat_rounds = 0;
            }
        }
        if (fq < best_val) {
            best_val = fq;
            best_q = std::move(q);
        }
    };

    for (const std::vector<double>& start : starts) descend(start, value(start), 120);

    // Derivative-free polish around the best point. The functional is only
    // piecewise smooth in the atom positions; paired directions step across
    // the kinks where single-coordinate moves stall. Bounded effort. A
    // second descent from the polished point finishes the smooth tail.
    for (int cycle = 0; cycle < 2; ++cycle) {
        std::vector<std::vector<double>> dirs;
        for (std::size_t k = 0; k < vars; ++k) {
            for (double sgn : {1.0, -1.0}) {
                std::vector<double> e(vars, 0.0);
                e[k] = sgn;
                dirs.push_back(std::move(e));
            }
        }
        for (std::size_t k = 0; k < vars; ++k) {
            for (std::size_t l = k + 1; l < vars; ++l) {
                for (double sk : {1.0, -1.0}) {
                    for (double sl : {1.0, -1.0}) {
                        std::vector<double> e(vars, 0.0);
                        e[k] = sk;
                        e[l] = sl;
                        dirs.push_back(std::move(e));
                    }
                }
            }
        }
        std::vector<double> trial(vars);
        double h = 1e-3 * (1.0 + spread);
        const double h_min = 1e-9 * (1.0 + spread);
        while (h > h_min) {
            for (std::size_t round = 0; round < 32; ++round) {
                bool round_improved = false;
                for (const auto& dir : dirs) {
                    for (std::size_t k = 0; k < vars; ++k) trial[k] = best_q[k] + h * dir[k];
                    const double ft = value(trial);
                    if (ft < best_val - 1e-18) {
                        best_val = ft;
                        best_q = trial;
                        round_improved = true;
                    }
                }
                if (!round_improved) break;
            }
            h *= 0.5;
        }
        descend(best_q, best_val, 800);
    }

    // Frozen-plan quadratic refinement: with both transport plans held
    // fixed, the functional is a strictly convex quadratic whose exact
    // minimizer is q_i = t x_i + (1-t) z_i for the current conditional
    // means z. Steps are accepted only when the directly evaluated
    // functional improves, so a wrong model cannot mask the landscape.
    // Conditional means of a plan from rho to nu0, row-major n1 x |nu0|.
    auto plan_means = [&](const std::vector<double>& plan) {
        std::vector<double> z(vars, 0.0);
        for (std::size_t i = 0; i < n1; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < n0; ++j) row += plan[i * n0 + j];
            for (std::size_t j = 0; j < n0; ++j) {
                for (std::size_t k = 0; k < d; ++k)
                    z[i * d + k] += plan[i * n0 + j] * nu0.atom(j)[k] / row;
            }
        }
        return z;
    };
    auto optimal_plan = [&](const std::vector<double>& q) {
        const DiscreteMeasure rho(nu1.dim(), q, nu1.weights());
        std::vector<double> plan;
        if (tiny) {
            tiny_w2_sq(rho, nu0, &plan);
        } else {
            plan = w2_lp(rho, nu0).coupling.plan;
        }
        return plan;
    };

    auto frozen_plan_refine = [&]() {
        std::vector<double> q = best_q;
        for (std::size_t it = 0; it < 64; ++it) {
            const std::vector<double> zq = plan_means(optimal_plan(q));
            std::vector<double> q_new(vars);
            for (std::size_t i = 0; i < n1; ++i) {
                for (std::size_t k = 0; k < d; ++k)
                    q_new[i * d + k] = t * nu1.atom(i)[k] + (1.0 - t) * zq[i * d + k];
            }
            const double f_new = value(q_new);
            if (f_new < best_val - 1e-18) {
                best_val = f_new;
                best_q = q_new;
                q = std::move(q_new);
            } else {
                break;
            }
        }
    };
    frozen_plan_refine();

    // Tie-blend refinement: at a plan-switch kink the stationary point uses
    // a convex combination of the tied plans' conditional means. Collect the
    // plans active around the current point and search the blends directly.
    auto tie_blend_round = [&]() -> bool {
        std::vector<std::vector<double>> zs; // candidate conditional-mean maps
        auto add_plan_of = [&](const std::vector<double>& q) {
            const std::vector<double> zq = plan_means(optimal_plan(q));
            for (const auto& known : zs) {
                double diff = 0.0;
                for (std::size_t c = 0; c < vars; ++c)
                    diff = std::max(diff, std::abs(known[c] - zq[c]));
                if (diff < 1e-12 * (1.0 + spread)) return;
            }
            zs.push_back(zq);
        };
        add_plan_of(best_q);
        std::vector<double> q = best_q;
        RandomStream probe_rng(RandomStream::derive(0x6f7261636cULL, "bf-extra-probe", 1));
        for (double h : {5e-3 * (1.0 + spread), 1e-3 * (1.0 + spread),
                         2e-4 * (1.0 + spread), 5e-5 * (1.0 + spread)}) {
            for (std::size_t k = 0; k < vars; ++k) {
                for (double sgn : {1.0, -1.0}) {
                    q = best_q;
                    q[k] += sgn * h;
                    add_plan_of(q);
                }
            }
            for (std::size_t r = 0; r < 16; ++r) {
                q = best_q;
                double norm = 0.0;
                std::vector<double> dir(vars);
                for (double& c : dir) {
                    c = probe_rng.uniform(-1.0, 1.0);
                    norm += c * c;
                }
                norm = std::sqrt(norm);
                for (std::size_t c = 0; c < vars; ++c) q[c] += h * dir[c] / norm;
                add_plan_of(q);
            }
            if (zs.size() >= 10) break;
        }
        if (zs.size() < 2) return false;

        // Optimize a full convex blend of the collected conditional-mean
        // maps by pairwise golden-section sweeps over the weight simplex
        // (the optimum blends every tied plan, not just two).
        const std::size_t K = zs.size();
        std::vector<double> lambda(K, 0.0);
        std::vector<double> blend(vars), cand(vars);
        auto eval_weights = [&](const std::vector<double>& w) {
            std::fill(blend.begin(), blend.end(), 0.0);
            for (std::size_t s = 0; s < K; ++s) {
                if (w[s] == 0.0) continue;
                for (std::size_t c = 0; c < vars; ++c) blend[c] += w[s] * zs[s][c];
            }
            for (std::size_t i = 0; i < n1; ++i) {
                for (std::size_t k = 0; k < d; ++k)
                    cand[i * d + k] = t * nu1.atom(i)[k] + (1.0 - t) * blend[i * d + k];
            }
            return value(cand);
        };
        // Start from the best single map.
        double f_cur = std::numeric_limits<double>::infinity();
        std::size_t best_single = 0;
        for (std::size_t s = 0; s < K; ++s) {
            std::vector<double> w(K, 0.0);
            w[s] = 1.0;
            const double fs = eval_weights(w);
            if (fs < f_cur) {
                f_cur = fs;
                best_single = s;
            }
        }
        lambda[best_single] = 1.0;

        const double gr = 0.6180339887498949;
        std::vector<double> w_try(K);
        for (std::size_t sweep = 0; sweep < 8; ++sweep) {
            bool improved = false;
            for (std::size_t a = 0; a < K; ++a) {
                for (std::size_t b = a + 1; b < K; ++b) {
                    auto eval_s = [&](double s_val) {
                        w_try = lambda;
                        const double total = lambda[a] + lambda[b];
                        w_try[a] = s_val;
                        w_try[b] = std::max(0.0, total - s_val);
                        return eval_weights(w_try);
                    };
                    double lo = 0.0, hi = lambda[a] + lambda[b];
                    if (hi <= 0.0) continue;
                    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
                    double f1 = eval_s(x1), f2 = eval_s(x2);
                    for (int it = 0; it < 40; ++it) {
                        if (f1 < f2) {
                            hi = x2;
                            x2 = x1;
                            f2 = f1;
                            x1 = hi - gr * (hi - lo);
                            f1 = eval_s(x1);
                        } else {
                            lo = x1;
                            x1 = x2;
                            f1 = f2;
                            x2 = lo + gr * (hi - lo);
                            f2 = eval_s(x2);
                        }
                    }
                    const double s_opt = f1 < f2 ? x1 : x2;
                    const double f_opt = std::min(f1, f2);
                    if (f_opt < f_cur - 1e-18) {
                        const double total = lambda[a] + lambda[b];
                        lambda[a] = s_opt;
                        lambda[b] = std::max(0.0, total - s_opt);
                        f_cur = f_opt;
                        improved = true;
                    }
                }
            }
            if (!improved) break;
        }
        if (f_cur < best_val - 1e-18) {
            eval_weights(lambda);
            best_val = f_cur;
            best_q = cand;
            return true;
        }
        return false;
    };
    // The active tie set changes as the point moves: re-collect and re-blend.
    auto tie_blend_refine = [&]() {
        for (int round = 0; round < 4; ++round) {
            if (!tie_blend_round()) break;
        }
    };
    tie_blend_refine();

    // Cutting-plane refinement. Near the optimum (nu1-plan = identity) the
    // functional is (1/2) q^T H q + max_P (a_P . q + b_P) over classical
    // plans P of the nu0 term, with one shared Hessian H = diag(w/(t(t-1))):
    // Kelley's method with the exact dual QP over the plan simplex converges
    // finitely. Steps are still accepted only on directly evaluated
    // improvement, so the quadratic model cannot overrule the landscape.
    auto cutting_plane_refine = [&]() {
        std::vector<std::vector<double>> a_vecs; // linear coefficients per plan
        std::vector<double> b_vals;              // constant terms per plan
        std::vector<std::vector<double>> plan_sigs;

        auto add_cut = [&](const std::vector<double>& q) -> bool {
            std::vector<double> plan = optimal_plan(q);
            for (const auto& known : plan_sigs) {
                double diff = 0.0;
                for (std::size_t c = 0; c < plan.size(); ++c)
                    diff = std::max(diff, std::abs(known[c] - plan[c]));
                if (diff < 1e-13) return false;
            }
            std::vector<double> a(vars);
            double s_p = 0.0;
            for (std::size_t i = 0; i < n1; ++i) {
                const double wi = nu1.weight(i);
                for (std::size_t k = 0; k < d; ++k) {
                    double m_ik = 0.0;
                    for (std::size_t j = 0; j < n0; ++j)
                        m_ik += plan[i * n0 + j] * nu0.atom(j)[k];
                    a[i * d + k] = -(wi * nu1.atom(i)[k] / (t - 1.0) - m_ik / t);
                }
            }
            for (std::size_t j = 0; j < n0; ++j) {
                double col = 0.0;
                for (std::size_t i = 0; i < n1; ++i) col += plan[i * n0 + j];
                s_p += col * squared_norm(nu0.atom(j));
            }
            double bx = 0.0;
            for (std::size_t i = 0; i < n1; ++i)
                bx += nu1.weight(i) * squared_norm(nu1.atom(i));
            b_vals.push_back(bx / (2.0 * (t - 1.0)) - s_p / (2.0 * t));
            a_vecs.push_back(std::move(a));
            plan_sigs.push_back(std::move(plan));
            return true;
        };

        std::vector<double> hinv(vars); // H^-1 diagonal
        for (std::size_t i = 0; i < n1; ++i) {
            for (std::size_t k = 0; k < d; ++k)
                hinv[i * d + k] = t * (t - 1.0) / nu1.weight(i);
        }

        // Cuts are valid under-estimators only while the nu1-plan stays the
        // identity, so the model is trusted locally: cuts come from probes
        // around the incumbent and every dual step is re-evaluated directly.
        std::vector<double> q_new(vars);
        RandomStream cut_rng(RandomStream::derive(0x6f7261636cULL, "bf-extra-cuts", 2));
        for (std::size_t round = 0; round < 6; ++round) {
            a_vecs.clear();
            b_vals.clear();
            plan_sigs.clear();
            add_cut(best_q);
            for (double h : {2e-3 * (1.0 + spread), 3e-4 * (1.0 + spread),
                             4e-5 * (1.0 + spread)}) {
                for (std::size_t k = 0; k < vars; ++k) {
                    for (double sgn : {1.0, -1.0}) {
                        q_new = best_q;
                        q_new[k] += sgn * h;
                        add_cut(q_new);
                    }
                }
                for (std::size_t r = 0; r < 12; ++r) {
                    q_new = best_q;
                    double norm = 0.0;
                    std::vector<double> dir(vars);
                    for (double& c : dir) {
                        c = cut_rng.uniform(-1.0, 1.0);
                        norm += c * c;
                    }
                    norm = std::sqrt(norm);
                    for (std::size_t c = 0; c < vars; ++c) q_new[c] += h * dir[c] / norm;
                    add_cut(q_new);
                }
            }
            const std::size_t K = a_vecs.size();
            if (K < 2) break;
            // Dual QP: minimize (1/2) lam^T (A^T H^-1 A) lam - b . lam.
            std::vector<double> Hl(K * K), gl(K);
            for (std::size_t p = 0; p < K; ++p) {
                for (std::size_t r = p; r < K; ++r) {
                    double s = 0.0;
                    for (std::size_t c = 0; c < vars; ++c)
                        s += a_vecs[p][c] * hinv[c] * a_vecs[r][c];
                    Hl[p * K + r] = Hl[r * K + p] = s;
                }
                gl[p] = -b_vals[p];
            }
            std::vector<double> lam0(K, 0.0);
            lam0[0] = 1.0;
            const std::vector<double> lam = simplex_qp(Hl, gl, lam0);

            for (std::size_t c = 0; c < vars; ++c) {
                double g = 0.0;
                for (std::size_t p = 0; p < K; ++p) g += lam[p] * a_vecs[p][c];
                q_new[c] = -hinv[c] * g;
            }
            const double f_new = value(q_new);
            if (f_new < best_val - 1e-18) {
                best_val = f_new;
                best_q = q_new;
            } else {
                break;
            }
        }
    };
    cutting_plane_refine();

    // Nelder-Mead finisher: the functional is piecewise smooth and its
    // minimizer often sits on a plan-switch kink where gradient and
    // coordinate steps both stall; the simplex contracts along the kink.
    // Restarted with shrinking spans and randomized orientations, which
    // keeps a fresh simplex from collapsing straight back onto the kink.
    std::size_t restart = 0;
    for (double h0_scale : {3e-2, 3e-3, 3e-4, 3e-5}) {
        ++restart;
        RandomStream nm_rng(RandomStream::derive(0x6f7261636cULL, "bf-extra-nm", restart));
        const std::size_t np = vars + 1;
        std::vector<std::vector<double>> simplex(np, best_q);
        std::vector<double> fvals(np);
        const double h0 = h0_scale * (1.0 + spread);
        fvals[0] = best_val;
        for (std::size_t v = 0; v < vars; ++v) {
            if (restart == 1) {
                simplex[v + 1][v] += h0;
            } else {
                double norm = 0.0;
                std::vector<double> dir(vars);
                for (double& c : dir) {
                    c = nm_rng.uniform(-1.0, 1.0);
                    norm += c * c;
                }
                norm = std::sqrt(norm);
                for (std::size_t w = 0; w < vars; ++w) simplex[v + 1][w] += h0 * dir[w] / norm;
            }
            fvals[v + 1] = value(simplex[v + 1]);
        }
        std::vector<double> centroid(vars), refl(vars), exp_pt(vars), con(vars);
        for (std::size_t it = 0; it < 1500; ++it) {
            // Order: lo = best, hi = worst, second-worst.
            std::size_t lo = 0, hi = 0, second = 0;
            for (std::size_t i = 1; i < np; ++i) {
                if (fvals[i] < fvals[lo]) lo = i;
                if (fvals[i] > fvals[hi]) hi = i;
            }
            second = lo;
            for (std::size_t i = 0; i < np; ++i) {
                if (i != hi && fvals[i] > fvals[second]) second = i;
            }
            if (fvals[hi] - fvals[lo] < 1e-16 * (1.0 + std::abs(fvals[lo]))) break;

            for (std::size_t v = 0; v < vars; ++v) {
                double s = 0.0;
                for (std::size_t i = 0; i < np; ++i) {
                    if (i != hi) s += simplex[i][v];
                }
                centroid[v] = s / static_cast<double>(vars);
            }
            for (std::size_t v = 0; v < vars; ++v)
                refl[v] = centroid[v] + (centroid[v] - simplex[hi][v]);
            const double f_refl = value(refl);
            if (f_refl < fvals[lo]) {
                for (std::size_t v = 0; v < vars; ++v)
                    exp_pt[v] = centroid[v] + 2.0 * (centroid[v] - simplex[hi][v]);
                const double f_exp = value(exp_pt);
                if (f_exp < f_refl) {
                    simplex[hi] = exp_pt;
                    fvals[hi] = f_exp;
                } else {
                    simplex[hi] = refl;
                    fvals[hi] = f_refl;
                }
            } else if (f_refl < fvals[second]) {
                simplex[hi] = refl;
                fvals[hi] = f_refl;
            } else {
                const bool outside = f_refl < fvals[hi];
                for (std::size_t v = 0; v < vars; ++v) {
                    con[v] = outside ? centroid[v] + 0.5 * (refl[v] - centroid[v])
                                     : centroid[v] - 0.5 * (centroid[v] - simplex[hi][v]);
                }
                const double f_con = value(con);
                if (f_con < std::min(f_refl, fvals[hi])) {
                    simplex[hi] = con;
                    fvals[hi] = f_con;
                } else {
                    for (std::size_t i = 0; i < np; ++i) {
                        if (i == lo) continue;
                        for (std::size_t v = 0; v < vars; ++v)
                            simplex[i][v] = simplex[lo][v] + 0.5 * (simplex[i][v] - simplex[lo][v]);
                        fvals[i] = value(simplex[i]);
                    }
                }
            }
        }
        for (std::size_t i = 0; i < np; ++i) {
            if (fvals[i] < best_val) {
                best_val = fvals[i];
                best_q = simplex[i];
            }
        }
        frozen_plan_refine();
        tie_blend_refine();
        cutting_plane_refine();
    }

    return DiscreteMeasure(nu1.dim(), best_q, nu1.weights());
}

} // namespace wproj
