#include "wproj/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "wproj/errors.hpp"
#include "wproj/numeric.hpp"
#include "wproj/quantile.hpp"

namespace wproj {

namespace {

constexpr std::size_t kSizeLimit = 40000;

// Spanning-tree state for the transportation simplex. Nodes 0..n-1 are the
// supply side, n..n+m-1 the demand side; basic arcs form a tree rooted at 0.
struct TreeState {
    std::size_t n, m;
    std::vector<int> parent;      // node -> parent node, -1 at root
    std::vector<int> parent_cell; // node -> tableau cell of the arc to parent
    std::vector<int> depth;
    std::vector<double> u, v; // duals: u_i + v_j = c_ij on basic arcs

    explicit TreeState(std::size_t n_, std::size_t m_)
        : n(n_), m(m_), parent(n_ + m_), parent_cell(n_ + m_), depth(n_ + m_), u(n_), v(m_) {}

    void rebuild(const std::vector<char>& basic, std::span<const double> cost) {
        const std::size_t nodes = n + m;
        std::vector<std::vector<int>> adj(nodes);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                if (basic[i * m + j]) {
                    adj[i].push_back(static_cast<int>(n + j));
                    adj[n + j].push_back(static_cast<int>(i));
                }
            }
        }
        std::fill(parent.begin(), parent.end(), -2);
        std::vector<int> queue{0};
        parent[0] = -1;
        parent_cell[0] = -1;
        depth[0] = 0;
        u[0] = 0.0;
        for (std::size_t q = 0; q < queue.size(); ++q) {
            const int w = queue[q];
            for (int nb : adj[static_cast<std::size_t>(w)]) {
                if (parent[static_cast<std::size_t>(nb)] != -2) continue;
                parent[static_cast<std::size_t>(nb)] = w;
                depth[static_cast<std::size_t>(nb)] = depth[static_cast<std::size_t>(w)] + 1;
                const bool nb_is_col = static_cast<std::size_t>(nb) >= n;
                const std::size_t row = nb_is_col ? static_cast<std::size_t>(w)
                                                  : static_cast<std::size_t>(nb);
                const std::size_t col = nb_is_col ? static_cast<std::size_t>(nb) - n
                                                  : static_cast<std::size_t>(w) - n;
                const std::size_t cell = row * m + col;
                parent_cell[static_cast<std::size_t>(nb)] = static_cast<int>(cell);
                if (nb_is_col) {
                    v[col] = cost[cell] - u[row];
                } else {
                    u[row] = cost[cell] - v[col];
                }
                queue.push_back(nb);
            }
        }
        if (queue.size() != nodes) throw SolverFailure("transport basis is not a spanning tree");
    }
};

} // namespace

TransportSolution solve_transport(std::span<const double> supply, std::span<const double> demand,
                                  std::span<const double> cost) {
    const std::size_t n = supply.size();
    const std::size_t m = demand.size();
    if (n == 0 || m == 0) throw EmptySupport("transport with empty marginal");
    if (n * m > kSizeLimit)
        throw SizeLimitExceeded("transport instance " + std::to_string(n) + "x" + std::to_string(m) +
                                " exceeds the desk-scale limit");
    if (cost.size() != n * m) throw LengthMismatch("cost matrix size mismatch");

    double cost_scale = 0.0;
    for (double c : cost) cost_scale = std::max(cost_scale, std::abs(c));
    const double tol = 1e-12 * (1.0 + cost_scale);

    std::vector<double> flow(n * m, 0.0);
    std::vector<char> basic(n * m, 0);

    // Northwest-corner start: a deterministic staircase spanning tree.
    {
        std::size_t i = 0, j = 0;
        double ra = supply[0], rb = demand[0];
        const std::size_t steps = n + m - 1;
        for (std::size_t s = 0; s < steps; ++s) {
            const double q = std::max(0.0, std::min(ra, rb));
            flow[i * m + j] = q;
            basic[i * m + j] = 1;
            ra -= q;
            rb -= q;
            if (s + 1 == steps) break;
            const bool advance_row = (i + 1 < n) && (j + 1 == m || ra <= rb);
            if (advance_row) {
                ++i;
                ra = supply[i];
            } else {
                ++j;
                rb = demand[j];
            }
        }
    }

    TreeState tree(n, m);
    std::size_t degenerate_streak = 0;
    bool bland = false;
    std::size_t pivots = 0;

    std::vector<int> cycle_cells;
    cycle_cells.reserve(n + m + 1);

    // One pricing + pivot step at the given threshold. Returns false once no
    // nonbasic arc prices below -threshold.
    auto pivot_once = [&](double threshold) {
        tree.rebuild(basic, cost);

        // Pricing. Dantzig by default; Bland once degeneracy piles up.
        int enter = -1;
        double best = -threshold;
        for (std::size_t i = 0; i < n; ++i) {
            const double ui = tree.u[i];
            for (std::size_t j = 0; j < m; ++j) {
                const std::size_t cell = i * m + j;
                if (basic[cell]) continue;
                const double r = cost[cell] - ui - tree.v[j];
                if (r < best) {
                    best = r;
                    enter = static_cast<int>(cell);
                    if (bland) break; // first (lowest-index) eligible arc
                }
            }
            if (bland && enter != -1) break;
        }
        if (enter == -1) return false; // optimal at this threshold

        const std::size_t ei = static_cast<std::size_t>(enter) / m;
        const std::size_t ej = static_cast<std::size_t>(enter) % m;

        // Cycle through the tree between the entering arc's endpoints.
        cycle_cells.clear();
        cycle_cells.push_back(enter);
        int a = static_cast<int>(ei);
        int b = static_cast<int>(n + ej);
        std::vector<int> path_a, path_b;
        while (a != b) {
            if (tree.depth[static_cast<std::size_t>(a)] >= tree.depth[static_cast<std::size_t>(b)]) {
                path_a.push_back(tree.parent_cell[static_cast<std::size_t>(a)]);
                a = tree.parent[static_cast<std::size_t>(a)];
            } else {
                path_b.push_back(tree.parent_cell[static_cast<std::size_t>(b)]);
                b = tree.parent[static_cast<std::size_t>(b)];
            }
        }
        // Orientation: entering cell, then up from the column endpoint to the
        // meeting node, then down to the row endpoint. Signs alternate +,-.
        for (int cell : path_b) cycle_cells.push_back(cell);
        for (auto it = path_a.rbegin(); it != path_a.rend(); ++it) cycle_cells.push_back(*it);

        double theta = std::numeric_limits<double>::infinity();
        int leave = -1;
        for (std::size_t k = 1; k < cycle_cells.size(); k += 2) {
            const int cell = cycle_cells[k];
            const double f = flow[static_cast<std::size_t>(cell)];
            if (f < theta || (f == theta && cell < leave)) {
                theta = f;
                leave = cell;
            }
        }
        if (leave == -1) throw SolverFailure("transport cycle without leaving arc");

        for (std::size_t k = 0; k < cycle_cells.size(); ++k) {
            const std::size_t cell = static_cast<std::size_t>(cycle_cells[k]);
            if (k % 2 == 0) {
                flow[cell] += theta;
            } else {
                flow[cell] -= theta;
                if (flow[cell] < 0.0) flow[cell] = 0.0;
            }
        }
        basic[static_cast<std::size_t>(enter)] = 1;
        basic[static_cast<std::size_t>(leave)] = 0;
        flow[static_cast<std::size_t>(leave)] = 0.0;

        if (theta <= 0.0) {
            if (++degenerate_streak > 16 * (n + m)) bland = true;
        } else {
            degenerate_streak = 0;
        }
        return true;
    };

    const std::size_t max_pivots = 64 * n * m + 4096;
    for (; pivots < max_pivots; ++pivots) {
        if (!pivot_once(tol)) break;
    }
    if (pivots >= max_pivots) throw SolverFailure("transport simplex exceeded pivot budget");

    // Polish phase: drive reduced costs to the machine floor with a bounded
    // number of extra pivots. Downstream solvers difference LP values at
    // resolutions finer than the main threshold.
    {
        const double floor_tol = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + cost_scale);
        const std::size_t budget = 4 * (n + m) + 32;
        for (std::size_t extra = 0; extra < budget; ++extra) {
            if (!pivot_once(floor_tol)) break;
        }
    }

    // Recompute the basic flows from the final tree by peeling leaves, so the
    // plan's marginals match the inputs to the last ulp instead of carrying
    // drift accumulated across pivots.
    {
        std::vector<double> req(n + m);
        for (std::size_t i = 0; i < n; ++i) req[i] = supply[i];
        for (std::size_t j = 0; j < m; ++j) req[n + j] = demand[j];
        std::vector<int> degree(n + m, 0);
        std::vector<std::vector<int>> incident(n + m);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                if (basic[i * m + j]) {
                    incident[i].push_back(static_cast<int>(i * m + j));
                    incident[n + j].push_back(static_cast<int>(i * m + j));
                    ++degree[i];
                    ++degree[n + j];
                }
            }
        }
        std::vector<char> done(n * m, 0);
        std::vector<std::size_t> leaves;
        for (std::size_t w = 0; w < n + m; ++w) {
            if (degree[w] == 1) leaves.push_back(w);
        }
        for (std::size_t q = 0; q < leaves.size(); ++q) {
            const std::size_t w = leaves[q];
            int cell = -1;
            for (int c : incident[w]) {
                if (!done[static_cast<std::size_t>(c)]) {
                    cell = c;
                    break;
                }
            }
            if (cell < 0) continue; // root of the peeled tree
            const std::size_t i = static_cast<std::size_t>(cell) / m;
            const std::size_t j = static_cast<std::size_t>(cell) % m;
            const double f = std::max(0.0, req[w]);
            flow[static_cast<std::size_t>(cell)] = f;
            done[static_cast<std::size_t>(cell)] = 1;
            const std::size_t other = (w == i) ? n + j : i;
            req[other] -= f;
            if (--degree[other] == 1) leaves.push_back(other);
            degree[w] = 0;
        }
    }

    TransportSolution out;
    out.plan = std::move(flow);
    KahanSum value;
    for (std::size_t cell = 0; cell < n * m; ++cell) {
        if (out.plan[cell] > 0.0) value.add(out.plan[cell] * cost[cell]);
    }
    out.value = value.value();
    out.row_potential.assign(tree.u.begin(), tree.u.end());
    out.col_potential.assign(tree.v.begin(), tree.v.end());
    out.pivots = pivots;
    return out;
}

W2Solution w2_lp(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    if (mu.dim() != nu.dim())
        throw DimensionMismatch("w2_lp: dim " + std::to_string(mu.dim()) + " vs " +
                                std::to_string(nu.dim()));
    const std::size_t n = mu.size(), m = nu.size();
    if (n * m > kSizeLimit)
        throw SizeLimitExceeded("w2_lp instance " + std::to_string(n) + "x" + std::to_string(m) +
                                " exceeds the desk-scale limit");
    std::vector<double> cost(n * m);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) cost[i * m + j] = squared_distance(mu.atom(i), nu.atom(j));
    }
    TransportSolution sol = solve_transport(mu.weights(), nu.weights(), cost);

    W2Solution out{std::sqrt(std::max(0.0, sol.value)),
                   Coupling{mu, nu, std::move(sol.plan), std::max(0.0, sol.value)},
                   std::move(sol.row_potential), std::move(sol.col_potential)};
    return out;
}

double w2_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    if (mu.dim() != nu.dim()) throw DimensionMismatch("w2_distance: dimension mismatch");
    if (mu.dim() == 1) return w2_1d(mu, nu);
    return w2_lp(mu, nu).distance;
}

BarycentricMap barycentric_map(const Coupling& c) {
    const std::size_t n = c.source.size(), m = c.target.size();
    const std::size_t d = static_cast<std::size_t>(c.source.dim());
    BarycentricMap map;
    map.dim = c.source.dim();
    map.points.assign(n * d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double ai = c.source.weight(i);
        if (!(ai > 0.0)) throw ZeroRowMass("coupling row " + std::to_string(i) + " has no mass");
        std::vector<KahanSum> acc(d);
        for (std::size_t j = 0; j < m; ++j) {
            const double p = c.entry(i, j);
            if (p == 0.0) continue;
            const auto y = c.target.atom(j);
            for (std::size_t k = 0; k < d; ++k) acc[k].add(p * y[k]);
        }
        for (std::size_t k = 0; k < d; ++k) map.points[i * d + k] = acc[k].value() / ai;
    }
    return map;
}

DiscreteMeasure pushforward_measure(const DiscreteMeasure& source, const BarycentricMap& map) {
    return DiscreteMeasure(map.dim, map.points, source.weights());
}

DiscreteMeasure geodesic_point(const Coupling& c, double s) {
    if (!(s >= 0.0 && s <= 1.0))
        throw InvalidArgument("geodesic time must lie in [0, 1]");
    // The endpoints are the marginals themselves; return them verbatim so
    // endpoint identities hold exactly.
    if (s == 0.0) return c.source;
    if (s == 1.0) return c.target;
    const std::size_t m = c.target.size();
    const std::size_t d = static_cast<std::size_t>(c.source.dim());
    std::vector<double> coords;
    std::vector<double> weights;
    for (std::size_t i = 0; i < c.source.size(); ++i) {
        const auto x = c.source.atom(i);
        for (std::size_t j = 0; j < m; ++j) {
            const double p = c.entry(i, j);
            if (p <= 0.0) continue;
            const auto y = c.target.atom(j);
            for (std::size_t k = 0; k < d; ++k) coords.push_back((1.0 - s) * x[k] + s * y[k]);
            weights.push_back(p);
        }
    }
    return DiscreteMeasure(c.source.dim(), std::move(coords), std::move(weights));
}

DiscreteMeasure geodesic_point(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double s) {
    return geodesic_point(w2_lp(mu, nu).coupling, s);
}

} // namespace wproj
