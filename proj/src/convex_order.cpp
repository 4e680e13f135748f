#include "wproj/convex_order.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "wproj/errors.hpp"
#include "wproj/numeric.hpp"
#include "wproj/quantile.hpp"
#include "wproj/rng.hpp"

namespace wproj {

double PiecewiseLinearConvex::operator()(std::span<const double> w) const {
    const std::size_t d = static_cast<std::size_t>(dim);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < alphas.size(); ++k) {
        double v = alphas[k];
        for (std::size_t c = 0; c < d; ++c) v += betas[k * d + c] * w[c];
        best = std::max(best, v);
    }
    return best;
}

std::string PiecewiseLinearConvex::describe() const {
    std::ostringstream os;
    os << "max(";
    const std::size_t d = static_cast<std::size_t>(dim);
    for (std::size_t k = 0; k < alphas.size(); ++k) {
        if (k) os << ", ";
        os << alphas[k];
        for (std::size_t c = 0; c < d; ++c) {
            os << (betas[k * d + c] >= 0 ? "+" : "") << betas[k * d + c] << "*w" << c;
        }
    }
    os << ")";
    return os.str();
}

double integrate(const PiecewiseLinearConvex& phi, const DiscreteMeasure& m) {
    if (phi.dim != m.dim()) throw DimensionMismatch("witness dimension mismatch");
    KahanSum s;
    for (std::size_t i = 0; i < m.size(); ++i) s.add(m.weight(i) * phi(m.atom(i)));
    return s.value();
}

namespace {

// Marginal band: verdicts whose deciding quantity lies within a factor 10 of
// the tolerance on either side are flagged rather than trusted blindly;
// projections land exactly on the boundary of the order cone.
bool near_boundary(double quantity, double tol_eff) {
    return quantity > 0.1 * tol_eff && quantity < 10.0 * tol_eff;
}

OrderCheck check_convex_order_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double tol) {
    const double tol_eff = tol * (1.0 + moments(nu).m2);
    auto [f, g] = common_refinement(quantile_of(mu), quantile_of(nu));

    OrderCheck out;
    double worst = 0.0; // largest violation of the tail-integral criterion

    // Mean condition = tail integral at a = 0 holding with equality.
    const double mean_mu = integral(f);
    const double mean_nu = integral(g);
    const double mean_gap = std::abs(mean_mu - mean_nu);
    worst = std::max(worst, mean_gap);

    // Tail integrals: int_a^1 X da at every shared breakpoint, scanned from 1.
    if (mean_gap <= tol_eff) {
        KahanSum tail_f, tail_g;
        for (std::size_t i = f.pieces(); i-- > 0;) {
            tail_f.add(f.width(i) * f.values[i]);
            tail_g.add(g.width(i) * g.values[i]);
            worst = std::max(worst, tail_f.value() - tail_g.value());
        }
    }

    out.violation = std::max(0.0, worst);
    if (worst <= tol_eff) {
        out.verdict = OrderVerdict::Dominated;
        out.marginal = near_boundary(worst, tol_eff);
        return out;
    }

    out.verdict = OrderVerdict::NotDominated;
    out.marginal = near_boundary(worst, tol_eff);

    // Build a violated convex witness. Mean mismatch gives a linear witness;
    // otherwise the best hockey stick (w - k)+ over candidate knots at atoms.
    PiecewiseLinearConvex phi;
    phi.dim = 1;
    if (mean_gap > tol_eff) {
        const double sgn = (mean_mu > mean_nu) ? 1.0 : -1.0;
        phi.alphas = {0.0};
        phi.betas = {sgn};
        out.detail = "mean mismatch " + std::to_string(mean_mu - mean_nu);
    } else {
        double best_gap = -std::numeric_limits<double>::infinity();
        double best_k = 0.0;
        auto consider = [&](double k) {
            KahanSum s;
            for (std::size_t i = 0; i < mu.size(); ++i)
                s.add(mu.weight(i) * std::max(0.0, mu.atom(i)[0] - k));
            for (std::size_t i = 0; i < nu.size(); ++i)
                s.add(-nu.weight(i) * std::max(0.0, nu.atom(i)[0] - k));
            if (s.value() > best_gap) {
                best_gap = s.value();
                best_k = k;
            }
        };
        for (std::size_t i = 0; i < mu.size(); ++i) consider(mu.atom(i)[0]);
        for (std::size_t i = 0; i < nu.size(); ++i) consider(nu.atom(i)[0]);
        phi.alphas = {0.0, -best_k};
        phi.betas = {0.0, 1.0};
        out.detail = "hockey stick at k=" + std::to_string(best_k);
    }
    out.witness = std::move(phi);
    return out;
}

// Dense phase-1 simplex for Ax = b, x >= 0 with Bland's rule. Returns the
// residual infeasibility (sum of artificials), the primal point, and the
// Farkas multipliers when infeasible.
struct Phase1Result {
    double residual = 0.0;
    std::vector<double> x;
    std::vector<double> farkas;
};

Phase1Result phase1(std::size_t rows, std::size_t cols, std::vector<double> A,
                    std::vector<double> b) {
    // Flip rows to make b nonnegative; remember signs for the Farkas vector.
    std::vector<double> sign(rows, 1.0);
    for (std::size_t r = 0; r < rows; ++r) {
        if (b[r] < 0.0) {
            sign[r] = -1.0;
            b[r] = -b[r];
            for (std::size_t c = 0; c < cols; ++c) A[r * cols + c] = -A[r * cols + c];
        }
    }

    const std::size_t width = cols + rows + 1; // structural + artificial + rhs
    std::vector<double> T(rows * width, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) T[r * width + c] = A[r * cols + c];
        T[r * width + cols + r] = 1.0;
        T[r * width + cols + rows] = b[r];
    }
    // Reduced-cost row for objective = sum of artificials.
    std::vector<double> z(width, 0.0);
    for (std::size_t c = 0; c < width; ++c) {
        KahanSum s;
        for (std::size_t r = 0; r < rows; ++r) s.add(T[r * width + c]);
        z[c] = -s.value();
    }
    for (std::size_t r = 0; r < rows; ++r) z[cols + r] = 0.0;

    std::vector<std::size_t> basis(rows);
    for (std::size_t r = 0; r < rows; ++r) basis[r] = cols + r;

    double scale = 1.0;
    for (double a : A) scale = std::max(scale, std::abs(a));
    const double eps = 1e-11 * scale;

    std::vector<char> frozen(cols, 0);
    const std::size_t max_pivots = 400 * (rows + cols) + 20000;
    for (std::size_t pivot_count = 0;; ++pivot_count) {
        if (pivot_count > max_pivots) throw SolverFailure("phase-1 simplex exceeded pivot budget");
        // Bland: lowest-index structural column with negative reduced cost.
        std::size_t enter = width;
        for (std::size_t c = 0; c < cols; ++c) {
            if (!frozen[c] && z[c] < -eps) {
                enter = c;
                break;
            }
        }
        if (enter == width) break;

        // Ratio test with pivot hygiene: rank-deficient instances leave dust
        // coefficients in dependent rows and pivoting on one destroys the
        // tableau. Only elements of real magnitude are eligible; ties on the
        // ratio go to the numerically largest pivot, then to Bland's rule.
        double col_max = 0.0;
        for (std::size_t r = 0; r < rows; ++r)
            col_max = std::max(col_max, std::abs(T[r * width + enter]));
        const double pivot_tol = std::max(1e-9 * col_max, 1e-13 * scale);

        double min_ratio = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < rows; ++r) {
            const double a_re = T[r * width + enter];
            if (a_re > pivot_tol)
                min_ratio = std::min(min_ratio, T[r * width + cols + rows] / a_re);
        }
        if (!std::isfinite(min_ratio)) {
            // No eligible pivot within numerical rank: the column is noise
            // (phase-1 objectives are bounded below). Leave it out.
            frozen[enter] = 1;
            continue;
        }
        std::size_t leave = rows;
        const double tie = 1e-12 * (1.0 + std::abs(min_ratio));
        for (std::size_t r = 0; r < rows; ++r) {
            const double a_re = T[r * width + enter];
            if (a_re <= pivot_tol) continue;
            if (T[r * width + cols + rows] / a_re > min_ratio + tie) continue;
            if (leave == rows || a_re > T[leave * width + enter] * (1.0 + 1e-9) ||
                (a_re >= T[leave * width + enter] * (1.0 - 1e-9) && basis[r] < basis[leave])) {
                leave = r;
            }
        }

        // Pivot on (leave, enter).
        const double piv = T[leave * width + enter];
        for (std::size_t c = 0; c < width; ++c) T[leave * width + c] /= piv;
        T[leave * width + enter] = 1.0;
        for (std::size_t r = 0; r < rows; ++r) {
            if (r == leave) continue;
            const double f = T[r * width + enter];
            if (f == 0.0) continue;
            for (std::size_t c = 0; c < width; ++c) T[r * width + c] -= f * T[leave * width + c];
            T[r * width + enter] = 0.0;
        }
        const double fz = z[enter];
        if (fz != 0.0) {
            for (std::size_t c = 0; c < width; ++c) z[c] -= fz * T[leave * width + c];
            z[enter] = 0.0;
        }
        basis[leave] = enter;
    }

    Phase1Result out;
    out.x.assign(cols, 0.0);
    KahanSum residual;
    for (std::size_t r = 0; r < rows; ++r) {
        const double value = T[r * width + cols + rows];
        if (basis[r] < cols) {
            out.x[basis[r]] = std::max(0.0, value);
        } else {
            residual.add(std::max(0.0, value));
        }
    }
    out.residual = residual.value();
    // Farkas vector from the artificial columns' reduced costs, unflipped.
    out.farkas.assign(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) out.farkas[r] = sign[r] * (1.0 - z[cols + r]);
    return out;
}

OrderCheck build_lp_check(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double tol) {
    const std::size_t n = mu.size(), m = nu.size();
    const std::size_t d = static_cast<std::size_t>(mu.dim());
    const std::size_t cols = n * m;
    const std::size_t rows = n + m + n * d;
    const double tol_eff_pre = tol * (1.0 + moments(nu).m2);

    // Mean equality is necessary; testing it first gives a clean linear
    // witness and keeps the rank-deficient boundary cases out of the LP.
    {
        const Moments mm = moments(mu), mn = moments(nu);
        double gap_sq = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            const double g = mm.mean[k] - mn.mean[k];
            gap_sq += g * g;
        }
        const double gap = std::sqrt(gap_sq);
        if (gap > tol_eff_pre) {
            OrderCheck out;
            out.verdict = OrderVerdict::NotDominated;
            out.marginal = near_boundary(gap, tol_eff_pre);
            out.violation = gap;
            PiecewiseLinearConvex phi;
            phi.dim = mu.dim();
            phi.alphas = {0.0};
            phi.betas.resize(d);
            for (std::size_t k = 0; k < d; ++k)
                phi.betas[k] = (mm.mean[k] - mn.mean[k]) / gap;
            out.witness = std::move(phi);
            out.detail = "mean mismatch " + std::to_string(gap);
            return out;
        }
    }

    std::vector<double> A(rows * cols, 0.0);
    std::vector<double> b(rows, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) A[i * cols + i * m + j] = 1.0;
        b[i] = mu.weight(i);
    }
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t i = 0; i < n; ++i) A[(n + j) * cols + i * m + j] = 1.0;
        b[n + j] = nu.weight(j);
    }
    // Conditional-mean pinning: sum_j pi_ij (y_j - x_i) = 0.
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = mu.atom(i);
        for (std::size_t k = 0; k < d; ++k) {
            const std::size_t r = n + m + i * d + k;
            for (std::size_t j = 0; j < m; ++j) A[r * cols + i * m + j] = nu.atom(j)[k] - x[k];
        }
    }

    Phase1Result sol = phase1(rows, cols, A, b);
    // The verdict rests on the residual of the returned point measured
    // against the original data, not on tableau bookkeeping.
    {
        KahanSum l1;
        for (std::size_t r = 0; r < rows; ++r) {
            KahanSum row;
            for (std::size_t c = 0; c < cols; ++c) {
                if (sol.x[c] != 0.0) row.add(A[r * cols + c] * sol.x[c]);
            }
            l1.add(std::abs(row.value() - b[r]));
        }
        sol.residual = l1.value();
    }
    const double tol_eff = tol_eff_pre;

    OrderCheck out;
    out.violation = sol.residual;
    if (sol.residual <= tol_eff) {
        out.verdict = OrderVerdict::Dominated;
        out.marginal = near_boundary(sol.residual, tol_eff);
        Coupling cert{mu, nu, std::move(sol.x), 0.0};
        KahanSum cost;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                const double p = cert.entry(i, j);
                if (p > 0.0) cost.add(p * squared_distance(mu.atom(i), nu.atom(j)));
            }
        }
        cert.cost = cost.value();
        out.certificate = std::move(cert);
        return out;
    }

    out.verdict = OrderVerdict::NotDominated;
    out.marginal = near_boundary(sol.residual, tol_eff);
    // Farkas ray (u, v, S) with u_i + v_j + S_i.(y_j - x_i) <= 0 and
    // u.a + v.b > 0 becomes the witness phi(w) = max_i (u_i + S_i.(w - x_i)).
    PiecewiseLinearConvex phi;
    phi.dim = mu.dim();
    phi.alphas.resize(n);
    phi.betas.resize(n * d);
    for (std::size_t i = 0; i < n; ++i) {
        const double ui = sol.farkas[i];
        const auto x = mu.atom(i);
        double alpha = ui;
        for (std::size_t k = 0; k < d; ++k) {
            const double sik = sol.farkas[n + m + i * d + k];
            phi.betas[i * d + k] = sik;
            alpha -= sik * x[k];
        }
        phi.alphas[i] = alpha;
    }
    out.detail = "martingale LP infeasible, residual " + std::to_string(sol.residual);
    // Attach the witness only if it verifies (degenerate rays may not).
    if (integrate(phi, mu) > integrate(phi, nu)) out.witness = std::move(phi);
    return out;
}

} // namespace

OrderCheck check_convex_order_lp(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double tol) {
    if (mu.dim() != nu.dim()) throw DimensionMismatch("check_convex_order: dimension mismatch");
    return build_lp_check(mu, nu, tol);
}

OrderCheck check_convex_order(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double tol) {
    if (mu.dim() != nu.dim()) throw DimensionMismatch("check_convex_order: dimension mismatch");
    if (mu.dim() == 1) return check_convex_order_1d(mu, nu, tol);
    return build_lp_check(mu, nu, tol);
}

WitnessTestResult random_convex_witness_test(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                             std::size_t count, std::uint64_t seed, double tol) {
    if (mu.dim() != nu.dim()) throw DimensionMismatch("witness test: dimension mismatch");
    const std::size_t d = static_cast<std::size_t>(mu.dim());
    const double tol_eff = tol * (1.0 + moments(nu).m2);
    const double alpha_scale = 1.0 + moments(mu).m2 + moments(nu).m2;

    WitnessTestResult out;
    out.worst_margin = std::numeric_limits<double>::infinity();
    out.samples = count;
    for (std::size_t c = 0; c < count; ++c) {
        RandomStream rng(RandomStream::derive(seed, "convex-witness", c));
        const std::size_t pieces = 2 + rng.uniform_index(0, 3);
        PiecewiseLinearConvex phi;
        phi.dim = mu.dim();
        phi.alphas.resize(pieces);
        phi.betas.resize(pieces * d);
        for (std::size_t k = 0; k < pieces; ++k) {
            phi.alphas[k] = rng.uniform(-alpha_scale, alpha_scale);
            for (std::size_t cdim = 0; cdim < d; ++cdim)
                phi.betas[k * d + cdim] = rng.uniform(-1.0, 1.0);
        }
        const double margin = integrate(phi, nu) - integrate(phi, mu);
        if (margin < out.worst_margin) {
            out.worst_margin = margin;
            if (margin < -tol_eff) {
                out.pass = false;
                out.violating = phi;
            }
        }
    }
    return out;
}

} // namespace wproj
