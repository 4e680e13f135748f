#include "wproj/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wproj/numeric.hpp"

namespace wproj {

bool solve_dense(std::vector<double>& A, std::vector<double>& b, std::size_t k) {
    double scale = 0.0;
    for (double a : A) scale = std::max(scale, std::abs(a));
    const double tiny = 1e-14 * (scale + 1.0);

    for (std::size_t col = 0; col < k; ++col) {
        std::size_t piv = col;
        double best = std::abs(A[col * k + col]);
        for (std::size_t r = col + 1; r < k; ++r) {
            const double cand = std::abs(A[r * k + col]);
            if (cand > best) {
                best = cand;
                piv = r;
            }
        }
        if (best <= tiny) return false;
        if (piv != col) {
            for (std::size_t c = 0; c < k; ++c) std::swap(A[piv * k + c], A[col * k + c]);
            std::swap(b[piv], b[col]);
        }
        const double inv = 1.0 / A[col * k + col];
        for (std::size_t r = col + 1; r < k; ++r) {
            const double f = A[r * k + col] * inv;
            if (f == 0.0) continue;
            A[r * k + col] = 0.0;
            for (std::size_t c = col + 1; c < k; ++c) A[r * k + c] -= f * A[col * k + c];
            b[r] -= f * b[col];
        }
    }
    for (std::size_t col = k; col-- > 0;) {
        double s = b[col];
        for (std::size_t c = col + 1; c < k; ++c) s -= A[col * k + c] * b[c];
        b[col] = s / A[col * k + col];
    }
    return true;
}

namespace {

// Equality-constrained step: minimize the quadratic over {x_F free summing to
// one, x pinned elsewhere}. Returns the free components and the simplex
// multiplier; regularizes the KKT system if it is singular.
bool eqp_step(const std::vector<double>& H, const std::vector<double>& g, std::size_t K,
              const std::vector<std::size_t>& free_idx, std::vector<double>& x_free, double& mult) {
    const std::size_t f = free_idx.size();
    const std::size_t k = f + 1;
    std::vector<double> A(k * k, 0.0), rhs(k, 0.0);
    for (std::size_t a = 0; a < f; ++a) {
        for (std::size_t b = 0; b < f; ++b) A[a * k + b] = H[free_idx[a] * K + free_idx[b]];
        A[a * k + f] = 1.0;
        A[f * k + a] = 1.0;
        rhs[a] = -g[free_idx[a]];
    }
    rhs[f] = 1.0;

    std::vector<double> A_try = A, rhs_try = rhs;
    if (!solve_dense(A_try, rhs_try, k)) {
        double tr = 0.0;
        for (std::size_t a = 0; a < f; ++a) tr += std::abs(H[free_idx[a] * K + free_idx[a]]);
        const double ridge = 1e-12 * (tr / static_cast<double>(f) + 1.0);
        A_try = A;
        rhs_try = rhs;
        for (std::size_t a = 0; a < f; ++a) A_try[a * k + a] += ridge;
        if (!solve_dense(A_try, rhs_try, k)) return false;
    }
    x_free.assign(rhs_try.begin(), rhs_try.begin() + static_cast<std::ptrdiff_t>(f));
    mult = rhs_try[f];
    return true;
}

double qp_value(const std::vector<double>& H, const std::vector<double>& g,
                const std::vector<double>& x) {
    const std::size_t K = x.size();
    KahanSum s;
    for (std::size_t i = 0; i < K; ++i) {
        if (x[i] == 0.0) continue;
        double hi = 0.0;
        for (std::size_t j = 0; j < K; ++j) hi += H[i * K + j] * x[j];
        s.add(x[i] * (0.5 * hi + g[i]));
    }
    return s.value();
}

} // namespace

std::vector<double> simplex_qp(const std::vector<double>& H, const std::vector<double>& g,
                               std::vector<double> x0) {
    const std::size_t K = x0.size();
    if (K == 0) return x0;
    if (K == 1) return {1.0};

    double scale = 1.0;
    for (double h : H) scale = std::max(scale, std::abs(h));
    for (double gg : g) scale = std::max(scale, std::abs(gg));
    const double dual_tol = 1e-12 * scale;

    std::vector<char> pinned(K, 0);
    for (std::size_t i = 0; i < K; ++i) pinned[i] = (x0[i] <= 0.0);
    // Keep at least one coordinate free.
    if (std::count(pinned.begin(), pinned.end(), char(1)) == static_cast<std::ptrdiff_t>(K))
        pinned[0] = 0;

    std::vector<double> x = x0;
    std::vector<double> best_x = x;
    double best_val = qp_value(H, g, x);

    const std::size_t max_iter = 6 * K * K + 64;
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        std::vector<std::size_t> free_idx;
        for (std::size_t i = 0; i < K; ++i) {
            if (!pinned[i]) free_idx.push_back(i);
        }
        std::vector<double> xf;
        double mult = 0.0;
        if (!eqp_step(H, g, K, free_idx, xf, mult)) break;

        // Does the equality step stay feasible?
        double min_xf = std::numeric_limits<double>::infinity();
        for (double v : xf) min_xf = std::min(min_xf, v);

        if (min_xf >= -1e-13) {
            for (std::size_t a = 0; a < free_idx.size(); ++a)
                x[free_idx[a]] = std::max(0.0, xf[a]);
            for (std::size_t i = 0; i < K; ++i) {
                if (pinned[i]) x[i] = 0.0;
            }
            // Multipliers of the pinned coordinates. The equality solve puts
            // grad f = -mult on the free set, so sigma_k = grad_k + mult.
            double worst = -dual_tol;
            std::size_t release = K;
            for (std::size_t i = 0; i < K; ++i) {
                if (!pinned[i]) continue;
                double hi = 0.0;
                for (std::size_t j = 0; j < K; ++j) hi += H[i * K + j] * x[j];
                const double sigma = hi + g[i] + mult;
                if (sigma < worst) {
                    worst = sigma;
                    release = i;
                }
            }
            const double val = qp_value(H, g, x);
            if (val < best_val) {
                best_val = val;
                best_x = x;
            }
            if (release == K) return x; // KKT satisfied
            pinned[release] = 0;
        } else {
            // Step toward the equality solution until a free variable hits 0.
            double alpha = 1.0;
            std::size_t blocker = K;
            for (std::size_t a = 0; a < free_idx.size(); ++a) {
                const double xi = x[free_idx[a]];
                const double d = xf[a] - xi;
                if (d < 0.0 && xf[a] < 0.0) {
                    const double step = xi / (xi - xf[a]);
                    if (step < alpha) {
                        alpha = step;
                        blocker = free_idx[a];
                    }
                }
            }
            for (std::size_t a = 0; a < free_idx.size(); ++a) {
                const std::size_t i = free_idx[a];
                x[i] = std::max(0.0, x[i] + alpha * (xf[a] - x[i]));
            }
            if (blocker == K) break; // numerical dead end
            x[blocker] = 0.0;
            pinned[blocker] = 1;
            const double val = qp_value(H, g, x);
            if (val < best_val) {
                best_val = val;
                best_x = x;
            }
        }
    }
    return best_x;
}

} // namespace wproj
