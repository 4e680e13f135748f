#pragma once

#include <cstddef>
#include <vector>

namespace wproj {

// Dense linear solve A x = b by Gaussian elimination with partial pivoting.
// A is k x k row-major and is destroyed. Returns false on (near-)singularity.
bool solve_dense(std::vector<double>& A, std::vector<double>& b, std::size_t k);

// Minimize 1/2 x^T H x + g^T x over the probability simplex {x >= 0, sum = 1}.
// H is K x K row-major PSD (possibly singular; a tiny ridge is added when the
// KKT system degenerates). Primal active-set starting from the feasible x0.
// Used by the fully-corrective step of the away-step Frank-Wolfe solver; K is
// small (an active vertex dictionary), so dense solves are fine.
std::vector<double> simplex_qp(const std::vector<double>& H, const std::vector<double>& g,
                               std::vector<double> x0);

} // namespace wproj
