#pragma once

namespace wproj {

// Batch front end. Subcommands: w2, check-order, project-backward,
// project-forward, extrapolate, stability-suite.
// Exit codes: 0 success, 1 usage error, 2 input/parse error,
// 3 solver non-convergence, 4 suite failure.
int cli_run(int argc, const char* const* argv);

} // namespace wproj
