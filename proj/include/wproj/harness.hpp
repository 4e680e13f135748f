#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wproj/measure.hpp"
#include "wproj/projection.hpp"

namespace wproj {

// Stability inequalities certified by the randomized harness. Each check
// compares a solver-computed left side against the proved bound.
enum class CheckId {
    Nonexpansive,       // backward projection is 1-Lipschitz in mu
    ExtraLip2t,         // extrapolation: 2t-Lipschitz in nu1
    Extra1dBoth,        // 1D extrapolation: (t-1), t constants in both slots
    GeoInterp1d,        // 1D geodesic interpolation stability
    Backward1dCombined, // 1D backward: W2(mu,mu~) + W2(nu,nu~)
    Forward1d,          // 1D forward: 2 W2(nu,nu~) + W2(mu,mu~)
    BackwardSqrt,       // backward: sqrt-Holder bound in nu, any dim
    ExtraHolder,        // extrapolation: Holder bound in nu0, any dim
    Dissipative,        // W2(nu0,E) <= t W2(nu0,nu1); W2(nu1,E) <= (t-1) W2
    Thm1Consistency,    // 1D PAV route vs QP reduction route
    ForwardTInvariance, // forward pipeline output does not depend on t
    ForwardHolderTrend, // qualitative: forward discrepancy vs perturbation
};

std::string check_name(CheckId id);
std::optional<CheckId> check_from_name(const std::string& name);
const std::vector<CheckId>& all_checks();

struct HarnessConfig {
    std::uint64_t seed = 1u;
    std::size_t trials = 200;
    std::vector<int> dims = {1, 2};
    std::size_t atoms_min = 1;
    std::size_t atoms_max = 8;
    double scale = 1.0;
    std::vector<double> t_values = {1.25, 2.0, 5.0};
    double tol_report = 1e-7; // effective threshold is tol_report * (1 + scale)
    std::vector<CheckId> checks; // empty = all

    double tol_effective() const { return tol_report * (1.0 + scale); }
    void validate() const; // throws ConfigError
};

enum class CheckStatus { Pass, Marginal, Fail, Error, Info };
std::string status_name(CheckStatus s);

struct InequalityReport {
    CheckId check = CheckId::Nonexpansive;
    std::uint64_t instance_seed = 0;
    int dim = 0;
    std::optional<double> t;
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0; // rhs - lhs
    CheckStatus status = CheckStatus::Pass;
    std::map<std::string, std::string> params;
};

struct CheckSummary {
    CheckId check = CheckId::Nonexpansive;
    std::size_t count = 0;
    std::size_t failures = 0;
    std::size_t errors = 0;
    double min_margin = 0.0;
    double median_margin = 0.0;
};

struct SuiteReport {
    HarnessConfig config;
    std::vector<InequalityReport> rows;
    std::vector<CheckSummary> summaries;
    std::map<std::string, double> trend; // log-log slopes and related scalars
    bool pass = false;
};

// Atoms uniform in [-scale, scale]^dim, weights a symmetric Dirichlet draw;
// bit-exact reproducible from the seed.
DiscreteMeasure gen_random_measure(int dim, std::size_t n_atoms, double scale, std::uint64_t seed);
DiscreteMeasure gen_random_measure_uniform(int dim, std::size_t n_atoms, double scale,
                                           std::uint64_t seed);

// Perturbation used for the stability pairs: atoms jittered by uniform noise
// of amplitude eps, weights untouched.
DiscreteMeasure jitter_atoms(const DiscreteMeasure& m, double eps, std::uint64_t seed);

// Measures making up one randomized instance of a check.
struct Instance {
    std::uint64_t seed = 0;
    int dim = 0;
    double eps = 0.0; // jitter amplitude used for the perturbed copies
    double s = 0.0;   // interpolation time for the geodesic check
    std::vector<DiscreteMeasure> measures;
};

Instance gen_instance(CheckId id, const HarnessConfig& cfg, int dim, std::size_t trial);

// Evaluates one inequality instance; solver errors are captured in the
// report (status = error), never thrown.
InequalityReport check_inequality(CheckId id, const Instance& inst, std::optional<double> t,
                                  const HarnessConfig& cfg);

SuiteReport run_suite(const HarnessConfig& cfg);

void write_report_csv(const SuiteReport& report, std::ostream& out);
void write_summary_json(const SuiteReport& report, std::ostream& out);

HarnessConfig parse_harness_config(std::istream& in, const std::string& source_name = "<config>");

} // namespace wproj
