#include "wproj/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "wproj/errors.hpp"
#include "wproj/extrapolation.hpp"
#include "wproj/measure_io.hpp"
#include "wproj/numeric.hpp"
#include "wproj/rng.hpp"
#include "wproj/transport.hpp"

namespace wproj {

namespace {

const std::vector<std::pair<CheckId, const char*>>& check_table() {
    static const std::vector<std::pair<CheckId, const char*>> table = {
        {CheckId::Nonexpansive, "NONEXPANSIVE"},
        {CheckId::ExtraLip2t, "EXTRA_LIP_2T"},
        {CheckId::Extra1dBoth, "EXTRA_1D_BOTH"},
        {CheckId::GeoInterp1d, "GEO_INTERP_1D"},
        {CheckId::Backward1dCombined, "BACKWARD_1D_COMBINED"},
        {CheckId::Forward1d, "FORWARD_1D"},
        {CheckId::BackwardSqrt, "BACKWARD_SQRT"},
        {CheckId::ExtraHolder, "EXTRA_HOLDER"},
        {CheckId::Dissipative, "DISSIPATIVE"},
        {CheckId::Thm1Consistency, "THM1_CONSISTENCY"},
        {CheckId::ForwardTInvariance, "FORWARD_T_INVARIANCE"},
        {CheckId::ForwardHolderTrend, "FORWARD_HOLDER_TREND"},
    };
    return table;
}

// Solver settings for harness runs: the margins being certified sit near
// 1e-7, so the QP is polished well past the default gap.
SolverConfig harness_solver() {
    SolverConfig cfg;
    cfg.fw_gap_tol = 1e-14;
    return cfg;
}

DiscreteMeasure backward_any(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    if (mu.dim() == 1) return backward_project_1d(mu, nu);
    return backward_project(mu, nu, harness_solver()).projected;
}

DiscreteMeasure forward_any(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double t) {
    if (mu.dim() == 1) return forward_project_1d(mu, nu);
    SolverConfig cfg = harness_solver();
    cfg.t_pipeline = t;
    return forward_project(mu, nu, cfg);
}

bool is_one_dimensional_only(CheckId id) {
    switch (id) {
        case CheckId::Extra1dBoth:
        case CheckId::GeoInterp1d:
        case CheckId::Backward1dCombined:
        case CheckId::Forward1d:
        case CheckId::Thm1Consistency:
            return true;
        default:
            return false;
    }
}

bool uses_t_values(CheckId id) {
    switch (id) {
        case CheckId::ExtraLip2t:
        case CheckId::Extra1dBoth:
        case CheckId::ExtraHolder:
        case CheckId::Dissipative:
        case CheckId::Thm1Consistency:
            return true;
        default:
            return false;
    }
}

double jitter_amplitude(const HarnessConfig& cfg, std::size_t trial) {
    static constexpr double kAmps[3] = {1e-3, 1e-2, 1e-1};
    return kAmps[trial % 3] * cfg.scale;
}

} // namespace

std::string check_name(CheckId id) {
    for (const auto& [cid, name] : check_table()) {
        if (cid == id) return name;
    }
    return "UNKNOWN";
}

std::optional<CheckId> check_from_name(const std::string& name) {
    for (const auto& [cid, cname] : check_table()) {
        if (name == cname) return cid;
    }
    return std::nullopt;
}

const std::vector<CheckId>& all_checks() {
    static const std::vector<CheckId> ids = [] {
        std::vector<CheckId> v;
        for (const auto& [cid, name] : check_table()) v.push_back(cid);
        return v;
    }();
    return ids;
}

void HarnessConfig::validate() const {
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (dims.empty()) throw ConfigError("dims must be non-empty");
    for (int d : dims) {
        if (d < 1) throw ConfigError("dims entries must be >= 1");
    }
    if (atoms_min < 1 || atoms_max < atoms_min) throw ConfigError("bad atom-count range");
    if (!(scale > 0.0)) throw ConfigError("scale must be positive");
    if (t_values.empty()) throw ConfigError("t_values must be non-empty");
    for (double t : t_values) {
        if (!(t > 1.0)) throw ConfigError("every t must exceed 1");
    }
    if (!(tol_report > 0.0)) throw ConfigError("tol_report must be positive");
}

std::string status_name(CheckStatus s) {
    switch (s) {
        case CheckStatus::Pass: return "pass";
        case CheckStatus::Marginal: return "marginal";
        case CheckStatus::Fail: return "fail";
        case CheckStatus::Error: return "error";
        case CheckStatus::Info: return "info";
    }
    return "unknown";
}

DiscreteMeasure gen_random_measure(int dim, std::size_t n_atoms, double scale, std::uint64_t seed) {
    if (n_atoms < 1) throw InvalidArgument("gen_random_measure: need at least one atom");
    RandomStream rng(seed);
    std::vector<double> coords(n_atoms * static_cast<std::size_t>(dim));
    for (double& c : coords) c = rng.uniform(-scale, scale);
    // Symmetric Dirichlet(1,...,1) via normalized exponentials.
    std::vector<double> weights(n_atoms);
    for (double& w : weights) w = -std::log(1.0 - rng.next_double());
    return DiscreteMeasure(dim, std::move(coords), std::move(weights));
}

DiscreteMeasure gen_random_measure_uniform(int dim, std::size_t n_atoms, double scale,
                                           std::uint64_t seed) {
    if (n_atoms < 1) throw InvalidArgument("gen_random_measure: need at least one atom");
    RandomStream rng(seed);
    std::vector<double> coords(n_atoms * static_cast<std::size_t>(dim));
    for (double& c : coords) c = rng.uniform(-scale, scale);
    return DiscreteMeasure(dim, std::move(coords), std::vector<double>(n_atoms, 1.0));
}

DiscreteMeasure jitter_atoms(const DiscreteMeasure& m, double eps, std::uint64_t seed) {
    RandomStream rng(seed);
    std::vector<double> coords = m.coords();
    for (double& c : coords) c += rng.uniform(-eps, eps);
    return DiscreteMeasure(m.dim(), std::move(coords), m.weights());
}

Instance gen_instance(CheckId id, const HarnessConfig& cfg, int dim, std::size_t trial) {
    Instance inst;
    inst.seed = RandomStream::derive(cfg.seed, check_name(id), static_cast<std::uint64_t>(dim), trial);
    inst.dim = dim;
    inst.eps = jitter_amplitude(cfg, trial);

    RandomStream meta(RandomStream::derive(inst.seed, "meta"));
    auto atoms = [&]() { return meta.uniform_index(cfg.atoms_min, cfg.atoms_max); };
    auto fresh = [&](std::size_t slot) {
        return gen_random_measure(dim, atoms(), cfg.scale,
                                  RandomStream::derive(inst.seed, "measure", slot));
    };
    auto jittered = [&](const DiscreteMeasure& base, std::size_t slot) {
        return jitter_atoms(base, inst.eps, RandomStream::derive(inst.seed, "jitter", slot));
    };

    switch (id) {
        case CheckId::Nonexpansive: { // [nu, mu, mu~]
            inst.measures.push_back(fresh(0));
            inst.measures.push_back(fresh(1));
            inst.measures.push_back(jittered(inst.measures[1], 1));
            break;
        }
        case CheckId::ExtraLip2t: { // [nu0, nu1, nu1~]
            inst.measures.push_back(fresh(0));
            inst.measures.push_back(fresh(1));
            inst.measures.push_back(jittered(inst.measures[1], 1));
            break;
        }
        case CheckId::Extra1dBoth: { // [nu0, nu1, nu0~, nu1~]
            inst.measures.push_back(fresh(0));
            inst.measures.push_back(fresh(1));
            inst.measures.push_back(jittered(inst.measures[0], 0));
            inst.measures.push_back(jittered(inst.measures[1], 1));
            break;
        }
        case CheckId::GeoInterp1d:
        case CheckId::Backward1dCombined:
        case CheckId::Forward1d:
        case CheckId::BackwardSqrt: { // [mu, nu, mu~, nu~]
            inst.measures.push_back(fresh(0));
            inst.measures.push_back(fresh(1));
            inst.measures.push_back(jittered(inst.measures[0], 0));
            inst.measures.push_back(jittered(inst.measures[1], 1));
            inst.s = meta.next_double();
            break;
        }
        case CheckId::ExtraHolder: { // [nu0, nu1, nu0~]
            inst.measures.push_back(fresh(0));
            inst.measures.push_back(fresh(1));
            inst.measures.push_back(jittered(inst.measures[0], 0));
            break;
        }
        case CheckId::Dissipative:
        case CheckId::Thm1Consistency: { // [nu0, nu1]
            inst.measures.push_back(fresh(0));
            inst.measures.push_back(fresh(1));
            break;
        }
        case CheckId::ForwardTInvariance: { // [mu, nu]
            if (dim == 1) {
                inst.measures.push_back(fresh(0));
                inst.measures.push_back(fresh(1));
            } else {
                // Equal-weight clouds of a common size: the coupling onto the
                // extrapolation is generically a permutation and the
                // pipeline's geodesic step is exact.
                const std::size_t n = atoms();
                inst.measures.push_back(gen_random_measure_uniform(
                    dim, n, cfg.scale, RandomStream::derive(inst.seed, "measure", 0)));
                inst.measures.push_back(gen_random_measure_uniform(
                    dim, n, cfg.scale, RandomStream::derive(inst.seed, "measure", 1)));
            }
            break;
        }
        case CheckId::ForwardHolderTrend: { // [mu, nu]; perturbations per eps
            inst.measures.push_back(fresh(0));
            inst.measures.push_back(fresh(1));
            break;
        }
    }
    return inst;
}

namespace {

CheckStatus classify(double margin, double tol_eff) {
    if (!std::isfinite(margin)) return CheckStatus::Error;
    if (margin < -tol_eff) return CheckStatus::Fail;
    if (margin <= tol_eff) return CheckStatus::Marginal;
    return CheckStatus::Pass;
}

} // namespace

InequalityReport check_inequality(CheckId id, const Instance& inst, std::optional<double> t,
                                  const HarnessConfig& cfg) {
    if (is_one_dimensional_only(id) && inst.dim != 1)
        throw CheckUnavailableForDim(check_name(id) + " is defined for dim 1 only, got dim " +
                                     std::to_string(inst.dim));
    InequalityReport rep;
    rep.check = id;
    rep.instance_seed = inst.seed;
    rep.dim = inst.dim;
    rep.t = t;
    const double tol_eff = cfg.tol_effective();

    try {
        switch (id) {
            case CheckId::Nonexpansive: {
                const auto& nu = inst.measures[0];
                const auto& mu = inst.measures[1];
                const auto& mu_t = inst.measures[2];
                rep.lhs = w2_distance(backward_any(mu, nu), backward_any(mu_t, nu));
                rep.rhs = w2_distance(mu, mu_t);
                break;
            }
            case CheckId::ExtraLip2t: {
                const auto& nu0 = inst.measures[0];
                const auto& nu1 = inst.measures[1];
                const auto& nu1_t = inst.measures[2];
                const SolverConfig sc = harness_solver();
                rep.lhs = w2_distance(extrapolate(nu0, nu1, *t, sc), extrapolate(nu0, nu1_t, *t, sc));
                rep.rhs = 2.0 * (*t) * w2_distance(nu1, nu1_t);
                break;
            }
            case CheckId::Extra1dBoth: {
                const auto& nu0 = inst.measures[0];
                const auto& nu1 = inst.measures[1];
                const auto& nu0_t = inst.measures[2];
                const auto& nu1_t = inst.measures[3];
                rep.lhs = w2_distance(extrapolate_1d(nu0, nu1, *t), extrapolate_1d(nu0_t, nu1_t, *t));
                rep.rhs = (*t - 1.0) * w2_distance(nu0, nu0_t) + (*t) * w2_distance(nu1, nu1_t);
                break;
            }
            case CheckId::GeoInterp1d: {
                const auto& mu = inst.measures[0];
                const auto& nu = inst.measures[1];
                const auto& mu_t = inst.measures[2];
                const auto& nu_t = inst.measures[3];
                const double s = inst.s;
                rep.lhs = w2_distance(geodesic_point(mu, nu, s), geodesic_point(mu_t, nu_t, s));
                rep.rhs = (1.0 - s) * w2_distance(mu, mu_t) + s * w2_distance(nu, nu_t);
                rep.params["s"] = format_full(s);
                break;
            }
            case CheckId::Backward1dCombined: {
                const auto& mu = inst.measures[0];
                const auto& nu = inst.measures[1];
                const auto& mu_t = inst.measures[2];
                const auto& nu_t = inst.measures[3];
                rep.lhs = w2_distance(backward_project_1d(mu, nu), backward_project_1d(mu_t, nu_t));
                rep.rhs = w2_distance(mu, mu_t) + w2_distance(nu, nu_t);
                break;
            }
            case CheckId::Forward1d: {
                const auto& mu = inst.measures[0];
                const auto& nu = inst.measures[1];
                const auto& mu_t = inst.measures[2];
                const auto& nu_t = inst.measures[3];
                rep.lhs = w2_distance(forward_project_1d(mu, nu), forward_project_1d(mu_t, nu_t));
                rep.rhs = 2.0 * w2_distance(nu, nu_t) + w2_distance(mu, mu_t);
                break;
            }
            case CheckId::BackwardSqrt: {
                const auto& mu = inst.measures[0];
                const auto& nu = inst.measures[1];
                const auto& mu_t = inst.measures[2];
                const auto& nu_t = inst.measures[3];
                rep.lhs = w2_distance(backward_any(mu, nu), backward_any(mu_t, nu_t));
                rep.rhs = w2_distance(mu, mu_t) +
                          std::sqrt((w2_distance(mu, nu) + w2_distance(mu, nu_t)) *
                                    w2_distance(nu, nu_t));
                break;
            }
            case CheckId::ExtraHolder: {
                const auto& nu0 = inst.measures[0];
                const auto& nu1 = inst.measures[1];
                const auto& nu0_t = inst.measures[2];
                const SolverConfig sc = harness_solver();
                const double diff =
                    w2_distance(extrapolate(nu0, nu1, *t, sc), extrapolate(nu0_t, nu1, *t, sc));
                rep.lhs = diff * diff;
                rep.rhs = (*t) * (*t - 1.0) *
                          (w2_distance(nu1, nu0) + w2_distance(nu1, nu0_t)) *
                          w2_distance(nu0, nu0_t);
                break;
            }
            case CheckId::Dissipative: {
                const auto& nu0 = inst.measures[0];
                const auto& nu1 = inst.measures[1];
                const DiscreteMeasure extra = extrapolate(nu0, nu1, *t, harness_solver());
                const double base = w2_distance(nu0, nu1);
                const double lhs0 = w2_distance(nu0, extra);
                const double lhs1 = w2_distance(nu1, extra);
                const double margin0 = (*t) * base - lhs0;
                const double margin1 = (*t - 1.0) * base - lhs1;
                // Report the binding side.
                if (margin0 <= margin1) {
                    rep.lhs = lhs0;
                    rep.rhs = (*t) * base;
                    rep.params["side"] = "nu0";
                } else {
                    rep.lhs = lhs1;
                    rep.rhs = (*t - 1.0) * base;
                    rep.params["side"] = "nu1";
                }
                break;
            }
            case CheckId::Thm1Consistency: {
                const auto& nu0 = inst.measures[0];
                const auto& nu1 = inst.measures[1];
                rep.lhs = w2_distance(extrapolate_1d(nu0, nu1, *t),
                                      extrapolate_via_backward(nu0, nu1, *t, harness_solver()));
                rep.rhs = 1e-7;
                break;
            }
            case CheckId::ForwardTInvariance: {
                const auto& mu = inst.measures[0];
                const auto& nu = inst.measures[1];
                SolverConfig a = harness_solver(), b = harness_solver();
                a.t_pipeline = 2.0;
                b.t_pipeline = 5.0;
                rep.lhs = w2_distance(forward_project(mu, nu, a), forward_project(mu, nu, b));
                rep.rhs = inst.dim == 1 ? 1e-6 : 1e-5;
                rep.params["t_pair"] = "2,5";
                break;
            }
            case CheckId::ForwardHolderTrend: {
                // Handled by run_suite (one row per perturbation size).
                throw InvalidArgument("trend check is driven by run_suite");
            }
        }
        rep.margin = rep.rhs - rep.lhs;
        rep.status = classify(rep.margin, tol_eff);
    } catch (const Error& e) {
        rep.lhs = rep.rhs = rep.margin = 0.0;
        rep.status = CheckStatus::Error;
        rep.params["error"] = e.what();
    }
    return rep;
}

namespace {

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return (v.size() % 2) ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

// Least-squares slope of y against x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() < 2) return 0.0;
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double var = sxx - sx * sx / n;
    if (var <= 0.0) return 0.0;
    return (sxy - sx * sy / n) / var;
}

} // namespace

SuiteReport run_suite(const HarnessConfig& cfg_in) {
    HarnessConfig cfg = cfg_in;
    cfg.validate();
    if (cfg.checks.empty()) cfg.checks = all_checks();

    SuiteReport report;
    report.config = cfg;

    std::map<std::string, std::vector<double>> trend_x, trend_y;
    std::map<double, std::vector<double>> lip_margins_by_t;

    for (CheckId id : cfg.checks) {
        for (int dim : cfg.dims) {
            if (is_one_dimensional_only(id) && dim != 1) continue;
            if (id == CheckId::ForwardTInvariance && dim > 2) continue;
            if (id == CheckId::ForwardHolderTrend && dim > 2) continue;

            for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
                const Instance inst = gen_instance(id, cfg, dim, trial);

                if (id == CheckId::ForwardHolderTrend) {
                    // One informational row per perturbation size; the
                    // log-log slope is aggregated below. No pass/fail: the
                    // bound's constant is not known in closed form.
                    const auto& mu = inst.measures[0];
                    const auto& nu = inst.measures[1];
                    static constexpr double kAmps[3] = {1e-3, 1e-2, 1e-1};
                    for (std::size_t e = 0; e < 3; ++e) {
                        InequalityReport rep;
                        rep.check = id;
                        rep.instance_seed = inst.seed;
                        rep.dim = dim;
                        rep.status = CheckStatus::Info;
                        try {
                            const DiscreteMeasure nu_t = jitter_atoms(
                                nu, kAmps[e] * cfg.scale,
                                RandomStream::derive(inst.seed, "trend", e));
                            const double t2 = 2.0;
                            rep.lhs = w2_distance(forward_any(mu, nu, t2), forward_any(mu, nu_t, t2));
                            rep.rhs = w2_distance(nu, nu_t);
                            rep.margin = 0.0;
                            rep.params["eps"] = format_full(kAmps[e] * cfg.scale);
                            if (rep.lhs > 0.0 && rep.rhs > 0.0) {
                                const std::string key = "forward_holder_slope_dim" + std::to_string(dim);
                                trend_x[key].push_back(std::log10(rep.rhs));
                                trend_y[key].push_back(std::log10(rep.lhs));
                            }
                        } catch (const Error& err) {
                            rep.status = CheckStatus::Error;
                            rep.params["error"] = err.what();
                        }
                        report.rows.push_back(std::move(rep));
                    }
                    continue;
                }

                if (uses_t_values(id)) {
                    for (double t : cfg.t_values) {
                        InequalityReport rep = check_inequality(id, inst, t, cfg);
                        if (id == CheckId::ExtraLip2t && rep.status != CheckStatus::Error)
                            lip_margins_by_t[t].push_back(rep.margin);
                        report.rows.push_back(std::move(rep));
                    }
                } else {
                    report.rows.push_back(check_inequality(id, inst, std::nullopt, cfg));
                }
            }
        }
    }

    // Deterministic presentation order.
    std::stable_sort(report.rows.begin(), report.rows.end(),
                     [](const InequalityReport& a, const InequalityReport& b) {
                         const std::string an = check_name(a.check), bn = check_name(b.check);
                         if (an != bn) return an < bn;
                         if (a.dim != b.dim) return a.dim < b.dim;
                         if (a.instance_seed != b.instance_seed) return a.instance_seed < b.instance_seed;
                         const double at = a.t.value_or(-1.0), bt = b.t.value_or(-1.0);
                         return at < bt;
                     });

    // Per-check aggregation.
    for (CheckId id : cfg.checks) {
        CheckSummary s;
        s.check = id;
        std::vector<double> margins;
        for (const auto& row : report.rows) {
            if (row.check != id) continue;
            ++s.count;
            if (row.status == CheckStatus::Fail) ++s.failures;
            if (row.status == CheckStatus::Error) ++s.errors;
            if (row.status != CheckStatus::Error && row.status != CheckStatus::Info)
                margins.push_back(row.margin);
        }
        s.min_margin = margins.empty() ? 0.0 : *std::min_element(margins.begin(), margins.end());
        s.median_margin = median_of(margins);
        if (s.count) report.summaries.push_back(s);
    }

    for (const auto& [key, xs] : trend_x) report.trend[key] = fit_slope(xs, trend_y[key]);
    for (const auto& [t, margins] : lip_margins_by_t) {
        std::ostringstream key;
        key << "extra_lip_2t_median_margin_t" << t;
        report.trend[key.str()] = median_of(margins);
    }

    report.pass = true;
    for (const auto& s : report.summaries) {
        if (s.failures > 0 || s.errors > 0) report.pass = false;
    }
    return report;
}

void write_report_csv(const SuiteReport& report, std::ostream& out) {
    out << "check_id,instance_seed,dim,t,lhs,rhs,margin,status\n";
    for (const auto& row : report.rows) {
        out << check_name(row.check) << ',' << row.instance_seed << ',' << row.dim << ',';
        if (row.t) out << format_full(*row.t);
        out << ',' << format_full(row.lhs) << ',' << format_full(row.rhs) << ','
            << format_full(row.margin) << ',' << status_name(row.status) << '\n';
    }
}

void write_summary_json(const SuiteReport& report, std::ostream& out) {
    nlohmann::ordered_json j;
    j["schema"] = "stability-summary/1";
    j["pass"] = report.pass;

    nlohmann::ordered_json cfg;
    cfg["seed"] = report.config.seed;
    cfg["trials"] = report.config.trials;
    cfg["dims"] = report.config.dims;
    cfg["atoms"] = {report.config.atoms_min, report.config.atoms_max};
    cfg["scale"] = report.config.scale;
    cfg["t_values"] = report.config.t_values;
    cfg["tol_report"] = report.config.tol_report;
    std::vector<std::string> names;
    for (CheckId id : report.config.checks) names.push_back(check_name(id));
    cfg["checks"] = names;
    j["config"] = std::move(cfg);

    nlohmann::ordered_json checks = nlohmann::ordered_json::object();
    for (const auto& s : report.summaries) {
        nlohmann::ordered_json c;
        c["count"] = s.count;
        c["failures"] = s.failures;
        c["errors"] = s.errors;
        c["min_margin"] = s.min_margin;
        c["median_margin"] = s.median_margin;
        checks[check_name(s.check)] = std::move(c);
    }
    j["checks"] = std::move(checks);

    nlohmann::ordered_json trend = nlohmann::ordered_json::object();
    for (const auto& [key, value] : report.trend) trend[key] = value;
    j["trend"] = std::move(trend);

    out << j.dump(2) << '\n';
}

HarnessConfig parse_harness_config(std::istream& in, const std::string& source_name) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(source_name + ": " + e.what());
    }
    if (!j.is_object()) throw ParseError(source_name + ": config must be a JSON object");

    HarnessConfig cfg;
    try {
        if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("trials")) cfg.trials = j["trials"].get<std::size_t>();
        if (j.contains("dims")) cfg.dims = j["dims"].get<std::vector<int>>();
        if (j.contains("atoms")) {
            const auto range = j["atoms"].get<std::vector<std::size_t>>();
            if (range.size() != 2) throw ParseError(source_name + ": 'atoms' must be [min, max]");
            cfg.atoms_min = range[0];
            cfg.atoms_max = range[1];
        }
        if (j.contains("scale")) cfg.scale = j["scale"].get<double>();
        if (j.contains("t_values")) cfg.t_values = j["t_values"].get<std::vector<double>>();
        if (j.contains("tol_report")) cfg.tol_report = j["tol_report"].get<double>();
        if (j.contains("checks")) {
            cfg.checks.clear();
            for (const auto& name : j["checks"]) {
                const auto id = check_from_name(name.get<std::string>());
                if (!id) throw ParseError(source_name + ": unknown check '" +
                                          name.get<std::string>() + "'");
                cfg.checks.push_back(*id);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(source_name + ": " + e.what());
    }
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(source_name + ": " + e.what());
    }
    return cfg;
}

} // namespace wproj
