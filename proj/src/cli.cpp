#include "wproj/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "wproj/convex_order.hpp"
#include "wproj/errors.hpp"
#include "wproj/extrapolation.hpp"
#include "wproj/harness.hpp"
#include "wproj/measure_io.hpp"
#include "wproj/projection.hpp"
#include "wproj/transport.hpp"

namespace wproj {

namespace {

// 17 significant digits, scientific; stdout numbers round-trip losslessly.
std::string format_sci(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.16e", x);
    return buf;
}

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kInput = 2;
constexpr int kNoConvergence = 3;
constexpr int kSuiteFailure = 4;

void write_certificate(const Coupling& c, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ParseError(path.string() + ": cannot open file for writing");
    out << "{\"schema\":\"coupling/1\",\"entries\":[";
    bool first = true;
    for (std::size_t i = 0; i < c.source.size(); ++i) {
        for (std::size_t j = 0; j < c.target.size(); ++j) {
            const double p = c.entry(i, j);
            if (p <= 0.0) continue;
            if (!first) out << ',';
            first = false;
            out << '[' << i << ',' << j << ',' << format_full(p) << ']';
        }
    }
    out << "],\"cost\":" << format_full(c.cost) << "}\n";
}

} // namespace

int cli_run(int argc, const char* const* argv) {
    CLI::App app{"2-Wasserstein projections in convex order, metric extrapolation, "
                 "and the stability certification suite"};
    app.require_subcommand(1);

    // w2
    std::string w2_a, w2_b;
    auto* cmd_w2 = app.add_subcommand("w2", "print the W2 distance between two measures");
    cmd_w2->add_option("A", w2_a, "first measure (JSON)")->required();
    cmd_w2->add_option("B", w2_b, "second measure (JSON)")->required();

    // check-order
    std::string ord_mu, ord_nu, ord_cert;
    double ord_tol = 1e-9;
    auto* cmd_ord = app.add_subcommand("check-order", "decide mu <= nu in convex order");
    cmd_ord->add_option("MU", ord_mu, "candidate dominated measure (JSON)")->required();
    cmd_ord->add_option("NU", ord_nu, "candidate dominating measure (JSON)")->required();
    cmd_ord->add_option("--tol", ord_tol, "relaxation tolerance");
    cmd_ord->add_option("--certificate", ord_cert, "write a martingale coupling certificate here");

    // project-backward
    std::string pb_mu, pb_nu, pb_out;
    double pb_gap = 1e-9;
    std::size_t pb_iters = 50000;
    auto* cmd_pb = app.add_subcommand("project-backward", "backward projection of MU onto {<= NU}");
    cmd_pb->add_option("MU", pb_mu)->required();
    cmd_pb->add_option("NU", pb_nu)->required();
    cmd_pb->add_option("--out", pb_out, "output measure path")->required();
    cmd_pb->add_option("--fw-gap", pb_gap, "Frank-Wolfe gap tolerance (relative)");
    cmd_pb->add_option("--max-iters", pb_iters, "iteration budget");

    // project-forward
    std::string pf_mu, pf_nu, pf_out;
    double pf_t = 2.0;
    auto* cmd_pf = app.add_subcommand("project-forward", "forward projection of NU onto {MU <=}");
    cmd_pf->add_option("MU", pf_mu)->required();
    cmd_pf->add_option("NU", pf_nu)->required();
    cmd_pf->add_option("--out", pf_out, "output measure path")->required();
    cmd_pf->add_option("--t", pf_t, "pipeline time (> 1)");

    // extrapolate
    std::string ex_nu0, ex_nu1, ex_out;
    double ex_t = 0.0;
    auto* cmd_ex = app.add_subcommand("extrapolate", "metric extrapolation E^t(NU0, NU1)");
    cmd_ex->add_option("NU0", ex_nu0)->required();
    cmd_ex->add_option("NU1", ex_nu1)->required();
    cmd_ex->add_option("--t", ex_t, "extrapolation time (> 1)")->required();
    cmd_ex->add_option("--out", ex_out, "output measure path")->required();

    // stability-suite
    std::string ss_config, ss_outdir;
    auto* cmd_ss = app.add_subcommand("stability-suite", "run the randomized inequality suite");
    cmd_ss->add_option("--config", ss_config, "harness config (JSON)");
    cmd_ss->add_option("--out-dir", ss_outdir, "directory for report.csv / summary.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (cmd_w2->parsed()) {
            const DiscreteMeasure a = load_measure(w2_a);
            const DiscreteMeasure b = load_measure(w2_b);
            std::cout << format_sci(w2_distance(a, b)) << "\n";
            return kOk;
        }

        if (cmd_ord->parsed()) {
            const DiscreteMeasure mu = load_measure(ord_mu);
            const DiscreteMeasure nu = load_measure(ord_nu);
            // Route through the LP when a certificate is requested, so 1D
            // verdicts also come with a coupling.
            const OrderCheck check = ord_cert.empty() ? check_convex_order(mu, nu, ord_tol)
                                                      : check_convex_order_lp(mu, nu, ord_tol);
            std::cout << (check.dominated() ? "Dominated" : "NotDominated");
            if (check.marginal) std::cout << " (marginal)";
            std::cout << "\n";
            if (!check.dominated() && check.witness)
                std::cout << "witness: " << check.witness->describe() << "\n";
            if (!ord_cert.empty() && check.certificate) write_certificate(*check.certificate, ord_cert);
            return kOk;
        }

        if (cmd_pb->parsed()) {
            const DiscreteMeasure mu = load_measure(pb_mu);
            const DiscreteMeasure nu = load_measure(pb_nu);
            SolverConfig cfg;
            cfg.fw_gap_tol = pb_gap;
            cfg.max_iters = pb_iters;
            const BackwardSolution sol = backward_project(mu, nu, cfg);
            save_measure(sol.projected, std::filesystem::path(pb_out));
            if (!sol.converged) {
                std::cerr << "warning: gap " << format_full(sol.fw_gap) << " after "
                          << sol.iterations << " iterations\n";
                return kNoConvergence;
            }
            return kOk;
        }

        if (cmd_pf->parsed()) {
            const DiscreteMeasure mu = load_measure(pf_mu);
            const DiscreteMeasure nu = load_measure(pf_nu);
            SolverConfig cfg;
            cfg.t_pipeline = pf_t;
            const DiscreteMeasure out =
                mu.dim() == 1 ? forward_project_1d(mu, nu) : forward_project(mu, nu, cfg);
            save_measure(out, std::filesystem::path(pf_out));
            return kOk;
        }

        if (cmd_ex->parsed()) {
            const DiscreteMeasure nu0 = load_measure(ex_nu0);
            const DiscreteMeasure nu1 = load_measure(ex_nu1);
            save_measure(extrapolate(nu0, nu1, ex_t), std::filesystem::path(ex_out));
            return kOk;
        }

        if (cmd_ss->parsed()) {
            HarnessConfig cfg;
            if (!ss_config.empty()) {
                std::ifstream in(ss_config);
                if (!in) throw ParseError(ss_config + ": cannot open config");
                cfg = parse_harness_config(in, ss_config);
            }
            const SuiteReport report = run_suite(cfg);

            std::filesystem::create_directories(ss_outdir);
            {
                std::ofstream csv(std::filesystem::path(ss_outdir) / "report.csv");
                if (!csv) throw ParseError(ss_outdir + ": cannot write report.csv");
                write_report_csv(report, csv);
            }
            {
                std::ofstream js(std::filesystem::path(ss_outdir) / "summary.json");
                if (!js) throw ParseError(ss_outdir + ": cannot write summary.json");
                write_summary_json(report, js);
            }
            for (const auto& s : report.summaries) {
                std::cout << check_name(s.check) << " min_margin " << format_full(s.min_margin)
                          << (s.failures || s.errors ? " FAIL" : " ok") << "\n";
            }
            std::cout << (report.pass ? "suite: pass" : "suite: FAIL") << "\n";
            return report.pass ? kOk : kSuiteFailure;
        }
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInput;
    } catch (const SchemaVersionUnsupported& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInput;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInput;
    } catch (const SolverFailure& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return kNoConvergence;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInput;
    }
    return kUsage;
}

} // namespace wproj
