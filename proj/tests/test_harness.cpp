#include <doctest.h>

#include <cmath>
#include <sstream>

#include "test_support.hpp"
#include "wproj/errors.hpp"
#include "wproj/harness.hpp"
#include "wproj/oracle.hpp"

using namespace wproj;

TEST_CASE("random measures are bit-exact reproducible") {
    const DiscreteMeasure a = gen_random_measure(2, 6, 1.5, 12345);
    const DiscreteMeasure b = gen_random_measure(2, 6, 1.5, 12345);
    CHECK(a.coords() == b.coords());
    CHECK(a.weights() == b.weights());

    const DiscreteMeasure single = gen_random_measure(3, 1, 1.0, 7);
    CHECK(single.size() == 1);
    CHECK(single.weight(0) == 1.0);
}

TEST_CASE("random atom coordinates are centered (3 sigma)") {
    // Uniform[-1,1] coordinates: sd 1/sqrt(3); runtime standard-error bound.
    const std::size_t draws = 10000;
    double sum = 0.0;
    for (std::uint64_t s = 0; s < draws; ++s) sum += gen_random_measure(1, 1, 1.0, s).atom(0)[0];
    const double mean = sum / static_cast<double>(draws);
    const double bound = 3.0 / (std::sqrt(3.0) * std::sqrt(static_cast<double>(draws)));
    CHECK(std::abs(mean) <= bound);
}

TEST_CASE("config validation") {
    HarnessConfig cfg;
    cfg.trials = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = HarnessConfig{};
    cfg.t_values = {0.5};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = HarnessConfig{};
    cfg.atoms_min = 5;
    cfg.atoms_max = 2;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("config json parsing") {
    std::stringstream in(R"({"seed": 9, "trials": 3, "dims": [1], "atoms": [2, 4],
                            "t_values": [2.0], "checks": ["DISSIPATIVE"]})");
    const HarnessConfig cfg = parse_harness_config(in, "test");
    CHECK(cfg.seed == 9);
    CHECK(cfg.trials == 3);
    CHECK(cfg.checks.size() == 1);
    CHECK(cfg.checks[0] == CheckId::Dissipative);

    std::stringstream bad(R"({"trials": 0})");
    CHECK_THROWS_AS(parse_harness_config(bad, "test"), ConfigError);
    std::stringstream junk("{");
    CHECK_THROWS_AS(parse_harness_config(junk, "test"), ParseError);
    std::stringstream unknown(R"({"checks": ["NOT_A_CHECK"]})");
    CHECK_THROWS_AS(parse_harness_config(unknown, "test"), ParseError);
}

TEST_CASE("degenerate instances give zero margins and pass") {
    HarnessConfig cfg;
    cfg.trials = 1;

    // NONEXPANSIVE with mu~ = mu.
    Instance inst;
    inst.seed = 1;
    inst.dim = 1;
    inst.measures = {gen_random_measure(1, 4, 1.0, 2),
                     gen_random_measure(1, 3, 1.0, 3),
                     gen_random_measure(1, 3, 1.0, 3)};
    const InequalityReport rep = check_inequality(CheckId::Nonexpansive, inst, std::nullopt, cfg);
    CHECK(rep.lhs == 0.0);
    CHECK(rep.rhs == 0.0);
    CHECK(rep.status != CheckStatus::Fail);

    // DISSIPATIVE with nu0 = nu1.
    Instance inst2;
    inst2.seed = 2;
    inst2.dim = 1;
    inst2.measures = {gen_random_measure(1, 4, 1.0, 5), gen_random_measure(1, 4, 1.0, 5)};
    const InequalityReport rep2 = check_inequality(CheckId::Dissipative, inst2, 2.0, cfg);
    CHECK(rep2.lhs <= 1e-12);
    CHECK(rep2.status != CheckStatus::Fail);
}

TEST_CASE("EXTRA_LIP_2T worked example with oracle verification") {
    HarnessConfig cfg;
    Instance inst;
    inst.seed = 3;
    inst.dim = 1;
    inst.measures = {measure_1d({-1.0, 1.0}, {0.5, 0.5}), dirac({0.0}), dirac({0.1})};
    const InequalityReport rep = check_inequality(CheckId::ExtraLip2t, inst, 2.0, cfg);
    CHECK(rep.rhs == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(rep.lhs == doctest::Approx(0.2).epsilon(1e-9));
    CHECK(rep.status == CheckStatus::Pass);
    // Both extrapolations re-verified by the brute-force oracle.
    CHECK(w2_distance(brute_force_extrapolation(inst.measures[0], inst.measures[2], 2.0),
                      dirac({0.2})) <= 1e-6);
}

TEST_CASE("suite reports are deterministic and schema-complete") {
    HarnessConfig cfg;
    cfg.seed = 77;
    cfg.trials = 2;
    cfg.atoms_max = 5;

    const SuiteReport r1 = run_suite(cfg);
    const SuiteReport r2 = run_suite(cfg);

    std::ostringstream csv1, csv2, js1, js2;
    write_report_csv(r1, csv1);
    write_report_csv(r2, csv2);
    CHECK(csv1.str() == csv2.str());
    write_summary_json(r1, js1);
    write_summary_json(r2, js2);
    CHECK(js1.str() == js2.str());

    // Every check id appears and all report fields are finite.
    for (CheckId id : all_checks()) {
        bool seen = false;
        for (const auto& row : r1.rows) seen |= row.check == id;
        CHECK(seen);
    }
    for (const auto& row : r1.rows) {
        CHECK(std::isfinite(row.lhs));
        CHECK(std::isfinite(row.rhs));
        CHECK(std::isfinite(row.margin));
    }
    CHECK(csv1.str().rfind("check_id,instance_seed,dim,t,lhs,rhs,margin,status\n", 0) == 0);
}

TEST_CASE("small smoke suite passes") {
    HarnessConfig cfg;
    cfg.seed = 4242;
    cfg.trials = 4;
    cfg.atoms_max = 5;
    const SuiteReport report = run_suite(cfg);
    for (const auto& s : report.summaries) {
        INFO(check_name(s.check), " min margin ", s.min_margin);
        CHECK(s.failures == 0);
        CHECK(s.errors == 0);
    }
    CHECK(report.pass);
    // Trend slopes exist and are finite.
    CHECK(report.trend.count("forward_holder_slope_dim1") == 1);
    CHECK(std::isfinite(report.trend.at("forward_holder_slope_dim1")));
}
