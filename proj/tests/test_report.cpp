#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "acr/report.hpp"

using namespace acr;

namespace {

SolveReport strip_timing(SolveReport r) {
    r.t_factor = 0;
    r.t_solve = 0;
    r.peak_bytes = 0; // process-cumulative, not a determinism field
    r.peak_is_estimate = false;
    return r;
}

RunConfig small_config(RunMode mode) {
    RunConfig cfg;
    cfg.problem = ProblemKind::Poisson;
    cfg.n = 8;
    cfg.mode = mode;
    cfg.eps = 1e-2;
    return cfg;
}

} // namespace

TEST_CASE("cr-dense run is oracle grade") {
    auto report = run(small_config(RunMode::CrDense));
    CHECK(report.relative_residual <= 1e-10);
    CHECK(report.factor_bytes > 0);
    CHECK(report.converged);
    CHECK(report.error.empty());
    CHECK(report.largest_rank >= report.average_rank);
}

TEST_CASE("acr run populates rank statistics") {
    auto cfg = small_config(RunMode::Acr);
    cfg.n = 16; // large enough that admissible blocks carry nonzero rank
    cfg.eps = 1e-3;
    auto report = run(cfg);
    CHECK(report.relative_residual <= 1e-1);
    CHECK(report.largest_rank >= 1);
    CHECK(report.factor_bytes > 0);
    CHECK(report.t_factor > 0);
}

TEST_CASE("JSON report round-trips exactly") {
    auto report = run(small_config(RunMode::Acr));
    CHECK(parse_json(emit_json(report)) == report);

    // iterative mode exercises the residual-history field
    auto cfg = small_config(RunMode::Pcg);
    cfg.tol = 1e-8;
    auto pcg_report = run(cfg);
    CHECK(!pcg_report.residual_history.empty());
    CHECK(parse_json(emit_json(pcg_report)) == pcg_report);

    // parallel run exercises the ledger fields
    auto par_cfg = small_config(RunMode::Acr);
    par_cfg.workers = 2;
    auto par_report = run(par_cfg);
    CHECK(!par_report.factor_ledger.empty());
    CHECK(parse_json(emit_json(par_report)) == par_report);
}

TEST_CASE("JSON list round-trips") {
    std::vector<SolveReport> reports{run(small_config(RunMode::CrDense)),
                                     run(small_config(RunMode::Acr))};
    auto back = parse_json_list(emit_json(reports));
    REQUIRE(back.size() == 2);
    CHECK(back[0] == reports[0]);
    CHECK(back[1] == reports[1]);
}

TEST_CASE("CSV report round-trips exactly") {
    auto cfg = small_config(RunMode::Pcg);
    cfg.workers = 1;
    cfg.format = ReportFormat::Csv;
    std::vector<SolveReport> reports{run(cfg)};
    auto par_cfg = small_config(RunMode::Acr);
    par_cfg.workers = 2;
    reports.push_back(run(par_cfg));

    const std::string text = emit_csv(reports);
    CHECK(text.rfind("schema", 0) == 0); // header first
    auto back = parse_csv(text);
    REQUIRE(back.size() == reports.size());
    for (size_t i = 0; i < back.size(); ++i) CHECK(back[i] == reports[i]);
}

TEST_CASE("identical configs give identical reports modulo timing") {
    auto cfg = small_config(RunMode::Acr);
    auto a = strip_timing(run(cfg));
    auto b = strip_timing(run(cfg));
    CHECK(a == b);
}

TEST_CASE("sweep over eps is ordered and monotone in residual") {
    auto cfg = small_config(RunMode::Acr);
    auto reports = sweep(cfg, "eps", {1e-1, 1e-2, 1e-3});
    REQUIRE(reports.size() == 3);
    CHECK(reports[0].config.eps == 1e-1);
    CHECK(reports[2].config.eps == 1e-3);
    CHECK(reports[1].relative_residual <= reports[0].relative_residual * 1.0001);
    CHECK(reports[2].relative_residual <= reports[1].relative_residual * 1.0001);
}

TEST_CASE("sweep records failures per point without aborting") {
    auto cfg = small_config(RunMode::Acr);
    auto reports = sweep(cfg, "n", {8, 0, 4}); // n=0 is invalid
    REQUIRE(reports.size() == 3);
    CHECK(reports[0].error.empty());
    CHECK(!reports[1].error.empty());
    CHECK(reports[2].error.empty());
}

TEST_CASE("invalid sweep axis and empty values are usage errors") {
    auto cfg = small_config(RunMode::Acr);
    CHECK_THROWS_AS(sweep(cfg, "bogus", {1.0}), UsageError);
    CHECK_THROWS_AS(sweep(cfg, "eps", {}), UsageError);
}

TEST_CASE("invalid configurations are rejected by run") {
    auto cfg = small_config(RunMode::Acr);
    cfg.eps = -1.0;
    CHECK_THROWS_AS(run(cfg), UsageError);
    cfg = small_config(RunMode::Acr);
    cfg.n = 1;
    CHECK_THROWS_AS(run(cfg), UsageError);
    cfg = small_config(RunMode::Pcg);
    cfg.problem = ProblemKind::ConvDiff; // nonsymmetric: PCG refused
    cfg.alpha = 10.0;
    CHECK_THROWS_AS(run(cfg), UsageError);
}

TEST_CASE("mode and format names round-trip") {
    for (auto mode : {RunMode::Acr, RunMode::CrDense, RunMode::Pcg, RunMode::Refine})
        CHECK(parse_run_mode(run_mode_name(mode)) == mode);
    CHECK_THROWS_AS(parse_run_mode("qr"), UsageError);
    CHECK(parse_report_format("json") == ReportFormat::Json);
    CHECK(parse_report_format("csv") == ReportFormat::Csv);
    CHECK_THROWS_AS(parse_report_format("xml"), UsageError);
}

TEST_CASE("refine mode reaches the requested tolerance") {
    auto cfg = small_config(RunMode::Refine);
    cfg.tol = 1e-10;
    auto report = run(cfg);
    CHECK(report.converged);
    CHECK(report.relative_residual <= 1e-10);
    CHECK(report.iterations >= 1);
}

TEST_CASE("peak memory is reported from the platform counter on Linux") {
    auto peak = peak_rss_bytes();
    REQUIRE(peak.has_value());
    CHECK(*peak > 0);
    auto report = run(small_config(RunMode::Acr));
    CHECK(!report.peak_is_estimate);
    CHECK(report.peak_bytes >= report.factor_bytes);
}
