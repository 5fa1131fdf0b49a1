#ifndef ACR_REPORT_HPP
#define ACR_REPORT_HPP

#include <optional>
#include <string>

#include "acr/discretize.hpp"
#include "acr/krylov.hpp"
#include "acr/parallel.hpp"

namespace acr {

enum class RunMode { Acr, CrDense, Pcg, Refine };
RunMode parse_run_mode(const std::string& name);
std::string run_mode_name(RunMode mode);

enum class ReportFormat { Json, Csv };
ReportFormat parse_report_format(const std::string& name);

/// Full description of one solver run; echoed verbatim into the report.
struct RunConfig {
    ProblemKind problem = ProblemKind::Poisson;
    int n = 8;
    double alpha = 0.0;
    double a = 1.0;
    double kappa = 0.0; ///< 0: pick ~12 points per wavelength
    RunMode mode = RunMode::Acr;
    double eps = 1e-3;
    double eta = 2.0;
    int leaf = 32;
    int workers = 1;
    long seed = 0;
    double tol = 1e-6;       ///< iterative stopping tolerance
    int max_iterations = 200;
    std::string output;      ///< report destination; empty writes nowhere
    ReportFormat format = ReportFormat::Json;
};

bool operator==(const RunConfig&, const RunConfig&);
bool operator==(const LevelTraffic&, const LevelTraffic&);

struct SolveReport {
    RunConfig config;
    double relative_residual = 0;
    double average_rank = 0;
    int largest_rank = 0;
    long factor_bytes = 0;
    long peak_bytes = 0;
    bool peak_is_estimate = false; ///< true when no platform counter was available
    double t_factor = 0;
    double t_solve = 0;
    int iterations = 0;
    bool converged = true;
    std::vector<double> residual_history;           ///< iterative modes only
    std::vector<LevelTraffic> factor_ledger, solve_ledger; ///< parallel runs only
    std::string error; ///< nonempty when a sweep point failed

    bool operator==(const SolveReport&) const = default;
};

/// Execute the configured pipeline: assemble, factor (parallel when
/// workers > 1), then direct solve / PCG / refinement per mode.
SolveReport run(const RunConfig& config);

/// One run per axis value; failures are captured in the report's error
/// field without aborting the sweep. axis is "eps", "n" or "alpha".
std::vector<SolveReport> sweep(const RunConfig& base, const std::string& axis,
                               const std::vector<double>& values);

std::string emit_json(const SolveReport& report);
std::string emit_json(const std::vector<SolveReport>& reports);
SolveReport parse_json(const std::string& text);
std::vector<SolveReport> parse_json_list(const std::string& text);

/// Fixed-column CSV (schema version 1); first line is the header.
std::string emit_csv(const std::vector<SolveReport>& reports);
std::vector<SolveReport> parse_csv(const std::string& text);

/// Peak resident set size in bytes, or nullopt when unavailable.
std::optional<long> peak_rss_bytes();

} // namespace acr

#endif
