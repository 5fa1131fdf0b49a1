// Command-line harness: generate test problems, factor, solve, precondition
// and run parameter sweeps, emitting machine-readable reports.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "acr/mmio.hpp"
#include "acr/report.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitSolverFailure = 3;

struct CommonFlags {
    std::string problem = "poisson";
    std::string mode = "acr";
    std::string format = "json";
    acr::RunConfig cfg;
};

void add_problem_flags(CLI::App* cmd, CommonFlags& fl) {
    cmd->add_option("--problem", fl.problem, "poisson | convdiff | helmholtz")
        ->check(CLI::IsMember({"poisson", "convdiff", "helmholtz"}));
    cmd->add_option("--n", fl.cfg.n, "grid points per axis")->check(CLI::PositiveNumber);
    cmd->add_option("--alpha", fl.cfg.alpha, "convection strength (convdiff)");
    cmd->add_option("--a", fl.cfg.a, "vortex frequency (convdiff)");
    cmd->add_option("--kappa", fl.cfg.kappa, "wavenumber (helmholtz; 0 picks n/2)");
}

void add_solver_flags(CLI::App* cmd, CommonFlags& fl) {
    cmd->add_option("--eps", fl.cfg.eps, "block truncation tolerance");
    cmd->add_option("--eta", fl.cfg.eta, "admissibility parameter");
    cmd->add_option("--leaf", fl.cfg.leaf, "cluster tree leaf size");
    cmd->add_option("--workers", fl.cfg.workers, "worker threads (power of two)");
    cmd->add_option("--seed", fl.cfg.seed, "seed echoed into the report");
    cmd->add_option("--tol", fl.cfg.tol, "iterative stopping tolerance");
    cmd->add_option("--max-iterations", fl.cfg.max_iterations, "iteration cap");
    cmd->add_option("--output,-o", fl.cfg.output, "report file (stdout if omitted)");
    cmd->add_option("--format", fl.format, "json | csv")
        ->check(CLI::IsMember({"json", "csv"}));
}

acr::RunConfig finish_config(CommonFlags& fl) {
    fl.cfg.problem = acr::parse_problem_kind(fl.problem);
    fl.cfg.mode = acr::parse_run_mode(fl.mode);
    fl.cfg.format = acr::parse_report_format(fl.format);
    if (const char* env = std::getenv("ACR_WORKERS")) {
        const int w = std::atoi(env);
        if (w < 1) throw acr::UsageError("ACR_WORKERS must be a positive integer");
        fl.cfg.workers = w;
    }
    return fl.cfg;
}

void print_report(const acr::SolveReport& rep) {
    if (!rep.config.output.empty()) return; // run() already wrote the file
    if (rep.config.format == acr::ReportFormat::Json)
        std::cout << acr::emit_json(rep) << "\n";
    else
        std::cout << acr::emit_csv({rep});
}

std::vector<double> parse_values(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(std::stod(tok));
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tolerance-controlled block tridiagonal solver"};
    app.require_subcommand(1);

    CommonFlags gen, fac, sol, pcg_fl, bench;
    std::string gen_out = "system";
    std::string axis = "eps";
    std::string values = "1e-1,1e-2,1e-3";
    bool refine = false;

    auto* cmd_gen = app.add_subcommand("generate", "write a problem as Matrix Market files");
    add_problem_flags(cmd_gen, gen);
    cmd_gen->add_option("--out", gen_out, "output directory");

    auto* cmd_fac = app.add_subcommand("factor", "factor only; report bytes, ranks, time");
    add_problem_flags(cmd_fac, fac);
    add_solver_flags(cmd_fac, fac);
    cmd_fac->add_option("--mode", fac.mode, "acr | cr-dense")
        ->check(CLI::IsMember({"acr", "cr-dense"}));

    auto* cmd_sol = app.add_subcommand("solve", "factor and solve directly");
    add_problem_flags(cmd_sol, sol);
    add_solver_flags(cmd_sol, sol);
    cmd_sol->add_option("--mode", sol.mode, "acr | cr-dense")
        ->check(CLI::IsMember({"acr", "cr-dense"}));

    auto* cmd_pcg = app.add_subcommand("pcg", "iterate with the factorization as preconditioner");
    add_problem_flags(cmd_pcg, pcg_fl);
    add_solver_flags(cmd_pcg, pcg_fl);
    cmd_pcg->add_flag("--refine", refine, "use iterative refinement (nonsymmetric systems)");

    auto* cmd_bench = app.add_subcommand("bench", "sweep one parameter, one report per point");
    add_problem_flags(cmd_bench, bench);
    add_solver_flags(cmd_bench, bench);
    cmd_bench->add_option("--mode", bench.mode, "acr | cr-dense | pcg | refine");
    cmd_bench->add_option("--axis", axis, "eps | n | alpha");
    cmd_bench->add_option("--values", values, "comma-separated axis values");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (cmd_gen->parsed()) {
            acr::ProblemSpec ps;
            ps.kind = acr::parse_problem_kind(gen.problem);
            ps.n = gen.cfg.n;
            ps.alpha = gen.cfg.alpha;
            ps.a = gen.cfg.a;
            ps.kappa = gen.cfg.kappa;
            acr::write_system(acr::assemble(ps), gen_out);
            std::cout << "wrote " << ps.n << "-plane system to " << gen_out << "\n";
        } else if (cmd_fac->parsed()) {
            acr::RunConfig cfg = finish_config(fac);
            acr::SolveReport rep = acr::run(cfg); // factor + solve; solve cost is reported separately
            print_report(rep);
        } else if (cmd_sol->parsed()) {
            acr::SolveReport rep = acr::run(finish_config(sol));
            print_report(rep);
        } else if (cmd_pcg->parsed()) {
            pcg_fl.mode = refine ? "refine" : "pcg";
            acr::SolveReport rep = acr::run(finish_config(pcg_fl));
            print_report(rep);
            if (!rep.converged) {
                std::cerr << "{\"error\": \"did not converge in " << rep.iterations
                          << " iterations\"}\n";
                return kExitSolverFailure;
            }
        } else if (cmd_bench->parsed()) {
            acr::RunConfig cfg = finish_config(bench);
            auto reports = acr::sweep(cfg, axis, parse_values(values));
            if (cfg.output.empty()) {
                if (cfg.format == acr::ReportFormat::Json)
                    std::cout << acr::emit_json(reports) << "\n";
                else
                    std::cout << acr::emit_csv(reports);
            }
        }
    } catch (const acr::UsageError& e) {
        std::cerr << "{\"error\": \"" << e.what() << "\", \"kind\": \"usage\"}\n";
        return kExitUsage;
    } catch (const acr::Error& e) {
        std::cerr << "{\"error\": \"" << e.what() << "\", \"kind\": \"solver\"}\n";
        return kExitSolverFailure;
    } catch (const std::exception& e) {
        std::cerr << "{\"error\": \"" << e.what() << "\", \"kind\": \"internal\"}\n";
        return kExitSolverFailure;
    }
    return 0;
}
