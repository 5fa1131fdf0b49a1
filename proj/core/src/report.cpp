#include "acr/report.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace acr {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

void validate(const RunConfig& c) {
    if (c.n < 2) throw UsageError("run: n must be >= 2");
    if (!(c.eps > 0)) throw UsageError("run: eps must be positive");
    if (!(c.eta > 0)) throw UsageError("run: eta must be positive");
    if (c.leaf < 1) throw UsageError("run: leaf must be >= 1");
    if (c.workers < 1) throw UsageError("run: workers must be >= 1");
    if (!(c.tol > 0)) throw UsageError("run: tol must be positive");
    if (c.max_iterations < 1) throw UsageError("run: max_iterations must be >= 1");
    if (c.alpha < 0) throw UsageError("run: alpha must be nonnegative");
    if (c.mode == RunMode::Pcg && c.problem == ProblemKind::ConvDiff && c.alpha > 0)
        throw UsageError("run: pcg requires a symmetric operator; "
                         "use refine for convection-diffusion");
}

AcrConfig to_acr_config(const RunConfig& c) {
    AcrConfig a;
    a.mode = c.mode == RunMode::CrDense ? ArithmeticMode::Dense : ArithmeticMode::HMatrix;
    a.eps = c.eps;
    a.eta = c.eta;
    a.leaf_size = c.leaf;
    return a;
}

json ledger_json(const std::vector<LevelTraffic>& lv) {
    json arr = json::array();
    for (const auto& l : lv)
        arr.push_back({{"level", l.level},
                       {"messages", l.messages},
                       {"bytes", l.bytes},
                       {"active_workers", l.active_workers},
                       {"idle_workers", l.idle_workers}});
    return arr;
}

std::vector<LevelTraffic> ledger_from_json(const json& arr) {
    std::vector<LevelTraffic> out;
    for (const auto& l : arr)
        out.push_back(LevelTraffic{l.at("level"), l.at("messages"), l.at("bytes"),
                                   l.at("active_workers"), l.at("idle_workers")});
    return out;
}

json report_json(const SolveReport& r) {
    const RunConfig& c = r.config;
    return json{
        {"schema", 1},
        {"config",
         {{"problem", problem_kind_name(c.problem)},
          {"n", c.n},
          {"alpha", c.alpha},
          {"a", c.a},
          {"kappa", c.kappa},
          {"mode", run_mode_name(c.mode)},
          {"eps", c.eps},
          {"eta", c.eta},
          {"leaf", c.leaf},
          {"workers", c.workers},
          {"seed", c.seed},
          {"tol", c.tol},
          {"max_iterations", c.max_iterations},
          {"output", c.output},
          {"format", c.format == ReportFormat::Json ? "json" : "csv"}}},
        {"relative_residual", r.relative_residual},
        {"average_rank", r.average_rank},
        {"largest_rank", r.largest_rank},
        {"factor_bytes", r.factor_bytes},
        {"peak_bytes", r.peak_bytes},
        {"peak_is_estimate", r.peak_is_estimate},
        {"t_factor", r.t_factor},
        {"t_solve", r.t_solve},
        {"iterations", r.iterations},
        {"converged", r.converged},
        {"residual_history", r.residual_history},
        {"ledger", {{"factor", ledger_json(r.factor_ledger)}, {"solve", ledger_json(r.solve_ledger)}}},
        {"error", r.error}};
}

SolveReport report_from_json(const json& j) {
    SolveReport r;
    const json& c = j.at("config");
    r.config.problem = parse_problem_kind(c.at("problem"));
    r.config.n = c.at("n");
    r.config.alpha = c.at("alpha");
    r.config.a = c.at("a");
    r.config.kappa = c.at("kappa");
    r.config.mode = parse_run_mode(c.at("mode"));
    r.config.eps = c.at("eps");
    r.config.eta = c.at("eta");
    r.config.leaf = c.at("leaf");
    r.config.workers = c.at("workers");
    r.config.seed = c.at("seed");
    r.config.tol = c.at("tol");
    r.config.max_iterations = c.at("max_iterations");
    r.config.output = c.at("output");
    r.config.format = parse_report_format(c.at("format"));
    r.relative_residual = j.at("relative_residual");
    r.average_rank = j.at("average_rank");
    r.largest_rank = j.at("largest_rank");
    r.factor_bytes = j.at("factor_bytes");
    r.peak_bytes = j.at("peak_bytes");
    r.peak_is_estimate = j.at("peak_is_estimate");
    r.t_factor = j.at("t_factor");
    r.t_solve = j.at("t_solve");
    r.iterations = j.at("iterations");
    r.converged = j.at("converged");
    r.residual_history = j.at("residual_history").get<std::vector<double>>();
    r.factor_ledger = ledger_from_json(j.at("ledger").at("factor"));
    r.solve_ledger = ledger_from_json(j.at("ledger").at("solve"));
    r.error = j.at("error");
    return r;
}

// ---- CSV (schema version 1; column order is fixed) ----

const char* kCsvHeader =
    "schema,problem,n,alpha,a,kappa,mode,eps,eta,leaf,workers,seed,tol,max_iterations,"
    "output,format,relative_residual,average_rank,largest_rank,factor_bytes,peak_bytes,"
    "peak_is_estimate,t_factor,t_solve,iterations,converged,residual_history,"
    "factor_ledger,solve_ledger,error";

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    out += '"';
    return out;
}

std::vector<std::string> csv_split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

std::string join_history(const std::vector<double>& h) {
    std::string out;
    for (size_t i = 0; i < h.size(); ++i) {
        if (i) out += ';';
        out += fmt_double(h[i]);
    }
    return out;
}

std::vector<double> split_history(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ';'))
        if (!tok.empty()) out.push_back(std::stod(tok));
    return out;
}

std::string join_ledger(const std::vector<LevelTraffic>& lv) {
    std::string out;
    for (size_t i = 0; i < lv.size(); ++i) {
        if (i) out += '|';
        out += std::to_string(lv[i].level) + ':' + std::to_string(lv[i].messages) + ':' +
               std::to_string(lv[i].bytes) + ':' + std::to_string(lv[i].active_workers) + ':' +
               std::to_string(lv[i].idle_workers);
    }
    return out;
}

std::vector<LevelTraffic> split_ledger(const std::string& s) {
    std::vector<LevelTraffic> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, '|')) {
        if (tok.empty()) continue;
        LevelTraffic l;
        std::stringstream fs(tok);
        std::string f;
        std::getline(fs, f, ':');
        l.level = std::stoi(f);
        std::getline(fs, f, ':');
        l.messages = std::stol(f);
        std::getline(fs, f, ':');
        l.bytes = std::stol(f);
        std::getline(fs, f, ':');
        l.active_workers = std::stoi(f);
        std::getline(fs, f, ':');
        l.idle_workers = std::stoi(f);
        out.push_back(l);
    }
    return out;
}

std::string csv_row(const SolveReport& r) {
    const RunConfig& c = r.config;
    std::vector<std::string> cols = {
        "1",
        problem_kind_name(c.problem),
        std::to_string(c.n),
        fmt_double(c.alpha),
        fmt_double(c.a),
        fmt_double(c.kappa),
        run_mode_name(c.mode),
        fmt_double(c.eps),
        fmt_double(c.eta),
        std::to_string(c.leaf),
        std::to_string(c.workers),
        std::to_string(c.seed),
        fmt_double(c.tol),
        std::to_string(c.max_iterations),
        c.output,
        c.format == ReportFormat::Json ? "json" : "csv",
        fmt_double(r.relative_residual),
        fmt_double(r.average_rank),
        std::to_string(r.largest_rank),
        std::to_string(r.factor_bytes),
        std::to_string(r.peak_bytes),
        r.peak_is_estimate ? "1" : "0",
        fmt_double(r.t_factor),
        fmt_double(r.t_solve),
        std::to_string(r.iterations),
        r.converged ? "1" : "0",
        join_history(r.residual_history),
        join_ledger(r.factor_ledger),
        join_ledger(r.solve_ledger),
        r.error,
    };
    std::string out;
    for (size_t i = 0; i < cols.size(); ++i) {
        if (i) out += ',';
        out += csv_quote(cols[i]);
    }
    return out;
}

SolveReport report_from_row(const std::vector<std::string>& f) {
    if (f.size() != 30) throw UsageError("csv row has wrong column count");
    if (f[0] != "1") throw UsageError("unsupported csv schema version " + f[0]);
    SolveReport r;
    r.config.problem = parse_problem_kind(f[1]);
    r.config.n = std::stoi(f[2]);
    r.config.alpha = std::stod(f[3]);
    r.config.a = std::stod(f[4]);
    r.config.kappa = std::stod(f[5]);
    r.config.mode = parse_run_mode(f[6]);
    r.config.eps = std::stod(f[7]);
    r.config.eta = std::stod(f[8]);
    r.config.leaf = std::stoi(f[9]);
    r.config.workers = std::stoi(f[10]);
    r.config.seed = std::stol(f[11]);
    r.config.tol = std::stod(f[12]);
    r.config.max_iterations = std::stoi(f[13]);
    r.config.output = f[14];
    r.config.format = parse_report_format(f[15]);
    r.relative_residual = std::stod(f[16]);
    r.average_rank = std::stod(f[17]);
    r.largest_rank = std::stoi(f[18]);
    r.factor_bytes = std::stol(f[19]);
    r.peak_bytes = std::stol(f[20]);
    r.peak_is_estimate = f[21] == "1";
    r.t_factor = std::stod(f[22]);
    r.t_solve = std::stod(f[23]);
    r.iterations = std::stoi(f[24]);
    r.converged = f[25] == "1";
    r.residual_history = split_history(f[26]);
    r.factor_ledger = split_ledger(f[27]);
    r.solve_ledger = split_ledger(f[28]);
    r.error = f[29];
    return r;
}

void write_output(const SolveReport& r) {
    if (r.config.output.empty()) return;
    std::ofstream out(r.config.output);
    if (!out) throw UsageError("cannot open output file: " + r.config.output);
    if (r.config.format == ReportFormat::Json)
        out << emit_json(r) << "\n";
    else
        out << emit_csv({r});
}

} // namespace

RunMode parse_run_mode(const std::string& name) {
    if (name == "acr") return RunMode::Acr;
    if (name == "cr-dense") return RunMode::CrDense;
    if (name == "pcg") return RunMode::Pcg;
    if (name == "refine") return RunMode::Refine;
    throw UsageError("unknown run mode: " + name);
}

std::string run_mode_name(RunMode mode) {
    switch (mode) {
        case RunMode::Acr: return "acr";
        case RunMode::CrDense: return "cr-dense";
        case RunMode::Pcg: return "pcg";
        case RunMode::Refine: return "refine";
    }
    return "?";
}

ReportFormat parse_report_format(const std::string& name) {
    if (name == "json") return ReportFormat::Json;
    if (name == "csv") return ReportFormat::Csv;
    throw UsageError("unknown report format: " + name);
}

bool operator==(const RunConfig& a, const RunConfig& b) {
    return a.problem == b.problem && a.n == b.n && a.alpha == b.alpha && a.a == b.a &&
           a.kappa == b.kappa && a.mode == b.mode && a.eps == b.eps && a.eta == b.eta &&
           a.leaf == b.leaf && a.workers == b.workers && a.seed == b.seed && a.tol == b.tol &&
           a.max_iterations == b.max_iterations && a.output == b.output && a.format == b.format;
}

bool operator==(const LevelTraffic& a, const LevelTraffic& b) {
    return a.level == b.level && a.messages == b.messages && a.bytes == b.bytes &&
           a.active_workers == b.active_workers && a.idle_workers == b.idle_workers;
}

std::optional<long> peak_rss_bytes() {
    std::ifstream status("/proc/self/status");
    std::string line;
    while (std::getline(status, line)) {
        if (line.rfind("VmHWM:", 0) != 0) continue;
        std::stringstream ss(line.substr(6));
        long kb = 0;
        ss >> kb;
        if (kb > 0) return kb * 1024L;
    }
    return std::nullopt;
}

SolveReport run(const RunConfig& config) {
    validate(config);
    SolveReport rep;
    rep.config = config;

    ProblemSpec ps;
    ps.kind = config.problem;
    ps.n = config.n;
    ps.alpha = config.alpha;
    ps.a = config.a;
    ps.kappa = config.kappa;
    const BlockTridiagonalSystem system = assemble(ps);

    const AcrConfig ac = to_acr_config(config);
    const auto t0 = Clock::now();
    std::optional<AcrFactorization> fact;
    std::vector<PlaneVector> u;
    if (config.workers > 1) {
        const ParallelPlan plan = plan_schedule(config.n, config.workers);
        ParallelRun pr = execute_parallel_factor(system, plan, ac);
        rep.factor_ledger = pr.ledger.factor;
        rep.solve_ledger = pr.ledger.solve;
        fact.emplace(std::move(pr.factorization));
        u = std::move(pr.u);
    } else {
        fact.emplace(acr_factor(system, ac));
    }
    rep.t_factor = seconds_since(t0);

    const auto t1 = Clock::now();
    switch (config.mode) {
        case RunMode::Acr:
        case RunMode::CrDense:
            if (u.empty()) u = fact->solve(system.rhs());
            break;
        case RunMode::Pcg: {
            KrylovResult res = pcg(system, &*fact, config.tol, config.max_iterations);
            u = std::move(res.u);
            rep.iterations = res.trace.iterations;
            rep.converged = res.trace.converged;
            rep.residual_history = std::move(res.trace.residual_history);
            break;
        }
        case RunMode::Refine: {
            KrylovResult res =
                iterative_refinement(system, *fact, config.tol, config.max_iterations);
            u = std::move(res.u);
            rep.iterations = res.trace.iterations;
            rep.converged = res.trace.converged;
            rep.residual_history = std::move(res.trace.residual_history);
            break;
        }
    }
    rep.t_solve = seconds_since(t1);

    rep.relative_residual = relative_residual(system, u, system.rhs());
    const RankStats stats = fact->inverse_rank_stats();
    rep.average_rank = stats.average_rank;
    rep.largest_rank = stats.largest_rank;
    rep.factor_bytes = fact->factor_bytes();
    if (auto peak = peak_rss_bytes()) {
        rep.peak_bytes = *peak;
    } else {
        rep.peak_bytes = rep.factor_bytes;
        rep.peak_is_estimate = true;
    }

    write_output(rep);
    return rep;
}

std::vector<SolveReport> sweep(const RunConfig& base, const std::string& axis,
                               const std::vector<double>& values) {
    if (values.empty()) throw UsageError("sweep: empty axis");
    if (axis != "eps" && axis != "n" && axis != "alpha")
        throw UsageError("sweep: unknown axis " + axis + " (expected eps, n or alpha)");

    std::vector<SolveReport> reports;
    for (double v : values) {
        RunConfig c = base;
        c.output.clear(); // the combined file is written below
        if (axis == "eps")
            c.eps = v;
        else if (axis == "n")
            c.n = static_cast<int>(v);
        else
            c.alpha = v;
        try {
            reports.push_back(run(c));
        } catch (const Error& e) {
            SolveReport failed;
            failed.config = c;
            failed.converged = false;
            failed.error = e.what();
            reports.push_back(std::move(failed));
        }
        reports.back().config.output = base.output;
    }

    if (!base.output.empty()) {
        std::ofstream out(base.output);
        if (!out) throw UsageError("cannot open output file: " + base.output);
        if (base.format == ReportFormat::Json)
            out << emit_json(reports) << "\n";
        else
            out << emit_csv(reports);
    }
    return reports;
}

std::string emit_json(const SolveReport& report) { return report_json(report).dump(2); }

std::string emit_json(const std::vector<SolveReport>& reports) {
    json arr = json::array();
    for (const auto& r : reports) arr.push_back(report_json(r));
    return arr.dump(2);
}

SolveReport parse_json(const std::string& text) { return report_from_json(json::parse(text)); }

std::vector<SolveReport> parse_json_list(const std::string& text) {
    std::vector<SolveReport> out;
    for (const auto& j : json::parse(text)) out.push_back(report_from_json(j));
    return out;
}

std::string emit_csv(const std::vector<SolveReport>& reports) {
    std::string out = kCsvHeader;
    out += '\n';
    for (const auto& r : reports) {
        out += csv_row(r);
        out += '\n';
    }
    return out;
}

std::vector<SolveReport> parse_csv(const std::string& text) {
    std::stringstream ss(text);
    std::string line;
    if (!std::getline(ss, line)) throw UsageError("csv input is empty");
    if (line != kCsvHeader) throw UsageError("csv header does not match schema version 1");
    std::vector<SolveReport> out;
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        out.push_back(report_from_row(csv_split(line)));
    }
    return out;
}

} // namespace acr
