#include "acr/krylov.hpp"

#include <chrono>

namespace acr {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

Eigen::VectorXd apply_flat(const BlockTridiagonalSystem& system, const Eigen::VectorXd& x) {
    auto planes = acr::apply(system, to_planes(x, system.plane_count(), system.plane_dim()));
    return to_flat(planes);
}

Eigen::VectorXd precondition(const AcrFactorization& M, const BlockTridiagonalSystem& system,
                             const Eigen::VectorXd& r) {
    std::vector<Eigen::VectorXd> planes(system.plane_count());
    const int d = system.plane_dim();
    for (int j = 0; j < system.plane_count(); ++j) planes[j] = r.segment(j * d, d);
    return to_flat(M.solve(planes));
}

KrylovResult wrap_result(const BlockTridiagonalSystem& system, Eigen::VectorXd x,
                         IterationTrace trace) {
    KrylovResult out;
    out.u = to_planes(x, system.plane_count(), system.plane_dim());
    out.trace = std::move(trace);
    return out;
}

} // namespace

KrylovResult pcg(const BlockTridiagonalSystem& system, const AcrFactorization* precond,
                 double tol, int max_iterations) {
    const Eigen::VectorXd b = to_flat(wrap_planes(system.rhs()));
    const double bnorm = b.norm();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
    IterationTrace trace;
    if (bnorm == 0.0) {
        trace.converged = true;
        return wrap_result(system, std::move(x), std::move(trace));
    }

    const auto t_start = Clock::now();
    double apply_seconds = 0;
    int applies = 0;
    auto apply_precond = [&](const Eigen::VectorXd& v) {
        if (!precond) return v;
        const auto t = Clock::now();
        Eigen::VectorXd out = precondition(*precond, system, v);
        apply_seconds += seconds_since(t);
        ++applies;
        return out;
    };

    Eigen::VectorXd r = b;
    Eigen::VectorXd z = apply_precond(r);
    Eigen::VectorXd p = z;
    double rz = r.dot(z);

    for (int k = 1; k <= max_iterations; ++k) {
        const Eigen::VectorXd Ap = apply_flat(system, p);
        const double pAp = p.dot(Ap);
        if (!(pAp > 0))
            throw IndefiniteError("conjugate gradient: nonpositive curvature p^T A p = " +
                                  std::to_string(pAp));
        const double alpha = rz / pAp;
        x += alpha * p;
        r -= alpha * Ap;

        // stop on the recomputed residual, not the recurrence residual
        const double true_res = (b - apply_flat(system, x)).norm() / bnorm;
        trace.residual_history.push_back(true_res);
        trace.iterations = k;
        if (true_res <= tol) {
            trace.converged = true;
            break;
        }

        z = apply_precond(r);
        const double rz_next = r.dot(z);
        p = z + (rz_next / rz) * p;
        rz = rz_next;
    }
    trace.total_time = seconds_since(t_start);
    if (applies > 0) trace.apply_time = apply_seconds / applies;
    return wrap_result(system, std::move(x), std::move(trace));
}

KrylovResult iterative_refinement(const BlockTridiagonalSystem& system,
                                  const AcrFactorization& precond, double tol,
                                  int max_iterations) {
    const Eigen::VectorXd b = to_flat(wrap_planes(system.rhs()));
    const double bnorm = b.norm();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
    IterationTrace trace;
    if (bnorm == 0.0) {
        trace.converged = true;
        return wrap_result(system, std::move(x), std::move(trace));
    }

    const auto t_start = Clock::now();
    double apply_seconds = 0;
    double prev = 1.0; // residual of the zero initial guess
    int growth_streak = 0;
    for (int k = 1; k <= max_iterations; ++k) {
        const Eigen::VectorXd r = b - apply_flat(system, x);
        const auto t = Clock::now();
        x += precondition(precond, system, r);
        apply_seconds += seconds_since(t);
        const double res = (b - apply_flat(system, x)).norm() / bnorm;
        trace.residual_history.push_back(res);
        trace.iterations = k;
        if (res <= tol) {
            trace.converged = true;
            break;
        }
        growth_streak = res > prev ? growth_streak + 1 : 0;
        if (growth_streak >= 3)
            throw DivergenceError("iterative refinement: residual grew over three "
                                  "consecutive corrections (last " +
                                  std::to_string(res) + ")");
        prev = res;
    }
    trace.total_time = seconds_since(t_start);
    if (trace.iterations > 0) trace.apply_time = apply_seconds / trace.iterations;
    return wrap_result(system, std::move(x), std::move(trace));
}

} // namespace acr
