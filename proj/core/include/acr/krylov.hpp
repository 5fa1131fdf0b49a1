#ifndef ACR_KRYLOV_HPP
#define ACR_KRYLOV_HPP

#include "acr/acr.hpp"

namespace acr {

struct IterationTrace {
    bool converged = false;
    int iterations = 0;
    std::vector<double> residual_history; ///< true relative residual per iteration
    double apply_time = 0; ///< mean seconds per preconditioner application
    double total_time = 0;
};

struct KrylovResult {
    std::vector<PlaneVector> u;
    IterationTrace trace;
};

/// Preconditioned conjugate gradient with true-residual stopping; the
/// preconditioner application is one solve against the factorization
/// (nullptr runs unpreconditioned CG). Throws IndefiniteError when the
/// search-direction curvature p^T A p is nonpositive.
KrylovResult pcg(const BlockTridiagonalSystem& system, const AcrFactorization* precond,
                 double tol, int max_iterations);

/// Iterative refinement u += M^{-1}(f - A u) for nonsymmetric systems.
/// Throws DivergenceError after three consecutive residual increases.
KrylovResult iterative_refinement(const BlockTridiagonalSystem& system,
                                  const AcrFactorization& precond, double tol,
                                  int max_iterations);

} // namespace acr

#endif
