#ifndef ACR_DISCRETIZE_HPP
#define ACR_DISCRETIZE_HPP

#include <string>

#include "acr/block.hpp"

namespace acr {

enum class ProblemKind { Poisson, ConvDiff, Helmholtz };

/// Parameters for the three generators. kappa is chosen by callers so
/// that 2*pi*n/kappa is about 12 grid points per wavelength.
struct ProblemSpec {
    ProblemKind kind = ProblemKind::Poisson;
    int n = 8;
    double alpha = 0.0; ///< convection strength (ConvDiff)
    double a = 1.0;     ///< vortex frequency (ConvDiff)
    double kappa = 0.0; ///< wavenumber (Helmholtz)
};

ProblemKind parse_problem_kind(const std::string& name);
std::string problem_kind_name(ProblemKind kind);

/// kappa giving ~12 points per wavelength on an n-point axis.
double helmholtz_kappa_for(int n);

/// 7-point star stencil for -lap(u) = 1, interior Dirichlet, scaled by h^2.
/// D blocks carry the in-plane 5-point pattern with center 6; E = F = -I.
BlockTridiagonalSystem assemble_poisson(int n);

/// 7-point upwind scheme for -lap(u) + alpha b(x).grad(u) = f; the right-hand
/// side is defined by applying the operator to the sampled reference solution,
/// so the discrete solution is known exactly.
struct ConvDiffProblem {
    BlockTridiagonalSystem system;
    std::vector<PlaneVector> exact_solution;
};
ConvDiffProblem assemble_convdiff(int n, double alpha, double a = 1.0);

/// 27-point trilinear finite element scheme for -(lap(u) + kappa^2 u) = 1:
/// A = K - kappa^2 M with tensor-product stiffness/mass weights; f = h^3.
BlockTridiagonalSystem assemble_helmholtz(int n, double kappa);

BlockTridiagonalSystem assemble(const ProblemSpec& spec);

/// 5-point 2D Poisson operator on an n x n plane grid (center 4); used by
/// the H-inverse admissibility studies.
PlaneBlock poisson2d_block(int n);

/// Truncated-series reference solution of -lap(u) = 1 on the unit cube.
double poisson_series_solution(double x, double y, double z, int terms = 39);

} // namespace acr

#endif
