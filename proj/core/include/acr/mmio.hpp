#ifndef ACR_MMIO_HPP
#define ACR_MMIO_HPP

#include <string>

#include "acr/block.hpp"

namespace acr {

/// Matrix Market coordinate export/import for plane blocks, plus
/// one-value-per-line text for plane vectors.

void write_matrix_market(const PlaneBlock& block, const std::string& path);
/// Coordinates are reconstructed for an n x n plane grid inferred from dim.
PlaneBlock read_matrix_market(const std::string& path);

void write_plane_vector(const Eigen::VectorXd& v, const std::string& path);
Eigen::VectorXd read_plane_vector(const std::string& path);

/// Writes D_0.mtx ... D_{n-1}.mtx, E_1.mtx ... , F_0.mtx ..., f_0.txt ...
/// into `dir` (created if missing). Off-diagonal file indices follow the
/// coupling plane: E_j couples plane j to j-1, F_j couples plane j to j+1.
void write_system(const BlockTridiagonalSystem& system, const std::string& dir);
BlockTridiagonalSystem read_system(const std::string& dir, int plane_count);

} // namespace acr

#endif
