#ifndef ACR_BLOCK_HPP
#define ACR_BLOCK_HPP

#include <Eigen/Dense>
#include <vector>

#include "acr/errors.hpp"

namespace acr {

/// Uniform grid on the unit cube, Dirichlet interior unknowns only.
struct GridSpec {
    int n; ///< points per axis
    explicit GridSpec(int n_) : n(n_) {
        if (n < 2) throw UsageError("GridSpec: n must be >= 2");
    }
    double spacing() const { return 1.0 / (n + 1); }
    int plane_count() const { return n; }
    int plane_size() const { return n * n; }
    long total_unknowns() const { return static_cast<long>(n) * n * n; }
};

/// One sparse coefficient of a plane block.
struct Entry {
    int row;
    int col;
    double value;
};

/// 2D location of a plane grid node, used for geometric clustering.
struct Point2 {
    double x;
    double y;
};

/// Sparse square block acting on one plane of unknowns.
/// Entries are kept sorted by (row, col); duplicates are summed at construction.
class PlaneBlock {
public:
    PlaneBlock() : dim_(0) {}
    PlaneBlock(int dim, std::vector<Entry> entries, std::vector<Point2> coords);

    int dim() const { return dim_; }
    const std::vector<Entry>& entries() const { return entries_; }
    const std::vector<Point2>& coords() const { return coords_; }
    bool empty() const { return dim_ == 0; }

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
    Eigen::VectorXd apply_transpose(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd to_dense() const;

private:
    int dim_;
    std::vector<Entry> entries_;
    std::vector<Point2> coords_;
};

/// Solution/right-hand-side values of one plane.
struct PlaneVector {
    Eigen::VectorXd values;
    int plane_index = 0;
};

/// Block tridiagonal operator of Equation-(2) shape: n diagonal blocks D,
/// n-1 sub-diagonal blocks E (E[j] couples plane j+1 to plane j), and n-1
/// super-diagonal blocks F, all of one plane dimension.
class BlockTridiagonalSystem {
public:
    BlockTridiagonalSystem(std::vector<PlaneBlock> D,
                           std::vector<PlaneBlock> E,
                           std::vector<PlaneBlock> F,
                           std::vector<Eigen::VectorXd> f);

    int plane_count() const { return static_cast<int>(D_.size()); }
    int plane_dim() const { return D_.empty() ? 0 : D_[0].dim(); }
    long total_dim() const { return static_cast<long>(plane_count()) * plane_dim(); }

    const PlaneBlock& D(int j) const { return D_[j]; }
    /// Sub-diagonal block coupling plane j to plane j-1; valid for j in [1, n).
    const PlaneBlock& E(int j) const { return E_[j - 1]; }
    /// Super-diagonal block coupling plane j to plane j+1; valid for j in [0, n-1).
    const PlaneBlock& F(int j) const { return F_[j]; }
    const Eigen::VectorXd& f(int j) const { return f_[j]; }
    const std::vector<Eigen::VectorXd>& rhs() const { return f_; }

    /// Assemble the full sparse operator as a dense matrix (small n only).
    Eigen::MatrixXd to_dense() const;

private:
    std::vector<PlaneBlock> D_, E_, F_;
    std::vector<Eigen::VectorXd> f_;
};

/// y_j = E_j u_{j-1} + D_j u_j + F_j u_{j+1}, absent neighbors taken as zero.
std::vector<PlaneVector> apply(const BlockTridiagonalSystem& system,
                               const std::vector<PlaneVector>& u);

/// ||A u - f||_2 / ||f||_2.
double relative_residual(const BlockTridiagonalSystem& system,
                         const std::vector<PlaneVector>& u,
                         const std::vector<Eigen::VectorXd>& f);

/// Helpers between plane-wise and flat representations.
std::vector<PlaneVector> to_planes(const Eigen::VectorXd& flat, int plane_count, int plane_dim);
Eigen::VectorXd to_flat(const std::vector<PlaneVector>& planes);
std::vector<PlaneVector> wrap_planes(const std::vector<Eigen::VectorXd>& vs);

} // namespace acr

#endif
