#ifndef ACR_HMATRIX_HPP
#define ACR_HMATRIX_HPP

#include <array>
#include <memory>
#include <string>

#include "acr/cluster.hpp"

namespace acr {

/// One node of the H-matrix quadtree, in tree (permuted) ordering.
/// Rk leaves store the outer product U * V^T.
struct HNode {
    int rb = 0, re = 0, cb = 0, ce = 0;
    enum Kind { Dense, Rk, Branch } kind = Dense;
    Eigen::MatrixXd dense;
    Eigen::MatrixXd U, V;
    std::array<std::unique_ptr<HNode>, 4> child; ///< [row_child * 2 + col_child]

    int rows() const { return re - rb; }
    int cols() const { return ce - cb; }
    int rank() const { return static_cast<int>(U.cols()); }
};

struct RankStats {
    double average_rank = 0;
    int largest_rank = 0;
    int dense_leaf_count = 0;
    int lowrank_leaf_count = 0;
    long bytes = 0;
};

/// Blockwise low-rank matrix over a shared cluster tree. Square only;
/// binary operations require operands built over the same tree.
class HMatrix {
public:
    HMatrix() = default;
    HMatrix(std::shared_ptr<const ClusterTree> tree, std::unique_ptr<HNode> root, double eps)
        : tree_(std::move(tree)), root_(std::move(root)), eps_(eps) {}

    HMatrix(const HMatrix& other);
    HMatrix& operator=(const HMatrix& other);
    HMatrix(HMatrix&&) = default;
    HMatrix& operator=(HMatrix&&) = default;

    bool valid() const { return static_cast<bool>(root_); }
    int dim() const { return root_ ? root_->rows() : 0; }
    double eps() const { return eps_; }
    const std::shared_ptr<const ClusterTree>& tree() const { return tree_; }
    const HNode& root() const { return *root_; }
    HNode& root() { return *root_; }

private:
    std::shared_ptr<const ClusterTree> tree_;
    std::unique_ptr<HNode> root_;
    double eps_ = 0;
};

constexpr long kDefaultLeafMemoryCap = 2L << 30; ///< bytes per materialized leaf

/// Compress a sparse plane block onto the given block structure. Dense
/// leaves are copied exactly; admissible leaves are formed from the nonzero
/// columns of the sub-block and truncated to relative tolerance eps.
HMatrix compress_sparse(const PlaneBlock& block, const BlockClusterTree& bct, double eps,
                        long memory_cap = kDefaultLeafMemoryCap);

/// Compress a dense matrix (original ordering) onto the given structure.
HMatrix compress_dense(const Eigen::MatrixXd& A, const BlockClusterTree& bct, double eps,
                       long memory_cap = kDefaultLeafMemoryCap);

/// Zero H-matrix sharing the structure (kinds and ranges) of `like`.
HMatrix zeros_like(const HMatrix& like);

/// y = H x; x and y are in the original (unpermuted) index ordering.
Eigen::VectorXd hmatvec(const HMatrix& H, const Eigen::VectorXd& x);
/// Multi-column variant.
Eigen::MatrixXd happly(const HMatrix& H, const Eigen::MatrixXd& X);

/// Leafwise sum/difference with recompression to eps; structures must match.
HMatrix hadd(const HMatrix& A, const HMatrix& B, double eps);
HMatrix hsub(const HMatrix& A, const HMatrix& B, double eps);

/// C = A * B on A's structure, recompressing at every accumulation.
HMatrix hmultiply(const HMatrix& A, const HMatrix& B, double eps);
/// C += alpha * A * B.
void hmultiply_add(HMatrix& C, const HMatrix& A, const HMatrix& B, double alpha, double eps);

/// Recursive 2x2 block inversion via Schur complements.
HMatrix hinvert(const HMatrix& H, double eps);

/// Re-truncate every low-rank leaf in place, discarding singular values
/// below eps times the matrix-wide scale (largest leaf spectral norm), so
/// small far-field blocks are trimmed relative to the whole operator.
void recompress(HMatrix& H, double eps);

Eigen::MatrixXd to_dense(const HMatrix& H);

RankStats rank_stats(const HMatrix& H);
/// bytes = sum dense m*n*8 + sum lowrank (m+n)*k*8
long memory_footprint(const HMatrix& H);

/// Nested JSON dump of the block structure: {rows, cols, kind, rank, children}.
std::string structure_json(const HMatrix& H);

/// Truncated-SVD recompression of an outer-product pair to relative
/// tolerance eps (singular values below eps * sigma_1 are discarded).
void truncate_lowrank(Eigen::MatrixXd& U, Eigen::MatrixXd& V, double eps);

} // namespace acr

#endif
