#ifndef ACR_CLUSTER_HPP
#define ACR_CLUSTER_HPP

#include <memory>
#include <vector>

#include "acr/block.hpp"

namespace acr {

struct BoundingBox {
    double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
    double diameter() const;
    double distance(const BoundingBox& other) const;
};

/// Binary geometric cluster tree over plane grid points. Nodes own
/// contiguous index ranges [begin, end) in tree (permuted) order.
class ClusterTree {
public:
    struct Node {
        int begin = 0; ///< tree-order range start
        int end = 0;   ///< tree-order range end (exclusive)
        BoundingBox box;
        std::unique_ptr<Node> left, right;
        bool is_leaf() const { return !left; }
        int size() const { return end - begin; }
    };

    /// Recursive median bisection along the longest box axis until
    /// |set| <= leaf_size. Deterministic for a fixed input order.
    ClusterTree(const std::vector<Point2>& coords, int leaf_size);

    const Node& root() const { return *root_; }
    int size() const { return static_cast<int>(perm_.size()); }
    int leaf_size() const { return leaf_size_; }
    /// tree position -> original index
    const std::vector<int>& permutation() const { return perm_; }
    /// original index -> tree position
    const std::vector<int>& inverse_permutation() const { return iperm_; }

    int leaf_count() const;
    int depth() const;

private:
    std::unique_ptr<Node> root_;
    std::vector<int> perm_, iperm_;
    int leaf_size_;
};

enum class Admissibility {
    Standard, ///< min(diam t, diam s) <= eta * dist(t, s)
    Weak      ///< admissible iff the index ranges are disjoint
};

/// Quadtree of cluster pairs. Leaves are either admissible (low-rank
/// candidates) or dense; interior nodes carry children for every child pair.
class BlockClusterTree {
public:
    struct Node {
        const ClusterTree::Node* row = nullptr;
        const ClusterTree::Node* col = nullptr;
        enum Kind { AdmissibleLeaf, DenseLeaf, Subdivided } kind = DenseLeaf;
        /// children indexed [row_child * 2 + col_child]
        std::array<std::unique_ptr<Node>, 4> child;
    };

    BlockClusterTree(std::shared_ptr<const ClusterTree> tree, double eta,
                     Admissibility mode = Admissibility::Standard);

    const Node& root() const { return *root_; }
    const ClusterTree& cluster_tree() const { return *tree_; }
    std::shared_ptr<const ClusterTree> cluster_tree_ptr() const { return tree_; }
    double eta() const { return eta_; }
    Admissibility mode() const { return mode_; }

    int admissible_leaf_count() const;
    int dense_leaf_count() const;

private:
    std::unique_ptr<Node> build(const ClusterTree::Node& t, const ClusterTree::Node& s) const;
    bool admissible(const ClusterTree::Node& t, const ClusterTree::Node& s) const;

    std::shared_ptr<const ClusterTree> tree_;
    double eta_;
    Admissibility mode_;
    std::unique_ptr<Node> root_;
};

} // namespace acr

#endif
