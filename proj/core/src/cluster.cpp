#include "acr/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace acr {

double BoundingBox::diameter() const {
    const double dx = xmax - xmin, dy = ymax - ymin;
    return std::sqrt(dx * dx + dy * dy);
}

double BoundingBox::distance(const BoundingBox& other) const {
    const double dx = std::max({0.0, other.xmin - xmax, xmin - other.xmax});
    const double dy = std::max({0.0, other.ymin - ymax, ymin - other.ymax});
    return std::sqrt(dx * dx + dy * dy);
}

namespace {

BoundingBox box_of(const std::vector<Point2>& coords, const std::vector<int>& idx,
                   int begin, int end) {
    BoundingBox b;
    b.xmin = b.xmax = coords[idx[begin]].x;
    b.ymin = b.ymax = coords[idx[begin]].y;
    for (int i = begin + 1; i < end; ++i) {
        const Point2& p = coords[idx[i]];
        b.xmin = std::min(b.xmin, p.x);
        b.xmax = std::max(b.xmax, p.x);
        b.ymin = std::min(b.ymin, p.y);
        b.ymax = std::max(b.ymax, p.y);
    }
    return b;
}

} // namespace

ClusterTree::ClusterTree(const std::vector<Point2>& coords, int leaf_size)
    : leaf_size_(leaf_size) {
    if (coords.empty()) throw UsageError("ClusterTree: empty point set");
    if (leaf_size < 1) throw UsageError("ClusterTree: leaf_size must be >= 1");

    perm_.resize(coords.size());
    std::iota(perm_.begin(), perm_.end(), 0);

    // Recursive build; perm_ is reordered in place so every node owns a
    // contiguous range of tree positions.
    struct Builder {
        const std::vector<Point2>& coords;
        std::vector<int>& perm;
        int leaf_size;

        std::unique_ptr<Node> build(int begin, int end) {
            auto node = std::make_unique<Node>();
            node->begin = begin;
            node->end = end;
            node->box = box_of(coords, perm, begin, end);
            if (end - begin > leaf_size) {
                const bool split_x =
                    (node->box.xmax - node->box.xmin) >= (node->box.ymax - node->box.ymin);
                const int mid = begin + (end - begin) / 2;
                // stable median split keeps the build deterministic for ties
                std::stable_sort(perm.begin() + begin, perm.begin() + end,
                                 [&](int a, int b) {
                                     return split_x ? coords[a].x < coords[b].x
                                                    : coords[a].y < coords[b].y;
                                 });
                node->left = build(begin, mid);
                node->right = build(mid, end);
            }
            return node;
        }
    };
    Builder b{coords, perm_, leaf_size};
    root_ = b.build(0, static_cast<int>(coords.size()));

    iperm_.resize(perm_.size());
    for (size_t i = 0; i < perm_.size(); ++i) iperm_[perm_[i]] = static_cast<int>(i);
}

namespace {
int count_leaves(const ClusterTree::Node& n) {
    return n.is_leaf() ? 1 : count_leaves(*n.left) + count_leaves(*n.right);
}
int node_depth(const ClusterTree::Node& n) {
    return n.is_leaf() ? 0 : 1 + std::max(node_depth(*n.left), node_depth(*n.right));
}
} // namespace

int ClusterTree::leaf_count() const { return count_leaves(*root_); }
int ClusterTree::depth() const { return node_depth(*root_); }

BlockClusterTree::BlockClusterTree(std::shared_ptr<const ClusterTree> tree, double eta,
                                   Admissibility mode)
    : tree_(std::move(tree)), eta_(eta), mode_(mode) {
    if (eta_ <= 0) throw UsageError("BlockClusterTree: eta must be positive");
    root_ = build(tree_->root(), tree_->root());
}

bool BlockClusterTree::admissible(const ClusterTree::Node& t, const ClusterTree::Node& s) const {
    if (mode_ == Admissibility::Weak)
        return t.end <= s.begin || s.end <= t.begin;
    const double d = t.box.distance(s.box);
    return std::min(t.box.diameter(), s.box.diameter()) <= eta_ * d;
}

std::unique_ptr<BlockClusterTree::Node>
BlockClusterTree::build(const ClusterTree::Node& t, const ClusterTree::Node& s) const {
    auto node = std::make_unique<Node>();
    node->row = &t;
    node->col = &s;
    if (admissible(t, s)) {
        node->kind = Node::AdmissibleLeaf;
    } else if (!t.is_leaf() && !s.is_leaf()) {
        node->kind = Node::Subdivided;
        const ClusterTree::Node* tc[2] = {t.left.get(), t.right.get()};
        const ClusterTree::Node* sc[2] = {s.left.get(), s.right.get()};
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                node->child[i * 2 + j] = build(*tc[i], *sc[j]);
    } else {
        node->kind = Node::DenseLeaf;
    }
    return node;
}

namespace {
void count_kinds(const BlockClusterTree::Node& n, int& adm, int& dense) {
    switch (n.kind) {
        case BlockClusterTree::Node::AdmissibleLeaf: ++adm; break;
        case BlockClusterTree::Node::DenseLeaf: ++dense; break;
        case BlockClusterTree::Node::Subdivided:
            for (const auto& c : n.child) count_kinds(*c, adm, dense);
            break;
    }
}
} // namespace

int BlockClusterTree::admissible_leaf_count() const {
    int a = 0, d = 0;
    count_kinds(*root_, a, d);
    return a;
}

int BlockClusterTree::dense_leaf_count() const {
    int a = 0, d = 0;
    count_kinds(*root_, a, d);
    return d;
}

} // namespace acr
