#include "acr/hmatrix.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <json.hpp>

#include <cassert>

namespace acr {

namespace {

std::unique_ptr<HNode> clone_node(const HNode& n) {
    auto c = std::make_unique<HNode>();
    c->rb = n.rb; c->re = n.re; c->cb = n.cb; c->ce = n.ce;
    c->kind = n.kind;
    c->dense = n.dense;
    c->U = n.U;
    c->V = n.V;
    if (n.kind == HNode::Branch)
        for (int i = 0; i < 4; ++i) c->child[i] = clone_node(*n.child[i]);
    return c;
}

std::unique_ptr<HNode> zero_like_node(const HNode& n) {
    auto c = std::make_unique<HNode>();
    c->rb = n.rb; c->re = n.re; c->cb = n.cb; c->ce = n.ce;
    c->kind = n.kind;
    switch (n.kind) {
        case HNode::Dense:
            c->dense = Eigen::MatrixXd::Zero(n.rows(), n.cols());
            break;
        case HNode::Rk:
            c->U = Eigen::MatrixXd::Zero(n.rows(), 0);
            c->V = Eigen::MatrixXd::Zero(n.cols(), 0);
            break;
        case HNode::Branch:
            for (int i = 0; i < 4; ++i) c->child[i] = zero_like_node(*n.child[i]);
            break;
    }
    return c;
}

bool same_structure(const HNode& a, const HNode& b) {
    if (a.rb != b.rb || a.re != b.re || a.cb != b.cb || a.ce != b.ce || a.kind != b.kind)
        return false;
    if (a.kind == HNode::Branch)
        for (int i = 0; i < 4; ++i)
            if (!same_structure(*a.child[i], *b.child[i])) return false;
    return true;
}

// ---- low-rank recompression -------------------------------------------

void truncate_impl(Eigen::MatrixXd& U, Eigen::MatrixXd& V, double eps,
                   double abs_cutoff = 0.0) {
    const long m = U.rows(), n = V.rows(), k = U.cols();
    if (k == 0) return;

    const long ku = std::min(m, k), kv = std::min(n, k);
    Eigen::HouseholderQR<Eigen::MatrixXd> qru(U), qrv(V);
    Eigen::MatrixXd Ru = qru.matrixQR().topRows(ku).triangularView<Eigen::Upper>();
    Eigen::MatrixXd Rv = qrv.matrixQR().topRows(kv).triangularView<Eigen::Upper>();

    Eigen::MatrixXd core = Ru * Rv.transpose(); // ku x kv
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(core, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();

    int r = 0;
    if (sv.size() > 0 && sv[0] > 0.0) {
        const double cutoff = std::max(eps * sv[0], abs_cutoff);
        while (r < sv.size() && sv[r] > cutoff) ++r;
    }

    Eigen::MatrixXd Us = svd.matrixU().leftCols(r);
    for (int i = 0; i < r; ++i) Us.col(i) *= sv[i];
    Eigen::MatrixXd Vs = svd.matrixV().leftCols(r);

    Eigen::MatrixXd Qu = qru.householderQ() * Eigen::MatrixXd::Identity(m, ku);
    Eigen::MatrixXd Qv = qrv.householderQ() * Eigen::MatrixXd::Identity(n, kv);
    U = Qu * Us;
    V = Qv * Vs;
}

// SVD-truncate a small dense block into outer-product factors.
void dense_to_lowrank(const Eigen::MatrixXd& M, double eps,
                      Eigen::MatrixXd& U, Eigen::MatrixXd& V) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    int r = 0;
    if (sv.size() > 0 && sv[0] > 0.0) {
        const double cutoff = eps * sv[0];
        while (r < sv.size() && sv[r] > cutoff) ++r;
    }
    U = svd.matrixU().leftCols(r);
    for (int i = 0; i < r; ++i) U.col(i) *= sv[i];
    V = svd.matrixV().leftCols(r);
}

// ---- construction -------------------------------------------------------

struct SparseEntries {
    // entries of the permuted matrix restricted to a node, tree coordinates
    std::vector<Entry> items;
};

std::unique_ptr<HNode> build_from_sparse(const BlockClusterTree::Node& bn,
                                         std::vector<Entry> entries, double eps,
                                         long memory_cap) {
    auto node = std::make_unique<HNode>();
    node->rb = bn.row->begin; node->re = bn.row->end;
    node->cb = bn.col->begin; node->ce = bn.col->end;
    const int m = node->rows(), nn = node->cols();

    switch (bn.kind) {
        case BlockClusterTree::Node::DenseLeaf: {
            node->kind = HNode::Dense;
            if (8L * m * nn > memory_cap)
                throw LeafMemoryError("dense leaf of " + std::to_string(m) + "x" +
                                      std::to_string(nn) + " exceeds memory cap");
            node->dense = Eigen::MatrixXd::Zero(m, nn);
            for (const auto& e : entries)
                node->dense(e.row - node->rb, e.col - node->cb) += e.value;
            break;
        }
        case BlockClusterTree::Node::AdmissibleLeaf: {
            node->kind = HNode::Rk;
            // factor through the nonzero columns of the sub-block
            std::vector<int> cols;
            for (const auto& e : entries) cols.push_back(e.col);
            std::sort(cols.begin(), cols.end());
            cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
            const int c = static_cast<int>(cols.size());
            if (8L * (m + nn) * c > memory_cap)
                throw LeafMemoryError("low-rank leaf factor of width " + std::to_string(c) +
                                      " exceeds memory cap");
            node->U = Eigen::MatrixXd::Zero(m, c);
            node->V = Eigen::MatrixXd::Zero(nn, c);
            for (const auto& e : entries) {
                const int j = static_cast<int>(
                    std::lower_bound(cols.begin(), cols.end(), e.col) - cols.begin());
                node->U(e.row - node->rb, j) += e.value;
            }
            for (int j = 0; j < c; ++j) node->V(cols[j] - node->cb, j) = 1.0;
            truncate_impl(node->U, node->V, eps);
            break;
        }
        case BlockClusterTree::Node::Subdivided: {
            node->kind = HNode::Branch;
            std::array<std::vector<Entry>, 4> parts;
            const int rmid = bn.child[0]->row->end;
            const int cmid = bn.child[0]->col->end;
            for (const auto& e : entries) {
                const int i = e.row < rmid ? 0 : 1;
                const int j = e.col < cmid ? 0 : 1;
                parts[i * 2 + j].push_back(e);
            }
            entries.clear();
            entries.shrink_to_fit();
            for (int i = 0; i < 4; ++i)
                node->child[i] =
                    build_from_sparse(*bn.child[i], std::move(parts[i]), eps, memory_cap);
            break;
        }
    }
    return node;
}

std::unique_ptr<HNode> build_from_dense(const BlockClusterTree::Node& bn,
                                        const Eigen::MatrixXd& A, // permuted, full
                                        double eps, long memory_cap) {
    auto node = std::make_unique<HNode>();
    node->rb = bn.row->begin; node->re = bn.row->end;
    node->cb = bn.col->begin; node->ce = bn.col->end;
    const int m = node->rows(), nn = node->cols();
    if (bn.kind != BlockClusterTree::Node::Subdivided && 8L * m * nn > memory_cap)
        throw LeafMemoryError("leaf of " + std::to_string(m) + "x" + std::to_string(nn) +
                              " exceeds memory cap");

    switch (bn.kind) {
        case BlockClusterTree::Node::DenseLeaf:
            node->kind = HNode::Dense;
            node->dense = A.block(node->rb, node->cb, m, nn);
            break;
        case BlockClusterTree::Node::AdmissibleLeaf:
            node->kind = HNode::Rk;
            dense_to_lowrank(A.block(node->rb, node->cb, m, nn), eps, node->U, node->V);
            break;
        case BlockClusterTree::Node::Subdivided:
            node->kind = HNode::Branch;
            for (int i = 0; i < 4; ++i)
                node->child[i] = build_from_dense(*bn.child[i], A, eps, memory_cap);
            break;
    }
    return node;
}

// ---- matvec / apply ------------------------------------------------------

// Y rows are indexed by (global row - yoff), X rows by (global col - xoff).
// Y += node * X over the node's ranges.
void node_apply(const HNode& n, const Eigen::MatrixXd& X, Eigen::MatrixXd& Y,
                int xoff, int yoff) {
    switch (n.kind) {
        case HNode::Dense:
            Y.middleRows(n.rb - yoff, n.rows()).noalias() +=
                n.dense * X.middleRows(n.cb - xoff, n.cols());
            break;
        case HNode::Rk:
            if (n.rank() > 0)
                Y.middleRows(n.rb - yoff, n.rows()).noalias() +=
                    n.U * (n.V.transpose() * X.middleRows(n.cb - xoff, n.cols()));
            break;
        case HNode::Branch:
            for (int i = 0; i < 4; ++i) node_apply(*n.child[i], X, Y, xoff, yoff);
            break;
    }
}

// Y += node^T * X; Y rows indexed by (global col - yoff), X by (global row - xoff).
void node_apply_trans(const HNode& n, const Eigen::MatrixXd& X, Eigen::MatrixXd& Y,
                      int xoff, int yoff) {
    switch (n.kind) {
        case HNode::Dense:
            Y.middleRows(n.cb - yoff, n.cols()).noalias() +=
                n.dense.transpose() * X.middleRows(n.rb - xoff, n.rows());
            break;
        case HNode::Rk:
            if (n.rank() > 0)
                Y.middleRows(n.cb - yoff, n.cols()).noalias() +=
                    n.V * (n.U.transpose() * X.middleRows(n.rb - xoff, n.rows()));
            break;
        case HNode::Branch:
            for (int i = 0; i < 4; ++i) node_apply_trans(*n.child[i], X, Y, xoff, yoff);
            break;
    }
}

// ---- leafwise add --------------------------------------------------------

void add_node(HNode& c, const HNode& a, double alpha, double eps) {
    assert(c.kind == a.kind);
    switch (c.kind) {
        case HNode::Dense:
            c.dense += alpha * a.dense;
            break;
        case HNode::Rk: {
            if (a.rank() == 0) break;
            Eigen::MatrixXd U(c.rows(), c.rank() + a.rank());
            U << c.U, alpha * a.U;
            Eigen::MatrixXd V(c.cols(), c.rank() + a.rank());
            V << c.V, a.V;
            truncate_impl(U, V, eps);
            c.U = std::move(U);
            c.V = std::move(V);
            break;
        }
        case HNode::Branch:
            for (int i = 0; i < 4; ++i) add_node(*c.child[i], *a.child[i], alpha, eps);
            break;
    }
}

// C += U V^T, factors spanning exactly C's ranges.
void add_lowrank(HNode& c, const Eigen::MatrixXd& U, const Eigen::MatrixXd& V, double eps) {
    if (U.cols() == 0) return;
    switch (c.kind) {
        case HNode::Dense:
            c.dense.noalias() += U * V.transpose();
            break;
        case HNode::Rk: {
            Eigen::MatrixXd Un(c.rows(), c.rank() + U.cols());
            Un << c.U, U;
            Eigen::MatrixXd Vn(c.cols(), c.rank() + V.cols());
            Vn << c.V, V;
            truncate_impl(Un, Vn, eps);
            c.U = std::move(Un);
            c.V = std::move(Vn);
            break;
        }
        case HNode::Branch:
            for (int i = 0; i < 4; ++i) {
                HNode& ch = *c.child[i];
                add_lowrank(ch, U.middleRows(ch.rb - c.rb, ch.rows()),
                            V.middleRows(ch.cb - c.cb, ch.cols()), eps);
            }
            break;
    }
}

void add_dense_block(HNode& c, const Eigen::MatrixXd& M, double eps) {
    switch (c.kind) {
        case HNode::Dense:
            c.dense += M;
            break;
        case HNode::Rk: {
            Eigen::MatrixXd U, V;
            dense_to_lowrank(M, eps, U, V);
            add_lowrank(c, U, V, eps);
            break;
        }
        case HNode::Branch:
            for (int i = 0; i < 4; ++i) {
                HNode& ch = *c.child[i];
                add_dense_block(ch, M.block(ch.rb - c.rb, ch.cb - c.cb, ch.rows(), ch.cols()),
                                eps);
            }
            break;
    }
}

// ---- agglomeration: any node -> outer-product factors ---------------------

void to_lowrank(const HNode& n, double eps, Eigen::MatrixXd& U, Eigen::MatrixXd& V) {
    switch (n.kind) {
        case HNode::Rk:
            U = n.U;
            V = n.V;
            return;
        case HNode::Dense:
            dense_to_lowrank(n.dense, eps, U, V);
            return;
        case HNode::Branch: {
            int total = 0;
            std::array<Eigen::MatrixXd, 4> cu, cv;
            for (int i = 0; i < 4; ++i) {
                to_lowrank(*n.child[i], eps, cu[i], cv[i]);
                total += static_cast<int>(cu[i].cols());
            }
            U = Eigen::MatrixXd::Zero(n.rows(), total);
            V = Eigen::MatrixXd::Zero(n.cols(), total);
            int off = 0;
            for (int i = 0; i < 4; ++i) {
                const HNode& ch = *n.child[i];
                const int k = static_cast<int>(cu[i].cols());
                U.block(ch.rb - n.rb, off, ch.rows(), k) = cu[i];
                V.block(ch.cb - n.cb, off, ch.cols(), k) = cv[i];
                off += k;
            }
            truncate_impl(U, V, eps);
            return;
        }
    }
}

// ---- multiply -------------------------------------------------------------

// Low-rank contributions are collected per target leaf during the recursion
// and folded in with a single truncation per leaf when the operation
// completes, so truncation error does not compound across the accumulation.
using Accumulator = std::map<HNode*, std::vector<std::pair<Eigen::MatrixXd, Eigen::MatrixXd>>>;

void deposit(HNode& c, const Eigen::MatrixXd& U, const Eigen::MatrixXd& V, Accumulator& acc) {
    if (U.cols() == 0) return;
    switch (c.kind) {
        case HNode::Dense:
            c.dense.noalias() += U * V.transpose();
            break;
        case HNode::Rk:
            acc[&c].emplace_back(U, V);
            break;
        case HNode::Branch:
            for (int i = 0; i < 4; ++i) {
                HNode& ch = *c.child[i];
                deposit(ch, U.middleRows(ch.rb - c.rb, ch.rows()),
                        V.middleRows(ch.cb - c.cb, ch.cols()), acc);
            }
            break;
    }
}

void flush(Accumulator& acc, double eps) {
    for (auto& [node, list] : acc) {
        int extra = 0;
        for (const auto& [u, v] : list) extra += static_cast<int>(u.cols());
        Eigen::MatrixXd U(node->rows(), node->rank() + extra);
        Eigen::MatrixXd V(node->cols(), node->rank() + extra);
        U.leftCols(node->rank()) = node->U;
        V.leftCols(node->rank()) = node->V;
        int off = node->rank();
        for (const auto& [u, v] : list) {
            U.middleCols(off, u.cols()) = u;
            V.middleCols(off, v.cols()) = v;
            off += static_cast<int>(u.cols());
        }
        truncate_impl(U, V, eps);
        node->U = std::move(U);
        node->V = std::move(V);
    }
    acc.clear();
}

void mult_add(HNode& C, const HNode& A, const HNode& B, double alpha, double eps);

// product A*B collapsed to outer-product factors (used when the target is a leaf)
void mult_to_lowrank(const HNode& A, const HNode& B, double eps,
                     Eigen::MatrixXd& U, Eigen::MatrixXd& V) {
    if (A.kind == HNode::Rk) {
        U = A.U;
        V = Eigen::MatrixXd::Zero(B.cols(), A.V.cols());
        if (A.V.cols() > 0) node_apply_trans(B, A.V, V, B.rb, B.cb);
        return;
    }
    if (B.kind == HNode::Rk) {
        V = B.V;
        U = Eigen::MatrixXd::Zero(A.rows(), B.U.cols());
        if (B.U.cols() > 0) node_apply(A, B.U, U, A.cb, A.rb);
        return;
    }
    if (A.kind == HNode::Dense && B.kind == HNode::Dense) {
        dense_to_lowrank(A.dense * B.dense, eps, U, V);
        return;
    }
    if (A.kind == HNode::Branch && B.kind == HNode::Branch) {
        std::array<Eigen::MatrixXd, 8> pu, pv;
        int total = 0, idx = 0;
        std::array<const HNode*, 8> crow{}, ccol{};
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                for (int k = 0; k < 2; ++k) {
                    const HNode& a = *A.child[i * 2 + k];
                    const HNode& b = *B.child[k * 2 + j];
                    mult_to_lowrank(a, b, eps, pu[idx], pv[idx]);
                    crow[idx] = &a;
                    ccol[idx] = &b;
                    total += static_cast<int>(pu[idx].cols());
                    ++idx;
                }
        U = Eigen::MatrixXd::Zero(A.rows(), total);
        V = Eigen::MatrixXd::Zero(B.cols(), total);
        int off = 0;
        for (int t = 0; t < 8; ++t) {
            const int k = static_cast<int>(pu[t].cols());
            U.block(crow[t]->rb - A.rb, off, crow[t]->rows(), k) = pu[t];
            V.block(ccol[t]->cb - B.cb, off, ccol[t]->cols(), k) = pv[t];
            off += k;
        }
        truncate_impl(U, V, eps);
        return;
    }
    // mixed dense/branch fallback (uneven tree depths)
    if (A.kind == HNode::Dense) { // B is Branch
        Eigen::MatrixXd Xt = A.dense.transpose();
        Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(B.cols(), A.rows());
        node_apply_trans(B, Xt, Y, B.rb, B.cb);
        dense_to_lowrank(Y.transpose(), eps, U, V);
        return;
    }
    // A Branch, B Dense
    Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(A.rows(), B.cols());
    node_apply(A, B.dense, Y, A.cb, A.rb);
    dense_to_lowrank(Y, eps, U, V);
}

void mult_add_rec(HNode& C, const HNode& A, const HNode& B, double alpha, double eps,
                  Accumulator& acc) {
    assert(A.cb == B.rb && A.ce == B.re);
    assert(C.rb == A.rb && C.re == A.re && C.cb == B.cb && C.ce == B.ce);

    if (A.kind == HNode::Branch && B.kind == HNode::Branch && C.kind == HNode::Branch) {
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                for (int k = 0; k < 2; ++k)
                    mult_add_rec(*C.child[i * 2 + j], *A.child[i * 2 + k], *B.child[k * 2 + j],
                                 alpha, eps, acc);
        return;
    }
    Eigen::MatrixXd U, V;
    mult_to_lowrank(A, B, eps, U, V);
    U *= alpha;
    deposit(C, U, V, acc);
}

void mult_add(HNode& C, const HNode& A, const HNode& B, double alpha, double eps) {
    Accumulator acc;
    mult_add_rec(C, A, B, alpha, eps, acc);
    flush(acc, eps);
}

// ---- inversion -------------------------------------------------------------

std::unique_ptr<HNode> invert_node(const HNode& n, double eps) {
    if (n.kind == HNode::Dense) {
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(n.dense);
        const double rcond = lu.rcond();
        if (!(rcond > 1e-14))
            throw SingularBlockError("singular dense pivot on cluster rows [" +
                                         std::to_string(n.rb) + ", " + std::to_string(n.re) +
                                         "), rcond=" + std::to_string(rcond));
        auto out = std::make_unique<HNode>();
        out->rb = n.rb; out->re = n.re; out->cb = n.cb; out->ce = n.ce;
        out->kind = HNode::Dense;
        out->dense = lu.inverse();
        return out;
    }
    assert(n.kind == HNode::Branch); // diagonal blocks are never admissible

    const HNode& A11 = *n.child[0];
    const HNode& A12 = *n.child[1];
    const HNode& A21 = *n.child[2];
    const HNode& A22 = *n.child[3];

    auto X11 = invert_node(A11, eps);

    auto T12 = zero_like_node(A12);
    mult_add(*T12, *X11, A12, 1.0, eps);
    auto T21 = zero_like_node(A21);
    mult_add(*T21, A21, *X11, 1.0, eps);

    auto S = clone_node(A22);
    mult_add(*S, A21, *T12, -1.0, eps);

    auto X22 = invert_node(*S, eps);
    S.reset();

    auto C12 = zero_like_node(A12);
    mult_add(*C12, *T12, *X22, -1.0, eps);
    auto C21 = zero_like_node(A21);
    mult_add(*C21, *X22, *T21, -1.0, eps);

    // X11 + T12 * X22 * T21 = X11 - T12 * C21
    auto C11 = std::move(X11);
    mult_add(*C11, *T12, *C21, -1.0, eps);

    auto out = std::make_unique<HNode>();
    out->rb = n.rb; out->re = n.re; out->cb = n.cb; out->ce = n.ce;
    out->kind = HNode::Branch;
    out->child[0] = std::move(C11);
    out->child[1] = std::move(C12);
    out->child[2] = std::move(C21);
    out->child[3] = std::move(X22);
    return out;
}

// ---- accounting -------------------------------------------------------------

void stats_walk(const HNode& n, RankStats& s, long& rank_sum) {
    switch (n.kind) {
        case HNode::Dense:
            ++s.dense_leaf_count;
            s.bytes += 8L * n.rows() * n.cols();
            break;
        case HNode::Rk:
            ++s.lowrank_leaf_count;
            s.largest_rank = std::max(s.largest_rank, n.rank());
            rank_sum += n.rank();
            s.bytes += 8L * (n.rows() + n.cols()) * n.rank();
            break;
        case HNode::Branch:
            for (int i = 0; i < 4; ++i) stats_walk(*n.child[i], s, rank_sum);
            break;
    }
}

void dense_walk(const HNode& n, Eigen::MatrixXd& A) {
    switch (n.kind) {
        case HNode::Dense:
            A.block(n.rb, n.cb, n.rows(), n.cols()) = n.dense;
            break;
        case HNode::Rk:
            A.block(n.rb, n.cb, n.rows(), n.cols()) = n.U * n.V.transpose();
            break;
        case HNode::Branch:
            for (int i = 0; i < 4; ++i) dense_walk(*n.child[i], A);
            break;
    }
}

nlohmann::json json_walk(const HNode& n) {
    nlohmann::json j;
    j["rows"] = n.rows();
    j["cols"] = n.cols();
    switch (n.kind) {
        case HNode::Dense:
            j["kind"] = "dense";
            break;
        case HNode::Rk:
            j["kind"] = "lowrank";
            j["rank"] = n.rank();
            break;
        case HNode::Branch: {
            j["kind"] = "branch";
            nlohmann::json kids = nlohmann::json::array();
            for (int i = 0; i < 4; ++i) kids.push_back(json_walk(*n.child[i]));
            j["children"] = std::move(kids);
            break;
        }
    }
    return j;
}

void check_binary_op(const HMatrix& A, const HMatrix& B) {
    if (!A.valid() || !B.valid()) throw DimensionError("H-matrix operand not initialized");
    if (A.tree() != B.tree() || !same_structure(A.root(), B.root()))
        throw DimensionError("H-matrix operands must share one block structure");
}

} // namespace

HMatrix::HMatrix(const HMatrix& other)
    : tree_(other.tree_),
      root_(other.root_ ? clone_node(*other.root_) : nullptr),
      eps_(other.eps_) {}

HMatrix& HMatrix::operator=(const HMatrix& other) {
    if (this != &other) {
        tree_ = other.tree_;
        root_ = other.root_ ? clone_node(*other.root_) : nullptr;
        eps_ = other.eps_;
    }
    return *this;
}

void truncate_lowrank(Eigen::MatrixXd& U, Eigen::MatrixXd& V, double eps) {
    truncate_impl(U, V, eps);
}

namespace {

// Largest leaf spectral norm: a cheap lower bound on the matrix norm that
// serves as the global reference scale for recompression.
double scale_walk(const HNode& n) {
    if (n.kind == HNode::Branch) {
        double s = 0;
        for (const auto& c : n.child)
            if (c) s = std::max(s, scale_walk(*c));
        return s;
    }
    if (n.kind == HNode::Dense) {
        if (n.dense.size() == 0) return 0;
        return Eigen::JacobiSVD<Eigen::MatrixXd>(n.dense).singularValues()(0);
    }
    if (n.rank() == 0) return 0;
    const long ku = std::min(n.U.rows(), n.U.cols());
    const long kv = std::min(n.V.rows(), n.V.cols());
    Eigen::HouseholderQR<Eigen::MatrixXd> qru(n.U), qrv(n.V);
    Eigen::MatrixXd Ru = qru.matrixQR().topRows(ku).triangularView<Eigen::Upper>();
    Eigen::MatrixXd Rv = qrv.matrixQR().topRows(kv).triangularView<Eigen::Upper>();
    Eigen::MatrixXd core = Ru * Rv.transpose();
    return Eigen::JacobiSVD<Eigen::MatrixXd>(core).singularValues()(0);
}

void recompress_walk(HNode& n, double abs_cutoff) {
    if (n.kind == HNode::Branch) {
        for (auto& c : n.child)
            if (c) recompress_walk(*c, abs_cutoff);
    } else if (n.kind == HNode::Rk && n.rank() > 0) {
        truncate_impl(n.U, n.V, 0.0, abs_cutoff);
    }
}

} // namespace

void recompress(HMatrix& H, double eps) {
    if (!H.valid()) return;
    // Per-leaf errors accumulate across a block row, so the per-leaf cutoff
    // sits a safety factor below eps relative to the matrix-wide scale.
    constexpr double kRowSafety = 0.05;
    const double scale = scale_walk(H.root());
    if (scale > 0) recompress_walk(H.root(), kRowSafety * eps * scale);
}

HMatrix compress_sparse(const PlaneBlock& block, const BlockClusterTree& bct, double eps,
                        long memory_cap) {
    const ClusterTree& ct = bct.cluster_tree();
    if (block.dim() != ct.size())
        throw DimensionError("compress_sparse: block dimension does not match cluster tree");
    const auto& iperm = ct.inverse_permutation();
    std::vector<Entry> permuted;
    permuted.reserve(block.entries().size());
    for (const auto& e : block.entries())
        permuted.push_back(Entry{iperm[e.row], iperm[e.col], e.value});
    auto root = build_from_sparse(bct.root(), std::move(permuted), eps, memory_cap);
    return HMatrix(bct.cluster_tree_ptr(), std::move(root), eps);
}

HMatrix compress_dense(const Eigen::MatrixXd& A, const BlockClusterTree& bct, double eps,
                       long memory_cap) {
    const ClusterTree& ct = bct.cluster_tree();
    if (A.rows() != ct.size() || A.cols() != ct.size())
        throw DimensionError("compress_dense: matrix dimension does not match cluster tree");
    const auto& perm = ct.permutation();
    Eigen::MatrixXd P(A.rows(), A.cols());
    for (long i = 0; i < A.rows(); ++i)
        for (long j = 0; j < A.cols(); ++j) P(i, j) = A(perm[i], perm[j]);
    auto root = build_from_dense(bct.root(), P, eps, memory_cap);
    return HMatrix(bct.cluster_tree_ptr(), std::move(root), eps);
}

HMatrix zeros_like(const HMatrix& like) {
    return HMatrix(like.tree(), zero_like_node(like.root()), like.eps());
}

Eigen::MatrixXd happly(const HMatrix& H, const Eigen::MatrixXd& X) {
    if (!H.valid()) throw DimensionError("happly: H-matrix not initialized");
    if (X.rows() != H.dim()) throw DimensionError("happly: row count mismatch");
    const auto& perm = H.tree()->permutation();
    Eigen::MatrixXd Xp(X.rows(), X.cols());
    for (long i = 0; i < X.rows(); ++i) Xp.row(i) = X.row(perm[i]);
    Eigen::MatrixXd Yp = Eigen::MatrixXd::Zero(X.rows(), X.cols());
    node_apply(H.root(), Xp, Yp, 0, 0);
    Eigen::MatrixXd Y(X.rows(), X.cols());
    for (long i = 0; i < X.rows(); ++i) Y.row(perm[i]) = Yp.row(i);
    return Y;
}

Eigen::VectorXd hmatvec(const HMatrix& H, const Eigen::VectorXd& x) {
    return happly(H, x);
}

HMatrix hadd(const HMatrix& A, const HMatrix& B, double eps) {
    check_binary_op(A, B);
    HMatrix C = A;
    add_node(C.root(), B.root(), 1.0, eps);
    return C;
}

HMatrix hsub(const HMatrix& A, const HMatrix& B, double eps) {
    check_binary_op(A, B);
    HMatrix C = A;
    add_node(C.root(), B.root(), -1.0, eps);
    return C;
}

HMatrix hmultiply(const HMatrix& A, const HMatrix& B, double eps) {
    if (!A.valid() || !B.valid()) throw DimensionError("hmultiply: operand not initialized");
    if (A.tree() != B.tree())
        throw DimensionError("hmultiply: operands must share one cluster tree");
    HMatrix C = zeros_like(A);
    mult_add(C.root(), A.root(), B.root(), 1.0, eps);
    return C;
}

void hmultiply_add(HMatrix& C, const HMatrix& A, const HMatrix& B, double alpha, double eps) {
    if (!C.valid() || !A.valid() || !B.valid())
        throw DimensionError("hmultiply_add: operand not initialized");
    if (C.tree() != A.tree() || A.tree() != B.tree())
        throw DimensionError("hmultiply_add: operands must share one cluster tree");
    mult_add(C.root(), A.root(), B.root(), alpha, eps);
}

HMatrix hinvert(const HMatrix& H, double eps) {
    if (!H.valid()) throw DimensionError("hinvert: H-matrix not initialized");
    return HMatrix(H.tree(), invert_node(H.root(), eps), eps);
}

Eigen::MatrixXd to_dense(const HMatrix& H) {
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(H.dim(), H.dim());
    dense_walk(H.root(), P);
    const auto& perm = H.tree()->permutation();
    Eigen::MatrixXd A(H.dim(), H.dim());
    for (int i = 0; i < H.dim(); ++i)
        for (int j = 0; j < H.dim(); ++j) A(perm[i], perm[j]) = P(i, j);
    return A;
}

RankStats rank_stats(const HMatrix& H) {
    RankStats s;
    long rank_sum = 0;
    stats_walk(H.root(), s, rank_sum);
    if (s.lowrank_leaf_count > 0)
        s.average_rank = static_cast<double>(rank_sum) / s.lowrank_leaf_count;
    return s;
}

long memory_footprint(const HMatrix& H) { return rank_stats(H).bytes; }

std::string structure_json(const HMatrix& H) { return json_walk(H.root()).dump(); }

} // namespace acr
