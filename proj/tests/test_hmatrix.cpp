#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>

#include "acr/discretize.hpp"
#include "acr/hmatrix.hpp"
#include "test_helpers.hpp"

using namespace acr;

namespace {

PlaneBlock identity_block(int dim) {
    const int side = static_cast<int>(std::lround(std::sqrt(double(dim))));
    std::vector<Point2> coords(dim);
    for (int i = 0; i < dim; ++i) coords[i] = Point2{double(i % side), double(i / side)};
    std::vector<Entry> id;
    for (int i = 0; i < dim; ++i) id.push_back(Entry{i, i, 1.0});
    return PlaneBlock(dim, id, coords);
}

PlaneBlock zero_block(int dim) {
    const int side = static_cast<int>(std::lround(std::sqrt(double(dim))));
    std::vector<Point2> coords(dim);
    for (int i = 0; i < dim; ++i) coords[i] = Point2{double(i % side), double(i / side)};
    return PlaneBlock(dim, {}, coords);
}

struct Fixture {
    std::shared_ptr<ClusterTree> tree;
    std::unique_ptr<BlockClusterTree> bct;
    Fixture(int plane_side, int leaf, double eta = 2.0,
            Admissibility mode = Admissibility::Standard) {
        auto block = poisson2d_block(plane_side);
        tree = std::make_shared<ClusterTree>(block.coords(), leaf);
        bct = std::make_unique<BlockClusterTree>(tree, eta, mode);
    }
};

void check_tiling(const HNode& n, std::function<void(const HNode&)>& leaf_cb) {
    if (n.kind == HNode::Branch) {
        // children must partition the row and column ranges exactly
        int rows = 0, cols = 0;
        REQUIRE(n.child[0]);
        REQUIRE(n.child[3]);
        CHECK(n.child[0]->rb == n.rb);
        CHECK(n.child[3]->re == n.re);
        CHECK(n.child[0]->cb == n.cb);
        CHECK(n.child[3]->ce == n.ce);
        CHECK(n.child[0]->re == n.child[3]->rb);
        CHECK(n.child[0]->ce == n.child[3]->cb);
        rows = (n.child[0]->rows()) + (n.child[3]->rows());
        cols = (n.child[0]->cols()) + (n.child[3]->cols());
        CHECK(rows == n.rows());
        CHECK(cols == n.cols());
        for (const auto& c : n.child)
            if (c) check_tiling(*c, leaf_cb);
    } else {
        leaf_cb(n);
    }
}

} // namespace

TEST_CASE("compressing the zero block gives rank-0 leaves and near-zero bytes") {
    Fixture fx(16, 8);
    HMatrix H = compress_sparse(zero_block(256), *fx.bct, 1e-6);
    auto s = rank_stats(H);
    CHECK(s.largest_rank == 0);
    CHECK(s.average_rank == 0.0);
    CHECK(to_dense(H).norm() == 0.0);
}

TEST_CASE("compressing the identity: rank-0 off-diagonal, exact dense diagonal") {
    Fixture fx(16, 8);
    HMatrix H = compress_sparse(identity_block(256), *fx.bct, 1e-6);
    CHECK(rank_stats(H).largest_rank == 0);
    Eigen::MatrixXd D = to_dense(H);
    CHECK((D - Eigen::MatrixXd::Identity(256, 256)).norm() <= 1e-14);
    Eigen::VectorXd x = test::random_vector(256, 1);
    CHECK((hmatvec(H, x) - x).norm() <= 1e-12 * x.norm());
}

TEST_CASE("hmatvec of the zero vector is zero") {
    Fixture fx(16, 8);
    HMatrix H = compress_sparse(poisson2d_block(16), *fx.bct, 1e-6);
    CHECK(hmatvec(H, Eigen::VectorXd::Zero(256)).norm() == 0.0);
}

TEST_CASE("2D Poisson plane compression meets the matvec error bound") {
    const double eps = 1e-4;
    auto block = poisson2d_block(32);
    Fixture fx(32, 32);
    HMatrix H = compress_sparse(block, *fx.bct, eps);
    const double anorm = block.to_dense().norm(); // Frobenius
    for (int t = 0; t < 100; ++t) {
        Eigen::VectorXd x = test::random_vector(1024, 100 + t);
        Eigen::VectorXd err = hmatvec(H, x) - block.apply(x);
        CHECK(err.norm() <= 10 * eps * anorm * x.norm());
    }
}

TEST_CASE("random dense 64x64 H-matrix matvec matches the dense product") {
    auto coords = identity_block(64).coords();
    auto tree = std::make_shared<ClusterTree>(coords, 8);
    BlockClusterTree bct(tree, 2.0);
    Eigen::MatrixXd A = test::random_matrix(64, 64, 5);
    HMatrix H = compress_dense(A, bct, 1e-8);
    Eigen::VectorXd x = test::random_vector(64, 6);
    CHECK((hmatvec(H, x) - A * x).norm() <= 1e-6 * (A * x).norm());
}

TEST_CASE("hmatvec rejects dimension mismatch") {
    Fixture fx(16, 8);
    HMatrix H = compress_sparse(poisson2d_block(16), *fx.bct, 1e-6);
    CHECK_THROWS_AS(hmatvec(H, Eigen::VectorXd::Zero(100)), DimensionError);
}

TEST_CASE("hadd/hsub identities and truncation bound") {
    Fixture fx(16, 8);
    const double eps = 1e-8;
    auto block = poisson2d_block(16);
    HMatrix A = compress_sparse(block, *fx.bct, eps);
    HMatrix Z = compress_sparse(zero_block(256), *fx.bct, eps);
    CHECK((to_dense(hadd(A, Z, eps)) - to_dense(A)).norm() <= 1e-12);
    CHECK(to_dense(hsub(A, A, eps)).norm() <= 1e-12);
    CHECK(rank_stats(hsub(A, A, eps)).largest_rank == 0);
}

TEST_CASE("low-rank addition recompresses to at most the combined rank") {
    // two random low-rank matrices over the same structure
    auto coords = identity_block(64).coords();
    auto tree = std::make_shared<ClusterTree>(coords, 16);
    BlockClusterTree bct(tree, 2.0, Admissibility::Weak);
    Eigen::MatrixXd A = test::random_matrix(64, 3, 8) * test::random_matrix(3, 64, 9);
    Eigen::MatrixXd B = test::random_matrix(64, 4, 10) * test::random_matrix(4, 64, 11);
    const double eps = 1e-10;
    HMatrix Ha = compress_dense(A, bct, eps);
    HMatrix Hb = compress_dense(B, bct, eps);
    HMatrix Hs = hadd(Ha, Hb, eps);
    CHECK(rank_stats(Hs).largest_rank <= 7);
    Eigen::MatrixXd S = A + B;
    CHECK((to_dense(Hs) - S).norm() <= 100 * eps * S.norm());
}

TEST_CASE("truncate_lowrank discards singular values below eps * sigma_1") {
    Eigen::MatrixXd U = test::random_matrix(32, 6, 21);
    Eigen::MatrixXd V = test::random_matrix(32, 6, 22);
    Eigen::MatrixXd M = U * V.transpose();
    Eigen::MatrixXd U2 = U, V2 = V;
    truncate_lowrank(U2, V2, 1e-12);
    CHECK(U2.cols() <= 6);
    CHECK((U2 * V2.transpose() - M).norm() <= 1e-10 * M.norm());
    truncate_lowrank(U2, V2, 0.999); // keep only the dominant mode
    CHECK(U2.cols() == 1);
}

TEST_CASE("hmultiply identities") {
    Fixture fx(16, 8);
    const double eps = 1e-8;
    HMatrix A = compress_sparse(poisson2d_block(16), *fx.bct, eps);
    HMatrix I = compress_sparse(identity_block(256), *fx.bct, eps);
    HMatrix Z = compress_sparse(zero_block(256), *fx.bct, eps);
    Eigen::MatrixXd Ad = to_dense(A);
    CHECK((to_dense(hmultiply(A, I, eps)) - Ad).norm() <= 100 * eps * Ad.norm());
    CHECK(to_dense(hmultiply(A, Z, eps)).norm() <= 1e-12);
}

TEST_CASE("hmultiply of random 64x64 H-matrices matches the dense product") {
    auto coords = identity_block(64).coords();
    auto tree = std::make_shared<ClusterTree>(coords, 8);
    BlockClusterTree bct(tree, 2.0);
    Eigen::MatrixXd A = test::random_matrix(64, 64, 31);
    Eigen::MatrixXd B = test::random_matrix(64, 64, 32);
    const double eps = 1e-8;
    HMatrix Ha = compress_dense(A, bct, eps);
    HMatrix Hb = compress_dense(B, bct, eps);
    Eigen::MatrixXd P = A * B;
    CHECK((to_dense(hmultiply(Ha, Hb, eps)) - P).norm() <= 1e-6 * P.norm());
}

TEST_CASE("hinvert identities") {
    Fixture fx(16, 8);
    const double eps = 1e-8;
    HMatrix I = compress_sparse(identity_block(256), *fx.bct, eps);
    CHECK((to_dense(hinvert(I, eps)) - Eigen::MatrixXd::Identity(256, 256)).norm() <= 1e-10);

    std::vector<Point2> coords = identity_block(256).coords();
    std::vector<Entry> diag;
    for (int i = 0; i < 256; ++i) diag.push_back(Entry{i, i, 2.0 * (i + 1)});
    HMatrix D = compress_sparse(PlaneBlock(256, diag, coords), *fx.bct, eps);
    Eigen::MatrixXd Dinv = to_dense(hinvert(D, eps));
    for (int i = 0; i < 256; ++i) CHECK(Dinv(i, i) == doctest::Approx(1.0 / (2.0 * (i + 1))));
}

TEST_CASE("hinvert of the 2D Poisson operator satisfies the identity-product bound") {
    const double eps = 1e-4;
    const int side = 32; // dim 1024; the 64x64-plane case runs in acceptance
    auto block = poisson2d_block(side);
    Fixture fx(side, 32);
    HMatrix H = compress_sparse(block, *fx.bct, eps);
    HMatrix Hinv = hinvert(H, eps);
    const int dim = side * side;
    Eigen::MatrixXd P = to_dense(hmultiply(H, Hinv, eps));
    const double err = (P - Eigen::MatrixXd::Identity(dim, dim)).norm() / std::sqrt(double(dim));
    CHECK(err <= 100 * eps);
}

TEST_CASE("singular dense pivot raises a structured error") {
    Fixture fx(16, 8);
    CHECK_THROWS_AS(hinvert(compress_sparse(zero_block(256), *fx.bct, 1e-8), 1e-8),
                    SingularBlockError);
}

TEST_CASE("rank_stats accounting on trivial inputs") {
    Fixture fx(16, 8);
    HMatrix Z = compress_sparse(zero_block(256), *fx.bct, 1e-8);
    auto s = rank_stats(Z);
    CHECK(s.average_rank == 0.0);
    CHECK(s.largest_rank == 0);
    HMatrix I = compress_sparse(identity_block(256), *fx.bct, 1e-8);
    CHECK(rank_stats(I).largest_rank == 0);
    CHECK(memory_footprint(I) > 0);
    CHECK(rank_stats(I).bytes == memory_footprint(I));
}

TEST_CASE("leaf set tiles the index range exactly once") {
    Fixture fx(32, 16);
    HMatrix H = compress_sparse(poisson2d_block(32), *fx.bct, 1e-4);
    long area = 0;
    std::function<void(const HNode&)> leaf_cb = [&](const HNode& n) {
        area += long(n.rows()) * n.cols();
        if (n.kind == HNode::Rk) CHECK(n.rank() <= std::min(n.rows(), n.cols()));
    };
    check_tiling(H.root(), leaf_cb);
    CHECK(area == 1024L * 1024L);
}

TEST_CASE("leafwise reconstruction error is within eps at construction") {
    const double eps = 1e-3;
    auto block = poisson2d_block(32);
    Eigen::MatrixXd A = block.to_dense();
    Fixture fx(32, 32);
    HMatrix H = compress_sparse(block, *fx.bct, eps);
    const auto& perm = fx.tree->permutation();
    std::function<void(const HNode&)> leaf_cb = [&](const HNode& n) {
        Eigen::MatrixXd orig(n.rows(), n.cols());
        for (int i = 0; i < n.rows(); ++i)
            for (int j = 0; j < n.cols(); ++j) orig(i, j) = A(perm[n.rb + i], perm[n.cb + j]);
        Eigen::MatrixXd rec = n.kind == HNode::Dense
                                  ? n.dense
                                  : Eigen::MatrixXd(n.U * n.V.transpose());
        const double scale = orig.norm();
        if (scale > 0) CHECK((rec - orig).norm() <= eps * scale * 1.0001);
    };
    check_tiling(H.root(), leaf_cb);
}

TEST_CASE("bytes are nondecreasing as eps tightens") {
    auto block = poisson2d_block(32);
    Fixture fx(32, 32);
    long prev = 0;
    for (double eps : {1e-1, 1e-2, 1e-3, 1e-4}) {
        HMatrix H = compress_sparse(block, *fx.bct, eps);
        long b = memory_footprint(H);
        CHECK(b >= prev);
        prev = b;
    }
}

TEST_CASE("weak admissibility needs at least the standard mode's largest rank") {
    const double eps = 1e-4;
    const int side = 32;
    auto block = poisson2d_block(side);
    Fixture std_fx(side, 32, 2.0, Admissibility::Standard);
    Fixture weak_fx(side, 32, 2.0, Admissibility::Weak);
    HMatrix inv_std = hinvert(compress_sparse(block, *std_fx.bct, eps), eps);
    HMatrix inv_weak = hinvert(compress_sparse(block, *weak_fx.bct, eps), eps);
    CHECK(rank_stats(inv_weak).largest_rank >= rank_stats(inv_std).largest_rank);
}

TEST_CASE("recompress trims ranks without breaking accuracy") {
    const int side = 32;
    auto block = poisson2d_block(side);
    Fixture fx(side, 32);
    HMatrix H = compress_sparse(block, *fx.bct, 1e-10);
    HMatrix inv = hinvert(H, 1e-6);
    const int before = rank_stats(inv).largest_rank;
    Eigen::MatrixXd exact = block.to_dense().inverse();
    recompress(inv, 1e-3);
    CHECK(rank_stats(inv).largest_rank <= before);
    CHECK((to_dense(inv) - exact).norm() <= 1e-2 * exact.norm());
}

TEST_CASE("structure dump is valid JSON-shaped text") {
    Fixture fx(16, 8);
    HMatrix H = compress_sparse(poisson2d_block(16), *fx.bct, 1e-4);
    std::string s = structure_json(H);
    CHECK(s.find("\"rows\"") != std::string::npos);
    CHECK(s.find("\"kind\"") != std::string::npos);
    CHECK(s.front() == '{');
    CHECK(s.back() == '}');
}

TEST_CASE("leaf memory cap raises a structured error") {
    auto block = poisson2d_block(32);
    Fixture fx(32, 32);
    CHECK_THROWS_AS(compress_sparse(block, *fx.bct, 1e-4, /*memory_cap=*/64),
                    LeafMemoryError);
}
