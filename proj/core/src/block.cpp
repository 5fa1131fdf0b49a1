#include "acr/block.hpp"

#include <algorithm>

namespace acr {

PlaneBlock::PlaneBlock(int dim, std::vector<Entry> entries, std::vector<Point2> coords)
    : dim_(dim), entries_(std::move(entries)), coords_(std::move(coords)) {
    if (dim_ <= 0) throw DimensionError("PlaneBlock: dimension must be positive");
    if (static_cast<int>(coords_.size()) != dim_)
        throw DimensionError("PlaneBlock: coords size must equal block dimension");
    for (const auto& e : entries_) {
        if (e.row < 0 || e.row >= dim_ || e.col < 0 || e.col >= dim_)
            throw DimensionError("PlaneBlock: entry index out of range");
    }
    std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    // sum duplicates
    std::vector<Entry> merged;
    merged.reserve(entries_.size());
    for (const auto& e : entries_) {
        if (!merged.empty() && merged.back().row == e.row && merged.back().col == e.col)
            merged.back().value += e.value;
        else
            merged.push_back(e);
    }
    entries_ = std::move(merged);
}

Eigen::VectorXd PlaneBlock::apply(const Eigen::VectorXd& x) const {
    if (x.size() != dim_) throw DimensionError("PlaneBlock::apply: vector length mismatch");
    Eigen::VectorXd y = Eigen::VectorXd::Zero(dim_);
    for (const auto& e : entries_) y[e.row] += e.value * x[e.col];
    return y;
}

Eigen::VectorXd PlaneBlock::apply_transpose(const Eigen::VectorXd& x) const {
    if (x.size() != dim_) throw DimensionError("PlaneBlock::apply_transpose: vector length mismatch");
    Eigen::VectorXd y = Eigen::VectorXd::Zero(dim_);
    for (const auto& e : entries_) y[e.col] += e.value * x[e.row];
    return y;
}

Eigen::MatrixXd PlaneBlock::to_dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim_, dim_);
    for (const auto& e : entries_) m(e.row, e.col) += e.value;
    return m;
}

BlockTridiagonalSystem::BlockTridiagonalSystem(std::vector<PlaneBlock> D,
                                               std::vector<PlaneBlock> E,
                                               std::vector<PlaneBlock> F,
                                               std::vector<Eigen::VectorXd> f)
    : D_(std::move(D)), E_(std::move(E)), F_(std::move(F)), f_(std::move(f)) {
    const int n = static_cast<int>(D_.size());
    if (n == 0) throw DimensionError("BlockTridiagonalSystem: no planes");
    if (static_cast<int>(E_.size()) != n - 1 || static_cast<int>(F_.size()) != n - 1)
        throw DimensionError("BlockTridiagonalSystem: need exactly n-1 off-diagonal blocks");
    if (static_cast<int>(f_.size()) != n)
        throw DimensionError("BlockTridiagonalSystem: need one rhs vector per plane");
    const int dim = D_[0].dim();
    for (int j = 0; j < n; ++j) {
        if (D_[j].dim() != dim)
            throw DimensionError("BlockTridiagonalSystem: D block dimension mismatch", j);
        if (f_[j].size() != dim)
            throw DimensionError("BlockTridiagonalSystem: rhs length mismatch", j);
    }
    for (int j = 0; j < n - 1; ++j) {
        if (E_[j].dim() != dim)
            throw DimensionError("BlockTridiagonalSystem: E block dimension mismatch", j + 1);
        if (F_[j].dim() != dim)
            throw DimensionError("BlockTridiagonalSystem: F block dimension mismatch", j);
    }
}

Eigen::MatrixXd BlockTridiagonalSystem::to_dense() const {
    const int n = plane_count();
    const int m = plane_dim();
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<long>(n) * m, static_cast<long>(n) * m);
    for (int j = 0; j < n; ++j) {
        A.block(j * m, j * m, m, m) = D_[j].to_dense();
        if (j > 0) A.block(j * m, (j - 1) * m, m, m) = E_[j - 1].to_dense();
        if (j < n - 1) A.block(j * m, (j + 1) * m, m, m) = F_[j].to_dense();
    }
    return A;
}

std::vector<PlaneVector> apply(const BlockTridiagonalSystem& system,
                               const std::vector<PlaneVector>& u) {
    const int n = system.plane_count();
    const int m = system.plane_dim();
    if (static_cast<int>(u.size()) != n)
        throw DimensionError("apply: expected one plane vector per plane");
    for (int j = 0; j < n; ++j)
        if (u[j].values.size() != m)
            throw DimensionError("apply: plane vector length mismatch", j);

    std::vector<PlaneVector> y(n);
    for (int j = 0; j < n; ++j) {
        Eigen::VectorXd r = system.D(j).apply(u[j].values);
        if (j > 0) r += system.E(j).apply(u[j - 1].values);
        if (j < n - 1) r += system.F(j).apply(u[j + 1].values);
        y[j] = PlaneVector{std::move(r), j};
    }
    return y;
}

double relative_residual(const BlockTridiagonalSystem& system,
                         const std::vector<PlaneVector>& u,
                         const std::vector<Eigen::VectorXd>& f) {
    const int n = system.plane_count();
    if (static_cast<int>(f.size()) != n)
        throw DimensionError("relative_residual: rhs plane count mismatch");
    double fnorm2 = 0.0;
    for (const auto& fj : f) fnorm2 += fj.squaredNorm();
    if (fnorm2 == 0.0) throw ZeroRhsError();

    const std::vector<PlaneVector> Au = apply(system, u);
    double rnorm2 = 0.0;
    for (int j = 0; j < n; ++j) rnorm2 += (Au[j].values - f[j]).squaredNorm();
    return std::sqrt(rnorm2 / fnorm2);
}

std::vector<PlaneVector> to_planes(const Eigen::VectorXd& flat, int plane_count, int plane_dim) {
    if (flat.size() != static_cast<long>(plane_count) * plane_dim)
        throw DimensionError("to_planes: flat vector length mismatch");
    std::vector<PlaneVector> out(plane_count);
    for (int j = 0; j < plane_count; ++j)
        out[j] = PlaneVector{flat.segment(static_cast<long>(j) * plane_dim, plane_dim), j};
    return out;
}

Eigen::VectorXd to_flat(const std::vector<PlaneVector>& planes) {
    long total = 0;
    for (const auto& p : planes) total += p.values.size();
    Eigen::VectorXd flat(total);
    long off = 0;
    for (const auto& p : planes) {
        flat.segment(off, p.values.size()) = p.values;
        off += p.values.size();
    }
    return flat;
}

std::vector<PlaneVector> wrap_planes(const std::vector<Eigen::VectorXd>& vs) {
    std::vector<PlaneVector> out(vs.size());
    for (size_t j = 0; j < vs.size(); ++j)
        out[j] = PlaneVector{vs[j], static_cast<int>(j)};
    return out;
}

} // namespace acr
