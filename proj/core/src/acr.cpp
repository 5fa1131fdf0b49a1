#include "acr/acr.hpp"

#include <Eigen/LU>

namespace acr {

namespace {

// Merge per-block rank statistics (weighted average over low-rank leaves).
void merge_stats(RankStats& into, const RankStats& s) {
    const long c0 = into.lowrank_leaf_count, c1 = s.lowrank_leaf_count;
    if (c0 + c1 > 0)
        into.average_rank = (into.average_rank * c0 + s.average_rank * c1) / double(c0 + c1);
    into.largest_rank = std::max(into.largest_rank, s.largest_rank);
    into.dense_leaf_count += s.dense_leaf_count;
    into.lowrank_leaf_count += s.lowrank_leaf_count;
    into.bytes += s.bytes;
}

} // namespace

Eigen::MatrixXd DenseKernel::invert(const Eigen::MatrixXd& a, int level, int plane) const {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    const double rcond = lu.rcond();
    if (!(rcond > 1e-14))
        throw SingularBlockError("diagonal block is numerically singular (rcond " +
                                     std::to_string(rcond) + ")",
                                 level, plane);
    return lu.inverse();
}

HMatrix HKernel::invert(const HMatrix& a, int level, int plane) const {
    try {
        return hinvert(a, eps);
    } catch (const SingularBlockError& e) {
        throw SingularBlockError(e.what(), level, plane);
    }
}

void HKernel::collect_ranks(const HMatrix& a, RankStats& s) const {
    merge_stats(s, rank_stats(a));
}

namespace detail {

std::vector<int> eliminated_positions(int plane_count) {
    std::vector<int> v;
    for (int j = 0; j < plane_count; j += 2) v.push_back(j);
    if (plane_count % 2 == 1 && !v.empty()) v.pop_back();
    return v;
}

std::vector<int> retained_positions(int plane_count) {
    std::vector<int> v;
    for (int j = 1; j < plane_count; j += 2) v.push_back(j);
    if (plane_count % 2 == 1) v.push_back(plane_count - 1);
    return v;
}

namespace {

template <class K>
const typename K::Mat* opt_ptr(const std::vector<std::optional<typename K::Mat>>& v, int j) {
    if (j < 0 || j >= static_cast<int>(v.size()) || !v[j]) return nullptr;
    return &*v[j];
}

/// One reduction step: records the level (consuming the input blocks) and
/// returns the retained planes' blocks for the next level.
template <class K>
AcrLevel<K> reduce_level(const K& kern, int level_no,
                         std::vector<std::optional<typename K::Mat>>& D,
                         std::vector<std::optional<typename K::Mat>>& E,
                         std::vector<std::optional<typename K::Mat>>& F) {
    using Mat = typename K::Mat;
    const int m = static_cast<int>(D.size());

    AcrLevel<K> level;
    level.plane_count = m;
    level.eliminated = eliminated_positions(m);
    level.retained = retained_positions(m);
    level.E = std::move(E);
    level.F = std::move(F);
    level.Dinv.resize(m);

    std::vector<char> is_elim(m, 0);
    for (int e : level.eliminated) {
        level.Dinv[e] = kern.invert(*D[e], level_no, e);
        is_elim[e] = 1;
    }

    const int mn = static_cast<int>(level.retained.size());
    std::vector<std::optional<Mat>> Dn(mn), En(mn), Fn(mn);
    for (int t = 0; t < mn; ++t) {
        const int j = level.retained[t];
        const bool lo = j > 0 && is_elim[j - 1];
        const bool hi = j + 1 < m && is_elim[j + 1];
        auto upd = eliminate_around(
            kern, *D[j], opt_ptr<K>(level.E, j), opt_ptr<K>(level.F, j),
            lo ? &*level.Dinv[j - 1] : nullptr, opt_ptr<K>(level.E, j - 1),
            opt_ptr<K>(level.F, j - 1), hi ? &*level.Dinv[j + 1] : nullptr,
            opt_ptr<K>(level.E, j + 1), opt_ptr<K>(level.F, j + 1));
        Dn[t] = std::move(upd.D);
        if (upd.E)
            En[t] = std::move(upd.E);
        else if (t > 0 && level.retained[t - 1] == j - 1)
            En[t] = *level.E[j]; // adjacent retained planes keep their coupling
        if (upd.F)
            Fn[t] = std::move(upd.F);
        else if (t + 1 < mn && level.retained[t + 1] == j + 1)
            Fn[t] = *level.F[j];
    }
    D = std::move(Dn);
    E = std::move(En);
    F = std::move(Fn);
    // The Schur updates above used the guard-tolerance inverses; the stored
    // copies only feed matvecs during solves, so trim them to full tolerance.
    for (int e : level.eliminated) kern.recompress_stored(*level.Dinv[e]);
    return level;
}

/// Block-Thomas factorization of the remaining planes.
template <class K>
ApexFactor<K> factor_apex(const K& kern, int level_no,
                          std::vector<std::optional<typename K::Mat>>& D,
                          std::vector<std::optional<typename K::Mat>>& E,
                          std::vector<std::optional<typename K::Mat>>& F) {
    using Mat = typename K::Mat;
    const int s = static_cast<int>(D.size());
    ApexFactor<K> apex;
    apex.E = std::move(E);
    apex.F = std::move(F);
    apex.Dinv.reserve(s);
    for (int i = 0; i < s; ++i) {
        Mat Di = std::move(*D[i]);
        if (i > 0) {
            Mat T = kern.multiply(*apex.E[i], apex.Dinv[i - 1]);
            kern.multiply_add(Di, T, *apex.F[i - 1], -1.0);
        }
        apex.Dinv.push_back(kern.invert(Di, level_no, i));
    }
    for (auto& d : apex.Dinv) kern.recompress_stored(d);
    return apex;
}

template <class K>
Factorization<K> factor_impl(K kern, std::vector<std::optional<typename K::Mat>> D,
                             std::vector<std::optional<typename K::Mat>> E,
                             std::vector<std::optional<typename K::Mat>> F, int plane_dim,
                             int stop_planes) {
    Factorization<K> fact;
    fact.kern = kern;
    fact.plane_dim = plane_dim;
    fact.plane_count = static_cast<int>(D.size());
    int level_no = 0;
    while (static_cast<int>(D.size()) > stop_planes)
        fact.levels.push_back(reduce_level(kern, level_no++, D, E, F));
    fact.apex = factor_apex(kern, level_no, D, E, F);
    return fact;
}

template <class K>
std::vector<Eigen::VectorXd> solve_apex(const K& kern, const ApexFactor<K>& apex,
                                        const std::vector<Eigen::VectorXd>& f) {
    const int s = static_cast<int>(apex.Dinv.size());
    std::vector<Eigen::VectorXd> g(s), u(s);
    for (int i = 0; i < s; ++i) {
        g[i] = f[i];
        if (i > 0) g[i] -= kern.apply(*apex.E[i], kern.apply(apex.Dinv[i - 1], g[i - 1]));
    }
    // backward sweep: u_i = Dinv_i (g_i - F_i u_{i+1})
    for (int i = s - 1; i >= 0; --i) {
        Eigen::VectorXd r = g[i];
        if (i + 1 < s) r -= kern.apply(*apex.F[i], u[i + 1]);
        u[i] = kern.apply(apex.Dinv[i], r);
    }
    return u;
}

template <class K>
std::vector<PlaneVector> solve_impl(const Factorization<K>& fact,
                                    const std::vector<Eigen::VectorXd>& f) {
    const K& kern = fact.kern;
    if (static_cast<int>(f.size()) != fact.plane_count)
        throw DimensionError("solve: right-hand side has " + std::to_string(f.size()) +
                             " planes, factorization has " + std::to_string(fact.plane_count));
    for (int j = 0; j < fact.plane_count; ++j)
        if (f[j].size() != fact.plane_dim)
            throw DimensionError("solve: plane right-hand side dimension mismatch", j);

    // forward pass: fold eliminated planes' contributions into retained rhs
    std::vector<std::vector<Eigen::VectorXd>> fs;
    fs.push_back(f);
    for (const auto& level : fact.levels) {
        const auto& cur = fs.back();
        const int m = level.plane_count;
        std::vector<Eigen::VectorXd> next(level.retained.size());
        for (size_t t = 0; t < level.retained.size(); ++t) {
            const int j = level.retained[t];
            const bool lo = j > 0 && level.Dinv[j - 1].has_value();
            const bool hi = j + 1 < m && level.Dinv[j + 1].has_value();
            next[t] = forward_rhs(kern, cur[j], opt_ptr<K>(level.E, j),
                                  lo ? &*level.Dinv[j - 1] : nullptr, lo ? &cur[j - 1] : nullptr,
                                  opt_ptr<K>(level.F, j), hi ? &*level.Dinv[j + 1] : nullptr,
                                  hi ? &cur[j + 1] : nullptr);
        }
        fs.push_back(std::move(next));
    }

    std::vector<Eigen::VectorXd> u = solve_apex(kern, fact.apex, fs.back());

    // backward pass: recover eliminated planes level by level
    for (int i = static_cast<int>(fact.levels.size()) - 1; i >= 0; --i) {
        const auto& level = fact.levels[i];
        const auto& fl = fs[i];
        const int m = level.plane_count;
        std::vector<Eigen::VectorXd> ul(m);
        for (size_t t = 0; t < level.retained.size(); ++t) ul[level.retained[t]] = std::move(u[t]);
        for (int e : level.eliminated)
            ul[e] = back_substitute(kern, *level.Dinv[e], fl[e], opt_ptr<K>(level.E, e),
                                    e > 0 ? &ul[e - 1] : nullptr, opt_ptr<K>(level.F, e),
                                    e + 1 < m ? &ul[e + 1] : nullptr);
        u = std::move(ul);
    }

    std::vector<PlaneVector> out(u.size());
    for (size_t j = 0; j < u.size(); ++j) out[j] = PlaneVector{std::move(u[j]), static_cast<int>(j)};
    return out;
}

template <class K>
long bytes_impl(const Factorization<K>& fact) {
    long total = 0;
    for (const auto& level : fact.levels) {
        for (const auto& b : level.E)
            if (b) total += fact.kern.bytes(*b);
        for (const auto& b : level.F)
            if (b) total += fact.kern.bytes(*b);
        for (const auto& b : level.Dinv)
            if (b) total += fact.kern.bytes(*b);
    }
    for (const auto& b : fact.apex.E)
        if (b) total += fact.kern.bytes(*b);
    for (const auto& b : fact.apex.F)
        if (b) total += fact.kern.bytes(*b);
    for (const auto& b : fact.apex.Dinv) total += fact.kern.bytes(b);
    return total;
}

template <class K>
RankStats inverse_stats_impl(const Factorization<K>& fact) {
    RankStats s;
    for (const auto& level : fact.levels)
        for (const auto& b : level.Dinv)
            if (b) fact.kern.collect_ranks(*b, s);
    for (const auto& b : fact.apex.Dinv) fact.kern.collect_ranks(b, s);
    return s;
}

template <class K>
std::vector<LevelInfo> level_info_impl(const Factorization<K>& fact) {
    std::vector<LevelInfo> out;
    for (size_t i = 0; i < fact.levels.size(); ++i) {
        const auto& level = fact.levels[i];
        LevelInfo li;
        li.level = static_cast<int>(i);
        li.plane_count = level.plane_count;
        li.eliminated = static_cast<int>(level.eliminated.size());
        RankStats s;
        for (const auto& b : level.Dinv)
            if (b) {
                li.bytes += fact.kern.bytes(*b);
                fact.kern.collect_ranks(*b, s);
            }
        for (const auto& b : level.E)
            if (b) li.bytes += fact.kern.bytes(*b);
        for (const auto& b : level.F)
            if (b) li.bytes += fact.kern.bytes(*b);
        li.largest_rank = s.largest_rank;
        li.average_rank = s.average_rank;
        out.push_back(li);
    }
    LevelInfo apex;
    apex.level = static_cast<int>(fact.levels.size());
    apex.plane_count = static_cast<int>(fact.apex.Dinv.size());
    apex.eliminated = apex.plane_count;
    RankStats s;
    for (const auto& b : fact.apex.Dinv) {
        apex.bytes += fact.kern.bytes(b);
        fact.kern.collect_ranks(b, s);
    }
    for (const auto& b : fact.apex.E)
        if (b) apex.bytes += fact.kern.bytes(*b);
    for (const auto& b : fact.apex.F)
        if (b) apex.bytes += fact.kern.bytes(*b);
    apex.largest_rank = s.largest_rank;
    apex.average_rank = s.average_rank;
    out.push_back(apex);
    return out;
}

} // namespace

LiftedBlocks<DenseKernel> lift_dense(const BlockTridiagonalSystem& system) {
    const int n = system.plane_count();
    LiftedBlocks<DenseKernel> out;
    out.D.resize(n);
    out.E.resize(n);
    out.F.resize(n);
    for (int j = 0; j < n; ++j) out.D[j] = system.D(j).to_dense();
    for (int j = 1; j < n; ++j) out.E[j] = system.E(j).to_dense();
    for (int j = 0; j + 1 < n; ++j) out.F[j] = system.F(j).to_dense();
    return out;
}

LiftedBlocks<HKernel> lift_hmatrix(const BlockTridiagonalSystem& system, const AcrConfig& config) {
    const int n = system.plane_count();
    // All plane blocks share one geometry, so one block structure serves
    // every block and every product stays structure-aligned.
    auto tree = std::make_shared<ClusterTree>(system.D(0).coords(), config.leaf_size);
    BlockClusterTree bct(tree, config.eta, config.admissibility);
    LiftedBlocks<HKernel> out;
    out.D.resize(n);
    out.E.resize(n);
    out.F.resize(n);
    for (int j = 0; j < n; ++j)
        out.D[j] = compress_sparse(system.D(j), bct, config.eps, config.leaf_memory_cap);
    for (int j = 1; j < n; ++j)
        out.E[j] = compress_sparse(system.E(j), bct, config.eps, config.leaf_memory_cap);
    for (int j = 0; j + 1 < n; ++j)
        out.F[j] = compress_sparse(system.F(j), bct, config.eps, config.leaf_memory_cap);
    return out;
}

} // namespace detail

AcrFactorization::AcrFactorization(AcrConfig config, detail::DenseFactorization f)
    : config_(config), impl_(std::move(f)) {}
AcrFactorization::AcrFactorization(AcrConfig config, detail::HFactorization f)
    : config_(config), impl_(std::move(f)) {}

int AcrFactorization::plane_count() const {
    return std::visit([](const auto& f) { return f.plane_count; }, impl_);
}

int AcrFactorization::plane_dim() const {
    return std::visit([](const auto& f) { return f.plane_dim; }, impl_);
}

std::vector<PlaneVector> AcrFactorization::solve(const std::vector<Eigen::VectorXd>& f) const {
    return std::visit([&](const auto& fa) { return detail::solve_impl(fa, f); }, impl_);
}

long AcrFactorization::factor_bytes() const {
    return std::visit([](const auto& f) { return detail::bytes_impl(f); }, impl_);
}

RankStats AcrFactorization::inverse_rank_stats() const {
    return std::visit([](const auto& f) { return detail::inverse_stats_impl(f); }, impl_);
}

std::vector<LevelInfo> AcrFactorization::level_info() const {
    return std::visit([](const auto& f) { return detail::level_info_impl(f); }, impl_);
}

AcrFactorization acr_factor(const BlockTridiagonalSystem& system, const AcrConfig& config) {
    const int n = system.plane_count();
    const int d = system.plane_dim();
    if (n < 1 || d < 1) throw DimensionError("acr_factor: empty system");
    if (config.stop_planes < 1) throw UsageError("acr_factor: stop_planes must be >= 1");

    if (config.mode == ArithmeticMode::Dense) {
        auto blocks = detail::lift_dense(system);
        return AcrFactorization(
            config, detail::factor_impl(DenseKernel{}, std::move(blocks.D), std::move(blocks.E),
                                        std::move(blocks.F), d, config.stop_planes));
    }

    auto blocks = detail::lift_hmatrix(system, config);
    return AcrFactorization(config, detail::factor_impl(detail::arithmetic_kernel(config),
                                                        std::move(blocks.D), std::move(blocks.E),
                                                        std::move(blocks.F), d,
                                                        config.stop_planes));
}

std::vector<PlaneVector> acr_solve(const AcrFactorization& fact,
                                   const std::vector<Eigen::VectorXd>& f) {
    return fact.solve(f);
}

AcrFactorization cr_dense_factor(const BlockTridiagonalSystem& system) {
    AcrConfig config;
    config.mode = ArithmeticMode::Dense;
    return acr_factor(system, config);
}

std::vector<PlaneVector> cr_dense_solve(const AcrFactorization& fact,
                                        const std::vector<Eigen::VectorXd>& f) {
    return fact.solve(f);
}

long predicted_dense_cr_bytes(int n_planes, int plane_dim, int stop_planes) {
    const long block = 8L * plane_dim * plane_dim;
    long total = 0;
    int m = n_planes;
    while (m > stop_planes) {
        const int elim = static_cast<int>(detail::eliminated_positions(m).size());
        total += (2L * (m - 1) + elim) * block; // E and F couplings plus stored inverses
        m -= elim;
    }
    total += (3L * m - 2) * block; // final block-Thomas stage
    return total;
}

DenseLevelBlocks schur_step_dense(const DenseLevelBlocks& level) {
    const int m = static_cast<int>(level.D.size());
    if (m < 2) throw DimensionError("schur_step_dense: need at least two planes");
    if (static_cast<int>(level.E.size()) != m || static_cast<int>(level.F.size()) != m ||
        static_cast<int>(level.f.size()) != m)
        throw DimensionError("schur_step_dense: block arrays must all have one length");

    DenseKernel kern;
    std::vector<std::optional<Eigen::MatrixXd>> D(m), E(m), F(m);
    for (int j = 0; j < m; ++j) D[j] = level.D[j];
    for (int j = 1; j < m; ++j) E[j] = level.E[j];
    for (int j = 0; j + 1 < m; ++j) F[j] = level.F[j];

    auto step = detail::reduce_level(kern, 0, D, E, F);

    DenseLevelBlocks out;
    const int mn = static_cast<int>(step.retained.size());
    out.D.resize(mn);
    out.E.assign(mn, Eigen::MatrixXd());
    out.F.assign(mn, Eigen::MatrixXd());
    out.f.resize(mn);
    for (int t = 0; t < mn; ++t) {
        const int j = step.retained[t];
        out.D[t] = std::move(*D[t]);
        if (t > 0 && E[t]) out.E[t] = std::move(*E[t]);
        if (t + 1 < mn && F[t]) out.F[t] = std::move(*F[t]);
        const bool lo = j > 0 && step.Dinv[j - 1].has_value();
        const bool hi = j + 1 < step.plane_count && step.Dinv[j + 1].has_value();
        out.f[t] = detail::forward_rhs(
            kern, level.f[j], j > 0 ? &level.E[j] : nullptr,
            lo ? &*step.Dinv[j - 1] : nullptr, lo ? &level.f[j - 1] : nullptr,
            j + 1 < m ? &level.F[j] : nullptr, hi ? &*step.Dinv[j + 1] : nullptr,
            hi ? &level.f[j + 1] : nullptr);
    }
    return out;
}

} // namespace acr
