#ifndef ACR_ACR_HPP
#define ACR_ACR_HPP

#include <optional>
#include <variant>
#include <vector>

#include "acr/block.hpp"
#include "acr/hmatrix.hpp"

namespace acr {

enum class ArithmeticMode { Dense, HMatrix };

struct AcrConfig {
    ArithmeticMode mode = ArithmeticMode::HMatrix;
    double eps = 1e-3;
    double eta = 2.0;
    int leaf_size = 32;
    Admissibility admissibility = Admissibility::Standard;
    int stop_planes = 1; ///< remaining plane count at which reduction stops
    long leaf_memory_cap = kDefaultLeafMemoryCap;
};

/// Block arithmetic with dense Eigen storage.
struct DenseKernel {
    using Mat = Eigen::MatrixXd;
    Mat invert(const Mat& a, int level, int plane) const;
    Mat multiply(const Mat& a, const Mat& b) const { return a * b; }
    void multiply_add(Mat& c, const Mat& a, const Mat& b, double alpha) const {
        c.noalias() += alpha * a * b;
    }
    Mat zeros_like(const Mat& a) const { return Mat::Zero(a.rows(), a.cols()); }
    Eigen::VectorXd apply(const Mat& a, const Eigen::VectorXd& x) const { return a * x; }
    long bytes(const Mat& a) const { return 8L * a.rows() * a.cols(); }
    void collect_ranks(const Mat&, RankStats&) const {}
    void recompress_stored(Mat&) const {}
};

/// Block arithmetic with tolerance-truncated H-matrix operations.
struct HKernel {
    double eps = 1e-3;
    double store_eps = 0; ///< stored-inverse tolerance; 0 keeps blocks as computed
    using Mat = HMatrix;
    Mat invert(const Mat& a, int level, int plane) const;
    Mat multiply(const Mat& a, const Mat& b) const { return hmultiply(a, b, eps); }
    void multiply_add(Mat& c, const Mat& a, const Mat& b, double alpha) const {
        hmultiply_add(c, a, b, alpha, eps);
    }
    Mat zeros_like(const Mat& a) const { return acr::zeros_like(a); }
    Eigen::VectorXd apply(const Mat& a, const Eigen::VectorXd& x) const {
        return hmatvec(a, x);
    }
    long bytes(const Mat& a) const { return memory_footprint(a); }
    void collect_ranks(const Mat& a, RankStats& s) const;
    void recompress_stored(Mat& a) const {
        if (store_eps > eps) recompress(a, store_eps);
    }
};

namespace detail {

/// Positions eliminated in one reduction step: even positions, except that
/// for an odd plane count the trailing plane carries through unpaired.
std::vector<int> eliminated_positions(int plane_count);
std::vector<int> retained_positions(int plane_count);

/// New blocks of a retained plane after its eliminated neighbors are folded
/// in. Null pointers mean "neighbor absent or not eliminated"; couplings to
/// adjacent retained planes pass through unchanged at the call site.
template <class K>
struct RetainedUpdate {
    typename K::Mat D;
    std::optional<typename K::Mat> E; ///< coupling to the previous retained plane
    std::optional<typename K::Mat> F; ///< coupling to the next retained plane
};

template <class K>
RetainedUpdate<K> eliminate_around(const K& kern, const typename K::Mat& Dj,
                                   const typename K::Mat* Ej, const typename K::Mat* Fj,
                                   const typename K::Mat* Dinv_lo,
                                   const typename K::Mat* E_lo, const typename K::Mat* F_lo,
                                   const typename K::Mat* Dinv_hi,
                                   const typename K::Mat* E_hi, const typename K::Mat* F_hi) {
    RetainedUpdate<K> out;
    out.D = Dj;
    if (Dinv_lo) {
        // T = E_j * Dinv_{j-1}; D' -= T * F_{j-1}; E' = -T * E_{j-1}
        typename K::Mat T = kern.multiply(*Ej, *Dinv_lo);
        if (F_lo) kern.multiply_add(out.D, T, *F_lo, -1.0);
        if (E_lo) {
            typename K::Mat En = kern.zeros_like(Dj);
            kern.multiply_add(En, T, *E_lo, -1.0);
            out.E = std::move(En);
        }
    }
    if (Dinv_hi) {
        typename K::Mat T = kern.multiply(*Fj, *Dinv_hi);
        if (E_hi) kern.multiply_add(out.D, T, *E_hi, -1.0);
        if (F_hi) {
            typename K::Mat Fn = kern.zeros_like(Dj);
            kern.multiply_add(Fn, T, *F_hi, -1.0);
            out.F = std::move(Fn);
        }
    }
    return out;
}

/// f'_j = f_j - E_j Dinv_lo f_lo - F_j Dinv_hi f_hi (terms present when the
/// corresponding neighbor was eliminated).
template <class K>
Eigen::VectorXd forward_rhs(const K& kern, const Eigen::VectorXd& fj,
                            const typename K::Mat* Ej, const typename K::Mat* Dinv_lo,
                            const Eigen::VectorXd* f_lo, const typename K::Mat* Fj,
                            const typename K::Mat* Dinv_hi, const Eigen::VectorXd* f_hi) {
    Eigen::VectorXd out = fj;
    if (Dinv_lo && f_lo) out -= kern.apply(*Ej, kern.apply(*Dinv_lo, *f_lo));
    if (Dinv_hi && f_hi) out -= kern.apply(*Fj, kern.apply(*Dinv_hi, *f_hi));
    return out;
}

/// u_e = Dinv_e (f_e - E_e u_lo - F_e u_hi)
template <class K>
Eigen::VectorXd back_substitute(const K& kern, const typename K::Mat& Dinv,
                                const Eigen::VectorXd& fe, const typename K::Mat* Ee,
                                const Eigen::VectorXd* u_lo, const typename K::Mat* Fe,
                                const Eigen::VectorXd* u_hi) {
    Eigen::VectorXd r = fe;
    if (Ee && u_lo) r -= kern.apply(*Ee, *u_lo);
    if (Fe && u_hi) r -= kern.apply(*Fe, *u_hi);
    return kern.apply(Dinv, r);
}

/// One reduction level. E[j]/F[j] are the level's input couplings
/// (E[0] and F[m-1] absent); Dinv is set at eliminated positions only.
template <class K>
struct AcrLevel {
    int plane_count = 0;
    std::vector<int> eliminated;
    std::vector<int> retained;
    std::vector<std::optional<typename K::Mat>> E, F, Dinv;
};

/// Block-Thomas factorization of the final (post-reduction) system.
template <class K>
struct ApexFactor {
    std::vector<typename K::Mat> Dinv;             ///< Thomas-modified inverses
    std::vector<std::optional<typename K::Mat>> E, F; ///< original apex couplings
};

template <class K>
struct Factorization {
    K kern;
    std::vector<AcrLevel<K>> levels;
    ApexFactor<K> apex;
    int plane_dim = 0;
    int plane_count = 0;
};

using DenseFactorization = Factorization<DenseKernel>;
using HFactorization = Factorization<HKernel>;

/// Lifted system blocks in one arithmetic: D[j], E[j] (couples j to j-1,
/// E[0] absent), F[j] (couples j to j+1, F[n-1] absent).
template <class K>
struct LiftedBlocks {
    std::vector<std::optional<typename K::Mat>> D, E, F;
};

LiftedBlocks<DenseKernel> lift_dense(const BlockTridiagonalSystem& system);
LiftedBlocks<HKernel> lift_hmatrix(const BlockTridiagonalSystem& system, const AcrConfig& config);

/// Elimination arithmetic runs a constant factor tighter than the block
/// compression tolerance so that truncation error accumulated over the
/// level products stays comparable to the compression error itself. Stored
/// inverses are re-truncated to the full tolerance once their level's Schur
/// updates are done, which drops the guard-digit noise from their ranks.
constexpr double kArithmeticSlack = 0.5;
inline HKernel arithmetic_kernel(const AcrConfig& config) {
    return HKernel{config.eps * kArithmeticSlack, config.eps};
}

} // namespace detail

struct LevelInfo {
    int level = 0;
    int plane_count = 0;
    int eliminated = 0;
    long bytes = 0;
    int largest_rank = 0;
    double average_rank = 0;
};

/// Reusable elimination record: one factorization, arbitrarily many solves.
class AcrFactorization {
public:
    AcrFactorization(AcrConfig config, detail::DenseFactorization f);
    AcrFactorization(AcrConfig config, detail::HFactorization f);

    const AcrConfig& config() const { return config_; }
    int plane_count() const;
    int plane_dim() const;

    /// Forward-substitute, apex solve, back-substitute (matvecs only).
    std::vector<PlaneVector> solve(const std::vector<Eigen::VectorXd>& f) const;

    long factor_bytes() const;
    /// Rank statistics over all stored inverses (H-matrix mode; empty otherwise).
    RankStats inverse_rank_stats() const;
    std::vector<LevelInfo> level_info() const;

    const std::variant<detail::DenseFactorization, detail::HFactorization>& impl() const {
        return impl_;
    }

private:
    AcrConfig config_;
    std::variant<detail::DenseFactorization, detail::HFactorization> impl_;
};

/// Full reduction of a block tridiagonal system in the configured arithmetic.
AcrFactorization acr_factor(const BlockTridiagonalSystem& system, const AcrConfig& config);
std::vector<PlaneVector> acr_solve(const AcrFactorization& fact,
                                   const std::vector<Eigen::VectorXd>& f);

/// Classic cyclic reduction with dense blocks: the oracle arithmetic and the
/// memory baseline. Same code path as acr_factor in dense mode.
AcrFactorization cr_dense_factor(const BlockTridiagonalSystem& system);
std::vector<PlaneVector> cr_dense_solve(const AcrFactorization& fact,
                                        const std::vector<Eigen::VectorXd>& f);

/// Bytes a dense-mode factorization of (n_planes, plane_dim) stores, walking
/// the same schedule as the factorization without materializing blocks.
long predicted_dense_cr_bytes(int n_planes, int plane_dim, int stop_planes = 1);

/// Dense single reduction step on explicit level blocks (test/oracle surface).
struct DenseLevelBlocks {
    std::vector<Eigen::MatrixXd> D;
    std::vector<Eigen::MatrixXd> E; ///< E[j] couples plane j to j-1; E[0] ignored
    std::vector<Eigen::MatrixXd> F; ///< F[j] couples plane j to j+1; F[m-1] ignored
    std::vector<Eigen::VectorXd> f;
};
DenseLevelBlocks schur_step_dense(const DenseLevelBlocks& level);

} // namespace acr

#endif
