#ifndef ACR_PARALLEL_HPP
#define ACR_PARALLEL_HPP

#include "acr/acr.hpp"

namespace acr {

/// Static plane-to-worker schedule: contiguous ranges at level 0, ownership
/// inherited by retained planes, active workers halving past the C-level.
struct ParallelPlan {
    int p = 1;        ///< worker count
    int n_planes = 0; ///< planes at level 0
    int c_level = 0;  ///< log2(n_planes / p): first level with one plane per worker
    std::vector<std::vector<int>> assignment; ///< per level: plane -> worker
};

/// Requires n_planes and p to be powers of two with p <= n_planes.
ParallelPlan plan_schedule(int n_planes, int p);

/// Longest worker's plane count summed over pre-C levels plus the log2(p)
/// single-plane levels that follow.
long critical_path_length(const ParallelPlan& plan);

struct MessageRecord {
    int level = 0;
    int from_plane = 0;
    int to_plane = 0;
    long bytes = 0;
    bool solve_phase = false; ///< false: elimination payload {E, Dinv, F, f}; true: {u}
};

struct LevelTraffic {
    int level = 0;
    long messages = 0;
    long bytes = 0;
    int active_workers = 0;
    int idle_workers = 0;
};

/// Cross-worker traffic audit. Same-worker neighbor handoffs are not
/// messages and are not recorded.
struct MessageLedger {
    std::vector<LevelTraffic> factor; ///< elimination payloads per level
    std::vector<LevelTraffic> solve;  ///< back-substitution payloads per level
    std::vector<MessageRecord> records;
    long total_messages() const;
    long total_bytes() const;
};

struct ParallelRun {
    AcrFactorization factorization;
    std::vector<PlaneVector> u; ///< solution for the system's right-hand side
    MessageLedger ledger;
};

/// Factor and solve across plan.p worker threads that exchange eliminated
/// neighbors' blocks and plane solutions through per-worker queues, with a
/// two-phase barrier per level. The factorization and solution are bitwise
/// identical to the sequential path for every worker count.
ParallelRun execute_parallel_factor(const BlockTridiagonalSystem& system,
                                    const ParallelPlan& plan, const AcrConfig& config);

} // namespace acr

#endif
