#include "acr/parallel.hpp"

#include <barrier>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <set>
#include <thread>

namespace acr {

namespace {

bool is_pow2(int x) { return x > 0 && (x & (x - 1)) == 0; }

int ilog2(int x) {
    int r = 0;
    while (x > 1) {
        x >>= 1;
        ++r;
    }
    return r;
}

long msg_key(int level, int plane) { return (static_cast<long>(level) << 32) | plane; }

/// Single-producer-per-key mailbox; take() blocks until the key arrives
/// or the run aborts.
template <class T>
class Mailbox {
public:
    void put(long key, T v) {
        {
            std::lock_guard<std::mutex> lk(m_);
            box_.emplace(key, std::move(v));
        }
        cv_.notify_all();
    }
    T take(long key, const std::atomic<bool>& abort) {
        std::unique_lock<std::mutex> lk(m_);
        cv_.wait(lk, [&] { return box_.count(key) != 0 || abort.load(); });
        auto it = box_.find(key);
        if (it == box_.end()) throw Error("parallel run aborted");
        T v = std::move(it->second);
        box_.erase(it);
        return v;
    }
    void wake() { cv_.notify_all(); }

private:
    std::mutex m_;
    std::condition_variable cv_;
    std::map<long, T> box_;
};

/// Elimination payload: the eliminated plane's couplings, stored inverse,
/// and current right-hand side (pointers into the shared factorization,
/// written by the sender before the message is enqueued).
template <class K>
struct FactorPayload {
    const typename K::Mat* E = nullptr;
    const typename K::Mat* Dinv = nullptr;
    const typename K::Mat* F = nullptr;
    std::shared_ptr<const Eigen::VectorXd> f;
};

struct SolvePayload {
    std::shared_ptr<const Eigen::VectorXd> u;
};

template <class K>
struct RunState {
    const ParallelPlan* plan = nullptr;
    K kern;
    detail::Factorization<K> fact;
    std::vector<Eigen::VectorXd> rhs;
    detail::LiftedBlocks<K>* blocks = nullptr; ///< level-0 blocks, consumed by owners

    std::deque<Mailbox<FactorPayload<K>>> fbox; ///< one per worker
    std::deque<Mailbox<SolvePayload>> sbox;
    std::unique_ptr<std::barrier<>> bar;
    std::atomic<bool> abort{false};

    std::vector<std::optional<Eigen::VectorXd>> solution; ///< level-0 planes
    std::vector<std::vector<MessageRecord>> records;      ///< per worker
    std::vector<std::exception_ptr> errors;               ///< per worker
};

template <class K>
const typename K::Mat* opt_ptr(const std::vector<std::optional<typename K::Mat>>& v, int j) {
    if (j < 0 || j >= static_cast<int>(v.size()) || !v[j]) return nullptr;
    return &*v[j];
}

template <class K>
void worker_main(RunState<K>& st, int me) {
    using Mat = typename K::Mat;
    const K& kern = st.kern;
    const ParallelPlan& plan = *st.plan;
    const int levels = static_cast<int>(st.fact.levels.size());
    auto owner = [&](int level, int plane) { return plan.assignment[level][plane]; };

    struct Plane {
        Mat D;
        std::optional<Mat> E, F;
        Eigen::VectorXd f;
    };
    std::map<int, Plane> mine;
    for (int j = 0; j < plan.n_planes; ++j) {
        if (owner(0, j) != me) continue;
        Plane pl;
        pl.D = std::move(*st.blocks->D[j]);
        if (st.blocks->E[j]) pl.E = std::move(st.blocks->E[j]);
        if (st.blocks->F[j]) pl.F = std::move(st.blocks->F[j]);
        pl.f = st.rhs[j];
        mine.emplace(j, std::move(pl));
    }

    // right-hand sides of owned eliminated planes, kept per level for the
    // back-substitution sweep
    std::vector<std::map<int, Eigen::VectorXd>> fsave(levels);

    for (int i = 0; i < levels; ++i) {
        auto& level = st.fact.levels[i];
        const int m = level.plane_count;
        std::vector<char> is_elim(m, 0);
        for (int e : level.eliminated) is_elim[e] = 1;

        // publish owned couplings into the shared factorization
        for (auto& [j, pl] : mine) {
            if (pl.E) level.E[j] = std::move(pl.E);
            if (pl.F) level.F[j] = std::move(pl.F);
        }

        // phase 1: invert owned eliminated diagonals and message neighbors
        for (auto& [j, pl] : mine) {
            if (!is_elim[j]) continue;
            level.Dinv[j] = kern.invert(pl.D, i, j);
            fsave[i].emplace(j, pl.f);
        }
        for (auto& [j, pl] : mine) {
            if (!is_elim[j]) continue;
            std::set<int> dests;
            for (int nb : {j - 1, j + 1}) {
                if (nb < 0 || nb >= m) continue;
                const int dest = owner(i, nb);
                if (dest != me && dests.insert(dest).second) {
                    FactorPayload<K> pay;
                    pay.E = opt_ptr<K>(level.E, j);
                    pay.Dinv = &*level.Dinv[j];
                    pay.F = opt_ptr<K>(level.F, j);
                    pay.f = std::make_shared<const Eigen::VectorXd>(pl.f);
                    long bytes = kern.bytes(*pay.Dinv) + 8L * pay.f->size();
                    if (pay.E) bytes += kern.bytes(*pay.E);
                    if (pay.F) bytes += kern.bytes(*pay.F);
                    st.records[me].push_back(MessageRecord{i, j, nb, bytes, false});
                    st.fbox[dest].put(msg_key(i, j), std::move(pay));
                }
            }
        }
        st.bar->arrive_and_wait();

        // phase 2: fold eliminated neighbors into owned retained planes
        std::map<int, FactorPayload<K>> received;
        auto neighbor = [&](int e) -> FactorPayload<K>* {
            if (e < 0 || e >= m || !is_elim[e]) return nullptr;
            auto it = received.find(e);
            if (it == received.end()) {
                FactorPayload<K> pay;
                if (owner(i, e) == me) {
                    pay.E = opt_ptr<K>(level.E, e);
                    pay.Dinv = &*level.Dinv[e];
                    pay.F = opt_ptr<K>(level.F, e);
                    pay.f = std::make_shared<const Eigen::VectorXd>(mine.at(e).f);
                } else {
                    pay = st.fbox[me].take(msg_key(i, e), st.abort);
                }
                it = received.emplace(e, std::move(pay)).first;
            }
            return &it->second;
        };

        std::map<int, Plane> next;
        for (size_t t = 0; t < level.retained.size(); ++t) {
            const int j = level.retained[t];
            if (owner(i, j) != me) continue;
            Plane& pl = mine.at(j);
            FactorPayload<K>* lo = neighbor(j - 1);
            FactorPayload<K>* hi = neighbor(j + 1);
            auto upd = detail::eliminate_around(
                kern, pl.D, opt_ptr<K>(level.E, j), opt_ptr<K>(level.F, j),
                lo ? lo->Dinv : nullptr, lo ? lo->E : nullptr, lo ? lo->F : nullptr,
                hi ? hi->Dinv : nullptr, hi ? hi->E : nullptr, hi ? hi->F : nullptr);
            Plane np;
            np.D = std::move(upd.D);
            if (upd.E)
                np.E = std::move(upd.E);
            else if (t > 0 && level.retained[t - 1] == j - 1)
                np.E = *level.E[j];
            if (upd.F)
                np.F = std::move(upd.F);
            else if (t + 1 < level.retained.size() && level.retained[t + 1] == j + 1)
                np.F = *level.F[j];
            np.f = detail::forward_rhs(kern, pl.f, opt_ptr<K>(level.E, j),
                                       lo ? lo->Dinv : nullptr, lo ? lo->f.get() : nullptr,
                                       opt_ptr<K>(level.F, j), hi ? hi->Dinv : nullptr,
                                       hi ? hi->f.get() : nullptr);
            next.emplace(static_cast<int>(t), std::move(np));
        }
        mine = std::move(next);
        st.bar->arrive_and_wait();
        // all Schur updates against this level's inverses are done; trim the
        // owned stored copies to full tolerance (matches the sequential path)
        for (int e : level.eliminated)
            if (owner(i, e) == me) kern.recompress_stored(*level.Dinv[e]);
    }

    // apex stage: block-Thomas over the remaining planes (a single plane
    // unless this is a one-worker early-stop run)
    const int s = static_cast<int>(st.fact.apex.E.size());
    std::map<int, Eigen::VectorXd> u;
    if (!mine.empty()) {
        std::vector<Eigen::VectorXd> g(s);
        for (int idx = 0; idx < s; ++idx) {
            if (!mine.count(idx)) continue; // only reachable when p == 1 or s == 1
            Plane& pl = mine.at(idx);
            Mat Di = std::move(pl.D);
            if (idx > 0) {
                st.fact.apex.E[idx] = std::move(pl.E);
                Mat T = kern.multiply(*st.fact.apex.E[idx], st.fact.apex.Dinv[idx - 1]);
                kern.multiply_add(Di, T, *st.fact.apex.F[idx - 1], -1.0);
            }
            if (pl.F) st.fact.apex.F[idx] = std::move(pl.F);
            st.fact.apex.Dinv.push_back(kern.invert(Di, levels, idx));
            g[idx] = pl.f;
            if (idx > 0)
                g[idx] -= kern.apply(*st.fact.apex.E[idx],
                                     kern.apply(st.fact.apex.Dinv[idx - 1], g[idx - 1]));
        }
        for (int idx = s - 1; idx >= 0; --idx) {
            if (!mine.count(idx)) continue;
            Eigen::VectorXd r = g[idx];
            if (idx + 1 < s) r -= kern.apply(*st.fact.apex.F[idx], u.at(idx + 1));
            u.emplace(idx, kern.apply(st.fact.apex.Dinv[idx], r));
        }
        for (auto& d : st.fact.apex.Dinv) kern.recompress_stored(d);
    }
    st.bar->arrive_and_wait();

    // back-substitution sweep, top level down
    for (int i = levels - 1; i >= 0; --i) {
        const auto& level = st.fact.levels[i];
        const int m = level.plane_count;
        std::vector<char> is_elim(m, 0);
        for (int e : level.eliminated) is_elim[e] = 1;

        std::map<int, Eigen::VectorXd> ul;
        for (size_t t = 0; t < level.retained.size(); ++t) {
            auto it = u.find(static_cast<int>(t));
            if (it != u.end()) ul.emplace(level.retained[t], std::move(it->second));
        }

        // phase 1: message owned retained solutions to eliminated neighbors
        for (const auto& [j, uj] : ul) {
            for (int nb : {j - 1, j + 1}) {
                if (nb < 0 || nb >= m || !is_elim[nb]) continue;
                const int dest = owner(i, nb);
                if (dest == me) continue;
                st.records[me].push_back(MessageRecord{i, j, nb, 8L * uj.size(), true});
                st.sbox[dest].put(msg_key(i, j),
                                  SolvePayload{std::make_shared<const Eigen::VectorXd>(uj)});
            }
        }
        st.bar->arrive_and_wait();

        // phase 2: recover owned eliminated planes
        auto neighbor_u = [&](int j) -> Eigen::VectorXd {
            if (owner(i, j) == me) return ul.at(j);
            return *st.sbox[me].take(msg_key(i, j), st.abort).u;
        };
        for (int e : level.eliminated) {
            if (owner(i, e) != me) continue;
            std::optional<Eigen::VectorXd> lo, hi;
            if (e > 0) lo = neighbor_u(e - 1);
            if (e + 1 < m) hi = neighbor_u(e + 1);
            ul.emplace(e, detail::back_substitute(kern, *level.Dinv[e], fsave[i].at(e),
                                                  opt_ptr<K>(level.E, e), lo ? &*lo : nullptr,
                                                  opt_ptr<K>(level.F, e), hi ? &*hi : nullptr));
        }
        st.bar->arrive_and_wait();
        u = std::move(ul);
    }

    for (auto& [j, uj] : u)
        if (owner(0, j) == me) st.solution[j] = std::move(uj);
}

template <class K>
void worker_entry(RunState<K>& st, int me) {
    try {
        worker_main(st, me);
    } catch (...) {
        st.errors[me] = std::current_exception();
        st.abort.store(true);
        for (auto& b : st.fbox) b.wake();
        for (auto& b : st.sbox) b.wake();
        st.bar->arrive_and_drop();
    }
}

template <class K>
ParallelRun run_parallel(K kern, detail::LiftedBlocks<K> blocks,
                         const BlockTridiagonalSystem& system, const ParallelPlan& plan,
                         const AcrConfig& config) {
    const int n = plan.n_planes;
    RunState<K> st;
    st.plan = &plan;
    st.kern = kern;
    st.blocks = &blocks;
    st.rhs = system.rhs();
    st.fact.kern = kern;
    st.fact.plane_dim = system.plane_dim();
    st.fact.plane_count = n;

    int m = n;
    while (m > config.stop_planes) {
        detail::AcrLevel<K> level;
        level.plane_count = m;
        level.eliminated = detail::eliminated_positions(m);
        level.retained = detail::retained_positions(m);
        level.E.resize(m);
        level.F.resize(m);
        level.Dinv.resize(m);
        st.fact.levels.push_back(std::move(level));
        m = static_cast<int>(st.fact.levels.back().retained.size());
    }
    st.fact.apex.Dinv.reserve(m);
    st.fact.apex.E.resize(m);
    st.fact.apex.F.resize(m);

    st.fbox.resize(plan.p);
    st.sbox.resize(plan.p);
    st.bar = std::make_unique<std::barrier<>>(plan.p);
    st.solution.resize(n);
    st.records.resize(plan.p);
    st.errors.resize(plan.p);

    {
        std::vector<std::jthread> workers;
        for (int w = 0; w < plan.p; ++w) workers.emplace_back([&st, w] { worker_entry(st, w); });
    }
    for (auto& e : st.errors)
        if (e) std::rethrow_exception(e);

    ParallelRun run{AcrFactorization(config, std::move(st.fact)), {}, {}};
    run.u.resize(n);
    for (int j = 0; j < n; ++j) run.u[j] = PlaneVector{std::move(*st.solution[j]), j};

    const int levels = static_cast<int>(run.factorization.level_info().size()) - 1;
    run.ledger.factor.resize(levels);
    run.ledger.solve.resize(levels);
    for (int i = 0; i < levels; ++i) {
        std::set<int> active(plan.assignment[i].begin(), plan.assignment[i].end());
        for (auto* part : {&run.ledger.factor[i], &run.ledger.solve[i]}) {
            part->level = i;
            part->active_workers = static_cast<int>(active.size());
            part->idle_workers = plan.p - part->active_workers;
        }
    }
    for (auto& per_worker : st.records)
        for (auto& r : per_worker) {
            auto& part = r.solve_phase ? run.ledger.solve[r.level] : run.ledger.factor[r.level];
            part.messages += 1;
            part.bytes += r.bytes;
            run.ledger.records.push_back(r);
        }
    return run;
}

} // namespace

ParallelPlan plan_schedule(int n_planes, int p) {
    if (!is_pow2(n_planes) || !is_pow2(p))
        throw UsageError("plan_schedule: plane and worker counts must be powers of two");
    if (p > n_planes) throw UsageError("plan_schedule: more workers than planes");

    ParallelPlan plan;
    plan.p = p;
    plan.n_planes = n_planes;
    plan.c_level = ilog2(n_planes / p);

    std::vector<int> cur(n_planes);
    const int per_worker = n_planes / p;
    for (int j = 0; j < n_planes; ++j) cur[j] = j / per_worker;
    plan.assignment.push_back(cur);
    while (static_cast<int>(cur.size()) > 1) {
        const auto retained = detail::retained_positions(static_cast<int>(cur.size()));
        std::vector<int> next(retained.size());
        for (size_t t = 0; t < retained.size(); ++t) next[t] = cur[retained[t]];
        cur = std::move(next);
        plan.assignment.push_back(cur);
    }
    return plan;
}

long critical_path_length(const ParallelPlan& plan) {
    long total = 0;
    for (int i = 0; i < plan.c_level; ++i) {
        const long planes = plan.n_planes >> (i + 1); // eliminated at this level
        total += (planes + plan.p - 1) / plan.p;      // per longest worker
    }
    return total + ilog2(plan.p);
}

long MessageLedger::total_messages() const { return static_cast<long>(records.size()); }

long MessageLedger::total_bytes() const {
    long b = 0;
    for (const auto& r : records) b += r.bytes;
    return b;
}

ParallelRun execute_parallel_factor(const BlockTridiagonalSystem& system,
                                    const ParallelPlan& plan, const AcrConfig& config) {
    if (plan.n_planes != system.plane_count())
        throw DimensionError("execute_parallel_factor: plan is for " +
                             std::to_string(plan.n_planes) + " planes, system has " +
                             std::to_string(system.plane_count()));
    if (plan.assignment.empty() ||
        static_cast<int>(plan.assignment[0].size()) != plan.n_planes)
        throw UsageError("execute_parallel_factor: malformed plan");
    if (plan.p > 1 && config.stop_planes != 1)
        throw UsageError("execute_parallel_factor: early stop requires a single worker");

    if (config.mode == ArithmeticMode::Dense)
        return run_parallel(DenseKernel{}, detail::lift_dense(system), system, plan, config);
    return run_parallel(detail::arithmetic_kernel(config), detail::lift_hmatrix(system, config),
                        system, plan, config);
}

} // namespace acr
