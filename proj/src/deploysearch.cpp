#include "oserve/deploysearch.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "oserve/errors.hpp"

namespace oserve::search {

namespace {

std::uint64_t rng_below(std::mt19937_64 &rng, std::uint64_t n) { return rng() % n; }

std::vector<int> deployment_sizes(const Deployment &dep) {
    std::vector<int> sizes;
    sizes.reserve(dep.replicas.size());
    for (const auto &r : dep.replicas) sizes.push_back(r.device_count());
    return sizes;
}

std::vector<std::array<int, 3>> cache_key(const Deployment &dep) {
    std::vector<std::array<int, 3>> key;
    key.reserve(dep.replicas.size());
    for (const auto &r : dep.replicas) key.push_back({r.device_count(), r.tp, r.pp});
    return key;
}

// Strategy-combination preference: higher objective, then smaller total pp,
// then lexicographically larger tp tuple, then smaller pp tuple. Total
// order over combos of one partition, so parallel reduction is stable.
struct ComboResult {
    std::int64_t objective = -1;
    int sum_pp = std::numeric_limits<int>::max();
    std::vector<int> tps;
    std::vector<int> pps;
    Deployment deployment;

    bool better_than(const ComboResult &o) const {
        if (objective != o.objective) return objective > o.objective;
        if (sum_pp != o.sum_pp) return sum_pp < o.sum_pp;
        if (tps != o.tps) return tps > o.tps;
        return pps < o.pps;
    }
};

}  // namespace

UtilizationReport classify(const flow::LowerLevel &lower) {
    UtilizationReport report;
    const int R = static_cast<int>(lower.M.size());
    for (int k = 0; k < R; ++k) {
        std::int64_t min_unit = std::numeric_limits<std::int64_t>::max();
        for (std::int64_t u : lower.unit[k]) {
            if (u > 0) min_unit = std::min(min_unit, u);
        }
        std::int64_t residual = lower.M[k] - lower.used[k];
        bool saturated =
            min_unit != std::numeric_limits<std::int64_t>::max() && residual < min_unit;
        if (saturated) {
            report.overutilized.push_back(k);
        } else {
            report.underutilized.push_back(k);
        }
    }
    return report;
}

int min_feasible_group(const ClusterSpec &cluster, const ModelSpec &model) {
    std::uint64_t min_dev = std::numeric_limits<std::uint64_t>::max();
    for (const auto &m : cluster.machines) min_dev = std::min(min_dev, m.device_mem);
    const int D = cluster.device_count();
    for (int g = 1; g <= D; ++g) {
        bool mem_total = static_cast<std::uint64_t>(g) * min_dev >= model.min_mem_bytes;
        bool shard_fits = (model.param_bytes + g - 1) / g <= min_dev;
        if (mem_total && shard_fits) return g;
    }
    throw ModelTooLarge("model " + model.name + " does not fit on " + std::to_string(D) + " devices");
}

std::vector<std::vector<DeviceId>> canonical_blocks(const ClusterSpec &cluster,
                                                    const std::vector<int> &sizes) {
    std::vector<DeviceId> devices = cluster.all_devices();
    int total = std::accumulate(sizes.begin(), sizes.end(), 0);
    if (total > static_cast<int>(devices.size())) {
        throw std::invalid_argument("canonical_blocks: sizes exceed cluster device count");
    }
    std::vector<std::vector<DeviceId>> blocks;
    int pos = 0;
    for (int s : sizes) {
        blocks.emplace_back(devices.begin() + pos, devices.begin() + pos + s);
        pos += s;
    }
    return blocks;
}

std::vector<std::pair<int, int>> strategy_candidates(const std::vector<DeviceId> &block,
                                                     const ClusterSpec &cluster,
                                                     const ModelSpec &model) {
    std::vector<std::pair<int, int>> out;
    const int d = static_cast<int>(block.size());
    for (int tp = d; tp >= 1; --tp) {
        if (d % tp != 0) continue;
        ReplicaConfig cfg{block, tp, d / tp};
        if (replica_valid(cfg, cluster) && cost::memory_feasible(cfg, model, cluster)) {
            out.emplace_back(tp, d / tp);
        }
    }
    return out;
}

Deployment init_uniform(const ClusterSpec &cluster, const ModelSpec &model) {
    const int g = min_feasible_group(cluster, model);
    const int D = cluster.device_count();
    const int R = D / g;
    std::vector<int> sizes(R, g);
    auto blocks = canonical_blocks(cluster, sizes);
    Deployment dep;
    for (const auto &block : blocks) {
        auto cands = strategy_candidates(block, cluster, model);
        if (cands.empty()) {
            throw ModelTooLarge("no feasible strategy for a " + std::to_string(g) + "-device replica");
        }
        // Candidates are tp-descending: the first is the most tensor-parallel.
        dep.replicas.push_back({block, cands.front().first, cands.front().second});
    }
    return dep;
}

std::int64_t evaluate_deployment(const Deployment &dep, const EvalContext &ctx) {
    if (dep.replicas.empty()) return 0;
    auto key = cache_key(dep);
    if (ctx.cache != nullptr) {
        auto it = ctx.cache->find(key);
        if (it != ctx.cache->end()) return it->second;
    }
    cost::CapacityTable table =
        cost::build_capacity_table(dep, ctx.types, ctx.model, ctx.cluster, ctx.params, ctx.span_seconds);
    flow::LowerLevel lower = flow::solve_assignment(table, ctx.span.counts);
    std::int64_t obj = lower.assignment.objective;
    if (ctx.cache != nullptr) (*ctx.cache)[key] = obj;
    return obj;
}

StrategyChoice best_strategies(const std::vector<int> &sizes_in, const EvalContext &ctx) {
    std::vector<int> sizes = sizes_in;
    std::sort(sizes.begin(), sizes.end(), std::greater<int>());
    auto blocks = canonical_blocks(ctx.cluster, sizes);
    const int R = static_cast<int>(sizes.size());

    std::vector<std::vector<std::pair<int, int>>> cands(R);
    std::int64_t combos = 1;
    for (int r = 0; r < R; ++r) {
        cands[r] = strategy_candidates(blocks[r], ctx.cluster, ctx.model);
        if (cands[r].empty()) return {};  // no feasible strategy set
        combos *= static_cast<std::int64_t>(cands[r].size());
    }

    auto combo_at = [&](std::int64_t idx) {
        std::vector<int> pick(R);
        for (int r = R - 1; r >= 0; --r) {
            pick[r] = static_cast<int>(idx % cands[r].size());
            idx /= static_cast<std::int64_t>(cands[r].size());
        }
        return pick;
    };

    auto evaluate_combo = [&](std::int64_t idx, const EvalContext &c) {
        ComboResult res;
        auto pick = combo_at(idx);
        res.deployment.replicas.reserve(R);
        res.sum_pp = 0;
        for (int r = 0; r < R; ++r) {
            auto [tp, pp] = cands[r][pick[r]];
            res.deployment.replicas.push_back({blocks[r], tp, pp});
            res.tps.push_back(tp);
            res.pps.push_back(pp);
            res.sum_pp += pp;
        }
        res.objective = evaluate_deployment(res.deployment, c);
        return res;
    };

    ComboResult best;
#ifdef _OPENMP
    if (ctx.parallel && combos > 8) {
        // The objective cache is not thread-safe; evaluate the grid without
        // it and backfill the winner. The comparator is a total order over
        // combos, so the reduction result does not depend on thread timing.
        EvalContext grid_ctx = ctx;
        grid_ctx.cache = nullptr;
#pragma omp parallel
        {
            ComboResult local;
#pragma omp for schedule(dynamic, 4) nowait
            for (std::int64_t i = 0; i < combos; ++i) {
                ComboResult res = evaluate_combo(i, grid_ctx);
                if (res.better_than(local)) local = std::move(res);
            }
#pragma omp critical
            {
                if (local.better_than(best)) best = std::move(local);
            }
        }
        if (ctx.cache != nullptr && best.objective >= 0) {
            (*ctx.cache)[cache_key(best.deployment)] = best.objective;
        }
    } else
#endif
    {
        for (std::int64_t i = 0; i < combos; ++i) {
            ComboResult res = evaluate_combo(i, ctx);
            if (res.better_than(best)) best = std::move(res);
        }
    }

    StrategyChoice choice;
    choice.deployment = best.deployment;
    choice.objective = std::max<std::int64_t>(best.objective, 0);
    return choice;
}

namespace {

// One search iteration's mutation over replica sizes, applied against a
// snapshot of the utilization report per the flow-guided generation loop.
struct MutationResult {
    std::vector<int> sizes;
    std::string op;
};

MutationResult mutate_sizes(const std::vector<int> &sizes, const std::vector<int> &pps,
                            const UtilizationReport &report, int g_min, std::mt19937_64 &rng) {
    std::vector<int> sz = sizes;
    std::vector<bool> alive(sz.size(), true);
    std::ostringstream ops;

    auto alive_in = [&](const std::vector<int> &set, int except) {
        std::vector<int> out;
        for (int r : set) {
            if (r != except && alive[r]) out.push_back(r);
        }
        return out;
    };

    std::vector<std::pair<int, int>> splits;  // deferred replica splits
    for (int r : report.overutilized) {
        if (!alive[r]) continue;
        bool try_merge = rng_below(rng, 2) == 0;
        auto others = alive_in(report.overutilized, r);
        auto donors = alive_in(report.underutilized, -1);
        donors.erase(std::remove_if(donors.begin(), donors.end(),
                                    [&](int u) { return sz[u] <= g_min; }),
                     donors.end());
        if (try_merge && !others.empty()) {
            int r2 = others[rng_below(rng, others.size())];
            sz[r] += sz[r2];
            alive[r2] = false;
            ops << "merge(" << r << "," << r2 << ");";
        } else if (!donors.empty()) {
            int u = donors[rng_below(rng, donors.size())];
            int delta = std::max(1, sz[u] / std::max(1, pps[u]));
            delta = std::min(delta, sz[u] - g_min);
            if (delta <= 0) continue;
            sz[r] += delta;
            sz[u] -= delta;
            ops << "swap(" << r << "<-" << u << ",d=" << delta << ");";
        } else if (!others.empty()) {
            int r2 = others[rng_below(rng, others.size())];
            sz[r] += sz[r2];
            alive[r2] = false;
            ops << "merge(" << r << "," << r2 << ");";
        }
    }
    for (int r : report.underutilized) {
        if (!alive[r]) continue;
        bool try_split = rng_below(rng, 2) == 0;
        bool can_split = sz[r] >= 2 * g_min;
        auto receivers = alive_in(report.overutilized, -1);
        int delta = std::max(1, sz[r] / std::max(1, pps[r]));
        delta = std::min(delta, sz[r] - g_min);
        bool can_swap = !receivers.empty() && delta > 0;
        if (try_split && can_split) {
            splits.emplace_back(r, sz[r] / 2);
            ops << "split(" << r << ");";
        } else if (can_swap) {
            int o = receivers[rng_below(rng, receivers.size())];
            sz[o] += delta;
            sz[r] -= delta;
            ops << "swap(" << o << "<-" << r << ",d=" << delta << ");";
        } else if (can_split) {
            splits.emplace_back(r, sz[r] / 2);
            ops << "split(" << r << ");";
        }
    }

    MutationResult out;
    for (std::size_t r = 0; r < sz.size(); ++r) {
        if (!alive[r]) continue;
        auto split_it = std::find_if(splits.begin(), splits.end(),
                                     [&](const auto &p) { return p.first == static_cast<int>(r); });
        if (split_it != splits.end()) {
            out.sizes.push_back(split_it->second);
            out.sizes.push_back(sz[r] - split_it->second);
        } else {
            out.sizes.push_back(sz[r]);
        }
    }
    out.op = ops.str();
    return out;
}

// Deterministic absorption of unassigned devices so device conservation
// holds from the first iteration onward: carve full replicas out of the
// leftover pool when possible, then grow the smallest replicas.
std::vector<int> absorb_leftovers(std::vector<int> sizes, int device_count, int g_min) {
    int used = std::accumulate(sizes.begin(), sizes.end(), 0);
    int leftover = device_count - used;
    while (leftover >= g_min) {
        sizes.push_back(g_min);
        leftover -= g_min;
    }
    while (leftover > 0 && !sizes.empty()) {
        auto it = std::min_element(sizes.begin(), sizes.end());
        *it += 1;
        --leftover;
    }
    return sizes;
}

}  // namespace

SearchState search(const ClusterSpec &cluster, const ModelSpec &model,
                   const std::vector<WorkloadType> &types, const TraceSpan &span, double span_seconds,
                   const cost::ProfileParams &params, const SearchOptions &opts) {
    const int g_min = min_feasible_group(cluster, model);
    const int D = cluster.device_count();
    ObjectiveCache cache;
    EvalContext ctx{cluster, model, types, span, span_seconds, params, &cache, opts.parallel};

    std::vector<int> sizes;
    if (opts.warm_start != nullptr && !opts.warm_start->replicas.empty()) {
        sizes = deployment_sizes(*opts.warm_start);
    } else {
        sizes = deployment_sizes(init_uniform(cluster, model));
    }
    sizes = absorb_leftovers(std::move(sizes), D, g_min);

    StrategyChoice current = best_strategies(sizes, ctx);
    if (current.deployment.replicas.empty()) {
        throw ModelTooLarge("search: no feasible strategy for the initial deployment");
    }

    std::mt19937_64 rng(opts.seed);
    SearchState state;
    state.rng_seed = opts.seed;

    int stale = 0;
    int iter = 0;
    while (iter < opts.max_iters && stale < opts.stale_limit) {
        ++iter;
        cost::CapacityTable table = cost::build_capacity_table(current.deployment, types, model, cluster,
                                                               params, span_seconds);
        flow::LowerLevel lower = flow::solve_assignment(table, span.counts);
        UtilizationReport report = classify(lower);

        std::vector<int> cur_sizes = deployment_sizes(current.deployment);
        std::vector<int> cur_pps;
        for (const auto &r : current.deployment.replicas) cur_pps.push_back(r.pp);

        MutationResult mut;
        bool found = false;
        for (int attempt = 0; attempt < opts.mutation_retries && !found; ++attempt) {
            mut = mutate_sizes(cur_sizes, cur_pps, report, g_min, rng);
            std::vector<int> a = mut.sizes;
            std::vector<int> b = cur_sizes;
            std::sort(a.begin(), a.end());
            std::sort(b.begin(), b.end());
            found = !mut.op.empty() && a != b;
        }
        if (!found) {
            ++stale;
            if (opts.log) {
                opts.log({iter, "stale(no-mutation)", false, current.objective,
                          current.deployment.device_count()});
            }
            continue;
        }

        StrategyChoice candidate = best_strategies(mut.sizes, ctx);
        bool accepted = !candidate.deployment.replicas.empty() && candidate.objective > current.objective;
        if (accepted) {
            current = candidate;
            stale = 0;
        } else {
            ++stale;
        }
        if (opts.log) {
            opts.log({iter, mut.op, accepted, current.objective,
                      current.deployment.device_count()});
        }
    }

    state.deployment = current.deployment;
    state.throughput = current.objective;
    state.stale_iters = stale;
    state.iterations = iter;
    return state;
}

namespace {

void partitions_desc(int remaining, int max_part, int min_part, std::vector<int> &cur,
                     const std::function<void(const std::vector<int> &)> &emit) {
    if (remaining == 0) {
        emit(cur);
        return;
    }
    for (int p = std::min(remaining, max_part); p >= min_part; --p) {
        cur.push_back(p);
        partitions_desc(remaining - p, p, min_part, cur, emit);
        cur.pop_back();
    }
}

}  // namespace

SearchState exhaustive(const ClusterSpec &cluster, const ModelSpec &model,
                       const std::vector<WorkloadType> &types, const TraceSpan &span,
                       double span_seconds, const cost::ProfileParams &params, bool parallel) {
    const int D = cluster.device_count();
    if (D > 16) {
        throw TooLarge("exhaustive enumeration guarded to 16 devices, cluster has " + std::to_string(D));
    }
    const int g_min = min_feasible_group(cluster, model);

    ObjectiveCache cache;
    EvalContext ctx{cluster, model, types, span, span_seconds, params, &cache, parallel};

    SearchState best;
    best.throughput = -1;
    int configs = 0;
    std::vector<int> cur;
    partitions_desc(D, D, g_min, cur, [&](const std::vector<int> &sizes) {
        StrategyChoice choice = best_strategies(sizes, ctx);
        ++configs;
        if (choice.deployment.replicas.empty()) return;
        if (choice.objective > best.throughput) {
            best.throughput = choice.objective;
            best.deployment = choice.deployment;
        }
    });
    if (best.throughput < 0) {
        throw ModelTooLarge("exhaustive: no feasible deployment for model " + model.name);
    }
    best.iterations = configs;
    return best;
}

}  // namespace oserve::search
