#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "oserve/core.hpp"
#include "oserve/costmodel.hpp"
#include "oserve/flowassign.hpp"

namespace oserve::search {

// Replica utilization split derived from the lower-level solution: a
// replica is overutilized when its remaining normalized budget cannot
// admit even one more request of its cheapest type.
struct UtilizationReport {
    std::vector<int> overutilized;
    std::vector<int> underutilized;
};

UtilizationReport classify(const flow::LowerLevel &lower);

// Smallest per-replica device count that can host the model.
int min_feasible_group(const ClusterSpec &cluster, const ModelSpec &model);

// Uniform initialization: floor(D / g_min) replicas of g_min devices with
// the most tensor-parallel strategy the placement allows. Leftover devices
// (D mod g_min) stay unassigned; search() absorbs them before iterating.
Deployment init_uniform(const ClusterSpec &cluster, const ModelSpec &model);

// Devices handed out in id order to the given replica sizes.
std::vector<std::vector<DeviceId>> canonical_blocks(const ClusterSpec &cluster,
                                                    const std::vector<int> &sizes);

// All (tp, pp) factorizations of the block size that are placement-valid
// and memory-feasible, ordered by descending tp.
std::vector<std::pair<int, int>> strategy_candidates(const std::vector<DeviceId> &block,
                                                     const ClusterSpec &cluster, const ModelSpec &model);

// Memo for lower-level objectives keyed by the canonical (d, tp, pp) list.
using ObjectiveCache = std::map<std::vector<std::array<int, 3>>, std::int64_t>;

struct EvalContext {
    const ClusterSpec &cluster;
    const ModelSpec &model;
    const std::vector<WorkloadType> &types;
    const TraceSpan &span;
    double span_seconds;
    const cost::ProfileParams &params;
    ObjectiveCache *cache = nullptr;
    bool parallel = true;
};

std::int64_t evaluate_deployment(const Deployment &dep, const EvalContext &ctx);

// Enumerate the full strategy grid for a device partition and return the
// best combination. Ties: smaller total pp, then lexicographically larger
// tp tuple, then smaller pp tuple.
struct StrategyChoice {
    Deployment deployment;
    std::int64_t objective = 0;
};

StrategyChoice best_strategies(const std::vector<int> &sizes, const EvalContext &ctx);

struct SearchLogRow {
    int iteration = 0;
    std::string op;
    bool accepted = false;
    std::int64_t throughput = 0;
    int devices = 0;  // total devices in the deployment after this iteration
};

struct SearchOptions {
    std::uint64_t seed = 0;
    int max_iters = 500;
    int stale_limit = 20;
    int mutation_retries = 8;
    bool parallel = true;
    const Deployment *warm_start = nullptr;
    std::function<void(const SearchLogRow &)> log;
};

struct SearchState {
    Deployment deployment;
    std::int64_t throughput = 0;
    std::uint64_t rng_seed = 0;
    int stale_iters = 0;
    int iterations = 0;
};

// Flow-guided heterogeneous deployment search (mutate / enumerate / revert
// loop). Throws ModelTooLarge when no replica can host the model.
SearchState search(const ClusterSpec &cluster, const ModelSpec &model,
                   const std::vector<WorkloadType> &types, const TraceSpan &span, double span_seconds,
                   const cost::ProfileParams &params, const SearchOptions &opts = {});

// Brute-force oracle over all partitions, strategies and canonical
// placements. Guarded to D <= 16 (throws TooLarge beyond).
SearchState exhaustive(const ClusterSpec &cluster, const ModelSpec &model,
                       const std::vector<WorkloadType> &types, const TraceSpan &span, double span_seconds,
                       const cost::ProfileParams &params, bool parallel = true);

}  // namespace oserve::search
