#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "oserve/core.hpp"

namespace oserve::switchplan {

struct ByteRange {
    std::uint64_t begin = 0;
    std::uint64_t end = 0;  // exclusive

    std::uint64_t len() const { return end - begin; }
    bool operator==(const ByteRange &) const = default;
    auto operator<=>(const ByteRange &) const = default;
};

// Parameter shards induced by a deployment: per replica the model bytes are
// cut into pp contiguous stage ranges, each split into tp equal slices, and
// the slice at (stage, slice) lives on the device the placement rule puts
// there. All replicas hold the full model collectively.
struct ShardLayout {
    struct Shard {
        int shard_id = 0;
        ByteRange range;
        DeviceId holder = -1;
    };
    std::vector<Shard> shards;
    std::map<DeviceId, std::vector<ByteRange>> held;  // per device, sorted disjoint ranges
};

ShardLayout layout(const Deployment &dep, const ModelSpec &model);

struct Transfer {
    ByteRange range;
    DeviceId src = -1;
    DeviceId dst = -1;

    bool operator==(const Transfer &) const = default;
};

using LinkLoad = std::map<std::pair<DeviceId, DeviceId>, std::uint64_t>;

struct SwitchPlan {
    std::vector<Transfer> transfers;
    LinkLoad link_load;  // C_{s->t} totals in bytes
    double est_seconds = 0.0;
};

// Greedy transfer planning: for every byte fragment a target device lacks,
// pick the intra-machine holder with the lowest current load toward that
// target, falling back to the lowest-loaded inter-machine holder. Ties go
// to the lowest device id. Throws UnsourcedFragment when required bytes
// have no holder.
SwitchPlan greedy_plan(const ShardLayout &src, const ShardLayout &dst, const ClusterSpec &cluster);

// All links transfer concurrently, each link serialized: the estimate is
// the slowest link's bytes / bandwidth.
double estimate_time(const SwitchPlan &plan, const ClusterSpec &cluster);

struct InflightRequest {
    std::int64_t request_id = 0;
    std::int64_t generated_tokens = 0;
    std::uint64_t kv_bytes = 0;
    int source_replica = 0;
};

struct KvTransfer {
    std::int64_t request_id = 0;
    std::uint64_t kv_bytes = 0;
    DeviceId src = -1;
    DeviceId dst = -1;

    bool operator==(const KvTransfer &) const = default;
};

struct KvPlan {
    std::vector<std::int64_t> drained;  // finish on the source deployment
    std::vector<KvTransfer> migrated;
    std::uint64_t buffer_bytes = 0;  // pre-allocated on targets, with headroom
};

constexpr std::int64_t kDefaultDrainThresholdTokens = 256;
constexpr double kDefaultKvHeadroom = 0.15;

// Short requests drain on the source deployment; the rest migrate through
// the same min-load, intra-machine-first selection the parameter plan
// uses. `carry` seeds the load counters (pass the parameter plan so both
// phases balance jointly).
KvPlan kv_plan(const std::vector<InflightRequest> &inflight, std::int64_t threshold_tokens,
               const Deployment &src, const Deployment &dst, const ClusterSpec &cluster,
               double headroom = kDefaultKvHeadroom, const SwitchPlan *carry = nullptr);

}  // namespace oserve::switchplan
