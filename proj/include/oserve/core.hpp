#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace oserve {

using DeviceId = int;

struct MachineSpec {
    std::string machine_id;
    std::vector<DeviceId> device_ids;
    std::uint64_t device_mem = 0;  // bytes per device

    bool operator==(const MachineSpec &) const = default;
};

// Physical substrate: machines with devices plus the two link classes
// (NVLink-class within a machine, InfiniBand-class across machines).
struct ClusterSpec {
    std::vector<MachineSpec> machines;
    double intra_bw = 0.0;  // bytes/second
    double inter_bw = 0.0;  // bytes/second

    bool operator==(const ClusterSpec &) const = default;

    int device_count() const;
    std::vector<DeviceId> all_devices() const;  // sorted by id
    // Index into machines for a device id; -1 if unknown.
    int machine_index(DeviceId d) const;
    std::uint64_t device_mem(DeviceId d) const;
    bool same_machine(DeviceId a, DeviceId b) const;
};

struct ModelSpec {
    std::string name;
    std::uint64_t param_bytes = 0;
    std::uint32_t num_layers = 0;
    std::uint64_t bytes_per_token_kv = 0;   // KV bytes per token, all layers
    std::uint64_t flops_per_token_prefill = 0;  // abstract units
    std::uint64_t min_mem_bytes = 0;

    bool operator==(const ModelSpec &) const = default;
};

// One model replica: the devices it owns and its (tp, pp) strategy.
// Devices are kept sorted by id; pipeline stage s holds devices
// [s*tp, (s+1)*tp) of that order and every stage's tp-group must sit
// within a single machine.
struct ReplicaConfig {
    std::vector<DeviceId> device_ids;
    int tp = 1;
    int pp = 1;

    bool operator==(const ReplicaConfig &) const = default;

    int device_count() const { return static_cast<int>(device_ids.size()); }
    // Devices of pipeline stage s (valid only when tp*pp == |devices|).
    std::vector<DeviceId> stage_devices(int s) const;
};

struct Deployment {
    std::vector<ReplicaConfig> replicas;

    bool operator==(const Deployment &) const = default;

    int replica_count() const { return static_cast<int>(replicas.size()); }
    int device_count() const;
};

// A k-means centroid in (input length, output length) space.
struct WorkloadType {
    int type_id = 0;
    double centroid_in = 1.0;   // tokens
    double centroid_out = 1.0;  // tokens

    bool operator==(const WorkloadType &) const = default;
};

struct TraceRecord {
    std::uint64_t arrival_ms = 0;
    std::uint32_t input_len = 1;
    std::uint32_t output_len = 1;

    bool operator==(const TraceRecord &) const = default;
};

// Per-type arrival counts for one scheduling span (60 s by default).
struct TraceSpan {
    std::int64_t span_index = 0;
    std::vector<std::int64_t> counts;

    bool operator==(const TraceSpan &) const = default;
};

constexpr int kDefaultSpanSeconds = 60;

// Validation: each throws std::invalid_argument naming the offending field.
void validate(const MachineSpec &m);
void validate(const ClusterSpec &c);
void validate(const ModelSpec &m);
void validate(const WorkloadType &w);
void validate(const TraceRecord &r);
void validate(const TraceSpan &s);

// Structural replica check: tp*pp matches the device count, devices exist
// and are unique, and every pipeline stage is intra-machine.
bool replica_valid(const ReplicaConfig &cfg, const ClusterSpec &cluster);
// Same check but throws with a reason instead of returning false.
void validate_replica(const ReplicaConfig &cfg, const ClusterSpec &cluster);

// Deployment check: every replica valid, device sets pairwise disjoint,
// total device usage within the cluster.
void validate_deployment(const Deployment &dep, const ClusterSpec &cluster);

}  // namespace oserve
