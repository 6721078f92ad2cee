#pragma once

#include <cstdint>
#include <vector>

#include "oserve/core.hpp"

namespace oserve::cost {

// Analytical stand-in for one-time hardware profiling. Coefficients are
// per (token x layer) at tp=1; tp_efficiency is the per-doubling scaling
// retention; mem_bw_penalty is the per-extra-device decode slowdown slope
// so the decode multiplier is 1 + mem_bw_penalty*(tp-1).
struct ProfileParams {
    double prefill_coeff = 6e-6;   // s per (token x layer), tp=1
    double decode_coeff = 1e-6;    // s per (step x layer), tp=1, amortized batch cost
    double tp_efficiency = 0.75;   // in (0, 1]
    double pp_comm_cost = 5e-4;    // s per stage boundary per microbatch
    double mem_bw_penalty = 0.05;  // decode multiplier slope, >= 0

    bool operator==(const ProfileParams &) const = default;
};

void validate(const ProfileParams &p);

// speedup(tp) = tp * tp_efficiency^log2(tp): linear when efficiency is 1,
// concave otherwise.
double tp_speedup(int tp, double tp_efficiency);
// Decode multiplier 1 + slope*(tp-1).
double decode_penalty(int tp, double slope);

double prefill_latency(const ReplicaConfig &cfg, const ModelSpec &model, double input_tokens,
                       const ProfileParams &params);
double decode_latency(const ReplicaConfig &cfg, const ModelSpec &model, double output_tokens,
                      const ProfileParams &params);

// Full per-request latency for a workload type's centroid lengths.
double request_service_time(const ReplicaConfig &cfg, const ModelSpec &model, const WorkloadType &wtype,
                            const ProfileParams &params);

bool memory_feasible(const ReplicaConfig &cfg, const ModelSpec &model, const ClusterSpec &cluster);

// Aggregate replica memory left for KV cache after parameters.
std::uint64_t replica_kv_budget(const ReplicaConfig &cfg, const ModelSpec &model, const ClusterSpec &cluster);

// KV bytes one request of this type holds (prompt + generated tokens).
double kv_bytes_per_request(const ModelSpec &model, const WorkloadType &wtype);

// n_{k,j}: requests/span served exclusively, assuming perfect request
// pipelining across the pp stages (a request occupies the replica for
// service_time/pp in steady state). Throws InfeasibleReplica.
std::int64_t capacity(const ReplicaConfig &cfg, const ModelSpec &model, const ClusterSpec &cluster,
                      const WorkloadType &wtype, double span_s, const ProfileParams &params);

// e_{k,j} = min(n_{k,j}, kv_budget / kv_per_request): the KV-limited
// admission cap. Throws InfeasibleReplica.
std::int64_t edge_capacity(const ReplicaConfig &cfg, const ModelSpec &model, const ClusterSpec &cluster,
                           const WorkloadType &wtype, double span_s, const ProfileParams &params,
                           std::uint64_t kv_budget);

struct CapacityTable {
    // [replica][type]
    std::vector<std::vector<std::int64_t>> n;
    std::vector<std::vector<std::int64_t>> e;
    std::vector<std::vector<double>> latency;  // per-request seconds

    int replicas() const { return static_cast<int>(n.size()); }
    int types() const { return n.empty() ? 0 : static_cast<int>(n[0].size()); }

    bool operator==(const CapacityTable &) const = default;
};

CapacityTable build_capacity_table(const Deployment &dep, const std::vector<WorkloadType> &types,
                                   const ModelSpec &model, const ClusterSpec &cluster,
                                   const ProfileParams &params, double span_s);

}  // namespace oserve::cost
