#include "oserve/costmodel.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "oserve/errors.hpp"

namespace oserve::cost {

void validate(const ProfileParams &p) {
    if (!(p.prefill_coeff > 0.0)) throw std::invalid_argument("profile: prefill_coeff must be > 0");
    if (!(p.decode_coeff > 0.0)) throw std::invalid_argument("profile: decode_coeff must be > 0");
    if (!(p.tp_efficiency > 0.0 && p.tp_efficiency <= 1.0)) {
        throw std::invalid_argument("profile: tp_efficiency must be in (0, 1]");
    }
    if (!(p.pp_comm_cost > 0.0)) throw std::invalid_argument("profile: pp_comm_cost must be > 0");
    if (p.mem_bw_penalty < 0.0) throw std::invalid_argument("profile: mem_bw_penalty must be >= 0");
}

double tp_speedup(int tp, double tp_efficiency) {
    return tp * std::pow(tp_efficiency, std::log2(static_cast<double>(tp)));
}

double decode_penalty(int tp, double slope) { return 1.0 + slope * (tp - 1); }

double prefill_latency(const ReplicaConfig &cfg, const ModelSpec &model, double input_tokens,
                       const ProfileParams &params) {
    double compute = input_tokens * model.num_layers * params.prefill_coeff /
                     tp_speedup(cfg.tp, params.tp_efficiency);
    return compute + (cfg.pp - 1) * params.pp_comm_cost;
}

double decode_latency(const ReplicaConfig &cfg, const ModelSpec &model, double output_tokens,
                      const ProfileParams &params) {
    double compute = output_tokens * model.num_layers * params.decode_coeff *
                     decode_penalty(cfg.tp, params.mem_bw_penalty) / cfg.tp;
    return compute + (cfg.pp - 1) * params.pp_comm_cost * output_tokens;
}

double request_service_time(const ReplicaConfig &cfg, const ModelSpec &model, const WorkloadType &wtype,
                            const ProfileParams &params) {
    return prefill_latency(cfg, model, wtype.centroid_in, params) +
           decode_latency(cfg, model, wtype.centroid_out, params);
}

bool memory_feasible(const ReplicaConfig &cfg, const ModelSpec &model, const ClusterSpec &cluster) {
    std::uint64_t total = 0;
    std::uint64_t min_dev = std::numeric_limits<std::uint64_t>::max();
    for (DeviceId d : cfg.device_ids) {
        std::uint64_t mem = cluster.device_mem(d);
        if (mem == 0) return false;
        total += mem;
        min_dev = std::min(min_dev, mem);
    }
    if (cfg.device_ids.empty()) return false;
    if (total < model.min_mem_bytes) return false;
    std::uint64_t shards = static_cast<std::uint64_t>(cfg.tp) * cfg.pp;
    std::uint64_t share = (model.param_bytes + shards - 1) / shards;
    return share <= min_dev;
}

std::uint64_t replica_kv_budget(const ReplicaConfig &cfg, const ModelSpec &model, const ClusterSpec &cluster) {
    std::uint64_t total = 0;
    for (DeviceId d : cfg.device_ids) total += cluster.device_mem(d);
    return total > model.param_bytes ? total - model.param_bytes : 0;
}

double kv_bytes_per_request(const ModelSpec &model, const WorkloadType &wtype) {
    return (wtype.centroid_in + wtype.centroid_out) * static_cast<double>(model.bytes_per_token_kv);
}

std::int64_t capacity(const ReplicaConfig &cfg, const ModelSpec &model, const ClusterSpec &cluster,
                      const WorkloadType &wtype, double span_s, const ProfileParams &params) {
    if (!memory_feasible(cfg, model, cluster)) {
        throw InfeasibleReplica("replica with " + std::to_string(cfg.device_count()) +
                                " devices cannot host model " + model.name);
    }
    double service = request_service_time(cfg, model, wtype, params);
    return static_cast<std::int64_t>(std::floor(span_s * cfg.pp / service));
}

std::int64_t edge_capacity(const ReplicaConfig &cfg, const ModelSpec &model, const ClusterSpec &cluster,
                           const WorkloadType &wtype, double span_s, const ProfileParams &params,
                           std::uint64_t kv_budget) {
    std::int64_t n = capacity(cfg, model, cluster, wtype, span_s, params);
    double per_req = kv_bytes_per_request(model, wtype);
    double cap = std::floor(static_cast<double>(kv_budget) / per_req);
    if (cap >= static_cast<double>(n)) return n;
    return static_cast<std::int64_t>(cap);
}

CapacityTable build_capacity_table(const Deployment &dep, const std::vector<WorkloadType> &types,
                                   const ModelSpec &model, const ClusterSpec &cluster,
                                   const ProfileParams &params, double span_s) {
    CapacityTable table;
    const int R = dep.replica_count();
    const int J = static_cast<int>(types.size());
    table.n.assign(R, std::vector<std::int64_t>(J, 0));
    table.e.assign(R, std::vector<std::int64_t>(J, 0));
    table.latency.assign(R, std::vector<double>(J, 0.0));
    for (int k = 0; k < R; ++k) {
        const ReplicaConfig &cfg = dep.replicas[k];
        if (!memory_feasible(cfg, model, cluster)) {
            throw InfeasibleReplica("replica " + std::to_string(k) + " cannot host model " + model.name);
        }
        std::uint64_t budget = replica_kv_budget(cfg, model, cluster);
        for (int j = 0; j < J; ++j) {
            table.n[k][j] = capacity(cfg, model, cluster, types[j], span_s, params);
            table.e[k][j] = edge_capacity(cfg, model, cluster, types[j], span_s, params, budget);
            table.latency[k][j] = request_service_time(cfg, model, types[j], params);
        }
    }
    return table;
}

}  // namespace oserve::cost
