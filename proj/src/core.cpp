#include "oserve/core.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>

namespace oserve {

namespace {

[[noreturn]] void fail(const std::string &msg) { throw std::invalid_argument(msg); }

}  // namespace

int ClusterSpec::device_count() const {
    int n = 0;
    for (const auto &m : machines) n += static_cast<int>(m.device_ids.size());
    return n;
}

std::vector<DeviceId> ClusterSpec::all_devices() const {
    std::vector<DeviceId> out;
    for (const auto &m : machines) out.insert(out.end(), m.device_ids.begin(), m.device_ids.end());
    std::sort(out.begin(), out.end());
    return out;
}

int ClusterSpec::machine_index(DeviceId d) const {
    for (std::size_t i = 0; i < machines.size(); ++i) {
        const auto &ids = machines[i].device_ids;
        if (std::find(ids.begin(), ids.end(), d) != ids.end()) return static_cast<int>(i);
    }
    return -1;
}

std::uint64_t ClusterSpec::device_mem(DeviceId d) const {
    int m = machine_index(d);
    return m < 0 ? 0 : machines[m].device_mem;
}

bool ClusterSpec::same_machine(DeviceId a, DeviceId b) const {
    int ma = machine_index(a);
    return ma >= 0 && ma == machine_index(b);
}

std::vector<DeviceId> ReplicaConfig::stage_devices(int s) const {
    std::vector<DeviceId> sorted = device_ids;
    std::sort(sorted.begin(), sorted.end());
    std::vector<DeviceId> out;
    for (int i = s * tp; i < (s + 1) * tp && i < static_cast<int>(sorted.size()); ++i)
        out.push_back(sorted[i]);
    return out;
}

int Deployment::device_count() const {
    int n = 0;
    for (const auto &r : replicas) n += r.device_count();
    return n;
}

void validate(const MachineSpec &m) {
    if (m.device_ids.empty()) fail("machine " + m.machine_id + ": device_ids empty");
    if (m.device_mem == 0) fail("machine " + m.machine_id + ": device_mem must be > 0");
}

void validate(const ClusterSpec &c) {
    if (c.machines.empty()) fail("cluster: no machines");
    std::set<DeviceId> seen;
    for (const auto &m : c.machines) {
        validate(m);
        for (DeviceId d : m.device_ids) {
            if (!seen.insert(d).second) fail("cluster: duplicate device id " + std::to_string(d));
        }
    }
    if (!(c.inter_bw > 0.0)) fail("cluster: inter_bw must be > 0");
    if (c.intra_bw < c.inter_bw) fail("cluster: intra_bw must be >= inter_bw");
}

void validate(const ModelSpec &m) {
    if (m.param_bytes == 0) fail("model " + m.name + ": param_bytes must be > 0");
    if (m.num_layers == 0) fail("model " + m.name + ": num_layers must be > 0");
    if (m.bytes_per_token_kv == 0) fail("model " + m.name + ": bytes_per_token_kv must be > 0");
    if (m.flops_per_token_prefill == 0) fail("model " + m.name + ": flops_per_token_prefill must be > 0");
    if (m.min_mem_bytes < m.param_bytes) fail("model " + m.name + ": min_mem_bytes < param_bytes");
}

void validate(const WorkloadType &w) {
    if (w.centroid_in < 1.0 || w.centroid_out < 1.0) {
        fail("workload type " + std::to_string(w.type_id) + ": centroids must be >= 1 token");
    }
}

void validate(const TraceRecord &r) {
    if (r.input_len < 1) fail("trace record: input_len must be >= 1");
    if (r.output_len < 1) fail("trace record: output_len must be >= 1");
}

void validate(const TraceSpan &s) {
    for (auto c : s.counts) {
        if (c < 0) fail("span " + std::to_string(s.span_index) + ": negative count");
    }
}

void validate_replica(const ReplicaConfig &cfg, const ClusterSpec &cluster) {
    if (cfg.tp < 1 || cfg.pp < 1) fail("replica: tp and pp must be >= 1");
    if (cfg.device_ids.empty()) fail("replica: no devices");
    if (cfg.tp * cfg.pp != cfg.device_count()) {
        fail("replica: tp*pp = " + std::to_string(cfg.tp * cfg.pp) + " but " +
             std::to_string(cfg.device_count()) + " devices");
    }
    std::set<DeviceId> uniq(cfg.device_ids.begin(), cfg.device_ids.end());
    if (static_cast<int>(uniq.size()) != cfg.device_count()) fail("replica: duplicate device ids");
    for (DeviceId d : cfg.device_ids) {
        if (cluster.machine_index(d) < 0) fail("replica: unknown device id " + std::to_string(d));
    }
    // Tensor groups never cross machine boundaries.
    for (int s = 0; s < cfg.pp; ++s) {
        auto stage = cfg.stage_devices(s);
        for (std::size_t i = 1; i < stage.size(); ++i) {
            if (!cluster.same_machine(stage[0], stage[i])) {
                fail("replica: stage " + std::to_string(s) + " spans machines (devices " +
                     std::to_string(stage[0]) + ", " + std::to_string(stage[i]) + ")");
            }
        }
    }
}

bool replica_valid(const ReplicaConfig &cfg, const ClusterSpec &cluster) {
    try {
        validate_replica(cfg, cluster);
        return true;
    } catch (const std::invalid_argument &) {
        return false;
    }
}

void validate_deployment(const Deployment &dep, const ClusterSpec &cluster) {
    std::set<DeviceId> used;
    for (std::size_t r = 0; r < dep.replicas.size(); ++r) {
        validate_replica(dep.replicas[r], cluster);
        for (DeviceId d : dep.replicas[r].device_ids) {
            if (!used.insert(d).second) {
                fail("deployment: device " + std::to_string(d) + " used by multiple replicas (replica " +
                     std::to_string(r) + ")");
            }
        }
    }
    if (static_cast<int>(used.size()) > cluster.device_count()) {
        fail("deployment: uses more devices than the cluster has");
    }
}

}  // namespace oserve
