#include "oserve/switchplan.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>

#include "oserve/errors.hpp"

namespace oserve::switchplan {

namespace {

// Coalesce a device's ranges into sorted disjoint form.
std::vector<ByteRange> coalesce(std::vector<ByteRange> ranges) {
    std::sort(ranges.begin(), ranges.end());
    std::vector<ByteRange> out;
    for (const auto &r : ranges) {
        if (r.begin == r.end) continue;
        if (!out.empty() && r.begin <= out.back().end) {
            out.back().end = std::max(out.back().end, r.end);
        } else {
            out.push_back(r);
        }
    }
    return out;
}

bool covers(const std::vector<ByteRange> &ranges, const ByteRange &frag) {
    for (const auto &r : ranges) {
        if (r.begin <= frag.begin && frag.end <= r.end) return true;
    }
    return false;
}

}  // namespace

ShardLayout layout(const Deployment &dep, const ModelSpec &model) {
    ShardLayout out;
    const std::uint64_t P = model.param_bytes;
    int shard_id = 0;
    for (const auto &replica : dep.replicas) {
        std::vector<DeviceId> devices = replica.device_ids;
        std::sort(devices.begin(), devices.end());
        const std::uint64_t pp = static_cast<std::uint64_t>(replica.pp);
        const std::uint64_t tp = static_cast<std::uint64_t>(replica.tp);
        for (std::uint64_t s = 0; s < pp; ++s) {
            std::uint64_t stage_begin = P * s / pp;
            std::uint64_t stage_end = P * (s + 1) / pp;
            std::uint64_t stage_len = stage_end - stage_begin;
            for (std::uint64_t i = 0; i < tp; ++i) {
                ByteRange slice{stage_begin + stage_len * i / tp, stage_begin + stage_len * (i + 1) / tp};
                DeviceId holder = devices[s * tp + i];
                out.shards.push_back({shard_id++, slice, holder});
                out.held[holder].push_back(slice);
            }
        }
    }
    for (auto &[dev, ranges] : out.held) ranges = coalesce(std::move(ranges));
    return out;
}

SwitchPlan greedy_plan(const ShardLayout &src, const ShardLayout &dst, const ClusterSpec &cluster) {
    SwitchPlan plan;

    // Fragment boundaries: every begin/end from either layout. Within one
    // fragment the holder and needer sets are constant.
    std::set<std::uint64_t> cuts;
    for (const auto &[dev, ranges] : src.held) {
        for (const auto &r : ranges) {
            cuts.insert(r.begin);
            cuts.insert(r.end);
        }
    }
    for (const auto &[dev, ranges] : dst.held) {
        for (const auto &r : ranges) {
            cuts.insert(r.begin);
            cuts.insert(r.end);
        }
    }
    if (cuts.size() < 2) return plan;

    std::vector<std::uint64_t> bounds(cuts.begin(), cuts.end());
    for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
        ByteRange frag{bounds[i], bounds[i + 1]};
        if (frag.len() == 0) continue;

        std::vector<DeviceId> holders;
        for (const auto &[dev, ranges] : src.held) {
            if (covers(ranges, frag)) holders.push_back(dev);
        }
        for (const auto &[dev, ranges] : dst.held) {
            if (!covers(ranges, frag)) continue;
            // No transfer when the target already holds these bytes.
            auto held_it = src.held.find(dev);
            if (held_it != src.held.end() && covers(held_it->second, frag)) continue;
            if (holders.empty()) {
                throw UnsourcedFragment("bytes [" + std::to_string(frag.begin) + ", " +
                                        std::to_string(frag.end) + ") required by device " +
                                        std::to_string(dev) + " have no source holder");
            }
            DeviceId best = -1;
            std::uint64_t best_load = 0;
            bool best_intra = false;
            for (DeviceId s : holders) {
                bool intra = cluster.same_machine(s, dev);
                auto it = plan.link_load.find({s, dev});
                std::uint64_t load = it == plan.link_load.end() ? 0 : it->second;
                bool better;
                if (best < 0) {
                    better = true;
                } else if (intra != best_intra) {
                    better = intra;
                } else {
                    better = load < best_load || (load == best_load && s < best);
                }
                if (better) {
                    best = s;
                    best_load = load;
                    best_intra = intra;
                }
            }
            plan.link_load[{best, dev}] += frag.len();
            plan.transfers.push_back({frag, best, dev});
        }
    }
    plan.est_seconds = estimate_time(plan, cluster);
    return plan;
}

double estimate_time(const SwitchPlan &plan, const ClusterSpec &cluster) {
    double worst = 0.0;
    for (const auto &[link, bytes] : plan.link_load) {
        double bw = cluster.same_machine(link.first, link.second) ? cluster.intra_bw : cluster.inter_bw;
        worst = std::max(worst, static_cast<double>(bytes) / bw);
    }
    return worst;
}

KvPlan kv_plan(const std::vector<InflightRequest> &inflight, std::int64_t threshold_tokens,
               const Deployment &src, const Deployment &dst, const ClusterSpec &cluster,
               double headroom, const SwitchPlan *carry) {
    if (headroom < 0.0 || headroom > 0.5) {
        throw std::invalid_argument("kv_plan: headroom must be in [0, 0.5]");
    }
    KvPlan out;
    LinkLoad load = carry != nullptr ? carry->link_load : LinkLoad{};
    std::map<DeviceId, std::uint64_t> inbound;

    std::uint64_t migrated_bytes = 0;
    std::size_t rr = 0;
    for (const auto &req : inflight) {
        if (req.generated_tokens <= threshold_tokens) {
            out.drained.push_back(req.request_id);
            continue;
        }
        if (req.source_replica < 0 || req.source_replica >= src.replica_count()) {
            throw std::invalid_argument("kv_plan: request " + std::to_string(req.request_id) +
                                        " names unknown source replica");
        }
        if (dst.replicas.empty()) {
            out.drained.push_back(req.request_id);
            continue;
        }
        const auto &target_replica = dst.replicas[rr % dst.replicas.size()];
        ++rr;
        // Least inbound-loaded device of the target replica, lowest id on ties.
        DeviceId target = -1;
        for (DeviceId d : target_replica.device_ids) {
            if (target < 0 || inbound[d] < inbound[target] ||
                (inbound[d] == inbound[target] && d < target)) {
                target = d;
            }
        }
        const auto &sources = src.replicas[req.source_replica].device_ids;
        DeviceId best = -1;
        std::uint64_t best_load = 0;
        bool best_intra = false;
        for (DeviceId s : sources) {
            bool intra = cluster.same_machine(s, target);
            auto it = load.find({s, target});
            std::uint64_t l = it == load.end() ? 0 : it->second;
            bool better;
            if (best < 0) {
                better = true;
            } else if (intra != best_intra) {
                better = intra;
            } else {
                better = l < best_load || (l == best_load && s < best);
            }
            if (better) {
                best = s;
                best_load = l;
                best_intra = intra;
            }
        }
        load[{best, target}] += req.kv_bytes;
        inbound[target] += req.kv_bytes;
        migrated_bytes += req.kv_bytes;
        out.migrated.push_back({req.request_id, req.kv_bytes, best, target});
    }
    out.buffer_bytes =
        static_cast<std::uint64_t>(std::ceil(static_cast<double>(migrated_bytes) * (1.0 + headroom)));
    return out;
}

}  // namespace oserve::switchplan
