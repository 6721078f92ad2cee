#include "oserve/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <memory>
#include <queue>
#include <stdexcept>
#include <string>

#include "oserve/errors.hpp"

namespace oserve::sim {

namespace {

struct Request {
    std::int64_t arrival_us = 0;
    int type = 0;
    std::uint32_t input_len = 1;
    std::uint32_t output_len = 1;
    std::uint64_t kv_bytes = 0;
};

struct ReplicaRuntime {
    int id = 0;  // stable across entries
    ReplicaConfig cfg;
    int slots = 1;  // pipeline depth
    std::uint64_t kv_budget = 0;
    std::uint64_t kv_used = 0;
    int in_service = 0;
    std::int64_t available_from_us = 0;
    bool retired = false;
    std::deque<int> queue;  // request indices, FIFO
};

enum class EventKind { kCompletion = 0, kBoundary = 1, kWake = 2, kArrival = 3 };

struct Event {
    std::int64_t time_us = 0;
    int rank = 0;  // EventKind value: completions first at equal times
    std::int64_t seq = 0;
    int a = 0;  // request index or span/runtime payload
    int b = 0;  // runtime id for completions/wakes

    bool operator>(const Event &o) const {
        if (time_us != o.time_us) return time_us > o.time_us;
        if (rank != o.rank) return rank > o.rank;
        return seq > o.seq;
    }
};

// Per-entry capacity context used for dispatch accounting.
struct EntryContext {
    cost::CapacityTable table;
    std::vector<std::int64_t> M;
    std::vector<std::vector<std::int64_t>> unit;
    std::vector<ReplicaRuntime *> active;
    std::int64_t downtime_us = 0;
};

}  // namespace

std::vector<int> dispatch(const std::vector<int> &types_in_order, const flow::AssignmentMatrix &x,
                          const std::vector<std::vector<std::int64_t>> &unit,
                          const std::vector<std::int64_t> &M) {
    const int R = static_cast<int>(x.x.size());
    const int J = R > 0 ? static_cast<int>(x.x[0].size()) : 0;
    std::vector<std::vector<std::int64_t>> assigned(R, std::vector<std::int64_t>(J, 0));
    std::vector<double> util_units(R, 0.0);
    std::vector<int> rr(J, 0);
    std::vector<int> out;
    out.reserve(types_in_order.size());
    for (int j : types_in_order) {
        int chosen = -1;
        for (int step = 0; step < R; ++step) {
            int k = (rr[j] + step) % R;
            if (assigned[k][j] < x.x[k][j]) {
                chosen = k;
                rr[j] = (k + 1) % R;
                break;
            }
        }
        if (chosen < 0) {
            double best = std::numeric_limits<double>::max();
            for (int k = 0; k < R; ++k) {
                double u = M[k] > 0 ? util_units[k] / static_cast<double>(M[k]) : 0.0;
                if (u < best) {
                    best = u;
                    chosen = k;
                }
            }
        }
        assigned[chosen][j] += 1;
        util_units[chosen] += static_cast<double>(unit[chosen][j]);
        out.push_back(chosen);
    }
    return out;
}

MetricsReport metrics(const std::vector<RequestOutcome> &outcomes, double horizon_floor_s) {
    if (outcomes.empty()) throw NoCompletions("metrics: no completed requests");
    std::vector<std::int64_t> lat_us;
    lat_us.reserve(outcomes.size());
    std::int64_t last_finish = 0;
    double sum = 0.0;
    for (const auto &o : outcomes) {
        lat_us.push_back(o.finish_us - o.arrival_us);
        last_finish = std::max(last_finish, o.finish_us);
        sum += static_cast<double>(o.finish_us - o.arrival_us);
    }
    std::sort(lat_us.begin(), lat_us.end());
    const std::int64_t n = static_cast<std::int64_t>(lat_us.size());
    auto pct = [&](int p) {
        std::int64_t rank = std::min<std::int64_t>(n, p * n / 100 + 1);  // nearest rank, 1-indexed
        return static_cast<double>(lat_us[rank - 1]) / 1e6;
    };
    MetricsReport r;
    r.completed = n;
    r.avg = sum / static_cast<double>(n) / 1e6;
    r.p90 = pct(90);
    r.p95 = pct(95);
    r.p96 = pct(96);
    r.p97 = pct(97);
    r.p98 = pct(98);
    r.p99 = pct(99);
    r.horizon_s = std::max(horizon_floor_s, static_cast<double>(last_finish) / 1e6);
    r.throughput = r.horizon_s > 0.0 ? static_cast<double>(n) / r.horizon_s : 0.0;
    return r;
}

SimResult run(const std::vector<TraceRecord> &trace, const workload::TypeModel &type_model,
              const StrategyTimeline &timeline, const ModelSpec &model, const ClusterSpec &cluster,
              const cost::ProfileParams &params, const SimOptions &opts) {
    if (timeline.entries.empty()) throw TimelineGap("run: timeline has no entries");
    for (std::size_t i = 1; i < timeline.entries.size(); ++i) {
        if (timeline.entries[i].start_span <= timeline.entries[i - 1].start_span) {
            throw std::invalid_argument("run: timeline entries must have increasing start spans");
        }
    }
    const std::int64_t span_us = static_cast<std::int64_t>(timeline.span_seconds) * 1'000'000;

    // Requests in arrival order.
    std::vector<Request> requests;
    requests.reserve(trace.size());
    std::vector<TraceRecord> sorted = trace;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const TraceRecord &a, const TraceRecord &b) { return a.arrival_ms < b.arrival_ms; });
    for (const auto &rec : sorted) {
        Request q;
        q.arrival_us = static_cast<std::int64_t>(rec.arrival_ms) * 1000;
        q.type = workload::assign_type(type_model, rec);
        q.input_len = rec.input_len;
        q.output_len = rec.output_len;
        q.kv_bytes = static_cast<std::uint64_t>(rec.input_len + rec.output_len) * model.bytes_per_token_kv;
        requests.push_back(q);
    }

    std::int64_t first_span = timeline.entries.front().start_span;
    std::int64_t last_span = first_span;
    if (!requests.empty()) {
        std::int64_t first_arrival_span = requests.front().arrival_us / span_us;
        last_span = requests.back().arrival_us / span_us;
        if (first_arrival_span < timeline.entries.front().start_span) {
            throw TimelineGap("run: span " + std::to_string(first_arrival_span) +
                              " precedes the first timeline entry");
        }
    }

    // Build per-entry contexts.
    std::vector<EntryContext> entries(timeline.entries.size());
    for (std::size_t i = 0; i < timeline.entries.size(); ++i) {
        const auto &te = timeline.entries[i];
        validate_deployment(te.deployment, cluster);
        entries[i].table =
            cost::build_capacity_table(te.deployment, type_model.centroids, model, cluster, params,
                                       static_cast<double>(timeline.span_seconds));
        const int R = te.deployment.replica_count();
        entries[i].M.resize(R);
        entries[i].unit.resize(R);
        for (int k = 0; k < R; ++k) {
            flow::NormalizedRow row = flow::normalize_or_scale(entries[i].table.n[k]);
            entries[i].M[k] = row.M;
            entries[i].unit[k] = row.units;
        }
        double downtime_s = te.switch_seconds;
        if (opts.switch_seconds_override >= 0.0 && i > 0) downtime_s = opts.switch_seconds_override;
        if (i == 0) downtime_s = 0.0;
        entries[i].downtime_us = static_cast<std::int64_t>(std::llround(downtime_s * 1e6));
        if (static_cast<int>(te.assignment.x.size()) != R) {
            throw std::invalid_argument("run: entry " + std::to_string(i) +
                                        " assignment rows do not match replica count");
        }
    }

    std::vector<std::unique_ptr<ReplicaRuntime>> runtimes;
    auto make_runtime = [&](const ReplicaConfig &cfg, std::int64_t available_from) {
        auto rt = std::make_unique<ReplicaRuntime>();
        rt->id = static_cast<int>(runtimes.size());
        rt->cfg = cfg;
        rt->slots = cfg.pp;
        rt->kv_budget = cost::replica_kv_budget(cfg, model, cluster);
        rt->available_from_us = available_from;
        runtimes.push_back(std::move(rt));
        return runtimes.back().get();
    };

    std::priority_queue<Event, std::vector<Event>, std::greater<Event>> events;
    std::int64_t seq = 0;
    auto push = [&](std::int64_t t, EventKind kind, int a, int b) {
        events.push({t, static_cast<int>(kind), seq++, a, b});
    };

    // Bookkeeping for the conservation invariant.
    std::int64_t arrived = 0, completed = 0, queued = 0, in_service = 0;

    std::vector<RequestOutcome> outcomes;
    outcomes.reserve(requests.size());

    const cost::ProfileParams &pp = params;
    auto service_us = [&](const ReplicaConfig &cfg, const Request &q) {
        double s = cost::prefill_latency(cfg, model, q.input_len, pp) +
                   cost::decode_latency(cfg, model, q.output_len, pp);
        return std::max<std::int64_t>(1, std::llround(s * 1e6));
    };

    auto try_start = [&](ReplicaRuntime *rt, std::int64_t now) {
        while (!rt->queue.empty() && rt->in_service < rt->slots && !rt->retired) {
            if (now < rt->available_from_us) break;
            int ri = rt->queue.front();
            const Request &q = requests[ri];
            if (rt->kv_used + q.kv_bytes > rt->kv_budget && rt->in_service > 0) break;
            rt->queue.pop_front();
            --queued;
            ++in_service;
            rt->in_service += 1;
            rt->kv_used += q.kv_bytes;
            std::int64_t start = std::max(now, q.arrival_us);
            std::int64_t finish = start + service_us(rt->cfg, q);
            RequestOutcome o;
            o.request_id = ri;
            o.type = q.type;
            o.replica = rt->id;
            o.arrival_us = q.arrival_us;
            o.start_us = start;
            o.finish_us = finish;
            outcomes.push_back(o);
            push(finish, EventKind::kCompletion, ri, rt->id);
        }
    };

    // Current entry state.
    std::size_t cur_entry = 0;
    std::vector<std::vector<std::int64_t>> assigned;
    std::vector<double> util_units;
    std::vector<int> rr;

    auto reset_span_counters = [&]() {
        const int R = static_cast<int>(entries[cur_entry].active.size());
        const int J = type_model.k;
        assigned.assign(R, std::vector<std::int64_t>(J, 0));
        util_units.assign(R, 0.0);
        rr.assign(J, 0);
    };

    auto spill_choice = [&]() {
        const auto &ctx = entries[cur_entry];
        int best = 0;
        double best_util = std::numeric_limits<double>::max();
        for (std::size_t k = 0; k < ctx.active.size(); ++k) {
            double u = ctx.M[k] > 0 ? util_units[k] / static_cast<double>(ctx.M[k]) : 0.0;
            if (u < best_util) {
                best_util = u;
                best = static_cast<int>(k);
            }
        }
        return best;
    };

    auto route = [&](int ri, std::int64_t now, bool spill_only) {
        const auto &ctx = entries[cur_entry];
        const auto &x = timeline.entries[cur_entry].assignment.x;
        const int R = static_cast<int>(ctx.active.size());
        const Request &q = requests[ri];
        int chosen = -1;
        if (!spill_only) {
            for (int step = 0; step < R; ++step) {
                int k = (rr[q.type] + step) % R;
                if (assigned[k][q.type] < x[k][q.type]) {
                    chosen = k;
                    rr[q.type] = (k + 1) % R;
                    break;
                }
            }
        }
        if (chosen < 0) chosen = spill_choice();
        assigned[chosen][q.type] += 1;
        util_units[chosen] += static_cast<double>(ctx.unit[chosen][q.type]);
        ReplicaRuntime *rt = ctx.active[chosen];
        rt->queue.push_back(ri);
        ++queued;
        try_start(rt, now);
    };

    // Activate the first entry.
    {
        auto &ctx = entries[0];
        for (const auto &cfg : timeline.entries[0].deployment.replicas) {
            ctx.active.push_back(make_runtime(cfg, 0));
        }
        reset_span_counters();
    }

    auto switch_entry = [&](std::size_t next, std::int64_t now) {
        auto &prev_ctx = entries[cur_entry];
        auto &next_ctx = entries[next];
        const auto &next_dep = timeline.entries[next].deployment;

        std::vector<bool> carried(prev_ctx.active.size(), false);
        for (const auto &cfg : next_dep.replicas) {
            ReplicaRuntime *rt = nullptr;
            for (std::size_t k = 0; k < prev_ctx.active.size(); ++k) {
                if (carried[k]) continue;
                const auto &old = prev_ctx.active[k]->cfg;
                if (old.device_ids == cfg.device_ids && old.tp == cfg.tp && old.pp == cfg.pp) {
                    rt = prev_ctx.active[k];
                    carried[k] = true;
                    break;
                }
            }
            if (rt == nullptr) {
                rt = make_runtime(cfg, now + next_ctx.downtime_us);
                push(rt->available_from_us, EventKind::kWake, 0, rt->id);
            }
            next_ctx.active.push_back(rt);
        }
        // Retire replaced replicas; their queued work is re-routed below.
        std::vector<int> orphans;
        for (std::size_t k = 0; k < prev_ctx.active.size(); ++k) {
            if (carried[k]) continue;
            ReplicaRuntime *rt = prev_ctx.active[k];
            rt->retired = true;
            while (!rt->queue.empty()) {
                orphans.push_back(rt->queue.front());
                rt->queue.pop_front();
                --queued;
            }
        }
        cur_entry = next;
        reset_span_counters();
        for (int ri : orphans) route(ri, now, /*spill_only=*/true);
    };

    // Seed events: span boundaries and arrivals.
    std::int64_t horizon_span = std::max(last_span, timeline.entries.back().start_span);
    for (std::int64_t s = first_span + 1; s <= horizon_span; ++s) {
        push(s * span_us, EventKind::kBoundary, static_cast<int>(s - first_span), 0);
    }
    for (std::size_t i = 0; i < requests.size(); ++i) {
        push(requests[i].arrival_us, EventKind::kArrival, static_cast<int>(i), 0);
    }

    std::map<std::int64_t, std::size_t> entry_by_span;
    for (std::size_t i = 0; i < timeline.entries.size(); ++i) {
        entry_by_span[timeline.entries[i].start_span] = i;
    }

    while (!events.empty()) {
        Event ev = events.top();
        events.pop();
        switch (static_cast<EventKind>(ev.rank)) {
            case EventKind::kCompletion: {
                ReplicaRuntime *rt = runtimes[ev.b].get();
                const Request &q = requests[ev.a];
                rt->in_service -= 1;
                rt->kv_used -= q.kv_bytes;
                --in_service;
                ++completed;
                try_start(rt, ev.time_us);
                break;
            }
            case EventKind::kBoundary: {
                std::int64_t s = first_span + ev.a;
                auto it = entry_by_span.find(s);
                if (it != entry_by_span.end() && it->second != cur_entry) {
                    switch_entry(it->second, ev.time_us);
                } else {
                    reset_span_counters();
                }
                break;
            }
            case EventKind::kWake: {
                try_start(runtimes[ev.b].get(), ev.time_us);
                break;
            }
            case EventKind::kArrival: {
                ++arrived;
                route(ev.a, ev.time_us, false);
                break;
            }
        }
        if (arrived != completed + in_service + queued) {
            throw std::logic_error("simulation conservation violated at t=" + std::to_string(ev.time_us));
        }
    }

    SimResult result;
    if (!outcomes.empty()) {
        double floor_s = static_cast<double>((last_span + 1) * span_us) / 1e6;
        std::sort(outcomes.begin(), outcomes.end(),
                  [](const RequestOutcome &a, const RequestOutcome &b) {
                      return a.request_id < b.request_id;
                  });
        result.report = metrics(outcomes, floor_s);
        // Per-arrival-span latency rollup.
        std::map<std::int64_t, std::pair<std::int64_t, double>> rollup;
        for (const auto &o : outcomes) {
            auto &cell = rollup[o.arrival_us / span_us];
            cell.first += 1;
            cell.second += o.latency_s();
        }
        for (const auto &[span_idx, cell] : rollup) {
            result.report.per_span.push_back({span_idx, cell.first, cell.second / cell.first});
        }
    }
    if (opts.collect_outcomes) result.outcomes = std::move(outcomes);
    return result;
}

}  // namespace oserve::sim
