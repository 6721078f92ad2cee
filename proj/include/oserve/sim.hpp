#pragma once

#include <cstdint>
#include <vector>

#include "oserve/core.hpp"
#include "oserve/costmodel.hpp"
#include "oserve/flowassign.hpp"
#include "oserve/switchplan.hpp"
#include "oserve/workload.hpp"

namespace oserve::sim {

struct TimelineEntry {
    std::int64_t start_span = 0;
    Deployment deployment;
    flow::AssignmentMatrix assignment;
    switchplan::SwitchPlan plan;   // from the previous entry; empty for the first
    double switch_seconds = 0.0;   // downtime charged to changed replicas
};

struct StrategyTimeline {
    int span_seconds = kDefaultSpanSeconds;
    std::vector<TimelineEntry> entries;  // strictly increasing start_span
};

struct RequestOutcome {
    std::int64_t request_id = 0;
    int type = 0;
    int replica = 0;
    std::int64_t arrival_us = 0;
    std::int64_t start_us = 0;
    std::int64_t finish_us = 0;

    double latency_s() const { return static_cast<double>(finish_us - arrival_us) / 1e6; }
};

struct SpanMetrics {
    std::int64_t span_index = 0;
    std::int64_t arrived = 0;
    double avg_latency_s = 0.0;
};

struct MetricsReport {
    std::int64_t completed = 0;
    double avg = 0.0;
    double p90 = 0.0;
    double p95 = 0.0;
    double p96 = 0.0;
    double p97 = 0.0;
    double p98 = 0.0;
    double p99 = 0.0;
    double throughput = 0.0;  // completed / horizon
    double horizon_s = 0.0;
    std::vector<SpanMetrics> per_span;
};

// Nearest-rank percentiles over completed-request latencies. Throws
// NoCompletions on an empty set. The horizon (for throughput) is the later
// of the last completion and the given floor.
MetricsReport metrics(const std::vector<RequestOutcome> &outcomes, double horizon_floor_s = 0.0);

// Route one span's arrivals (types in arrival order) against an
// assignment: replica k receives x[k][j] type-j requests round-robin;
// arrivals beyond the quota spill to the replica with the least
// normalized utilization. Returns the replica index per request.
std::vector<int> dispatch(const std::vector<int> &types_in_order, const flow::AssignmentMatrix &x,
                          const std::vector<std::vector<std::int64_t>> &unit,
                          const std::vector<std::int64_t> &M);

struct SimOptions {
    // When >= 0, replaces every non-first entry's switch downtime (the
    // model-reload baseline).
    double switch_seconds_override = -1.0;
    bool collect_outcomes = true;
};

struct SimResult {
    MetricsReport report;
    std::vector<RequestOutcome> outcomes;
};

// Deterministic discrete-event replay of a trace against a strategy
// timeline. Each replica runs pp concurrent service slots (its pipeline
// depth), admission is KV-budget limited, queues are FIFO, and replicas
// whose device set or strategy changes at a timeline boundary are down for
// the switch time while their queued work is re-dispatched.
SimResult run(const std::vector<TraceRecord> &trace, const workload::TypeModel &type_model,
              const StrategyTimeline &timeline, const ModelSpec &model, const ClusterSpec &cluster,
              const cost::ProfileParams &params, const SimOptions &opts = {});

}  // namespace oserve::sim
