#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "oserve/core.hpp"
#include "oserve/costmodel.hpp"
#include "oserve/deploysearch.hpp"
#include "oserve/sim.hpp"
#include "oserve/workload.hpp"

namespace oserve::orch {

struct OrchestrateOptions {
    std::uint64_t seed = 0;
    int span_seconds = kDefaultSpanSeconds;
    int k = 4;
    int forecast_window = workload::kForecastWindow;
    // Minimum relative objective gain before a deployment switch is worth
    // its downtime.
    double min_gain = 0.01;
    double reload_seconds = 50.0;
    int search_max_iters = 150;
    int search_stale_limit = 20;
    bool parallel = true;
};

std::string deployment_label(const Deployment &dep);

// Homogeneous candidates: R identical replicas for every divisor group
// size with a common feasible strategy.
std::vector<Deployment> homogeneous_candidates(const ClusterSpec &cluster, const ModelSpec &model);

// Rounded per-type forecasts for every span: the first span uses its own
// actual counts (cold start), later spans get the predictor applied to the
// actual history window.
std::vector<std::vector<std::int64_t>> forecast_series(const workload::SpanSeries &series,
                                                       const workload::Forecaster &predictor,
                                                       int window);

// Predict -> schedule (warm-started search) -> switch-plan loop producing
// the adaptive timeline. A new entry is appended when the deployment or
// the assignment changes; deployment switches carry the greedy plan and
// its estimated downtime.
sim::StrategyTimeline build_adaptive_timeline(const workload::SpanSeries &series,
                                              const workload::TypeModel &types,
                                              const ClusterSpec &cluster, const ModelSpec &model,
                                              const cost::ProfileParams &params,
                                              const OrchestrateOptions &opts);

// Same loop with the deployment pinned (per-span assignment still tracks
// the forecast).
sim::StrategyTimeline build_static_timeline(const Deployment &deployment,
                                            const workload::SpanSeries &series,
                                            const workload::TypeModel &types, const ClusterSpec &cluster,
                                            const ModelSpec &model, const cost::ProfileParams &params,
                                            const OrchestrateOptions &opts);

struct OrchestrateResult {
    workload::TypeModel types;
    sim::StrategyTimeline timeline;
    // Metric rows: "oserve", "oserve-reload", best static, plus one row per
    // static candidate (prefixed "static:").
    std::vector<std::pair<std::string, sim::MetricsReport>> rows;
    std::string best_static_label;
    sim::MetricsReport oserve;
    sim::MetricsReport reload;
    sim::MetricsReport best_static;            // lowest p99 among candidates
    double best_static_throughput = 0.0;       // highest throughput among candidates
    std::vector<sim::RequestOutcome> outcomes;  // oserve run
};

OrchestrateResult orchestrate(const std::vector<TraceRecord> &trace, const ClusterSpec &cluster,
                              const ModelSpec &model, const cost::ProfileParams &params,
                              const OrchestrateOptions &opts);

}  // namespace oserve::orch
