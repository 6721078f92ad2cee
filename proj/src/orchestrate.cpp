#include "oserve/orchestrate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "oserve/errors.hpp"
#include "oserve/flowassign.hpp"
#include "oserve/switchplan.hpp"

namespace oserve::orch {

namespace {

std::vector<std::int64_t> round_counts(const std::vector<double> &v) {
    std::vector<std::int64_t> out;
    out.reserve(v.size());
    for (double x : v) out.push_back(std::max<std::int64_t>(0, std::llround(x)));
    return out;
}

flow::AssignmentMatrix assignment_for(const Deployment &dep, const std::vector<std::int64_t> &lambda,
                                      const workload::TypeModel &types, const ClusterSpec &cluster,
                                      const ModelSpec &model, const cost::ProfileParams &params,
                                      int span_seconds) {
    cost::CapacityTable table = cost::build_capacity_table(dep, types.centroids, model, cluster, params,
                                                           static_cast<double>(span_seconds));
    return flow::solve_assignment(table, lambda).assignment;
}

}  // namespace

std::string deployment_label(const Deployment &dep) {
    // Group identical (d, tp, pp) shapes: "2x(tp4,pp1)+4x(tp1,pp1)".
    std::map<std::tuple<int, int, int>, int> groups;
    for (const auto &r : dep.replicas) groups[{r.device_count(), r.tp, r.pp}] += 1;
    std::ostringstream os;
    bool first = true;
    for (const auto &[shape, count] : groups) {
        if (!first) os << "+";
        first = false;
        os << count << "x(d" << std::get<0>(shape) << ",tp" << std::get<1>(shape) << ",pp"
           << std::get<2>(shape) << ")";
    }
    return os.str();
}

std::vector<Deployment> homogeneous_candidates(const ClusterSpec &cluster, const ModelSpec &model) {
    const int D = cluster.device_count();
    std::vector<Deployment> out;
    for (int g = 1; g <= D; ++g) {
        if (D % g != 0) continue;
        std::vector<int> sizes(D / g, g);
        auto blocks = search::canonical_blocks(cluster, sizes);
        // Strategies valid for every block of the partition.
        std::vector<std::pair<int, int>> common = search::strategy_candidates(blocks[0], cluster, model);
        for (std::size_t b = 1; b < blocks.size() && !common.empty(); ++b) {
            auto cand = search::strategy_candidates(blocks[b], cluster, model);
            std::vector<std::pair<int, int>> keep;
            for (const auto &s : common) {
                if (std::find(cand.begin(), cand.end(), s) != cand.end()) keep.push_back(s);
            }
            common = keep;
        }
        for (const auto &[tp, pp] : common) {
            Deployment dep;
            for (const auto &block : blocks) dep.replicas.push_back({block, tp, pp});
            out.push_back(std::move(dep));
        }
    }
    return out;
}

std::vector<std::vector<std::int64_t>> forecast_series(const workload::SpanSeries &series,
                                                       const workload::Forecaster &predictor,
                                                       int window) {
    std::vector<std::vector<std::int64_t>> out;
    out.reserve(series.spans.size());
    for (std::size_t s = 0; s < series.spans.size(); ++s) {
        if (s == 0) {
            out.push_back(series.spans[0].counts);
            continue;
        }
        workload::SpanSeries history;
        history.span_seconds = series.span_seconds;
        history.spans.assign(series.spans.begin(), series.spans.begin() + s);
        workload::Forecast f = workload::forecast_next(history, predictor, window);
        out.push_back(round_counts(f.predicted));
    }
    return out;
}

sim::StrategyTimeline build_adaptive_timeline(const workload::SpanSeries &series,
                                              const workload::TypeModel &types,
                                              const ClusterSpec &cluster, const ModelSpec &model,
                                              const cost::ProfileParams &params,
                                              const OrchestrateOptions &opts) {
    sim::StrategyTimeline timeline;
    timeline.span_seconds = opts.span_seconds;
    if (series.spans.empty()) return timeline;

    workload::HoltForecaster predictor;
    auto forecasts = forecast_series(series, predictor, opts.forecast_window);

    Deployment current;
    std::vector<std::int64_t> prev_lambda;
    flow::AssignmentMatrix prev_x;

    for (std::size_t s = 0; s < series.spans.size(); ++s) {
        const auto &lambda = forecasts[s];
        const std::int64_t span_index = series.spans[s].span_index;
        if (!timeline.entries.empty() && lambda == prev_lambda) continue;  // workload unchanged

        TraceSpan span{span_index, lambda};
        search::SearchOptions sopts;
        sopts.seed = opts.seed;
        sopts.max_iters = opts.search_max_iters;
        sopts.stale_limit = opts.search_stale_limit;
        sopts.parallel = opts.parallel;
        if (!current.replicas.empty()) sopts.warm_start = &current;
        search::SearchState found = search::search(cluster, model, types.centroids, span,
                                                   static_cast<double>(opts.span_seconds), params, sopts);

        Deployment chosen = found.deployment;
        if (!current.replicas.empty()) {
            search::ObjectiveCache cache;
            search::EvalContext ctx{cluster, model,  types.centroids, span,
                                    static_cast<double>(opts.span_seconds), params,
                                    &cache,  opts.parallel};
            std::int64_t keep_obj = search::evaluate_deployment(current, ctx);
            double threshold = static_cast<double>(keep_obj) * (1.0 + opts.min_gain);
            if (static_cast<double>(found.throughput) <= threshold) chosen = current;
        }

        flow::AssignmentMatrix x =
            assignment_for(chosen, lambda, types, cluster, model, params, opts.span_seconds);

        if (timeline.entries.empty()) {
            timeline.entries.push_back({span_index, chosen, x, {}, 0.0});
        } else if (!(chosen == current)) {
            switchplan::ShardLayout from = switchplan::layout(current, model);
            switchplan::ShardLayout to = switchplan::layout(chosen, model);
            switchplan::SwitchPlan plan = switchplan::greedy_plan(from, to, cluster);
            timeline.entries.push_back({span_index, chosen, x, plan, plan.est_seconds});
        } else if (!(x == prev_x)) {
            timeline.entries.push_back({span_index, chosen, x, {}, 0.0});
        }
        current = chosen;
        prev_lambda = lambda;
        prev_x = x;
    }
    return timeline;
}

sim::StrategyTimeline build_static_timeline(const Deployment &deployment,
                                            const workload::SpanSeries &series,
                                            const workload::TypeModel &types, const ClusterSpec &cluster,
                                            const ModelSpec &model, const cost::ProfileParams &params,
                                            const OrchestrateOptions &opts) {
    sim::StrategyTimeline timeline;
    timeline.span_seconds = opts.span_seconds;
    if (series.spans.empty()) return timeline;

    workload::HoltForecaster predictor;
    auto forecasts = forecast_series(series, predictor, opts.forecast_window);

    std::vector<std::int64_t> prev_lambda;
    flow::AssignmentMatrix prev_x;
    for (std::size_t s = 0; s < series.spans.size(); ++s) {
        const auto &lambda = forecasts[s];
        const std::int64_t span_index = series.spans[s].span_index;
        if (!timeline.entries.empty() && lambda == prev_lambda) continue;
        flow::AssignmentMatrix x =
            assignment_for(deployment, lambda, types, cluster, model, params, opts.span_seconds);
        if (timeline.entries.empty() || !(x == prev_x)) {
            timeline.entries.push_back({span_index, deployment, x, {}, 0.0});
        }
        prev_lambda = lambda;
        prev_x = x;
    }
    return timeline;
}

OrchestrateResult orchestrate(const std::vector<TraceRecord> &trace, const ClusterSpec &cluster,
                              const ModelSpec &model, const cost::ProfileParams &params,
                              const OrchestrateOptions &opts) {
    OrchestrateResult result;
    result.types = workload::fit_types(trace, opts.k, opts.seed);
    workload::SpanSeries series = workload::bucketize(trace, result.types, opts.span_seconds);

    result.timeline =
        build_adaptive_timeline(series, result.types, cluster, model, params, opts);

    sim::SimOptions run_opts;
    sim::SimResult oserve_run =
        sim::run(trace, result.types, result.timeline, model, cluster, params, run_opts);
    result.oserve = oserve_run.report;
    result.outcomes = std::move(oserve_run.outcomes);
    result.rows.emplace_back("oserve", result.oserve);

    sim::SimOptions reload_opts;
    reload_opts.switch_seconds_override = opts.reload_seconds;
    reload_opts.collect_outcomes = false;
    result.reload =
        sim::run(trace, result.types, result.timeline, model, cluster, params, reload_opts).report;
    result.rows.emplace_back("oserve-reload", result.reload);

    bool have_static = false;
    for (const auto &candidate : homogeneous_candidates(cluster, model)) {
        sim::StrategyTimeline tl =
            build_static_timeline(candidate, series, result.types, cluster, model, params, opts);
        sim::SimOptions static_opts;
        static_opts.collect_outcomes = false;
        sim::MetricsReport report =
            sim::run(trace, result.types, tl, model, cluster, params, static_opts).report;
        std::string label = "static:" + deployment_label(candidate);
        result.rows.emplace_back(label, report);
        result.best_static_throughput = std::max(result.best_static_throughput, report.throughput);
        if (!have_static || report.p99 < result.best_static.p99) {
            have_static = true;
            result.best_static = report;
            result.best_static_label = label;
        }
    }
    return result;
}

}  // namespace oserve::orch
