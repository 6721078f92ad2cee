#pragma once

#include <string>
#include <utility>
#include <vector>

#include "oserve/core.hpp"
#include "oserve/costmodel.hpp"
#include "oserve/flowassign.hpp"
#include "oserve/sim.hpp"
#include "oserve/workload.hpp"

namespace oserve::io {

constexpr int kSchemaVersion = 1;

ClusterSpec load_cluster(const std::string &path);
void save_cluster(const std::string &path, const ClusterSpec &cluster);

ModelSpec load_model(const std::string &path);
void save_model(const std::string &path, const ModelSpec &model);

cost::ProfileParams load_profile(const std::string &path);
void save_profile(const std::string &path, const cost::ProfileParams &params);

workload::TypeModel load_types(const std::string &path);
void save_types(const std::string &path, const workload::TypeModel &model);

// Deployment files are a bare JSON array of {devices, tp, pp}.
Deployment load_deployment(const std::string &path);
void save_deployment(const std::string &path, const Deployment &dep);

std::vector<TraceRecord> load_trace_jsonl(const std::string &path);
void save_trace_jsonl(const std::string &path, const std::vector<TraceRecord> &records);

sim::StrategyTimeline load_timeline(const std::string &path);
void save_timeline(const std::string &path, const sim::StrategyTimeline &timeline);

// CSV emitters (fixed six-decimal formatting for reproducible bytes).
void write_metrics_csv(const std::string &path,
                       const std::vector<std::pair<std::string, sim::MetricsReport>> &rows);
void write_outcomes_csv(const std::string &path, const std::vector<sim::RequestOutcome> &outcomes);
void write_assignment_csv(const std::string &path, const flow::AssignmentMatrix &assignment);
void write_switch_plan_csv(const std::string &path, const switchplan::SwitchPlan &plan);
void write_predictions_csv(const std::string &path,
                           const std::vector<std::tuple<std::int64_t, int, double, double>> &rows);

void write_text(const std::string &path, const std::string &content);

}  // namespace oserve::io
