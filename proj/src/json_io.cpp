#include "oserve/json_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "oserve/errors.hpp"

namespace oserve::io {

namespace {

using json = nlohmann::ordered_json;

json read_json(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open");
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception &e) {
        throw ParseError(path + ": " + e.what());
    }
}

void write_json(const std::string &path, const json &j) {
    std::ofstream out(path);
    if (!out) throw ParseError(path + ": cannot open for writing");
    out << j.dump(2) << "\n";
}

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

ClusterSpec load_cluster(const std::string &path) {
    json j = read_json(path);
    ClusterSpec c;
    try {
        c.intra_bw = j.at("intra_bw_bytes_per_s").get<double>();
        c.inter_bw = j.at("inter_bw_bytes_per_s").get<double>();
        for (const auto &jm : j.at("machines")) {
            MachineSpec m;
            m.machine_id = jm.at("machine_id").get<std::string>();
            m.device_ids = jm.at("device_ids").get<std::vector<DeviceId>>();
            m.device_mem = jm.at("device_mem_bytes").get<std::uint64_t>();
            c.machines.push_back(std::move(m));
        }
    } catch (const json::exception &e) {
        throw ParseError(path + ": " + e.what());
    }
    validate(c);
    return c;
}

void save_cluster(const std::string &path, const ClusterSpec &cluster) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["intra_bw_bytes_per_s"] = cluster.intra_bw;
    j["inter_bw_bytes_per_s"] = cluster.inter_bw;
    j["machines"] = json::array();
    for (const auto &m : cluster.machines) {
        j["machines"].push_back({{"machine_id", m.machine_id},
                                 {"device_ids", m.device_ids},
                                 {"device_mem_bytes", m.device_mem}});
    }
    write_json(path, j);
}

ModelSpec load_model(const std::string &path) {
    json j = read_json(path);
    ModelSpec m;
    try {
        m.name = j.at("name").get<std::string>();
        m.param_bytes = j.at("param_bytes").get<std::uint64_t>();
        m.num_layers = j.at("num_layers").get<std::uint32_t>();
        m.bytes_per_token_kv = j.at("bytes_per_token_kv").get<std::uint64_t>();
        m.flops_per_token_prefill = j.at("flops_per_token_prefill").get<std::uint64_t>();
        m.min_mem_bytes = j.at("min_mem_bytes").get<std::uint64_t>();
    } catch (const json::exception &e) {
        throw ParseError(path + ": " + e.what());
    }
    validate(m);
    return m;
}

void save_model(const std::string &path, const ModelSpec &model) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["name"] = model.name;
    j["param_bytes"] = model.param_bytes;
    j["num_layers"] = model.num_layers;
    j["bytes_per_token_kv"] = model.bytes_per_token_kv;
    j["flops_per_token_prefill"] = model.flops_per_token_prefill;
    j["min_mem_bytes"] = model.min_mem_bytes;
    write_json(path, j);
}

cost::ProfileParams load_profile(const std::string &path) {
    json j = read_json(path);
    cost::ProfileParams p;
    try {
        p.prefill_coeff = j.at("prefill_coeff").get<double>();
        p.decode_coeff = j.at("decode_coeff").get<double>();
        p.tp_efficiency = j.at("tp_efficiency").get<double>();
        p.pp_comm_cost = j.at("pp_comm_cost").get<double>();
        p.mem_bw_penalty = j.at("mem_bw_penalty").get<double>();
    } catch (const json::exception &e) {
        throw ParseError(path + ": " + e.what());
    }
    cost::validate(p);
    return p;
}

void save_profile(const std::string &path, const cost::ProfileParams &params) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["prefill_coeff"] = params.prefill_coeff;
    j["decode_coeff"] = params.decode_coeff;
    j["tp_efficiency"] = params.tp_efficiency;
    j["pp_comm_cost"] = params.pp_comm_cost;
    j["mem_bw_penalty"] = params.mem_bw_penalty;
    write_json(path, j);
}

workload::TypeModel load_types(const std::string &path) {
    json j = read_json(path);
    workload::TypeModel m;
    try {
        m.k = j.at("k").get<int>();
        const auto &s = j.at("scale");
        m.scale.in_min = s.at("in_min").get<double>();
        m.scale.in_max = s.at("in_max").get<double>();
        m.scale.out_min = s.at("out_min").get<double>();
        m.scale.out_max = s.at("out_max").get<double>();
        for (const auto &jc : j.at("centroids")) {
            WorkloadType t;
            t.type_id = jc.at("type_id").get<int>();
            t.centroid_in = jc.at("input_len").get<double>();
            t.centroid_out = jc.at("output_len").get<double>();
            m.centroids.push_back(t);
        }
    } catch (const json::exception &e) {
        throw ParseError(path + ": " + e.what());
    }
    if (static_cast<int>(m.centroids.size()) != m.k) {
        throw ParseError(path + ": centroid count does not match k");
    }
    return m;
}

void save_types(const std::string &path, const workload::TypeModel &model) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["k"] = model.k;
    j["scale"] = {{"in_min", model.scale.in_min},
                  {"in_max", model.scale.in_max},
                  {"out_min", model.scale.out_min},
                  {"out_max", model.scale.out_max}};
    j["centroids"] = json::array();
    for (const auto &c : model.centroids) {
        j["centroids"].push_back(
            {{"type_id", c.type_id}, {"input_len", c.centroid_in}, {"output_len", c.centroid_out}});
    }
    write_json(path, j);
}

Deployment load_deployment(const std::string &path) {
    json j = read_json(path);
    if (!j.is_array()) throw ParseError(path + ": deployment file must be a JSON array");
    Deployment dep;
    try {
        for (const auto &jr : j) {
            ReplicaConfig r;
            r.device_ids = jr.at("devices").get<std::vector<DeviceId>>();
            r.tp = jr.at("tp").get<int>();
            r.pp = jr.at("pp").get<int>();
            dep.replicas.push_back(std::move(r));
        }
    } catch (const json::exception &e) {
        throw ParseError(path + ": " + e.what());
    }
    return dep;
}

void save_deployment(const std::string &path, const Deployment &dep) {
    json j = json::array();
    for (const auto &r : dep.replicas) {
        j.push_back({{"devices", r.device_ids}, {"tp", r.tp}, {"pp", r.pp}});
    }
    write_json(path, j);
}

std::vector<TraceRecord> load_trace_jsonl(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open");
    std::vector<TraceRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            json j = json::parse(line);
            TraceRecord r;
            r.arrival_ms = j.at("arrival_ms").get<std::uint64_t>();
            r.input_len = j.at("input_len").get<std::uint32_t>();
            r.output_len = j.at("output_len").get<std::uint32_t>();
            validate(r);
            out.push_back(r);
        } catch (const std::exception &e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void save_trace_jsonl(const std::string &path, const std::vector<TraceRecord> &records) {
    std::ofstream out(path);
    if (!out) throw ParseError(path + ": cannot open for writing");
    for (const auto &r : records) {
        json j = {{"arrival_ms", r.arrival_ms}, {"input_len", r.input_len}, {"output_len", r.output_len}};
        out << j.dump() << "\n";
    }
}

sim::StrategyTimeline load_timeline(const std::string &path) {
    json j = read_json(path);
    sim::StrategyTimeline tl;
    try {
        tl.span_seconds = j.at("span_seconds").get<int>();
        for (const auto &je : j.at("entries")) {
            sim::TimelineEntry e;
            e.start_span = je.at("start_span").get<std::int64_t>();
            for (const auto &jr : je.at("deployment")) {
                ReplicaConfig r;
                r.device_ids = jr.at("devices").get<std::vector<DeviceId>>();
                r.tp = jr.at("tp").get<int>();
                r.pp = jr.at("pp").get<int>();
                e.deployment.replicas.push_back(std::move(r));
            }
            e.assignment.x = je.at("assignment").get<std::vector<std::vector<std::int64_t>>>();
            for (const auto &row : e.assignment.x) {
                for (auto v : row) e.assignment.objective += v;
            }
            e.switch_seconds = je.at("switch_seconds").get<double>();
            if (je.contains("transfers")) {
                for (const auto &jt : je.at("transfers")) {
                    switchplan::Transfer t;
                    t.range.begin = jt.at("start").get<std::uint64_t>();
                    t.range.end = t.range.begin + jt.at("len").get<std::uint64_t>();
                    t.src = jt.at("src").get<DeviceId>();
                    t.dst = jt.at("dst").get<DeviceId>();
                    e.plan.transfers.push_back(t);
                    e.plan.link_load[{t.src, t.dst}] += t.range.len();
                }
                e.plan.est_seconds = e.switch_seconds;
            }
            tl.entries.push_back(std::move(e));
        }
    } catch (const json::exception &e) {
        throw ParseError(path + ": " + e.what());
    }
    return tl;
}

void save_timeline(const std::string &path, const sim::StrategyTimeline &timeline) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["span_seconds"] = timeline.span_seconds;
    j["entries"] = json::array();
    for (const auto &e : timeline.entries) {
        json je;
        je["start_span"] = e.start_span;
        je["deployment"] = json::array();
        for (const auto &r : e.deployment.replicas) {
            je["deployment"].push_back({{"devices", r.device_ids}, {"tp", r.tp}, {"pp", r.pp}});
        }
        je["assignment"] = e.assignment.x;
        je["switch_seconds"] = e.switch_seconds;
        je["transfers"] = json::array();
        for (const auto &t : e.plan.transfers) {
            je["transfers"].push_back(
                {{"start", t.range.begin}, {"len", t.range.len()}, {"src", t.src}, {"dst", t.dst}});
        }
        j["entries"].push_back(std::move(je));
    }
    write_json(path, j);
}

void write_metrics_csv(const std::string &path,
                       const std::vector<std::pair<std::string, sim::MetricsReport>> &rows) {
    std::ostringstream os;
    os << "config,completed,avg_s,p90_s,p95_s,p96_s,p97_s,p98_s,p99_s,throughput_rps,horizon_s\n";
    for (const auto &[name, r] : rows) {
        os << name << "," << r.completed << "," << fmt6(r.avg) << "," << fmt6(r.p90) << ","
           << fmt6(r.p95) << "," << fmt6(r.p96) << "," << fmt6(r.p97) << "," << fmt6(r.p98) << ","
           << fmt6(r.p99) << "," << fmt6(r.throughput) << "," << fmt6(r.horizon_s) << "\n";
    }
    write_text(path, os.str());
}

void write_outcomes_csv(const std::string &path, const std::vector<sim::RequestOutcome> &outcomes) {
    std::ostringstream os;
    os << "request_id,type,replica,arrival_s,start_s,finish_s,latency_s\n";
    for (const auto &o : outcomes) {
        os << o.request_id << "," << o.type << "," << o.replica << ","
           << fmt6(static_cast<double>(o.arrival_us) / 1e6) << ","
           << fmt6(static_cast<double>(o.start_us) / 1e6) << ","
           << fmt6(static_cast<double>(o.finish_us) / 1e6) << "," << fmt6(o.latency_s()) << "\n";
    }
    write_text(path, os.str());
}

void write_assignment_csv(const std::string &path, const flow::AssignmentMatrix &assignment) {
    std::ostringstream os;
    os << "replica,type,requests\n";
    for (std::size_t k = 0; k < assignment.x.size(); ++k) {
        for (std::size_t j = 0; j < assignment.x[k].size(); ++j) {
            os << k << "," << j << "," << assignment.x[k][j] << "\n";
        }
    }
    write_text(path, os.str());
}

void write_switch_plan_csv(const std::string &path, const switchplan::SwitchPlan &plan) {
    std::ostringstream os;
    os << "fragment_start,fragment_len,src,dst\n";
    for (const auto &t : plan.transfers) {
        os << t.range.begin << "," << t.range.len() << "," << t.src << "," << t.dst << "\n";
    }
    write_text(path, os.str());
}

void write_predictions_csv(const std::string &path,
                           const std::vector<std::tuple<std::int64_t, int, double, double>> &rows) {
    std::ostringstream os;
    os << "span,type,actual,predicted\n";
    for (const auto &[span, type, actual, predicted] : rows) {
        os << span << "," << type << "," << fmt6(actual) << "," << fmt6(predicted) << "\n";
    }
    write_text(path, os.str());
}

void write_text(const std::string &path, const std::string &content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError(path + ": cannot open for writing");
    out << content;
}

}  // namespace oserve::io
