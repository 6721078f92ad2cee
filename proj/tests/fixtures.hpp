// Shared test fixtures: clusters, models, profile parameter sets and the
// synthetic mixed-shift trace used by the end-to-end checks.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "oserve/core.hpp"
#include "oserve/costmodel.hpp"
#include "oserve/deploysearch.hpp"

namespace fixtures {

using namespace oserve;

constexpr std::uint64_t kGB = 1'000'000'000ULL;

inline ClusterSpec cluster(int machines, int devices_per_machine, std::uint64_t mem_per_device = 80 * kGB,
                           double intra_bw = 400e9, double inter_bw = 200e9) {
    ClusterSpec c;
    c.intra_bw = intra_bw;
    c.inter_bw = inter_bw;
    int dev = 0;
    for (int m = 0; m < machines; ++m) {
        MachineSpec ms;
        ms.machine_id = "m" + std::to_string(m);
        ms.device_mem = mem_per_device;
        for (int d = 0; d < devices_per_machine; ++d) ms.device_ids.push_back(dev++);
        c.machines.push_back(ms);
    }
    return c;
}

// Fits on one 80 GB device; used by the Fig. 1 style trade-off checks.
inline ModelSpec small_model() {
    ModelSpec m;
    m.name = "artifact-26b";
    m.param_bytes = 26 * kGB;
    m.num_layers = 40;
    m.bytes_per_token_kv = 80'000;
    m.flops_per_token_prefill = 52'000'000'000ULL;
    m.min_mem_bytes = 40 * kGB;
    return m;
}

// Needs two 80 GB devices; used by the mixed-shift end-to-end fixture.
inline ModelSpec large_model() {
    ModelSpec m;
    m.name = "artifact-110b";
    m.param_bytes = 110 * kGB;
    m.num_layers = 80;
    m.bytes_per_token_kv = 80'000;
    m.flops_per_token_prefill = 220'000'000'000ULL;
    m.min_mem_bytes = 120 * kGB;
    return m;
}

// 140 GB-class model for the switch-time and init_uniform anchors.
inline ModelSpec model_140gb() {
    ModelSpec m;
    m.name = "artifact-70b";
    m.param_bytes = 140 * kGB;
    m.num_layers = 80;
    m.bytes_per_token_kv = 160'000;
    m.flops_per_token_prefill = 280'000'000'000ULL;
    m.min_mem_bytes = 140 * kGB;
    return m;
}

inline WorkloadType short_type() { return {0, 2000.0, 50.0}; }
inline WorkloadType long_type() { return {1, 100.0, 3000.0}; }

// Exact-arithmetic profile for the 80/50 LCM fixture: with span 50 s the
// two service times are 0.625 s and 1.0 s, both exactly representable.
struct LcmFixture {
    cost::ProfileParams params;
    ModelSpec model;
    WorkloadType type1;
    WorkloadType type2;
    double span_s = 50.0;
};

inline LcmFixture lcm_80_50_fixture() {
    LcmFixture f;
    f.params.prefill_coeff = 1.0 / 256.0;
    f.params.decode_coeff = 1.0 / 512.0;
    f.params.tp_efficiency = 1.0;
    f.params.pp_comm_cost = 1e-9;
    f.params.mem_bw_penalty = 0.0;
    f.model.name = "lcm-fixture";
    f.model.param_bytes = 1 * kGB;
    f.model.num_layers = 1;
    f.model.bytes_per_token_kv = 1;
    f.model.flops_per_token_prefill = 1;
    f.model.min_mem_bytes = 1 * kGB;
    f.type1 = {0, 128.0, 64.0};   // 0.5 + 0.125  = 0.625 s -> n = 80
    f.type2 = {1, 128.0, 256.0};  // 0.5 + 0.5    = 1.0 s   -> n = 50
    return f;
}

// Appendix D Case 2 rates: a (tp2,pp2) replica at 10/s and 5/s, (tp2,pp1)
// replicas at 5/s and 3/s, span 1 s.
struct AppendixDFixture {
    cost::ProfileParams params;
    ModelSpec model;
    WorkloadType type1;
    WorkloadType type2;
    double span_s = 1.0;
};

inline AppendixDFixture appendix_d_fixture() {
    AppendixDFixture f;
    f.params.prefill_coeff = 0.002;
    f.params.decode_coeff = 0.002;
    f.params.tp_efficiency = 1.0;
    f.params.pp_comm_cost = 0.0004;
    f.params.mem_bw_penalty = 0.0;
    f.model.name = "appendix-d";
    f.model.param_bytes = 1 * kGB;
    f.model.num_layers = 1;
    f.model.bytes_per_token_kv = 1;
    f.model.flops_per_token_prefill = 1;
    f.model.min_mem_bytes = 1 * kGB;
    f.type1 = {0, 131.0, 48.0};   // tp2pp1: 0.179 s -> 5/s; tp2pp2: 0.1986 -> 10/s
    f.type2 = {1, 121.0, 196.0};  // tp2pp1: 0.317 s -> 3/s; tp2pp2: 0.3958 -> 5/s
    return f;
}

// Deterministic jitter in [-spread, spread].
inline double jitter(std::mt19937_64 &rng, double spread) {
    double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return (2.0 * u - 1.0) * spread;
}

struct MixedShiftTrace {
    std::vector<TraceRecord> records;
    std::int64_t capacity_phase_a = 0;
    std::int64_t capacity_phase_b = 0;
    int spans_per_phase = 25;
};

// Largest per-span demand at the given type mix the cluster can fully
// serve under its best deployment (binary search over the exhaustive
// oracle).
inline std::int64_t capacity_at_mix(const ClusterSpec &c, const ModelSpec &m,
                                    const std::vector<WorkloadType> &types, double short_share,
                                    double span_s, const cost::ProfileParams &params) {
    std::int64_t lo = 1, hi = 50'000;
    while (lo < hi) {
        std::int64_t mid = (lo + hi + 1) / 2;
        std::vector<std::int64_t> counts = {
            static_cast<std::int64_t>(std::llround(short_share * static_cast<double>(mid))),
            static_cast<std::int64_t>(std::llround((1.0 - short_share) * static_cast<double>(mid)))};
        TraceSpan span{0, counts};
        auto state = search::exhaustive(c, m, types, span, span_s, params);
        std::int64_t demand = counts[0] + counts[1];
        if (state.throughput >= demand) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    return lo;
}

// Two workload types whose ratio flips mid-trace (70/30 -> 30/70), scaled
// to ~92% of the per-phase cluster capacity.
inline MixedShiftTrace mixed_shift_trace(const ClusterSpec &c, const ModelSpec &m,
                                         const cost::ProfileParams &params, std::uint64_t seed,
                                         int spans_per_phase = 25, double load = 0.92,
                                         int span_seconds = 60) {
    MixedShiftTrace out;
    out.spans_per_phase = spans_per_phase;
    std::vector<WorkloadType> types = {short_type(), long_type()};
    double span_s = static_cast<double>(span_seconds);
    out.capacity_phase_a = capacity_at_mix(c, m, types, 0.7, span_s, params);
    out.capacity_phase_b = capacity_at_mix(c, m, types, 0.3, span_s, params);

    std::mt19937_64 rng(seed);
    const int total_spans = 2 * spans_per_phase;
    for (int s = 0; s < total_spans; ++s) {
        bool phase_a = s < spans_per_phase;
        double short_share = phase_a ? 0.7 : 0.3;
        std::int64_t cap = phase_a ? out.capacity_phase_a : out.capacity_phase_b;
        auto lam = static_cast<std::int64_t>(std::llround(load * static_cast<double>(cap)));
        std::int64_t shorts = static_cast<std::int64_t>(std::llround(short_share * lam));
        std::int64_t longs = lam - shorts;

        // Interleave the two types deterministically across the span.
        std::vector<int> kinds;
        kinds.insert(kinds.end(), shorts, 0);
        kinds.insert(kinds.end(), longs, 1);
        for (std::size_t i = kinds.size(); i > 1; --i) {
            std::swap(kinds[i - 1], kinds[rng() % i]);
        }
        for (std::size_t i = 0; i < kinds.size(); ++i) {
            const WorkloadType &t = kinds[i] == 0 ? types[0] : types[1];
            TraceRecord r;
            double offset_ms = (static_cast<double>(i) + 0.5) / static_cast<double>(kinds.size()) *
                               span_seconds * 1000.0;
            r.arrival_ms = static_cast<std::uint64_t>(s) * span_seconds * 1000 +
                           static_cast<std::uint64_t>(offset_ms);
            r.input_len = static_cast<std::uint32_t>(
                std::max<std::int64_t>(1, std::llround(t.centroid_in * (1.0 + jitter(rng, 0.1)))));
            r.output_len = static_cast<std::uint32_t>(
                std::max<std::int64_t>(1, std::llround(t.centroid_out * (1.0 + jitter(rng, 0.1)))));
            out.records.push_back(r);
        }
    }
    return out;
}

}  // namespace fixtures
