#include <doctest.h>

#include "fixtures.hpp"
#include "oserve/costmodel.hpp"
#include "oserve/errors.hpp"

using namespace oserve;
using namespace oserve::cost;

namespace {

ProfileParams unit_params() {
    ProfileParams p;
    p.prefill_coeff = 0.001;
    p.decode_coeff = 0.002;
    p.tp_efficiency = 1.0;
    p.pp_comm_cost = 0.05;
    p.mem_bw_penalty = 0.0;
    return p;
}

ModelSpec one_layer_model() {
    ModelSpec m = fixtures::small_model();
    m.num_layers = 1;
    return m;
}

}  // namespace

TEST_CASE("prefill latency identity case") {
    ClusterSpec c = fixtures::cluster(1, 4);
    ModelSpec m = one_layer_model();
    ProfileParams p = unit_params();
    ReplicaConfig cfg{{0}, 1, 1};
    CHECK(prefill_latency(cfg, m, 1.0, p) == doctest::Approx(0.001));
}

TEST_CASE("doubling tp at efficiency 1 halves the prefill compute term") {
    ClusterSpec c = fixtures::cluster(1, 4);
    ModelSpec m = one_layer_model();
    ProfileParams p = unit_params();
    ReplicaConfig tp1{{0}, 1, 1};
    ReplicaConfig tp2{{0, 1}, 2, 1};
    CHECK(prefill_latency(tp2, m, 500.0, p) == doctest::Approx(prefill_latency(tp1, m, 500.0, p) / 2));
}

TEST_CASE("pp=2 pays exactly one extra stage boundary per microbatch") {
    // (tp=2,pp=2) vs (tp=4,pp=1) on the same 4 devices, by direct formula.
    ClusterSpec c = fixtures::cluster(1, 4);
    ModelSpec m = one_layer_model();
    ProfileParams p = unit_params();
    ReplicaConfig pp2{{0, 1, 2, 3}, 2, 2};
    ReplicaConfig pp1{{0, 1, 2, 3}, 4, 1};
    double in = 300.0;
    double expect_pp2 = in * m.num_layers * p.prefill_coeff / tp_speedup(2, 1.0) + p.pp_comm_cost;
    double expect_pp1 = in * m.num_layers * p.prefill_coeff / tp_speedup(4, 1.0);
    CHECK(prefill_latency(pp2, m, in, p) == doctest::Approx(expect_pp2));
    CHECK(prefill_latency(pp1, m, in, p) == doctest::Approx(expect_pp1));
    double compute_gap = expect_pp2 - p.pp_comm_cost - expect_pp1;
    CHECK(prefill_latency(pp2, m, in, p) - prefill_latency(pp1, m, in, p) ==
          doctest::Approx(p.pp_comm_cost + compute_gap));
}

TEST_CASE("decode latency identity and tp symmetry") {
    ModelSpec m = one_layer_model();
    ProfileParams p = unit_params();
    ReplicaConfig tp1{{0}, 1, 1};
    CHECK(decode_latency(tp1, m, 1.0, p) == doctest::Approx(0.002));

    // With no memory-bandwidth penalty, tp=2 halves the compute term.
    ReplicaConfig tp2{{0, 1}, 2, 1};
    CHECK(decode_latency(tp2, m, 64.0, p) == doctest::Approx(decode_latency(tp1, m, 64.0, p) / 2));
}

TEST_CASE("short-output type prefers DP, long-output type prefers TP (2 devices)") {
    // Calibration contract on the shipped defaults.
    ClusterSpec c = fixtures::cluster(1, 2);
    ModelSpec m = fixtures::small_model();
    ProfileParams p;  // defaults
    double span = 60.0;

    Deployment dp2;
    dp2.replicas.push_back({{0}, 1, 1});
    dp2.replicas.push_back({{1}, 1, 1});
    Deployment tp2;
    tp2.replicas.push_back({{0, 1}, 2, 1});

    auto throughput = [&](const Deployment &dep, const WorkloadType &t) {
        std::int64_t total = 0;
        for (const auto &r : dep.replicas) {
            std::uint64_t budget = replica_kv_budget(r, m, c);
            total += edge_capacity(r, m, c, t, span, p, budget);
        }
        return total;
    };

    CHECK(throughput(dp2, fixtures::short_type()) > throughput(tp2, fixtures::short_type()));
    CHECK(throughput(tp2, fixtures::long_type()) > throughput(dp2, fixtures::long_type()));
}

TEST_CASE("capacity floor boundary") {
    fixtures::LcmFixture f = fixtures::lcm_80_50_fixture();
    ClusterSpec c = fixtures::cluster(1, 2);
    ReplicaConfig cfg{{0}, 1, 1};
    // Service time exactly span_s -> capacity 1.
    WorkloadType t{0, 128.0, 256.0};  // 1.0 s service
    CHECK(capacity(cfg, f.model, c, t, 1.0, f.params) == 1);
}

TEST_CASE("capacity hits the 80/50 rates of the flow example") {
    fixtures::LcmFixture f = fixtures::lcm_80_50_fixture();
    ClusterSpec c = fixtures::cluster(1, 2);
    ReplicaConfig cfg{{0}, 1, 1};
    CHECK(capacity(cfg, f.model, c, f.type1, f.span_s, f.params) == 80);
    CHECK(capacity(cfg, f.model, c, f.type2, f.span_s, f.params) == 50);
}

TEST_CASE("capacity monotone non-increasing in output length") {
    ClusterSpec c = fixtures::cluster(1, 2);
    ModelSpec m = fixtures::small_model();
    ProfileParams p;
    ReplicaConfig cfg{{0}, 1, 1};
    std::int64_t prev = -1;
    for (double out : {8.0, 64.0, 512.0}) {
        WorkloadType t{0, 100.0, out};
        std::int64_t n = capacity(cfg, m, c, t, 60.0, p);
        if (prev >= 0) CHECK(n <= prev);
        prev = n;
    }
}

TEST_CASE("edge capacity KV limits") {
    ClusterSpec c = fixtures::cluster(1, 2);
    ModelSpec m = fixtures::small_model();
    ProfileParams p;
    ReplicaConfig cfg{{0}, 1, 1};
    WorkloadType t = fixtures::short_type();

    CHECK(edge_capacity(cfg, m, c, t, 60.0, p, 0) == 0);
    std::int64_t n = capacity(cfg, m, c, t, 60.0, p);
    CHECK(edge_capacity(cfg, m, c, t, 60.0, p, ~0ULL >> 1) == n);

    // Long-output type admits fewer concurrent requests at equal budget.
    std::uint64_t budget = 10'000'000'000ULL;
    CHECK(edge_capacity(cfg, m, c, fixtures::long_type(), 60.0, p, budget) <
          edge_capacity(cfg, m, c, fixtures::short_type(), 60.0, p, budget));
}

TEST_CASE("memory feasibility anchors") {
    ClusterSpec c = fixtures::cluster(1, 8);  // 8x80 GB
    ModelSpec m = fixtures::model_140gb();

    ReplicaConfig one{{0}, 1, 1};
    CHECK(!memory_feasible(one, m, c));

    ReplicaConfig two{{0, 1}, 2, 1};
    CHECK(memory_feasible(two, m, c));

    ModelSpec zero;  // constructed raw: memory_feasible is total on inputs
    zero.param_bytes = 0;
    zero.min_mem_bytes = 0;
    CHECK(memory_feasible(one, zero, c));
}

TEST_CASE("capacity table composition and symmetry") {
    fixtures::LcmFixture f = fixtures::lcm_80_50_fixture();
    ClusterSpec c = fixtures::cluster(1, 4);
    std::vector<WorkloadType> types = {f.type1, f.type2};

    SUBCASE("single replica single type matches scalar calls") {
        Deployment dep;
        dep.replicas.push_back({{0}, 1, 1});
        CapacityTable t = build_capacity_table(dep, {f.type1}, f.model, c, f.params, f.span_s);
        CHECK(t.n == std::vector<std::vector<std::int64_t>>{{80}});
        std::uint64_t budget = replica_kv_budget(dep.replicas[0], f.model, c);
        CHECK(t.e[0][0] == edge_capacity(dep.replicas[0], f.model, c, f.type1, f.span_s, f.params, budget));
    }

    SUBCASE("identical replicas produce identical rows") {
        Deployment dep;
        dep.replicas.push_back({{0}, 1, 1});
        dep.replicas.push_back({{1}, 1, 1});
        CapacityTable t = build_capacity_table(dep, types, f.model, c, f.params, f.span_s);
        CHECK(t.n[0] == t.n[1]);
        CHECK(t.e[0] == t.e[1]);
        CHECK(t.latency[0] == t.latency[1]);
    }

    SUBCASE("infeasible replica names the offender") {
        Deployment dep;
        dep.replicas.push_back({{0}, 1, 1});
        ModelSpec big = fixtures::model_140gb();
        CHECK_THROWS_AS(build_capacity_table(dep, types, big, c, f.params, f.span_s), InfeasibleReplica);
    }
}

TEST_CASE("capacity table reproduces the three-replica example rates") {
    // One (tp2,pp2) replica at 10/s and 5/s plus two (tp2,pp1) replicas at
    // 5/s and 3/s.
    fixtures::AppendixDFixture f = fixtures::appendix_d_fixture();
    ClusterSpec c = fixtures::cluster(2, 4);
    Deployment dep;
    dep.replicas.push_back({{0, 1, 2, 3}, 2, 2});
    dep.replicas.push_back({{4, 5}, 2, 1});
    dep.replicas.push_back({{6, 7}, 2, 1});
    CapacityTable t =
        build_capacity_table(dep, {f.type1, f.type2}, f.model, c, f.params, f.span_s);
    CHECK(t.n[0] == std::vector<std::int64_t>{10, 5});
    CHECK(t.n[1] == std::vector<std::int64_t>{5, 3});
    CHECK(t.n[2] == std::vector<std::int64_t>{5, 3});
}

TEST_CASE("determinism: identical inputs give identical tables") {
    ClusterSpec c = fixtures::cluster(2, 4);
    ModelSpec m = fixtures::small_model();
    ProfileParams p;
    Deployment dep;
    dep.replicas.push_back({{0, 1, 2, 3}, 2, 2});
    dep.replicas.push_back({{4, 5, 6, 7}, 4, 1});
    std::vector<WorkloadType> types = {fixtures::short_type(), fixtures::long_type()};
    CapacityTable a = build_capacity_table(dep, types, m, c, p, 60.0);
    CapacityTable b = build_capacity_table(dep, types, m, c, p, 60.0);
    CHECK(a == b);
}

TEST_CASE("profile validation") {
    ProfileParams p;
    CHECK_NOTHROW(validate(p));
    p.tp_efficiency = 1.5;
    CHECK_THROWS_AS(validate(p), std::invalid_argument);
    p = ProfileParams{};
    p.prefill_coeff = 0;
    CHECK_THROWS_AS(validate(p), std::invalid_argument);
}
