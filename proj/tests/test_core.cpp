#include <doctest.h>

#include <filesystem>

#include "fixtures.hpp"
#include "oserve/core.hpp"
#include "oserve/json_io.hpp"

using namespace oserve;

TEST_CASE("cluster validation") {
    ClusterSpec c = fixtures::cluster(2, 4);
    CHECK_NOTHROW(validate(c));
    CHECK(c.device_count() == 8);
    CHECK(c.machine_index(5) == 1);
    CHECK(c.same_machine(0, 3));
    CHECK(!c.same_machine(3, 4));

    SUBCASE("duplicate device ids rejected") {
        c.machines[1].device_ids[0] = 0;
        CHECK_THROWS_AS(validate(c), std::invalid_argument);
    }
    SUBCASE("intra must be at least inter") {
        c.intra_bw = 100e9;
        c.inter_bw = 200e9;
        CHECK_THROWS_AS(validate(c), std::invalid_argument);
    }
    SUBCASE("inter must be positive") {
        c.inter_bw = 0;
        CHECK_THROWS_AS(validate(c), std::invalid_argument);
    }
}

TEST_CASE("model invariants") {
    ModelSpec m = fixtures::small_model();
    CHECK_NOTHROW(validate(m));
    m.min_mem_bytes = m.param_bytes - 1;
    CHECK_THROWS_AS(validate(m), std::invalid_argument);
}

TEST_CASE("replica placement rule") {
    ClusterSpec c = fixtures::cluster(2, 4);

    SUBCASE("tp group within one machine accepted") {
        ReplicaConfig r{{0, 1, 2, 3}, 4, 1};
        CHECK(replica_valid(r, c));
    }
    SUBCASE("tp group across machines rejected") {
        ReplicaConfig r{{2, 3, 4, 5}, 4, 1};
        CHECK(!replica_valid(r, c));
        // Same devices as two stages of two: each stage intra-machine.
        ReplicaConfig r22{{2, 3, 4, 5}, 2, 2};
        CHECK(replica_valid(r22, c));
    }
    SUBCASE("pp may cross machines while tp stays intra") {
        ReplicaConfig r{{0, 1, 2, 3, 4, 5, 6, 7}, 4, 2};
        CHECK(replica_valid(r, c));
        ReplicaConfig r18{{0, 1, 2, 3, 4, 5, 6, 7}, 1, 8};
        CHECK(replica_valid(r18, c));
        ReplicaConfig r81{{0, 1, 2, 3, 4, 5, 6, 7}, 8, 1};
        CHECK(!replica_valid(r81, c));
    }
    SUBCASE("tp*pp must match device count") {
        ReplicaConfig r{{0, 1, 2}, 2, 2};
        CHECK(!replica_valid(r, c));
    }
    SUBCASE("validity decidable for every factorization of a block") {
        std::vector<DeviceId> block{0, 1, 2, 3, 4, 5, 6, 7};
        for (int tp : {1, 2, 4, 8}) {
            ReplicaConfig r{block, tp, 8 / tp};
            CHECK(replica_valid(r, c) == (tp <= 4));
        }
    }
}

TEST_CASE("deployment disjointness") {
    ClusterSpec c = fixtures::cluster(2, 4);
    Deployment d;
    d.replicas.push_back({{0, 1}, 2, 1});
    d.replicas.push_back({{2, 3}, 2, 1});
    CHECK_NOTHROW(validate_deployment(d, c));
    d.replicas.push_back({{3, 4}, 2, 1});
    CHECK_THROWS_AS(validate_deployment(d, c), std::invalid_argument);
}

TEST_CASE("serialization round trips") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "oserve_core_roundtrip";
    fs::create_directories(dir);

    ClusterSpec c = fixtures::cluster(2, 4);
    io::save_cluster((dir / "cluster.json").string(), c);
    CHECK(io::load_cluster((dir / "cluster.json").string()) == c);

    ModelSpec m = fixtures::small_model();
    io::save_model((dir / "model.json").string(), m);
    CHECK(io::load_model((dir / "model.json").string()) == m);

    Deployment d;
    d.replicas.push_back({{0, 1, 2, 3}, 2, 2});
    d.replicas.push_back({{4, 5}, 2, 1});
    io::save_deployment((dir / "dep.json").string(), d);
    CHECK(io::load_deployment((dir / "dep.json").string()) == d);

    std::vector<TraceRecord> trace = {{0, 10, 20}, {1500, 3, 4}, {65'000, 100, 1}};
    io::save_trace_jsonl((dir / "trace.jsonl").string(), trace);
    CHECK(io::load_trace_jsonl((dir / "trace.jsonl").string()) == trace);

    fs::remove_all(dir);
}

TEST_CASE("trace record validation") {
    TraceRecord r{0, 0, 5};
    CHECK_THROWS_AS(validate(r), std::invalid_argument);
    TraceRecord ok{0, 1, 1};
    CHECK_NOTHROW(validate(ok));
}
