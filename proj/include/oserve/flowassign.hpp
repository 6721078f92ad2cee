#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oserve/core.hpp"
#include "oserve/costmodel.hpp"

namespace oserve::flow {

// LCM normalization of one replica's per-type capacities. units[j] is the
// flow units one type-j request consumes (M / n_j). Types with zero
// capacity are excluded from the LCM and get units[j] = 0 (no request of
// that type can be assigned anyway).
struct NormalizedRow {
    std::int64_t M = 1;
    std::vector<std::int64_t> units;
    bool scaled = false;  // true when the rational-rescaling fallback was used
};

// Exact LCM normalization; throws LcmOverflow when the LCM would exceed
// 2^62.
NormalizedRow normalize(const std::vector<std::int64_t> &n_row);
// Same, but falls back to rational rescaling (unit costs rounded up
// against a fixed 2^40 budget, which under-admits by at most one request
// per type) instead of throwing.
NormalizedRow normalize_or_scale(const std::vector<std::int64_t> &n_row);

// Generic capacitated digraph for max-flow.
struct Graph {
    struct Edge {
        int from = 0;
        int to = 0;
        std::int64_t cap = 0;
    };
    int num_nodes = 0;
    std::vector<Edge> edges;
};

struct FlowResult {
    std::int64_t value = 0;
    std::vector<std::int64_t> flow;  // per edge, parallel to Graph::edges
};

// Preflow-push (FIFO push-relabel) max flow. Deterministic: nodes and arcs
// are processed in index order.
FlowResult max_flow(const Graph &g, int source, int sink);

// The four-edge-class network of the lower-level formulation.
// Node layout: S, w_j (J), i_{k,j} (R*J, k-major), c_k^in (R), c_k^out (R), T.
struct FlowNetwork {
    int R = 0;
    int J = 0;
    std::vector<std::int64_t> lambda;               // [j] demand per span
    std::vector<std::vector<std::int64_t>> e;       // [k][j] edge capacities (requests)
    std::vector<std::vector<std::int64_t>> n;       // [k][j] node capacities (requests)
    std::vector<std::vector<std::int64_t>> unit;    // [k][j] flow units per request
    std::vector<std::int64_t> M;                    // [k] normalized node capacity
    std::vector<bool> scaled;                       // [k] rescaling fallback used
    Graph graph;

    int source() const { return 0; }
    int sink() const { return 1 + J + R * J + 2 * R; }
    int node_w(int j) const { return 1 + j; }
    int node_i(int k, int j) const { return 1 + J + k * J + j; }
    int node_c_in(int k) const { return 1 + J + R * J + k; }
    int node_c_out(int k) const { return 1 + J + R * J + R + k; }
    int node_count() const { return 2 + J + R * J + 2 * R; }

    int edge_source(int j) const { return j; }
    int edge_w_i(int k, int j) const { return J + 2 * (k * J + j); }
    int edge_i_c(int k, int j) const { return J + 2 * (k * J + j) + 1; }
    int edge_node(int k) const { return J + 2 * R * J + k; }
    int edge_out(int k) const { return J + 2 * R * J + R + k; }
    int edge_count() const { return J + 2 * R * J + 2 * R; }
};

// Assemble the network for one span against a capacity table. Throws
// EmptyDeployment when the table has no replicas.
FlowNetwork build_network(const TraceSpan &span, const cost::CapacityTable &table);

// DOT rendering for inspection; when a flow is given, edges are labeled
// "used | capacity".
std::string to_dot(const FlowNetwork &net, const FlowResult *flow = nullptr);

struct AssignmentMatrix {
    std::vector<std::vector<std::int64_t>> x;  // [k][j] requests
    std::int64_t objective = 0;                // total requests served per span

    bool operator==(const AssignmentMatrix &) const = default;
};

// Solver knobs. The exact branch-and-bound engages automatically on small
// instances (where the acceptance suite requires true integer optimality)
// and falls back to greedy + exchange improvement on large ones.
struct SolveOptions {
    std::int64_t exact_demand_limit = 400;  // engage exact search when sum(lambda) <= this
    int exact_cell_limit = 20;              // ... and R*J <= this
    std::int64_t node_budget = 8'000'000;   // hard cap on explored B&B nodes
};

// Lower-level solution bundle: the assignment plus the normalization data
// needed to reason about per-replica utilization.
struct LowerLevel {
    AssignmentMatrix assignment;
    std::vector<std::int64_t> M;                  // [k]
    std::vector<std::vector<std::int64_t>> unit;  // [k][j]
    std::vector<std::int64_t> used;               // [k] flow units consumed
};

LowerLevel solve_assignment(const cost::CapacityTable &table, const std::vector<std::int64_t> &lambda,
                            const SolveOptions &opts = {});

// Read an assignment back out of a solved network flow: requests are the
// chain flows divided by unit cost (rounded down, residual returned to
// slack), then improved to a count-maximal assignment.
AssignmentMatrix extract_assignment(const FlowNetwork &net, const FlowResult &flow,
                                    const SolveOptions &opts = {});

// Throws std::logic_error naming the violated constraint (C1, C2 or C3).
void check_constraints(const AssignmentMatrix &a, const cost::CapacityTable &table,
                       const std::vector<std::int64_t> &lambda);

// LP relaxation of the same instance (fractional requests), solved by a
// dense simplex. Exposed for completion-time comparisons.
struct FractionalSolution {
    std::vector<std::vector<double>> f;  // [k][j]
    double objective = 0.0;
};

FractionalSolution solve_fractional(const cost::CapacityTable &table,
                                    const std::vector<std::int64_t> &lambda);

}  // namespace oserve::flow
