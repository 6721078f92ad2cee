#include "oserve/flowassign.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "oserve/errors.hpp"

namespace oserve::flow {

namespace {

constexpr std::int64_t kLcmLimit = std::int64_t{1} << 62;
// Fallback budget: large enough that rounding unit costs up costs at most
// one request per type for capacities up to 2^31.
constexpr std::int64_t kScaledBudget = std::int64_t{1} << 62;

std::int64_t checked_lcm(std::int64_t a, std::int64_t b) {
    std::int64_t g = std::gcd(a, b);
    std::int64_t q = a / g;
    if (q > kLcmLimit / b) return -1;
    return q * b;
}

}  // namespace

NormalizedRow normalize(const std::vector<std::int64_t> &n_row) {
    NormalizedRow out;
    out.units.assign(n_row.size(), 0);
    std::int64_t m = 1;
    for (std::int64_t n : n_row) {
        if (n < 0) throw std::invalid_argument("normalize: negative capacity");
        if (n == 0) continue;
        m = checked_lcm(m, n);
        if (m < 0) throw LcmOverflow("normalize: LCM exceeds 2^62");
    }
    out.M = m;
    for (std::size_t j = 0; j < n_row.size(); ++j) {
        if (n_row[j] > 0) out.units[j] = m / n_row[j];
    }
    return out;
}

NormalizedRow normalize_or_scale(const std::vector<std::int64_t> &n_row) {
    try {
        return normalize(n_row);
    } catch (const LcmOverflow &) {
        NormalizedRow out;
        out.scaled = true;
        out.M = kScaledBudget;
        out.units.assign(n_row.size(), 0);
        for (std::size_t j = 0; j < n_row.size(); ++j) {
            // Round unit cost up so capacities round down.
            if (n_row[j] > 0) out.units[j] = (kScaledBudget + n_row[j] - 1) / n_row[j];
        }
        return out;
    }
}

// ---------------------------------------------------------------------------
// FIFO push-relabel.

FlowResult max_flow(const Graph &g, int source, int sink) {
    const int n = g.num_nodes;
    const int m = static_cast<int>(g.edges.size());
    if (source < 0 || source >= n || sink < 0 || sink >= n || source == sink) {
        throw std::invalid_argument("max_flow: bad source/sink");
    }

    // Arc 2i is edge i forward, arc 2i+1 its reverse.
    std::vector<std::int64_t> res(2 * m);
    std::vector<int> arc_to(2 * m);
    std::vector<std::vector<int>> adj(n);
    for (int i = 0; i < m; ++i) {
        const auto &e = g.edges[i];
        if (e.cap < 0) throw std::invalid_argument("max_flow: negative capacity");
        res[2 * i] = e.cap;
        res[2 * i + 1] = 0;
        arc_to[2 * i] = e.to;
        arc_to[2 * i + 1] = e.from;
        adj[e.from].push_back(2 * i);
        adj[e.to].push_back(2 * i + 1);
    }

    std::vector<int> height(n, 0);
    std::vector<std::int64_t> excess(n, 0);
    std::vector<std::size_t> cur(n, 0);
    std::vector<bool> active(n, false);
    std::queue<int> fifo;

    auto enqueue = [&](int u) {
        if (!active[u] && excess[u] > 0 && u != source && u != sink) {
            active[u] = true;
            fifo.push(u);
        }
    };

    height[source] = n;
    for (int a : adj[source]) {
        if ((a & 1) != 0 || res[a] == 0) continue;
        std::int64_t d = res[a];
        res[a] -= d;
        res[a ^ 1] += d;
        excess[arc_to[a]] += d;
        excess[source] -= d;
        enqueue(arc_to[a]);
    }

    while (!fifo.empty()) {
        int u = fifo.front();
        fifo.pop();
        active[u] = false;
        // Discharge: excess always has a residual arc back toward where it
        // came from, so relabel cannot get stuck.
        while (excess[u] > 0) {
            if (cur[u] == adj[u].size()) {
                int h = std::numeric_limits<int>::max();
                for (int a : adj[u]) {
                    if (res[a] > 0) h = std::min(h, height[arc_to[a]] + 1);
                }
                height[u] = h;
                cur[u] = 0;
            } else {
                int a = adj[u][cur[u]];
                int v = arc_to[a];
                if (res[a] > 0 && height[u] == height[v] + 1) {
                    std::int64_t d = std::min(excess[u], res[a]);
                    res[a] -= d;
                    res[a ^ 1] += d;
                    excess[u] -= d;
                    excess[v] += d;
                    enqueue(v);
                } else {
                    ++cur[u];
                }
            }
        }
    }

    FlowResult out;
    out.flow.resize(m);
    for (int i = 0; i < m; ++i) out.flow[i] = g.edges[i].cap - res[2 * i];
    out.value = excess[sink];
    return out;
}

// ---------------------------------------------------------------------------
// Network assembly.

FlowNetwork build_network(const TraceSpan &span, const cost::CapacityTable &table) {
    const int R = table.replicas();
    if (R == 0) throw EmptyDeployment("build_network: deployment has no replicas");
    const int J = table.types();
    if (static_cast<int>(span.counts.size()) != J) {
        throw std::invalid_argument("build_network: span has " + std::to_string(span.counts.size()) +
                                    " type counts but table has " + std::to_string(J));
    }

    FlowNetwork net;
    net.R = R;
    net.J = J;
    net.lambda = span.counts;
    net.e = table.e;
    net.n = table.n;
    net.M.resize(R);
    net.unit.resize(R);
    net.scaled.resize(R);
    for (int k = 0; k < R; ++k) {
        NormalizedRow row = normalize_or_scale(table.n[k]);
        net.M[k] = row.M;
        net.unit[k] = row.units;
        net.scaled[k] = row.scaled;
    }

    Graph &g = net.graph;
    g.num_nodes = net.node_count();
    g.edges.reserve(net.edge_count());
    for (int j = 0; j < J; ++j) {
        g.edges.push_back({net.source(), net.node_w(j), net.lambda[j]});
    }
    for (int k = 0; k < R; ++k) {
        for (int j = 0; j < J; ++j) {
            std::int64_t cap = 0;
            if (net.unit[k][j] > 0) {
                std::int64_t e_kj = std::min(net.e[k][j], net.n[k][j]);
                cap = (e_kj > net.M[k] / net.unit[k][j]) ? net.M[k] : e_kj * net.unit[k][j];
            }
            g.edges.push_back({net.node_w(j), net.node_i(k, j), cap});
            g.edges.push_back({net.node_i(k, j), net.node_c_in(k), cap});
        }
    }
    for (int k = 0; k < R; ++k) {
        g.edges.push_back({net.node_c_in(k), net.node_c_out(k), net.M[k]});
    }
    for (int k = 0; k < R; ++k) {
        // "Sufficiently large": J requests' worth of node capacity.
        std::int64_t cap = net.M[k];
        if (cap > std::numeric_limits<std::int64_t>::max() / std::max(J, 1)) {
            cap = std::numeric_limits<std::int64_t>::max();
        } else {
            cap *= std::max(J, 1);
        }
        g.edges.push_back({net.node_c_out(k), net.sink(), cap});
    }
    return net;
}

std::string to_dot(const FlowNetwork &net, const FlowResult *flow) {
    std::ostringstream os;
    auto label = [&](int edge_idx) {
        std::ostringstream l;
        if (flow != nullptr && edge_idx < static_cast<int>(flow->flow.size())) {
            l << flow->flow[edge_idx] << " | ";
        }
        l << net.graph.edges[edge_idx].cap;
        return l.str();
    };
    os << "digraph flownet {\n  rankdir=LR;\n";
    os << "  S [shape=circle];\n  T [shape=doublecircle];\n";
    for (int j = 0; j < net.J; ++j) os << "  w" << j << " [shape=box];\n";
    for (int k = 0; k < net.R; ++k) {
        os << "  cin" << k << " [shape=ellipse];\n  cout" << k << " [shape=ellipse];\n";
    }
    for (int j = 0; j < net.J; ++j) {
        os << "  S -> w" << j << " [label=\"" << label(net.edge_source(j)) << "\"];\n";
    }
    for (int k = 0; k < net.R; ++k) {
        for (int j = 0; j < net.J; ++j) {
            os << "  w" << j << " -> i" << k << "_" << j << " [label=\"" << label(net.edge_w_i(k, j))
               << "\"];\n";
            os << "  i" << k << "_" << j << " -> cin" << k << " [label=\"" << label(net.edge_i_c(k, j))
               << "\"];\n";
        }
    }
    for (int k = 0; k < net.R; ++k) {
        os << "  cin" << k << " -> cout" << k << " [label=\"" << label(net.edge_node(k)) << "\"];\n";
        os << "  cout" << k << " -> T [label=\"" << label(net.edge_out(k)) << "\"];\n";
    }
    os << "}\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Assignment solving. The instance is max sum(x) subject to
//   C1: sum_k x[k][j] <= lambda[j]
//   C2: x[k][j] <= e[k][j]
//   C3: sum_j x[k][j]*unit[k][j] <= M[k]
// Small instances are solved to integer optimality by branch-and-bound;
// large ones by per-replica greedy fill plus inter-replica exchange moves.

namespace {

struct Instance {
    int R = 0;
    int J = 0;
    std::vector<std::vector<std::int64_t>> cap;   // min(e, n)
    std::vector<std::vector<std::int64_t>> unit;  // 0 => type unusable on replica
    std::vector<std::int64_t> M;
    std::vector<std::int64_t> lambda;
    std::vector<std::vector<int>> order;  // per replica, types by ascending unit
};

Instance make_instance(const std::vector<std::vector<std::int64_t>> &n,
                       const std::vector<std::vector<std::int64_t>> &e,
                       const std::vector<std::vector<std::int64_t>> &unit,
                       const std::vector<std::int64_t> &M, const std::vector<std::int64_t> &lambda) {
    Instance inst;
    inst.R = static_cast<int>(n.size());
    inst.J = static_cast<int>(lambda.size());
    inst.unit = unit;
    inst.M = M;
    inst.lambda = lambda;
    inst.cap.assign(inst.R, std::vector<std::int64_t>(inst.J, 0));
    inst.order.resize(inst.R);
    for (int k = 0; k < inst.R; ++k) {
        for (int j = 0; j < inst.J; ++j) {
            if (unit[k][j] <= 0) continue;
            std::int64_t c = std::min(e[k][j], n[k][j]);
            c = std::min(c, M[k] / unit[k][j]);
            if (c > 0) {
                inst.cap[k][j] = c;
                inst.order[k].push_back(j);
            }
        }
        std::stable_sort(inst.order[k].begin(), inst.order[k].end(), [&](int a, int b) {
            return unit[k][a] < unit[k][b];
        });
    }
    return inst;
}

// Exact max count for one replica's suffix given remaining demand/budget;
// ascending unit cost is optimal for a pure count objective.
std::int64_t greedy_suffix(const Instance &inst, int k, std::size_t pos, std::vector<std::int64_t> lam,
                           std::int64_t mrem) {
    std::int64_t count = 0;
    for (std::size_t i = pos; i < inst.order[k].size(); ++i) {
        int j = inst.order[k][i];
        std::int64_t take = std::min({inst.cap[k][j], lam[j], mrem / inst.unit[k][j]});
        if (take > 0) {
            count += take;
            lam[j] -= take;
            mrem -= take * inst.unit[k][j];
        }
    }
    return count;
}

struct ExactSolver {
    const Instance &inst;
    std::vector<std::int64_t> lam;
    std::vector<std::int64_t> mrem;
    std::vector<std::vector<std::int64_t>> x;
    std::vector<std::vector<std::int64_t>> best_x;
    std::int64_t count = 0;
    std::int64_t best = -1;
    std::int64_t nodes = 0;
    std::int64_t node_budget;
    bool aborted = false;

    explicit ExactSolver(const Instance &i, std::int64_t budget)
        : inst(i), lam(i.lambda), mrem(i.M), node_budget(budget) {
        x.assign(inst.R, std::vector<std::int64_t>(inst.J, 0));
        best_x = x;
    }

    void dfs(int k, std::size_t pos) {
        if (aborted) return;
        if (++nodes > node_budget) {
            aborted = true;
            return;
        }
        if (k == inst.R) {
            if (count > best) {
                best = count;
                best_x = x;
            }
            return;
        }
        if (pos == inst.order[k].size()) {
            dfs(k + 1, 0);
            return;
        }
        // Bound: remaining demand, or summed per-replica maxima.
        std::int64_t lam_total = std::accumulate(lam.begin(), lam.end(), std::int64_t{0});
        std::int64_t per_replica = greedy_suffix(inst, k, pos, lam, mrem[k]);
        for (int k2 = k + 1; k2 < inst.R; ++k2) per_replica += greedy_suffix(inst, k2, 0, lam, inst.M[k2]);
        if (count + std::min(lam_total, per_replica) <= best) return;

        int j = inst.order[k][pos];
        std::int64_t hi = std::min({inst.cap[k][j], lam[j], mrem[k] / inst.unit[k][j]});
        for (std::int64_t v = hi; v >= 0; --v) {
            x[k][j] = v;
            lam[j] -= v;
            mrem[k] -= v * inst.unit[k][j];
            count += v;
            dfs(k, pos + 1);
            count -= v;
            mrem[k] += v * inst.unit[k][j];
            lam[j] += v;
            x[k][j] = 0;
            if (aborted) return;
        }
    }
};

struct WorkingSolution {
    std::vector<std::vector<std::int64_t>> x;
    std::vector<std::int64_t> lam;
    std::vector<std::int64_t> mrem;
    std::int64_t count = 0;
};

WorkingSolution from_matrix(const Instance &inst, const std::vector<std::vector<std::int64_t>> &x0) {
    WorkingSolution w;
    w.x = x0;
    w.lam = inst.lambda;
    w.mrem = inst.M;
    for (int k = 0; k < inst.R; ++k) {
        for (int j = 0; j < inst.J; ++j) {
            w.lam[j] -= x0[k][j];
            w.mrem[k] -= x0[k][j] * inst.unit[k][j];
            w.count += x0[k][j];
        }
    }
    return w;
}

void greedy_fill(const Instance &inst, WorkingSolution &w) {
    for (int k = 0; k < inst.R; ++k) {
        for (int j : inst.order[k]) {
            std::int64_t take =
                std::min({inst.cap[k][j] - w.x[k][j], w.lam[j], w.mrem[k] / inst.unit[k][j]});
            if (take > 0) {
                w.x[k][j] += take;
                w.lam[j] -= take;
                w.mrem[k] -= take * inst.unit[k][j];
                w.count += take;
            }
        }
    }
}

// One-request exchange moves: relocate a request between replicas when the
// freed budget lets an unserved request in. Each success raises the
// objective by one, so the loop terminates.
void exchange_improve(const Instance &inst, WorkingSolution &w) {
    bool improved = true;
    while (improved) {
        improved = false;
        for (int j = 0; j < inst.J && !improved; ++j) {
            if (w.lam[j] <= 0) continue;
            for (int k = 0; k < inst.R && !improved; ++k) {
                if (inst.unit[k][j] <= 0 || w.x[k][j] >= inst.cap[k][j]) continue;
                if (w.mrem[k] >= inst.unit[k][j]) {
                    w.x[k][j] += 1;
                    w.lam[j] -= 1;
                    w.mrem[k] -= inst.unit[k][j];
                    w.count += 1;
                    improved = true;
                    break;
                }
                for (int j2 = 0; j2 < inst.J && !improved; ++j2) {
                    if (j2 == j || w.x[k][j2] <= 0) continue;
                    if (w.mrem[k] + inst.unit[k][j2] < inst.unit[k][j]) continue;
                    for (int k2 = 0; k2 < inst.R && !improved; ++k2) {
                        if (k2 == k || inst.unit[k2][j2] <= 0) continue;
                        if (w.x[k2][j2] >= inst.cap[k2][j2]) continue;
                        if (w.mrem[k2] < inst.unit[k2][j2]) continue;
                        w.x[k][j2] -= 1;
                        w.mrem[k] += inst.unit[k][j2];
                        w.x[k2][j2] += 1;
                        w.mrem[k2] -= inst.unit[k2][j2];
                        w.x[k][j] += 1;
                        w.mrem[k] -= inst.unit[k][j];
                        w.lam[j] -= 1;
                        w.count += 1;
                        improved = true;
                    }
                }
            }
        }
    }
}

bool use_exact(const Instance &inst, const SolveOptions &opts) {
    std::int64_t total = std::accumulate(inst.lambda.begin(), inst.lambda.end(), std::int64_t{0});
    return total <= opts.exact_demand_limit && inst.R * inst.J <= opts.exact_cell_limit;
}

AssignmentMatrix solve_instance(const Instance &inst, const SolveOptions &opts,
                                const std::vector<std::vector<std::int64_t>> *warm) {
    AssignmentMatrix out;
    if (use_exact(inst, opts)) {
        ExactSolver solver(inst, opts.node_budget);
        solver.dfs(0, 0);
        if (!solver.aborted) {
            out.x = solver.best_x;
            out.objective = solver.best;
            return out;
        }
        // Budget blown: fall through to the heuristic path.
    }
    WorkingSolution w = warm != nullptr
                            ? from_matrix(inst, *warm)
                            : from_matrix(inst, std::vector<std::vector<std::int64_t>>(
                                                    inst.R, std::vector<std::int64_t>(inst.J, 0)));
    greedy_fill(inst, w);
    exchange_improve(inst, w);
    out.x = w.x;
    out.objective = w.count;
    return out;
}

}  // namespace

LowerLevel solve_assignment(const cost::CapacityTable &table, const std::vector<std::int64_t> &lambda,
                            const SolveOptions &opts) {
    const int R = table.replicas();
    const int J = table.types();
    if (static_cast<int>(lambda.size()) != J) {
        throw std::invalid_argument("solve_assignment: lambda size mismatch");
    }
    LowerLevel out;
    out.M.resize(R);
    out.unit.resize(R);
    for (int k = 0; k < R; ++k) {
        NormalizedRow row = normalize_or_scale(table.n[k]);
        out.M[k] = row.M;
        out.unit[k] = row.units;
    }
    Instance inst = make_instance(table.n, table.e, out.unit, out.M, lambda);
    out.assignment = solve_instance(inst, opts, nullptr);
    out.used.assign(R, 0);
    for (int k = 0; k < R; ++k) {
        for (int j = 0; j < J; ++j) out.used[k] += out.assignment.x[k][j] * out.unit[k][j];
    }
    return out;
}

AssignmentMatrix extract_assignment(const FlowNetwork &net, const FlowResult &flow,
                                    const SolveOptions &opts) {
    std::vector<std::vector<std::int64_t>> x0(net.R, std::vector<std::int64_t>(net.J, 0));
    for (int k = 0; k < net.R; ++k) {
        for (int j = 0; j < net.J; ++j) {
            if (net.unit[k][j] > 0) x0[k][j] = flow.flow[net.edge_i_c(k, j)] / net.unit[k][j];
        }
    }
    Instance inst = make_instance(net.n, net.e, net.unit, net.M, net.lambda);
    // Clamp the rounded flow into the instance caps before improving.
    for (int k = 0; k < net.R; ++k) {
        for (int j = 0; j < net.J; ++j) x0[k][j] = std::min(x0[k][j], inst.cap[k][j]);
    }
    return solve_instance(inst, opts, &x0);
}

void check_constraints(const AssignmentMatrix &a, const cost::CapacityTable &table,
                       const std::vector<std::int64_t> &lambda) {
    const int R = table.replicas();
    const int J = table.types();
    for (int j = 0; j < J; ++j) {
        std::int64_t total = 0;
        for (int k = 0; k < R; ++k) total += a.x[k][j];
        if (total > lambda[j]) {
            throw std::logic_error("C1 violated for type " + std::to_string(j));
        }
    }
    for (int k = 0; k < R; ++k) {
        for (int j = 0; j < J; ++j) {
            if (a.x[k][j] > table.e[k][j]) {
                throw std::logic_error("C2 violated at replica " + std::to_string(k) + ", type " +
                                       std::to_string(j));
            }
        }
    }
    for (int k = 0; k < R; ++k) {
        NormalizedRow row = normalize_or_scale(table.n[k]);
        std::int64_t used = 0;
        for (int j = 0; j < J; ++j) {
            if (a.x[k][j] > 0 && row.units[j] == 0) {
                throw std::logic_error("C3 violated at replica " + std::to_string(k) +
                                       ": zero-capacity type " + std::to_string(j) + " assigned");
            }
            used += a.x[k][j] * row.units[j];
        }
        if (used > row.M) {
            throw std::logic_error("C3 violated at replica " + std::to_string(k));
        }
    }
}

// ---------------------------------------------------------------------------
// Dense simplex for the fractional relaxation (Bland's rule).

FractionalSolution solve_fractional(const cost::CapacityTable &table,
                                    const std::vector<std::int64_t> &lambda) {
    const int R = table.replicas();
    const int J = table.types();
    const int nvars = R * J;
    const int nrows = nvars + J + R;  // C2 bounds, C1 rows, C3 rows
    const double eps = 1e-9;

    // Tableau: nrows constraint rows + objective row; columns: vars, slacks, rhs.
    const int ncols = nvars + nrows + 1;
    std::vector<std::vector<double>> t(nrows + 1, std::vector<double>(ncols, 0.0));
    auto var = [&](int k, int j) { return k * J + j; };

    int row = 0;
    for (int k = 0; k < R; ++k) {
        for (int j = 0; j < J; ++j) {
            t[row][var(k, j)] = 1.0;
            t[row][ncols - 1] = static_cast<double>(std::max<std::int64_t>(table.e[k][j], 0));
            if (table.n[k][j] <= 0) t[row][ncols - 1] = 0.0;
            ++row;
        }
    }
    for (int j = 0; j < J; ++j) {
        for (int k = 0; k < R; ++k) t[row][var(k, j)] = 1.0;
        t[row][ncols - 1] = static_cast<double>(lambda[j]);
        ++row;
    }
    for (int k = 0; k < R; ++k) {
        for (int j = 0; j < J; ++j) {
            if (table.n[k][j] > 0) t[row][var(k, j)] = 1.0 / static_cast<double>(table.n[k][j]);
        }
        t[row][ncols - 1] = 1.0;
        ++row;
    }
    for (int r = 0; r < nrows; ++r) t[r][nvars + r] = 1.0;
    for (int v = 0; v < nvars; ++v) t[nrows][v] = -1.0;  // maximize sum f

    std::vector<int> basis(nrows);
    for (int r = 0; r < nrows; ++r) basis[r] = nvars + r;

    for (int iter = 0; iter < 100000; ++iter) {
        int pivot_col = -1;
        for (int c = 0; c < ncols - 1; ++c) {
            if (t[nrows][c] < -eps) {
                pivot_col = c;
                break;  // Bland: first negative
            }
        }
        if (pivot_col < 0) break;
        int pivot_row = -1;
        double best_ratio = 0.0;
        for (int r = 0; r < nrows; ++r) {
            if (t[r][pivot_col] > eps) {
                double ratio = t[r][ncols - 1] / t[r][pivot_col];
                if (pivot_row < 0 || ratio < best_ratio - eps ||
                    (ratio < best_ratio + eps && basis[r] < basis[pivot_row])) {
                    pivot_row = r;
                    best_ratio = ratio;
                }
            }
        }
        if (pivot_row < 0) {
            throw std::logic_error("solve_fractional: unbounded LP (malformed instance)");
        }
        double p = t[pivot_row][pivot_col];
        for (int c = 0; c < ncols; ++c) t[pivot_row][c] /= p;
        for (int r = 0; r <= nrows; ++r) {
            if (r == pivot_row) continue;
            double f = t[r][pivot_col];
            if (std::abs(f) < eps) continue;
            for (int c = 0; c < ncols; ++c) t[r][c] -= f * t[pivot_row][c];
        }
        basis[pivot_row] = pivot_col;
    }

    FractionalSolution out;
    out.f.assign(R, std::vector<double>(J, 0.0));
    for (int r = 0; r < nrows; ++r) {
        if (basis[r] < nvars) {
            out.f[basis[r] / J][basis[r] % J] = std::max(0.0, t[r][ncols - 1]);
        }
    }
    for (int k = 0; k < R; ++k) {
        for (int j = 0; j < J; ++j) out.objective += out.f[k][j];
    }
    return out;
}

}  // namespace oserve::flow
