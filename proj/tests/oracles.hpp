// Independent reference implementations used only to check the production
// code. Nothing here may call into the library paths under test.
#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <queue>
#include <vector>

namespace oracles {

// Edmonds-Karp max flow over an edge list (BFS augmenting paths).
inline std::int64_t edmonds_karp(int num_nodes,
                                 const std::vector<std::tuple<int, int, std::int64_t>> &edges,
                                 int source, int sink) {
    const int m = static_cast<int>(edges.size());
    std::vector<std::vector<std::int64_t>> cap(num_nodes, std::vector<std::int64_t>(num_nodes, 0));
    for (int i = 0; i < m; ++i) {
        auto [u, v, c] = edges[i];
        cap[u][v] += c;
    }
    std::int64_t flow = 0;
    while (true) {
        std::vector<int> parent(num_nodes, -1);
        parent[source] = source;
        std::queue<int> bfs;
        bfs.push(source);
        while (!bfs.empty() && parent[sink] < 0) {
            int u = bfs.front();
            bfs.pop();
            for (int v = 0; v < num_nodes; ++v) {
                if (parent[v] < 0 && cap[u][v] > 0) {
                    parent[v] = u;
                    bfs.push(v);
                }
            }
        }
        if (parent[sink] < 0) break;
        std::int64_t aug = std::numeric_limits<std::int64_t>::max();
        for (int v = sink; v != source; v = parent[v]) aug = std::min(aug, cap[parent[v]][v]);
        for (int v = sink; v != source; v = parent[v]) {
            cap[parent[v]][v] -= aug;
            cap[v][parent[v]] += aug;
        }
        flow += aug;
    }
    return flow;
}

// Brute-force integer optimum of
//   max sum x  s.t.  x <= e, sum_k x[k][j] <= lambda[j],
//                    sum_j x[k][j]/n[k][j] <= 1 per replica k.
// Type-major recursion; C3 checked with exact product arithmetic, so the
// traversal and feasibility logic share nothing with the production solver.
struct IpOracle {
    const std::vector<std::vector<std::int64_t>> &n;
    const std::vector<std::vector<std::int64_t>> &e;
    const std::vector<std::int64_t> &lambda;
    int R;
    int J;
    std::vector<__int128> denom;             // per replica: prod of positive n
    std::vector<__int128> used;              // per replica: scaled C3 usage
    std::vector<std::vector<__int128>> unit; // per cell: denom / n
    std::vector<std::int64_t> lam;
    std::int64_t best = 0;
    std::int64_t count = 0;

    IpOracle(const std::vector<std::vector<std::int64_t>> &n_,
             const std::vector<std::vector<std::int64_t>> &e_, const std::vector<std::int64_t> &lambda_)
        : n(n_), e(e_), lambda(lambda_), R(static_cast<int>(n_.size())),
          J(static_cast<int>(lambda_.size())), lam(lambda_) {
        denom.assign(R, 1);
        used.assign(R, 0);
        unit.assign(R, std::vector<__int128>(J, 0));
        for (int k = 0; k < R; ++k) {
            for (int j = 0; j < J; ++j) {
                if (n[k][j] > 0) denom[k] *= n[k][j];
            }
            for (int j = 0; j < J; ++j) {
                if (n[k][j] > 0) unit[k][j] = denom[k] / n[k][j];
            }
        }
    }

    std::int64_t cell_max(int k, int j) const {
        if (n[k][j] <= 0) return 0;
        std::int64_t by_budget = static_cast<std::int64_t>((denom[k] - used[k]) / unit[k][j]);
        return std::min({e[k][j], lam[j], by_budget});
    }

    // Optimistic bound over all remaining cells (type-major order).
    std::int64_t bound_from(int j0, int k0) const {
        std::int64_t total = 0;
        for (int j = j0; j < J; ++j) {
            std::int64_t lam_left = lam[j];
            for (int k = (j == j0 ? k0 : 0); k < R && lam_left > 0; ++k) {
                std::int64_t c = std::min(lam_left, cell_max(k, j));
                total += c;
                lam_left -= c;
            }
        }
        return total;
    }

    void solve(int j, int k) {
        if (j == J) {
            best = std::max(best, count);
            return;
        }
        int nj = j, nk = k + 1;
        if (nk == R) {
            nj = j + 1;
            nk = 0;
        }
        if (count + bound_from(j, k) <= best) return;
        std::int64_t hi = cell_max(k, j);
        for (std::int64_t v = hi; v >= 0; --v) {
            lam[j] -= v;
            used[k] += unit[k][j] * v;
            count += v;
            solve(nj, nk);
            count -= v;
            used[k] -= unit[k][j] * v;
            lam[j] += v;
        }
    }

    std::int64_t optimum() {
        best = 0;
        solve(0, 0);
        return best;
    }
};

inline std::int64_t ip_optimum(const std::vector<std::vector<std::int64_t>> &n,
                               const std::vector<std::vector<std::int64_t>> &e,
                               const std::vector<std::int64_t> &lambda) {
    IpOracle oracle(n, e, lambda);
    return oracle.optimum();
}

// Nearest-rank percentile by explicit sort-and-index.
inline double percentile_sorted(std::vector<double> values, int p) {
    std::sort(values.begin(), values.end());
    std::size_t rank = std::min(values.size(), p * values.size() / 100 + 1);
    return values[rank - 1];
}

}  // namespace oracles
