#pragma once

#include <functional>
#include <limits>
#include <map>

#include "geometry.hpp"

namespace cpemd {

// ---------------------------------------------------------------------------
// Exact assignment (perfect matching) via shortest augmenting paths with
// potentials, O(n^3). Deterministic; ties resolve to the smallest index.
// ---------------------------------------------------------------------------

inline double solve_assignment(std::size_t n, const std::function<double(int, int)>& cost,
                               std::vector<int>* match_out = nullptr) {
    const double inf = std::numeric_limits<double>::infinity();
    // JV-style: job[j] = row assigned to column j; 1-based sentinel column 0.
    std::vector<int> job(n + 1, -1);
    std::vector<double> ys(n, 0.0), yt(n + 1, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        int cur_col = static_cast<int>(n);  // sentinel
        job[cur_col] = static_cast<int>(r);
        std::vector<double> min_to(n + 1, inf);
        std::vector<int> prv(n + 1, -1);
        std::vector<char> in_tree(n + 1, 0);
        int col = cur_col;
        while (job[col] != -1) {
            in_tree[col] = 1;
            int row = job[col];
            double delta = inf;
            int next_col = -1;
            for (std::size_t j = 0; j < n; ++j) {
                if (in_tree[j]) continue;
                double c = cost(row, static_cast<int>(j)) - ys[row] - yt[j];
                if (c < min_to[j]) {
                    min_to[j] = c;
                    prv[j] = col;
                }
                if (min_to[j] < delta) {
                    delta = min_to[j];
                    next_col = static_cast<int>(j);
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (in_tree[j]) {
                    ys[job[j]] += delta;
                    yt[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            col = next_col;
        }
        while (col != static_cast<int>(n)) {
            int p = prv[col];
            job[col] = job[p];
            col = p;
        }
    }
    double total = 0.0;
    std::vector<int> match(n, -1);
    for (std::size_t j = 0; j < n; ++j) {
        if (job[j] >= 0) {
            match[job[j]] = static_cast<int>(j);
            total += cost(job[j], static_cast<int>(j));
        }
    }
    if (match_out) *match_out = std::move(match);
    return total;
}

inline double exact_emd(const PointSet& X, const PointSet& Y,
                        std::vector<int>* match_out = nullptr) {
    if (X.size() != Y.size()) throw input_error("exact_emd: |X| != |Y|");
    if (X.dim != Y.dim) throw input_error("exact_emd: dimension mismatch");
    if (X.size() == 0) return 0.0;
    return solve_assignment(
        X.size(), [&](int i, int j) { return l1_distance(X.point(i), Y.point(j)); }, match_out);
}

// ---------------------------------------------------------------------------
// Min-cost transportation (uncapacitated bipartite flow) by successive
// shortest paths with potentials. Supplies/demands may be real; each
// augmentation saturates a node, so at most n+m augmentations run.
// ---------------------------------------------------------------------------

struct FlowSolution {
    std::map<std::uint64_t, double> flow;  // (supply index, demand index) -> mass
    double cost = 0.0;
};

inline FlowSolution min_cost_transport(std::size_t ns, std::size_t nd,
                                       const std::function<double(int, int)>& cost,
                                       std::vector<double> supply, std::vector<double> demand) {
    const double inf = std::numeric_limits<double>::infinity();
    double total_s = 0.0, total_d = 0.0;
    for (double v : supply) total_s += v;
    for (double v : demand) total_d += v;
    if (std::abs(total_s - total_d) > 1e-7 * std::max({1.0, total_s, total_d}))
        throw input_error("min_cost_transport: supply and demand must balance");

    FlowSolution sol;
    if (ns == 0 || nd == 0 || total_s <= 0.0) return sol;

    // Reduced cost convention: rc(i->j) = c_ij + pi_s[i] - pi_d[j] >= 0, with
    // backward arcs on flow-carrying edges. After each Dijkstra, potentials
    // absorb the (target-capped) distances so tight arcs stay tight.
    std::vector<double> pi_s(ns, 0.0), pi_d(nd, 0.0);
    const double tiny = 1e-12 * std::max(1.0, total_s);
    std::vector<std::vector<int>> back(nd);  // demand j -> supplies with flow

    for (;;) {
        bool any = false;
        for (double v : supply)
            if (v > tiny) { any = true; break; }
        if (!any) break;

        for (auto& v : back) v.clear();
        for (auto& [key, f] : sol.flow) {
            if (f <= tiny) continue;
            auto [i, j] = key_pair(key);
            back[j].push_back(static_cast<int>(i));
        }

        std::vector<double> dist_d(nd, inf), dist_s(ns, inf);
        std::vector<int> par_d(nd, -1), par_s(ns, -1);
        std::vector<char> done_d(nd, 0), done_s(ns, 0);
        for (std::size_t i = 0; i < ns; ++i)
            if (supply[i] > tiny) dist_s[i] = 0.0;

        for (;;) {
            double best = inf;
            int bi = -1;
            bool is_d = false;
            for (std::size_t i = 0; i < ns; ++i)
                if (!done_s[i] && dist_s[i] < best) { best = dist_s[i]; bi = static_cast<int>(i); is_d = false; }
            for (std::size_t j = 0; j < nd; ++j)
                if (!done_d[j] && dist_d[j] < best) { best = dist_d[j]; bi = static_cast<int>(j); is_d = true; }
            if (bi < 0) break;
            if (is_d) {
                done_d[bi] = 1;
                for (int i : back[bi]) {
                    double rc = -cost(i, bi) - pi_s[i] + pi_d[bi];
                    if (rc < 0.0) rc = 0.0;
                    if (dist_d[bi] + rc < dist_s[i]) {
                        dist_s[i] = dist_d[bi] + rc;
                        par_s[i] = bi;
                    }
                }
            } else {
                done_s[bi] = 1;
                for (std::size_t j = 0; j < nd; ++j) {
                    double rc = cost(bi, static_cast<int>(j)) + pi_s[bi] - pi_d[j];
                    if (rc < 0.0) rc = 0.0;
                    if (dist_s[bi] + rc < dist_d[j]) {
                        dist_d[j] = dist_s[bi] + rc;
                        par_d[j] = bi;
                    }
                }
            }
        }

        int tgt = -1;
        double bestd = inf;
        for (std::size_t j = 0; j < nd; ++j)
            if (demand[j] > tiny && dist_d[j] < bestd) { bestd = dist_d[j]; tgt = static_cast<int>(j); }
        if (tgt < 0) throw run_error("min_cost_transport: no augmenting path");

        for (std::size_t i = 0; i < ns; ++i) pi_s[i] += std::min(dist_s[i], bestd);
        for (std::size_t j = 0; j < nd; ++j) pi_d[j] += std::min(dist_d[j], bestd);

        // Bottleneck along the alternating path ending at tgt.
        double push = demand[tgt];
        for (int j = tgt;;) {
            int i = par_d[j];
            if (par_s[i] < 0) {
                push = std::min(push, supply[i]);
                break;
            }
            int jb = par_s[i];
            push = std::min(push, sol.flow[pair_key(i, jb)]);
            j = jb;
        }
        for (int j = tgt;;) {
            int i = par_d[j];
            sol.flow[pair_key(i, j)] += push;
            if (par_s[i] < 0) {
                supply[i] -= push;
                break;
            }
            int jb = par_s[i];
            sol.flow[pair_key(i, jb)] -= push;
            j = jb;
        }
        demand[tgt] -= push;
    }

    for (auto it = sol.flow.begin(); it != sol.flow.end();) {
        if (it->second <= tiny) it = sol.flow.erase(it);
        else ++it;
    }
    sol.cost = 0.0;
    for (auto& [key, f] : sol.flow) {
        auto [i, j] = key_pair(key);
        sol.cost += f * cost(i, j);
    }
    return sol;
}

// EMD_X(b): min-cost flow from the positive part of b to the negative part,
// over an arbitrary metric given as a distance callable on [n] x [n].
inline FlowSolution exact_emd_supply_metric(std::size_t n,
                                            const std::function<double(int, int)>& dist,
                                            const std::vector<double>& b) {
    if (b.size() != n) throw input_error("exact_emd_supply: |b| != n");
    double s = 0.0;
    for (double v : b) s += v;
    if (std::abs(s) > 1e-9 * std::max(1.0, std::abs(s)) && std::abs(s) > 1e-9)
        throw input_error("exact_emd_supply: b does not sum to zero");
    std::vector<int> pos, neg;
    std::vector<double> supply, demand;
    for (std::size_t i = 0; i < n; ++i) {
        if (b[i] > 0) pos.push_back(static_cast<int>(i)), supply.push_back(b[i]);
        else if (b[i] < 0) neg.push_back(static_cast<int>(i)), demand.push_back(-b[i]);
    }
    FlowSolution inner = min_cost_transport(
        pos.size(), neg.size(), [&](int i, int j) { return dist(pos[i], neg[j]); }, supply,
        demand);
    FlowSolution out;
    out.cost = inner.cost;
    for (auto& [key, f] : inner.flow) {
        auto [i, j] = key_pair(key);
        out.flow[pair_key(pos[i], neg[j])] = f;
    }
    return out;
}

inline FlowSolution exact_emd_supply(const PointSet& X, const SupplyDemand& b) {
    if (b.size() != X.size()) throw input_error("exact_emd_supply: |b| != |X|");
    if (!b.balanced()) throw input_error("exact_emd_supply: b does not sum to zero");
    std::vector<double> bd(b.b.begin(), b.b.end());
    return exact_emd_supply_metric(
        X.size(), [&](int i, int j) { return l1_distance(X.point(i), X.point(j)); }, bd);
}

// ---------------------------------------------------------------------------
// 1-D EMD on sorted positions: prefix-sum identity
//   sum_k |sum_{i<=k} b_i| * (pos_{k+1} - pos_k).
// ---------------------------------------------------------------------------

inline double one_d_emd(const std::vector<double>& positions, const SupplyDemand& b) {
    if (positions.size() != b.size()) throw input_error("one_d_emd: size mismatch");
    for (std::size_t i = 1; i < positions.size(); ++i)
        if (positions[i] < positions[i - 1]) throw input_error("one_d_emd: positions not sorted");
    if (!b.balanced()) throw input_error("one_d_emd: b does not sum to zero");
    double total = 0.0;
    long long prefix = 0;
    for (std::size_t k = 0; k + 1 < positions.size(); ++k) {
        prefix += b.b[k];
        total += std::abs(static_cast<double>(prefix)) * (positions[k + 1] - positions[k]);
    }
    return total;
}

// Real-supply variant used by the rough estimator.
inline double one_d_emd_real(const std::vector<double>& positions,
                             const std::vector<double>& b) {
    double total = 0.0, prefix = 0.0;
    for (std::size_t k = 0; k + 1 < positions.size(); ++k) {
        prefix += b[k];
        total += std::abs(prefix) * (positions[k + 1] - positions[k]);
    }
    return total;
}

// ---------------------------------------------------------------------------
// Brute-force closest pair, lexicographic tie-break.
// ---------------------------------------------------------------------------

struct ClosestPair {
    std::uint32_t i = 0, j = 0;
    double dist = 0.0;
};

inline ClosestPair brute_closest_pair(const PointSet& A, const PointSet& B) {
    if (A.size() == 0 || B.size() == 0) throw input_error("brute_closest_pair: empty set");
    ClosestPair best{0, 0, std::numeric_limits<double>::infinity()};
    for (std::uint32_t i = 0; i < A.size(); ++i)
        for (std::uint32_t j = 0; j < B.size(); ++j) {
            double d = l1_distance(A.point(i), B.point(j));
            if (d < best.dist) best = {i, j, d};
        }
    return best;
}

// ---------------------------------------------------------------------------
// Explicit lambda table: probabilities proportional to
//   w_{ij,sigma} = exp(eta * sigma * P_ij * D_ij / C_ij),
// materialized at desk scale. Log-sum-exp throughout, so exponents up to 1e4
// normalize without overflow.
// ---------------------------------------------------------------------------

struct LambdaTable {
    std::size_t n = 0;
    std::vector<double> prob;  // index ((i*n)+j)*2 + (sigma<0)

    double p(std::uint32_t i, std::uint32_t j, int sigma) const {
        return prob[(static_cast<std::size_t>(i) * n + j) * 2 + (sigma < 0 ? 1 : 0)];
    }
};

inline LambdaTable explicit_lambda(double eta, const std::vector<std::vector<double>>& C,
                                   const std::vector<std::vector<double>>& D,
                                   const std::vector<std::vector<int>>& P) {
    std::size_t n = C.size();
    LambdaTable tab;
    tab.n = n;
    tab.prob.assign(n * n * 2, 0.0);
    std::vector<double> logw(n * n * 2);
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (int s = 0; s < 2; ++s) {
                double sigma = s == 0 ? 1.0 : -1.0;
                double lw = eta * sigma * P[i][j] * D[i][j] / C[i][j];
                logw[(i * n + j) * 2 + s] = lw;
                m = std::max(m, lw);
            }
    double z = 0.0;
    for (double lw : logw) z += std::exp(lw - m);
    double logz = m + std::log(z);
    for (std::size_t idx = 0; idx < logw.size(); ++idx)
        tab.prob[idx] = std::exp(logw[idx] - logz);
    return tab;
}

inline double tv_distance(const std::vector<double>& p, const std::vector<double>& q) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
    return 0.5 * s;
}

}  // namespace cpemd
