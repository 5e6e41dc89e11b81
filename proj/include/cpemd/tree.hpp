#pragma once

#include <map>

#include "geometry.hpp"

namespace cpemd {

// ---------------------------------------------------------------------------
// Quadtree from nested randomly shifted grids.
//
// One uniform shift in [0, Phi)^d; level-l cells have side Phi/2^(l-1); a node
// is a nonempty cell; every root-to-leaf path has length exactly h. The edge
// from depth l to depth l+1 weighs Phi/2^l, so a node at depth l >= 1 carries
// parent-edge weight Phi/2^(l-1). Only nonempty cells are stored: O(n*h)
// nodes. Cells are half-open boxes, so boundary points land deterministically.
// ---------------------------------------------------------------------------

struct QuadTree {
    double phi = 0.0;  // power of two
    int height = 0;    // h: leaves at this depth
    std::size_t n_points = 0;
    std::vector<int> parent;      // per node id; root has -1
    std::vector<int> node_depth;  // per node id
    std::vector<std::vector<int>> anc;  // anc[l][i]: node of point i at depth l

    int node_count() const { return static_cast<int>(parent.size()); }
    int leaf_of(std::size_t i) const { return anc[height][i]; }

    double parent_edge_weight(int depth) const {
        return phi / std::pow(2.0, depth - 1);
    }

    // Depth of the lowest common ancestor of leaves i and j.
    int split_depth(std::size_t i, std::size_t j) const {
        int lo = 0;
        for (int l = 1; l <= height; ++l) {
            if (anc[l][i] != anc[l][j]) break;
            lo = l;
        }
        return lo;
    }

    // d_T(i, j): both root-to-leaf suffixes below the LCA.
    double distance(std::size_t i, std::size_t j) const {
        int s = split_depth(i, j);
        if (s == height) return 0.0;
        // 2 * sum_{l=s}^{h-1} Phi/2^l = Phi * (2^(2-s) - 2^(2-h))
        return phi * (std::pow(2.0, 2 - s) - std::pow(2.0, 2 - height));
    }
};

inline double round_up_pow2(double v) {
    double p = 2.0;
    while (p < v) p *= 2.0;
    return p;
}

inline QuadTree sample_quadtree(const PointSet& P, double phi, std::uint64_t seed) {
    QuadTree T;
    T.phi = round_up_pow2(std::max(phi, 2.0));
    T.height = static_cast<int>(std::llround(std::log2(T.phi))) + 1;
    T.n_points = P.size();
    const int d = P.dim;

    Rng rng(derive_seed(seed, 0x71ee));
    std::vector<double> shift(d);
    for (auto& z : shift) z = rng.uniform(0.0, T.phi);

    T.anc.assign(T.height + 1, std::vector<int>(P.size(), -1));
    T.parent.push_back(-1);  // root
    T.node_depth.push_back(0);
    for (std::size_t i = 0; i < P.size(); ++i) T.anc[0][i] = 0;

    std::vector<long long> cell(d);
    for (int l = 1; l <= T.height; ++l) {
        double side = T.phi / std::pow(2.0, l - 1);
        std::map<std::pair<int, std::vector<long long>>, int> nodes;  // (parent, cell) -> id
        for (std::size_t i = 0; i < P.size(); ++i) {
            auto p = P.point(i);
            for (int k = 0; k < d; ++k)
                cell[k] = static_cast<long long>(std::floor((p[k] - shift[k]) / side));
            auto key = std::make_pair(T.anc[l - 1][i], cell);
            auto it = nodes.find(key);
            int id;
            if (it == nodes.end()) {
                id = T.node_count();
                T.parent.push_back(T.anc[l - 1][i]);
                T.node_depth.push_back(l);
                nodes.emplace(key, id);
            } else {
                id = it->second;
            }
            T.anc[l][i] = id;
        }
    }
    return T;
}

inline double tree_distance(const QuadTree& T, std::size_t i, std::size_t j) {
    return T.distance(i, j);
}

// EMD under the tree metric: sum over non-root nodes v at depth l of the
// parent-edge weight Phi/2^(l-1) times |mu(subtree v) - nu(subtree v)|.
inline double tree_emd(const QuadTree& T, const std::vector<double>& mu,
                       const std::vector<double>& nu) {
    if (mu.size() != T.n_points || nu.size() != T.n_points)
        throw input_error("tree_emd: mass vector size mismatch");
    double sm = 0.0, sn = 0.0;
    for (double v : mu) sm += v;
    for (double v : nu) sn += v;
    if (std::abs(sm - sn) > 1e-9 * std::max({1.0, std::abs(sm), std::abs(sn)}))
        throw input_error("tree_emd: mass mismatch");

    std::vector<double> diff(T.node_count(), 0.0);
    for (std::size_t i = 0; i < T.n_points; ++i) {
        double m = mu[i] - nu[i];
        if (m == 0.0) continue;
        for (int l = 1; l <= T.height; ++l) diff[T.anc[l][i]] += m;
    }
    double total = 0.0;
    for (int v = 0; v < T.node_count(); ++v) {
        if (T.node_depth[v] == 0) continue;
        total += T.parent_edge_weight(T.node_depth[v]) * std::abs(diff[v]);
    }
    return total;
}

// ---------------------------------------------------------------------------
// Embed-and-perturb: sample a tree over the input points, then append d'
// noise coordinates averaged along each root-to-leaf path. The tree becomes a
// bi-Lipschitz embedding of the *perturbed* points, and the EMD of the
// perturbed instance brackets the original within (1+eps).
// ---------------------------------------------------------------------------

// Inner accuracy passed to the perturbation; the analysis leaves this
// constant free, and it trades EMD inflation against the guaranteed lower
// distortion. Recorded here for the tests.
constexpr double kEmbedConstant = 0.125;

inline int pad_dimension(std::size_t n) {
    return static_cast<int>(std::ceil(4.0 * std::log(std::max<std::size_t>(n, 2)))) + 8;
}

struct PerturbedInstance {
    PointSet Y;     // dimension d + d'
    QuadTree tree;  // built on the original coordinates
    double eps_inner = 0.0;
    double distortion_lower = 0.0;  // D_l: formula value eps/log2(phi)
    double distortion_upper = 0.0;  // D_u: formula value 8 ln n
    int d_prime = 0;
};

inline PerturbedInstance embed_and_perturb(const PointSet& P, double eps, std::uint64_t seed) {
    if (!(eps > 0.0 && eps < 1.0)) throw input_error("embed_and_perturb: eps must be in (0,1)");
    PerturbedInstance out;
    out.tree = sample_quadtree(P, P.phi, derive_seed(seed, 0xa11c));
    const double log_phi = std::log2(out.tree.phi);
    out.eps_inner = kEmbedConstant * eps / std::max(1.0, log_phi);
    out.distortion_lower = eps / std::max(1.0, log_phi);
    out.distortion_upper = 8.0 * std::log(std::max<std::size_t>(P.size(), 3));
    out.d_prime = pad_dimension(P.size());

    Rng rng(derive_seed(seed, 0xbead));
    // Per-node noise, in node-id order (creation order is deterministic).
    std::vector<std::vector<double>> z(out.tree.node_count());
    for (int v = 0; v < out.tree.node_count(); ++v) {
        double range = out.eps_inner * out.tree.phi / std::pow(2.0, out.tree.node_depth[v]);
        z[v].resize(out.d_prime);
        for (auto& c : z[v]) c = rng.uniform(0.0, range);
    }

    out.Y = PointSet(P.dim + out.d_prime, P.phi);
    std::vector<double> buf(P.dim + out.d_prime);
    for (std::size_t i = 0; i < P.size(); ++i) {
        auto p = P.point(i);
        std::copy(p.begin(), p.end(), buf.begin());
        std::fill(buf.begin() + P.dim, buf.end(), 0.0);
        for (int l = 0; l <= out.tree.height; ++l) {
            const auto& zv = z[out.tree.anc[l][i]];
            for (int k = 0; k < out.d_prime; ++k) buf[P.dim + k] += zv[k];
        }
        for (int k = 0; k < out.d_prime; ++k) buf[P.dim + k] /= out.d_prime;
        out.Y.push_back(buf);
    }
    return out;
}

// Tree EMD of the uniform matching instance: the first n_x leaves carry one
// unit of supply, the rest one unit of demand. This is the exponential-search
// bracket t0 (equal to the bottom-up greedy matching cost in the tree).
inline double greedy_tree_bound(const QuadTree& T, std::size_t n_x) {
    std::vector<double> mu(T.n_points, 0.0), nu(T.n_points, 0.0);
    for (std::size_t i = 0; i < T.n_points; ++i)
        (i < n_x ? mu[i] : nu[i]) = 1.0;
    if (n_x * 2 != T.n_points) throw input_error("greedy_tree_bound: |X| != |Y|");
    return tree_emd(T, mu, nu);
}

}  // namespace cpemd
