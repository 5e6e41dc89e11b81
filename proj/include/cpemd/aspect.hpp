#pragma once

#include <numeric>

#include "exact.hpp"
#include "tree.hpp"

namespace cpemd {

// ---------------------------------------------------------------------------
// Reduction to polynomial aspect ratio: rough estimate -> randomly shifted
// grid partition -> per-part padding -> integer rescale. Output parts have
// integer coordinates in [1, phi] and pairwise distances >= 1.
// ---------------------------------------------------------------------------

// Coarse EMD estimate by scaled Gaussian projection to one dimension. With
// probability 1-o(1) the output lies in [EMD, ~n^2 sqrt(d) polylog * EMD].
inline double rough_estimate(const PointSet& X, const SupplyDemand& b, std::uint64_t seed) {
    if (b.size() != X.size()) throw input_error("rough_estimate: |b| != |X|");
    if (!b.balanced()) throw input_error("rough_estimate: b does not sum to zero");
    std::size_t n = X.size();
    if (n == 0) return 0.0;
    bool all_zero = true;
    for (auto v : b.b)
        if (v != 0) all_zero = false;
    if (all_zero) return 0.0;

    Rng rng(derive_seed(seed, 0x90e5));
    const double scale = static_cast<double>(n) * static_cast<double>(n) *
                         std::sqrt(static_cast<double>(X.dim));
    std::vector<double> g(X.dim);
    for (auto& v : g) v = rng.normal();
    std::vector<std::pair<double, long long>> proj(n);
    for (std::size_t i = 0; i < n; ++i) {
        double dot = 0.0;
        auto p = X.point(i);
        for (int k = 0; k < X.dim; ++k) dot += p[k] * g[k];
        proj[i] = {scale * dot, b.b[i]};
    }
    std::sort(proj.begin(), proj.end());
    double total = 0.0;
    double prefix = 0.0;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        prefix += static_cast<double>(proj[k].second);
        total += std::abs(prefix) * (proj[k + 1].first - proj[k].first);
    }
    return total;
}

// One shifted-grid attempt; empty result means some part had nonzero net
// supply and the caller should resample the shift.
inline std::optional<std::vector<std::pair<PointSet, SupplyDemand>>> grid_partition_once(
    const PointSet& X, const SupplyDemand& b, double eta, std::uint64_t seed) {
    std::size_t n = X.size();
    Rng rng(derive_seed(seed, 0x6d1d));
    double side = 100.0 * eta;
    std::map<std::vector<long long>, std::vector<std::uint32_t>> cells;
    std::vector<double> shift(X.dim);
    for (auto& s : shift) s = rng.uniform(0.0, std::max(side, 1e-300));
    std::vector<long long> cell(X.dim);
    for (std::uint32_t i = 0; i < n; ++i) {
        auto p = X.point(i);
        if (side > 0.0) {
            for (int k = 0; k < X.dim; ++k)
                cell[k] = static_cast<long long>(std::floor((p[k] - shift[k]) / side));
        } else {
            // eta = 0: the zero-side limit groups exactly coincident points.
            for (int k = 0; k < X.dim; ++k)
                cell[k] = static_cast<long long>(std::llround(p[k] * 1e6));
        }
        cells[cell].push_back(i);
    }
    std::vector<std::pair<PointSet, SupplyDemand>> parts;
    for (auto& [key, members] : cells) {
        PointSet P(X.dim, X.phi);
        SupplyDemand bp;
        long long s = 0;
        for (auto i : members) {
            P.push_back(X.point(i));
            bp.b.push_back(b.b[i]);
            s += b.b[i];
        }
        if (s != 0) return std::nullopt;
        parts.emplace_back(std::move(P), std::move(bp));
    }
    return parts;
}

inline std::vector<std::pair<PointSet, SupplyDemand>> grid_partition(const PointSet& X,
                                                                     const SupplyDemand& b,
                                                                     double eta,
                                                                     std::uint64_t seed,
                                                                     int max_retries = 20) {
    for (int r = 0; r < max_retries; ++r) {
        auto parts = grid_partition_once(X, b, eta, derive_seed(seed, 0x9a27, r));
        if (parts) return std::move(*parts);
    }
    throw run_error("grid_partition: retries exhausted without balanced parts");
}

// Appends d' = Theta(log n) coordinates uniform in [0, eps_pad], lifting the
// minimum pairwise distance to Omega(eps_pad * d') while changing the EMD by
// at most O(eps_pad * n * log n).
inline PointSet pad_min_distance(const PointSet& X, double eps_pad, std::uint64_t seed) {
    if (!(eps_pad > 0.0)) throw input_error("pad_min_distance: eps_pad must be positive");
    int dp = pad_dimension(X.size());
    Rng rng(derive_seed(seed, 0x9ad0));
    PointSet out(X.dim + dp, X.phi);
    std::vector<double> buf(X.dim + dp);
    for (std::size_t i = 0; i < X.size(); ++i) {
        auto p = X.point(i);
        std::copy(p.begin(), p.end(), buf.begin());
        for (int k = 0; k < dp; ++k) buf[X.dim + k] = rng.uniform(0.0, eps_pad);
        out.push_back(buf);
    }
    return out;
}

struct ReducedInstance {
    struct Part {
        PointSet points;   // integer coordinates in [1, phi]
        SupplyDemand b;
        double scale = 1.0;  // original-unit EMD = integer-unit EMD / scale
    };
    std::vector<Part> parts;
    double phi = 0.0;  // max over parts
};

namespace detail {

inline double min_pairwise_distance(const PointSet& P) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < P.size(); ++i)
        for (std::size_t j = i + 1; j < P.size(); ++j)
            best = std::min(best, l1_distance(P.point(i), P.point(j)));
    return best;
}

inline double max_pairwise_distance(const PointSet& P) {
    double best = 0.0;
    for (std::size_t i = 0; i < P.size(); ++i)
        for (std::size_t j = i + 1; j < P.size(); ++j)
            best = std::max(best, l1_distance(P.point(i), P.point(j)));
    return best;
}

}  // namespace detail

// Full reduction: with probability >= 0.9 the summed part EMDs are within
// (1 +- O(eps)) of EMD_X(b), every part has integer coordinates in [1, phi]
// with phi = poly(n d / eps), and pairwise distances at least 1.
inline ReducedInstance reduce_aspect_ratio(const PointSet& X, const SupplyDemand& b,
                                           double eps, std::uint64_t seed) {
    if (!(eps > 0.0 && eps < 1.0)) throw input_error("reduce_aspect_ratio: eps in (0,1)");
    if (!b.balanced()) throw input_error("reduce_aspect_ratio: b does not sum to zero");
    ReducedInstance out;
    bool all_zero = true;
    for (auto v : b.b)
        if (v != 0) all_zero = false;
    if (all_zero || X.size() == 0) return out;

    double eta = rough_estimate(X, b, derive_seed(seed, 1));
    auto parts = grid_partition(X, b, eta, derive_seed(seed, 2));

    std::size_t part_index = 0;
    for (auto& [P, bp] : parts) {
        ++part_index;
        bool zero = true;
        for (auto v : bp.b)
            if (v != 0) zero = false;
        if (zero) continue;  // contributes nothing to the EMD

        std::size_t m = P.size();
        double d_sqrt = std::sqrt(static_cast<double>(P.dim));
        double part_eta = rough_estimate(P, bp, derive_seed(seed, 3, part_index));
        // Certified-ish lower bound on the part EMD: the projection contracts
        // l1 distances by at most ~n^2 sqrt(d) log n.
        double logn = std::log(static_cast<double>(m) + 3.0);
        double scale_lb =
            part_eta / (static_cast<double>(m) * static_cast<double>(m) * d_sqrt * 4.0 * logn);
        double eps_pad = eps * scale_lb / (static_cast<double>(m) * logn);
        if (!(eps_pad > 0.0)) throw run_error("reduce_aspect_ratio: degenerate part estimate");

        PointSet padded;
        double mind = 0.0;
        for (int attempt = 0; attempt < 5; ++attempt) {
            padded = pad_min_distance(P, eps_pad, derive_seed(seed, 4 + attempt, part_index));
            mind = detail::min_pairwise_distance(padded);
            if (mind > 0.0) break;
        }
        if (!(mind > 0.0)) throw run_error("reduce_aspect_ratio: could not separate points");

        // Rescale so the minimum distance maps to d/eps, translate into the
        // positive orthant, and round to integers; rounding then perturbs each
        // distance by at most a (1 +- eps) factor.
        int dt = padded.dim;
        double scale = (static_cast<double>(dt) / eps) / mind;
        std::vector<double> lo(dt, std::numeric_limits<double>::infinity());
        for (std::size_t i = 0; i < m; ++i) {
            auto p = padded.point(i);
            for (int k = 0; k < dt; ++k) lo[k] = std::min(lo[k], p[k]);
        }
        PointSet Q(dt, 0.0);
        std::vector<double> buf(dt);
        for (std::size_t i = 0; i < m; ++i) {
            auto p = padded.point(i);
            for (int k = 0; k < dt; ++k)
                buf[k] = std::max(1.0, std::round((p[k] - lo[k]) * scale) + 1.0);
            Q.push_back(buf);
        }
        double max_coord = 1.0;
        for (double v : Q.data) max_coord = std::max(max_coord, v);
        Q.phi = round_up_pow2(std::max(max_coord, detail::max_pairwise_distance(Q)));
        out.phi = std::max(out.phi, Q.phi);
        out.parts.push_back({std::move(Q), bp, scale});
    }
    return out;
}

}  // namespace cpemd
