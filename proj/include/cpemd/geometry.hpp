#pragma once

#include <map>
#include <optional>
#include <unordered_set>

#include "core.hpp"

namespace cpemd {

inline double l1_distance(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw input_error("l1_distance: dimension mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += std::abs(x[k] - y[k]);
    return s;
}

// ---------------------------------------------------------------------------
// Power-of-(1+eps) levels.
//
// psi_level returns the unique integer with (1+eps)^psi <= dist < (1+eps)^{psi+1}.
// Floating-point log is the only platform-dependent step, so values within
// 2^-40 relative distance of a power boundary are snapped to the boundary
// before flooring.
// ---------------------------------------------------------------------------

constexpr double kBoundarySnap = 0x1.0p-40;

inline int psi_of_distance(double dist, double eps) {
    if (!(eps > 0.0 && eps <= 1.0)) throw input_error("psi_level: eps must be in (0,1]");
    if (dist < 1.0 - kBoundarySnap)
        throw input_error("psi_level: distance < 1 (instance not aspect-ratio reduced)");
    double log_base = std::log1p(eps);
    double r = std::log(dist) / log_base;
    int k = static_cast<int>(std::floor(r));
    // Snap-then-verify around the floor candidate.
    for (int cand = k - 1; cand <= k + 1; ++cand) {
        double lo = std::pow(1.0 + eps, cand);
        double hi = lo * (1.0 + eps);
        if (std::abs(dist - lo) <= kBoundarySnap * lo) return cand;
        if (std::abs(dist - hi) <= kBoundarySnap * hi) return cand + 1;
        if (dist >= lo && dist < hi) return cand;
    }
    return k;  // unreachable for finite inputs
}

inline int psi_level(std::span<const double> x, std::span<const double> y, double eps) {
    return psi_of_distance(l1_distance(x, y), eps);
}

// Level-set convention: L_t holds the pairs with (1+eps)^{t-1} <= dist < (1+eps)^t,
// i.e. psi = t-1. The prefix set is everything with dist < (1+eps)^t.
inline int level_of_distance(double dist, double eps) { return psi_of_distance(dist, eps) + 1; }

inline bool prefix_member_distance(double dist, int t, double eps) {
    if (dist < 1.0 - kBoundarySnap) return t >= 1;  // degenerate, below the first level
    return psi_of_distance(dist, eps) < t;
}

inline bool prefix_member(std::span<const double> x, std::span<const double> y, int t,
                          double eps) {
    return prefix_member_distance(l1_distance(x, y), t, eps);
}

// ---------------------------------------------------------------------------
// Consistent rounding C(S).
//
// C_ij = (1+eps)^(psi_ij - 2*S_ij), chosen once before any MWU round. The
// down-rounding set S is a hash set of pair keys; membership is ignored for
// psi < 2 so that C >= 1 always holds.
// ---------------------------------------------------------------------------

class RoundingState {
public:
    RoundingState() = default;
    RoundingState(const PointSet& X, const PointSet& Y, double eps)
        : X_(&X), Y_(&Y), eps_(eps) {}

    void set_down_set(std::unordered_set<std::uint64_t> S) { S_ = std::move(S); }
    const std::unordered_set<std::uint64_t>& down_set() const { return S_; }
    double eps() const { return eps_; }

    int psi(std::uint32_t i, std::uint32_t j) const {
        return psi_level(X_->point(i), Y_->point(j), eps_);
    }
    bool down(std::uint32_t i, std::uint32_t j) const {
        return psi(i, j) >= 2 && S_.count(pair_key(i, j)) > 0;
    }
    double log_cost(std::uint32_t i, std::uint32_t j) const {
        int p = psi(i, j);
        int e = (p >= 2 && S_.count(pair_key(i, j)) > 0) ? p - 2 : p;
        return e * std::log1p(eps_);
    }
    double cost(std::uint32_t i, std::uint32_t j) const { return std::exp(log_cost(i, j)); }

    double distance(std::uint32_t i, std::uint32_t j) const {
        return l1_distance(X_->point(i), Y_->point(j));
    }
    int level(std::uint32_t i, std::uint32_t j) const { return psi(i, j) + 1; }

    const PointSet& X() const { return *X_; }
    const PointSet& Y() const { return *Y_; }

private:
    const PointSet* X_ = nullptr;
    const PointSet* Y_ = nullptr;
    double eps_ = 0.0;
    std::unordered_set<std::uint64_t> S_;
};

inline double rounded_cost(std::uint32_t i, std::uint32_t j, const RoundingState& r) {
    return r.cost(i, j);
}

// Explicit level sets, for exact oracles and desk-scale verification.
// levels[t] lists the pairs of L_t; index 0 is unused (all distances >= 1).
struct LevelSets {
    int max_level = 0;
    std::vector<std::vector<std::uint64_t>> levels;
};

inline LevelSets brute_level_sets(const PointSet& X, const PointSet& Y, double eps) {
    LevelSets ls;
    for (std::uint32_t i = 0; i < X.size(); ++i)
        for (std::uint32_t j = 0; j < Y.size(); ++j) {
            int t = level_of_distance(l1_distance(X.point(i), Y.point(j)), eps);
            if (t >= static_cast<int>(ls.levels.size())) ls.levels.resize(t + 1);
            ls.levels[t].push_back(pair_key(i, j));
            ls.max_level = std::max(ls.max_level, t);
        }
    return ls;
}

// ---------------------------------------------------------------------------
// Duplicate cancellation: coincident X/Y pairs contribute zero cost and can
// be matched and removed up front (multiset semantics).
// ---------------------------------------------------------------------------

inline std::pair<PointSet, PointSet> dedup_and_cancel(const PointSet& X, const PointSet& Y) {
    if (X.dim != Y.dim) throw input_error("dedup_and_cancel: dimension mismatch");
    std::map<std::vector<double>, int> counts;
    for (std::size_t i = 0; i < X.size(); ++i) {
        auto p = X.point(i);
        counts[std::vector<double>(p.begin(), p.end())]++;
    }
    PointSet Yout(Y.dim, Y.phi);
    for (std::size_t j = 0; j < Y.size(); ++j) {
        auto p = Y.point(j);
        std::vector<double> key(p.begin(), p.end());
        auto it = counts.find(key);
        if (it != counts.end() && it->second > 0) {
            it->second--;  // cancel one X copy against this Y point
        } else {
            Yout.push_back(p);
        }
    }
    PointSet Xout(X.dim, X.phi);
    for (std::size_t i = 0; i < X.size(); ++i) {
        auto p = X.point(i);
        std::vector<double> key(p.begin(), p.end());
        auto it = counts.find(key);
        if (it->second > 0) {
            Xout.push_back(p);
            it->second--;
        }
    }
    return {std::move(Xout), std::move(Yout)};
}

}  // namespace cpemd
