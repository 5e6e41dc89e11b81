#pragma once

#include <set>
#include <unordered_set>

#include "geometry.hpp"

namespace cpemd {

// ---------------------------------------------------------------------------
// Dual state and its rounding: D_ij is |alpha_i - beta_j| rounded down to a
// power of (1+chi) with D <= |diff| <= (1+chi) D, P_ij = sign(alpha_i -
// beta_j) with sign(0) = +1. Duals are integers, so nonzero differences have
// exponent h >= 0.
// ---------------------------------------------------------------------------

struct DualState {
    std::vector<long long> alpha, beta;
    double chi = 0.0;
};

class RoundedDuals {
public:
    explicit RoundedDuals(const DualState& s) : s_(&s), log_base_(std::log1p(s.chi)) {
        if (!(s.chi > 0.0)) throw input_error("RoundedDuals: chi must be positive");
    }

    int sign(std::uint32_t i, std::uint32_t j) const {
        return s_->alpha[i] - s_->beta[j] >= 0 ? 1 : -1;
    }
    long long diff(std::uint32_t i, std::uint32_t j) const {
        return s_->alpha[i] - s_->beta[j];
    }
    int exponent_of(long long abs_diff) const {
        double r = std::log(static_cast<double>(abs_diff)) / log_base_;
        int k = static_cast<int>(std::floor(r));
        for (int cand = k - 1; cand <= k + 1; ++cand) {
            double lo = std::pow(1.0 + s_->chi, cand);
            double hi = lo * (1.0 + s_->chi);
            if (std::abs(abs_diff - lo) <= kBoundarySnap * lo) return cand;
            if (std::abs(abs_diff - hi) <= kBoundarySnap * hi) return cand + 1;
            if (abs_diff >= lo && abs_diff < hi) return cand;
        }
        return k;
    }
    double rounded(std::uint32_t i, std::uint32_t j) const {
        long long d = std::llabs(diff(i, j));
        if (d == 0) return 0.0;
        return std::pow(1.0 + s_->chi, exponent_of(d));
    }
    double chi() const { return s_->chi; }
    const DualState& state() const { return *s_; }

private:
    const DualState* s_;
    double log_base_;
};

// ---------------------------------------------------------------------------
// Rectangle partition of [n] x [n] into n^(1/4)-sided combinatorial
// rectangles on which the rounded dual difference D is constant, plus an
// explicit leftover set E of O(n^(7/4)) pairs. Zero differences are grouped
// by equal dual values; each signed exponent class is swept in sorted order
// with sqrt(n)-sized row blocks.
// ---------------------------------------------------------------------------

struct RectanglePartition {
    struct Rect {
        std::vector<std::uint32_t> rows, cols;  // original indices
        double kappa = 0.0;                     // constant D value on the rect
    };
    std::vector<Rect> rects;
    std::vector<std::uint64_t> leftover;  // E, explicit pair keys
};

inline RectanglePartition partition_rectangles(const DualState& state, std::size_t n) {
    if (state.alpha.size() != n || state.beta.size() != n)
        throw input_error("partition_rectangles: dual size mismatch");
    RoundedDuals rd(state);
    RectanglePartition out;

    const std::size_t block = static_cast<std::size_t>(
        std::ceil(std::sqrt(static_cast<double>(n))));
    const std::size_t chunk = static_cast<std::size_t>(
        std::ceil(std::pow(static_cast<double>(n), 0.25)));

    std::vector<std::uint32_t> by_alpha(n), by_beta(n);
    for (std::uint32_t i = 0; i < n; ++i) by_alpha[i] = by_beta[i] = i;
    std::sort(by_alpha.begin(), by_alpha.end(), [&](std::uint32_t a, std::uint32_t b) {
        return std::make_pair(state.alpha[a], a) < std::make_pair(state.alpha[b], b);
    });
    std::sort(by_beta.begin(), by_beta.end(), [&](std::uint32_t a, std::uint32_t b) {
        return std::make_pair(state.beta[a], a) < std::make_pair(state.beta[b], b);
    });
    std::vector<long long> beta_sorted(n);
    for (std::size_t p = 0; p < n; ++p) beta_sorted[p] = state.beta[by_beta[p]];

    // Refine a D-constant block (given as row range in sorted order and an
    // explicit column list) into chunk x chunk rectangles; remainders go to E.
    auto refine_block = [&](const std::vector<std::uint32_t>& rows,
                            const std::vector<std::uint32_t>& cols, double kappa) {
        std::size_t full_r = rows.size() / chunk, full_c = cols.size() / chunk;
        for (std::size_t a = 0; a < full_r; ++a)
            for (std::size_t b = 0; b < full_c; ++b) {
                RectanglePartition::Rect r;
                r.kappa = kappa;
                r.rows.assign(rows.begin() + a * chunk, rows.begin() + (a + 1) * chunk);
                r.cols.assign(cols.begin() + b * chunk, cols.begin() + (b + 1) * chunk);
                out.rects.push_back(std::move(r));
            }
        for (std::size_t a = 0; a < rows.size(); ++a)
            for (std::size_t b = 0; b < cols.size(); ++b)
                if (a >= full_r * chunk || b >= full_c * chunk)
                    out.leftover.push_back(pair_key(rows[a], cols[b]));
    };

    // Q_o: pairs with alpha_i == beta_j, grouped by the shared value.
    {
        std::map<long long, std::vector<std::uint32_t>> av, bv;
        for (std::uint32_t i = 0; i < n; ++i) av[state.alpha[i]].push_back(i);
        for (std::uint32_t j = 0; j < n; ++j) bv[state.beta[j]].push_back(j);
        for (auto& [x, rows] : av) {
            auto it = bv.find(x);
            if (it == bv.end()) continue;
            auto& cols = it->second;
            if (rows.size() >= block && cols.size() >= block) {
                refine_block(rows, cols, 0.0);
            } else {
                for (auto i : rows)
                    for (auto j : cols) out.leftover.push_back(pair_key(i, j));
            }
        }
    }

    // Signed exponent classes realized by the instance.
    std::set<std::pair<int, int>> classes;  // (exponent, sign)
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = 0; j < n; ++j) {
            long long d = rd.diff(i, j);
            if (d == 0) continue;
            classes.insert({rd.exponent_of(std::llabs(d)), d > 0 ? 1 : -1});
        }

    // Largest integer magnitude present, for the class-boundary search.
    long long max_abs = 1;
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = 0; j < n; ++j)
            max_abs = std::max(max_abs, std::llabs(rd.diff(i, j)));

    auto class_bounds = [&](int h) -> std::pair<long long, long long> {
        // smallest and largest integers d >= 1 with exponent_of(d) == h
        auto expo = [&](long long d) { return rd.exponent_of(d); };
        long long lo = 1, hi = max_abs;
        // first d with exponent >= h
        while (lo < hi) {
            long long mid = lo + (hi - lo) / 2;
            if (expo(mid) >= h) hi = mid;
            else lo = mid + 1;
        }
        long long first = lo;
        lo = first;
        hi = max_abs;
        // last d with exponent <= h
        while (lo < hi) {
            long long mid = lo + (hi - lo + 1) / 2;
            if (expo(mid) <= h) lo = mid;
            else hi = mid - 1;
        }
        return {first, lo};
    };

    for (auto [h, sgn] : classes) {
        auto [lo_int, hi_int] = class_bounds(h);
        double kappa = std::pow(1.0 + state.chi, h);
        // Row i (sorted by alpha) matches sorted-beta positions p with
        //   sgn=+1: beta in [alpha_i - hi, alpha_i - lo]
        //   sgn=-1: beta in [alpha_i + lo, alpha_i + hi]
        auto interval = [&](std::uint32_t row) -> std::pair<std::size_t, std::size_t> {
            long long a = state.alpha[by_alpha[row]];
            long long vlo = sgn > 0 ? a - hi_int : a + lo_int;
            long long vhi = sgn > 0 ? a - lo_int : a + hi_int;
            auto b = std::lower_bound(beta_sorted.begin(), beta_sorted.end(), vlo) -
                     beta_sorted.begin();
            auto e = std::upper_bound(beta_sorted.begin(), beta_sorted.end(), vhi) -
                     beta_sorted.begin();
            return {static_cast<std::size_t>(b), static_cast<std::size_t>(e)};  // [b, e)
        };

        std::size_t full_blocks = n / block;
        for (std::size_t qb = 0; qb <= full_blocks; ++qb) {
            std::size_t r0 = qb * block;
            std::size_t r1 = std::min(n, r0 + block);
            if (r0 >= r1) continue;
            bool full = (r1 - r0) == block;
            // Column range shared by every row of the block.
            auto first_iv = interval(static_cast<std::uint32_t>(r0));
            auto last_iv = interval(static_cast<std::uint32_t>(r1 - 1));
            std::size_t shared_lo = last_iv.first;  // a(.) is nondecreasing
            std::size_t shared_hi = first_iv.second;
            bool keep = full && shared_lo + block <= shared_hi;

            for (std::size_t r = r0; r < r1; ++r) {
                auto [b, e] = interval(static_cast<std::uint32_t>(r));
                for (std::size_t p = b; p < e; ++p) {
                    if (keep && p >= shared_lo && p < shared_hi) continue;  // kept block
                    out.leftover.push_back(pair_key(by_alpha[r], by_beta[p]));
                }
            }
            if (keep) {
                std::vector<std::uint32_t> rows, cols;
                for (std::size_t r = r0; r < r1; ++r) rows.push_back(by_alpha[r]);
                for (std::size_t p = shared_lo; p < shared_hi; ++p) cols.push_back(by_beta[p]);
                refine_block(rows, cols, kappa);
            }
        }
    }
    return out;
}

}  // namespace cpemd
