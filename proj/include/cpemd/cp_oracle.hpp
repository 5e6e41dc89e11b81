#pragma once

#include <memory>
#include <optional>

#include "exact.hpp"

namespace cpemd {

// ---------------------------------------------------------------------------
// Pluggable (1+eps)-approximate closest-pair oracle. A query returns a pair
// of indices into A x B; with probability at least 1 - failure_probability()
// the pair is within (1+eps) of the minimum cross distance. Queries take an
// explicit seed and implementations must be safe for concurrent use.
// ---------------------------------------------------------------------------

class CpOracle {
public:
    virtual ~CpOracle() = default;
    virtual std::pair<std::uint32_t, std::uint32_t> query(const PointSet& A, const PointSet& B,
                                                          double eps,
                                                          std::uint64_t seed) const = 0;
    virtual double failure_probability() const = 0;
    virtual const char* name() const = 0;
};

// Exhaustive scan; exact and deterministic. The reference implementation and
// the default at desk scale.
class BruteCpOracle final : public CpOracle {
public:
    std::pair<std::uint32_t, std::uint32_t> query(const PointSet& A, const PointSet& B,
                                                  double /*eps*/,
                                                  std::uint64_t /*seed*/) const override {
        auto cp = brute_closest_pair(A, B);
        return {cp.i, cp.j};
    }
    double failure_probability() const override { return 0.0; }
    const char* name() const override { return "brute"; }
};

// Single-level randomly shifted grid heuristic: a sparse sample supplies a
// distance guess g, points are bucketed into cells of side 3g, and only
// intra-cell cross pairs are compared. The true closest pair shares a cell
// with probability >= 1 - dist/(3g) >= 2/3, in which case the answer is
// exact; otherwise the sampled guess pair is returned.
class GridCpOracle final : public CpOracle {
public:
    std::pair<std::uint32_t, std::uint32_t> query(const PointSet& A, const PointSet& B,
                                                  double /*eps*/,
                                                  std::uint64_t seed) const override {
        if (A.size() == 0 || B.size() == 0) throw input_error("GridCpOracle: empty set");
        Rng rng(derive_seed(seed, 0x971d));
        std::size_t k = 2 * static_cast<std::size_t>(
                                std::ceil(std::sqrt(static_cast<double>(std::max(A.size(), B.size()))))) +
                        4;
        std::uint32_t gi = 0, gj = 0;
        double guess = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < k; ++s) {
            std::uint32_t i = static_cast<std::uint32_t>(rng.below(A.size()));
            std::uint32_t j = static_cast<std::uint32_t>(rng.below(B.size()));
            double d = l1_distance(A.point(i), B.point(j));
            if (d < guess) {
                guess = d;
                gi = i;
                gj = j;
            }
        }
        if (guess == 0.0) return {gi, gj};

        double side = 3.0 * guess;
        std::vector<double> shift(A.dim);
        for (auto& s : shift) s = rng.uniform(0.0, side);
        std::map<std::vector<long long>, std::pair<std::vector<std::uint32_t>, std::vector<std::uint32_t>>>
            cells;
        std::vector<long long> cell(A.dim);
        auto bucket = [&](const PointSet& P, bool is_a) {
            for (std::uint32_t i = 0; i < P.size(); ++i) {
                auto p = P.point(i);
                for (int c = 0; c < P.dim; ++c)
                    cell[c] = static_cast<long long>(std::floor((p[c] - shift[c]) / side));
                auto& entry = cells[cell];
                (is_a ? entry.first : entry.second).push_back(i);
            }
        };
        bucket(A, true);
        bucket(B, false);

        std::uint32_t bi = gi, bj = gj;
        double best = guess;
        for (auto& [key, entry] : cells) {
            for (auto i : entry.first)
                for (auto j : entry.second) {
                    double d = l1_distance(A.point(i), B.point(j));
                    if (d < best) {
                        best = d;
                        bi = i;
                        bj = j;
                    }
                }
        }
        return {bi, bj};
    }
    double failure_probability() const override { return 1.0 / 3.0; }
    const char* name() const override { return "grid"; }
};

inline std::unique_ptr<CpOracle> make_oracle(const std::string& kind) {
    if (kind == "brute") return std::make_unique<BruteCpOracle>();
    if (kind == "grid") return std::make_unique<GridCpOracle>();
    throw input_error("unknown CP oracle: " + kind);
}

inline std::pair<std::uint32_t, std::uint32_t> closest_pair(const CpOracle& oracle,
                                                            const PointSet& A, const PointSet& B,
                                                            double eps, std::uint64_t seed) {
    if (A.size() == 0 || B.size() == 0) throw input_error("closest_pair: empty set");
    return oracle.query(A, B, eps, seed);
}

// Minimum-distance pair over `reps` independent queries; ties lexicographic.
inline std::pair<std::uint32_t, std::uint32_t> boosted_cp(const CpOracle& oracle,
                                                          const PointSet& A, const PointSet& B,
                                                          double eps, int reps,
                                                          std::uint64_t seed) {
    if (reps < 1) throw input_error("boosted_cp: reps must be >= 1");
    std::pair<std::uint32_t, std::uint32_t> best{0, 0};
    double best_d = std::numeric_limits<double>::infinity();
    for (int r = 0; r < reps; ++r) {
        auto pr = closest_pair(oracle, A, B, eps, derive_seed(seed, 0xb00, r));
        double d = l1_distance(A.point(pr.first), B.point(pr.second));
        if (d < best_d || (d == best_d && pr < best)) {
            best_d = d;
            best = pr;
        }
    }
    return best;
}

// Repetition count that drives an oracle's declared failure probability
// below n^-3.
inline int boost_reps_for(const CpOracle& oracle, std::size_t n) {
    double fp = oracle.failure_probability();
    if (fp <= 0.0) return 1;
    double ln_n = std::log(static_cast<double>(std::max<std::size_t>(n, 2)));
    return static_cast<int>(std::ceil(3.0 * ln_n / -std::log(fp))) + 1;
}

// ---------------------------------------------------------------------------
// SubsCP: subsample both sides at rate 1/z (binomial count, then distinct
// elements), pad the smaller side with far-away sentinels, and run a boosted
// closest pair on the subsample. Absent when either subsample is empty.
// ---------------------------------------------------------------------------

inline std::optional<std::pair<std::uint32_t, std::uint32_t>> subs_cp(
    const CpOracle& oracle, const PointSet& X, const PointSet& Y, double z, double eps,
    std::uint64_t seed) {
    if (z < 1.0) throw input_error("subs_cp: z must be >= 1");
    Rng rng(derive_seed(seed, 0x5ab5));
    int na = rng.binomial(static_cast<int>(X.size()), 1.0 / z);
    int nb = rng.binomial(static_cast<int>(Y.size()), 1.0 / z);
    if (na == 0 || nb == 0) return std::nullopt;
    auto ia = rng.sample_distinct(X.size(), na);
    auto ib = rng.sample_distinct(Y.size(), nb);

    PointSet A(X.dim, X.phi), B(Y.dim, Y.phi);
    for (auto i : ia) A.push_back(X.point(i));
    for (auto j : ib) B.push_back(Y.point(j));
    // Sentinel padding keeps |A| = |B| without ever winning a query.
    double far = 10.0 * std::max({X.phi, Y.phi, 1.0});
    std::vector<double> sentinel(X.dim, far);
    while (A.size() < B.size()) A.push_back(sentinel);
    while (B.size() < A.size()) B.push_back(sentinel);

    int reps = boost_reps_for(oracle, X.size() + Y.size());
    auto pr = boosted_cp(oracle, A, B, eps, reps, derive_seed(seed, 0x5ab6));
    if (pr.first >= ia.size() || pr.second >= ib.size()) {
        // Both answers landed on padding; fall back to the first real pair.
        pr = {0, 0};
    }
    return std::make_pair(static_cast<std::uint32_t>(ia[pr.first]),
                          static_cast<std::uint32_t>(ib[pr.second]));
}

}  // namespace cpemd
