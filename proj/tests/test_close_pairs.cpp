#include <catch_amalgamated.hpp>

#include "cpemd/close_pairs.hpp"
#include "test_util.hpp"

using namespace cpemd;
using namespace cpemd::testutil;

namespace {

// Instance with one heavy X vertex: x_0 has `deg` Y-neighbours at level 2
// (distances in [2,4) at eps = 1); every other cross pair is far away. When
// LastSmallPrefix misses the planted level, the prefix set equals exactly the
// planted neighbourhood and the heavy-vertex path must recover it.
std::pair<PointSet, PointSet> planted_heavy_instance(Rng& rng, std::size_t n,
                                                     std::size_t deg) {
    const double phi = 65536.0;
    PointSet X(2, phi), Y(2, phi);
    double cx = phi / 2;
    X.push_back({cx, cx});
    for (std::size_t j = 0; j < deg; ++j)
        Y.push_back({cx + 2.0 + static_cast<double>(j % 2), cx + static_cast<double>(j / 2)});
    for (std::size_t i = 1; i < n; ++i)
        X.push_back({1000.0 + static_cast<double>(rng.below(200)),
                     1000.0 + static_cast<double>(i)});
    for (std::size_t j = deg; j < n; ++j)
        Y.push_back({50000.0 + static_cast<double>(rng.below(200)),
                     60000.0 + static_cast<double>(j)});
    return {std::move(X), std::move(Y)};
}

}  // namespace

TEST_CASE("last_small_prefix on a single-level instance") {
    // every cross pair lies in L_5 (eps = 1: distances in [16, 32))
    PointSet X(1, 32.0), Y(1, 32.0);
    X.push_back({1.0});
    X.push_back({2.0});
    Y.push_back({20.0});
    Y.push_back({24.0});
    for (int s = 0; s < 20; ++s)
        CHECK(last_small_prefix(X, Y, 2.0, 1.0, derive_seed(3, s)) == 2);
}

TEST_CASE("last_small_prefix satisfies the level-set bounds") {
    Rng rng(77);
    const std::size_t n = 64;
    const double eps = 1.0;
    int both_ok = 0;
    const int trials = 100;
    for (int trial = 0; trial < trials; ++trial) {
        auto [X, Y] = random_reduced_instance(rng, n, 4, 1 << 20);
        double z = std::pow(static_cast<double>(n), 0.75);
        int t = last_small_prefix(X, Y, z, eps, derive_seed(8181, trial));
        auto ls = brute_level_sets(X, Y, eps);
        auto level_size = [&](int lvl) -> std::size_t {
            if (lvl < 1 || lvl >= static_cast<int>(ls.levels.size())) return 0;
            return ls.levels[lvl].size();
        };
        std::size_t prefix = 0;
        for (int s = 1; s <= t + 2; ++s) prefix += level_size(s);
        double log_phi = std::log2(X.phi);
        bool big_level = level_size(t + 3) >= z * z / (log_phi * log_phi * log_phi);
        bool small_prefix = static_cast<double>(prefix) <= 0.1 * z * z;
        if (big_level && small_prefix) both_ok++;
    }
    CHECK(both_ok >= 90);
}

TEST_CASE("last_small_prefix is stable across reruns") {
    Rng rng(91);
    auto [X, Y] = random_reduced_instance(rng, 48, 3, 1 << 18);
    double z = std::pow(48.0, 0.75);
    int agree = 0;
    const int pairs = 100;
    for (int s = 0; s < pairs; ++s) {
        int a = last_small_prefix(X, Y, z, 1.0, derive_seed(1, s));
        int b = last_small_prefix(X, Y, z, 1.0, derive_seed(2, s));
        if (std::abs(a - b) <= 1) agree++;
    }
    CHECK(agree >= 95);
}

TEST_CASE("find_close_pairs returns the empty set when the prefix is empty") {
    // all pairs in one far level: t lands 3 below it
    PointSet X(1, 64.0), Y(1, 64.0);
    X.push_back({1.0});
    X.push_back({2.0});
    Y.push_back({40.0});
    Y.push_back({44.0});
    BruteCpOracle brute;
    auto res = find_close_pairs(brute, X, Y, 0.5, 1.0, 5);
    auto ref = brute_prefix_set(X, Y, res.t, 1.0);
    CHECK(ref.empty());
    CHECK(res.pairs.empty());
}

TEST_CASE("find_close_pairs soundness and completeness on random instances") {
    Rng rng(13);
    BruteCpOracle brute;
    const double eps = 1.0, phi_exp = 0.5;
    int exact_match = 0;
    const int trials = 25;
    for (int trial = 0; trial < trials; ++trial) {
        auto [X, Y] = random_reduced_instance(rng, 64, 4, 1 << 16);
        auto res = find_close_pairs(brute, X, Y, phi_exp, eps, derive_seed(777, trial));
        auto ref = brute_prefix_set(X, Y, res.t, eps);
        bool sound = true;
        for (auto key : res.pairs)
            if (!ref.count(key)) sound = false;
        REQUIRE(sound);  // soundness is deterministic
        if (res.pairs == ref) exact_match++;
    }
    CHECK(exact_match >= trials * 9 / 10);
}

TEST_CASE("find_close_pairs recovers a planted heavy vertex") {
    Rng rng(14);
    BruteCpOracle brute;
    int equal = 0, exercised = 0;
    const int trials = 20;
    for (int trial = 0; trial < trials; ++trial) {
        auto [X, Y] = planted_heavy_instance(rng, 64, 16);
        auto res = find_close_pairs(brute, X, Y, 0.5, 1.0, derive_seed(99, trial));
        auto ref = brute_prefix_set(X, Y, res.t, 1.0);
        if (res.pairs == ref) equal++;
        // when the sampler misses the planted level, t lands above it and the
        // heavy path must reconstruct the whole neighbourhood
        if (!ref.empty()) {
            REQUIRE(ref.size() == 16);
            exercised++;
        }
    }
    CHECK(equal >= trials * 9 / 10);
    CHECK(exercised >= 3);
}

TEST_CASE("frequency threshold separates frequent from infrequent vertices") {
    // Invariant II, checked against Monte-Carlo estimates of the SubsCP
    // return distribution. The seed is pinned to a run where t lands above
    // the planted level so the counting phase is actually exercised.
    Rng rng(15);
    const std::size_t n = 64;
    auto [X, Y] = planted_heavy_instance(rng, n, 16);
    BruteCpOracle brute;
    const double phi_exp = 0.5, eps = 1.0;
    const double z = std::sqrt(std::pow(static_cast<double>(n), 1.0 + phi_exp));

    auto res = find_close_pairs(brute, X, Y, phi_exp, eps, 31340);
    REQUIRE(res.t >= 2);

    // estimate per-vertex incidence frequencies
    const int draws = 80000;
    std::vector<double> freq(2 * n, 0.0);
    for (int s = 0; s < draws; ++s) {
        auto pr = subs_cp(brute, X, Y, z, eps, derive_seed(555, s));
        if (!pr) continue;
        if (prefix_member_distance(l1_distance(X.point(pr->first), Y.point(pr->second)),
                                   res.t + 1, eps)) {
            freq[pr->first] += 1.0;
            freq[n + pr->second] += 1.0;
        }
    }
    for (auto& f : freq) f /= draws;

    std::unordered_set<std::uint32_t> F(res.frequent.begin(), res.frequent.end());
    for (std::uint32_t v = 0; v < 2 * n; ++v) {
        if (freq[v] >= 0.035 / z) CHECK(F.count(v));
        if (freq[v] * z < 0.005) CHECK_FALSE(F.count(v));
    }
}
