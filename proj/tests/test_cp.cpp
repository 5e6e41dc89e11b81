#include <catch_amalgamated.hpp>

#include "cpemd/cp_oracle.hpp"
#include "test_util.hpp"

using namespace cpemd;
using namespace cpemd::testutil;

namespace {

// Mock oracle that forgets the true answer on a third of its calls.
class NoisyOracle final : public CpOracle {
public:
    std::pair<std::uint32_t, std::uint32_t> query(const PointSet& A, const PointSet& B,
                                                  double eps,
                                                  std::uint64_t seed) const override {
        Rng rng(derive_seed(seed, 0xbad));
        if (rng.uniform01() < 1.0 / 3.0) {
            // return the *farthest* pair instead
            double worst = -1.0;
            std::pair<std::uint32_t, std::uint32_t> out{0, 0};
            for (std::uint32_t i = 0; i < A.size(); ++i)
                for (std::uint32_t j = 0; j < B.size(); ++j) {
                    double d = l1_distance(A.point(i), B.point(j));
                    if (d > worst) {
                        worst = d;
                        out = {i, j};
                    }
                }
            return out;
        }
        return BruteCpOracle{}.query(A, B, eps, seed);
    }
    double failure_probability() const override { return 1.0 / 3.0; }
    const char* name() const override { return "noisy-mock"; }
};

}  // namespace

TEST_CASE("closest_pair basics") {
    BruteCpOracle brute;
    PointSet A(2, 8.0), B(2, 8.0);
    A.push_back({1.0, 1.0});
    B.push_back({3.0, 4.0});
    auto pr = closest_pair(brute, A, B, 0.1, 5);
    CHECK(pr.first == 0);
    CHECK(pr.second == 0);
    PointSet empty(2, 8.0);
    CHECK_THROWS_AS(closest_pair(brute, empty, B, 0.1, 5), input_error);
}

TEST_CASE("brute oracle equals the exhaustive scan") {
    Rng rng(4);
    BruteCpOracle brute;
    for (int trial = 0; trial < 10; ++trial) {
        auto [X, Y] = random_reduced_instance(rng, 30, 3, 50);
        auto pr = brute.query(X, Y, 0.0, trial);
        auto ref = brute_closest_pair(X, Y);
        CHECK(pr.first == ref.i);
        CHECK(pr.second == ref.j);
    }
}

TEST_CASE("grid oracle is (1+eps)-valid at least two thirds of the time") {
    Rng rng(9);
    GridCpOracle grid;
    double eps = 0.5;
    int valid = 0;
    const int trials = 300;
    auto [X, Y] = random_reduced_instance(rng, 100, 3, 40);
    double best = brute_closest_pair(X, Y).dist;
    for (int s = 0; s < trials; ++s) {
        auto pr = grid.query(X, Y, eps, derive_seed(1000, s));
        double d = l1_distance(X.point(pr.first), Y.point(pr.second));
        CHECK(d >= best - 1e-12);
        if (d <= (1.0 + eps) * best + 1e-12) valid++;
    }
    CHECK(valid >= trials * 2 / 3);
}

TEST_CASE("boosted_cp") {
    BruteCpOracle brute;
    Rng rng(12);
    auto [X, Y] = random_reduced_instance(rng, 20, 2, 30);
    auto ref = brute_closest_pair(X, Y);
    // reps = 1 on a deterministic oracle is the plain query
    auto one = boosted_cp(brute, X, Y, 0.1, 1, 77);
    auto plain = closest_pair(brute, X, Y, 0.1, derive_seed(77, 0xb00, 0));
    CHECK(one == plain);
    CHECK(one.first == ref.i);

    // a noisy oracle boosted 20x almost never misses
    NoisyOracle noisy;
    int good = 0;
    const int trials = 1000;
    for (int s = 0; s < trials; ++s) {
        auto pr = boosted_cp(noisy, X, Y, 0.1, 20, derive_seed(31337, s));
        double d = l1_distance(X.point(pr.first), Y.point(pr.second));
        if (d <= ref.dist + 1e-12) good++;
    }
    CHECK(good >= 999);

    // monotone: more reps never increases the returned distance
    for (int s = 0; s < 20; ++s) {
        double prev = std::numeric_limits<double>::infinity();
        for (int reps : {1, 2, 4, 8}) {
            auto pr = boosted_cp(noisy, X, Y, 0.1, reps, derive_seed(555, s));
            double d = l1_distance(X.point(pr.first), Y.point(pr.second));
            CHECK(d <= prev + 1e-12);
            prev = d;
        }
    }
}

TEST_CASE("subs_cp basics") {
    BruteCpOracle brute;
    Rng rng(14);
    auto [X, Y] = random_reduced_instance(rng, 12, 2, 30);
    // z = 1 keeps everything: the answer is the exact closest pair
    auto full = subs_cp(brute, X, Y, 1.0, 0.1, 5);
    REQUIRE(full.has_value());
    auto ref = brute_closest_pair(X, Y);
    CHECK(full->first == ref.i);
    CHECK(full->second == ref.j);

    // z >> n: almost always absent
    int absent = 0;
    for (int s = 0; s < 200; ++s)
        if (!subs_cp(brute, X, Y, 12000.0, 0.1, derive_seed(88, s))) absent++;
    CHECK(absent >= 190);
}

TEST_CASE("subs_cp subsample sizes concentrate") {
    BruteCpOracle brute;
    Rng rng(15);
    // Monitor the binomial count through the Rng the same way subs_cp draws it.
    const int n = 400;
    const double z = 4.0;
    int within = 0;
    const int trials = 500;
    for (int s = 0; s < trials; ++s) {
        Rng r(derive_seed(derive_seed(700, s), 0x5ab5));
        int na = r.binomial(n, 1.0 / z);
        double mean = n / z;
        if (std::abs(na - mean) <= 5.0 * std::sqrt(mean)) within++;
    }
    CHECK(within >= trials * 99 / 100);
}

TEST_CASE("subs_cp planted close pair is returned with frequency Omega(1/z^2)") {
    // One cross pair at distance 1; every other cross distance >= 10.
    const int n = 24;
    PointSet X(1, 4096.0), Y(1, 4096.0);
    X.push_back({100.0});
    Y.push_back({101.0});  // the planted pair (0, 0)
    for (int i = 1; i < n; ++i) {
        X.push_back({100.0 + 40.0 * i});
        Y.push_back({120.0 + 40.0 * i});
    }
    BruteCpOracle brute;
    const double z = 5.0;
    int hits = 0;
    const int trials = 10000;
    for (int s = 0; s < trials; ++s) {
        auto pr = subs_cp(brute, X, Y, z, 0.1, derive_seed(424242, s));
        if (pr && pr->first == 0 && pr->second == 0) hits++;
    }
    double freq = static_cast<double>(hits) / trials;
    CHECK(freq >= 0.5 / (z * z));
}
