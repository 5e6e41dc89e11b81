#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpemd {

// Thrown for malformed inputs (bad files, dimension mismatches, invalid
// parameters). The CLI maps this to exit code 2.
struct input_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Thrown when a randomized procedure exhausts its retry/attempt budget
// (grid-shift retries, rejection-sampler stalls). CLI exit code 3.
struct run_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Deterministic RNG.
//
// Every randomized operation takes an explicit 64-bit seed. Sub-seeds are
// derived from a master seed with a counter-based split (splitmix64 over
// master ^ mix(tag)), so a single CLI --seed reproduces the whole run and
// parallel trials can derive disjoint streams by counter.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t counter = 0) {
    return splitmix64(splitmix64(master ^ splitmix64(stream)) + counter);
}

// mt19937_64 with explicit transforms on top; std::*_distribution is
// implementation-defined, so all draws below are hand-rolled for
// reproducibility of recorded test constants.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(splitmix64(seed ^ 0x5bf0'3635'dcf2'37a1ULL)) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Lemire-style rejection to kill modulo bias.
        if (n == 0) throw input_error("Rng::below: n must be positive");
        std::uint64_t mask = ~std::uint64_t{0};
        int shift = std::countl_zero(n - 1 | 1);
        mask >>= shift;
        for (;;) {
            std::uint64_t v = gen_() & mask;
            if (v < n) return v;
        }
    }

    std::int64_t range(std::int64_t lo, std::int64_t hi) {  // inclusive
        return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        have_spare_ = true;
        return u * f;
    }

    // Binomial(n, p) via CDF inversion walking up from 0; O(np + sqrt(np)).
    int binomial(int n, double p) {
        if (n <= 0 || p <= 0.0) return 0;
        if (p >= 1.0) return n;
        double u = uniform01();
        double q = 1.0 - p;
        double ratio = p / q;
        double pmf = std::pow(q, n);
        if (pmf <= 0.0) {
            // Underflow regime (huge n): fall back to normal approximation.
            double mean = n * p, sd = std::sqrt(n * p * q);
            int k = static_cast<int>(std::lround(mean + sd * normal()));
            return std::clamp(k, 0, n);
        }
        double cdf = pmf;
        int k = 0;
        while (u > cdf && k < n) {
            ++k;
            pmf *= ratio * static_cast<double>(n - k + 1) / static_cast<double>(k);
            cdf += pmf;
        }
        return k;
    }

    // k distinct values from [0, n), Floyd's algorithm; sorted output.
    std::vector<std::uint64_t> sample_distinct(std::uint64_t n, std::uint64_t k);

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

inline std::vector<std::uint64_t> Rng::sample_distinct(std::uint64_t n, std::uint64_t k) {
    if (k > n) throw input_error("sample_distinct: k > n");
    std::vector<std::uint64_t> out;
    out.reserve(k);
    // Floyd: for j = n-k..n-1 pick t in [0, j]; insert t or j on collision.
    std::vector<std::uint64_t> chosen;
    chosen.reserve(k);
    auto contains = [&](std::uint64_t v) {
        for (auto c : chosen)
            if (c == v) return true;
        return false;
    };
    if (k * k <= n * 4 + 64) {
        for (std::uint64_t j = n - k; j < n; ++j) {
            std::uint64_t t = below(j + 1);
            if (contains(t)) chosen.push_back(j);
            else chosen.push_back(t);
        }
        out = chosen;
    } else {
        // Dense regime: Fisher-Yates prefix over an index array.
        std::vector<std::uint64_t> idx(n);
        for (std::uint64_t i = 0; i < n; ++i) idx[i] = i;
        for (std::uint64_t i = 0; i < k; ++i) {
            std::uint64_t j = i + below(n - i);
            std::swap(idx[i], idx[j]);
        }
        out.assign(idx.begin(), idx.begin() + k);
    }
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// Domain types.
// ---------------------------------------------------------------------------

// n points in d dimensions under the l1 norm, coordinates flat row-major.
// `phi` bounds both coordinates and (on reduced instances) cross distances.
struct PointSet {
    std::vector<double> data;
    int dim = 0;
    double phi = 0.0;

    PointSet() = default;
    PointSet(int d, double phi_bound) : dim(d), phi(phi_bound) {}

    std::size_t size() const { return dim == 0 ? 0 : data.size() / dim; }
    std::span<const double> point(std::size_t i) const {
        return {data.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
    }
    void push_back(std::span<const double> p) {
        if (static_cast<int>(p.size()) != dim) throw input_error("PointSet: dimension mismatch");
        data.insert(data.end(), p.begin(), p.end());
    }
    void push_back(std::initializer_list<double> p) {
        push_back(std::span<const double>(p.begin(), p.size()));
    }
};

// Integer supply/demand vector; membership in V means coordinates sum to zero.
struct SupplyDemand {
    std::vector<long long> b;

    long long sum() const {
        long long s = 0;
        for (auto v : b) s += v;
        return s;
    }
    bool balanced() const { return sum() == 0; }
    std::size_t size() const { return b.size(); }
};

inline std::uint64_t pair_key(std::uint32_t i, std::uint32_t j) {
    return (static_cast<std::uint64_t>(i) << 32) | j;
}
inline std::pair<std::uint32_t, std::uint32_t> key_pair(std::uint64_t k) {
    return {static_cast<std::uint32_t>(k >> 32), static_cast<std::uint32_t>(k & 0xffffffffu)};
}

}  // namespace cpemd
