#pragma once

// Shared helpers for the test suites: instance generators that respect the
// reduced-instance contract (integer coordinates, cross distances in [1, phi]).

#include <set>

#include "cpemd/core.hpp"

namespace cpemd::testutil {

inline PointSet make_points(std::initializer_list<std::initializer_list<double>> pts,
                            double phi) {
    PointSet P(static_cast<int>(pts.begin()->size()), phi);
    for (auto& p : pts) P.push_back(p);
    return P;
}

inline PointSet random_points(Rng& rng, std::size_t n, int d, double lo, double hi,
                              double phi) {
    PointSet P(d, phi);
    std::vector<double> p(d);
    for (std::size_t i = 0; i < n; ++i) {
        for (int k = 0; k < d; ++k) p[k] = rng.uniform(lo, hi);
        P.push_back(p);
    }
    return P;
}

// Two point sets with distinct integer coordinates in [1, phi]^d, so every
// cross distance lies in [1, d*phi].
inline std::pair<PointSet, PointSet> random_reduced_instance(Rng& rng, std::size_t n, int d,
                                                             long long phi) {
    std::set<std::vector<double>> seen;
    PointSet X(d, static_cast<double>(phi)), Y(d, static_cast<double>(phi));
    std::vector<double> p(d);
    auto draw = [&](PointSet& out) {
        for (;;) {
            for (int k = 0; k < d; ++k)
                p[k] = static_cast<double>(1 + static_cast<long long>(rng.below(phi)));
            if (seen.insert(p).second) {
                out.push_back(p);
                return;
            }
        }
    };
    for (std::size_t i = 0; i < n; ++i) draw(X);
    for (std::size_t i = 0; i < n; ++i) draw(Y);
    return {std::move(X), std::move(Y)};
}

inline SupplyDemand random_supply(Rng& rng, std::size_t n, long long bound) {
    SupplyDemand b;
    b.b.assign(n, 0);
    long long s = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        b.b[i] = rng.range(-bound, bound);
        s += b.b[i];
    }
    b.b[n - 1] = -s;
    return b;
}

}  // namespace cpemd::testutil
