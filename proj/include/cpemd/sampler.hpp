#pragma once

#include <functional>
#include <unordered_map>

#include "close_pairs.hpp"
#include "duals.hpp"

namespace cpemd {

inline double logaddexp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// log(w_+ + w_-) for a pair with weight exponent x = eta*kappa/C >= 0:
// w_{+-} = exp(-+x), so the sum is 2*cosh(x).
inline double log_two_cosh(double x) {
    x = std::abs(x);
    return x + std::log1p(std::exp(-2.0 * x));
}

// ---------------------------------------------------------------------------
// Uniformly drawn down-rounding / shattering set S of pair keys.
// ---------------------------------------------------------------------------

inline std::unordered_set<std::uint64_t> draw_rounding_set(std::size_t n, double phi_exp,
                                                           std::uint64_t seed) {
    std::unordered_set<std::uint64_t> out;
    if (n == 0) return out;
    double want = std::pow(static_cast<double>(n), 2.0 - phi_exp / 8.0);
    std::size_t univ = n * n;
    std::size_t size = std::min<std::size_t>(univ, static_cast<std::size_t>(std::ceil(want)));
    Rng rng(derive_seed(seed, 0x5e75));
    auto flat = rng.sample_distinct(univ, size);
    out.reserve(size * 2);
    for (auto f : flat)
        out.insert(pair_key(static_cast<std::uint32_t>(f / n), static_cast<std::uint32_t>(f % n)));
    return out;
}

// tau-shattering check: every cell of size >= tau must hold its proportional
// share of S within the 0.9..1.1 band.
inline bool shatter_check(const std::unordered_set<std::uint64_t>& S,
                          const std::vector<std::vector<std::uint64_t>>& cells,
                          std::size_t universe_size, double tau) {
    if (S.empty()) return false;
    double s_size = static_cast<double>(S.size());
    for (const auto& cell : cells) {
        if (static_cast<double>(cell.size()) < tau) continue;
        std::size_t hit = 0;
        for (auto key : cell) hit += S.count(key);
        double lhs = static_cast<double>(hit) / s_size;
        double share = static_cast<double>(cell.size()) / static_cast<double>(universe_size);
        if (lhs < 0.9 * share || lhs > 1.1 * share) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Sum estimation from proportional samples: draws reveal (id, log weight);
// equal-id collisions yield the unbiased estimator
//   E[ sum_{a<b} 1{id_a = id_b} / w_{id_a} ] = C(t,2) / W,
// so W-hat = C(t,2) / U, with O(sqrt(m)/eps) draws and a median of 9.
// ---------------------------------------------------------------------------

struct WeightedDraw {
    std::uint64_t id = 0;
    double log_weight = 0.0;
};

inline double estimate_log_weight_sum(const std::function<WeightedDraw(Rng&)>& draw,
                                      std::size_t support_size, double eps_est,
                                      std::uint64_t seed) {
    if (support_size == 0) throw input_error("estimate_weight_sum: empty support");
    if (!(eps_est > 0.0)) throw input_error("estimate_weight_sum: eps must be positive");
    const double neg_inf = -std::numeric_limits<double>::infinity();
    std::vector<double> estimates;
    for (int rep = 0; rep < 9; ++rep) {
        Rng rng(derive_seed(seed, 0xe571, rep));
        std::size_t t = static_cast<std::size_t>(std::ceil(
                            6.0 * std::sqrt(static_cast<double>(support_size)) / eps_est)) +
                        2;
        for (int attempt = 0; attempt < 3; ++attempt) {
            std::unordered_map<std::uint64_t, std::pair<std::size_t, double>> seen;
            bool any_weight = false;
            for (std::size_t k = 0; k < t; ++k) {
                auto d = draw(rng);
                if (d.log_weight > neg_inf) any_weight = true;
                auto& e = seen[d.id];
                e.first++;
                e.second = d.log_weight;
            }
            if (!any_weight) throw input_error("estimate_weight_sum: all observed weights zero");
            double log_u = neg_inf;
            for (auto& [id, e] : seen) {
                if (e.first < 2) continue;
                double pairs =
                    0.5 * static_cast<double>(e.first) * static_cast<double>(e.first - 1);
                log_u = logaddexp(log_u, std::log(pairs) - e.second);
            }
            if (log_u == neg_inf) {
                t *= 2;  // no collisions yet; try harder
                continue;
            }
            estimates.push_back(
                std::log(0.5 * static_cast<double>(t) * static_cast<double>(t - 1)) - log_u);
            break;
        }
    }
    if (estimates.empty()) throw run_error("estimate_weight_sum: no collisions observed");
    std::sort(estimates.begin(), estimates.end());
    return estimates[estimates.size() / 2];
}

inline double estimate_weight_sum(const std::function<WeightedDraw(Rng&)>& draw,
                                  std::size_t support_size, double eps_est,
                                  std::uint64_t seed) {
    return std::exp(estimate_log_weight_sum(draw, support_size, eps_est, seed));
}

// ---------------------------------------------------------------------------
// Rounding view: how a (sub-)instance exposes psi levels and the fixed
// up/down rounding to the samplers. Index arguments are local.
// ---------------------------------------------------------------------------

struct RoundingView {
    std::function<int(std::uint32_t, std::uint32_t)> psi;
    std::function<bool(std::uint32_t, std::uint32_t)> down;
    double eps = 0.0;

    double log_cost(std::uint32_t i, std::uint32_t j) const {
        int p = psi(i, j);
        return (p - 2 * (down(i, j) ? 1 : 0)) * std::log1p(eps);
    }
    double cost(std::uint32_t i, std::uint32_t j) const { return std::exp(log_cost(i, j)); }
    int level(std::uint32_t i, std::uint32_t j) const { return psi(i, j) + 1; }
};

inline RoundingView make_view(const RoundingState& r) {
    return RoundingView{
        [&r](std::uint32_t i, std::uint32_t j) { return r.psi(i, j); },
        [&r](std::uint32_t i, std::uint32_t j) { return r.down(i, j); }, r.eps()};
}

struct LambdaSample {
    std::uint32_t i = 0, j = 0;
    int sigma = 1;
};

// Deterministic desk-scale stand-in for LastSmallPrefix on a sub-instance:
// t is the largest level whose two-level extension keeps at most 0.1 z^2
// pairs, i.e. t = (first level where the running prefix exceeds the cap) - 3.
inline int exact_prefix_level(const std::vector<std::vector<int>>& levels, std::size_t m,
                              double phi_exp) {
    double cap = 0.1 * std::pow(static_cast<double>(m), 1.0 + phi_exp);
    std::map<int, std::size_t> count;
    for (auto& row : levels)
        for (int l : row) count[l]++;
    if (count.empty()) return 0;
    std::size_t cum = 0;
    for (auto& [lvl, c] : count) {
        cum += c;
        if (static_cast<double>(cum) > cap) return lvl - 3;
    }
    return count.rbegin()->first - 3;  // unreachable: cap < m^2
}

// ---------------------------------------------------------------------------
// ConstantSampler: i.i.d. samples from lambda(eta, C(S), kappa, P) on an
// m x m (sub-)instance whose rounded dual value kappa is constant.
//
// Prefix pairs (plus down-rounded pairs of the next two levels) carry exact
// weights; the complement is drawn by uniform proposals under the envelope
// 2 cosh(eta*kappa*(1+eps)^-t), valid because every complement pair has
// C >= (1+eps)^t. The sign is sampled from its exact conditional.
// ---------------------------------------------------------------------------

struct ConstantSamplerConfig {
    double eta = 1.0;
    double kappa = 0.0;            // constant D value (nonnegative)
    double phi_exp = 0.5;
    bool exact_complement = true;  // desk default: exact complement weight
    double complement_eps = 0.25;  // estimator accuracy otherwise
    std::size_t attempt_floor = 256;
};

class ConstantSampler {
public:
    ConstantSampler(std::size_t m, RoundingView view,
                    std::function<int(std::uint32_t, std::uint32_t)> sign, int t,
                    const std::unordered_set<std::uint64_t>& prefix_pairs,
                    const std::unordered_set<std::uint64_t>& down_pairs,
                    ConstantSamplerConfig cfg, std::uint64_t seed)
        : m_(m), view_(std::move(view)), sign_(std::move(sign)), t_(t), cfg_(cfg) {
        if (m_ == 0) throw input_error("ConstantSampler: empty instance");
        const double neg_inf = -std::numeric_limits<double>::infinity();

        for (auto key : prefix_pairs) explicit_.insert(key);
        for (auto key : down_pairs) {
            auto [i, j] = key_pair(key);
            int lvl = view_.level(i, j);
            if (lvl == t_ + 1 || lvl == t_ + 2) explicit_.insert(key);
        }
        keys_.assign(explicit_.begin(), explicit_.end());
        std::sort(keys_.begin(), keys_.end());

        log_w_explicit_ = neg_inf;
        if (!keys_.empty()) {
            std::vector<double> lw(keys_.size());
            double lmax = neg_inf;
            for (std::size_t k = 0; k < keys_.size(); ++k) {
                auto [i, j] = key_pair(keys_[k]);
                lw[k] = pair_log_weight(i, j);
                lmax = std::max(lmax, lw[k]);
            }
            cdf_.resize(keys_.size());
            double acc = 0.0;
            for (std::size_t k = 0; k < keys_.size(); ++k) {
                acc += std::exp(lw[k] - lmax);
                cdf_[k] = acc;
            }
            log_w_explicit_ = lmax + std::log(acc);
        }

        complement_count_ = m_ * m_ - keys_.size();
        // Every complement pair has C >= (1+eps)^t, and C >= 1 always, so the
        // envelope anchors at the larger of the two.
        log_env_ = log_two_cosh(cfg_.eta * cfg_.kappa *
                                std::pow(1.0 + view_.eps, -std::max(t_, 0)));
        if (complement_count_ == 0) {
            log_w_complement_ = neg_inf;
        } else if (cfg_.exact_complement) {
            double lmax = neg_inf;
            std::vector<double> all;
            all.reserve(complement_count_);
            for (std::uint32_t i = 0; i < m_; ++i)
                for (std::uint32_t j = 0; j < m_; ++j) {
                    if (explicit_.count(pair_key(i, j))) continue;
                    double v = pair_log_weight(i, j);
                    all.push_back(v);
                    lmax = std::max(lmax, v);
                }
            double s = 0.0;
            for (double v : all) s += std::exp(v - lmax);
            log_w_complement_ = lmax + std::log(s);
        } else {
            auto draw = [this](Rng& rng) { return propose_complement(rng); };
            log_w_complement_ = estimate_log_weight_sum(
                draw, complement_count_, cfg_.complement_eps, derive_seed(seed, 0xc0de));
            complement_estimated_ = true;
        }
        log_w_total_ = logaddexp(log_w_explicit_, log_w_complement_);
        budget_ = cfg_.attempt_floor +
                  static_cast<std::size_t>(
                      64.0 * std::pow(static_cast<double>(m_), 1.0 - cfg_.phi_exp / 4.0));
    }

    double log_total_weight() const { return log_w_total_; }
    std::size_t explicit_size() const { return keys_.size(); }
    int prefix_level() const { return t_; }

    LambdaSample draw(Rng& rng) const {
        double p_explicit = std::exp(log_w_explicit_ - log_w_total_);
        for (std::size_t attempt = 0; attempt < budget_; ++attempt) {
            std::uint32_t i, j;
            double log_attempt_prob;
            if (rng.uniform01() < p_explicit) {
                double r = rng.uniform01() * cdf_.back();
                std::size_t k = std::lower_bound(cdf_.begin(), cdf_.end(), r) - cdf_.begin();
                if (k >= keys_.size()) k = keys_.size() - 1;
                auto pr = key_pair(keys_[k]);
                i = pr.first;
                j = pr.second;
                log_attempt_prob =
                    std::log(p_explicit) + pair_log_weight(i, j) - log_w_explicit_;
            } else {
                std::uint32_t ci, cj;
                std::size_t guard = 0;
                do {
                    ci = static_cast<std::uint32_t>(rng.below(m_));
                    cj = static_cast<std::uint32_t>(rng.below(m_));
                    if (++guard > 64 * m_ * m_ + 1024)
                        throw run_error("ConstantSampler: complement proposal stall");
                } while (explicit_.count(pair_key(ci, cj)) > 0);
                double lw = pair_log_weight(ci, cj);
                if (rng.uniform01() >= std::exp(std::min(0.0, lw - log_env_))) continue;
                i = ci;
                j = cj;
                log_attempt_prob = std::log1p(-p_explicit) -
                                   std::log(static_cast<double>(complement_count_)) + lw -
                                   log_env_;
            }
            if (complement_estimated_) {
                // Secondary correction keeps the output exactly proportional
                // although the complement weight is only estimated.
                double log_c =
                    -log_w_total_ +
                    std::min(0.0, log_w_complement_ -
                                      std::log(static_cast<double>(complement_count_)) -
                                      log_env_);
                double log_keep = pair_log_weight(i, j) + log_c - log_attempt_prob;
                if (rng.uniform01() >= std::exp(std::min(0.0, log_keep))) continue;
            }
            return finish(i, j, rng);
        }
        throw run_error("ConstantSampler: rejection budget exhausted (shattering violated?)");
    }

private:
    double pair_log_weight(std::uint32_t i, std::uint32_t j) const {
        return log_two_cosh(cfg_.eta * cfg_.kappa * std::exp(-view_.log_cost(i, j)));
    }

    WeightedDraw propose_complement(Rng& rng) const {
        for (std::size_t guard = 0; guard < 64 * m_ * m_ + 4096; ++guard) {
            std::uint32_t i = static_cast<std::uint32_t>(rng.below(m_));
            std::uint32_t j = static_cast<std::uint32_t>(rng.below(m_));
            if (explicit_.count(pair_key(i, j))) continue;
            double lw = pair_log_weight(i, j);
            if (rng.uniform01() < std::exp(std::min(0.0, lw - log_env_)))
                return {pair_key(i, j), lw};
        }
        throw run_error("ConstantSampler: complement estimation stall");
    }

    LambdaSample finish(std::uint32_t i, std::uint32_t j, Rng& rng) const {
        double x = 2.0 * cfg_.eta * cfg_.kappa * sign_(i, j) * std::exp(-view_.log_cost(i, j));
        double p_plus = 1.0 / (1.0 + std::exp(-x));
        int sigma = rng.uniform01() < p_plus ? 1 : -1;
        return {i, j, sigma};
    }

    std::size_t m_;
    RoundingView view_;
    std::function<int(std::uint32_t, std::uint32_t)> sign_;
    int t_;
    ConstantSamplerConfig cfg_;
    std::unordered_set<std::uint64_t> explicit_;
    std::vector<std::uint64_t> keys_;
    std::vector<double> cdf_;
    double log_w_explicit_ = 0.0, log_w_complement_ = 0.0, log_w_total_ = 0.0, log_env_ = 0.0;
    std::size_t complement_count_ = 0, budget_ = 0;
    bool complement_estimated_ = false;
};

// ---------------------------------------------------------------------------
// ArbitrarySampler: partitions the pair universe by the rounded duals into
// D-constant rectangles plus the explicit leftover set E, weighs each part,
// and samples part-then-pair. With exact part weights (the desk default) the
// output distribution is exactly lambda; with estimated weights the TV error
// is O(volume_eps).
//
// The rounding state must outlive the sampler.
// ---------------------------------------------------------------------------

struct ArbitrarySamplerConfig {
    double eta = 1.0;
    double phi_exp = 0.5;
    bool exact_sums = true;
    double volume_eps = 0.05;        // estimator accuracy when !exact_sums
    bool prefix_via_oracle = false;  // FindClosePairs per rectangle
    const CpOracle* oracle = nullptr;
    FindClosePairsParams fcp{};
};

class ArbitrarySampler {
public:
    ArbitrarySampler(const PointSet& X, const PointSet& Y, const RoundingState& rounding,
                     const std::unordered_set<std::uint64_t>& shatter_set,
                     const DualState& duals, ArbitrarySamplerConfig cfg, std::uint64_t seed)
        : n_(X.size()), cfg_(cfg), duals_(duals), rd_(duals_) {
        const double neg_inf = -std::numeric_limits<double>::infinity();
        partition_ = partition_rectangles(duals_, n_);

        // Leftover set E: explicit triples with exact weights.
        double lmax = neg_inf;
        std::vector<double> lw;
        lw.reserve(partition_.leftover.size() * 2);
        for (auto key : partition_.leftover) {
            auto [i, j] = key_pair(key);
            double x = cfg_.eta * rd_.rounded(i, j) * std::exp(-rounding.log_cost(i, j));
            for (int s = 0; s < 2; ++s) {
                double v = (s == 0 ? 1.0 : -1.0) * rd_.sign(i, j) * x;
                lw.push_back(v);
                lmax = std::max(lmax, v);
            }
        }
        log_v_leftover_ = neg_inf;
        if (!lw.empty()) {
            leftover_cdf_.resize(lw.size());
            double acc = 0.0;
            for (std::size_t k = 0; k < lw.size(); ++k) {
                acc += std::exp(lw[k] - lmax);
                leftover_cdf_[k] = acc;
            }
            log_v_leftover_ = lmax + std::log(acc);
        }

        // Per-rectangle constant samplers.
        std::size_t rect_id = 0;
        const RoundedDuals* rdp = &rd_;
        for (auto& rect : partition_.rects) {
            rect_id++;
            const std::size_t m = rect.rows.size();
            auto row_map = rect.rows;
            auto col_map = rect.cols;
            RoundingView local{
                [row_map, col_map, &rounding](std::uint32_t i, std::uint32_t j) {
                    return rounding.psi(row_map[i], col_map[j]);
                },
                [row_map, col_map, &rounding](std::uint32_t i, std::uint32_t j) {
                    return rounding.down(row_map[i], col_map[j]);
                },
                rounding.eps()};

            std::vector<std::vector<int>> levels(m, std::vector<int>(m));
            for (std::uint32_t a = 0; a < m; ++a)
                for (std::uint32_t b = 0; b < m; ++b) levels[a][b] = local.level(a, b);

            int t;
            std::unordered_set<std::uint64_t> prefix;
            if (cfg_.prefix_via_oracle && cfg_.oracle) {
                PointSet XL(X.dim, X.phi), YL(Y.dim, Y.phi);
                for (auto r : rect.rows) XL.push_back(X.point(r));
                for (auto c : rect.cols) YL.push_back(Y.point(c));
                auto res = find_close_pairs(*cfg_.oracle, XL, YL, cfg_.phi_exp, rounding.eps(),
                                            derive_seed(seed, 0xfc0, rect_id), cfg_.fcp);
                t = res.t;
                prefix = std::move(res.pairs);
            } else {
                t = exact_prefix_level(levels, m, cfg_.phi_exp);
                for (std::uint32_t a = 0; a < m; ++a)
                    for (std::uint32_t b = 0; b < m; ++b)
                        if (levels[a][b] <= t) prefix.insert(pair_key(a, b));
            }

            std::unordered_set<std::uint64_t> down_local;
            for (std::uint32_t a = 0; a < m; ++a)
                for (std::uint32_t b = 0; b < m; ++b)
                    if (shatter_set.count(pair_key(row_map[a], col_map[b])))
                        down_local.insert(pair_key(a, b));

            ConstantSamplerConfig cc;
            cc.eta = cfg_.eta;
            cc.kappa = rect.kappa;
            cc.phi_exp = cfg_.phi_exp;
            cc.exact_complement = cfg_.exact_sums;
            cc.complement_eps = cfg_.volume_eps;
            samplers_.push_back(std::make_unique<ConstantSampler>(
                m, std::move(local),
                [rdp, row_map, col_map](std::uint32_t i, std::uint32_t j) {
                    return rdp->sign(row_map[i], col_map[j]);
                },
                t, prefix, down_local, cc, derive_seed(seed, 0xabcd, rect_id)));
        }

        // Part-selection distribution over {E} + rects.
        std::vector<double> log_v;
        log_v.push_back(log_v_leftover_);
        for (auto& s : samplers_) log_v.push_back(s->log_total_weight());
        double lm = neg_inf;
        for (double v : log_v) lm = std::max(lm, v);
        if (lm == neg_inf) throw input_error("ArbitrarySampler: empty instance");
        part_cdf_.resize(log_v.size());
        double acc = 0.0;
        for (std::size_t k = 0; k < log_v.size(); ++k) {
            acc += log_v[k] == neg_inf ? 0.0 : std::exp(log_v[k] - lm);
            part_cdf_[k] = acc;
        }
    }

    ArbitrarySampler(const ArbitrarySampler&) = delete;
    ArbitrarySampler& operator=(const ArbitrarySampler&) = delete;

    LambdaSample draw_one(Rng& rng) const {
        double r = rng.uniform01() * part_cdf_.back();
        std::size_t part =
            std::lower_bound(part_cdf_.begin(), part_cdf_.end(), r) - part_cdf_.begin();
        if (part >= part_cdf_.size()) part = part_cdf_.size() - 1;
        if (part == 0) {
            double r2 = rng.uniform01() * leftover_cdf_.back();
            std::size_t k2 =
                std::lower_bound(leftover_cdf_.begin(), leftover_cdf_.end(), r2) -
                leftover_cdf_.begin();
            if (k2 >= leftover_cdf_.size()) k2 = leftover_cdf_.size() - 1;
            auto [i, j] = key_pair(partition_.leftover[k2 / 2]);
            return {i, j, (k2 % 2 == 0) ? 1 : -1};
        }
        auto s = samplers_[part - 1]->draw(rng);
        const auto& rect = partition_.rects[part - 1];
        return {rect.rows[s.i], rect.cols[s.j], s.sigma};
    }

    std::vector<LambdaSample> draw(std::size_t count, std::uint64_t seed) const {
        Rng rng(derive_seed(seed, 0xd3a1));
        std::vector<LambdaSample> out;
        out.reserve(count);
        for (std::size_t k = 0; k < count; ++k) out.push_back(draw_one(rng));
        return out;
    }

    const RectanglePartition& partition() const { return partition_; }

private:
    std::size_t n_;
    ArbitrarySamplerConfig cfg_;
    DualState duals_;
    RoundedDuals rd_;
    RectanglePartition partition_;
    std::vector<std::unique_ptr<ConstantSampler>> samplers_;
    std::vector<double> leftover_cdf_, part_cdf_;
    double log_v_leftover_ = 0.0;
};

}  // namespace cpemd
