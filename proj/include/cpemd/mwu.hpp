#pragma once

#include "aspect.hpp"
#include "sampler.hpp"

namespace cpemd {

// ---------------------------------------------------------------------------
// MWU parameters. Faithful mode instantiates the worst-case formulas with
// explicit constants; the resulting round and sample counts are astronomically
// large (they are worst-case polylogs with huge constants), so practical mode
// caps both and records the caps. The formula values are always kept for the
// structural identities the tests assert.
// ---------------------------------------------------------------------------

struct MwuParams {
    std::string mode;  // "faithful" | "practical"
    double eps = 0.0, phi_exp = 0.0;
    int h = 0;
    double d_lower = 0.0, d_upper = 0.0, d_tree = 0.0;  // D_l, D_u, D_T
    double gamma_gap = 0.0, k_bound = 0.0, eta = 0.0, chi = 0.0, delta = 0.0;
    double rounds = 0.0, samples = 0.0;  // formula values (may be astronomical)

    // operating values actually used by the solver
    long long rounds_op = 0;
    std::size_t samples_op = 0;
    double chi_op = 0.0, eta_op = 0.0;
};

struct SolverConfig {
    std::string mode = "practical";
    long long max_rounds = 6;
    std::size_t sample_cap = 200000;
    double relax = 1.0;  // additional divisor on rounds and samples
    bool exact_sums = true;
    bool prefix_via_oracle = false;
    const CpOracle* oracle = nullptr;
};

inline MwuParams compute_params(std::size_t n, double phi, double eps, double phi_exp,
                                const SolverConfig& cfg) {
    if (!(eps > 0.0 && eps < 0.5)) throw input_error("compute_params: eps must be in (0, 0.5)");
    if (n < 1) throw input_error("compute_params: empty instance");
    MwuParams p;
    p.mode = cfg.mode;
    p.eps = eps;
    p.phi_exp = phi_exp;
    double log_phi = std::max(1.0, std::log2(std::max(phi, 2.0)));
    double nd = static_cast<double>(std::max<std::size_t>(n, 2));
    p.h = static_cast<int>(std::ceil(log_phi)) + 1;
    p.d_lower = eps / log_phi;
    p.d_upper = 8.0 * std::log(nd);
    p.d_tree = p.d_upper / p.d_lower;
    p.gamma_gap = eps * p.d_lower / (2.0 * p.h);
    p.k_bound = p.d_upper * p.d_tree;
    p.eta = p.gamma_gap / (100.0 * p.k_bound * p.k_bound);
    p.rounds = std::ceil(std::log(2.0 * nd * nd) / (100.0 * p.eta * p.gamma_gap));
    p.chi = p.gamma_gap / (100.0 * p.rounds * p.k_bound);
    p.delta = 1.0 / (100.0 * p.rounds);
    double ratio = p.h * p.d_upper / (eps * p.d_lower);
    p.samples = nd * ratio * ratio / (p.delta * p.delta);

    if (cfg.mode == "faithful") {
        // Formula eta and chi, with the operational budget caps still applied
        // (the formula counts are astronomically large by construction).
        p.rounds_op = static_cast<long long>(
            std::min(p.rounds, static_cast<double>(cfg.max_rounds)));
        p.samples_op = static_cast<std::size_t>(
            std::min(p.samples, static_cast<double>(cfg.sample_cap)));
        p.chi_op = std::max(p.chi, 1e-9);
        p.eta_op = p.eta;
    } else {
        double relax = std::max(1.0, cfg.relax);
        p.rounds_op = std::max<long long>(
            1, std::min<double>(p.rounds, static_cast<double>(cfg.max_rounds)) / relax);
        double want = std::clamp(48.0 * nd * nd, 8000.0, static_cast<double>(cfg.sample_cap));
        p.samples_op = static_cast<std::size_t>(
            std::max(1000.0, std::min(p.samples, want) / relax));
        p.chi_op = std::max(p.chi, 1.0 / 64.0);
        p.eta_op = p.eta;  // adjusted adaptively after the first round
    }
    return p;
}

// ---------------------------------------------------------------------------
// The solver instance: expanded (unit-supply) perturbed point sets sharing a
// quadtree whose first |X| leaves are the X points.
// ---------------------------------------------------------------------------

struct MwuInstance {
    PointSet X, Y;  // perturbed coordinates
    QuadTree tree;
    double t0 = 0.0;                 // tree EMD of the matching instance
    double d_upper_emp = 1.0;        // max d_T / dist over cross pairs
    double d_lower_emp = 1.0;        // min d_T / dist over cross pairs
    std::vector<double> node_static; // |X_v| - |Y_v| per tree node
};

inline MwuInstance build_instance(const PointSet& Xp, const PointSet& Yp, double eps,
                                  std::uint64_t seed) {
    if (Xp.size() != Yp.size() || Xp.size() == 0)
        throw input_error("build_instance: need equal nonempty sides");
    MwuInstance inst;
    PointSet U = Xp;
    for (std::size_t j = 0; j < Yp.size(); ++j) U.push_back(Yp.point(j));
    U.phi = std::max(Xp.phi, Yp.phi);
    auto emb = embed_and_perturb(U, eps, derive_seed(seed, 0xe3bd));
    std::size_t m = Xp.size();
    inst.tree = std::move(emb.tree);
    inst.X = PointSet(emb.Y.dim, emb.Y.phi);
    inst.Y = PointSet(emb.Y.dim, emb.Y.phi);
    for (std::size_t i = 0; i < m; ++i) inst.X.push_back(emb.Y.point(i));
    for (std::size_t j = 0; j < m; ++j) inst.Y.push_back(emb.Y.point(m + j));
    inst.t0 = greedy_tree_bound(inst.tree, m);

    inst.d_upper_emp = 0.0;
    inst.d_lower_emp = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double dt = inst.tree.distance(i, m + j);
            double dl = l1_distance(inst.X.point(i), inst.Y.point(j));
            if (dl <= 0.0) continue;
            inst.d_upper_emp = std::max(inst.d_upper_emp, dt / dl);
            inst.d_lower_emp = std::min(inst.d_lower_emp, dt / dl);
        }
    if (!(inst.d_lower_emp > 0.0) || !std::isfinite(inst.d_lower_emp))
        throw run_error("build_instance: degenerate tree distortion");

    inst.node_static.assign(inst.tree.node_count(), 0.0);
    for (std::size_t i = 0; i < 2 * m; ++i) {
        double v = i < m ? 1.0 : -1.0;
        for (int l = 1; l <= inst.tree.height; ++l)
            inst.node_static[inst.tree.anc[l][i]] += v;
    }
    return inst;
}

// ---------------------------------------------------------------------------
// Certify: consume samples from lambda', decide Fail soundly, otherwise build
// integer duals from the best tree level.
//
// Fail test: the sampled flow gamma-hat routes mu-hat -> nu-hat with cost
// F-hat, and the residual needs R-hat = EMD(1 - mu-hat, 1 - nu-hat) (computed
// exactly at desk scale), so EMD <= F-hat + R-hat unconditionally. Failing
// when that bound is at most (1 + 2.5 eps) t keeps the contract
// "Fail => EMD <= (1 + 3 eps) t" with margin.
// ---------------------------------------------------------------------------

struct CertifyOutcome {
    bool failed = false;
    std::vector<long long> alpha2, beta2;  // duals scaled by 2 (exact integers)
    double v = 0.0;                        // (1/t)(sum alpha - sum beta)
    int level = 0;                         // chosen tree level
    double flow_cost = 0.0;                // F-hat
    double residual = 0.0;                 // R-hat
    double achieved_gap = 0.0;             // best level value / t
    std::size_t samples_used = 0;
};

inline CertifyOutcome certify(const MwuInstance& inst, const RoundingState& rounding,
                              const std::vector<LambdaSample>& samples, double t,
                              const MwuParams& params) {
    const std::size_t m = inst.X.size();
    const double s = static_cast<double>(samples.size());
    CertifyOutcome out;
    out.samples_used = samples.size();

    // Empirical supplies mu-hat, nu-hat and the netted flow.
    std::vector<double> mu(m, 0.0), nu(m, 0.0);
    std::unordered_map<std::uint64_t, long long> net;
    for (const auto& smp : samples) {
        double c = rounding.cost(smp.i, smp.j);
        double w = t / (s * c) * smp.sigma;
        mu[smp.i] += w;
        nu[smp.j] += w;
        net[pair_key(smp.i, smp.j)] += smp.sigma;
    }
    double flow_cost = 0.0;
    for (auto& [key, cnt] : net) {
        if (cnt == 0) continue;
        auto [i, j] = key_pair(key);
        flow_cost += std::abs(static_cast<double>(cnt)) / rounding.cost(i, j) *
                     l1_distance(inst.X.point(i), inst.Y.point(j));
    }
    flow_cost *= t / s;
    out.flow_cost = flow_cost;

    // Residual EMD under the true metric.
    std::vector<double> b(2 * m, 0.0);
    double imbalance = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        b[i] = 1.0 - mu[i];
        b[m + i] = -(1.0 - nu[i]);
        imbalance += b[i] + b[m + i];
    }
    b[0] -= imbalance;
    auto dist_union = [&](int a, int c) {
        auto pa = a < static_cast<int>(m) ? inst.X.point(a) : inst.Y.point(a - m);
        auto pc = c < static_cast<int>(m) ? inst.X.point(c) : inst.Y.point(c - m);
        return l1_distance(pa, pc);
    };
    out.residual = exact_emd_supply_metric(2 * m, dist_union, b).cost;

    if (out.flow_cost + out.residual <= (1.0 + 2.5 * params.eps) * t) {
        out.failed = true;
        return out;
    }

    // Per-level sampled statistics Z_v and the level values of the tree-EMD
    // certificate construction.
    const auto& T = inst.tree;
    std::vector<double> zsum(T.node_count(), 0.0);
    double sq_sum = 0.0;
    for (const auto& smp : samples) {
        double inc = smp.sigma / rounding.cost(smp.i, smp.j);
        sq_sum += inc * inc;
        for (int l = 1; l <= T.height; ++l) {
            zsum[T.anc[l][smp.i]] += inc;
            zsum[T.anc[l][m + smp.j]] -= inc;
        }
    }

    std::vector<double> level_value(T.height + 1, 0.0);
    std::vector<int> level_nodes(T.height + 1, 0);
    std::vector<double> node_val(T.node_count(), 0.0);
    for (int v = 0; v < T.node_count(); ++v) {
        int depth = T.node_depth[v];
        if (depth == 0) continue;
        double weight = T.phi / std::pow(2.0, depth);
        node_val[v] = inst.node_static[v] - (t / s) * zsum[v];
        level_value[depth] += weight * std::abs(node_val[v]);
        level_nodes[depth]++;
    }

    // Diagnostic level: the first level clearing both the gap threshold and a
    // 4-sigma sampling margin, falling back to the argmax level.
    int chosen = 0;
    double best = -1.0;
    for (int l = 1; l <= T.height; ++l) {
        if (level_value[l] > best) {
            best = level_value[l];
            chosen = l;
        }
    }
    for (int l = 1; l <= T.height; ++l) {
        double margin = 4.0 * (t / s) *
                        std::sqrt(2.0 * std::max(1, level_nodes[l]) * sq_sum) *
                        (T.phi / std::pow(2.0, l));
        if (level_value[l] - margin >= params.gamma_gap * t * 2.0) {
            chosen = l;
            break;
        }
    }
    out.level = chosen;
    out.achieved_gap = level_value[chosen] / t;

    // Duals: the per-level sign construction summed over every level. Each
    // level contributes its own nonnegative gap to the special constraint, so
    // the sum clears it at least as well as the single best level, and
    // |alpha_i - beta_j| <= d_T(i, j) still holds (signs telescope along the
    // divergent path suffix only).
    out.alpha2.assign(m, 0);
    out.beta2.assign(m, 0);
    for (int l = 1; l <= T.height; ++l) {
        long long unit = (2 * static_cast<long long>(std::llround(T.phi))) >> l;
        if (unit < 1) unit = 1;
        for (std::size_t i = 0; i < m; ++i) {
            int vx = T.anc[l][i];
            int vy = T.anc[l][m + i];
            out.alpha2[i] += (node_val[vx] >= 0.0 ? 1 : -1) * unit;
            out.beta2[i] += (node_val[vy] >= 0.0 ? 1 : -1) * unit;
        }
    }
    long long sum2 = 0;
    for (std::size_t i = 0; i < m; ++i) sum2 += out.alpha2[i] - out.beta2[i];
    out.v = static_cast<double>(sum2) / (2.0 * t);
    return out;
}

// ---------------------------------------------------------------------------
// Certificate verification: the strict Gamma_t inequality over all pairs,
// plus the rescaled feasible dual whose objective lower-bounds the EMD
// exactly (weak duality under the true distances).
// ---------------------------------------------------------------------------

struct Certificate {
    std::vector<long long> alpha2, beta2;  // duals scaled by 2
    double t = 0.0;
    double rescaled_objective = 0.0;
};

struct VerifyResult {
    bool in_gamma = false;
    double margin = 0.0;              // (1/t)(sum a - sum b) - max ratio
    double rescaled_objective = 0.0;  // exact EMD lower bound
};

inline VerifyResult verify_certificate(const std::vector<long long>& alpha2,
                                       const std::vector<long long>& beta2, double t,
                                       const RoundingState& rounding) {
    std::size_t m = alpha2.size();
    VerifyResult res;
    long long sum2 = 0;
    for (std::size_t i = 0; i < m; ++i) sum2 += alpha2[i] - beta2[i];
    double objective = static_cast<double>(sum2) / 2.0;
    double max_ratio_cost = 0.0, max_ratio_true = 0.0;
    for (std::uint32_t i = 0; i < m; ++i)
        for (std::uint32_t j = 0; j < m; ++j) {
            double diff = std::abs(static_cast<double>(alpha2[i] - beta2[j])) / 2.0;
            max_ratio_cost = std::max(max_ratio_cost, diff / rounding.cost(i, j));
            max_ratio_true = std::max(max_ratio_true, diff / rounding.distance(i, j));
        }
    res.margin = objective / t - max_ratio_cost;
    res.in_gamma = res.margin > 0.0;
    res.rescaled_objective = max_ratio_true > 0.0 ? objective / max_ratio_true : 0.0;
    return res;
}

// ---------------------------------------------------------------------------
// One MWU run at threshold t. Fail is sound unconditionally; a certificate is
// returned only after it verifies exactly (the desk-scale n^2 check), so a
// returned certificate is sound as well. A run that neither fails nor
// verifies within its round budget reports Exhausted.
// ---------------------------------------------------------------------------

enum class MwuStatus { Fail, Certified, Exhausted };

struct RoundDiag {
    int round = 0;
    double t = 0.0;
    int level = 0;
    double gap = 0.0, flow_cost = 0.0, residual = 0.0;
    std::size_t samples = 0;
    bool failed = false, verified = false;
};

struct MwuOutcome {
    MwuStatus status = MwuStatus::Exhausted;
    int fail_round = 0;
    Certificate cert;
    std::vector<RoundDiag> diag;
};

inline MwuOutcome mwu_run(const MwuInstance& inst, const RoundingState& rounding,
                          const std::unordered_set<std::uint64_t>& shatter, double t,
                          MwuParams params, const SolverConfig& cfg, std::uint64_t seed) {
    const std::size_t m = inst.X.size();
    MwuOutcome out;
    DualState acc;
    acc.alpha.assign(m, 0);
    acc.beta.assign(m, 0);
    acc.chi = params.chi_op;

    for (long long r = 1; r <= params.rounds_op; ++r) {
        ArbitrarySamplerConfig scfg;
        scfg.eta = params.eta_op;
        scfg.phi_exp = params.phi_exp;
        scfg.exact_sums = cfg.exact_sums;
        scfg.prefix_via_oracle = cfg.prefix_via_oracle;
        scfg.oracle = cfg.oracle;
        ArbitrarySampler sampler(inst.X, inst.Y, rounding, shatter, acc, scfg,
                                 derive_seed(seed, 0x4111, r));
        auto samples = sampler.draw(params.samples_op, derive_seed(seed, 0x52a9, r));
        auto cert = certify(inst, rounding, samples, t, params);

        RoundDiag d;
        d.round = static_cast<int>(r);
        d.t = t;
        d.level = cert.level;
        d.gap = cert.achieved_gap;
        d.flow_cost = cert.flow_cost;
        d.residual = cert.residual;
        d.samples = cert.samples_used;
        d.failed = cert.failed;

        if (cert.failed) {
            out.diag.push_back(d);
            out.status = MwuStatus::Fail;
            out.fail_round = static_cast<int>(r);
            return out;
        }

        for (std::size_t i = 0; i < m; ++i) {
            acc.alpha[i] += cert.alpha2[i];
            acc.beta[i] += cert.beta2[i];
        }
        // In practical mode the first round also calibrates eta so the
        // weight exponents move by O(1) per round.
        if (params.mode != "faithful" && r == 1) {
            double max_ratio = 0.0;
            for (std::uint32_t i = 0; i < m; ++i)
                for (std::uint32_t j = 0; j < m; ++j)
                    max_ratio = std::max(
                        max_ratio, std::abs(static_cast<double>(acc.alpha[i] - acc.beta[j])) /
                                       (2.0 * rounding.cost(i, j)));
            if (max_ratio > 0.0) params.eta_op = std::max(params.eta, 0.5 / max_ratio);
        }

        auto ver = verify_certificate(acc.alpha, acc.beta, t, rounding);
        d.verified = ver.in_gamma;
        out.diag.push_back(d);
        if (ver.in_gamma) {
            out.status = MwuStatus::Certified;
            out.cert.alpha2 = acc.alpha;
            out.cert.beta2 = acc.beta;
            out.cert.t = t;
            out.cert.rescaled_objective = ver.rescaled_objective;
            return out;
        }
    }
    out.status = MwuStatus::Exhausted;
    return out;
}

// ---------------------------------------------------------------------------
// Full pipeline: dedup, aspect-ratio reduction, per-part embedding and
// exponential search, returning the summed estimate. The search ascends
// t_k = t_lo (1+eps)^k and takes the smallest failing t_k; verified
// certificates supply an exact lower bound that the result never undercuts.
// ---------------------------------------------------------------------------

struct ApproxPartReport {
    std::size_t points = 0;
    double scale = 1.0;
    double t_lo = 0.0, t_hi = 0.0;
    double t_fail = 0.0;        // smallest failing threshold (0 if none)
    double best_certified = 0.0;
    double estimate = 0.0;      // contribution in original units
    int searches = 0;
    std::vector<RoundDiag> diag;
};

struct ApproxResult {
    double value = 0.0;
    MwuParams params;  // of the largest part
    std::vector<ApproxPartReport> parts;
};

inline ApproxResult approximate_emd(const PointSet& X, const PointSet& Y, double eps,
                                    double phi_exp, const SolverConfig& cfg,
                                    std::uint64_t seed) {
    if (X.size() != Y.size()) throw input_error("approximate_emd: |X| != |Y|");
    ApproxResult result;
    auto [Xd, Yd] = dedup_and_cancel(X, Y);
    if (Xd.size() == 0) return result;

    PointSet U = Xd;
    for (std::size_t j = 0; j < Yd.size(); ++j) U.push_back(Yd.point(j));
    U.phi = std::max(Xd.phi, Yd.phi);
    SupplyDemand b;
    b.b.assign(Xd.size() + Yd.size(), 1);
    for (std::size_t j = 0; j < Yd.size(); ++j) b.b[Xd.size() + j] = -1;

    auto reduced = reduce_aspect_ratio(U, b, eps, derive_seed(seed, 0xa59e));

    std::size_t part_id = 0, largest_part = 0;
    for (auto& part : reduced.parts) {
        ++part_id;
        // Expand integer supplies into unit multisets.
        PointSet Xp(part.points.dim, part.points.phi), Yp(part.points.dim, part.points.phi);
        for (std::size_t i = 0; i < part.points.size(); ++i) {
            for (long long c = 0; c < part.b.b[i]; ++c) Xp.push_back(part.points.point(i));
            for (long long c = 0; c < -part.b.b[i]; ++c) Yp.push_back(part.points.point(i));
        }
        if (Xp.size() == 0) continue;

        ApproxPartReport rep;
        rep.points = Xp.size();
        rep.scale = part.scale;

        auto inst = build_instance(Xp, Yp, eps, derive_seed(seed, 0x1457, part_id));
        auto params = compute_params(Xp.size(), inst.X.phi, eps, phi_exp, cfg);

        RoundingState rounding(inst.X, inst.Y, eps);
        auto shatter = draw_rounding_set(Xp.size(), phi_exp, derive_seed(seed, 0xd0d0, part_id));
        rounding.set_down_set(shatter);

        // Start three grid steps below the distortion bracket so the low end
        // of the sweep produces verified certificates, not just failures.
        rep.t_lo = inst.t0 / inst.d_upper_emp / std::pow(1.0 + eps, 3);
        rep.t_hi = inst.t0 / inst.d_lower_emp * (1.0 + eps);

        double t_fail = 0.0, best_cert = 0.0;
        for (double t = rep.t_lo; t <= rep.t_hi; t *= (1.0 + eps)) {
            rep.searches++;
            auto outc = mwu_run(inst, rounding, shatter, t, params, cfg,
                                derive_seed(seed, 0x3a3c + rep.searches, part_id));
            for (auto& d : outc.diag) rep.diag.push_back(d);
            if (outc.status == MwuStatus::Fail) {
                t_fail = t;
                break;
            }
            if (outc.status == MwuStatus::Certified)
                best_cert = std::max(best_cert, outc.cert.rescaled_objective);
        }
        rep.t_fail = t_fail;
        rep.best_certified = best_cert;
        double estimate = std::max(t_fail > 0.0 ? t_fail : rep.t_hi, best_cert);
        rep.estimate = estimate / part.scale;
        result.value += rep.estimate;
        if (rep.points > largest_part) {
            largest_part = rep.points;
            result.params = params;
        }
        result.parts.push_back(std::move(rep));
    }
    return result;
}

}  // namespace cpemd
