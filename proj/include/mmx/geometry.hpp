#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "combinatorics.hpp"
#include "ensemble.hpp"
#include "gauges.hpp"
#include "linalg.hpp"
#include "matrix.hpp"
#include "rng.hpp"

namespace mmx {

// ---- closed-form minimax rates ----------------------------------------------
// All rates carry implied constant 1; consumers compare as ratios.

struct RateBreakdown {
    double oracle = 0.0;
    double excess = 0.0;
    double total = 0.0;
    std::string formula;
    bool lower_bound_only = false;
};

inline nlohmann::ordered_json rate_to_json(const RateBreakdown& r) {
    return nlohmann::ordered_json{
        {"oracle", r.oracle}, {"excess", r.excess}, {"total", r.total}, {"formula", r.formula}};
}

// sigma^2 (k v s) tau|_{k^s}(1)^2 for the unconstrained mean model
inline RateBreakdown rate_oracle_mean(const GaugeContext& ctx, int k, int s, double sigma) {
    if (k < 1 || s < 1) throw domain_error("rate_oracle_mean: dimensions must be positive");
    const int r = std::min(k, s);
    const double t1 = gauge_at_ones(restricted(ctx, r));
    RateBreakdown out;
    out.oracle = sigma * sigma * std::max(k, s) * t1 * t1;
    out.excess = 0.0;
    out.total = out.oracle;
    out.formula = "sigma^2 (k v s) tau|_r(1)^2, r = k ^ s";
    return out;
}

// tau|_r(1)^2 (k v s)  +  L_{tau|_r}^2 (k log(ep/k) + s log(em/s))
inline RateBreakdown rate_submatrix(const GaugeContext& ctx, int k, int s, int p, int m) {
    if (k < 1 || s < 1 || k > p || s > m)
        throw domain_error("rate_submatrix: need 1 <= k <= p and 1 <= s <= m");
    const int r = std::min(k, s);
    const GaugeContext ctx_r = restricted(ctx, r);
    const double t1 = gauge_at_ones(ctx_r);
    const double lip = lipschitz(ctx_r);
    RateBreakdown out;
    out.oracle = t1 * t1 * std::max(k, s);
    out.excess = lip * lip * (k * std::log(std::exp(1.0) * p / k) +
                              s * std::log(std::exp(1.0) * m / s));
    out.total = out.oracle + out.excess;
    out.formula = "tau|_r(1)^2 (k v s) + L_{tau|_r}^2 (k log(ep/k) + s log(em/s))";
    return out;
}

// (k/n ^ 1) lambda^2 tau(1)^2, tau acting on R^k
inline RateBreakdown rate_covariance(const GaugeContext& ctx, int k, int n, double lambda) {
    if (k < 1 || n < 1) throw domain_error("rate_covariance: k and n must be positive");
    if (!(lambda > 0)) throw domain_error("rate_covariance: lambda must be positive");
    const double t1 = gauge_at_ones(restricted(ctx, k));
    RateBreakdown out;
    out.oracle = std::min(static_cast<double>(k) / n, 1.0) * lambda * lambda * t1 * t1;
    out.total = out.oracle;
    out.formula = "(k/n ^ 1) lambda^2 tau(1)^2";
    return out;
}

// (k v s) tau|_{k^s}(1)^2 (lambda ^ lambda^2); tight for Schatten q in [1,2],
// a lower bound for other gauges
inline RateBreakdown rate_poisson(const GaugeContext& ctx, int k, int s, double lambda) {
    if (k < 1 || s < 1) throw domain_error("rate_poisson: dimensions must be positive");
    if (!(lambda > 0)) throw domain_error("rate_poisson: lambda must be positive");
    const int r = std::min(k, s);
    const double t1 = gauge_at_ones(restricted(ctx, r));
    RateBreakdown out;
    out.oracle = std::max(k, s) * t1 * t1 * std::min(lambda, lambda * lambda);
    out.total = out.oracle;
    const auto* sch = std::get_if<SchattenGauge>(&ctx.gauge);
    out.lower_bound_only = !(sch && sch->q <= 2.0);
    out.formula = std::string("(k v s) tau|_r(1)^2 (lambda ^ lambda^2)") +
                  (out.lower_bound_only ? " [lower bound]" : "");
    return out;
}

// (sigma ^ a)^2 (ks/n) (k v s) tau|_r(1)^2 — lower bound only
inline RateBreakdown rate_completion(const GaugeContext& ctx, int k, int s, int r, int n,
                                     double sigma, double a) {
    if (k < 1 || s < 1) throw domain_error("rate_completion: dimensions must be positive");
    if (r < 1 || r > std::min(k, s)) throw domain_error("rate_completion: need 1 <= r <= k ^ s");
    if (n < 1 || static_cast<long>(n) > static_cast<long>(k) * s)
        throw domain_error("rate_completion: need 1 <= n <= ks");
    if (!(sigma >= 0) || !(a > 0)) throw domain_error("rate_completion: bad sigma or a");
    const double t1 = gauge_at_ones(restricted(ctx, r));
    const double noise = std::min(sigma, a);
    RateBreakdown out;
    out.oracle = noise * noise * (static_cast<double>(k) * s / n) * std::max(k, s) * t1 * t1;
    out.total = out.oracle;
    out.lower_bound_only = true;
    out.formula = "(sigma ^ a)^2 (ks/n) (k v s) tau|_r(1)^2 [lower bound]";
    return out;
}

// ---- Fano machinery -----------------------------------------------------------

struct FanoInputs {
    double epsilon = 0.0;      // packing radius
    double dkl_diameter = 0.0; // nats
    double log_packing = 0.0;  // nats
};

// (eps^2/4) max(0, 1 - (d_KL + log 2) / log M)
inline double fano_bound(const FanoInputs& in) {
    if (!(in.epsilon > 0) || in.dkl_diameter < 0 || !(in.log_packing > 0))
        throw domain_error("fano_bound: epsilon and log packing must be positive");
    const double frac = (in.dkl_diameter + std::log(2.0)) / in.log_packing;
    return (in.epsilon * in.epsilon / 4.0) * std::max(0.0, 1.0 - frac);
}

// the high-probability form, clamped to [0, 1]
inline double fano_probability(const FanoInputs& in) {
    if (!(in.log_packing > 0)) throw domain_error("fano_probability: log packing must be positive");
    const double v = 1.0 - (in.dkl_diameter + std::log(2.0)) / in.log_packing;
    return std::min(std::max(v, 0.0), 1.0);
}

// c_d = sup_{0<b<1} sup_{a>0} (ab/4)(1 - (da + 2 log 2)/(d log(1/b))).
// For fixed b, the inner problem is quadratic in a with maximizer
// a* = (t - 2 log 2 / d)/2 at t = log(1/b), giving (b t / 16) C(t)^2 with
// C(t) = 1 - 2 log 2/(d t). A coarse grid over t then golden-section
// refinement reaches relative tolerance 1e-5.
inline double fano_constant(int d) {
    if (d < 1) throw domain_error("fano_constant: d must be >= 1");
    const double dd = static_cast<double>(d);
    auto value_at = [dd](double t) {
        const double c = 1.0 - 2.0 * std::log(2.0) / (dd * t);
        if (c <= 0) return 0.0;
        return std::exp(-t) * t * c * c / 16.0;
    };

    double best_t = 1.0, best = 0.0;
    for (int i = 0; i <= 4000; ++i) {
        const double t = 1e-3 + i * (60.0 / 4000.0);
        const double v = value_at(t);
        if (v > best) {
            best = v;
            best_t = t;
        }
    }
    double lo = std::max(1e-4, best_t - 0.05), hi = best_t + 0.05;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = value_at(x1), f2 = value_at(x2);
    for (int it = 0; it < 200 && (hi - lo) > 1e-10 * hi; ++it) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = value_at(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = value_at(x1);
        }
    }
    return std::max(best, std::max(f1, f2));
}

// ---- Gaussian width and volumes ------------------------------------------------

struct WidthEstimate {
    double mean = 0.0;
    double stderr_of_mean = 0.0;
};

// Monte Carlo E ||Z||_{tau*} over iid Gaussian k x s matrices: the Gaussian
// width of the unit tau-ball.
inline WidthEstimate gaussian_width_mc(const GaugeContext& ctx, int k, int s, int reps,
                                       Seed seed) {
    if (reps < 2) throw domain_error("gaussian_width_mc: need at least two replicates");
    const GaugeContext dual_ctx = dual(ctx);
    double sum = 0.0, sumsq = 0.0;
    for (int rep = 0; rep < reps; ++rep) {
        Matrix z = sample_ensemble(GaussianIID{k, s, 1.0},
                                   Seed{seed.master, hash_combine(seed.stream, rep)});
        const double v = norm(dual_ctx, z);
        sum += v;
        sumsq += v * v;
    }
    WidthEstimate out;
    out.mean = sum / reps;
    const double var = std::max(0.0, (sumsq - reps * out.mean * out.mean) / (reps - 1));
    out.stderr_of_mean = std::sqrt(var / reps);
    return out;
}

// d log(delta sqrt(d) / (eps width)): log of the volume-ratio lower bound
inline double volume_ratio_log(double delta, double eps, int d, double width) {
    if (!(delta > 0) || !(eps > 0) || d < 1 || !(width > 0))
        throw domain_error("volume_ratio_log: all inputs must be positive");
    return d * std::log(delta * std::sqrt(static_cast<double>(d)) / (eps * width));
}

// exact log vol(B_2^d) = d log sqrt(pi) - log Gamma(d/2 + 1)
inline double log_vol_ball2(int d) {
    if (d < 1) throw domain_error("log_vol_ball2: d must be >= 1");
    return d * 0.5 * std::log(3.14159265358979323846) - std::lgamma(d / 2.0 + 1.0);
}

// ---- dispersion construction -----------------------------------------------------

struct DispersionOptions {
    int num_trials = 1000;  // sampled row subsets per certificate
    int retry_limit = 64;
    long exhaust_cap = 10000; // enumerate all subsets when C(k, j) fits
};

struct DispersionCertificate {
    long trials = 0;
    long passes = 0;
    bool exhaustive = false;
    std::vector<std::string> gauges;
};

struct DispersionResult {
    Matrix w;          // k x s, ||W||_F <= ||D||_F
    double c0 = 0.0;   // proof constant (c ^ 1) / (2K)
    int j_removed = 0; // rows removable: certificate checks |B| = k - j_removed
    DispersionCertificate certificate;
};

namespace detail {

// Nonzero singular values of U_B D1 via the l x l Gram matrix
// diag(d) (U_B' U_B) diag(d); returns the padded value vector.
inline std::vector<double> product_singular_values(const Matrix& u, const std::vector<int>& rows_b,
                                                   const std::vector<double>& top_d, int out_len,
                                                   double scale) {
    const int l = u.cols();
    Matrix gram(l, l);
    for (int a = 0; a < l; ++a)
        for (int b = a; b < l; ++b) {
            double s = 0.0;
            for (int i : rows_b) s += u.at(i, a) * u.at(i, b);
            gram.at(a, b) = s * top_d[a] * top_d[b];
            gram.at(b, a) = gram.at(a, b);
        }
    SymEig e = sym_eig(gram, false);
    std::vector<double> sv(out_len, 0.0);
    for (int i = 0; i < l && i < out_len; ++i)
        sv[i] = std::sqrt(std::max(0.0, e.values[i])) * scale;
    return sv;
}

} // namespace detail

// Probabilistic row-dispersion: spreads the energy of D across all rows so
// that dropping any j rows keeps a constant fraction of every unitarily
// invariant norm. Follows the K = 25 recipe: l = ceil(r/2K) top singular
// values of D feed H = U D1 with U Gaussian k x l; retries until
// sigma_1(U) <= 2 sqrt(k) and all sampled row subsets pass; W = H/(2 sqrt(k)).
inline DispersionResult construct_dispersion(const Matrix& d_in,
                                             const std::vector<GaugeContext>& gauges, Seed seed,
                                             DispersionOptions opt = {}) {
    const int k = d_in.rows(), s = d_in.cols();
    if (k < 50) throw domain_error("construct_dispersion: requires k >= 50");
    if (gauges.empty()) throw domain_error("construct_dispersion: need at least one gauge");
    const int r = std::min(k, s);

    const int big_k = 25;
    const int l = (r + 2 * big_k - 1) / (2 * big_k);
    const int j = (k + 2 * big_k - 1) / (2 * big_k);
    const double c =
        (std::sqrt(big_k - 1.0) - std::sqrt((big_k - 1.0) / 2.0) - 1.0) / (2.0 * big_k);
    const double c0 = std::min(c, 1.0) / (2.0 * big_k);

    const std::vector<double> dsv = svd_values(d_in);
    const std::vector<double> top_d(dsv.begin(), dsv.begin() + l);
    const double d_fro = frobenius_norm(d_in);

    // ||D||_tau per gauge, via the singular values of D
    std::vector<double> d_norms(gauges.size());
    std::vector<GaugeContext> eval_ctx;
    for (std::size_t gi = 0; gi < gauges.size(); ++gi) {
        d_norms[gi] = gauge_eval(restricted(gauges[gi], r), dsv);
        eval_ctx.push_back(restricted(gauges[gi], std::min(k - j, s)));
    }

    const bool exhaustive = detail::log_binomial(k, j) <= std::log(static_cast<double>(opt.exhaust_cap));

    for (int attempt = 0; attempt < opt.retry_limit; ++attempt) {
        RandomStream rng(Seed{seed.master, hash_combine(seed.stream, attempt)});
        Matrix u(k, l);
        for (double& v : u.entries()) v = rng.gaussian();
        if (svd_values(u).front() > 2.0 * std::sqrt(static_cast<double>(k))) continue;

        const double scale = 1.0 / (2.0 * std::sqrt(static_cast<double>(k)));
        DispersionCertificate cert;
        cert.exhaustive = exhaustive;
        for (const auto& g : gauges) cert.gauges.push_back(format_gauge(g.gauge));

        bool ok = true;
        auto check_b = [&](const std::vector<int>& rows_b) {
            ++cert.trials;
            const std::vector<double> sv =
                detail::product_singular_values(u, rows_b, top_d, std::min(k - j, s), scale);
            for (std::size_t gi = 0; gi < gauges.size(); ++gi)
                if (gauge_eval(eval_ctx[gi], sv) < c0 * d_norms[gi]) return false;
            ++cert.passes;
            return true;
        };

        if (exhaustive) {
            std::vector<int> all(k);
            for (int i = 0; i < k; ++i) all[i] = i;
            // iterate over removed subsets of size j; B is the complement
            for (detail::Combinations rem(all, j); !rem.done() && ok; rem.next()) {
                const std::vector<int> gone = rem.current();
                std::vector<int> rows_b;
                rows_b.reserve(k - j);
                std::size_t t = 0;
                for (int i = 0; i < k; ++i) {
                    if (t < gone.size() && gone[t] == i) {
                        ++t;
                        continue;
                    }
                    rows_b.push_back(i);
                }
                ok = check_b(rows_b);
            }
        } else {
            for (int trial = 0; trial < opt.num_trials && ok; ++trial) {
                std::vector<int> perm(k);
                for (int i = 0; i < k; ++i) perm[i] = i;
                for (int i = 0; i < k - j; ++i)
                    std::swap(perm[i], perm[i + rng.uniform_int(k - i)]);
                perm.resize(k - j);
                ok = check_b(perm);
            }
        }
        if (!ok) continue;

        DispersionResult out;
        out.w = Matrix(k, s);
        for (int i = 0; i < k; ++i)
            for (int jj = 0; jj < l; ++jj) out.w.at(i, jj) = u.at(i, jj) * top_d[jj] * scale;
        out.c0 = c0;
        out.j_removed = j;
        out.certificate = cert;
        if (frobenius_norm(out.w) > d_fro * (1.0 + 1e-12))
            throw construction_failed("construct_dispersion: Frobenius contraction violated");
        return out;
    }
    throw construction_failed("construct_dispersion: retry limit exceeded");
}

// ---- Gilbert–Varshamov style subset family ------------------------------------

// Greedy rejection sampling of k-subsets of [p] with pairwise intersections
// at most k0; stops at target or after 50 * target rejections.
inline std::vector<IndexSet> subset_family_gv(int p, int k, int k0, int target, Seed seed) {
    if (!(k0 < k) || k > p) throw domain_error("subset_family_gv: need k0 < k <= p");
    if (target < 1) throw domain_error("subset_family_gv: target must be positive");
    RandomStream rng(seed);
    std::vector<IndexSet> family;
    long rejections = 0;
    std::vector<int> pool(p);
    for (int i = 0; i < p; ++i) pool[i] = i + 1;
    while (static_cast<int>(family.size()) < target && rejections < 50L * target) {
        std::vector<int> scratch = pool;
        for (int i = 0; i < k; ++i)
            std::swap(scratch[i], scratch[i + rng.uniform_int(p - i)]);
        scratch.resize(k);
        std::sort(scratch.begin(), scratch.end());
        bool ok = true;
        for (const auto& other : family) {
            int inter = 0;
            std::size_t a = 0, b = 0;
            while (a < scratch.size() && b < other.members.size()) {
                if (scratch[a] == other.members[b]) {
                    ++inter;
                    ++a;
                    ++b;
                } else if (scratch[a] < other.members[b])
                    ++a;
                else
                    ++b;
            }
            if (inter > k0) {
                ok = false;
                break;
            }
        }
        if (ok)
            family.push_back(IndexSet::of(p, scratch));
        else
            ++rejections;
    }
    return family;
}

// ---- packing construction ---------------------------------------------------------

struct PackingOptions {
    int target = 64; // requested family size for the dispersion branch
};

struct PackingFamily {
    std::vector<Matrix> members;
    double min_pairwise_norm = 0.0;
    GaugeContext gauge;
    double log_cardinality = 0.0;
    double c1 = 0.0; // recorded packing-radius constant (units of L_{tau|r})
};

// Packing of B_2 intersected with the k x s row/column-sparse cone inside
// R^{p x m}. Small k uses the basis family {e_i e_1'}; k >= 50 embeds a
// dispersed Lipschitz maximizer on near-disjoint row supports.
inline PackingFamily construct_packing(int p, int m, int k, int s, const GaugeContext& ctx,
                                       Seed seed, PackingOptions opt = {}) {
    if (k < 1 || s < 1 || k > p || s > m)
        throw domain_error("construct_packing: need 1 <= k <= p and 1 <= s <= m");
    if (ctx.dim < std::min(p, m))
        throw dimension_error("construct_packing: gauge dimension must cover min(p, m)");
    const int r = std::min(k, s);
    const GaugeContext ctx_r = restricted(ctx, r);
    const double lip = lipschitz(ctx_r);

    const int big_k = 25;
    const double c =
        (std::sqrt(big_k - 1.0) - std::sqrt((big_k - 1.0) / 2.0) - 1.0) / (2.0 * big_k);
    const double c0 = std::min(c, 1.0) / (2.0 * big_k);

    PackingFamily fam;
    fam.gauge = ctx;
    fam.c1 = std::min(c0 / 3.0, 1.0 / std::sqrt(50.0));

    if (k < 50) {
        // single-entry basis family
        for (int i = 1; i <= p; ++i) {
            Matrix v(p, m);
            v.at(i - 1, 0) = 1.0;
            fam.members.push_back(std::move(v));
        }
    } else {
        // D = diag of the restricted Lipschitz maximizer, dispersed over rows
        const std::vector<double> x = lipschitz_maximizer(ctx_r);
        Matrix d = Matrix::diag(x, k, s);
        DispersionResult disp = construct_dispersion(d, {ctx}, seed);
        const int k0 = static_cast<int>(std::floor(disp.c0 * k));
        std::vector<IndexSet> supports =
            subset_family_gv(p, k, std::max(k0, 0), opt.target,
                             Seed{seed.master, hash_combine(seed.stream, 0x5041434bULL)});
        for (const auto& rows : supports)
            fam.members.push_back(block_embed(disp.w, p, m, rows,
                                              IndexSet::of(m, IndexSet::full(s).members)));
    }

    if (fam.members.size() < 2) throw construction_failed("construct_packing: family too small");
    fam.log_cardinality = std::log(static_cast<double>(fam.members.size()));

    double min_norm = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < fam.members.size(); ++i)
        for (std::size_t j = i + 1; j < fam.members.size(); ++j)
            min_norm = std::min(min_norm, norm(ctx, fam.members[i] - fam.members[j]));
    fam.min_pairwise_norm = min_norm;
    if (min_norm < fam.c1 * lip)
        throw construction_failed("construct_packing: packing radius below the recorded constant");
    return fam;
}

} // namespace mmx
