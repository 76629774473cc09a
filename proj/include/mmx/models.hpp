#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ensemble.hpp"
#include "gauges.hpp"
#include "linalg.hpp"
#include "matrix.hpp"
#include "rng.hpp"

namespace mmx {

// ---- model specifications ------------------------------------------------

// Y = M + sigma Z with optional submatrix sparsity (at most k nonzero rows
// and s nonzero columns).
struct GaussianMeanModel {
    int p = 0, m = 0;
    double sigma = 1.0; // sigma = 0 gives the noiseless degenerate model
    std::optional<std::pair<int, int>> sparsity; // (k, s)
};

// n rows drawn from N(0, Sigma), Sigma symmetric PSD with sigma_1 <= lambda.
struct CovarianceModel {
    int k = 0, n = 0;
    double lambda = 1.0;
};

// X_ij ~ Poisson(Lambda_ij) with entries in [0, lambda].
struct PoissonModel {
    int k = 0, s = 0;
    double lambda = 1.0;
};

// Y_i = <X_i, M> + sigma Z_i over uniformly sampled basis matrices; M has
// rank <= r and entries bounded by a.
struct CompletionModel {
    int k = 0, s = 0, r = 1;
    double a = 1.0;
    double sigma = 1.0;
    int n = 1;
    bool with_replacement = true;
};

using ModelSpec = std::variant<GaussianMeanModel, CovarianceModel, PoissonModel, CompletionModel>;

struct KLResult {
    double value = 0.0; // nats
    bool exact = true;  // exact formula vs upper bound
};

inline void validate(const ModelSpec& spec) {
    if (const auto* g = std::get_if<GaussianMeanModel>(&spec)) {
        if (g->p <= 0 || g->m <= 0) throw invalid_spec("gaussian_mean: dimensions must be positive");
        if (!(g->sigma >= 0)) throw invalid_spec("gaussian_mean: sigma must be nonnegative");
        if (g->sparsity) {
            const auto [k, s] = *g->sparsity;
            if (k < 1 || k > g->p || s < 1 || s > g->m)
                throw invalid_spec("gaussian_mean: sparsity must satisfy 1 <= k <= p, 1 <= s <= m");
        }
    } else if (const auto* c = std::get_if<CovarianceModel>(&spec)) {
        if (c->k <= 0 || c->n <= 0) throw invalid_spec("covariance: k and n must be positive");
        if (!(c->lambda > 0)) throw invalid_spec("covariance: lambda must be positive");
    } else if (const auto* po = std::get_if<PoissonModel>(&spec)) {
        if (po->k <= 0 || po->s <= 0) throw invalid_spec("poisson: dimensions must be positive");
        if (!(po->lambda > 0)) throw invalid_spec("poisson: lambda must be positive");
    } else if (const auto* co = std::get_if<CompletionModel>(&spec)) {
        if (co->k <= 0 || co->s <= 0) throw invalid_spec("completion: dimensions must be positive");
        if (co->r < 1 || co->r > std::min(co->k, co->s))
            throw invalid_spec("completion: rank cap must satisfy 1 <= r <= min(k, s)");
        if (!(co->a > 0)) throw invalid_spec("completion: entry cap must be positive");
        if (!(co->sigma >= 0)) throw invalid_spec("completion: sigma must be nonnegative");
        if (co->n < 1 || co->n > static_cast<long>(co->k) * co->s)
            throw invalid_spec("completion: observations must satisfy 1 <= n <= k*s");
    }
}

// ---- membership in the parameter space ------------------------------------

inline bool member(const ModelSpec& spec, const Matrix& theta) {
    validate(spec);
    if (const auto* g = std::get_if<GaussianMeanModel>(&spec)) {
        if (theta.rows() != g->p || theta.cols() != g->m)
            throw dimension_error("member: theta shape does not match model");
        if (!g->sparsity) return true;
        const auto [k, s] = *g->sparsity;
        int nz_rows = 0, nz_cols = 0;
        for (int i = 0; i < theta.rows(); ++i)
            for (int j = 0; j < theta.cols(); ++j)
                if (theta.at(i, j) != 0.0) {
                    ++nz_rows;
                    break;
                }
        for (int j = 0; j < theta.cols(); ++j)
            for (int i = 0; i < theta.rows(); ++i)
                if (theta.at(i, j) != 0.0) {
                    ++nz_cols;
                    break;
                }
        return nz_rows <= k && nz_cols <= s;
    }
    if (const auto* c = std::get_if<CovarianceModel>(&spec)) {
        if (theta.rows() != c->k || theta.cols() != c->k)
            throw dimension_error("member: theta shape does not match model");
        const double scale = std::max(1.0, frobenius_norm(theta));
        for (int i = 0; i < c->k; ++i)
            for (int j = i + 1; j < c->k; ++j)
                if (std::abs(theta.at(i, j) - theta.at(j, i)) > 1e-9 * scale) return false;
        SymEig e = sym_eig(theta, false);
        const double top = std::abs(e.values.front());
        if (e.values.back() < -1e-10 * std::max(top, 1.0)) return false; // PSD tolerance
        return e.values.front() <= c->lambda * (1.0 + 1e-10) + 1e-12;
    }
    if (const auto* po = std::get_if<PoissonModel>(&spec)) {
        if (theta.rows() != po->k || theta.cols() != po->s)
            throw dimension_error("member: theta shape does not match model");
        for (double v : theta.entries())
            if (v < 0.0 || v > po->lambda * (1.0 + 1e-12)) return false;
        return true;
    }
    const auto& co = std::get<CompletionModel>(spec);
    if (theta.rows() != co.k || theta.cols() != co.s)
        throw dimension_error("member: theta shape does not match model");
    for (double v : theta.entries())
        if (std::abs(v) > co.a * (1.0 + 1e-12)) return false;
    auto sv = svd_values(theta);
    const double cutoff = 1e-8 * sv.front(); // numerical rank threshold
    int rank = 0;
    for (double v : sv)
        if (v > cutoff) ++rank;
    return sv.front() == 0.0 || rank <= co.r;
}

// ---- exact KL divergences / upper bounds -----------------------------------

// D(N(theta1, sigma^2 I) || N(theta2, sigma^2 I)) = ||theta1-theta2||_F^2 / (2 sigma^2)
inline KLResult kl_gaussian_mean(const Matrix& theta1, const Matrix& theta2, double sigma) {
    if (!theta1.same_shape(theta2)) throw dimension_error("kl_gaussian_mean: shape mismatch");
    if (!(sigma > 0)) throw domain_error("kl_gaussian_mean: sigma must be positive");
    const double d = frobenius_norm(theta1 - theta2);
    return KLResult{d * d / (2.0 * sigma * sigma), true};
}

// (1/2) Tr(S0^{-1} S1 - I) - (1/2) log det(S1)/det(S0), via Cholesky factors
inline KLResult kl_covariance(const Matrix& sigma1, const Matrix& sigma0) {
    if (sigma1.rows() != sigma1.cols() || !sigma1.same_shape(sigma0))
        throw dimension_error("kl_covariance: covariance matrices must be square and equal size");
    auto l0 = cholesky(sigma0);
    auto l1 = cholesky(sigma1);
    if (!l0 || !l1) throw singular_matrix("kl_covariance: inputs must be positive definite");
    const int k = sigma0.rows();
    // Tr(S0^{-1} S1) = ||L0^{-1} L1||_F^2
    Matrix w = forward_solve(*l0, *l1);
    double trace = 0.0;
    for (double v : w.entries()) trace += v * v;
    double logdet = 0.0;
    for (int i = 0; i < k; ++i) logdet += std::log(l1->at(i, i)) - std::log(l0->at(i, i));
    return KLResult{0.5 * (trace - k) - logdet, true};
}

// sum lambda1 log(lambda1/lambda0) - lambda1 + lambda0, with 0 log 0 = 0
inline KLResult kl_poisson(const Matrix& lambda1, const Matrix& lambda0) {
    if (!lambda1.same_shape(lambda0)) throw dimension_error("kl_poisson: shape mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < lambda1.entries().size(); ++i) {
        const double a = lambda1.entries()[i], b = lambda0.entries()[i];
        if (a < 0 || b < 0) throw domain_error("kl_poisson: intensities must be nonnegative");
        if (a == 0.0) {
            total += b;
            continue;
        }
        if (b == 0.0) throw infinite_kl("kl_poisson: lambda0 vanishes where lambda1 > 0");
        total += a * std::log(a / b) - a + b;
    }
    return KLResult{std::max(total, 0.0), true};
}

// Erasure bound for the completion model:
// (1/(2 sigma^2)) (1 - (1 - 1/(ks))^n) ||M1-M2||_F^2
inline KLResult kl_completion_upper(const Matrix& m1, const Matrix& m2, int n, double sigma) {
    if (!m1.same_shape(m2)) throw dimension_error("kl_completion_upper: shape mismatch");
    if (n < 1) throw domain_error("kl_completion_upper: n must be positive");
    if (!(sigma > 0)) throw domain_error("kl_completion_upper: sigma must be positive");
    const double ks = static_cast<double>(m1.rows()) * m1.cols();
    const double factor = 1.0 - std::pow(1.0 - 1.0 / ks, n);
    const double d = frobenius_norm(m1 - m2);
    return KLResult{factor * d * d / (2.0 * sigma * sigma), false};
}

// the looser linear-in-n form of the same bound
inline double kl_completion_loose(const Matrix& m1, const Matrix& m2, int n, double sigma) {
    if (!m1.same_shape(m2)) throw dimension_error("kl_completion_loose: shape mismatch");
    const double ks = static_cast<double>(m1.rows()) * m1.cols();
    const double d = frobenius_norm(m1 - m2);
    return (static_cast<double>(n) / ks) * d * d / (2.0 * sigma * sigma);
}

// ---- observations ----------------------------------------------------------

struct GaussianMeanObs {
    Matrix y;
};
struct CovarianceObs {
    Matrix x; // n x k data matrix
    Matrix s; // sample covariance X'X / n
};
struct PoissonObs {
    Matrix counts;
};
struct CompletionSample {
    int i = 1, j = 1; // 1-based cell index
    double value = 0.0;
};
struct CompletionObs {
    std::vector<CompletionSample> samples;
};

using Observation = std::variant<GaussianMeanObs, CovarianceObs, PoissonObs, CompletionObs>;

inline Observation sample_observation(const ModelSpec& spec, const Matrix& theta, Seed seed) {
    if (!member(spec, theta)) throw domain_error("sample_observation: theta outside the parameter space");
    if (const auto* g = std::get_if<GaussianMeanModel>(&spec)) {
        if (g->sigma == 0.0) return GaussianMeanObs{theta};
        Matrix z = sample_ensemble(GaussianIID{g->p, g->m, g->sigma}, seed);
        return GaussianMeanObs{theta + z};
    }
    if (const auto* c = std::get_if<CovarianceModel>(&spec)) {
        Matrix x = sample_ensemble(GaussianRows{c->n, theta}, seed);
        Matrix s = (1.0 / c->n) * matmul(transpose(x), x);
        return CovarianceObs{std::move(x), std::move(s)};
    }
    if (std::get_if<PoissonModel>(&spec)) {
        return PoissonObs{sample_ensemble(PoissonRates{theta}, seed)};
    }
    const auto& co = std::get<CompletionModel>(spec);
    RandomStream rng(seed);
    CompletionObs obs;
    if (co.with_replacement) {
        obs.samples.reserve(co.n);
        for (int t = 0; t < co.n; ++t) {
            const int i = rng.uniform_int(co.k) + 1;
            const int j = rng.uniform_int(co.s) + 1;
            const double noise = co.sigma == 0.0 ? 0.0 : co.sigma * rng.gaussian();
            obs.samples.push_back(CompletionSample{i, j, theta.at(i - 1, j - 1) + noise});
        }
    } else {
        // each cell observed independently with probability n/(ks)
        const double prob = static_cast<double>(co.n) / (static_cast<double>(co.k) * co.s);
        for (int i = 1; i <= co.k; ++i)
            for (int j = 1; j <= co.s; ++j)
                if (rng.uniform01() <= prob) {
                    const double noise = co.sigma == 0.0 ? 0.0 : co.sigma * rng.gaussian();
                    obs.samples.push_back(CompletionSample{i, j, theta.at(i - 1, j - 1) + noise});
                }
    }
    return obs;
}

// ---- K(r): the well-conditioned covariance neighborhood ---------------------

// A draw from (lambda/2) I + (lambda/2) (B_F(sqrt(2r)) cap B_op(1/2)): a GOE
// direction scaled deterministically into both balls, then shrunk by a
// uniform radius. Every output satisfies lambda/4 <= sigma_k <= sigma_1 <=
// 3 lambda/4.
inline Matrix kr_ball_sample(int k, double lambda, double r, Seed seed) {
    if (k <= 0) throw invalid_spec("kr_ball_sample: k must be positive");
    if (!(lambda > 0) || !(r > 0)) throw invalid_spec("kr_ball_sample: lambda and r must be positive");
    Matrix g = sample_ensemble(GOE{k}, seed);
    SymEig e = sym_eig(g, false);
    const double op = std::max(std::abs(e.values.front()), std::abs(e.values.back()));
    const double fro = frobenius_norm(g);
    double t = 1.0;
    if (fro > 0) t = std::min(std::sqrt(2.0 * r) / fro, 0.5 / op);
    RandomStream rng(Seed{seed.master, seed.stream ^ 0x4b52ULL});
    t *= rng.uniform01();
    Matrix sigma(k, k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
            sigma.at(i, j) = 0.5 * lambda * ((i == j ? 1.0 : 0.0) + t * g.at(i, j));
    SymEig check = sym_eig(sigma, false);
    if (check.values.front() > 0.75 * lambda * (1 + 1e-9) ||
        check.values.back() < 0.25 * lambda * (1 - 1e-9))
        throw construction_failed("kr_ball_sample: conditioning bounds violated");
    return sigma;
}

// ---- JSON schema -----------------------------------------------------------

inline ModelSpec model_from_json(const nlohmann::json& j) {
    const std::string kind = j.value("model", "");
    try {
        if (kind == "gaussian_mean") {
            GaussianMeanModel g;
            g.p = j.at("p").get<int>();
            g.m = j.at("m").get<int>();
            g.sigma = j.at("sigma").get<double>();
            if (j.contains("k") || j.contains("s"))
                g.sparsity = std::make_pair(j.at("k").get<int>(), j.at("s").get<int>());
            validate(ModelSpec{g});
            return g;
        }
        if (kind == "covariance") {
            CovarianceModel c{j.at("k").get<int>(), j.at("n").get<int>(),
                              j.at("lambda").get<double>()};
            validate(ModelSpec{c});
            return c;
        }
        if (kind == "poisson") {
            PoissonModel p{j.at("k").get<int>(), j.at("s").get<int>(),
                           j.at("lambda").get<double>()};
            validate(ModelSpec{p});
            return p;
        }
        if (kind == "completion") {
            CompletionModel c;
            c.k = j.at("k").get<int>();
            c.s = j.at("s").get<int>();
            c.r = j.at("r").get<int>();
            c.a = j.at("a").get<double>();
            c.sigma = j.at("sigma").get<double>();
            c.n = j.at("n").get<int>();
            c.with_replacement = !j.value("without_replacement", false);
            validate(ModelSpec{c});
            return c;
        }
    } catch (const nlohmann::json::exception& e) {
        throw config_error(std::string("model json: ") + e.what());
    } catch (const invalid_spec& e) {
        throw config_error(std::string("model json: ") + e.what());
    }
    throw config_error("model json: unknown model '" + kind + "'");
}

inline nlohmann::ordered_json model_to_json(const ModelSpec& spec) {
    nlohmann::ordered_json j;
    if (const auto* g = std::get_if<GaussianMeanModel>(&spec)) {
        j["model"] = "gaussian_mean";
        j["p"] = g->p;
        j["m"] = g->m;
        j["sigma"] = g->sigma;
        if (g->sparsity) {
            j["k"] = g->sparsity->first;
            j["s"] = g->sparsity->second;
        }
    } else if (const auto* c = std::get_if<CovarianceModel>(&spec)) {
        j["model"] = "covariance";
        j["k"] = c->k;
        j["n"] = c->n;
        j["lambda"] = c->lambda;
    } else if (const auto* p = std::get_if<PoissonModel>(&spec)) {
        j["model"] = "poisson";
        j["k"] = p->k;
        j["s"] = p->s;
        j["lambda"] = p->lambda;
    } else {
        const auto& c = std::get<CompletionModel>(spec);
        j["model"] = "completion";
        j["k"] = c.k;
        j["s"] = c.s;
        j["r"] = c.r;
        j["a"] = c.a;
        j["sigma"] = c.sigma;
        j["n"] = c.n;
        if (!c.with_replacement) j["without_replacement"] = true;
    }
    return j;
}

} // namespace mmx
