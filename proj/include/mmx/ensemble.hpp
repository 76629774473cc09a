#pragma once

#include <variant>

#include "linalg.hpp"
#include "matrix.hpp"
#include "rng.hpp"

namespace mmx {

struct GaussianIID {
    int rows = 0, cols = 0;
    double sigma = 1.0;
};

// Symmetrized Gaussian (G + G')/2: diagonal variance 1, off-diagonal 1/2.
struct GOE {
    int k = 0;
};

// n rows drawn independently from N(0, Sigma).
struct GaussianRows {
    int n = 0;
    Matrix sigma;
};

struct PoissonRates {
    Matrix lambda;
};

using EnsembleSpec = std::variant<GaussianIID, GOE, GaussianRows, PoissonRates>;

inline void validate(const EnsembleSpec& spec) {
    if (const auto* g = std::get_if<GaussianIID>(&spec)) {
        if (g->rows <= 0 || g->cols <= 0) throw invalid_spec("GaussianIID: dimensions must be positive");
        if (!(g->sigma > 0)) throw invalid_spec("GaussianIID: sigma must be positive");
    } else if (const auto* g = std::get_if<GOE>(&spec)) {
        if (g->k <= 0) throw invalid_spec("GOE: k must be positive");
    } else if (const auto* g = std::get_if<GaussianRows>(&spec)) {
        if (g->n <= 0) throw invalid_spec("GaussianRows: n must be positive");
        if (g->sigma.rows() != g->sigma.cols())
            throw invalid_spec("GaussianRows: Sigma must be square");
        for (int i = 0; i < g->sigma.rows(); ++i)
            for (int j = i + 1; j < g->sigma.cols(); ++j)
                if (std::abs(g->sigma.at(i, j) - g->sigma.at(j, i)) >
                    1e-9 * std::max(1.0, frobenius_norm(g->sigma)))
                    throw invalid_spec("GaussianRows: Sigma must be symmetric");
        SymEig e = sym_eig(g->sigma, false);
        const double floor = -1e-10 * std::max(1.0, std::abs(e.values.front()));
        if (e.values.back() < floor)
            throw invalid_spec("GaussianRows: Sigma must be positive semidefinite");
    } else if (const auto* g = std::get_if<PoissonRates>(&spec)) {
        for (double v : g->lambda.entries())
            if (v < 0) throw invalid_spec("PoissonRates: intensities must be nonnegative");
    }
}

// One draw of the ensemble; deterministic in the seed.
inline Matrix sample_ensemble(const EnsembleSpec& spec, Seed seed) {
    validate(spec);
    RandomStream rng(seed);
    if (const auto* g = std::get_if<GaussianIID>(&spec)) {
        Matrix out(g->rows, g->cols);
        for (double& v : out.entries()) v = g->sigma * rng.gaussian();
        return out;
    }
    if (const auto* g = std::get_if<GOE>(&spec)) {
        Matrix raw(g->k, g->k);
        for (double& v : raw.entries()) v = rng.gaussian();
        Matrix out(g->k, g->k);
        for (int i = 0; i < g->k; ++i)
            for (int j = 0; j < g->k; ++j) out.at(i, j) = 0.5 * (raw.at(i, j) + raw.at(j, i));
        return out;
    }
    if (const auto* g = std::get_if<GaussianRows>(&spec)) {
        const Matrix root = sym_sqrt(g->sigma);
        Matrix z(g->n, g->sigma.rows());
        for (double& v : z.entries()) v = rng.gaussian();
        return matmul(z, root); // rows are z_i' Sigma^{1/2}, i.e. N(0, Sigma)
    }
    const auto& g = std::get<PoissonRates>(spec);
    Matrix out(g.lambda.rows(), g.lambda.cols());
    for (std::size_t i = 0; i < out.entries().size(); ++i)
        out.entries()[i] = static_cast<double>(rng.poisson(g.lambda.entries()[i]));
    return out;
}

} // namespace mmx
