#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "matrix.hpp"
#include "rng.hpp"

namespace mmx {

// Singular values of a dense matrix, descending, via one-sided Jacobi
// (Hestenes). Works on the tall orientation; column norms of the rotated
// matrix are the singular values, so sum sigma_i^2 = ||A||_F^2 holds to
// machine precision.
inline std::vector<double> svd_values(const Matrix& a) {
    if (!a.all_finite()) throw invalid_matrix("svd_values: non-finite input");
    const bool flip = a.rows() < a.cols();
    const Matrix w0 = flip ? transpose(a) : a;
    const int n = w0.rows(), d = w0.cols();

    // column-major working copy
    std::vector<double> col(static_cast<std::size_t>(n) * d);
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < n; ++i) col[static_cast<std::size_t>(j) * n + i] = w0.at(i, j);

    std::vector<double> sq(d);
    for (int j = 0; j < d; ++j) {
        double s = 0.0;
        const double* cj = &col[static_cast<std::size_t>(j) * n];
        for (int i = 0; i < n; ++i) s += cj[i] * cj[i];
        sq[j] = s;
    }

    const double tol = 1e-14;
    const int max_sweeps = 60;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (int p = 0; p < d - 1; ++p) {
            for (int q = p + 1; q < d; ++q) {
                double* cp = &col[static_cast<std::size_t>(p) * n];
                double* cq = &col[static_cast<std::size_t>(q) * n];
                double dot = 0.0;
                for (int i = 0; i < n; ++i) dot += cp[i] * cq[i];
                if (std::abs(dot) <= tol * std::sqrt(sq[p] * sq[q])) continue;
                rotated = true;
                const double zeta = (sq[q] - sq[p]) / (2.0 * dot);
                const double t =
                    (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (int i = 0; i < n; ++i) {
                    const double vp = cp[i], vq = cq[i];
                    cp[i] = c * vp - s * vq;
                    cq[i] = s * vp + c * vq;
                }
                const double op = sq[p];
                sq[p] = op - t * dot;
                sq[q] = sq[q] + t * dot;
                if (sq[p] < 0) sq[p] = 0;
                if (sq[q] < 0) sq[q] = 0;
            }
        }
        if (!rotated) break;
    }

    std::vector<double> out(d);
    for (int j = 0; j < d; ++j) {
        double s = 0.0;
        const double* cj = &col[static_cast<std::size_t>(j) * n];
        for (int i = 0; i < n; ++i) s += cj[i] * cj[i];
        out[j] = std::sqrt(s);
    }
    std::sort(out.begin(), out.end(), std::greater<double>());
    return out;
}

struct SymEig {
    std::vector<double> values; // descending
    Matrix vectors;             // column i pairs with values[i]
};

// Cyclic Jacobi eigendecomposition for symmetric matrices.
inline SymEig sym_eig(const Matrix& s_in, bool want_vectors = true) {
    if (s_in.rows() != s_in.cols()) throw dimension_error("sym_eig: matrix must be square");
    const int n = s_in.rows();
    Matrix s = s_in;
    // symmetrize to guard against last-bit asymmetry from upstream arithmetic
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double v = 0.5 * (s.at(i, j) + s.at(j, i));
            s.at(i, j) = v;
            s.at(j, i) = v;
        }
    Matrix v = Matrix::identity(n);

    double scale = 0.0;
    for (int i = 0; i < n; ++i) scale = std::max(scale, std::abs(s.at(i, i)));
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) scale = std::max(scale, std::abs(s.at(i, j)));
    const double tol = 1e-14 * std::max(scale, 1e-300);

    const int max_sweeps = 60;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off = std::max(off, std::abs(s.at(i, j)));
        if (off <= tol) break;
        for (int p = 0; p < n - 1; ++p)
            for (int q = p + 1; q < n; ++q) {
                const double apq = s.at(p, q);
                if (std::abs(apq) <= tol) continue;
                const double theta = (s.at(q, q) - s.at(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(1.0 + theta * theta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = c * t;
                for (int i = 0; i < n; ++i) {
                    const double sip = s.at(i, p), siq = s.at(i, q);
                    s.at(i, p) = c * sip - sn * siq;
                    s.at(i, q) = sn * sip + c * siq;
                }
                for (int i = 0; i < n; ++i) {
                    const double spi = s.at(p, i), sqi = s.at(q, i);
                    s.at(p, i) = c * spi - sn * sqi;
                    s.at(q, i) = sn * spi + c * sqi;
                }
                if (want_vectors)
                    for (int i = 0; i < n; ++i) {
                        const double vip = v.at(i, p), viq = v.at(i, q);
                        v.at(i, p) = c * vip - sn * viq;
                        v.at(i, q) = sn * vip + c * viq;
                    }
            }
    }

    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](int x, int y) { return s.at(x, x) > s.at(y, y); });

    SymEig out;
    out.values.resize(n);
    out.vectors = Matrix(n, n);
    for (int i = 0; i < n; ++i) {
        out.values[i] = s.at(order[i], order[i]);
        if (want_vectors)
            for (int rr = 0; rr < n; ++rr) out.vectors.at(rr, i) = v.at(rr, order[i]);
    }
    return out;
}

// Lower-triangular Cholesky factor; nullopt when the matrix is not
// numerically positive definite.
inline std::optional<Matrix> cholesky(const Matrix& s) {
    if (s.rows() != s.cols()) throw dimension_error("cholesky: matrix must be square");
    const int n = s.rows();
    Matrix l(n, n);
    for (int j = 0; j < n; ++j) {
        double diag = s.at(j, j);
        for (int t = 0; t < j; ++t) diag -= l.at(j, t) * l.at(j, t);
        if (!(diag > 0.0) || !std::isfinite(diag)) return std::nullopt;
        const double lj = std::sqrt(diag);
        l.at(j, j) = lj;
        for (int i = j + 1; i < n; ++i) {
            double v = s.at(i, j);
            for (int t = 0; t < j; ++t) v -= l.at(i, t) * l.at(j, t);
            l.at(i, j) = v / lj;
        }
    }
    return l;
}

// Solves L X = B for lower-triangular L.
inline Matrix forward_solve(const Matrix& l, const Matrix& b) {
    if (l.rows() != l.cols() || l.rows() != b.rows())
        throw dimension_error("forward_solve: shape mismatch");
    Matrix x = b;
    const int n = l.rows();
    for (int j = 0; j < b.cols(); ++j)
        for (int i = 0; i < n; ++i) {
            double v = x.at(i, j);
            for (int t = 0; t < i; ++t) v -= l.at(i, t) * x.at(t, j);
            x.at(i, j) = v / l.at(i, i);
        }
    return x;
}

// Symmetric PSD square root via eigendecomposition; small negative
// eigenvalues from roundoff are clamped to zero.
inline Matrix sym_sqrt(const Matrix& s) {
    SymEig e = sym_eig(s);
    const int n = s.rows();
    Matrix out(n, n);
    for (int t = 0; t < n; ++t) {
        const double lam = e.values[t];
        if (lam < -1e-10 * std::max(1.0, std::abs(e.values[0])))
            throw domain_error("sym_sqrt: matrix is not positive semidefinite");
        const double root = lam > 0 ? std::sqrt(lam) : 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                out.at(i, j) += root * e.vectors.at(i, t) * e.vectors.at(j, t);
    }
    return out;
}

// Haar-ish orthogonal matrix from QR (modified Gram-Schmidt) of a Gaussian
// draw; used by invariance checks.
inline Matrix random_orthogonal(int n, RandomStream& rng) {
    Matrix g(n, n);
    for (double& v : g.entries()) v = rng.gaussian();
    for (int j = 0; j < n; ++j) {
        for (int t = 0; t < j; ++t) {
            double dot = 0.0;
            for (int i = 0; i < n; ++i) dot += g.at(i, t) * g.at(i, j);
            for (int i = 0; i < n; ++i) g.at(i, j) -= dot * g.at(i, t);
        }
        double nrm = 0.0;
        for (int i = 0; i < n; ++i) nrm += g.at(i, j) * g.at(i, j);
        nrm = std::sqrt(nrm);
        if (nrm < 1e-12) throw construction_failed("random_orthogonal: degenerate draw");
        for (int i = 0; i < n; ++i) g.at(i, j) /= nrm;
    }
    return g;
}

} // namespace mmx
