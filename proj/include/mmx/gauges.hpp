#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "linalg.hpp"
#include "matrix.hpp"
#include "rng.hpp"

namespace mmx {

// Symmetric gauge functions tau: R^d -> [0,inf) and the unitarily invariant
// matrix norms ||A|| = tau(sigma(A)) they induce.
//
// Schatten q uses a distinguished infinity token (q = +inf means max |x_i|),
// so no power is ever taken with an overflowing exponent.

struct SchattenGauge {
    double q = 2.0; // in [1, inf], inf admitted
};

struct KyFanGauge {
    int ell = 1;
};

// eval receives |x| sorted descending, which makes any user-supplied
// function automatically symmetric in signs and permutations.
struct CustomGauge {
    std::function<double(const std::vector<double>&)> eval;
    std::string name;
    bool estimated = false;    // true when produced by a numeric construction
    double tolerance = 0.0;    // achieved tolerance of that construction
};

using Gauge = std::variant<SchattenGauge, KyFanGauge, CustomGauge>;

struct GaugeContext {
    Gauge gauge;
    int dim = 0; // the ambient d on which tau acts
};

inline constexpr double q_infinity = std::numeric_limits<double>::infinity();

inline void validate(const GaugeContext& ctx) {
    if (ctx.dim <= 0) throw invalid_spec("gauge: dimension must be positive");
    if (const auto* s = std::get_if<SchattenGauge>(&ctx.gauge)) {
        if (!(s->q >= 1.0)) throw invalid_spec("gauge: Schatten q must satisfy q >= 1");
    } else if (const auto* k = std::get_if<KyFanGauge>(&ctx.gauge)) {
        if (k->ell < 1 || k->ell > ctx.dim)
            throw invalid_spec("gauge: Ky Fan ell must lie in [1, dim]");
    } else if (const auto* c = std::get_if<CustomGauge>(&ctx.gauge)) {
        if (!c->eval) throw invalid_spec("gauge: custom evaluator is empty");
    }
}

namespace detail {

inline std::vector<double> sorted_abs_desc(const std::vector<double>& x) {
    std::vector<double> a(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) a[i] = std::abs(x[i]);
    std::sort(a.begin(), a.end(), std::greater<double>());
    return a;
}

inline double schatten_of_sorted(double q, const std::vector<double>& a) {
    if (a.empty()) return 0.0;
    if (std::isinf(q)) return a.front();
    if (q == 1.0) {
        double s = 0.0;
        for (double v : a) s += v;
        return s;
    }
    if (q == 2.0) {
        double s = 0.0;
        for (double v : a) s += v * v;
        return std::sqrt(s);
    }
    const double top = a.front();
    if (top == 0.0) return 0.0;
    double s = 0.0;
    for (double v : a) s += std::pow(v / top, q); // scale out the max for stability
    return top * std::pow(s, 1.0 / q);
}

} // namespace detail

inline double gauge_eval(const GaugeContext& ctx, const std::vector<double>& x) {
    validate(ctx);
    if (static_cast<int>(x.size()) != ctx.dim)
        throw dimension_error("gauge_eval: input length does not match gauge dimension");
    const std::vector<double> a = detail::sorted_abs_desc(x);
    if (const auto* s = std::get_if<SchattenGauge>(&ctx.gauge))
        return detail::schatten_of_sorted(s->q, a);
    if (const auto* k = std::get_if<KyFanGauge>(&ctx.gauge)) {
        double sum = 0.0;
        for (int i = 0; i < k->ell; ++i) sum += a[i];
        return sum;
    }
    return std::get<CustomGauge>(ctx.gauge).eval(a);
}

// tau restricted to R^r: pads with zeros, so Schatten keeps q and Ky Fan
// clamps ell to min(ell, r).
inline GaugeContext restricted(const GaugeContext& ctx, int r) {
    validate(ctx);
    if (r < 1 || r > ctx.dim) throw dimension_error("restricted: r out of range");
    if (r == ctx.dim) return ctx;
    if (const auto* s = std::get_if<SchattenGauge>(&ctx.gauge))
        return GaugeContext{SchattenGauge{s->q}, r};
    if (const auto* k = std::get_if<KyFanGauge>(&ctx.gauge))
        return GaugeContext{KyFanGauge{std::min(k->ell, r)}, r};
    const CustomGauge& c = std::get<CustomGauge>(ctx.gauge);
    const int dim = ctx.dim;
    CustomGauge out;
    out.name = c.name + "|" + std::to_string(r);
    out.estimated = c.estimated;
    out.tolerance = c.tolerance;
    out.eval = [inner = c.eval, dim](const std::vector<double>& a) {
        std::vector<double> padded(a);
        padded.resize(dim, 0.0);
        return inner(padded);
    };
    return GaugeContext{std::move(out), r};
}

inline double gauge_at_ones(const GaugeContext& ctx) {
    validate(ctx);
    if (const auto* s = std::get_if<SchattenGauge>(&ctx.gauge))
        return std::isinf(s->q) ? 1.0 : std::pow(static_cast<double>(ctx.dim), 1.0 / s->q);
    if (const auto* k = std::get_if<KyFanGauge>(&ctx.gauge)) return static_cast<double>(k->ell);
    return gauge_eval(ctx, std::vector<double>(ctx.dim, 1.0));
}

// ---- numeric optimizers --------------------------------------------------

namespace detail {

// Subgradient of tau by central differences; for a norm this is a valid
// ascent direction away from kinks.
inline std::vector<double> fd_gradient(const GaugeContext& ctx, std::vector<double> x) {
    const int d = ctx.dim;
    std::vector<double> g(d);
    const double h = 1e-7;
    for (int i = 0; i < d; ++i) {
        const double xi = x[i];
        x[i] = xi + h;
        const double fp = gauge_eval(ctx, x);
        x[i] = xi - h;
        const double fm = gauge_eval(ctx, x);
        x[i] = xi;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

inline void normalize_euclid(std::vector<double>& x) {
    double n = 0.0;
    for (double v : x) n += v * v;
    n = std::sqrt(n);
    if (n > 0)
        for (double& v : x) v /= n;
}

} // namespace detail

// sup_{||x||_2 = 1} tau(x) by the fixed-point iteration x <- g(x)/||g(x)||;
// for a convex homogeneous tau with exact subgradients the iterate value is
// nondecreasing. Deterministic prefix starts (1_t/sqrt(t)) hit the Schatten
// and Ky Fan maximizers exactly; random starts cover custom gauges.
inline double lipschitz_numeric(const GaugeContext& ctx, int starts = 64, double tol = 1e-4,
                                int max_iters = 200) {
    validate(ctx);
    const int d = ctx.dim;
    RandomStream rng(Seed{0x4c495053ULL, static_cast<std::uint64_t>(d)});
    double best = 0.0;

    auto run_from = [&](std::vector<double> x) {
        detail::normalize_euclid(x);
        double value = gauge_eval(ctx, x);
        for (int it = 0; it < max_iters; ++it) {
            std::vector<double> g = detail::fd_gradient(ctx, x);
            double gn = 0.0;
            for (double v : g) gn += v * v;
            if (gn <= 0) break;
            detail::normalize_euclid(g);
            const double next = gauge_eval(ctx, g);
            x = std::move(g);
            if (next <= value + tol * 1e-3) {
                value = std::max(value, next);
                break;
            }
            value = next;
        }
        best = std::max(best, value);
    };

    for (int t = 1; t <= d; ++t) {
        std::vector<double> x(d, 0.0);
        for (int i = 0; i < t; ++i) x[i] = 1.0;
        run_from(std::move(x));
    }
    for (int s = 0; s < starts; ++s) {
        std::vector<double> x(d);
        for (double& v : x) v = rng.gaussian();
        run_from(std::move(x));
    }
    return best;
}

// Lipschitz constant of tau w.r.t. the Euclidean norm. Closed forms:
// Schatten q -> d^{(1/q - 1/2)_+}, Ky Fan ell -> sqrt(ell). Custom gauges
// fall back to sphere maximization and must land inside the universal
// bracket [tau(1)/sqrt(d), tau(1)].
inline double lipschitz(const GaugeContext& ctx) {
    validate(ctx);
    if (const auto* s = std::get_if<SchattenGauge>(&ctx.gauge)) {
        const double expo = std::isinf(s->q) ? -0.5 : (1.0 / s->q - 0.5);
        return std::pow(static_cast<double>(ctx.dim), std::max(expo, 0.0));
    }
    if (const auto* k = std::get_if<KyFanGauge>(&ctx.gauge))
        return std::sqrt(static_cast<double>(k->ell));
    const double value = lipschitz_numeric(ctx);
    const double t1 = gauge_at_ones(ctx);
    const double lo = t1 / std::sqrt(static_cast<double>(ctx.dim));
    if (value < lo * (1.0 - 1e-6) || value > t1 * (1.0 + 1e-6))
        throw optimization_error("lipschitz: numeric maximizer violates the bracket");
    return std::min(std::max(value, lo), t1);
}

// argmax of tau on the unit sphere (used to seed packing constructions
// with the matrix achieving the restricted Lipschitz constant)
inline std::vector<double> lipschitz_maximizer(const GaugeContext& ctx) {
    validate(ctx);
    const int d = ctx.dim;
    if (const auto* s = std::get_if<SchattenGauge>(&ctx.gauge)) {
        std::vector<double> x(d, 0.0);
        if (s->q <= 2.0 && !std::isinf(s->q)) {
            const double v = 1.0 / std::sqrt(static_cast<double>(d));
            std::fill(x.begin(), x.end(), v);
        } else {
            x[0] = 1.0;
        }
        return x;
    }
    if (const auto* k = std::get_if<KyFanGauge>(&ctx.gauge)) {
        std::vector<double> x(d, 0.0);
        const double v = 1.0 / std::sqrt(static_cast<double>(k->ell));
        for (int i = 0; i < k->ell; ++i) x[i] = v;
        return x;
    }
    // custom: rerun the sphere ascent keeping the best point
    RandomStream rng(Seed{0x4c49505341ULL, static_cast<std::uint64_t>(d)});
    std::vector<double> best(d, 0.0);
    best[0] = 1.0;
    double best_val = gauge_eval(ctx, best);
    for (int s = 0; s < 96; ++s) {
        std::vector<double> x(d);
        if (s <= d) {
            std::fill(x.begin(), x.end(), 0.0);
            for (int i = 0; i < std::max(1, s); ++i) x[i] = 1.0;
        } else {
            for (double& v : x) v = rng.gaussian();
        }
        detail::normalize_euclid(x);
        double value = gauge_eval(ctx, x);
        for (int it = 0; it < 200; ++it) {
            std::vector<double> g = detail::fd_gradient(ctx, x);
            detail::normalize_euclid(g);
            const double next = gauge_eval(ctx, g);
            if (next <= value + 1e-10) break;
            x = std::move(g);
            value = next;
        }
        if (value > best_val) {
            best_val = value;
            best = x;
        }
    }
    return best;
}

// sup_{tau(y) <= 1} <x, y> by multi-start ascent on the ratio <x,y>/tau(y).
inline double dual_eval_numeric(const GaugeContext& primal, const std::vector<double>& x,
                                int starts = 32, double tol = 1e-6, int max_iters = 400) {
    validate(primal);
    const int d = primal.dim;
    if (static_cast<int>(x.size()) != d)
        throw dimension_error("dual_eval_numeric: input length does not match gauge dimension");
    const std::vector<double> xs = detail::sorted_abs_desc(x);
    double xnorm2 = 0.0;
    for (double v : xs) xnorm2 += v * v;
    if (xnorm2 == 0.0) return 0.0;

    RandomStream rng(Seed{0x4455414cULL, static_cast<std::uint64_t>(d)});
    double best = 0.0;

    // the optimum aligns sorted |y| with sorted |x|, so iterates are kept in
    // canonical form (nonnegative, descending)
    auto canonicalize = [](std::vector<double>& y) {
        for (double& v : y) v = std::abs(v);
        std::sort(y.begin(), y.end(), std::greater<double>());
    };

    auto ratio = [&](const std::vector<double>& y_canonical) {
        const double ty = gauge_eval(primal, y_canonical);
        if (ty <= 0) return 0.0;
        double ip = 0.0;
        for (int i = 0; i < d; ++i) ip += xs[i] * y_canonical[i];
        return ip / ty;
    };

    auto run_from = [&](std::vector<double> y) {
        canonicalize(y);
        double value = ratio(y);
        double step = 0.5;
        for (int it = 0; it < max_iters; ++it) {
            const double ty = gauge_eval(primal, y);
            if (ty <= 0) break;
            std::vector<double> gt = detail::fd_gradient(primal, y);
            double ip = 0.0;
            for (int i = 0; i < d; ++i) ip += xs[i] * y[i];
            // gradient of <xs,y>/tau(y)
            std::vector<double> g(d);
            for (int i = 0; i < d; ++i) g[i] = xs[i] / ty - ip * gt[i] / (ty * ty);
            std::vector<double> cand(d);
            for (int i = 0; i < d; ++i) cand[i] = std::max(0.0, y[i] + step * g[i]);
            canonicalize(cand);
            const double next = ratio(cand);
            if (next > value + tol * 1e-4) {
                y = std::move(cand);
                value = next;
            } else {
                step *= 0.5;
                if (step < 1e-10) break;
            }
        }
        best = std::max(best, value);
    };

    // prefix vectors are the extreme directions for every symmetric gauge
    for (int t = 1; t <= d; ++t) {
        std::vector<double> y(d, 0.0);
        for (int i = 0; i < t; ++i) y[i] = 1.0;
        run_from(std::move(y));
    }
    run_from(xs);
    for (int s = 0; s < starts; ++s) {
        std::vector<double> y(d);
        for (double& v : y) v = rng.gaussian();
        run_from(std::move(y));
    }
    return best;
}

// Dual gauge. Schatten q pairs with q* (1/q + 1/q* = 1); the Ky Fan dual is
// the exact closed form max(max|x_i|, sum|x_i|/ell); custom gauges get a
// numeric dual carrying the estimated flag.
inline GaugeContext dual(const GaugeContext& ctx) {
    validate(ctx);
    if (const auto* s = std::get_if<SchattenGauge>(&ctx.gauge)) {
        double qstar;
        if (s->q == 1.0)
            qstar = q_infinity;
        else if (std::isinf(s->q))
            qstar = 1.0;
        else
            qstar = s->q / (s->q - 1.0);
        return GaugeContext{SchattenGauge{qstar}, ctx.dim};
    }
    if (const auto* k = std::get_if<KyFanGauge>(&ctx.gauge)) {
        const double ell = static_cast<double>(k->ell);
        CustomGauge out;
        out.name = "kyfan_dual(" + std::to_string(k->ell) + ")";
        out.eval = [ell](const std::vector<double>& a) {
            double sum = 0.0;
            for (double v : a) sum += v;
            return std::max(a.empty() ? 0.0 : a.front(), sum / ell);
        };
        return GaugeContext{std::move(out), ctx.dim};
    }
    // numeric dual of a custom gauge
    auto primal = std::make_shared<GaugeContext>(ctx);
    CustomGauge out;
    out.name = "dual(" + std::get<CustomGauge>(ctx.gauge).name + ")";
    out.estimated = true;
    out.tolerance = 1e-6;
    out.eval = [primal](const std::vector<double>& a) {
        return dual_eval_numeric(*primal, a);
    };
    return GaugeContext{std::move(out), ctx.dim};
}

// ||A||_tau = tau(sigma(A)); matrices smaller than the ambient dimension
// evaluate under the restriction convention tau|_{min(rows,cols)}. A matrix
// whose min dimension exceeds the declared gauge dimension is rejected.
inline double norm(const GaugeContext& ctx, const Matrix& a) {
    validate(ctx);
    const int md = std::min(a.rows(), a.cols());
    if (md > ctx.dim)
        throw dimension_error("norm: matrix min dimension exceeds gauge dimension");
    return gauge_eval(restricted(ctx, md), svd_values(a));
}

// ---- textual gauge syntax: "S1", "S2", "Sinf", "S1.5", "KF3" -------------

inline Gauge parse_gauge(const std::string& text) {
    if (text.size() >= 2 && (text[0] == 'S') && text.substr(0, 2) != "S_") {
        const std::string rest = text.substr(1);
        if (rest == "inf" || rest == "Inf" || rest == "INF")
            return SchattenGauge{q_infinity};
        try {
            std::size_t pos = 0;
            const double q = std::stod(rest, &pos);
            if (pos == rest.size() && q >= 1.0) return SchattenGauge{q};
        } catch (const std::exception&) {
        }
    }
    if (text.size() >= 3 && text.substr(0, 2) == "KF") {
        try {
            std::size_t pos = 0;
            const int ell = std::stoi(text.substr(2), &pos);
            if (pos == text.size() - 2 && ell >= 1) return KyFanGauge{ell};
        } catch (const std::exception&) {
        }
    }
    throw config_error("unrecognized gauge '" + text + "' (expected S<q>, Sinf or KF<l>)");
}

inline std::string format_gauge(const Gauge& g) {
    if (const auto* s = std::get_if<SchattenGauge>(&g)) {
        if (std::isinf(s->q)) return "Sinf";
        if (s->q == static_cast<long>(s->q)) return "S" + std::to_string(static_cast<long>(s->q));
        char buf[32];
        std::snprintf(buf, sizeof(buf), "S%g", s->q);
        return buf;
    }
    if (const auto* k = std::get_if<KyFanGauge>(&g)) return "KF" + std::to_string(k->ell);
    return std::get<CustomGauge>(g).name;
}

inline GaugeContext make_context(const std::string& text, int dim) {
    GaugeContext ctx{parse_gauge(text), dim};
    validate(ctx);
    return ctx;
}

} // namespace mmx
