#include <doctest.h>

#include <mmx/gauges.hpp>

#include <cmath>

#include "test_support.hpp"

using namespace mmx;

TEST_SUITE_BEGIN("gauges");

namespace {

GaugeContext ctx_of(const char* text, int dim) { return make_context(text, dim); }

std::vector<double> random_vec(int d, RandomStream& rng) {
    std::vector<double> x(d);
    for (double& v : x) v = rng.gaussian();
    return x;
}

const std::vector<const char*> gauge_names = {"S1", "S1.5", "S2", "S3", "Sinf",
                                              "KF1", "KF2", "KF5"};

} // namespace

TEST_CASE("gauge evaluation on fixed vectors") {
    CHECK(gauge_eval(ctx_of("S1", 3), {3, 4, 0}) == doctest::Approx(7.0));
    CHECK(gauge_eval(ctx_of("Sinf", 3), {3, -4, 0}) == doctest::Approx(4.0));
    CHECK(gauge_eval(ctx_of("KF2", 4), {5, 1, 2, 3}) == doctest::Approx(8.0));
    CHECK_THROWS_AS(gauge_eval(ctx_of("S1", 3), {1, 2}), dimension_error);
    CHECK_THROWS_AS(make_context("KF5", 3), invalid_spec);
}

TEST_CASE("norm axioms and symmetry on random inputs") {
    RandomStream rng(Seed{60, 0});
    std::vector<GaugeContext> ctxs;
    for (auto* name : gauge_names) ctxs.push_back(ctx_of(name, 6));
    CustomGauge oddball;
    oddball.name = "mix";
    oddball.eval = [](const std::vector<double>& a) {
        double s = a[0];
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] / (1.0 + i);
        return s;
    };
    ctxs.push_back(GaugeContext{oddball, 6});

    for (const auto& ctx : ctxs) {
        for (int trial = 0; trial < 50; ++trial) {
            auto x = random_vec(6, rng);
            auto y = random_vec(6, rng);
            const double fx = gauge_eval(ctx, x);
            const double fy = gauge_eval(ctx, y);
            CHECK(fx >= 0.0);

            const double c = rng.gaussian();
            auto cx = x;
            for (double& v : cx) v *= c;
            CHECK(gauge_eval(ctx, cx) == doctest::Approx(std::abs(c) * fx).epsilon(1e-9));

            auto xy = x;
            for (int i = 0; i < 6; ++i) xy[i] += y[i];
            CHECK(gauge_eval(ctx, xy) <= fx + fy + 1e-9);

            // sign flips and permutation
            auto perm = x;
            std::swap(perm[0], perm[3]);
            std::swap(perm[1], perm[5]);
            perm[2] = -perm[2];
            CHECK(gauge_eval(ctx, perm) == doctest::Approx(fx).epsilon(1e-12));

            // monotonicity in each |coordinate|
            auto shrunk = x;
            shrunk[0] *= 0.5;
            CHECK(gauge_eval(ctx, shrunk) <= fx + 1e-12);
        }
    }
}

TEST_CASE("dual gauge closed forms") {
    GaugeContext s1 = ctx_of("S1", 2);
    GaugeContext d1 = dual(s1);
    CHECK(gauge_eval(d1, {3, 4}) == doctest::Approx(4.0));

    GaugeContext s2 = ctx_of("S2", 5);
    GaugeContext d2 = dual(s2);
    RandomStream rng(Seed{61, 0});
    for (int t = 0; t < 10; ++t) {
        auto x = random_vec(5, rng);
        CHECK(gauge_eval(d2, x) == doctest::Approx(gauge_eval(s2, x)).epsilon(1e-12));
    }

    GaugeContext kf2 = ctx_of("KF2", 4);
    GaugeContext dk = dual(kf2);
    CHECK(gauge_eval(dk, {5, 1, 2, 3}) == doctest::Approx(5.5));
}

TEST_CASE("ky fan dual matches a brute-force sup over the unit ball") {
    GaugeContext kf2 = ctx_of("KF2", 4);
    GaugeContext dk = dual(kf2);
    const std::vector<double> x = {5, 1, 2, 3};
    const double closed = gauge_eval(dk, x);

    // each draw is folded to |y| sorted descending and paired with sorted x;
    // by sign/permutation symmetry this stays inside the unit ball
    std::vector<double> xs = x;
    std::sort(xs.begin(), xs.end(), std::greater<double>());
    RandomStream rng(Seed{62, 0});
    double sup = 0.0;
    for (int t = 0; t < 100000; ++t) {
        auto y = random_vec(4, rng);
        for (double& v : y) v = std::abs(v);
        std::sort(y.begin(), y.end(), std::greater<double>());
        const double ky = gauge_eval(kf2, y);
        double ip = 0.0;
        for (int i = 0; i < 4; ++i) ip += xs[i] * y[i];
        sup = std::max(sup, ip / ky);
    }
    CHECK(closed >= sup - 1e-9); // dual value dominates every feasible point
    CHECK(std::abs(closed - sup) < 1e-2 * closed);

    // second route: sup = max_t (sum of top-t |x|) / min(t, ell)
    std::vector<double> a = {5, 3, 2, 1};
    double by_partial = 0.0, run = 0.0;
    for (int t = 1; t <= 4; ++t) {
        run += a[t - 1];
        by_partial = std::max(by_partial, run / std::min(t, 2));
    }
    CHECK(closed == doctest::Approx(by_partial).epsilon(1e-12));
}

TEST_CASE("numeric dual of a custom gauge approximates the Schatten pairing") {
    CustomGauge wrap;
    wrap.name = "wrapped_s1.5";
    wrap.eval = [](const std::vector<double>& a) {
        double s = 0.0;
        for (double v : a) s += std::pow(v, 1.5);
        return std::pow(s, 1.0 / 1.5);
    };
    GaugeContext custom{wrap, 4};
    GaugeContext numeric_dual = dual(custom);
    CHECK(std::get<CustomGauge>(numeric_dual.gauge).estimated);
    GaugeContext exact_dual = ctx_of("S3", 4);
    RandomStream rng(Seed{63, 0});
    for (int t = 0; t < 5; ++t) {
        auto x = random_vec(4, rng);
        const double approx = gauge_eval(numeric_dual, x);
        const double exact = gauge_eval(exact_dual, x);
        CHECK(approx == doctest::Approx(exact).epsilon(2e-3));
    }
}

TEST_CASE("restriction pads with zeros") {
    GaugeContext s2 = ctx_of("S2", 5);
    GaugeContext r2 = restricted(s2, 2);
    CHECK(gauge_eval(r2, {3, 4}) == doctest::Approx(5.0));

    GaugeContext kf4 = ctx_of("KF4", 6);
    GaugeContext kr = restricted(kf4, 2);
    CHECK(gauge_eval(kr, {1, 1}) == doctest::Approx(2.0)); // ell clamps to 2

    RandomStream rng(Seed{64, 0});
    GaugeContext same = restricted(kf4, 6);
    for (int t = 0; t < 10; ++t) {
        auto x = random_vec(6, rng);
        CHECK(gauge_eval(same, x) == doctest::Approx(gauge_eval(kf4, x)));
    }
    CHECK_THROWS_AS(restricted(s2, 6), dimension_error);
}

TEST_CASE("gauge at the all-one vector") {
    CHECK(gauge_at_ones(ctx_of("S2", 9)) == doctest::Approx(3.0));
    CHECK(gauge_at_ones(ctx_of("KF5", 8)) == doctest::Approx(5.0));
    CHECK(gauge_at_ones(ctx_of("Sinf", 7)) == doctest::Approx(1.0));
}

TEST_CASE("lipschitz closed forms") {
    CHECK(lipschitz(ctx_of("S1", 4)) == doctest::Approx(2.0));
    CHECK(lipschitz(ctx_of("KF3", 6)) == doctest::Approx(std::sqrt(3.0)));
    CHECK(lipschitz(ctx_of("S3", 5)) == doctest::Approx(1.0)); // exponent clamps at zero
}

TEST_CASE("lipschitz bracket tau(1)/sqrt(d) <= L <= tau(1)") {
    for (int d : {2, 5, 16, 64}) {
        for (auto* name : gauge_names) {
            GaugeContext ctx{parse_gauge(name), d};
            if (const auto* k = std::get_if<KyFanGauge>(&ctx.gauge))
                if (k->ell > d) continue;
            const double l = lipschitz(ctx);
            const double t1 = gauge_at_ones(ctx);
            CHECK(l >= t1 / std::sqrt(static_cast<double>(d)) - 1e-9);
            CHECK(l <= t1 + 1e-9);
        }
    }
}

TEST_CASE("numeric sphere maximization matches closed forms") {
    for (int d : {2, 4, 6}) {
        for (auto* name : gauge_names) {
            GaugeContext ctx{parse_gauge(name), d};
            if (const auto* k = std::get_if<KyFanGauge>(&ctx.gauge))
                if (k->ell > d) continue;
            CHECK(lipschitz_numeric(ctx, 16) == doctest::Approx(lipschitz(ctx)).epsilon(1e-3));
        }
    }
}

TEST_CASE("matrix norm basics") {
    CHECK(norm(ctx_of("Sinf", 2), Matrix::diag({3, 4}, 2, 2)) == doctest::Approx(4.0));

    RandomStream rng(Seed{65, 0});
    Matrix a = ts::random_matrix(6, 4, rng);
    CHECK(norm(ctx_of("S2", 4), a) == doctest::Approx(frobenius_norm(a)).epsilon(1e-10));
    CHECK(norm(ctx_of("KF4", 4), a) == doctest::Approx(norm(ctx_of("S1", 4), a)).epsilon(1e-10));

    // smaller matrices use the restriction convention
    GaugeContext big = ctx_of("KF3", 8);
    Matrix tiny = Matrix::diag({2, 1}, 2, 5);
    CHECK(norm(big, tiny) == doctest::Approx(3.0));

    // larger min dimension than the declared gauge is rejected
    CHECK_THROWS_AS(norm(ctx_of("S1", 2), ts::random_matrix(4, 4, rng)), dimension_error);
}

TEST_CASE("duality identity tau(1) tau*(1) = d") {
    for (auto* name : gauge_names) {
        GaugeContext ctx{parse_gauge(name), 10};
        const double prod = gauge_at_ones(ctx) * gauge_at_ones(dual(ctx));
        CHECK(prod == doctest::Approx(10.0).epsilon(1e-9));
    }
    CustomGauge wrap;
    wrap.name = "wrapped_kf2";
    wrap.eval = [](const std::vector<double>& a) { return a[0] + a[1]; };
    GaugeContext custom{wrap, 6};
    const double prod = gauge_at_ones(custom) * gauge_at_ones(dual(custom));
    CHECK(prod == doctest::Approx(6.0).epsilon(1e-3));
}

TEST_CASE("unitary invariance of matrix norms") {
    RandomStream rng(Seed{66, 0});
    Matrix a = ts::random_matrix(7, 5, rng);
    Matrix u = random_orthogonal(7, rng);
    Matrix v = random_orthogonal(5, rng);
    Matrix rotated = matmul(matmul(u, a), v);
    for (auto* name : gauge_names) {
        GaugeContext ctx{parse_gauge(name), 5};
        CHECK(std::abs(norm(ctx, a) - norm(ctx, rotated)) < 1e-8);
    }
}

TEST_CASE("block norm dominates each block") {
    RandomStream rng(Seed{67, 0});
    for (int trial = 0; trial < 10; ++trial) {
        Matrix a = ts::random_matrix(4, 3, rng);
        Matrix b = ts::random_matrix(4, 2, rng);
        Matrix ab(4, 5);
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 3; ++j) ab.at(i, j) = a.at(i, j);
            for (int j = 0; j < 2; ++j) ab.at(i, 3 + j) = b.at(i, j);
        }
        for (auto* name : {"S1", "S2", "Sinf", "KF2"}) {
            GaugeContext ctx{parse_gauge(name), 4};
            CHECK(norm(ctx, ab) >= std::max(norm(ctx, a), norm(ctx, b)) - 1e-10);
        }
    }
}

TEST_CASE("schatten sandwich for q in [1,2] on low-rank matrices") {
    RandomStream rng(Seed{68, 0});
    for (double q : {1.0, 1.5, 2.0}) {
        GaugeContext ctx{SchattenGauge{q}, 6};
        for (int trial = 0; trial < 10; ++trial) {
            const int r = 1 + rng.uniform_int(3);
            Matrix a = ts::random_low_rank(8, 6, r, rng);
            const double f = frobenius_norm(a);
            const double sq = norm(ctx, a);
            CHECK(sq >= f - 1e-9);
            CHECK(sq <= std::pow(static_cast<double>(r), 1.0 / q - 0.5) * f + 1e-9);
        }
    }
}

TEST_CASE("duality inequality <A,B> <= ||A|| ||B||_*") {
    RandomStream rng(Seed{69, 0});
    for (auto* name : gauge_names) {
        GaugeContext ctx{parse_gauge(name), 5};
        GaugeContext dctx = dual(ctx);
        for (int trial = 0; trial < 10; ++trial) {
            Matrix a = ts::random_matrix(5, 5, rng);
            Matrix b = ts::random_matrix(5, 5, rng);
            CHECK(inner(a, b) <= norm(ctx, a) * norm(dctx, b) + 1e-9);
        }
    }
}

TEST_CASE("a custom evaluator that is not a norm fails the lipschitz bracket") {
    // decreasing in the top value, so the sphere supremum exceeds tau(1)
    CustomGauge bogus;
    bogus.name = "bogus";
    bogus.eval = [](const std::vector<double>& a) { return 1.0 / (a[0] + 0.1); };
    GaugeContext ctx{bogus, 4};
    CHECK_THROWS_AS(lipschitz(ctx), optimization_error);
}

TEST_CASE("gauge text parsing") {
    CHECK(std::get<SchattenGauge>(parse_gauge("S1.5")).q == doctest::Approx(1.5));
    CHECK(std::isinf(std::get<SchattenGauge>(parse_gauge("Sinf")).q));
    CHECK(std::get<KyFanGauge>(parse_gauge("KF3")).ell == 3);
    CHECK(format_gauge(parse_gauge("S2")) == "S2");
    CHECK(format_gauge(parse_gauge("Sinf")) == "Sinf");
    CHECK(format_gauge(parse_gauge("KF7")) == "KF7");
    CHECK_THROWS_AS(parse_gauge("Q3"), config_error);
    CHECK_THROWS_AS(parse_gauge("S0.5"), config_error);
    CHECK_THROWS_AS(parse_gauge("KF0"), config_error);
}

TEST_SUITE_END();
