#include <doctest.h>

#include <mmx/geometry.hpp>

#include <cmath>

#include "test_support.hpp"

using namespace mmx;

TEST_SUITE_BEGIN("geometry");

TEST_CASE("oracle mean rate") {
    GaugeContext s2 = make_context("S2", 10);
    RateBreakdown r = rate_oracle_mean(s2, 10, 10, 1.0);
    CHECK(r.total == doctest::Approx(100.0));
    CHECK(r.excess == 0.0);

    GaugeContext sinf = make_context("Sinf", 10);
    CHECK(rate_oracle_mean(sinf, 10, 10, 1.0).total == doctest::Approx(10.0));

    CHECK(rate_oracle_mean(s2, 10, 10, 2.0).total ==
          doctest::Approx(4.0 * rate_oracle_mean(s2, 10, 10, 1.0).total));
}

TEST_CASE("submatrix rate specializations") {
    const int k = 3, s = 5, p = 40, m = 60;
    const int r = std::min(k, s);
    const double logs = k * std::log(std::exp(1.0) * p / k) + s * std::log(std::exp(1.0) * m / s);

    for (double q : {1.0, 1.5, 2.0, 3.0}) {
        GaugeContext ctx{SchattenGauge{q}, std::min(p, m)};
        RateBreakdown rb = rate_submatrix(ctx, k, s, p, m);
        CHECK(rb.oracle == doctest::Approx(std::pow(r, 2.0 / q) * std::max(k, s)).epsilon(1e-12));
        const double lip2 = std::pow(r, std::max(2.0 / q - 1.0, 0.0));
        CHECK(rb.excess == doctest::Approx(lip2 * logs).epsilon(1e-12));
        CHECK(rb.total == doctest::Approx(rb.oracle + rb.excess));
    }

    for (int ell : {1, 2, 3}) {
        GaugeContext ctx{KyFanGauge{ell}, std::min(p, m)};
        RateBreakdown rb = rate_submatrix(ctx, k, s, p, m);
        CHECK(rb.oracle == doctest::Approx(static_cast<double>(ell) * ell * std::max(k, s)));
        CHECK(rb.excess == doctest::Approx(ell * logs).epsilon(1e-12));
    }
}

TEST_CASE("group sparsity: the dropped column term is dominated") {
    // with s = m the rate reduces to tau|_r(1)^2 (k v m) + L^2 k log(ep/k),
    // and L^2 m <= tau|_r(1)^2 (k v m) makes the dropped term harmless
    const int k = 6, p = 50, m = 12;
    for (const char* name : {"S1", "S1.5", "S2", "Sinf", "KF2"}) {
        GaugeContext ctx{parse_gauge(name), std::min(p, m)};
        const int r = std::min(k, m);
        const GaugeContext ctx_r = restricted(ctx, r);
        const double t1 = gauge_at_ones(ctx_r), lip = lipschitz(ctx_r);
        CHECK(lip * lip * m <= t1 * t1 * std::max(k, m) + 1e-9);
    }
}

TEST_CASE("submatrix rate collapses toward the oracle rate when p=k, m=s") {
    for (const char* name : {"S1", "S2", "Sinf", "KF3"}) {
        for (int k : {4, 9}) {
            GaugeContext ctx{parse_gauge(name), k};
            RateBreakdown full = rate_submatrix(ctx, k, k, k, k);
            RateBreakdown oracle = rate_oracle_mean(ctx, k, k, 1.0);
            CHECK(full.oracle == doctest::Approx(oracle.total));
            CHECK(full.excess <= 2.0 * full.oracle + 1e-9);
        }
    }
}

TEST_CASE("covariance rate") {
    GaugeContext sinf = make_context("Sinf", 10);
    CHECK(rate_covariance(sinf, 10, 1000, 2.0).total == doctest::Approx(0.04));

    GaugeContext s2 = make_context("S2", 8);
    // k >= n clamps at the squared radius of the space
    const double t1 = gauge_at_ones(s2);
    CHECK(rate_covariance(s2, 8, 4, 3.0).total == doctest::Approx(9.0 * t1 * t1));
    CHECK(rate_covariance(s2, 8, 100, 2.0).total ==
          doctest::Approx(4.0 * rate_covariance(s2, 8, 100, 1.0).total));
}

TEST_CASE("poisson rate") {
    GaugeContext s1 = make_context("S1", 4);
    RateBreakdown rb = rate_poisson(s1, 4, 4, 4.0);
    CHECK(rb.total == doctest::Approx(256.0)); // 4 * 16 * 4
    CHECK(!rb.lower_bound_only);               // Schatten q <= 2 is tight

    CHECK(rate_poisson(s1, 4, 4, 1.0).total == doctest::Approx(64.0));
    CHECK(rate_poisson(s1, 4, 4, 0.5).total == doctest::Approx(0.25 * 64.0));

    GaugeContext sinf = make_context("Sinf", 4);
    CHECK(rate_poisson(sinf, 4, 4, 2.0).lower_bound_only);
    GaugeContext s3 = make_context("S3", 4);
    CHECK(rate_poisson(s3, 4, 4, 2.0).lower_bound_only);
}

TEST_CASE("completion rate") {
    // Schatten-q substitution
    for (double q : {1.0, 2.0}) {
        const int k = 8, s = 6, r = 2, n = 12;
        const double sigma = 0.5, a = 1.0;
        GaugeContext ctx{SchattenGauge{q}, std::min(k, s)};
        RateBreakdown rb = rate_completion(ctx, k, s, r, n, sigma, a);
        const double expect = sigma * sigma * (static_cast<double>(k) * s / n) *
                              std::pow(r, 2.0 / q) * std::max(k, s);
        CHECK(rb.total == doctest::Approx(expect).epsilon(1e-12));
        CHECK(rb.lower_bound_only);
    }

    // full observation with maximal rank matches the unconstrained oracle
    GaugeContext s2 = make_context("S2", 4);
    const int k = 6, s = 4;
    RateBreakdown rb = rate_completion(s2, k, s, std::min(k, s), k * s, 0.7, 1.0);
    CHECK(rb.total == doctest::Approx(0.49 * std::max(k, s) * std::min(k, s)).epsilon(1e-12));

    CHECK(rate_completion(s2, k, s, 2, 5, 1.0, 1e-9).total < 1e-12);
}

TEST_CASE("fano bound") {
    CHECK(fano_bound(FanoInputs{1.0, 5.0, 1.0}) == 0.0); // vacuous
    CHECK(fano_bound(FanoInputs{2.0, 0.0, 2.0 * std::log(2.0)}) == doctest::Approx(0.5));

    double prev = 0.0;
    for (double lp : {1.0, 2.0, 4.0, 8.0, 100.0}) {
        const double v = fano_bound(FanoInputs{2.0, 1.0, lp});
        CHECK(v >= prev);
        CHECK(v <= 1.0); // eps^2/4
        CHECK(v >= 0.0);
        prev = v;
    }
    CHECK(fano_probability(FanoInputs{1.0, 0.0, 2.0 * std::log(2.0)}) == doctest::Approx(0.5));
    CHECK_THROWS_AS(fano_bound(FanoInputs{1.0, 0.0, 0.0}), domain_error);
}

TEST_CASE("fano constant: positivity, monotonicity, high-dimensional limit") {
    CHECK(fano_constant(1) > 1.0 / 400.0);

    double prev = 0.0;
    for (int e = 0; e <= 20; ++e) {
        const double v = fano_constant(1 << e);
        CHECK(v >= prev - 1e-12);
        CHECK(v > 0.0);
        CHECK(v <= 1.0 / (16.0 * std::exp(1.0)) + 1e-9);
        prev = v;
    }

    const double c_big = fano_constant(1000000);
    CHECK(c_big >= 0.020);
    CHECK(c_big <= 1.0 / (16.0 * std::exp(1.0)) + 1e-3);

    // independent coarse grid-search oracle over (a, b)
    const int d = 1000000;
    double grid_best = 0.0;
    for (int ia = 1; ia <= 400; ++ia) {
        const double a = 2.0 * ia / 400.0;
        for (int ib = 1; ib < 400; ++ib) {
            const double b = static_cast<double>(ib) / 400.0;
            const double v =
                (a * b / 4.0) * (1.0 - (d * a + 2.0 * std::log(2.0)) / (d * std::log(1.0 / b)));
            grid_best = std::max(grid_best, v);
        }
    }
    CHECK(c_big >= grid_best - 1e-6);
    CHECK(c_big <= grid_best + 2e-4); // the coarse grid undershoots only slightly
}

TEST_CASE("gaussian width monte carlo") {
    // self-dual S2: E||Z||_F just below sqrt(ks) = sqrt(E||Z||_F^2); the
    // Jensen gap is a fraction of one standard error, hence the allowance
    GaugeContext s2 = make_context("S2", 10);
    WidthEstimate w = gaussian_width_mc(s2, 10, 10, 500, Seed{200, 0});
    CHECK(w.mean <= 10.0 + 3.0 * w.stderr_of_mean);
    CHECK(w.mean >= 9.5);

    // S1 unit ball: width is E sigma_1 <= sqrt(k) + sqrt(s)
    GaugeContext s1 = make_context("S1", 20);
    WidthEstimate w1 = gaussian_width_mc(s1, 20, 20, 300, Seed{201, 0});
    CHECK(w1.mean <= 2.0 * std::sqrt(20.0));
    CHECK(w1.mean >= 0.8 * 2.0 * std::sqrt(20.0));

    WidthEstimate again = gaussian_width_mc(s1, 20, 20, 300, Seed{201, 0});
    CHECK(again.mean == w1.mean);
    CHECK(again.stderr_of_mean == w1.stderr_of_mean);
}

TEST_CASE("volume ratio logs") {
    // delta sqrt(d) = eps * width gives a zero log-ratio
    CHECK(volume_ratio_log(1.0, 2.0, 4, 1.0) == doctest::Approx(0.0));
    CHECK(log_vol_ball2(2) == doctest::Approx(std::log(3.14159265358979323846)));

    // Stirling-expansion oracle at d = 10^4 for the per-dimension radius
    const int d = 10000;
    const double pi = 3.14159265358979323846;
    const double exact = log_vol_ball2(d) / d;
    const double x = d / 2.0 + 1.0;
    const double lgamma_stirling = (x - 0.5) * std::log(x) - x + 0.5 * std::log(2.0 * pi);
    const double oracle = 0.5 * std::log(pi) - lgamma_stirling / d;
    const double ratio_exact = exact / (-0.5 * std::log(static_cast<double>(d)));
    const double ratio_oracle = oracle / (-0.5 * std::log(static_cast<double>(d)));
    CHECK(std::abs(ratio_exact - ratio_oracle) <= 0.01 * std::abs(ratio_oracle));
}

TEST_CASE("dispersion certificate on identity and structured inputs") {
    std::vector<GaugeContext> gauges = {make_context("S1", 64), make_context("S2", 64),
                                        make_context("Sinf", 64)};

    Matrix eye = Matrix::identity(64);
    std::vector<double> decay(64);
    for (int i = 0; i < 64; ++i) decay[i] = std::pow(0.9, i);
    Matrix geo = Matrix::diag(decay, 64, 64);
    Matrix rank1 = Matrix::diag({1.0}, 64, 64);

    for (const Matrix* d : {&eye, &geo, &rank1}) {
        DispersionResult res = construct_dispersion(*d, gauges, Seed{210, 7});
        CHECK(frobenius_norm(res.w) <= frobenius_norm(*d) * (1 + 1e-12));
        CHECK(res.certificate.passes == res.certificate.trials);
        CHECK(res.j_removed == 2); // ceil(64/50)
        CHECK(res.c0 > 0.0);
        CHECK(res.c0 < 1.0);
    }
}

TEST_CASE("dispersion balance verified by full svd on sampled subsets") {
    std::vector<GaugeContext> gauges = {make_context("S1", 50), make_context("S2", 50),
                                        make_context("Sinf", 50)};
    Matrix d = Matrix::identity(50);
    DispersionResult res = construct_dispersion(d, gauges, Seed{211, 0});

    RandomStream rng(Seed{212, 0});
    const int k = 50, j = res.j_removed;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<int> perm(k);
        for (int i = 0; i < k; ++i) perm[i] = i + 1;
        for (int i = 0; i < k - j; ++i)
            std::swap(perm[i], perm[i + rng.uniform_int(k - i)]);
        perm.resize(k - j);
        std::sort(perm.begin(), perm.end());
        Matrix wb = submatrix(res.w, IndexSet::of(k, perm), IndexSet::full(50));
        for (const auto& ctx : gauges) {
            const double dn = norm(ctx, d);
            CHECK(norm(ctx, wb) >= res.c0 * dn);
        }
    }
}

TEST_CASE("dispersion spreads row energy") {
    Matrix d = Matrix::identity(50);
    DispersionResult res = construct_dispersion(d, {make_context("S2", 50)}, Seed{213, 1});
    double max_row = 0.0, total = 0.0;
    for (int i = 0; i < 50; ++i) {
        double row = 0.0;
        for (int jj = 0; jj < 50; ++jj) row += res.w.at(i, jj) * res.w.at(i, jj);
        row = std::sqrt(row);
        max_row = std::max(max_row, row);
        total += row;
    }
    CHECK(max_row <= 5.0 * (total / 50.0));
}

TEST_CASE("dispersion rejects k < 50") {
    CHECK_THROWS_AS(construct_dispersion(Matrix::identity(10), {make_context("S2", 10)}, Seed{}),
                    domain_error);
}

TEST_CASE("gv subset family") {
    // k0 = k-1 admits any distinct subsets
    auto fam = subset_family_gv(6, 3, 2, 15, Seed{220, 0});
    CHECK(static_cast<int>(fam.size()) == 15);

    auto tight = subset_family_gv(20, 4, 1, 10, Seed{221, 0});
    CHECK(static_cast<int>(tight.size()) >= 10);
    for (std::size_t i = 0; i < tight.size(); ++i)
        for (std::size_t j = i + 1; j < tight.size(); ++j) {
            int inter = 0;
            for (int v : tight[i].members)
                if (tight[j].contains(v)) ++inter;
            CHECK(inter <= 1);
        }

    auto again = subset_family_gv(20, 4, 1, 10, Seed{221, 0});
    REQUIRE(again.size() == tight.size());
    for (std::size_t i = 0; i < again.size(); ++i)
        CHECK(again[i].members == tight[i].members);

    CHECK_THROWS_AS(subset_family_gv(5, 3, 3, 4, Seed{}), domain_error);
}

TEST_CASE("packing family: basis branch") {
    GaugeContext s2 = make_context("S2", 16);
    PackingFamily fam = construct_packing(64, 16, 4, 4, s2, Seed{230, 0});
    CHECK(fam.members.size() == 64);
    CHECK(fam.log_cardinality >= 0.1 * 4.0 * std::log(std::exp(1.0) * 64.0 / 4.0));
    for (const auto& v : fam.members) CHECK(frobenius_norm(v) <= 1.0 + 1e-12);
    CHECK(fam.min_pairwise_norm >= fam.c1 * lipschitz(restricted(s2, 4)));
    CHECK(fam.min_pairwise_norm == doctest::Approx(std::sqrt(2.0)));

    // k = 1: pairwise distances at least tau(e1)
    GaugeContext sinf = make_context("Sinf", 3);
    PackingFamily tiny = construct_packing(6, 3, 1, 1, sinf, Seed{231, 0});
    CHECK(tiny.members.size() == 6);
    for (std::size_t i = 0; i < tiny.members.size(); ++i)
        for (std::size_t j = i + 1; j < tiny.members.size(); ++j)
            CHECK(norm(sinf, tiny.members[i] - tiny.members[j]) >= 1.0 - 1e-12);
}

TEST_CASE("packing family: dispersion branch at k = 50") {
    // the proof constant makes the intersection cap zero, so supports must be
    // disjoint; the universe has to be sparse enough for rejection sampling
    GaugeContext s2 = make_context("S2", 4);
    PackingFamily fam = construct_packing(2000, 4, 50, 2, s2, Seed{232, 0}, PackingOptions{4});
    CHECK(fam.members.size() >= 2);
    for (const auto& w : fam.members) {
        CHECK(frobenius_norm(w) <= 1.0 + 1e-12);
        // row support confined to 50 rows, columns to the first 2
        int nz_rows = 0;
        for (int i = 0; i < 2000; ++i) {
            bool nz = false;
            for (int j = 0; j < 4; ++j) nz |= w.at(i, j) != 0.0;
            nz_rows += nz;
        }
        CHECK(nz_rows <= 50);
    }
    CHECK(fam.min_pairwise_norm >= fam.c1 * lipschitz(restricted(s2, 2)));

    // dense universes cannot host two disjoint supports and fail loudly
    CHECK_THROWS_AS(construct_packing(60, 4, 50, 2, s2, Seed{233, 0}, PackingOptions{4}),
                    construction_failed);
}

TEST_SUITE_END();
