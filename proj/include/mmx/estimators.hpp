#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include <json.hpp>

#include "combinatorics.hpp"
#include "gauges.hpp"
#include "matrix.hpp"
#include "models.hpp"

namespace mmx {

// ---- estimator specifications ---------------------------------------------

struct IdentityEstimator {};
struct ZeroEstimator {};
struct SampleCovarianceEstimator {};
// X when lambda >= 1, zero otherwise
struct PoissonPluginEstimator {};

struct ExhaustiveSearch {
    long budget = 100000; // refuses when C(p,k)*C(m,s) exceeds this
};
struct GreedySearch {
    int random_probes = 500;
};
using SearchMode = std::variant<ExhaustiveSearch, GreedySearch>;

// smallest admissible threshold constants
inline double min_selector_c1() { return std::sqrt(6.0 + 2.0 * std::sqrt(2.0 * 3.14159265358979323846)); }

struct SubmatrixSelectorEstimator {
    int k = 1, s = 1;
    double gamma = 4.0;
    double c1 = 3.33;
    SearchMode search = ExhaustiveSearch{};
};

using EstimatorSpec = std::variant<IdentityEstimator, ZeroEstimator, SampleCovarianceEstimator,
                                   PoissonPluginEstimator, SubmatrixSelectorEstimator>;

inline void validate(const EstimatorSpec& spec) {
    if (const auto* sub = std::get_if<SubmatrixSelectorEstimator>(&spec)) {
        if (sub->k < 1 || sub->s < 1) throw invalid_spec("submatrix selector: k, s must be positive");
        if (sub->gamma < 4.0) throw invalid_spec("submatrix selector: gamma must be >= 4");
        if (sub->c1 < min_selector_c1() - 1e-12)
            throw invalid_spec("submatrix selector: c1 must be >= sqrt(6 + 2 sqrt(2 pi))");
        if (const auto* ex = std::get_if<ExhaustiveSearch>(&sub->search))
            if (ex->budget < 1) throw invalid_spec("exhaustive search: budget must be positive");
        if (const auto* gr = std::get_if<GreedySearch>(&sub->search))
            if (gr->random_probes < 0) throw invalid_spec("greedy search: probes must be nonnegative");
    }
}

struct SelectorTrace {
    std::optional<std::pair<IndexSet, IndexSet>> selected; // (I_hat, J_hat)
    bool empty_flag = true;   // true iff nothing was selected (estimator returns 0)
    long checked_blocks = 0;  // threshold comparisons performed
    SearchMode mode = ExhaustiveSearch{};
    bool heuristic = false;   // greedy membership is not certified
};

// ---- the psi threshold ------------------------------------------------------

// c1 tau|_r(1) sqrt(i v j) + sqrt(gamma) L_{tau|_r} sqrt(i log(ep/i) + j log(em/j)),
// where ctx_r is the gauge already restricted to r = k ^ s.
inline double psi_threshold(const GaugeContext& ctx_r, int i, int j, int p, int m, double gamma,
                            double c1) {
    if (i < 1 || i > p || j < 1 || j > m) throw domain_error("psi_threshold: block size out of range");
    const double t1 = gauge_at_ones(ctx_r);
    const double lip = lipschitz(ctx_r);
    const double logs = i * std::log(std::exp(1.0) * p / i) + j * std::log(std::exp(1.0) * m / j);
    return c1 * t1 * std::sqrt(static_cast<double>(std::max(i, j))) +
           std::sqrt(gamma) * lip * std::sqrt(logs);
}

// ---- support selection ------------------------------------------------------

namespace detail {

struct BlockKey {
    std::uint64_t f = 0, g = 0;
    bool operator==(const BlockKey& o) const { return f == o.f && g == o.g; }
};
struct BlockKeyHash {
    std::size_t operator()(const BlockKey& k) const {
        return static_cast<std::size_t>(mix64(k.f ^ mix64(k.g)));
    }
};

// caches block norms across candidate supports (masks require p, m <= 64)
class BlockNormCache {
  public:
    BlockNormCache(const Matrix& y, const GaugeContext& ctx)
        : y_(y), ctx_(ctx), maskable_(y.rows() <= 64 && y.cols() <= 64) {}

    double norm_of(const std::vector<int>& f, const std::vector<int>& g) {
        if (!maskable_) return compute(f, g);
        BlockKey key{mask(f), mask(g)};
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        const double v = compute(f, g);
        cache_.emplace(key, v);
        return v;
    }

  private:
    static std::uint64_t mask(const std::vector<int>& ids) {
        std::uint64_t m = 0;
        for (int v : ids) m |= (1ULL << (v - 1));
        return m;
    }

    double compute(const std::vector<int>& f, const std::vector<int>& g) const {
        Matrix block(static_cast<int>(f.size()), static_cast<int>(g.size()));
        for (std::size_t i = 0; i < f.size(); ++i)
            for (std::size_t j = 0; j < g.size(); ++j)
                block.at(static_cast<int>(i), static_cast<int>(j)) =
                    y_.at(f[i] - 1, g[j] - 1);
        return norm(ctx_, block);
    }

    const Matrix& y_;
    const GaugeContext& ctx_;
    bool maskable_;
    std::unordered_map<BlockKey, double, BlockKeyHash> cache_;
};

} // namespace detail

// Literal membership check: every block F x G inside the complement of
// A x B (i.e. F disjoint from A, or G disjoint from B) with |F| <= k,
// |G| <= s satisfies ||Y_FG|| <= psi(|F|, |G|). This is the certified path
// used by exhaustive search and by the trace verifiers.
inline bool certify_support(const Matrix& y, const IndexSet& a, const IndexSet& b, int k, int s,
                            double gamma, double c1, const GaugeContext& ctx,
                            long* checked_blocks = nullptr) {
    const int p = y.rows(), m = y.cols();
    const GaugeContext ctx_r = restricted(ctx, std::min(k, s));
    std::vector<std::vector<double>> psi(k + 1, std::vector<double>(s + 1, 0.0));
    for (int i = 1; i <= k; ++i)
        for (int j = 1; j <= s; ++j) psi[i][j] = psi_threshold(ctx_r, i, j, p, m, gamma, c1);

    detail::BlockNormCache cache(y, ctx);
    long checked = 0;
    const std::vector<int> all_rows = IndexSet::full(p).members;
    const std::vector<int> all_cols = IndexSet::full(m).members;
    const std::vector<int> rows_off = a.complement().members;
    const std::vector<int> cols_off = b.complement().members;

    auto scan = [&](const std::vector<int>& row_pool, const std::vector<int>& col_pool) {
        for (int i = 1; i <= k; ++i) {
            for (detail::Combinations fc(row_pool, i); !fc.done(); fc.next()) {
                const std::vector<int> f = fc.current();
                for (int j = 1; j <= s; ++j) {
                    for (detail::Combinations gc(col_pool, j); !gc.done(); gc.next()) {
                        ++checked;
                        if (cache.norm_of(f, gc.current()) > psi[i][j]) return false;
                    }
                }
            }
        }
        return true;
    };

    const bool ok = scan(rows_off, all_cols) && scan(all_rows, cols_off);
    if (checked_blocks) *checked_blocks += checked;
    return ok;
}

namespace detail {

inline std::vector<int> top_energy(const std::vector<double>& energy,
                                   const std::vector<int>& pool, int count) {
    std::vector<int> sorted = pool;
    std::stable_sort(sorted.begin(), sorted.end(), [&](int x, int y) {
        return energy[x - 1] > energy[y - 1];
    });
    sorted.resize(count);
    std::sort(sorted.begin(), sorted.end());
    return sorted;
}

inline SelectorTrace select_exhaustive(const Matrix& y, int k, int s, double gamma, double c1,
                                       const GaugeContext& ctx, const ExhaustiveSearch& mode) {
    const int p = y.rows(), m = y.cols();
    const double log_candidates = log_binomial(p, k) + log_binomial(m, s);
    if (log_candidates > std::log(static_cast<double>(mode.budget)) + 1e-9)
        throw budget_exceeded("exhaustive selector: C(p,k)*C(m,s) exceeds the budget");

    SelectorTrace trace;
    trace.mode = mode;
    trace.heuristic = false;

    const GaugeContext ctx_r = restricted(ctx, std::min(k, s));
    std::vector<std::vector<double>> psi(k + 1, std::vector<double>(s + 1, 0.0));
    for (int i = 1; i <= k; ++i)
        for (int j = 1; j <= s; ++j) psi[i][j] = psi_threshold(ctx_r, i, j, p, m, gamma, c1);

    detail::BlockNormCache cache(y, ctx);
    const std::vector<int> all_rows = IndexSet::full(p).members;
    const std::vector<int> all_cols = IndexSet::full(m).members;

    // first candidate in lexicographic order that passes wins
    for (Combinations ac(all_rows, k); !ac.done(); ac.next()) {
        const std::vector<int> a = ac.current();
        std::vector<int> rows_off;
        for (int v : all_rows)
            if (std::find(a.begin(), a.end(), v) == a.end()) rows_off.push_back(v);
        for (Combinations bc(all_cols, s); !bc.done(); bc.next()) {
            const std::vector<int> b = bc.current();
            std::vector<int> cols_off;
            for (int v : all_cols)
                if (std::find(b.begin(), b.end(), v) == b.end()) cols_off.push_back(v);

            bool ok = true;
            auto scan = [&](const std::vector<int>& row_pool, const std::vector<int>& col_pool) {
                for (int i = 1; i <= k && ok; ++i)
                    for (Combinations fc(row_pool, i); !fc.done() && ok; fc.next()) {
                        const std::vector<int> f = fc.current();
                        for (int j = 1; j <= s && ok; ++j)
                            for (Combinations gc(col_pool, j); !gc.done() && ok; gc.next()) {
                                ++trace.checked_blocks;
                                if (cache.norm_of(f, gc.current()) > psi[i][j]) ok = false;
                            }
                    }
            };
            scan(rows_off, all_cols);
            if (ok) scan(all_rows, cols_off);
            if (ok) {
                trace.selected = std::make_pair(IndexSet::of(p, a), IndexSet::of(m, b));
                trace.empty_flag = false;
                return trace;
            }
        }
    }
    trace.empty_flag = true;
    return trace;
}

inline SelectorTrace select_greedy(const Matrix& y, int k, int s, double gamma, double c1,
                                   const GaugeContext& ctx, const GreedySearch& mode) {
    const int p = y.rows(), m = y.cols();
    SelectorTrace trace;
    trace.mode = mode;
    trace.heuristic = true;

    std::vector<double> row_energy(p, 0.0), col_energy(m, 0.0);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < m; ++j) {
            const double v = y.at(i, j) * y.at(i, j);
            row_energy[i] += v;
            col_energy[j] += v;
        }

    const std::vector<int> all_rows = IndexSet::full(p).members;
    const std::vector<int> all_cols = IndexSet::full(m).members;
    const std::vector<int> a = top_energy(row_energy, all_rows, k);
    const std::vector<int> b = top_energy(col_energy, all_cols, s);

    std::vector<int> rows_off, cols_off;
    for (int v : all_rows)
        if (std::find(a.begin(), a.end(), v) == a.end()) rows_off.push_back(v);
    for (int v : all_cols)
        if (std::find(b.begin(), b.end(), v) == b.end()) cols_off.push_back(v);

    const GaugeContext ctx_r = restricted(ctx, std::min(k, s));
    std::vector<std::vector<double>> psi(k + 1, std::vector<double>(s + 1, 0.0));
    for (int i = 1; i <= k; ++i)
        for (int j = 1; j <= s; ++j) psi[i][j] = psi_threshold(ctx_r, i, j, p, m, gamma, c1);

    detail::BlockNormCache cache(y, ctx);
    bool ok = true;

    // energy-ranked rectangles for every admissible block size
    for (int i = 1; i <= k && ok; ++i)
        for (int j = 1; j <= s && ok; ++j) {
            if (i <= static_cast<int>(rows_off.size())) {
                ++trace.checked_blocks;
                if (cache.norm_of(top_energy(row_energy, rows_off, i),
                                  top_energy(col_energy, all_cols, j)) > psi[i][j])
                    ok = false;
            }
            if (ok && j <= static_cast<int>(cols_off.size())) {
                ++trace.checked_blocks;
                if (cache.norm_of(top_energy(row_energy, all_rows, i),
                                  top_energy(col_energy, cols_off, j)) > psi[i][j])
                    ok = false;
            }
        }

    // random probes, deterministic in the observation
    std::uint64_t h = 0x47524545ULL;
    for (double v : y.entries()) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(v));
        std::memcpy(&bits, &v, sizeof(bits));
        h = hash_combine(h, bits);
    }
    RandomStream rng(Seed{h, 0});
    auto random_subset = [&](const std::vector<int>& pool, int count) {
        std::vector<int> scratch = pool;
        for (int i = 0; i < count; ++i)
            std::swap(scratch[i], scratch[i + rng.uniform_int(static_cast<int>(scratch.size()) - i)]);
        scratch.resize(count);
        std::sort(scratch.begin(), scratch.end());
        return scratch;
    };

    for (int probe = 0; probe < mode.random_probes && ok; ++probe) {
        const bool row_side = rng.uniform01() < 0.5;
        const int i = 1 + rng.uniform_int(k);
        const int j = 1 + rng.uniform_int(s);
        std::vector<int> f, g;
        if (row_side && i <= static_cast<int>(rows_off.size())) {
            f = random_subset(rows_off, i);
            g = random_subset(all_cols, j);
        } else if (!row_side && j <= static_cast<int>(cols_off.size())) {
            f = random_subset(all_rows, i);
            g = random_subset(cols_off, j);
        } else {
            continue;
        }
        ++trace.checked_blocks;
        if (cache.norm_of(f, g) > psi[i][j]) ok = false;
    }

    if (ok) {
        trace.selected = std::make_pair(IndexSet::of(p, a), IndexSet::of(m, b));
        trace.empty_flag = false;
    } else {
        trace.empty_flag = true;
    }
    return trace;
}

} // namespace detail

inline SelectorTrace select_support(const Matrix& y, int k, int s, double gamma, double c1,
                                    const GaugeContext& ctx, const SearchMode& mode) {
    if (k < 1 || k > y.rows() || s < 1 || s > y.cols())
        throw domain_error("select_support: need 1 <= k <= p and 1 <= s <= m");
    if (const auto* ex = std::get_if<ExhaustiveSearch>(&mode))
        return detail::select_exhaustive(y, k, s, gamma, c1, ctx, *ex);
    return detail::select_greedy(y, k, s, gamma, c1, ctx, std::get<GreedySearch>(mode));
}

// ---- estimation ------------------------------------------------------------

inline Matrix apply_selector(const Matrix& y, const SelectorTrace& trace) {
    Matrix out(y.rows(), y.cols());
    if (trace.empty_flag) return out;
    for (int i : trace.selected->first.members)
        for (int j : trace.selected->second.members) out.at(i - 1, j - 1) = y.at(i - 1, j - 1);
    return out;
}

inline std::pair<Matrix, SelectorTrace> estimate_with_trace(const SubmatrixSelectorEstimator& spec,
                                                            const Matrix& y,
                                                            const GaugeContext& ctx) {
    validate(EstimatorSpec{spec});
    SelectorTrace trace = select_support(y, spec.k, spec.s, spec.gamma, spec.c1, ctx, spec.search);
    return {apply_selector(y, trace), trace};
}

inline Matrix estimate(const EstimatorSpec& spec, const Observation& obs,
                       const ModelSpec& model, const GaugeContext& ctx) {
    validate(spec);
    validate(model);
    if (std::get_if<IdentityEstimator>(&spec)) {
        if (const auto* g = std::get_if<GaussianMeanObs>(&obs)) return g->y;
        if (const auto* po = std::get_if<PoissonObs>(&obs)) return po->counts;
        throw config_error("identity estimator needs a matrix-valued observation");
    }
    if (std::get_if<ZeroEstimator>(&spec)) {
        if (const auto* g = std::get_if<GaussianMeanModel>(&model)) return Matrix(g->p, g->m);
        if (const auto* c = std::get_if<CovarianceModel>(&model)) return Matrix(c->k, c->k);
        if (const auto* po = std::get_if<PoissonModel>(&model)) return Matrix(po->k, po->s);
        const auto& co = std::get<CompletionModel>(model);
        return Matrix(co.k, co.s);
    }
    if (std::get_if<SampleCovarianceEstimator>(&spec)) {
        const auto* c = std::get_if<CovarianceObs>(&obs);
        if (!c) throw config_error("sample covariance estimator needs a covariance observation");
        return c->s;
    }
    if (std::get_if<PoissonPluginEstimator>(&spec)) {
        const auto* po = std::get_if<PoissonObs>(&obs);
        const auto* pm = std::get_if<PoissonModel>(&model);
        if (!po || !pm) throw config_error("poisson plug-in estimator needs the poisson model");
        if (pm->lambda >= 1.0) return po->counts;
        return Matrix(pm->k, pm->s);
    }
    const auto& sub = std::get<SubmatrixSelectorEstimator>(spec);
    const auto* g = std::get_if<GaussianMeanObs>(&obs);
    if (!g) throw config_error("submatrix selector needs a gaussian mean observation");
    return estimate_with_trace(sub, g->y, ctx).first;
}

inline double squared_loss(const GaugeContext& ctx, const Matrix& mhat, const Matrix& m) {
    if (!mhat.same_shape(m)) throw dimension_error("squared_loss: shape mismatch");
    const double v = norm(ctx, mhat - m);
    return v * v;
}

// ---- JSON schema -------------------------------------------------------------

inline EstimatorSpec estimator_from_json(const nlohmann::json& j) {
    const std::string kind = j.value("estimator", "");
    try {
        if (kind == "identity") return IdentityEstimator{};
        if (kind == "zero") return ZeroEstimator{};
        if (kind == "sample_covariance") return SampleCovarianceEstimator{};
        if (kind == "poisson_plugin") return PoissonPluginEstimator{};
        if (kind == "submatrix") {
            SubmatrixSelectorEstimator sub;
            sub.k = j.at("k").get<int>();
            sub.s = j.at("s").get<int>();
            sub.gamma = j.value("gamma", 4.0);
            sub.c1 = j.value("c1", 3.33);
            if (j.contains("search")) {
                const auto& sj = j.at("search");
                const std::string mode = sj.value("mode", "");
                if (mode == "exhaustive")
                    sub.search = ExhaustiveSearch{sj.value("budget", 100000L)};
                else if (mode == "greedy")
                    sub.search = GreedySearch{sj.value("random_probes", 500)};
                else
                    throw config_error("estimator json: unknown search mode '" + mode + "'");
            }
            validate(EstimatorSpec{sub});
            return sub;
        }
    } catch (const nlohmann::json::exception& e) {
        throw config_error(std::string("estimator json: ") + e.what());
    } catch (const invalid_spec& e) {
        throw config_error(std::string("estimator json: ") + e.what());
    }
    throw config_error("estimator json: unknown estimator '" + kind + "'");
}

inline nlohmann::ordered_json estimator_to_json(const EstimatorSpec& spec) {
    nlohmann::ordered_json j;
    if (std::get_if<IdentityEstimator>(&spec))
        j["estimator"] = "identity";
    else if (std::get_if<ZeroEstimator>(&spec))
        j["estimator"] = "zero";
    else if (std::get_if<SampleCovarianceEstimator>(&spec))
        j["estimator"] = "sample_covariance";
    else if (std::get_if<PoissonPluginEstimator>(&spec))
        j["estimator"] = "poisson_plugin";
    else {
        const auto& sub = std::get<SubmatrixSelectorEstimator>(spec);
        j["estimator"] = "submatrix";
        j["k"] = sub.k;
        j["s"] = sub.s;
        j["gamma"] = sub.gamma;
        j["c1"] = sub.c1;
        if (const auto* ex = std::get_if<ExhaustiveSearch>(&sub.search))
            j["search"] = {{"mode", "exhaustive"}, {"budget", ex->budget}};
        else
            j["search"] = {{"mode", "greedy"},
                           {"random_probes", std::get<GreedySearch>(sub.search).random_probes}};
    }
    return j;
}

} // namespace mmx
