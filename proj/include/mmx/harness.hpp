#pragma once

#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "estimators.hpp"
#include "geometry.hpp"
#include "models.hpp"

namespace mmx {

// ---- experiment configuration -----------------------------------------------

struct TruthExplicit {
    Matrix matrix;
};
// scale * I on the model's diagonal (the radius configuration)
struct TruthWorstDiag {
    double scale = 1.0;
};
// uniformly random row/column supports carrying a full-rank block of
// prescribed Frobenius scale
struct TruthRandomSupport {
    double scale = 1.0;
};
using TruthRule = std::variant<TruthExplicit, TruthWorstDiag, TruthRandomSupport>;

enum class NoiseKind { gaussian, student_t5 };

struct ExperimentConfig {
    ModelSpec model;
    EstimatorSpec estimator;
    std::string gauge = "S2";
    TruthRule truth = TruthWorstDiag{};
    int replicates = 500;
    Seed seed;
    std::string output_path;
    int workers = 1;
    NoiseKind noise = NoiseKind::gaussian; // student_t5 applies to the mean model only
};

struct RiskReport {
    double empirical_risk = 0.0;
    double stderr_of_mean = 0.0;
    RateBreakdown rate;
    double ratio = 0.0;
    int replicates = 0;
    Seed seed;
    std::vector<std::string> heuristic_flags;
};

struct SweepPoint {
    double value = 0.0;
    RiskReport report;
};

struct SweepTable {
    std::string axis;
    std::vector<SweepPoint> points;
};

// ---- truth generation ----------------------------------------------------------

namespace detail {

inline constexpr std::uint64_t truth_stream = ~0ULL;

inline Matrix worst_diag_truth(const ModelSpec& model, double scale) {
    if (const auto* g = std::get_if<GaussianMeanModel>(&model)) {
        const int k = g->sparsity ? g->sparsity->first : g->p;
        const int s = g->sparsity ? g->sparsity->second : g->m;
        Matrix out(g->p, g->m);
        for (int i = 0; i < std::min(k, s); ++i) out.at(i, i) = scale;
        return out;
    }
    if (const auto* c = std::get_if<CovarianceModel>(&model)) {
        Matrix out = Matrix::identity(c->k);
        return scale * out;
    }
    if (const auto* po = std::get_if<PoissonModel>(&model)) {
        Matrix out(po->k, po->s);
        for (int i = 0; i < std::min(po->k, po->s); ++i) out.at(i, i) = scale;
        return out;
    }
    const auto& co = std::get<CompletionModel>(model);
    Matrix out(co.k, co.s);
    for (int i = 0; i < co.r; ++i) out.at(i, i) = scale;
    return out;
}

inline Matrix random_support_truth(const ModelSpec& model, double scale, Seed seed) {
    const auto* g = std::get_if<GaussianMeanModel>(&model);
    if (!g) throw config_error("random-support truth applies to the gaussian mean model only");
    const int k = g->sparsity ? g->sparsity->first : g->p;
    const int s = g->sparsity ? g->sparsity->second : g->m;
    RandomStream rng(Seed{seed.master, truth_stream});
    auto pick = [&](int universe, int count) {
        std::vector<int> pool(universe);
        for (int i = 0; i < universe; ++i) pool[i] = i + 1;
        for (int i = 0; i < count; ++i)
            std::swap(pool[i], pool[i + rng.uniform_int(universe - i)]);
        pool.resize(count);
        std::sort(pool.begin(), pool.end());
        return IndexSet::of(universe, pool);
    };
    IndexSet rows = pick(g->p, k);
    IndexSet cols = pick(g->m, s);
    Matrix block(k, s);
    for (double& v : block.entries()) v = rng.gaussian();
    const double f = frobenius_norm(block);
    if (f > 0) block = (scale / f) * block;
    return block_embed(block, g->p, g->m, rows, cols);
}

inline Matrix generate_truth(const ModelSpec& model, const TruthRule& rule, Seed seed) {
    if (const auto* ex = std::get_if<TruthExplicit>(&rule)) return ex->matrix;
    if (const auto* wd = std::get_if<TruthWorstDiag>(&rule)) return worst_diag_truth(model, wd->scale);
    return random_support_truth(model, std::get<TruthRandomSupport>(rule).scale, seed);
}

// unit-variance heavy-tail noise: t_5 scaled by sqrt(3/5)
inline double student_t5(RandomStream& rng) {
    const double z = rng.gaussian();
    double chi2 = 0.0;
    for (int i = 0; i < 5; ++i) {
        const double g = rng.gaussian();
        chi2 += g * g;
    }
    return std::sqrt(3.0 / 5.0) * z / std::sqrt(chi2 / 5.0);
}

inline GaugeContext context_for_model(const ModelSpec& model, const std::string& gauge_text) {
    int dim = 0;
    if (const auto* g = std::get_if<GaussianMeanModel>(&model))
        dim = std::min(g->p, g->m);
    else if (const auto* c = std::get_if<CovarianceModel>(&model))
        dim = c->k;
    else if (const auto* po = std::get_if<PoissonModel>(&model))
        dim = std::min(po->k, po->s);
    else {
        const auto& co = std::get<CompletionModel>(model);
        dim = std::min(co.k, co.s);
    }
    try {
        return make_context(gauge_text, dim);
    } catch (const invalid_spec& e) {
        throw config_error(std::string("gauge does not fit the model: ") + e.what());
    }
}

inline RateBreakdown rate_for(const ModelSpec& model, const GaugeContext& ctx) {
    if (const auto* g = std::get_if<GaussianMeanModel>(&model)) {
        if (g->sparsity) {
            RateBreakdown rb =
                rate_submatrix(ctx, g->sparsity->first, g->sparsity->second, g->p, g->m);
            const double s2 = g->sigma * g->sigma;
            rb.oracle *= s2;
            rb.excess *= s2;
            rb.total *= s2;
            rb.formula = "sigma^2 (" + rb.formula + ")";
            return rb;
        }
        return rate_oracle_mean(ctx, g->p, g->m, g->sigma);
    }
    if (const auto* c = std::get_if<CovarianceModel>(&model))
        return rate_covariance(ctx, c->k, c->n, c->lambda);
    if (const auto* po = std::get_if<PoissonModel>(&model))
        return rate_poisson(ctx, po->k, po->s, po->lambda);
    const auto& co = std::get<CompletionModel>(model);
    return rate_completion(ctx, co.k, co.s, co.r, co.n, co.sigma, co.a);
}

} // namespace detail

// ---- the monte carlo risk experiment ----------------------------------------------

// Replicate rho draws its observation on stream stream_of(rho); the default
// is the replicate index, sweeps pass hashed streams. Aggregation is a fixed
// index-order sum, so worker count never changes the estimate.
template <typename StreamOf>
inline RiskReport run_risk_streams(const ExperimentConfig& config, StreamOf stream_of) {
    validate(config.model);
    validate(config.estimator);
    if (config.replicates < 2) throw config_error("run_risk: need at least two replicates");
    if (config.workers < 1) throw config_error("run_risk: need at least one worker");

    const GaugeContext ctx = detail::context_for_model(config.model, config.gauge);
    const Matrix truth = detail::generate_truth(config.model, config.truth, config.seed);
    if (!member(config.model, truth))
        throw domain_error("run_risk: generated truth is outside the parameter space");

    const bool heavy_tail = config.noise == NoiseKind::student_t5;
    if (heavy_tail && !std::holds_alternative<GaussianMeanModel>(config.model))
        throw config_error("run_risk: heavy-tail noise applies to the gaussian mean model only");

    std::vector<double> losses(config.replicates, 0.0);
    std::exception_ptr failure;
    std::mutex failure_mu;

    auto run_range = [&](int lo, int hi) {
        try {
            for (int rep = lo; rep < hi; ++rep) {
                const Seed rep_seed{config.seed.master, stream_of(rep)};
                Observation obs;
                if (heavy_tail) {
                    const auto& g = std::get<GaussianMeanModel>(config.model);
                    RandomStream rng(rep_seed);
                    Matrix y = truth;
                    for (double& v : y.entries()) v += g.sigma * detail::student_t5(rng);
                    obs = GaussianMeanObs{std::move(y)};
                } else {
                    obs = sample_observation(config.model, truth, rep_seed);
                }
                Matrix mhat = estimate(config.estimator, obs, config.model, ctx);
                losses[rep] = squared_loss(ctx, mhat, truth);
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mu);
            if (!failure) failure = std::current_exception();
        }
    };

    if (config.workers == 1) {
        run_range(0, config.replicates);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (config.replicates + config.workers - 1) / config.workers;
        for (int w = 0; w < config.workers; ++w) {
            const int lo = w * chunk, hi = std::min(config.replicates, lo + chunk);
            if (lo < hi) pool.emplace_back(run_range, lo, hi);
        }
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    RiskReport report;
    report.replicates = config.replicates;
    report.seed = config.seed;
    double sum = 0.0;
    for (double v : losses) sum += v;
    report.empirical_risk = sum / config.replicates;
    double varsum = 0.0;
    for (double v : losses) varsum += (v - report.empirical_risk) * (v - report.empirical_risk);
    report.stderr_of_mean =
        std::sqrt(varsum / (config.replicates - 1.0) / config.replicates);
    report.rate = detail::rate_for(config.model, ctx);
    report.ratio = report.rate.total > 0 ? report.empirical_risk / report.rate.total : 0.0;
    if (report.rate.lower_bound_only)
        report.heuristic_flags.push_back("lower-bound comparison");
    if (const auto* sub = std::get_if<SubmatrixSelectorEstimator>(&config.estimator))
        if (std::holds_alternative<GreedySearch>(sub->search))
            report.heuristic_flags.push_back("greedy-selector");
    if (heavy_tail) report.heuristic_flags.push_back("heavy-tail-noise");
    return report;
}

inline RiskReport run_risk(const ExperimentConfig& config) {
    return run_risk_streams(config, [](int rep) { return static_cast<std::uint64_t>(rep); });
}

// ---- parameter sweeps --------------------------------------------------------------

namespace detail {

inline void apply_axis(ModelSpec& model, EstimatorSpec& estimator, const std::string& axis,
                       double value) {
    const int iv = static_cast<int>(value);
    auto* sub = std::get_if<SubmatrixSelectorEstimator>(&estimator);
    if (auto* g = std::get_if<GaussianMeanModel>(&model)) {
        if (axis == "k" || axis == "p" || axis == "ks" || axis == "pm") {
            g->p = iv;
            if (g->sparsity && sub) sub->k = std::min(sub->k, iv);
        }
        if (axis == "s" || axis == "m" || axis == "ks" || axis == "pm") {
            g->m = iv;
            if (g->sparsity && sub) sub->s = std::min(sub->s, iv);
        }
        if (axis == "sigma") g->sigma = value;
        if (axis == "k" || axis == "s" || axis == "ks" || axis == "p" || axis == "m" ||
            axis == "pm" || axis == "sigma")
            return;
    } else if (auto* c = std::get_if<CovarianceModel>(&model)) {
        if (axis == "k") {
            c->k = iv;
            return;
        }
        if (axis == "n") {
            c->n = iv;
            return;
        }
        if (axis == "lambda") {
            c->lambda = value;
            return;
        }
    } else if (auto* po = std::get_if<PoissonModel>(&model)) {
        if (axis == "k" || axis == "ks") po->k = iv;
        if (axis == "s" || axis == "ks") po->s = iv;
        if (axis == "lambda") po->lambda = value;
        if (axis == "k" || axis == "s" || axis == "ks" || axis == "lambda") return;
    } else if (auto* co = std::get_if<CompletionModel>(&model)) {
        if (axis == "n") {
            co->n = iv;
            return;
        }
        if (axis == "r") {
            co->r = iv;
            return;
        }
        if (axis == "sigma") {
            co->sigma = value;
            return;
        }
        if (axis == "a") {
            co->a = value;
            return;
        }
    }
    throw config_error("sweep: axis '" + axis + "' is not a numeric field of this model");
}

} // namespace detail

inline SweepTable sweep(const ExperimentConfig& config_template, const std::string& axis,
                        const std::vector<double>& values) {
    if (values.empty()) throw config_error("sweep: empty value list");
    SweepTable table;
    table.axis = axis;
    std::uint64_t axis_hash = 0x53574545ULL;
    for (char ch : axis) axis_hash = hash_combine(axis_hash, static_cast<std::uint64_t>(ch));
    for (double value : values) {
        ExperimentConfig config = config_template;
        detail::apply_axis(config.model, config.estimator, axis, value);
        validate(config.model);
        std::uint64_t vbits;
        static_assert(sizeof(vbits) == sizeof(value));
        std::memcpy(&vbits, &value, sizeof(vbits));
        const std::uint64_t point_hash = hash_combine(axis_hash, vbits);
        RiskReport report = run_risk_streams(config, [point_hash](int rep) {
            return hash_combine(point_hash, static_cast<std::uint64_t>(rep));
        });
        table.points.push_back(SweepPoint{value, std::move(report)});
    }
    return table;
}

// OLS of log empirical risk against log axis value.
inline std::pair<double, double> fit_slope(const SweepTable& table) {
    const int n = static_cast<int>(table.points.size());
    if (n < 3) throw domain_error("fit_slope: need at least three points");
    std::vector<double> xs(n), ys(n);
    for (int i = 0; i < n; ++i) {
        if (!(table.points[i].value > 0) || !(table.points[i].report.empirical_risk > 0))
            throw domain_error("fit_slope: axis values and risks must be positive");
        xs[i] = std::log(table.points[i].value);
        ys[i] = std::log(table.points[i].report.empirical_risk);
    }
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < n; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;
    double rss = 0.0;
    for (int i = 0; i < n; ++i) {
        const double resid = ys[i] - intercept - slope * xs[i];
        rss += resid * resid;
    }
    const double se = std::sqrt(rss / std::max(n - 2, 1) / sxx);
    return {slope, se};
}

// ---- persistence ----------------------------------------------------------------------

inline nlohmann::ordered_json report_to_json(const RiskReport& r) {
    return nlohmann::ordered_json{
        {"empirical_risk", r.empirical_risk},
        {"stderr", r.stderr_of_mean},
        {"rate", rate_to_json(r.rate)},
        {"ratio", r.ratio},
        {"replicates", r.replicates},
        {"seed", {{"master", r.seed.master}, {"stream", r.seed.stream}}},
        {"heuristic_flags", r.heuristic_flags}};
}

inline nlohmann::ordered_json sweep_to_json(const SweepTable& t) {
    nlohmann::ordered_json points = nlohmann::ordered_json::array();
    for (const auto& pt : t.points)
        points.push_back(
            nlohmann::ordered_json{{"value", pt.value}, {"report", report_to_json(pt.report)}});
    return nlohmann::ordered_json{{"axis", t.axis}, {"points", points}};
}

namespace detail {

inline std::string flags_field(const std::vector<std::string>& flags) {
    std::string out;
    for (const auto& f : flags) {
        if (!out.empty()) out += ';';
        out += f;
    }
    return out;
}

inline std::string report_csv_row(const RiskReport& r) {
    std::string row;
    row += format_real(r.empirical_risk) + "," + format_real(r.stderr_of_mean) + "," +
           format_real(r.rate.oracle) + "," + format_real(r.rate.excess) + "," +
           format_real(r.rate.total) + "," + format_real(r.ratio) + "," +
           std::to_string(r.replicates) + "," + std::to_string(r.seed.master) + "," +
           std::to_string(r.seed.stream) + "," + flags_field(r.heuristic_flags);
    return row;
}

inline constexpr const char* report_csv_header =
    "empirical_risk,stderr,rate_oracle,rate_excess,rate_total,ratio,replicates,seed_master,"
    "seed_stream,flags";

inline void write_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open " + path + " for writing");
    out << body;
    if (!out) throw io_error("failed writing " + path);
}

} // namespace detail

inline std::string render_report(const RiskReport& r, const std::string& format) {
    if (format == "json") return report_to_json(r).dump(2) + "\n";
    if (format == "csv")
        return std::string(detail::report_csv_header) + "\n" + detail::report_csv_row(r) + "\n";
    throw config_error("unknown format '" + format + "' (expected json or csv)");
}

inline std::string render_report(const SweepTable& t, const std::string& format) {
    if (format == "json") return sweep_to_json(t).dump(2) + "\n";
    if (format == "csv") {
        std::string out = "axis,value,";
        out += detail::report_csv_header;
        out += "\n";
        for (const auto& pt : t.points)
            out += t.axis + "," + format_real(pt.value) + "," +
                   detail::report_csv_row(pt.report) + "\n";
        return out;
    }
    throw config_error("unknown format '" + format + "' (expected json or csv)");
}

inline void emit_report(const RiskReport& r, const std::string& path, const std::string& format) {
    detail::write_file(path, render_report(r, format));
}

inline void emit_report(const SweepTable& t, const std::string& path, const std::string& format) {
    detail::write_file(path, render_report(t, format));
}

// ---- configuration JSON -----------------------------------------------------------------

inline ExperimentConfig config_from_json(const nlohmann::json& j,
                                         const std::string& base_dir = "") {
    ExperimentConfig config;
    try {
        config.model = model_from_json(j.at("model"));
        config.estimator = estimator_from_json(j.at("estimator"));
        config.gauge = j.at("gauge").get<std::string>();
        const auto& tj = j.at("truth");
        const std::string rule = tj.value("rule", "");
        if (rule == "explicit") {
            std::string path = tj.at("file").get<std::string>();
            if (!base_dir.empty() && !path.empty() && path.front() != '/')
                path = base_dir + "/" + path;
            config.truth = TruthExplicit{matrix_from_csv_file(path)};
        } else if (rule == "worst-diag") {
            config.truth = TruthWorstDiag{tj.value("scale", 1.0)};
        } else if (rule == "random-support") {
            config.truth = TruthRandomSupport{tj.value("scale", 1.0)};
        } else {
            throw config_error("truth rule must be explicit, worst-diag or random-support");
        }
        config.replicates = j.value("replicates", 500);
        if (j.contains("seed")) {
            config.seed.master = j.at("seed").value("master", 0ULL);
            config.seed.stream = j.at("seed").value("stream", 0ULL);
        }
        config.output_path = j.value("output", "");
        config.workers = j.value("workers", 1);
        const std::string noise = j.value("noise", "gaussian");
        if (noise == "gaussian")
            config.noise = NoiseKind::gaussian;
        else if (noise == "student_t5")
            config.noise = NoiseKind::student_t5;
        else
            throw config_error("noise must be gaussian or student_t5");
    } catch (const nlohmann::json::exception& e) {
        throw config_error(std::string("experiment config: ") + e.what());
    }
    return config;
}

inline ExperimentConfig config_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw config_error(std::string("experiment config: ") + e.what());
    }
    std::string dir;
    const auto slash = path.find_last_of('/');
    if (slash != std::string::npos) dir = path.substr(0, slash);
    return config_from_json(j, dir);
}

} // namespace mmx
