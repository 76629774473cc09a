// mmx: command-line front end for the matrix-estimation laboratory.
//
// Subcommands: norm eval, rate, kl, risk run, risk sweep, width, fano,
// construct dispersion, construct packing.
// Exit codes: 0 success, 2 config error, 3 domain error, 4 budget exceeded.

#include <CLI11.hpp>
#include <json.hpp>

#include <mmx/estimators.hpp>
#include <mmx/gauges.hpp>
#include <mmx/geometry.hpp>
#include <mmx/harness.hpp>
#include <mmx/models.hpp>

#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using nlohmann::ordered_json;

struct GlobalOpts {
    std::uint64_t seed = 0;
    std::string out;
    std::string format = "json";
};

void write_output(const GlobalOpts& opts, const std::string& body) {
    if (opts.out.empty()) {
        std::cout << body;
        return;
    }
    mmx::detail::write_file(opts.out, body);
}

std::string scalar_csv(const std::vector<std::pair<std::string, std::string>>& fields) {
    std::string header, row;
    for (const auto& [name, value] : fields) {
        if (!header.empty()) {
            header += ',';
            row += ',';
        }
        header += name;
        row += value;
    }
    return header + "\n" + row + "\n";
}

std::string render_json_or_csv(const GlobalOpts& opts, const ordered_json& j) {
    if (opts.format == "json") return j.dump(2) + "\n";
    if (opts.format == "csv") {
        std::vector<std::pair<std::string, std::string>> fields;
        for (const auto& [key, value] : j.items()) {
            if (value.is_number_float())
                fields.emplace_back(key, mmx::format_real(value.get<double>()));
            else
                fields.emplace_back(key, value.dump());
        }
        return scalar_csv(fields);
    }
    throw mmx::config_error("unknown format '" + opts.format + "' (expected json or csv)");
}

mmx::Matrix load_matrix(const std::string& path) {
    if (path.empty()) throw mmx::config_error("missing matrix file path");
    if (path.size() > 5 && path.substr(path.size() - 5) == ".json") {
        std::ifstream in(path);
        if (!in) throw mmx::io_error("cannot open " + path);
        nlohmann::json j;
        in >> j;
        return mmx::matrix_from_json(j);
    }
    return mmx::matrix_from_csv_file(path);
}

std::vector<double> parse_values(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            out.push_back(std::stod(cell));
        } catch (const std::exception&) {
            throw mmx::config_error("cannot parse value '" + cell + "'");
        }
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"matrix estimation laboratory: norms, rates, KL divergences, "
                 "Monte Carlo risk and lower-bound constructions"};
    app.require_subcommand(1);

    GlobalOpts opts;
    app.add_option("--seed", opts.seed, "master seed for every random draw");
    app.add_option("--out", opts.out, "output path (stdout when omitted)");
    app.add_option("--format", opts.format, "output format: json or csv")
        ->check(CLI::IsMember({"json", "csv"}));

    // ---- norm eval ----
    auto* norm_cmd = app.add_subcommand("norm", "matrix norm utilities");
    norm_cmd->require_subcommand(1);
    auto* norm_eval = norm_cmd->add_subcommand("eval", "evaluate a unitarily invariant norm");
    std::string ne_gauge = "S2", ne_matrix;
    int ne_dim = 0;
    norm_eval->add_option("--gauge", ne_gauge, "gauge: S<q>, Sinf or KF<l>")->required();
    norm_eval->add_option("--matrix", ne_matrix, "matrix file (.csv or .json)")->required();
    norm_eval->add_option("--dim", ne_dim, "gauge dimension (default: min matrix dimension)");

    // ---- rate ----
    auto* rate_cmd = app.add_subcommand("rate", "closed-form minimax rate");
    std::string rt_family, rt_gauge = "S2";
    int rt_k = 1, rt_s = 1, rt_p = 0, rt_m = 0, rt_n = 0, rt_r = 1;
    double rt_lambda = 1.0, rt_sigma = 1.0, rt_a = 1.0;
    rate_cmd
        ->add_option("--family", rt_family,
                     "mean | submatrix | covariance | poisson | completion")
        ->required();
    rate_cmd->add_option("--gauge", rt_gauge, "gauge text");
    rate_cmd->add_option("-k", rt_k, "row dimension / sparsity");
    rate_cmd->add_option("-s", rt_s, "column dimension / sparsity");
    rate_cmd->add_option("-p", rt_p, "ambient rows (submatrix family)");
    rate_cmd->add_option("-m", rt_m, "ambient columns (submatrix family)");
    rate_cmd->add_option("-n", rt_n, "sample size / observation count");
    rate_cmd->add_option("-r", rt_r, "rank cap (completion family)");
    rate_cmd->add_option("--lambda", rt_lambda, "spectral radius / max intensity");
    rate_cmd->add_option("--sigma", rt_sigma, "noise level");
    rate_cmd->add_option("--cap-a", rt_a, "entry cap (completion family)");

    // ---- kl ----
    auto* kl_cmd = app.add_subcommand("kl", "KL divergence between two parameters");
    std::string kl_model, kl_a, kl_b;
    double kl_sigma = 1.0;
    int kl_n = 1;
    kl_cmd->add_option("--model", kl_model, "gaussian_mean | covariance | poisson | completion")
        ->required();
    kl_cmd->add_option("--a", kl_a, "first parameter matrix file")->required();
    kl_cmd->add_option("--b", kl_b, "second parameter matrix file")->required();
    kl_cmd->add_option("--sigma", kl_sigma, "noise level (gaussian_mean, completion)");
    kl_cmd->add_option("-n", kl_n, "observation count (completion)");

    // ---- risk run / sweep ----
    auto* risk_cmd = app.add_subcommand("risk", "Monte Carlo risk experiments");
    risk_cmd->require_subcommand(1);
    auto* risk_run = risk_cmd->add_subcommand("run", "run one experiment from a config file");
    std::string rr_config;
    risk_run->add_option("--config", rr_config, "experiment config json")->required();
    auto* risk_sweep = risk_cmd->add_subcommand("sweep", "sweep one numeric parameter");
    std::string rs_config, rs_axis, rs_values;
    risk_sweep->add_option("--config", rs_config, "experiment config json")->required();
    risk_sweep->add_option("--axis", rs_axis, "parameter name to sweep")->required();
    risk_sweep->add_option("--values", rs_values, "comma-separated axis values")->required();

    // ---- width ----
    auto* width_cmd = app.add_subcommand("width", "Gaussian width of the unit gauge ball");
    std::string wd_gauge = "S2";
    int wd_k = 1, wd_s = 1, wd_reps = 500;
    width_cmd->add_option("--gauge", wd_gauge, "gauge text");
    width_cmd->add_option("-k", wd_k, "rows")->required();
    width_cmd->add_option("-s", wd_s, "columns")->required();
    width_cmd->add_option("--reps", wd_reps, "Monte Carlo replicates");

    // ---- fano ----
    auto* fano_cmd = app.add_subcommand("fano", "Fano lower bound or its dimension constant");
    double fa_eps = 0.0, fa_dkl = 0.0, fa_logm = 0.0;
    int fa_d = 0;
    fano_cmd->add_option("--epsilon", fa_eps, "packing radius");
    fano_cmd->add_option("--dkl", fa_dkl, "KL diameter (nats)");
    fano_cmd->add_option("--log-packing", fa_logm, "log packing number (nats)");
    fano_cmd->add_option("--constant-d", fa_d, "compute the dimension constant c_d instead");

    // ---- construct dispersion / packing ----
    auto* construct_cmd = app.add_subcommand("construct", "lower-bound constructions");
    construct_cmd->require_subcommand(1);
    auto* disp_cmd = construct_cmd->add_subcommand("dispersion", "row-dispersed carrier matrix");
    std::string dp_matrix, dp_gauges = "S1,S2,Sinf";
    int dp_identity = 0, dp_trials = 1000, dp_retries = 64;
    disp_cmd->add_option("--d", dp_matrix, "input matrix file (csv)");
    disp_cmd->add_option("--identity", dp_identity, "use the identity of this size as input");
    disp_cmd->add_option("--gauges", dp_gauges, "comma-separated gauge list");
    disp_cmd->add_option("--trials", dp_trials, "sampled row subsets in the certificate");
    disp_cmd->add_option("--retries", dp_retries, "construction retry limit");

    auto* pack_cmd = construct_cmd->add_subcommand("packing", "sparse-cone packing family");
    int pk_p = 0, pk_m = 0, pk_k = 1, pk_s = 1, pk_target = 64;
    std::string pk_gauge = "S2";
    pack_cmd->add_option("-p", pk_p, "ambient rows")->required();
    pack_cmd->add_option("-m", pk_m, "ambient columns")->required();
    pack_cmd->add_option("-k", pk_k, "row sparsity");
    pack_cmd->add_option("-s", pk_s, "column sparsity");
    pack_cmd->add_option("--gauge", pk_gauge, "gauge text");
    pack_cmd->add_option("--target", pk_target, "requested family size (dispersion branch)");

    // let --seed/--out/--format appear anywhere on the command line
    std::function<void(CLI::App*)> enable_fallthrough = [&](CLI::App* node) {
        for (CLI::App* sub : node->get_subcommands([](CLI::App*) { return true; })) {
            sub->fallthrough();
            enable_fallthrough(sub);
        }
    };
    enable_fallthrough(&app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*norm_eval) {
            mmx::Matrix a = load_matrix(ne_matrix);
            const int dim = ne_dim > 0 ? ne_dim : std::min(a.rows(), a.cols());
            mmx::GaugeContext ctx = mmx::make_context(ne_gauge, dim);
            const double value = mmx::norm(ctx, a);
            write_output(opts, render_json_or_csv(opts, ordered_json{{"gauge", ne_gauge},
                                                                     {"dim", dim},
                                                                     {"rows", a.rows()},
                                                                     {"cols", a.cols()},
                                                                     {"value", value}}));
        } else if (*rate_cmd) {
            mmx::RateBreakdown rb;
            if (rt_family == "mean") {
                rb = mmx::rate_oracle_mean(mmx::make_context(rt_gauge, std::min(rt_k, rt_s)),
                                           rt_k, rt_s, rt_sigma);
            } else if (rt_family == "submatrix") {
                if (rt_p <= 0 || rt_m <= 0)
                    throw mmx::config_error("submatrix rate needs -p and -m");
                rb = mmx::rate_submatrix(mmx::make_context(rt_gauge, std::min(rt_p, rt_m)), rt_k,
                                         rt_s, rt_p, rt_m);
            } else if (rt_family == "covariance") {
                if (rt_n <= 0) throw mmx::config_error("covariance rate needs -n");
                rb = mmx::rate_covariance(mmx::make_context(rt_gauge, rt_k), rt_k, rt_n,
                                          rt_lambda);
            } else if (rt_family == "poisson") {
                rb = mmx::rate_poisson(mmx::make_context(rt_gauge, std::min(rt_k, rt_s)), rt_k,
                                       rt_s, rt_lambda);
            } else if (rt_family == "completion") {
                if (rt_n <= 0) throw mmx::config_error("completion rate needs -n");
                rb = mmx::rate_completion(mmx::make_context(rt_gauge, std::min(rt_k, rt_s)), rt_k,
                                          rt_s, rt_r, rt_n, rt_sigma, rt_a);
            } else {
                throw mmx::config_error("unknown rate family '" + rt_family + "'");
            }
            write_output(opts, render_json_or_csv(opts, mmx::rate_to_json(rb)));
        } else if (*kl_cmd) {
            mmx::Matrix a = load_matrix(kl_a);
            mmx::Matrix b = load_matrix(kl_b);
            ordered_json j;
            if (kl_model == "gaussian_mean") {
                mmx::KLResult r = mmx::kl_gaussian_mean(a, b, kl_sigma);
                j = ordered_json{{"value", r.value}, {"exact", r.exact}};
            } else if (kl_model == "covariance") {
                mmx::KLResult r = mmx::kl_covariance(a, b);
                j = ordered_json{{"value", r.value}, {"exact", r.exact}};
            } else if (kl_model == "poisson") {
                mmx::KLResult r = mmx::kl_poisson(a, b);
                j = ordered_json{{"value", r.value}, {"exact", r.exact}};
            } else if (kl_model == "completion") {
                mmx::KLResult r = mmx::kl_completion_upper(a, b, kl_n, kl_sigma);
                j = ordered_json{{"value", r.value},
                                 {"exact", r.exact},
                                 {"loose", mmx::kl_completion_loose(a, b, kl_n, kl_sigma)}};
            } else {
                throw mmx::config_error("unknown kl model '" + kl_model + "'");
            }
            write_output(opts, render_json_or_csv(opts, j));
        } else if (*risk_run) {
            mmx::ExperimentConfig config = mmx::config_from_file(rr_config);
            if (app.count("--seed")) config.seed.master = opts.seed;
            mmx::RiskReport report = mmx::run_risk(config);
            const std::string body = mmx::render_report(report, opts.format);
            if (!opts.out.empty())
                mmx::detail::write_file(opts.out, body);
            else if (!config.output_path.empty())
                mmx::detail::write_file(config.output_path, body);
            else
                std::cout << body;
        } else if (*risk_sweep) {
            mmx::ExperimentConfig config = mmx::config_from_file(rs_config);
            if (app.count("--seed")) config.seed.master = opts.seed;
            mmx::SweepTable table = mmx::sweep(config, rs_axis, parse_values(rs_values));
            std::string body;
            if (opts.format == "json") {
                ordered_json j = mmx::sweep_to_json(table);
                if (table.points.size() >= 3) {
                    const auto [slope, se] = mmx::fit_slope(table);
                    j["slope"] = slope;
                    j["slope_stderr"] = se;
                }
                body = j.dump(2) + "\n";
            } else {
                body = mmx::render_report(table, opts.format);
            }
            if (!opts.out.empty())
                mmx::detail::write_file(opts.out, body);
            else
                std::cout << body;
        } else if (*width_cmd) {
            mmx::GaugeContext ctx = mmx::make_context(wd_gauge, std::min(wd_k, wd_s));
            mmx::WidthEstimate w =
                mmx::gaussian_width_mc(ctx, wd_k, wd_s, wd_reps, mmx::Seed{opts.seed, 0});
            write_output(opts,
                         render_json_or_csv(opts, ordered_json{{"gauge", wd_gauge},
                                                               {"k", wd_k},
                                                               {"s", wd_s},
                                                               {"replicates", wd_reps},
                                                               {"mean", w.mean},
                                                               {"stderr", w.stderr_of_mean}}));
        } else if (*fano_cmd) {
            if (fa_d > 0) {
                write_output(opts,
                             render_json_or_csv(opts, ordered_json{{"d", fa_d},
                                                                   {"constant",
                                                                    mmx::fano_constant(fa_d)}}));
            } else {
                mmx::FanoInputs in{fa_eps, fa_dkl, fa_logm};
                write_output(
                    opts, render_json_or_csv(
                              opts, ordered_json{{"bound", mmx::fano_bound(in)},
                                                 {"probability", mmx::fano_probability(in)}}));
            }
        } else if (*disp_cmd) {
            mmx::Matrix d =
                dp_identity > 0 ? mmx::Matrix::identity(dp_identity) : load_matrix(dp_matrix);
            std::vector<mmx::GaugeContext> gauges;
            std::stringstream ss(dp_gauges);
            std::string name;
            while (std::getline(ss, name, ','))
                gauges.push_back(mmx::make_context(name, std::min(d.rows(), d.cols())));
            mmx::DispersionOptions dopt;
            dopt.num_trials = dp_trials;
            dopt.retry_limit = dp_retries;
            mmx::DispersionResult res =
                mmx::construct_dispersion(d, gauges, mmx::Seed{opts.seed, 0}, dopt);
            ordered_json manifest{{"c0", res.c0},
                                  {"j_removed", res.j_removed},
                                  {"certificate",
                                   {{"trials", res.certificate.trials},
                                    {"passes", res.certificate.passes},
                                    {"exhaustive", res.certificate.exhaustive},
                                    {"gauges", res.certificate.gauges}}}};
            if (opts.out.empty()) {
                manifest["w"] = mmx::matrix_to_json(res.w);
                std::cout << manifest.dump(2) << "\n";
            } else {
                mmx::detail::write_file(opts.out + ".csv", mmx::to_csv(res.w));
                manifest["w_file"] = opts.out + ".csv";
                mmx::detail::write_file(opts.out + ".json", manifest.dump(2) + "\n");
            }
        } else if (*pack_cmd) {
            mmx::GaugeContext ctx = mmx::make_context(pk_gauge, std::min(pk_p, pk_m));
            mmx::PackingFamily fam = mmx::construct_packing(pk_p, pk_m, pk_k, pk_s, ctx,
                                                            mmx::Seed{opts.seed, 0},
                                                            mmx::PackingOptions{pk_target});
            ordered_json manifest{{"members", fam.members.size()},
                                  {"log_cardinality", fam.log_cardinality},
                                  {"min_pairwise_norm", fam.min_pairwise_norm},
                                  {"c1", fam.c1},
                                  {"gauge", pk_gauge}};
            if (opts.out.empty()) {
                std::cout << manifest.dump(2) << "\n";
            } else {
                std::vector<std::string> files;
                for (std::size_t i = 0; i < fam.members.size(); ++i) {
                    char suffix[32];
                    std::snprintf(suffix, sizeof(suffix), "_%04zu.csv", i);
                    const std::string path = opts.out + suffix;
                    mmx::detail::write_file(path, mmx::to_csv(fam.members[i]));
                    files.push_back(path);
                }
                manifest["member_files"] = files;
                mmx::detail::write_file(opts.out + ".json", manifest.dump(2) + "\n");
            }
        }
    } catch (const mmx::budget_exceeded& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const mmx::config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const mmx::io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const mmx::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
