// postratio: command-line front end for fitting, prediction and experiments.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>

#include "postratio/classifier.hpp"
#include "postratio/composite.hpp"
#include "postratio/csv.hpp"
#include "postratio/error.hpp"
#include "postratio/experiments.hpp"
#include "postratio/generators.hpp"
#include "postratio/ratio.hpp"

namespace pr = postratio;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct DataArgs {
    std::string target;
    std::string source;
    bool header = false;
    bool zero_one = false;
};

void add_data_options(CLI::App* cmd, DataArgs& args) {
    cmd->add_option("--target", args.target, "Target CSV (label,x1,...,xd)")->required();
    cmd->add_option("--source", args.source, "Source CSV (label,x1,...,xd)")->required();
    cmd->add_flag("--header", args.header, "Skip the first line of each CSV");
    cmd->add_flag("--zero-one", args.zero_one, "Labels are 0/1 instead of -1/+1");
}

std::pair<pr::LabeledDataset, pr::LabeledDataset> load(const DataArgs& args) {
    pr::CsvOptions opts;
    opts.header = args.header;
    opts.zero_one_labels = args.zero_one;
    auto target = pr::load_csv(args.target, opts);
    auto source = pr::load_csv(args.source, opts);
    if (target.dim() != source.dim()) throw pr::DimensionMismatch(target.dim(), source.dim());
    return {std::move(target), std::move(source)};
}

struct RatioArgs {
    std::size_t k = 0;
    std::vector<std::size_t> k_grid;
    std::vector<double> lambda;
    std::string penalty = "squared_l2";
};

void add_ratio_options(CLI::App* cmd, RatioArgs& args) {
    cmd->add_option("--k", args.k, "Neighborhood size (0 selects k by holdout MSE)");
    cmd->add_option("--k-grid", args.k_grid, "Candidate k values for selection");
    cmd->add_option("--lambda", args.lambda,
                    "Penalty weight; several values select one by target CV")
        ->default_str("1e-4 1e-3 1e-2 1e-1 1");
    cmd->add_option("--penalty", args.penalty, "squared_l2 or l2_norm")
        ->check(CLI::IsMember({"squared_l2", "l2_norm"}));
}

/// Lambda by CV (when several are given), then k by the requested rule.
pr::RatioFit fit_ratio_cli(const pr::LabeledDataset& target, const pr::LabeledDataset& source,
                           const RatioArgs& args, std::uint64_t seed, double& lambda) {
    const auto map = pr::FeatureMap::linear_with_bias(target.dim());
    pr::SelectionOptions options;
    options.seed = seed;
    options.fit.penalty = pr::penalty_from_string(args.penalty);
    const auto& grid = args.lambda.empty() ? pr::default_lambda_grid() : args.lambda;
    const std::size_t k_for_lambda = args.k > 0 ? args.k : pr::k_schedule(source.size());
    lambda = pr::select_lambda(target, source, k_for_lambda, grid, map, options);
    if (args.k > 0) return pr::fit_ratio(target, source, args.k, lambda, map, options.fit);
    auto k_grid = args.k_grid.empty() ? pr::default_k_grid(source.size()) : args.k_grid;
    return pr::select_k(target, source, k_grid, lambda, map, options);
}

nlohmann::json report_json(const pr::RatioFit& fit) {
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& [k, mse] : fit.report.k_trace) trace.push_back({{"k", k}, {"holdout_mse", mse}});
    return {{"objective", fit.report.unregularized_objective},
            {"penalized_objective", fit.report.final_objective},
            {"kl_estimate", pr::estimate_kl(fit.report.unregularized_objective)},
            {"k", fit.model.k},
            {"lambda", fit.model.lambda},
            {"grad_norm", fit.report.grad_norm},
            {"iterations", fit.report.iterations},
            {"converged", fit.report.converged},
            {"k_trace", trace},
            {"warnings", fit.report.warnings}};
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw pr::DataError("cannot write " + path);
    out << text;
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw pr::DataError("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw pr::DataError(path + ": " + e.what());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Posterior-ratio transfer learning"};
    app.require_subcommand(1);
    std::uint64_t seed = 7;
    app.add_option("--seed", seed, "Master seed")->capture_default_str();

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "Fit a composite model; prints the fit report");
    DataArgs fit_data;
    RatioArgs fit_ratio_args;
    std::string fit_out = "model.json";
    std::string source_kind = "linear";
    double source_l2 = 1e-4;
    std::size_t max_centers = 400;
    add_data_options(fit_cmd, fit_data);
    add_ratio_options(fit_cmd, fit_ratio_args);
    fit_cmd->add_option("--out", fit_out, "Model JSON path")->capture_default_str();
    fit_cmd->add_option("--source-model", source_kind, "linear or kernel")
        ->check(CLI::IsMember({"linear", "kernel"}))
        ->capture_default_str();
    fit_cmd->add_option("--source-l2", source_l2, "Source classifier penalty")->capture_default_str();
    fit_cmd->add_option("--max-centers", max_centers, "Kernel source model center cap (0 = all)")
        ->capture_default_str();

    // predict
    auto* predict_cmd = app.add_subcommand("predict", "Predict labels and p(+1|x)");
    std::string predict_model, predict_x, predict_out;
    bool predict_header = false;
    predict_cmd->add_option("--model", predict_model, "Model JSON")->required();
    predict_cmd->add_option("--x", predict_x, "CSV of feature rows (no label)")->required();
    predict_cmd->add_option("--out", predict_out, "Output CSV (stdout when omitted)");
    predict_cmd->add_flag("--header", predict_header, "Skip the first line of the input");

    // kl
    auto* kl_cmd = app.add_subcommand("kl", "Print the KL[p||q] estimate");
    DataArgs kl_data;
    RatioArgs kl_ratio_args;
    add_data_options(kl_cmd, kl_data);
    add_ratio_options(kl_cmd, kl_ratio_args);

    // select-k
    auto* sk_cmd = app.add_subcommand("select-k", "Run the holdout-MSE k search; prints JSON");
    DataArgs sk_data;
    RatioArgs sk_ratio_args;
    add_data_options(sk_cmd, sk_data);
    add_ratio_options(sk_cmd, sk_ratio_args);

    // generate
    auto* gen_cmd = app.add_subcommand("generate", "Write a synthetic (target, source) pair");
    std::string gen_kind, gen_target, gen_source;
    std::size_t gen_n = 100, gen_n_q = 5000;
    double gen_shift = 1.0;
    gen_cmd->add_option("kind", gen_kind, "gaussian-shift, four-gaussian or same")
        ->required()
        ->check(CLI::IsMember({"gaussian-shift", "four-gaussian", "same"}));
    gen_cmd->add_option("--n", gen_n, "Target size")->capture_default_str();
    gen_cmd->add_option("--n-q", gen_n_q, "Source size")->capture_default_str();
    gen_cmd->add_option("--shift", gen_shift, "Four-gaussian target shift")->capture_default_str();
    gen_cmd->add_option("--target", gen_target, "Target CSV path")->required();
    gen_cmd->add_option("--source", gen_source, "Source CSV path")->required();

    // experiment
    auto* exp_cmd = app.add_subcommand("experiment", "Run a scripted experiment");
    std::string exp_name, exp_config, exp_out = "results";
    std::size_t exp_threads = 1;
    exp_cmd->add_option("name", exp_name, "kl-convergence, joint-vs-separated or four-gaussian")
        ->required()
        ->check(CLI::IsMember({"kl-convergence", "joint-vs-separated", "four-gaussian"}));
    exp_cmd->add_option("--config", exp_config, "Config JSON (defaults when omitted)");
    exp_cmd->add_option("--out", exp_out, "Output directory")->capture_default_str();
    exp_cmd->add_option("--threads", exp_threads, "Worker threads (0 = hardware)")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }
    const bool seed_given = app.count("--seed") > 0;

    try {
        if (*fit_cmd) {
            const auto [target, source] = load(fit_data);
            std::shared_ptr<const pr::SourceClassifier> q;
            if (source_kind == "linear") {
                q = std::make_shared<pr::LinearLogReg>(pr::fit_logreg(source, source_l2));
            } else {
                pr::KernelLogRegOptions ko;
                ko.max_centers = max_centers;
                q = std::make_shared<pr::KernelLogReg>(pr::fit_kernel_logreg(source, source_l2, ko));
            }
            double lambda = 0.0;
            const auto fit = fit_ratio_cli(target, source, fit_ratio_args, seed, lambda);
            const pr::CompositeModel model(fit.model, q);
            write_text(fit_out, pr::to_json(model).dump(2) + "\n");
            std::cout << report_json(fit).dump(2) << '\n';
        } else if (*predict_cmd) {
            const auto model = pr::composite_from_json(read_json(predict_model));
            std::ifstream in(predict_x);
            if (!in) throw pr::DataError("cannot open " + predict_x);
            const auto points = pr::read_points_csv(in, predict_header);
            std::ostringstream out;
            out << "label,p_plus,p_minus\n";
            for (const auto& x : points) {
                if (x.size() != model.dim()) throw pr::DimensionMismatch(model.dim(), x.size());
                const auto [pos, neg] = model.posterior(x);
                out << (pos >= neg ? 1 : -1) << ',' << pr::format_double(pos) << ','
                    << pr::format_double(neg) << '\n';
            }
            write_text(predict_out, out.str());
        } else if (*kl_cmd) {
            const auto [target, source] = load(kl_data);
            double lambda = 0.0;
            const auto fit = fit_ratio_cli(target, source, kl_ratio_args, seed, lambda);
            std::cout << pr::format_double(pr::estimate_kl(fit.report.unregularized_objective))
                      << '\n';
        } else if (*sk_cmd) {
            const auto [target, source] = load(sk_data);
            auto args = sk_ratio_args;
            args.k = 0;
            double lambda = 0.0;
            const auto fit = fit_ratio_cli(target, source, args, seed, lambda);
            std::cout << report_json(fit).dump(2) << '\n';
        } else if (*gen_cmd) {
            pr::DatasetPair pair;
            if (gen_kind == "gaussian-shift") {
                pair = pr::gen_gaussian_shift(gen_n, gen_n_q, seed);
            } else if (gen_kind == "four-gaussian") {
                pair = pr::gen_four_gaussian(gen_n, gen_n_q, gen_shift, seed);
            } else {
                pr::GaussianShiftParams same;
                same.target_mean = same.source_mean;
                pair = pr::gen_gaussian_shift(gen_n, gen_n_q, seed, same);
            }
            pr::save_csv(gen_target, pair.first);
            pr::save_csv(gen_source, pair.second);
        } else if (*exp_cmd) {
            auto cfg = exp_config.empty()
                           ? pr::ExperimentConfig::defaults(pr::experiment_from_string(exp_name))
                           : pr::config_from_json(read_json(exp_config));
            if (pr::to_string(cfg.experiment) != exp_name)
                throw pr::ConfigError("config is for experiment '" + pr::to_string(cfg.experiment) +
                                      "', not '" + exp_name + "'");
            if (seed_given) cfg.seed = seed;
            const std::size_t threads =
                exp_threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : exp_threads;
            const auto result = pr::run_experiment(cfg, threads);
            pr::write_outputs(exp_out, cfg, result);
            std::cout << "wrote " << result.records.size() << " records to " << exp_out << '\n';
        }
    } catch (const pr::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}
