#include "postratio/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <thread>
#include <tuple>

#include "postratio/classifier.hpp"
#include "postratio/composite.hpp"
#include "postratio/csv.hpp"
#include "postratio/error.hpp"
#include "postratio/generators.hpp"
#include "postratio/ground_truth.hpp"
#include "postratio/joint.hpp"
#include "postratio/ratio.hpp"

namespace postratio {

namespace {

constexpr int kConfigSchemaVersion = 1;

std::string k_policy_name(KPolicy::Kind kind) {
    switch (kind) {
        case KPolicy::Kind::Heuristic: return "heuristic";
        case KPolicy::Kind::Schedule: return "schedule";
        case KPolicy::Kind::Fixed: return "fixed";
    }
    return "heuristic";
}

KPolicy::Kind k_policy_from_string(const std::string& s) {
    if (s == "heuristic") return KPolicy::Kind::Heuristic;
    if (s == "schedule") return KPolicy::Kind::Schedule;
    if (s == "fixed") return KPolicy::Kind::Fixed;
    throw ConfigError("unknown k policy '" + s + "'");
}

/// Collects the rows of one (n, repetition) task.
class RecordSink {
public:
    RecordSink(const ExperimentConfig& cfg, std::size_t n, std::uint64_t seed)
        : experiment_(to_string(cfg.experiment)), n_(n), n_q_(cfg.n_q), seed_(seed) {}

    void add(const std::string& method, const std::string& metric, double value) {
        if (!std::isfinite(value)) {
            records_.push_back({experiment_, method, n_, n_q_, seed_, metric + "_nonfinite", 1.0});
            return;
        }
        records_.push_back({experiment_, method, n_, n_q_, seed_, metric, value});
    }
    void failed(const std::string& method) { add(method, "fit_failed", 1.0); }

    std::vector<RunRecord> take() { return std::move(records_); }

private:
    std::string experiment_;
    std::size_t n_, n_q_;
    std::uint64_t seed_;
    std::vector<RunRecord> records_;
};

struct Task {
    std::size_t n;
    std::size_t repetition;
    std::uint64_t seed;
};

std::vector<Task> make_tasks(const ExperimentConfig& cfg) {
    if (cfg.repetitions < 1) throw ConfigError("repetitions must be >= 1");
    if (cfg.n_grid.empty()) throw ConfigError("n_grid must be non-empty");
    std::vector<Task> tasks;
    for (std::size_t n : cfg.n_grid)
        for (std::size_t r = 0; r < cfg.repetitions; ++r) tasks.push_back({n, r, cfg.seed + r});
    return tasks;
}

/// Runs every task on a small worker pool; results land in task order.
ExperimentResult run_tasks(const ExperimentConfig& cfg, std::size_t threads,
                           const std::function<ExperimentResult(const Task&)>& body) {
    const auto tasks = make_tasks(cfg);
    std::vector<ExperimentResult> slots(tasks.size());
    std::vector<std::exception_ptr> errors(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t t; (t = next.fetch_add(1)) < tasks.size();) {
            try {
                slots[t] = body(tasks[t]);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        }
    };
    threads = std::clamp<std::size_t>(threads, 1, tasks.size());
    std::vector<std::thread> pool;
    for (std::size_t i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    ExperimentResult out;
    for (auto& s : slots) {
        out.records.insert(out.records.end(), std::make_move_iterator(s.records.begin()),
                           std::make_move_iterator(s.records.end()));
        out.meshes.insert(out.meshes.end(), std::make_move_iterator(s.meshes.begin()),
                          std::make_move_iterator(s.meshes.end()));
    }
    std::sort(out.records.begin(), out.records.end(), record_less);
    std::sort(out.meshes.begin(), out.meshes.end(),
              [](const MeshFile& a, const MeshFile& b) { return a.name < b.name; });
    return out;
}

struct ProposedFit {
    RatioFit fit;
    double lambda = 0.0;
};

/// The ratio fit as the harness runs it: lambda from the 1/sqrt(n) rule or by
/// target CV at the schedule k (unless fixed), then k per the configured policy.
ProposedFit fit_proposed(const ExperimentConfig& cfg, const LabeledDataset& target,
                         const LabeledDataset& sources, std::uint64_t seed) {
    const auto map = FeatureMap::linear_with_bias(target.dim());
    SelectionOptions options;
    options.seed = seed;

    const std::size_t k_for_lambda =
        cfg.k_policy.kind == KPolicy::Kind::Fixed ? cfg.k_policy.k : k_schedule(sources.size());
    const auto& grid = cfg.lambda_grid.empty() ? default_lambda_grid() : cfg.lambda_grid;
    const double lambda =
        cfg.lambda_scale > 0.0
            ? cfg.lambda_scale / std::sqrt(static_cast<double>(target.size()))
            : select_lambda(target, sources, k_for_lambda, grid, map, options);

    switch (cfg.k_policy.kind) {
        case KPolicy::Kind::Heuristic: {
            auto k_grid = cfg.k_policy.grid.empty() ? default_k_grid(sources.size())
                                                    : cfg.k_policy.grid;
            return {select_k(target, sources, k_grid, lambda, map, options), lambda};
        }
        case KPolicy::Kind::Schedule:
            return {fit_ratio(target, sources, k_schedule(sources.size()), lambda, map), lambda};
        case KPolicy::Kind::Fixed:
            return {fit_ratio(target, sources, cfg.k_policy.k, lambda, map), lambda};
    }
    throw ConfigError("unreachable k policy");
}

void record_ratio(RecordSink& sink, const std::string& method, const ProposedFit& p) {
    sink.add(method, "objective", p.fit.report.unregularized_objective);
    sink.add(method, "kl_estimate", estimate_kl(p.fit.report.unregularized_objective));
    sink.add(method, "k", static_cast<double>(p.fit.model.k));
    sink.add(method, "lambda", p.lambda);
    sink.add(method, "theta_norm", p.fit.model.theta.norm());
    sink.add(method, "converged", p.fit.report.converged ? 1.0 : 0.0);
}

void record_eval(RecordSink& sink, const std::string& method, const BinaryClassifier& model,
                 const LabeledDataset& test, const char* likelihood_metric) {
    const auto e = evaluate(model, test);
    sink.add(method, "miss_rate", e.miss_rate);
    sink.add(method, likelihood_metric, e.neg_log_likelihood);
}

MeshFile make_mesh(const std::string& name, const BinaryClassifier& model,
                   const LabeledDataset& a, const LabeledDataset& b, std::size_t resolution) {
    std::array<double, 2> lo{std::numeric_limits<double>::infinity(),
                             std::numeric_limits<double>::infinity()};
    std::array<double, 2> hi{-lo[0], -lo[1]};
    for (const auto* d : {&a, &b})
        for (std::size_t i = 0; i < d->size(); ++i)
            for (std::size_t c = 0; c < 2; ++c) {
                lo[c] = std::min(lo[c], d->x(i)[c]);
                hi[c] = std::max(hi[c], d->x(i)[c]);
            }
    MeshFile mesh{name, {}};
    mesh.rows.reserve(resolution * resolution);
    const double denom = resolution > 1 ? static_cast<double>(resolution - 1) : 1.0;
    for (std::size_t r = 0; r < resolution; ++r) {
        const double x2 = lo[1] + (hi[1] - lo[1]) * static_cast<double>(r) / denom;
        for (std::size_t c = 0; c < resolution; ++c) {
            const double x1 = lo[0] + (hi[0] - lo[0]) * static_cast<double>(c) / denom;
            const std::array<double, 2> x{x1, x2};
            mesh.rows.push_back({x1, x2, model.prob_positive(x)});
        }
    }
    return mesh;
}

template <typename F>
void guarded(RecordSink& sink, const std::string& method, F&& f) {
    try {
        f();
    } catch (const Error&) {
        sink.failed(method);
    }
}

}  // namespace

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::KlConvergence: return "kl-convergence";
        case ExperimentKind::JointVsSeparated: return "joint-vs-separated";
        case ExperimentKind::FourGaussian: return "four-gaussian";
    }
    return "";
}

ExperimentKind experiment_from_string(const std::string& name) {
    if (name == "kl-convergence") return ExperimentKind::KlConvergence;
    if (name == "joint-vs-separated") return ExperimentKind::JointVsSeparated;
    if (name == "four-gaussian") return ExperimentKind::FourGaussian;
    throw ConfigError("unknown experiment '" + name + "'");
}

ExperimentConfig ExperimentConfig::defaults(ExperimentKind kind) {
    ExperimentConfig cfg;
    cfg.experiment = kind;
    cfg.lambda_grid = default_lambda_grid();
    cfg.gamma_grid = default_gamma_grid();
    cfg.k_policy.kind = KPolicy::Kind::Schedule;
    cfg.lambda_scale = 0.7;
    switch (kind) {
        case ExperimentKind::KlConvergence:
            cfg.n_grid = {10, 50, 250, 500};
            break;
        case ExperimentKind::JointVsSeparated:
            cfg.n_grid = {10, 20, 50, 100};
            break;
        case ExperimentKind::FourGaussian:
            cfg.n_grid = {40};
            cfg.source_l2 = 1e-3;
            break;
    }
    return cfg;
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
    nlohmann::json k_policy = {{"kind", k_policy_name(cfg.k_policy.kind)}};
    if (cfg.k_policy.kind == KPolicy::Kind::Fixed) k_policy["k"] = cfg.k_policy.k;
    if (cfg.k_policy.kind == KPolicy::Kind::Heuristic) k_policy["grid"] = cfg.k_policy.grid;
    return {{"schema_version", kConfigSchemaVersion},
            {"experiment", to_string(cfg.experiment)},
            {"n_grid", cfg.n_grid},
            {"n_q", cfg.n_q},
            {"repetitions", cfg.repetitions},
            {"seed", cfg.seed},
            {"k_policy", k_policy},
            {"lambda_grid", cfg.lambda_grid},
            {"lambda_scale", cfg.lambda_scale},
            {"gamma_grid", cfg.gamma_grid},
            {"joint_l2", cfg.joint_l2},
            {"source_l2", cfg.source_l2},
            {"target_l2", cfg.target_l2},
            {"holdout_size", cfg.holdout_size},
            {"test_size", cfg.test_size},
            {"shift", cfg.shift},
            {"mesh_resolution", cfg.mesh_resolution},
            {"mesh_repetitions", cfg.mesh_repetitions},
            {"kernel_max_centers", cfg.kernel_max_centers}};
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
    if (j.value("schema_version", kConfigSchemaVersion) != kConfigSchemaVersion)
        throw ConfigError("unsupported config schema_version");
    auto cfg = ExperimentConfig::defaults(experiment_from_string(j.at("experiment").get<std::string>()));
    static const std::vector<std::string> known{
        "schema_version", "experiment",   "n_grid",      "n_q",           "repetitions",
        "seed",           "k_policy",     "lambda_grid", "lambda_scale", "gamma_grid",    "joint_l2",
        "source_l2", "target_l2",      "holdout_size", "test_size",   "shift",         "mesh_resolution",
        "mesh_repetitions", "kernel_max_centers"};
    for (const auto& [key, value] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError("unknown config key '" + key + "'");

    try {
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
        };
        get("n_grid", cfg.n_grid);
        get("n_q", cfg.n_q);
        get("repetitions", cfg.repetitions);
        get("seed", cfg.seed);
        get("lambda_grid", cfg.lambda_grid);
        get("lambda_scale", cfg.lambda_scale);
        get("gamma_grid", cfg.gamma_grid);
        get("joint_l2", cfg.joint_l2);
        get("source_l2", cfg.source_l2);
        get("target_l2", cfg.target_l2);
        get("holdout_size", cfg.holdout_size);
        get("test_size", cfg.test_size);
        get("shift", cfg.shift);
        get("mesh_resolution", cfg.mesh_resolution);
        get("mesh_repetitions", cfg.mesh_repetitions);
        get("kernel_max_centers", cfg.kernel_max_centers);
        if (j.contains("k_policy")) {
            const auto& kp = j.at("k_policy");
            if (kp.contains("kind")) cfg.k_policy.kind = k_policy_from_string(kp.at("kind").get<std::string>());
            cfg.k_policy.k = kp.value("k", std::size_t{0});
            cfg.k_policy.grid = kp.value("grid", std::vector<std::size_t>{});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed experiment config: ") + e.what());
    }

    if (cfg.repetitions < 1) throw ConfigError("repetitions must be >= 1");
    if (cfg.n_grid.empty()) throw ConfigError("n_grid must be non-empty");
    if (!(cfg.target_l2 >= 0.0)) throw ConfigError("target_l2 must be >= 0");
    if (!(cfg.lambda_scale >= 0.0)) throw ConfigError("lambda_scale must be >= 0");
    if (cfg.lambda_grid.empty()) throw ConfigError("lambda_grid must be non-empty");
    if (cfg.gamma_grid.empty()) throw ConfigError("gamma_grid must be non-empty");
    if (cfg.k_policy.kind == KPolicy::Kind::Fixed && cfg.k_policy.k == 0)
        throw ConfigError("fixed k policy needs k >= 1");
    return cfg;
}

bool record_less(const RunRecord& a, const RunRecord& b) {
    return std::tie(a.experiment, a.method, a.n, a.n_q, a.seed, a.metric) <
           std::tie(b.experiment, b.method, b.n, b.n_q, b.seed, b.metric);
}

std::vector<AggregateRow> aggregate(const std::vector<RunRecord>& records) {
    using Key = std::tuple<std::string, std::string, std::size_t, std::size_t, std::string>;
    std::map<Key, std::vector<double>> groups;
    for (const auto& r : records)
        groups[{r.experiment, r.method, r.n, r.n_q, r.metric}].push_back(r.value);

    std::vector<AggregateRow> rows;
    for (const auto& [key, values] : groups) {
        const auto count = static_cast<double>(values.size());
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= count;
        double ss = 0.0;
        for (double v : values) ss += (v - mean) * (v - mean);
        const double se = values.size() > 1 ? std::sqrt(ss / (count - 1.0) / count) : 0.0;
        rows.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), std::get<3>(key),
                        std::get<4>(key), mean, se, values.size()});
    }
    return rows;
}

void write_records_csv(std::ostream& out, const std::vector<RunRecord>& records) {
    out << kRecordHeader << '\n';
    for (const auto& r : records)
        out << r.experiment << ',' << r.method << ',' << r.n << ',' << r.n_q << ',' << r.seed
            << ',' << r.metric << ',' << format_double(r.value) << '\n';
}

std::vector<RunRecord> read_records_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kRecordHeader)
        throw DataError("records CSV: missing or unexpected header");
    std::vector<RunRecord> records;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string field; std::getline(ss, field, ',');) f.push_back(field);
        if (f.size() != 7) throw DataError("records CSV: malformed row " + std::to_string(row));
        try {
            records.push_back({f[0], f[1], std::stoul(f[2]), std::stoul(f[3]), std::stoull(f[4]),
                               f[5], std::stod(f[6])});
        } catch (const std::exception&) {
            throw DataError("records CSV: malformed row " + std::to_string(row));
        }
    }
    return records;
}

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
    out << kAggregateHeader << '\n';
    for (const auto& r : rows)
        out << r.experiment << ',' << r.method << ',' << r.n << ',' << r.n_q << ',' << r.metric
            << ',' << format_double(r.mean) << ',' << format_double(r.se) << ',' << r.count
            << '\n';
}

void write_mesh_csv(std::ostream& out, const MeshFile& mesh) {
    out << "x1,x2,p_plus\n";
    for (const auto& row : mesh.rows)
        out << format_double(row[0]) << ',' << format_double(row[1]) << ','
            << format_double(row[2]) << '\n';
}

std::string joint_method_name(double gamma) { return "joint:gamma=" + format_double(gamma); }

ExperimentResult run_kl_convergence(const ExperimentConfig& cfg, std::size_t threads) {
    auto result = run_tasks(cfg, threads, [&](const Task& task) {
        RecordSink sink(cfg, task.n, task.seed);
        const auto [target, sources] = gen_gaussian_shift(task.n, cfg.n_q, task.seed);
        guarded(sink, "proposed", [&] {
            record_ratio(sink, "proposed", fit_proposed(cfg, target, sources, task.seed));
        });
        return ExperimentResult{sink.take(), {}};
    });
    // Ground truth, once per config.
    result.records.push_back({to_string(cfg.experiment), "ground_truth", 0, cfg.n_q, cfg.seed,
                              "kl_true", gaussian_shift_kl()});
    std::sort(result.records.begin(), result.records.end(), record_less);
    return result;
}

ExperimentResult run_joint_vs_separated(const ExperimentConfig& cfg, std::size_t threads) {
    return run_tasks(cfg, threads, [&](const Task& task) {
        RecordSink sink(cfg, task.n, task.seed);
        const GaussianShiftParams params;
        const auto [target, sources] = gen_gaussian_shift(task.n, cfg.n_q, task.seed, params);
        auto holdout_rng = stream_rng(task.seed, Stream::Holdout);
        const auto holdout =
            gaussian_shift_sample(cfg.holdout_size, params.target_mean, holdout_rng);

        std::shared_ptr<const LinearLogReg> source_model;
        guarded(sink, "logi_q", [&] {
            source_model = std::make_shared<LinearLogReg>(fit_logreg(sources, cfg.source_l2));
            record_eval(sink, "logi_q", *source_model, holdout, "neg_holdout_loglik");
        });
        if (source_model) {
            guarded(sink, "proposed", [&] {
                const auto p = fit_proposed(cfg, target, sources, task.seed);
                record_ratio(sink, "proposed", p);
                const CompositeModel composite(p.fit.model, source_model);
                record_eval(sink, "proposed", composite, holdout, "neg_holdout_loglik");
            });
        }
        for (double gamma : cfg.gamma_grid) {
            const auto method = joint_method_name(gamma);
            guarded(sink, method, [&] {
                const auto joint = fit_joint(target, sources, gamma, cfg.joint_l2);
                record_eval(sink, method, joint, holdout, "neg_holdout_loglik");
                sink.add(method, "converged", joint.fit_info().converged ? 1.0 : 0.0);
            });
        }
        return ExperimentResult{sink.take(), {}};
    });
}

ExperimentResult run_four_gaussian(const ExperimentConfig& cfg, std::size_t threads) {
    return run_tasks(cfg, threads, [&](const Task& task) {
        RecordSink sink(cfg, task.n, task.seed);
        ExperimentResult out;
        const auto [target, sources] = gen_four_gaussian(task.n, cfg.n_q, cfg.shift, task.seed);
        auto test_rng = stream_rng(task.seed, Stream::Test);
        const auto test = four_gaussian_sample(cfg.test_size, cfg.shift, test_rng);
        const bool meshes = task.repetition < cfg.mesh_repetitions;
        auto mesh_name = [&](const std::string& method) {
            return "mesh_" + method + "_n" + std::to_string(task.n) + "_seed" +
                   std::to_string(task.seed);
        };

        guarded(sink, "logi_p", [&] {
            const double l2 =
                cfg.target_l2 > 0.0
                    ? cfg.target_l2
                    : select_l2_cv(
                          target, default_l2_grid(),
                          [](const LabeledDataset& d, double l) {
                              return std::make_shared<KernelLogReg>(fit_kernel_logreg(d, l));
                          },
                          task.seed);
            const auto model = fit_kernel_logreg(target, l2);
            record_eval(sink, "logi_p", model, test, "neg_test_loglik");
            sink.add("logi_p", "l2", l2);
            if (meshes)
                out.meshes.push_back(make_mesh(mesh_name("logi_p"), model, target, sources,
                                               cfg.mesh_resolution));
        });

        std::shared_ptr<const KernelLogReg> source_model;
        guarded(sink, "logi_q", [&] {
            KernelLogRegOptions options;
            options.max_centers = cfg.kernel_max_centers;
            source_model =
                std::make_shared<KernelLogReg>(fit_kernel_logreg(sources, cfg.source_l2, options));
            record_eval(sink, "logi_q", *source_model, test, "neg_test_loglik");
            if (meshes)
                out.meshes.push_back(make_mesh(mesh_name("logi_q"), *source_model, target,
                                               sources, cfg.mesh_resolution));
        });

        if (source_model) {
            guarded(sink, "proposed", [&] {
                const auto p = fit_proposed(cfg, target, sources, task.seed);
                record_ratio(sink, "proposed", p);
                const CompositeModel composite(p.fit.model, source_model);
                record_eval(sink, "proposed", composite, test, "neg_test_loglik");
                if (meshes)
                    out.meshes.push_back(make_mesh(mesh_name("proposed"), composite, target,
                                                   sources, cfg.mesh_resolution));
            });
        }
        out.records = sink.take();
        return out;
    });
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t threads) {
    switch (cfg.experiment) {
        case ExperimentKind::KlConvergence: return run_kl_convergence(cfg, threads);
        case ExperimentKind::JointVsSeparated: return run_joint_vs_separated(cfg, threads);
        case ExperimentKind::FourGaussian: return run_four_gaussian(cfg, threads);
    }
    throw ConfigError("unknown experiment");
}

void write_outputs(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                   const ExperimentResult& result) {
    std::filesystem::create_directories(dir);
    auto open = [&](const std::string& name) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw DataError("cannot write " + (dir / name).string());
        return out;
    };
    {
        auto out = open("config.json");
        out << to_json(cfg).dump(2) << '\n';
    }
    {
        auto out = open("records.csv");
        write_records_csv(out, result.records);
    }
    const auto rows = aggregate(result.records);
    {
        auto out = open("aggregate.csv");
        write_aggregate_csv(out, rows);
    }
    for (const auto& mesh : result.meshes) {
        auto out = open(mesh.name + ".csv");
        write_mesh_csv(out, mesh);
    }

    std::ifstream in(dir / "records.csv", std::ios::binary);
    if (aggregate(read_records_csv(in)) != rows)
        throw Error("aggregate.csv is not reproducible from records.csv");
}

}  // namespace postratio
