#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace postratio {

enum class ExperimentKind { KlConvergence, JointVsSeparated, FourGaussian };

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_from_string(const std::string& name);

/// How k is chosen for each ratio fit.
struct KPolicy {
    enum class Kind {
        /// Alternating holdout-MSE search over `grid` (default grid when empty).
        Heuristic,
        /// k = ceil((log n_q)^2).
        Schedule,
        Fixed,
    };
    Kind kind = Kind::Heuristic;
    std::size_t k = 0;
    std::vector<std::size_t> grid;
};

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::KlConvergence;
    std::vector<std::size_t> n_grid;
    std::size_t n_q = 5000;
    std::size_t repetitions = 25;
    std::uint64_t seed = 7;
    KPolicy k_policy;
    /// One value fixes lambda; several select it by target cross-validation.
    std::vector<double> lambda_grid;
    /// When positive, lambda = lambda_scale / sqrt(n) and lambda_grid is ignored.
    double lambda_scale = 0.0;
    std::vector<double> gamma_grid;
    double joint_l2 = 0.03;
    /// Penalty for the source classifier fit on D_Q.
    double source_l2 = 1e-4;
    /// Penalty for the kernel model fit on D_P; 0 selects it by 5-fold CV.
    double target_l2 = 0.0;
    /// Fresh target samples for the hold-out likelihood.
    std::size_t holdout_size = 1000;
    /// Fresh target samples for the miss-rate.
    std::size_t test_size = 5000;
    /// Vertical mean offset of the four-gaussian target.
    double shift = 1.0;
    std::size_t mesh_resolution = 200;
    /// Meshes are written for the first this-many repetitions.
    std::size_t mesh_repetitions = 1;
    /// Center cap for the kernel model fit on D_Q (0 keeps all rows).
    std::size_t kernel_max_centers = 400;

    /// Defaults for one experiment.
    static ExperimentConfig defaults(ExperimentKind kind);
};

/// Missing keys take the experiment's defaults. Unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
/// Full config with every default made explicit.
nlohmann::json to_json(const ExperimentConfig& cfg);

struct RunRecord {
    std::string experiment;
    std::string method;
    std::size_t n = 0;
    std::size_t n_q = 0;
    std::uint64_t seed = 0;
    std::string metric;
    double value = 0.0;

    bool operator==(const RunRecord&) const = default;
};

/// Deterministic row order: (experiment, method, n, n_q, seed, metric).
bool record_less(const RunRecord& a, const RunRecord& b);

struct MeshFile {
    std::string name;
    /// Rows of (x1, x2, p(+1 | x)).
    std::vector<std::array<double, 3>> rows;
};

struct ExperimentResult {
    std::vector<RunRecord> records;
    std::vector<MeshFile> meshes;
};

struct AggregateRow {
    std::string experiment;
    std::string method;
    std::size_t n = 0;
    std::size_t n_q = 0;
    std::string metric;
    double mean = 0.0;
    /// Standard error of the mean (0 for a single row).
    double se = 0.0;
    std::size_t count = 0;

    bool operator==(const AggregateRow&) const = default;
};

std::vector<AggregateRow> aggregate(const std::vector<RunRecord>& records);

inline constexpr const char* kRecordHeader = "experiment,method,n,n_q,seed,metric,value";
inline constexpr const char* kAggregateHeader = "experiment,method,n,n_q,metric,mean,se,count";

void write_records_csv(std::ostream& out, const std::vector<RunRecord>& records);
std::vector<RunRecord> read_records_csv(std::istream& in);
void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows);
void write_mesh_csv(std::ostream& out, const MeshFile& mesh);

/// Runs repetitions on `threads` workers. Output is independent of the thread count.
ExperimentResult run_kl_convergence(const ExperimentConfig& cfg, std::size_t threads = 1);
ExperimentResult run_joint_vs_separated(const ExperimentConfig& cfg, std::size_t threads = 1);
ExperimentResult run_four_gaussian(const ExperimentConfig& cfg, std::size_t threads = 1);
ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t threads = 1);

/// Writes config.json, records.csv, aggregate.csv and mesh_*.csv into `dir`.
/// Re-reads records.csv and checks that it reproduces the aggregate.
void write_outputs(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                   const ExperimentResult& result);

/// Method label for joint-baseline rows, e.g. "joint:gamma=0.1".
std::string joint_method_name(double gamma);

}  // namespace postratio
