#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "postratio/dataset.hpp"
#include "postratio/knn.hpp"
#include "postratio/lbfgs.hpp"

namespace postratio {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-target-sample k-NN neighborhoods in the source set, with the feature
/// vectors f(y_q, x_q) of every neighbor precomputed. Valid for one (target
/// dataset, k) pair; rebuild when either changes.
class NeighborCache {
public:
    /// Requested k values above the source size are clamped; `clamped()` reports it.
    static NeighborCache build(const LabeledDataset& target, const LabeledDataset& sources,
                               const KnnIndex& index, std::size_t k, const FeatureMap& map);
    static NeighborCache build(const LabeledDataset& target, const LabeledDataset& sources,
                               std::size_t k, const FeatureMap& map);

    std::size_t k() const { return k_; }
    std::size_t requested_k() const { return requested_k_; }
    bool clamped() const { return k_ != requested_k_; }
    std::size_t num_targets() const { return static_cast<std::size_t>(target_features_.rows()); }
    std::size_t num_features() const { return static_cast<std::size_t>(target_features_.cols()); }

    /// Rows f(y_p^(i), x_p^(i)).
    const RowMatrix& target_features() const { return target_features_; }
    /// Row i * k + r holds the features of the r-th neighbor of target i.
    const RowMatrix& neighbor_features() const { return neighbor_features_; }
    /// Source row index of the r-th neighbor of target i.
    std::size_t neighbor(std::size_t i, std::size_t r) const { return neighbors_[i * k_ + r]; }

    /// Cache restricted to the given target rows (same neighborhoods).
    NeighborCache subset(std::span<const std::size_t> rows) const;

private:
    std::size_t k_ = 0;
    std::size_t requested_k_ = 0;
    RowMatrix target_features_;
    RowMatrix neighbor_features_;
    std::vector<std::size_t> neighbors_;
};

/// The k-NN normalizer N_hat(theta; x_p^(i)) = (1/k) sum_j exp(theta^T f_j).
double normalization(const Vector& theta, const NeighborCache& cache, std::size_t i);

/// Negative log-likelihood of the posterior-ratio model with k-NN normalization:
///
///   l(theta) = -1/n sum_i theta^T f(y_i, x_i)
///              + 1/n sum_i log( 1/k sum_{j in NN(x_i)} exp(theta^T f(y_j, x_j)) )
///
/// The inner log-mean-exp is max-shifted, so the value stays finite for any
/// finite theta. Convex in theta, and exactly 0 at theta = 0.
double objective(const Vector& theta, const NeighborCache& cache);

/// Gradient of `objective`: the target feature mean subtracted from the
/// average of softmax-weighted neighbor features.
Vector gradient(const Vector& theta, const NeighborCache& cache);

/// Both at once; `grad` is resized.
double objective_and_gradient(const Vector& theta, const NeighborCache& cache, Vector& grad);

enum class Penalty {
    /// lambda * ||theta||_2^2 (smooth; default).
    SquaredL2,
    /// lambda * ||theta||_2.
    L2Norm,
};

std::string to_string(Penalty p);
Penalty penalty_from_string(const std::string& s);

struct RatioModel {
    Vector theta;
    FeatureMap feature_map = FeatureMap::linear_with_bias(0);
    std::size_t k = 0;
    double lambda = 0.0;
    Penalty penalty = Penalty::SquaredL2;

    /// theta^T f(y, x).
    double log_ratio(Label y, Point x) const { return feature_map.score(theta, y, x); }
};

nlohmann::json to_json(const RatioModel& model);
RatioModel ratio_model_from_json(const nlohmann::json& j);

struct FitReport {
    /// Penalized objective at the returned theta.
    double final_objective = 0.0;
    /// l(theta) without the penalty; the quantity that estimates KL[p || q] after a sign flip.
    double unregularized_objective = 0.0;
    double grad_norm = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    /// (k, holdout MSE of the selected k) per round of the alternating k search.
    std::vector<std::pair<std::size_t, double>> k_trace;
    std::vector<std::string> warnings;
};

struct RatioFit {
    RatioModel model;
    FitReport report;
};

struct RatioFitOptions {
    Penalty penalty = Penalty::SquaredL2;
    OptimOptions optim{5000, 1e-8, 10};
    /// Initial theta; zero when absent.
    std::optional<Vector> start;
};

/// Minimizes l(theta) + penalty over a prebuilt cache.
RatioFit fit_ratio(const NeighborCache& cache, double lambda, const FeatureMap& map,
                   const RatioFitOptions& options = {});

/// Builds the cache and fits. k above the source size is clamped with a warning.
RatioFit fit_ratio(const LabeledDataset& target, const LabeledDataset& sources, std::size_t k,
                   double lambda, const FeatureMap& map, const RatioFitOptions& options = {});

/// Neighborhoods used by the holdout-MSE criterion for k: source rows are
/// split into folds and each row's neighbors are searched among the rows of
/// the other folds only. Independent of theta, so built once per search.
class HoldoutNeighbors {
public:
    HoldoutNeighbors(const LabeledDataset& sources, std::size_t max_k, std::size_t folds,
                     std::uint64_t seed);

    std::size_t max_k() const { return max_k_; }
    std::size_t folds() const { return folds_; }
    std::size_t fold_of(std::size_t row) const { return fold_of_[row]; }
    /// Held-out row's r-th nearest neighbor among the other folds.
    std::size_t neighbor(std::size_t row, std::size_t r) const { return neighbors_[row * max_k_ + r]; }

private:
    std::size_t max_k_;
    std::size_t folds_;
    std::vector<std::size_t> fold_of_;
    std::vector<std::size_t> neighbors_;
};

/// Cross-validated holdout MSE of the k-NN conditional mean of
/// Z = exp(theta^T f(y_q, x_q)) for every k in `k_grid` (fold-averaged).
std::vector<double> holdout_mse(const Vector& theta, const LabeledDataset& sources,
                                const FeatureMap& map, const HoldoutNeighbors& neighbors,
                                const std::vector<std::size_t>& k_grid);

struct SelectionOptions {
    std::uint64_t seed = 0;
    std::size_t folds = 5;
    std::size_t max_rounds = 10;
    RatioFitOptions fit;
};

/// Alternates between fitting theta at the current k and moving k to the
/// grid value with the smallest holdout MSE (ties go to the smaller k), until
/// k stops changing or `max_rounds` fits have been made.
RatioFit select_k(const LabeledDataset& target, const LabeledDataset& sources,
                  std::vector<std::size_t> k_grid, double lambda, const FeatureMap& map,
                  const SelectionOptions& options = {});

/// Mean held-out l over target folds, each fold's theta fit on the other
/// folds with neighborhoods taken from the full source set.
double lambda_cv_score(const LabeledDataset& target, const LabeledDataset& sources,
                       std::size_t k, double lambda, const FeatureMap& map,
                       const SelectionOptions& options = {});

/// The grid value with the lowest `lambda_cv_score` (ties go to the larger
/// lambda). Uses 5 folds, or leave-one-out when the target has fewer than 5 rows.
double select_lambda(const LabeledDataset& target, const LabeledDataset& sources, std::size_t k,
                     const std::vector<double>& lambda_grid, const FeatureMap& map,
                     const SelectionOptions& options = {});

/// Powers of two from 4 to min(512, n_q / 2); {min(4, n_q)} when that range is empty.
std::vector<std::size_t> default_k_grid(std::size_t n_q);
const std::vector<double>& default_lambda_grid();
/// ceil((log n_q)^2), clamped to n_q: grows faster than log n_q, slower than n_q.
std::size_t k_schedule(std::size_t n_q);

}  // namespace postratio
