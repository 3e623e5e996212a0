#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "postratio/dataset.hpp"
#include "postratio/lbfgs.hpp"

namespace postratio {

/// Probabilities handed out by any classifier stay inside [kProbClip, 1 - kProbClip].
inline constexpr double kProbClip = 1e-12;

double clip_probability(double p);
/// Numerically stable logistic function.
double logistic(double z);
/// log(1 + exp(z)) without overflow.
double softplus(double z);

/// Anything producing p(y = +1 | x).
class BinaryClassifier {
public:
    virtual ~BinaryClassifier() = default;
    virtual std::size_t dim() const = 0;
    /// Probability of the positive class, clipped away from 0 and 1.
    virtual double prob_positive(Point x) const = 0;
    /// Model output for label y. Defaults to the complement rule, under which
    /// the two labels sum to exactly 1.
    virtual double prob(Label y, Point x) const {
        const double p = prob_positive(x);
        return y == Label::Positive ? p : 1.0 - p;
    }
};

/// p(y | x) as reported by the model.
double predict_proba(const BinaryClassifier& model, Point x, Label y);
/// argmax_y p(y | x); a tie goes to +1.
Label classify(const BinaryClassifier& model, Point x);

/// Convergence summary of a classifier fit.
struct FitInfo {
    double objective = 0.0;
    double gradient_norm = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

/// Serializable probabilistic classifier supplying q(y | x).
class SourceClassifier : public BinaryClassifier {
public:
    virtual std::string kind() const = 0;
    virtual nlohmann::json to_json() const = 0;
};

std::shared_ptr<SourceClassifier> source_classifier_from_json(const nlohmann::json& j);

/// p(+1 | x) = logistic(w^T x + b).
class LinearLogReg final : public SourceClassifier {
public:
    LinearLogReg(Vector weights, double intercept, double l2 = 0.0);

    std::size_t dim() const override { return static_cast<std::size_t>(weights_.size()); }
    double prob_positive(Point x) const override;
    double decision(Point x) const;
    std::string kind() const override { return "linear_logreg"; }
    nlohmann::json to_json() const override;

    const Vector& weights() const { return weights_; }
    double intercept() const { return intercept_; }
    double l2() const { return l2_; }
    const FitInfo& fit_info() const { return info_; }
    void set_fit_info(FitInfo info) { info_ = info; }

private:
    Vector weights_;
    double intercept_;
    double l2_;
    FitInfo info_;
};

/// Minimizes mean logistic loss + l2 * (||w||^2 + b^2) by L-BFGS.
/// `start` holds [w; b] and defaults to zero.
LinearLogReg fit_logreg(const LabeledDataset& data, double l2, const OptimOptions& options = {},
                        const std::optional<Vector>& start = std::nullopt);

/// Mean logistic loss plus l2 * (||w||^2 + b^2) for the model packed as [w; b]. Exposed
/// for derivative checks.
double logreg_loss(const LabeledDataset& data, const Vector& params, double l2, Vector* grad);

/// Gaussian-RBF kernel logistic regression:
/// p(+1 | x) = logistic(sum_j a_j k(x, c_j) + b), k(x, c) = exp(-|x - c|^2 / (2 s^2)).
class KernelLogReg final : public SourceClassifier {
public:
    KernelLogReg(std::size_t dim, std::vector<double> centers, Vector duals, double intercept,
                 double bandwidth, double l2);

    std::size_t dim() const override { return dim_; }
    double prob_positive(Point x) const override;
    double decision(Point x) const;
    std::string kind() const override { return "kernel_logreg"; }
    nlohmann::json to_json() const override;

    std::size_t num_centers() const { return static_cast<std::size_t>(duals_.size()); }
    const Vector& duals() const { return duals_; }
    double intercept() const { return intercept_; }
    double bandwidth() const { return bandwidth_; }
    double l2() const { return l2_; }
    const FitInfo& fit_info() const { return info_; }
    void set_fit_info(FitInfo info) { info_ = info; }

private:
    std::size_t dim_;
    std::vector<double> centers_;
    Vector duals_;
    double intercept_;
    double bandwidth_;
    double l2_;
    FitInfo info_;
};

struct KernelLogRegOptions {
    /// Kernel width; non-positive selects the median pairwise distance.
    double bandwidth = 0.0;
    /// Cap on the number of centers (evenly spaced training rows); 0 keeps all.
    std::size_t max_centers = 0;
    std::size_t max_newton_iterations = 100;
    double gradient_tolerance = 1e-8;
};

/// Minimizes mean logistic loss + l2 * (a^T K a + b^2) by damped Newton.
KernelLogReg fit_kernel_logreg(const LabeledDataset& data, double l2,
                               const KernelLogRegOptions& options = {});

/// Median Euclidean distance over pairs of (at most `max_points` evenly spaced) rows.
double median_pairwise_distance(const LabeledDataset& data, std::size_t max_points = 1000);

/// Mean negative log-likelihood -1/n sum log p(y_i | x_i).
double mean_negative_log_likelihood(const BinaryClassifier& model, const LabeledDataset& data);

/// The l2 value from `grid` with the best mean held-out log-likelihood under
/// k-fold CV (ties go to the larger value). `fit` maps (train, l2) to a model.
double select_l2_cv(const LabeledDataset& data, const std::vector<double>& grid,
                    const std::function<std::shared_ptr<BinaryClassifier>(
                        const LabeledDataset&, double)>& fit,
                    std::uint64_t seed, std::size_t folds = 5);

inline const std::vector<double>& default_l2_grid() {
    static const std::vector<double> grid{1e-4, 1e-3, 1e-2, 1e-1, 1.0};
    return grid;
}

}  // namespace postratio
