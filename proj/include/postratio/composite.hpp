#pragma once

#include <memory>
#include <utility>

#include <json.hpp>

#include "postratio/classifier.hpp"
#include "postratio/knn.hpp"
#include "postratio/ratio.hpp"

namespace postratio {

enum class Normalization {
    /// sum_y q(y|x) exp(theta^T f(y,x)) with the fitted source classifier; a proper posterior.
    SourceClassifier,
    /// The training-time k-NN average over source samples. Not normalized across labels.
    NearestNeighbors,
};

/// Adapted target posterior p(y|x) = exp(theta^T f(y,x)) q(y|x) / N(x).
class CompositeModel final : public BinaryClassifier {
public:
    CompositeModel(RatioModel ratio, std::shared_ptr<const SourceClassifier> source);

    /// Switch prediction-time normalization to the k-NN average over `sources`.
    void use_knn_normalization(std::shared_ptr<const LabeledDataset> sources, std::size_t k);
    Normalization normalization() const { return normalization_; }

    std::size_t dim() const override { return source_->dim(); }
    /// (value for +1, value for -1). Under SourceClassifier normalization the
    /// pair sums to exactly 1 and both entries lie strictly inside (0, 1).
    std::pair<double, double> posterior(Point x) const;
    double prob_positive(Point x) const override { return posterior(x).first; }
    double prob(Label y, Point x) const override;

    const RatioModel& ratio() const { return ratio_; }
    const SourceClassifier& source() const { return *source_; }
    std::shared_ptr<const SourceClassifier> source_ptr() const { return source_; }

private:
    RatioModel ratio_;
    std::shared_ptr<const SourceClassifier> source_;
    Normalization normalization_ = Normalization::SourceClassifier;
    std::shared_ptr<const LabeledDataset> knn_sources_;
    std::shared_ptr<const KnnIndex> knn_index_;
    std::size_t knn_k_ = 0;
};

nlohmann::json to_json(const CompositeModel& model);
/// Restores a model with SourceClassifier normalization.
CompositeModel composite_from_json(const nlohmann::json& j);

/// KL[p || q] estimate from a fitted ratio: the maximized mean
/// log-likelihood, -l(theta_hat). Can be negative at finite sample sizes.
double estimate_kl(double unregularized_objective);

struct Evaluation {
    double miss_rate = 0.0;
    /// -1/|test| sum log p(y_i | x_i), probabilities clipped at kProbClip.
    double neg_log_likelihood = 0.0;
};

Evaluation evaluate(const BinaryClassifier& model, const LabeledDataset& test);

}  // namespace postratio
