#include "postratio/composite.hpp"

#include <cmath>

#include "postratio/error.hpp"

namespace postratio {

namespace {
constexpr int kCompositeVersion = 1;
}

CompositeModel::CompositeModel(RatioModel ratio, std::shared_ptr<const SourceClassifier> source)
    : ratio_(std::move(ratio)), source_(std::move(source)) {
    if (!source_) throw ConfigError("composite model needs a source classifier");
    if (ratio_.feature_map.input_dim() != source_->dim())
        throw DimensionMismatch(source_->dim(), ratio_.feature_map.input_dim());
    if (static_cast<std::size_t>(ratio_.theta.size()) != ratio_.feature_map.output_dim())
        throw DimensionMismatch(ratio_.feature_map.output_dim(),
                                static_cast<std::size_t>(ratio_.theta.size()));
}

void CompositeModel::use_knn_normalization(std::shared_ptr<const LabeledDataset> sources,
                                           std::size_t k) {
    if (!sources || sources->empty()) throw ConfigError("k-NN normalization needs source data");
    if (sources->dim() != dim()) throw DimensionMismatch(dim(), sources->dim());
    if (k == 0) throw ConfigError("k must be >= 1");
    knn_index_ = std::make_shared<KnnIndex>(*sources);
    knn_sources_ = std::move(sources);
    knn_k_ = k;
    normalization_ = Normalization::NearestNeighbors;
}

std::pair<double, double> CompositeModel::posterior(Point x) const {
    const double q_pos = source_->prob_positive(x);
    const double q_neg = 1.0 - q_pos;
    // theta^T f(+1, x); theta^T f(-1, x) is its negation.
    const double s = ratio_.log_ratio(Label::Positive, x);

    if (normalization_ == Normalization::NearestNeighbors) {
        const auto nb = knn_index_->query(x, knn_k_);
        double norm = 0.0;
        for (std::size_t j : nb.indices)
            norm += std::exp(ratio_.log_ratio(knn_sources_->label(j), knn_sources_->x(j)));
        norm /= static_cast<double>(nb.size());
        return {clip_probability(q_pos * std::exp(s) / norm),
                clip_probability(q_neg * std::exp(-s) / norm)};
    }

    // Scaled so that the larger exponential is exp(0): no overflow, and s = 0
    // reproduces q exactly.
    double p;
    if (s >= 0.0) {
        p = q_pos / (q_pos + q_neg * std::exp(-2.0 * s));
    } else {
        const double e = std::exp(2.0 * s);
        p = q_pos * e / (q_pos * e + q_neg);
    }
    p = clip_probability(p);
    return {p, 1.0 - p};
}

double CompositeModel::prob(Label y, Point x) const {
    const auto [pos, neg] = posterior(x);
    return y == Label::Positive ? pos : neg;
}

nlohmann::json to_json(const CompositeModel& model) {
    return {{"format", "postratio.composite"},
            {"version", kCompositeVersion},
            {"ratio", to_json(model.ratio())},
            {"source", model.source().to_json()}};
}

CompositeModel composite_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "postratio.composite" ||
        j.value("version", 0) != kCompositeVersion)
        throw DataError("not a version-1 composite model envelope");
    return CompositeModel(ratio_model_from_json(j.at("ratio")),
                          source_classifier_from_json(j.at("source")));
}

double estimate_kl(double unregularized_objective) { return -unregularized_objective; }

Evaluation evaluate(const BinaryClassifier& model, const LabeledDataset& test) {
    require_non_empty(test, "test");
    std::size_t misses = 0;
    double nll = 0.0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto x = test.x(i);
        if (classify(model, x) != test.label(i)) ++misses;
        nll -= std::log(clip_probability(predict_proba(model, x, test.label(i))));
    }
    const auto n = static_cast<double>(test.size());
    return {static_cast<double>(misses) / n, nll / n};
}

}  // namespace postratio
