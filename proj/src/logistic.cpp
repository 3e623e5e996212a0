#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "postratio/classifier.hpp"
#include "postratio/error.hpp"
#include "postratio/random.hpp"

namespace postratio {

namespace {
constexpr int kModelVersion = 1;
}

double clip_probability(double p) { return std::clamp(p, kProbClip, 1.0 - kProbClip); }

double logistic(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double z) {
    if (z > 0.0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

double predict_proba(const BinaryClassifier& model, Point x, Label y) { return model.prob(y, x); }

Label classify(const BinaryClassifier& model, Point x) {
    return model.prob(Label::Positive, x) >= model.prob(Label::Negative, x) ? Label::Positive
                                                                             : Label::Negative;
}

LinearLogReg::LinearLogReg(Vector weights, double intercept, double l2)
    : weights_(std::move(weights)), intercept_(intercept), l2_(l2) {
    if (!weights_.allFinite() || !std::isfinite(intercept_))
        throw ConfigError("non-finite logistic regression parameters");
}

double LinearLogReg::decision(Point x) const {
    check_dim(dim(), x);
    double z = intercept_;
    for (std::size_t c = 0; c < x.size(); ++c) z += weights_[static_cast<Eigen::Index>(c)] * x[c];
    return z;
}

double LinearLogReg::prob_positive(Point x) const { return clip_probability(logistic(decision(x))); }

nlohmann::json LinearLogReg::to_json() const {
    return {{"kind", kind()},
            {"version", kModelVersion},
            {"dim", dim()},
            {"weights", std::vector<double>(weights_.begin(), weights_.end())},
            {"intercept", intercept_},
            {"l2", l2_}};
}

double logreg_loss(const LabeledDataset& data, const Vector& params, double l2, Vector* grad) {
    const std::size_t d = data.dim();
    const double inv_n = 1.0 / static_cast<double>(data.size());
    double loss = 0.0;
    if (grad) grad->setZero(params.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        auto x = data.x(i);
        const double y = sign(data.label(i));
        double z = params[static_cast<Eigen::Index>(d)];
        for (std::size_t c = 0; c < d; ++c) z += params[static_cast<Eigen::Index>(c)] * x[c];
        loss += softplus(-y * z);
        if (grad) {
            // d/dz softplus(-y z) = -y * logistic(-y z)
            const double r = -y * logistic(-y * z);
            for (std::size_t c = 0; c < d; ++c) (*grad)[static_cast<Eigen::Index>(c)] += r * x[c];
            (*grad)[static_cast<Eigen::Index>(d)] += r;
        }
    }
    loss *= inv_n;
    loss += l2 * params.squaredNorm();
    if (grad) {
        *grad *= inv_n;
        *grad += 2.0 * l2 * params;
    }
    return loss;
}

LinearLogReg fit_logreg(const LabeledDataset& data, double l2, const OptimOptions& options,
                        const std::optional<Vector>& start) {
    require_non_empty(data, "training");
    if (!(l2 >= 0.0)) throw ConfigError("l2 must be >= 0");
    const auto p = static_cast<Eigen::Index>(data.dim() + 1);
    Vector x0 = start.value_or(Vector::Zero(p));
    if (x0.size() != p) throw DimensionMismatch(static_cast<std::size_t>(p), x0.size());

    auto result = minimize_lbfgs(
        [&](const Vector& params, Vector& grad) { return logreg_loss(data, params, l2, &grad); },
        std::move(x0), options);
    LinearLogReg model(result.x.head(p - 1), result.x[p - 1], l2);
    model.set_fit_info({result.value, result.gradient_norm, result.iterations, result.converged});
    return model;
}

double mean_negative_log_likelihood(const BinaryClassifier& model, const LabeledDataset& data) {
    require_non_empty(data, "evaluation");
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i)
        total -= std::log(clip_probability(predict_proba(model, data.x(i), data.label(i))));
    return total / static_cast<double>(data.size());
}

double select_l2_cv(const LabeledDataset& data, const std::vector<double>& grid,
                    const std::function<std::shared_ptr<BinaryClassifier>(
                        const LabeledDataset&, double)>& fit,
                    std::uint64_t seed, std::size_t folds) {
    if (grid.empty()) throw ConfigError("empty l2 grid");
    if (grid.size() == 1) return grid.front();
    require_non_empty(data, "training");
    folds = std::min(folds, data.size());
    if (folds < 2) return grid.back();
    const auto fold_of = assign_folds(data.size(), folds, seed);

    double best_score = std::numeric_limits<double>::infinity();
    double best = grid.front();
    for (double l2 : grid) {
        double score = 0.0;
        for (std::size_t f = 0; f < folds; ++f) {
            std::vector<std::size_t> train, valid;
            for (std::size_t i = 0; i < data.size(); ++i)
                (fold_of[i] == f ? valid : train).push_back(i);
            auto model = fit(data.subset(train), l2);
            score += mean_negative_log_likelihood(*model, data.subset(valid));
        }
        score /= static_cast<double>(folds);
        if (score <= best_score) {
            if (score < best_score || l2 > best) best = l2;
            best_score = score;
        }
    }
    return best;
}

std::shared_ptr<SourceClassifier> source_classifier_from_json(const nlohmann::json& j) {
    const auto kind = j.at("kind").get<std::string>();
    if (j.value("version", 0) != kModelVersion)
        throw DataError("unsupported classifier envelope version");
    if (kind == "linear_logreg") {
        auto w = j.at("weights").get<std::vector<double>>();
        return std::make_shared<LinearLogReg>(Eigen::Map<Vector>(w.data(), std::ssize(w)),
                                              j.at("intercept").get<double>(),
                                              j.value("l2", 0.0));
    }
    if (kind == "kernel_logreg") {
        auto duals = j.at("duals").get<std::vector<double>>();
        return std::make_shared<KernelLogReg>(
            j.at("dim").get<std::size_t>(), j.at("centers").get<std::vector<double>>(),
            Eigen::Map<Vector>(duals.data(), std::ssize(duals)), j.at("intercept").get<double>(),
            j.at("bandwidth").get<double>(), j.value("l2", 0.0));
    }
    throw DataError("unknown classifier kind '" + kind + "'");
}

}  // namespace postratio
