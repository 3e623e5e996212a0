#include "postratio/joint.hpp"

#include <cmath>

#include "postratio/error.hpp"

namespace postratio {

JointModel::JointModel(Vector beta_q, Vector theta, double gamma, double l2)
    : beta_q_(std::move(beta_q)), theta_(std::move(theta)), gamma_(gamma), l2_(l2) {
    if (beta_q_.size() != theta_.size() || beta_q_.size() < 1)
        throw ConfigError("joint model: theta and beta_q must share the feature dimension");
}

double JointModel::prob_positive(Point x) const {
    check_dim(dim(), x);
    const Vector beta_p = theta_ + beta_q_;
    double z = beta_p[beta_p.size() - 1];
    for (std::size_t c = 0; c < x.size(); ++c) z += beta_p[static_cast<Eigen::Index>(c)] * x[c];
    return clip_probability(logistic(z));
}

double joint_objective(const LabeledDataset& target, const LabeledDataset& sources, double gamma,
                       double l2, const Vector& params, Vector* grad) {
    const Eigen::Index p = static_cast<Eigen::Index>(target.dim() + 1);
    const Vector theta = params.head(p);
    const Vector beta_q = params.tail(p);
    Vector g_target(p), g_source(p);
    const double target_loss = logreg_loss(target, theta + beta_q, 0.0, grad ? &g_target : nullptr);
    const double source_loss = logreg_loss(sources, beta_q, 0.0, grad ? &g_source : nullptr);
    if (grad) {
        grad->resize(2 * p);
        grad->head(p) = g_target + 2.0 * l2 * theta;
        grad->tail(p) = g_target + gamma * g_source + 2.0 * l2 * beta_q;
    }
    return target_loss + gamma * source_loss + l2 * params.squaredNorm();
}

JointModel fit_joint(const LabeledDataset& target, const LabeledDataset& sources, double gamma,
                     double l2, const OptimOptions& options, const std::optional<Vector>& start) {
    require_non_empty(target, "target");
    require_non_empty(sources, "source");
    if (target.dim() != sources.dim()) throw DimensionMismatch(target.dim(), sources.dim());
    if (!(gamma > 0.0)) throw ConfigError("gamma must be > 0");
    if (!(l2 >= 0.0)) throw ConfigError("l2 must be >= 0");
    const Eigen::Index p = static_cast<Eigen::Index>(target.dim() + 1);
    Vector x0 = start.value_or(Vector::Zero(2 * p));
    if (x0.size() != 2 * p) throw DimensionMismatch(static_cast<std::size_t>(2 * p), x0.size());

    auto result = minimize_lbfgs(
        [&](const Vector& params, Vector& grad) {
            return joint_objective(target, sources, gamma, l2, params, &grad);
        },
        std::move(x0), options);
    JointModel model(result.x.tail(p), result.x.head(p), gamma, l2);
    model.set_fit_info({result.value, result.gradient_norm, result.iterations, result.converged});
    return model;
}

}  // namespace postratio
