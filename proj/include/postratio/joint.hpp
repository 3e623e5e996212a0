#pragma once

#include <optional>

#include "postratio/classifier.hpp"

namespace postratio {

/// Parameter-decomposition baseline: target parameters beta_p = theta + beta_q
/// in the logistic model over [x, 1], fit jointly with the source parameters.
class JointModel final : public BinaryClassifier {
public:
    JointModel(Vector beta_q, Vector theta, double gamma, double l2);

    std::size_t dim() const override { return static_cast<std::size_t>(beta_q_.size()) - 1; }
    /// logistic((theta + beta_q)^T [x, 1]).
    double prob_positive(Point x) const override;

    const Vector& beta_q() const { return beta_q_; }
    const Vector& theta() const { return theta_; }
    double gamma() const { return gamma_; }
    double l2() const { return l2_; }
    /// False when fit with l2 == 0: theta and beta_q are then not separately determined.
    bool identifiable() const { return l2_ > 0.0; }
    const FitInfo& fit_info() const { return info_; }
    void set_fit_info(FitInfo info) { info_ = info; }

private:
    Vector beta_q_;
    Vector theta_;
    double gamma_;
    double l2_;
    FitInfo info_;
};

/// Minimizes
///   L_P(theta + beta_q) + gamma * L_Q(beta_q) + l2 * (|theta|^2 + |beta_q|^2)
/// where L_D is the mean logistic loss on D. `start` holds [theta; beta_q].
JointModel fit_joint(const LabeledDataset& target, const LabeledDataset& sources, double gamma,
                     double l2 = 1e-4, const OptimOptions& options = {},
                     const std::optional<Vector>& start = std::nullopt);

/// The joint objective packed as [theta; beta_q]; exposed for derivative checks.
double joint_objective(const LabeledDataset& target, const LabeledDataset& sources, double gamma,
                       double l2, const Vector& params, Vector* grad);

inline const std::vector<double>& default_gamma_grid() {
    static const std::vector<double> grid{0.1, 1.0, 10.0};
    return grid;
}

}  // namespace postratio
