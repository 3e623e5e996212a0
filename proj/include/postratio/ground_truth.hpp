#pragma once

#include <functional>

#include "postratio/generators.hpp"

namespace postratio {

/// KL[p || q] between class posteriors, averaged over the target input density:
///   int p(x) sum_y p(y|x) log(p(y|x) / q(y|x)) dx,
/// for one-dimensional problems with balanced classes. `log_odds_p(x)` and
/// `log_odds_q(x)` return the log-odds log p(+1|x) - log p(-1|x).
double conditional_kl_1d(const std::function<double(double)>& density_p,
                         const std::function<double(double)>& log_odds_p,
                         const std::function<double(double)>& log_odds_q, double lower,
                         double upper);

/// The conditional KL of the Gaussian-shift generator, by adaptive quadrature.
/// With equal unit variances the log-odds are 2 * mean * x.
double gaussian_shift_kl(const GaussianShiftParams& params = {});

}  // namespace postratio
