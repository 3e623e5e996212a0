#include "postratio/ground_truth.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>

#include "postratio/classifier.hpp"

namespace postratio {

namespace {

double normal_pdf(double x, double mean) {
    const double z = x - mean;
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

// log logistic(z) without overflow.
double log_logistic(double z) { return -softplus(-z); }

}  // namespace

double conditional_kl_1d(const std::function<double(double)>& density_p,
                         const std::function<double(double)>& log_odds_p,
                         const std::function<double(double)>& log_odds_q, double lower,
                         double upper) {
    auto integrand = [&](double x) {
        const double a = log_odds_p(x);
        const double b = log_odds_q(x);
        const double p_pos = logistic(a);
        const double kl = p_pos * (log_logistic(a) - log_logistic(b)) +
                          (1.0 - p_pos) * (log_logistic(-a) - log_logistic(-b));
        return density_p(x) * kl;
    };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, lower, upper,
                                                                          20, 1e-13);
}

double gaussian_shift_kl(const GaussianShiftParams& params) {
    const double mp = params.target_mean;
    const double mq = params.source_mean;
    const double reach = 12.0 + std::max(std::abs(mp), std::abs(mq));
    return conditional_kl_1d(
        [mp](double x) { return 0.5 * normal_pdf(x, mp) + 0.5 * normal_pdf(x, -mp); },
        [mp](double x) { return 2.0 * mp * x; }, [mq](double x) { return 2.0 * mq * x; },
        -reach, reach);
}

}  // namespace postratio
