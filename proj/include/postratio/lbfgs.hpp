#pragma once

#include <cstddef>
#include <functional>

#include "postratio/dataset.hpp"

namespace postratio {

struct OptimOptions {
    std::size_t max_iterations = 5000;
    /// Stop once the gradient infinity-norm drops to this value.
    double gradient_tolerance = 1e-8;
    std::size_t history = 10;
};

struct OptimResult {
    Vector x;
    double value = 0.0;
    /// Infinity-norm of the (generalized) gradient at x.
    double gradient_norm = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

/// Returns f(x) and writes the gradient into `grad` (pre-sized by the caller).
using SmoothObjective = std::function<double(const Vector& x, Vector& grad)>;

/// Limited-memory BFGS with a strong-Wolfe line search. Deterministic. The
/// line search also accepts approximate-Wolfe points so that tolerances near
/// machine precision remain reachable once f stops changing in double.
OptimResult minimize_lbfgs(const SmoothObjective& f, Vector x0, const OptimOptions& options = {});

/// Minimizes f(x) + weight * ||x||_2 (unsquared) by accelerated proximal
/// gradient with backtracking. The reported gradient norm is that of the
/// gradient mapping.
OptimResult minimize_group_l2(const SmoothObjective& f, double weight, Vector x0,
                              const OptimOptions& options = {});

}  // namespace postratio
