#pragma once

#include "aspinn/core_model.hpp"
#include "aspinn/problems.hpp"

#include <span>
#include <vector>

namespace aspinn {

/// d(loss)/d(theta) in the ModelParams flattening order.
using FlatGradient = std::vector<double>;

struct LossBreakdown {
    double total = 0.0;
    double interior = 0.0; // (1/M) sum R^2
    double boundary = 0.0; // (alpha / 2M~) sum B^2
};

struct LossAndGrad {
    LossBreakdown loss;
    FlatGradient grad;
};

/// Collocation loss
///   (1/M) sum_k R(xi_k)^2 + alpha/(2 M~) sum_k B(xi~_k)^2
/// and its exact gradient with respect to every flattened parameter.
///
/// Points are reduced in ascending index order regardless of the number of
/// worker threads, so results are bit-reproducible. Throws ValidationError
/// on empty batches or alpha <= 0, NumericalError (carrying the sample index;
/// boundary samples are numbered after the interior batch) on non-finite
/// values.
LossAndGrad loss_and_grad(const ModelParams& params, const PdeProblem& problem,
                          std::span<const Vec> batch, std::span<const Vec> boundary_batch,
                          double alpha);

/// Same forward pass as loss_and_grad without the parameter gradient.
LossBreakdown loss_only(const ModelParams& params, const PdeProblem& problem,
                        std::span<const Vec> batch, std::span<const Vec> boundary_batch,
                        double alpha);

/// Worker-thread cap from ASPINN_THREADS (unset or invalid: runtime default).
int worker_threads();

} // namespace aspinn
