#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hardboost/model.hpp"

namespace hardboost {

struct BlockError {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
};

struct GradCheckReport {
    std::vector<BlockError> blocks;
    double max_rel_error = 0.0;

    bool passed(double tolerance) const { return max_rel_error < tolerance; }
};

using LossFn = std::function<double(const EmbeddingModel&)>;
using GradFn = std::function<ModelGradient(const EmbeddingModel&)>;

/// Compares `analytic_grad(model)` against fourth-order central differences
/// of `loss` with step `h` for every parameter. Relative error is
/// |a - n| / max(|a|, |n|, abs_floor); the floor keeps round-off on
/// near-zero entries from dominating.
GradCheckReport grad_check(const EmbeddingModel& model, const LossFn& loss, const GradFn& analytic_grad,
                           double h = 1e-4, double abs_floor = 1e-4);

}  // namespace hardboost
