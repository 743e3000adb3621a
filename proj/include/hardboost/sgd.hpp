#pragma once

#include <vector>

#include "hardboost/model.hpp"

namespace hardboost {

struct SgdConfig {
    double learning_rate = 0.1;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::vector<int> lr_drop_epochs = {15, 25};
    double lr_drop_factor = 10.0;  // lr is divided by this at each drop epoch

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// Learning rate in effect during `epoch` (0-based): one division by
/// lr_drop_factor for every drop epoch <= epoch.
double effective_lr(const SgdConfig& config, int epoch);

/// SGD with heavy-ball momentum and L2 weight decay:
///   v <- momentum * v + (g + weight_decay * p);  p <- p - lr * v
class SgdOptimizer {
public:
    SgdOptimizer(SgdConfig config, const EmbeddingModel& model);

    void step(EmbeddingModel& model, const ModelGradient& grads, int epoch);

    const SgdConfig& config() const noexcept { return config_; }
    const ModelGradient& velocity() const noexcept { return velocity_; }

private:
    SgdConfig config_;
    ModelGradient velocity_;
};

/// Single-block form of the same update, used by tests and scalar problems.
void sgd_update(std::span<double> params, std::span<const double> grads, std::span<double> velocity,
                const SgdConfig& config, int epoch);

}  // namespace hardboost
