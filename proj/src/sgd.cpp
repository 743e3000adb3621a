#include "hardboost/sgd.hpp"

#include <cmath>

#include "hardboost/errors.hpp"

namespace hardboost {

void SgdConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw ConfigError("train.lr: learning rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train.momentum: must lie in [0, 1)");
    if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay: must be non-negative");
    if (!(lr_drop_factor > 0.0)) throw ConfigError("train.lr_drop_factor: must be positive");
    for (std::size_t i = 1; i < lr_drop_epochs.size(); ++i)
        if (lr_drop_epochs[i] <= lr_drop_epochs[i - 1])
            throw ConfigError("train.lr_drop_epochs: must be strictly increasing");
}

double effective_lr(const SgdConfig& config, int epoch) {
    double lr = config.learning_rate;
    for (int drop : config.lr_drop_epochs)
        if (epoch >= drop) lr /= config.lr_drop_factor;
    return lr;
}

void sgd_update(std::span<double> params, std::span<const double> grads, std::span<double> velocity,
                const SgdConfig& config, int epoch) {
    if (params.size() != grads.size() || params.size() != velocity.size())
        throw DimensionError("sgd_update: parameter, gradient and velocity lengths differ");
    const double lr = effective_lr(config, epoch);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i] + config.weight_decay * params[i];
        velocity[i] = config.momentum * velocity[i] + g;
        params[i] -= lr * velocity[i];
    }
}

SgdOptimizer::SgdOptimizer(SgdConfig config, const EmbeddingModel& model)
    : config_(std::move(config)), velocity_(zeros_like(model)) {
    config_.validate();
}

void SgdOptimizer::step(EmbeddingModel& model, const ModelGradient& grads, int epoch) {
    auto params = parameter_blocks(model);
    const auto g = parameter_blocks(grads);
    auto v = parameter_blocks(velocity_);
    if (params.size() != g.size() || params.size() != v.size())
        throw DimensionError("sgd_step: gradient structure does not match model");
    for (std::size_t b = 0; b < params.size(); ++b) sgd_update(params[b], g[b], v[b], config_, epoch);
}

}  // namespace hardboost
