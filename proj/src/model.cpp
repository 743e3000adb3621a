#include "hardboost/model.hpp"

#include <cmath>
#include <random>

#include "hardboost/errors.hpp"

namespace hardboost {

EmbeddingModel init_model(const ModelShape& shape, CounterRng rng) {
    if (shape.input_dim == 0 || shape.embed_dim == 0 || shape.num_classes == 0)
        throw ConfigError("model shape needs positive input_dim, embed_dim and num_classes");

    EmbeddingModel model;
    std::vector<std::size_t> widths{shape.input_dim};
    widths.insert(widths.end(), shape.hidden.begin(), shape.hidden.end());
    widths.push_back(shape.embed_dim);

    CounterRng weight_rng = rng.split("weights");
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const std::size_t fan_in = widths[l];
        const std::size_t fan_out = widths[l + 1];
        if (fan_out == 0) throw ConfigError("hidden layer width must be positive");
        const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        DenseLayer layer{Matrix(fan_out, fan_in), Vector(fan_out, 0.0),
                         l + 2 < widths.size() ? Activation::Tanh : Activation::Linear};
        for (auto& w : layer.weight.data()) w = (2.0 * weight_rng.uniform() - 1.0) * a;
        model.layers.push_back(std::move(layer));
    }

    CounterRng center_rng = rng.split("centers");
    std::normal_distribution<double> gauss(0.0, 1.0);
    model.centers = Matrix(shape.num_classes, shape.embed_dim);
    for (std::size_t c = 0; c < shape.num_classes; ++c) {
        Vector v(shape.embed_dim);
        do {
            for (auto& x : v) x = gauss(center_rng);
        } while (l2_norm(v) < 1e-6);
        const Vector u = normalized(v);
        std::copy(u.begin(), u.end(), model.centers.row(c).begin());
    }
    return model;
}

ModelGradient zeros_like(const EmbeddingModel& model) {
    ModelGradient g;
    g.layers.reserve(model.layers.size());
    for (const auto& layer : model.layers)
        g.layers.push_back({Matrix(layer.weight.rows(), layer.weight.cols()), Vector(layer.bias.size(), 0.0),
                            layer.activation});
    g.centers = Matrix(model.centers.rows(), model.centers.cols());
    return g;
}

void validate_shapes(const EmbeddingModel& model) {
    if (model.layers.empty()) throw DimensionError("model has no layers");
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto& layer = model.layers[l];
        if (layer.bias.size() != layer.weight.rows())
            throw DimensionError("layer " + std::to_string(l) + ": bias length does not match weight rows");
        if (l > 0 && layer.weight.cols() != model.layers[l - 1].weight.rows())
            throw DimensionError("layer " + std::to_string(l) + ": input width does not chain with previous layer");
    }
    if (model.centers.cols() != model.embed_dim())
        throw DimensionError("centers width " + std::to_string(model.centers.cols()) + " != embed_dim " +
                             std::to_string(model.embed_dim()));
}

std::vector<std::span<double>> parameter_blocks(EmbeddingModel& model) {
    std::vector<std::span<double>> blocks;
    for (auto& layer : model.layers) {
        blocks.push_back(layer.weight.data());
        blocks.push_back(layer.bias);
    }
    blocks.push_back(model.centers.data());
    return blocks;
}

std::vector<std::span<const double>> parameter_blocks(const EmbeddingModel& model) {
    std::vector<std::span<const double>> blocks;
    for (const auto& layer : model.layers) {
        blocks.push_back(layer.weight.data());
        blocks.push_back(layer.bias);
    }
    blocks.push_back(model.centers.data());
    return blocks;
}

std::vector<std::string> parameter_block_names(const EmbeddingModel& model) {
    std::vector<std::string> names;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        names.push_back("layer" + std::to_string(l + 1) + ".weight");
        names.push_back("layer" + std::to_string(l + 1) + ".bias");
    }
    names.push_back("centers");
    return names;
}

ForwardCache forward(const EmbeddingModel& model, std::span<const double> input) {
    if (model.layers.empty()) throw DimensionError("model has no layers");
    if (input.size() != model.input_dim())
        throw DimensionError("input length " + std::to_string(input.size()) + " != model input_dim " +
                             std::to_string(model.input_dim()));
    ForwardCache cache;
    Vector x(input.begin(), input.end());
    for (const auto& layer : model.layers) {
        cache.layer_inputs.push_back(x);
        Vector y = affine(layer.weight, x, layer.bias);
        if (layer.activation == Activation::Tanh)
            for (auto& v : y) v = std::tanh(v);
        cache.layer_outputs.push_back(y);
        x = std::move(y);
    }
    cache.pre_norm = l2_norm(x);
    if (!std::isfinite(cache.pre_norm)) throw NumericError("non-finite activation in forward pass");
    cache.embedding = normalized(x);
    return cache;
}

Vector embed(const EmbeddingModel& model, std::span<const double> input) { return forward(model, input).embedding; }

void backward(const EmbeddingModel& model, const ForwardCache& cache, std::span<const double> upstream,
              ModelGradient& grads) {
    if (upstream.size() != model.embed_dim())
        throw DimensionError("upstream gradient length " + std::to_string(upstream.size()) + " != embed_dim");
    if (!all_finite(upstream)) throw NumericError("non-finite upstream gradient");
    if (cache.layer_inputs.size() != model.layers.size())
        throw ContractError("backward called without a matching forward pass");

    Vector g = normalize_backward(cache.embedding, cache.pre_norm, upstream);
    for (std::size_t l = model.layers.size(); l-- > 0;) {
        const auto& layer = model.layers[l];
        if (layer.activation == Activation::Tanh) {
            const auto& y = cache.layer_outputs[l];
            for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - y[i] * y[i];
        }
        add_outer(grads.layers[l].weight, g, cache.layer_inputs[l]);
        for (std::size_t i = 0; i < g.size(); ++i) grads.layers[l].bias[i] += g[i];
        if (l > 0) g = transpose_times(layer.weight, g);
    }
}

ModelGradient backward(const EmbeddingModel& model, std::span<const double> input, std::span<const double> upstream) {
    ModelGradient grads = zeros_like(model);
    backward(model, forward(model, input), upstream, grads);
    return grads;
}

Matrix unit_centers(const EmbeddingModel& model) {
    Matrix out(model.centers.rows(), model.centers.cols());
    for (std::size_t c = 0; c < out.rows(); ++c) {
        const Vector u = normalized(model.centers.row(c));
        std::copy(u.begin(), u.end(), out.row(c).begin());
    }
    return out;
}

}  // namespace hardboost
