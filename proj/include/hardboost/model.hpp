#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hardboost/matrix.hpp"
#include "hardboost/rng.hpp"

namespace hardboost {

enum class Activation : std::uint8_t { Linear = 0, Tanh = 1 };

struct DenseLayer {
    Matrix weight;  // out x in
    Vector bias;    // out
    Activation activation = Activation::Linear;

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Feed-forward backbone followed by L2 normalization, plus one classifier
/// center per training class. Centers are stored raw and normalized by the
/// loss head whenever consumed.
///
/// The same shape doubles as the container for gradients and momentum
/// buffers (see zeros_like), so every optimizer pass walks the identical
/// block order.
struct EmbeddingModel {
    std::vector<DenseLayer> layers;
    Matrix centers;  // num_classes x embed_dim

    std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().weight.cols(); }
    std::size_t embed_dim() const { return layers.empty() ? 0 : layers.back().weight.rows(); }
    std::size_t num_classes() const { return centers.rows(); }

    friend bool operator==(const EmbeddingModel&, const EmbeddingModel&) = default;
};

using ModelGradient = EmbeddingModel;

struct ModelShape {
    std::size_t input_dim = 32;
    std::vector<std::size_t> hidden = {64, 64};
    std::size_t embed_dim = 16;
    std::size_t num_classes = 0;
};

/// Glorot-uniform weights, zero biases, centers drawn as random unit vectors.
EmbeddingModel init_model(const ModelShape& shape, CounterRng rng);

/// Same shapes as `model`, every entry zero.
ModelGradient zeros_like(const EmbeddingModel& model);

/// Checks layer chaining and center width; throws DimensionError.
void validate_shapes(const EmbeddingModel& model);

/// Mutable views over every parameter block in a fixed order:
/// W_1, b_1, ..., W_L, b_L, centers.
std::vector<std::span<double>> parameter_blocks(EmbeddingModel& model);
std::vector<std::span<const double>> parameter_blocks(const EmbeddingModel& model);
std::vector<std::string> parameter_block_names(const EmbeddingModel& model);

/// Intermediate values of one forward pass, needed by backward.
struct ForwardCache {
    std::vector<Vector> layer_inputs;  // input to layer l
    std::vector<Vector> layer_outputs; // post-activation output of layer l
    double pre_norm = 0.0;
    Vector embedding;
};

ForwardCache forward(const EmbeddingModel& model, std::span<const double> input);

/// Unit-norm embedding of `input`.
Vector embed(const EmbeddingModel& model, std::span<const double> input);

/// Accumulates d(loss)/d(backbone params) into `grads` given d(loss)/d(embedding).
/// Center gradients are produced by the loss head, not here.
void backward(const EmbeddingModel& model, const ForwardCache& cache, std::span<const double> upstream,
              ModelGradient& grads);

/// Convenience: fresh gradient for a single input.
ModelGradient backward(const EmbeddingModel& model, std::span<const double> input, std::span<const double> upstream);

/// Row-normalized copy of the centers.
Matrix unit_centers(const EmbeddingModel& model);

}  // namespace hardboost
