#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ovabench/matrix.hpp"

namespace ovabench {
class Rng;
}

namespace ovabench::nn {

/// Relu applies ReLU after every layer, so the embedding is non-negative.
/// ReluHidden applies it between layers only, leaving the embedding linear.
enum class Activation { Relu, ReluHidden, Identity };

struct DenseLayer {
    Matrix weight;  // fan_in x fan_out
    std::vector<double> bias;

    bool operator==(const DenseLayer&) const = default;
};

/// Learnable parameters of the MLP body and the classification head.
///
/// Column j of head_weights is w_j: a class center for distance heads, or the
/// affine weight vector otherwise. head_biases is present only for affine heads.
struct ModelParams {
    std::vector<DenseLayer> layers;
    Matrix head_weights;  // embed_dim x num_classes
    std::optional<std::vector<double>> head_biases;

    [[nodiscard]] std::size_t input_dim() const;
    [[nodiscard]] std::size_t embed_dim() const;
    [[nodiscard]] std::size_t num_classes() const noexcept { return head_weights.cols(); }

    /// Throws ShapeError if layer dimensions do not chain into the head.
    void validate_shapes() const;

    bool operator==(const ModelParams&) const = default;
};

/// Gradients share the parameter layout.
using Gradients = ModelParams;

/// Calls fn(name, values) for every tensor in a fixed order: layer0.weight,
/// layer0.bias, ..., head.weight, head.bias.
void for_each_tensor(ModelParams& params, const std::function<void(std::string_view, std::span<double>)>& fn);
void for_each_tensor(const ModelParams& params,
                     const std::function<void(std::string_view, std::span<const double>)>& fn);

[[nodiscard]] ModelParams zeros_like(const ModelParams& params);
[[nodiscard]] std::size_t parameter_count(const ModelParams& params);

/// Throws NumericError naming the first non-finite entry, e.g. "layer1.weight[7]".
void check_finite(const ModelParams& params, std::string_view what = "parameter");

/// Body with Glorot-uniform weights and zero biases; head fields left empty.
[[nodiscard]] ModelParams init_body(std::size_t input_dim, std::span<const std::size_t> hidden_widths, Rng& rng);

struct ForwardTrace {
    Matrix input;
    std::vector<Matrix> pre_activations;
    std::vector<Matrix> activations;  // post-activation per layer; back() is the embedding

    [[nodiscard]] const Matrix& embedding() const { return activations.empty() ? input : activations.back(); }
};

/// Runs the body. The activation is applied after every layer, so the
/// embedding is the last hidden layer's post-activation output.
[[nodiscard]] ForwardTrace forward(const ModelParams& params, const Matrix& inputs,
                                   Activation activation = Activation::Relu);

/// Reverse-mode pass through the body. The returned gradients have the head
/// tensors zeroed; embedding_grad must already carry the loss reduction.
[[nodiscard]] Gradients backward(const ModelParams& params, const ForwardTrace& trace, const Matrix& embedding_grad,
                                 Activation activation = Activation::Relu);

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::string worst_entry;
    double analytic = 0.0;
    double numeric = 0.0;
};

/// Compares `analytic` to central differences of `loss_fn` around `params`.
/// Relative error uses the denominator max(|analytic|, |numeric|, 1e-8).
[[nodiscard]] GradCheckResult gradient_check(const std::function<double(const ModelParams&)>& loss_fn,
                                             const Gradients& analytic, const ModelParams& params, double step);

struct OptimizerState {
    Gradients velocity;
    double learning_rate = 0.05;
    double momentum = 0.9;

    static OptimizerState for_params(const ModelParams& params, double learning_rate, double momentum);
};

/// velocity = momentum * velocity - lr * grad; param += velocity.
/// Refuses the whole update if any gradient entry is non-finite.
void sgd_step(ModelParams& params, const Gradients& grads, OptimizerState& state);

}  // namespace ovabench::nn
