#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ovabench/head_kind.hpp"
#include "ovabench/matrix.hpp"
#include "ovabench/network.hpp"

namespace ovabench {
class Rng;
}

namespace ovabench::heads {

/// Affine heads: z = W^T f + b. Distance heads: z_j = -||f - w_j||.
[[nodiscard]] Matrix logits(HeadKind head, const nn::ModelParams& params, const Matrix& embeddings);

/// Softmax heads normalize each row; OVA heads apply an independent sigmoid to
/// each logit, scaled by 2 for OvaDM so that zero distance gives probability 1.
[[nodiscard]] Matrix probabilities(HeadKind head, const Matrix& logits);

/// Mean negative log-likelihood over the batch, evaluated from logits in
/// closed form. OVA heads sum K binary cross-entropies per example.
[[nodiscard]] double loss(HeadKind head, const Matrix& logits, std::span<const int> labels);

/// d(mean loss)/d(logits).
[[nodiscard]] Matrix logit_gradient(HeadKind head, const Matrix& logits, std::span<const int> labels);

struct LossGradient {
    double loss = 0.0;
    Matrix head_weights;
    std::optional<std::vector<double>> head_biases;
    Matrix embedding_grad;  // feed to nn::backward
};

[[nodiscard]] LossGradient loss_gradient(HeadKind head, const nn::ModelParams& params, const nn::ForwardTrace& trace,
                                         std::span<const int> labels);

struct Predictions {
    std::vector<int> labels;
    std::vector<double> confidence;
};

/// Argmax with ties to the lowest index; confidence is the raw max probability.
[[nodiscard]] Predictions predict(const Matrix& probs);

/// Throws std::invalid_argument unless bias presence matches the head kind.
void validate_head(HeadKind head, const nn::ModelParams& params);

enum class CenterInit { Zeros, Random };

/// Body plus head for the given kind. Distance-head centers start at zero by
/// default; affine heads get Glorot-uniform weights and zero biases.
[[nodiscard]] nn::ModelParams init_model(HeadKind head, std::size_t input_dim,
                                         std::span<const std::size_t> hidden_widths, std::size_t num_classes, Rng& rng,
                                         CenterInit center_init = CenterInit::Zeros);

struct Objective {
    double loss = 0.0;
    nn::Gradients grads;
};

/// Loss of the full model on a batch and its exact gradient.
[[nodiscard]] Objective objective(HeadKind head, const nn::ModelParams& params, const Matrix& inputs,
                                  std::span<const int> labels, nn::Activation activation = nn::Activation::Relu);

/// Forward pass plus head: per-class probabilities for each input row.
[[nodiscard]] Matrix infer(HeadKind head, const nn::ModelParams& params, const Matrix& inputs,
                           nn::Activation activation = nn::Activation::Relu);

}  // namespace ovabench::heads
