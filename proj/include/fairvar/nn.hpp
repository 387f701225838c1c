#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fairvar/matrix.hpp"
#include "fairvar/rng.hpp"

namespace fairvar {

/// One affine layer; `weights` is out x in.
struct Layer {
    Matrix weights;
    std::vector<double> biases;

    std::size_t fan_in() const noexcept { return weights.cols; }
    std::size_t fan_out() const noexcept { return weights.rows; }

    friend bool operator==(const Layer&, const Layer&) = default;
};

/// Feed-forward binary classifier: ReLU hidden layers, two output logits.
struct Model {
    std::vector<Layer> layers;

    std::size_t input_dim() const noexcept { return layers.empty() ? 0 : layers.front().fan_in(); }
    std::size_t parameter_count() const noexcept;
    bool all_finite() const noexcept;

    friend bool operator==(const Model&, const Model&) = default;
};

/// Partial derivatives of a scalar loss, shaped like the model they came from.
struct Gradients {
    std::vector<Layer> layers;

    static Gradients zeros_like(const Model& model);
    double squared_norm() const noexcept;

    friend bool operator==(const Gradients&, const Gradients&) = default;
};

/// Activations retained by `forward` for the backward pass.
struct ForwardCache {
    Matrix input;
    /// Post-activation (and post-dropout) output of each hidden layer.
    std::vector<Matrix> hidden;
    /// d(hidden)/d(pre-activation): 0 where ReLU is off or the unit was
    /// dropped, otherwise the inverted-dropout scale (1 without dropout).
    std::vector<Matrix> gates;
    Matrix logits;
};

/// Equalized-odds penalty term: `groups` holds the sensitive value of each
/// batch row.
struct EqOddsTerm {
    std::span<const int> groups;
    double lambda = 1.0;
};

Model init_model(std::size_t input_dim, std::span<const std::size_t> hidden_sizes, std::uint64_t weight_seed);

/// Batched forward pass. `dropout_rng` must be given exactly when
/// `dropout_rate > 0`; each hidden unit of each row draws its own mask bit.
ForwardCache forward(const Model& model, const Matrix& inputs, double dropout_rate = 0.0,
                     Prng* dropout_rng = nullptr);

/// Same as `forward`, reusing the buffers of `cache`.
void forward_into(const Model& model, const Matrix& inputs, double dropout_rate, Prng* dropout_rng,
                  ForwardCache& cache);

/// Class-1 softmax probability per row.
std::vector<double> positive_probabilities(const Matrix& logits);

/// Argmax prediction, ties going to class 0.
std::vector<int> predict_labels(const Matrix& logits);

/// Mean (optionally weighted) cross-entropy plus the optional soft
/// equalized-odds gap penalty. Empty `sample_weights` means unit weights.
double loss(const Matrix& logits, std::span<const int> labels, std::span<const double> sample_weights = {},
            const std::optional<EqOddsTerm>& eo_term = std::nullopt);

/// The penalty part of `loss` alone.
double eq_odds_penalty(const Matrix& logits, std::span<const int> labels, const EqOddsTerm& eo_term);

Gradients backward(const Model& model, const ForwardCache& cache, std::span<const int> labels,
                   std::span<const double> sample_weights = {},
                   const std::optional<EqOddsTerm>& eo_term = std::nullopt);

void backward_into(const Model& model, const ForwardCache& cache, std::span<const int> labels,
                   std::span<const double> sample_weights, const std::optional<EqOddsTerm>& eo_term,
                   Gradients& grads);

/// theta - lr * g, returned as a new model.
Model sgd_step(const Model& model, const Gradients& grads, double learning_rate);

void apply_sgd(Model& model, const Gradients& grads, double learning_rate);

}  // namespace fairvar
