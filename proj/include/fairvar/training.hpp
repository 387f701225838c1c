#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fairvar/data.hpp"
#include "fairvar/nn.hpp"
#include "fairvar/stats.hpp"

namespace fairvar {

enum class LossKind { plain_ce, weighted_ce, ce_plus_eo };

std::string loss_kind_name(LossKind kind);
LossKind parse_loss_kind(const std::string& name);

struct TrainConfig {
    std::vector<std::size_t> hidden_sizes = {64};
    double learning_rate = 1e-3;
    std::size_t batch_size = 128;
    int epochs = 300;
    double dropout_rate = 0.0;
    std::uint64_t weight_seed = 0;
    std::uint64_t shuffle_seed = 0;
    LossKind loss = LossKind::plain_ce;
    /// Penalty weight for LossKind::ce_plus_eo.
    double eo_lambda = 1.0;
    /// Per-training-row weights for LossKind::weighted_ce. Empty means
    /// reweighing weights computed from the training split.
    std::vector<double> sample_weights;
    int window_first = 100;
    int window_last = 300;

    /// Every violated field, empty when the config is usable on a training
    /// set of `train_size` rows.
    std::vector<std::string> violations(std::size_t train_size) const;
    void validate(std::size_t train_size) const;
};

enum class Retention { none, window, all };

struct Checkpoint {
    int epoch = 0;
    Model model;
};

struct RunOptions {
    Retention retention = Retention::none;
    std::size_t run_id = 0;
    /// Also record metrics on the validation split each epoch.
    bool track_validation = false;
};

struct RunResult {
    Trajectory trajectory;
    /// Validation records, filled only with RunOptions::track_validation.
    Trajectory validation;
    Model initial_model;
    Model final_model;
    std::vector<Checkpoint> checkpoints;
};

/// Loss-dependent per-row training weights (empty for unweighted losses).
std::vector<double> training_weights(const Dataset& train, const TrainConfig& config);

/// One pass over `order` in consecutive batches (final short batch kept),
/// one SGD step per batch. Dropout draws from the (epoch, dropout) stream.
Model train_epoch(Model model, const Dataset& train, const DataOrder& order, const TrainConfig& config, int epoch,
                  std::span<const double> sample_weights = {});

/// SGD over an explicit list of batches (each a list of training rows).
Model train_batches(Model model, const Dataset& train, std::span<const std::vector<std::size_t>> batches,
                    const TrainConfig& config, int epoch, std::span<const double> sample_weights = {});

/// Splits `order` into consecutive batches of `batch_size`.
std::vector<std::vector<std::size_t>> make_batches(const DataOrder& order, std::size_t batch_size);

std::vector<int> predict(const Model& model, const Dataset& data);
MetricRecord evaluate(const Model& model, const Dataset& data, int epoch);

/// Full training: init from weight_seed, then for t = 1..T train on
/// epoch_order(reference_order(n, shuffle_seed), t) and evaluate on test.
RunResult train_run(const Splits& splits, const TrainConfig& config, const RunOptions& options = {});

/// Population std of the class-1 probability across `passes` dropout
/// forward passes, per input row.
std::vector<double> mc_dropout_uncertainty(const Model& model, const Matrix& inputs, std::size_t passes,
                                           double dropout_rate, std::uint64_t seed);

}  // namespace fairvar
