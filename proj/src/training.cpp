#include "fairvar/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fairvar/errors.hpp"

namespace fairvar {

std::string loss_kind_name(LossKind kind)
{
    switch (kind) {
    case LossKind::plain_ce: return "plain_ce";
    case LossKind::weighted_ce: return "weighted_ce";
    case LossKind::ce_plus_eo: return "ce_plus_eo";
    }
    return "?";
}

LossKind parse_loss_kind(const std::string& name)
{
    for (LossKind k : {LossKind::plain_ce, LossKind::weighted_ce, LossKind::ce_plus_eo}) {
        if (loss_kind_name(k) == name) {
            return k;
        }
    }
    throw std::invalid_argument("unknown loss '" + name + "'");
}

std::vector<std::string> TrainConfig::violations(std::size_t train_size) const
{
    std::vector<std::string> out;
    if (hidden_sizes.empty()) {
        out.emplace_back("hidden_sizes: at least one hidden layer is required");
    }
    for (std::size_t h : hidden_sizes) {
        if (h == 0) {
            out.emplace_back("hidden_sizes: sizes must be positive");
            break;
        }
    }
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        out.emplace_back("learning_rate: must be a finite nonnegative number");
    }
    if (batch_size == 0) {
        out.emplace_back("batch_size: must be positive");
    } else if (train_size > 0 && batch_size > train_size) {
        out.emplace_back("batch_size: exceeds the training-set size " + std::to_string(train_size));
    }
    if (epochs < 0) {
        out.emplace_back("epochs: must be nonnegative");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
        out.emplace_back("dropout_rate: must lie in [0, 1)");
    }
    if (!(eo_lambda >= 0.0) || !std::isfinite(eo_lambda)) {
        out.emplace_back("eo_lambda: must be a finite nonnegative number");
    }
    if (!sample_weights.empty()) {
        if (train_size > 0 && sample_weights.size() != train_size) {
            out.emplace_back("sample_weights: one weight per training row is required");
        }
        for (double w : sample_weights) {
            if (!(w > 0.0) || !std::isfinite(w)) {
                out.emplace_back("sample_weights: weights must be positive and finite");
                break;
            }
        }
    }
    if (epochs > 0 && !(window_first >= 1 && window_first <= window_last && window_last <= epochs)) {
        out.emplace_back("record_window: requires 1 <= T1 <= T2 <= epochs");
    }
    return out;
}

void TrainConfig::validate(std::size_t train_size) const
{
    auto v = violations(train_size);
    if (!v.empty()) {
        throw ConfigError(std::move(v));
    }
}

std::vector<double> training_weights(const Dataset& train, const TrainConfig& config)
{
    if (config.loss != LossKind::weighted_ce) {
        return {};
    }
    if (!config.sample_weights.empty()) {
        return config.sample_weights;
    }
    return reweighing_weights(train);
}

std::vector<std::vector<std::size_t>> make_batches(const DataOrder& order, std::size_t batch_size)
{
    if (batch_size == 0) {
        throw std::invalid_argument("make_batches: batch size must be positive");
    }
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t end = std::min(order.size(), start + batch_size);
        batches.emplace_back(order.indices.begin() + static_cast<std::ptrdiff_t>(start),
                             order.indices.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

Model train_batches(Model model, const Dataset& train, std::span<const std::vector<std::size_t>> batches,
                    const TrainConfig& config, int epoch, std::span<const double> sample_weights)
{
    if (config.learning_rate == 0.0) {
        return model;
    }
    Prng dropout = Prng::from(static_cast<std::uint64_t>(epoch), kDropoutStream);
    Prng* dropout_rng = config.dropout_rate > 0.0 ? &dropout : nullptr;
    const bool eo = config.loss == LossKind::ce_plus_eo;

    Matrix inputs;
    std::vector<int> labels;
    std::vector<int> groups;
    std::vector<double> weights;
    ForwardCache cache;
    Gradients grads = Gradients::zeros_like(model);
    const std::size_t dim = train.dim();

    for (const auto& batch : batches) {
        if (batch.empty()) {
            continue;
        }
        inputs.resize(batch.size(), dim);
        labels.resize(batch.size());
        groups.resize(batch.size());
        weights.resize(sample_weights.empty() ? 0 : batch.size());
        for (std::size_t b = 0; b < batch.size(); ++b) {
            const std::size_t row = batch[b];
            const auto src = train.features.row(row);
            std::copy(src.begin(), src.end(), inputs.row(b).begin());
            labels[b] = train.labels[row];
            groups[b] = train.sensitive[row];
            if (!sample_weights.empty()) {
                weights[b] = sample_weights[row];
            }
        }
        forward_into(model, inputs, config.dropout_rate, dropout_rng, cache);
        std::optional<EqOddsTerm> eo_term;
        if (eo) {
            eo_term = EqOddsTerm{groups, config.eo_lambda};
        }
        backward_into(model, cache, labels, weights, eo_term, grads);
        apply_sgd(model, grads, config.learning_rate);
    }
    return model;
}

Model train_epoch(Model model, const Dataset& train, const DataOrder& order, const TrainConfig& config, int epoch,
                  std::span<const double> sample_weights)
{
    if (order.size() != train.size()) {
        throw std::invalid_argument("train_epoch: order length differs from the training-set size");
    }
    const auto batches = make_batches(order, config.batch_size);
    return train_batches(std::move(model), train, batches, config, epoch, sample_weights);
}

std::vector<int> predict(const Model& model, const Dataset& data)
{
    return predict_labels(forward(model, data.features).logits);
}

MetricRecord evaluate(const Model& model, const Dataset& data, int epoch)
{
    const auto preds = predict(model, data);
    return make_record(epoch, preds, data.labels, data.sensitive);
}

RunResult train_run(const Splits& splits, const TrainConfig& config, const RunOptions& options)
{
    const Dataset& train = splits.train;
    config.validate(train.size());

    RunResult result;
    result.trajectory.run_id = options.run_id;
    result.trajectory.weight_seed = config.weight_seed;
    result.trajectory.shuffle_seed = config.shuffle_seed;
    result.validation.run_id = options.run_id;
    result.validation.weight_seed = config.weight_seed;
    result.validation.shuffle_seed = config.shuffle_seed;

    Model model = init_model(train.dim(), config.hidden_sizes, config.weight_seed);
    result.initial_model = model;
    const auto weights = training_weights(train, config);
    const DataOrder reference = reference_order(train.size(), config.shuffle_seed);

    for (int t = 1; t <= config.epochs; ++t) {
        const DataOrder order = epoch_order(reference, t);
        model = train_epoch(std::move(model), train, order, config, t, weights);
        result.trajectory.records.push_back(evaluate(model, splits.test, t));
        if (options.track_validation) {
            result.validation.records.push_back(evaluate(model, splits.validation, t));
        }
        const bool keep = options.retention == Retention::all ||
                          (options.retention == Retention::window && t >= config.window_first &&
                           t <= config.window_last);
        if (keep) {
            result.checkpoints.push_back({t, model});
        }
    }
    result.final_model = std::move(model);
    return result;
}

std::vector<double> mc_dropout_uncertainty(const Model& model, const Matrix& inputs, std::size_t passes,
                                           double dropout_rate, std::uint64_t seed)
{
    if (!(dropout_rate > 0.0 && dropout_rate < 1.0)) {
        throw std::invalid_argument("mc_dropout_uncertainty: dropout rate must lie in (0, 1)");
    }
    if (passes < 2) {
        throw std::invalid_argument("mc_dropout_uncertainty: at least two passes are required");
    }
    std::vector<double> sum(inputs.rows, 0.0);
    std::vector<double> sum_sq(inputs.rows, 0.0);
    Prng rng = Prng::from(seed, kDropoutStream);
    ForwardCache cache;
    for (std::size_t pass = 0; pass < passes; ++pass) {
        forward_into(model, inputs, dropout_rate, &rng, cache);
        const auto probs = positive_probabilities(cache.logits);
        for (std::size_t i = 0; i < probs.size(); ++i) {
            sum[i] += probs[i];
            sum_sq[i] += probs[i] * probs[i];
        }
    }
    std::vector<double> stds(inputs.rows);
    const double m = static_cast<double>(passes);
    for (std::size_t i = 0; i < stds.size(); ++i) {
        const double mu = sum[i] / m;
        stds[i] = std::sqrt(std::max(0.0, sum_sq[i] / m - mu * mu));
    }
    return stds;
}

}  // namespace fairvar
