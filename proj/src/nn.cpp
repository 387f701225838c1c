#include "fairvar/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fairvar/errors.hpp"

namespace fairvar {

namespace {

// out(b, o) = bias(o) + sum_k W(o, k) * x(b, k), summed in k order.
// W is walked transposed so the inner loop runs over contiguous outputs.
void affine(const Layer& layer, const Matrix& x, Matrix& out, std::vector<double>& wt)
{
    const std::size_t n_out = layer.fan_out();
    const std::size_t n_in = layer.fan_in();
    out.rows = x.rows;
    out.cols = n_out;
    out.values.resize(x.rows * n_out);
    wt.resize(n_in * n_out);
    for (std::size_t o = 0; o < n_out; ++o) {
        for (std::size_t k = 0; k < n_in; ++k) {
            wt[k * n_out + o] = layer.weights.values[o * n_in + k];
        }
    }
    for (std::size_t b = 0; b < x.rows; ++b) {
        const double* xr = x.values.data() + b * n_in;
        double* yr = out.values.data() + b * n_out;
        std::copy(layer.biases.begin(), layer.biases.end(), yr);
        for (std::size_t k = 0; k < n_in; ++k) {
            const double xk = xr[k];
            const double* wk = wt.data() + k * n_out;
            for (std::size_t o = 0; o < n_out; ++o) {
                yr[o] += wk[o] * xk;
            }
        }
    }
}

void check_labels(std::span<const int> labels, std::size_t rows, std::span<const double> weights)
{
    if (rows == 0) {
        throw Error("loss: empty batch");
    }
    if (labels.size() != rows) {
        throw std::invalid_argument("loss: label count does not match batch size");
    }
    if (!weights.empty() && weights.size() != rows) {
        throw std::invalid_argument("loss: sample weight count does not match batch size");
    }
}

double softmax_positive(double z0, double z1)
{
    // p(1) = 1 / (1 + exp(z0 - z1)), stable for either sign
    const double d = z0 - z1;
    if (d >= 0.0) {
        const double e = std::exp(-d);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(d));
}

struct RateGap {
    double gap = 0.0;  // rate(a=0) - rate(a=1); 0 when either side is absent
    bool active = false;
    std::size_t count[2] = {0, 0};
};

RateGap soft_rate_gap(std::span<const double> probs, std::span<const int> labels, std::span<const int> groups,
                      int label)
{
    RateGap result;
    double sum[2] = {0.0, 0.0};
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (labels[i] != label) {
            continue;
        }
        const int a = groups[i];
        sum[a] += probs[i];
        ++result.count[a];
    }
    if (result.count[0] > 0 && result.count[1] > 0) {
        result.active = true;
        result.gap = sum[0] / static_cast<double>(result.count[0]) - sum[1] / static_cast<double>(result.count[1]);
    }
    return result;
}

double sign(double v) { return (v > 0.0) - (v < 0.0); }

void check_eo(const EqOddsTerm& eo, std::size_t rows)
{
    if (eo.groups.size() != rows) {
        throw std::invalid_argument("loss: group count does not match batch size");
    }
    if (!(eo.lambda >= 0.0)) {
        throw std::invalid_argument("loss: equalized-odds lambda must be nonnegative");
    }
}

}  // namespace

std::size_t Model::parameter_count() const noexcept
{
    std::size_t count = 0;
    for (const auto& layer : layers) {
        count += layer.weights.values.size() + layer.biases.size();
    }
    return count;
}

bool Model::all_finite() const noexcept
{
    for (const auto& layer : layers) {
        for (double v : layer.weights.values) {
            if (!std::isfinite(v)) {
                return false;
            }
        }
        for (double v : layer.biases) {
            if (!std::isfinite(v)) {
                return false;
            }
        }
    }
    return true;
}

Gradients Gradients::zeros_like(const Model& model)
{
    Gradients g;
    g.layers.reserve(model.layers.size());
    for (const auto& layer : model.layers) {
        g.layers.push_back({Matrix(layer.fan_out(), layer.fan_in()), std::vector<double>(layer.fan_out(), 0.0)});
    }
    return g;
}

double Gradients::squared_norm() const noexcept
{
    double total = 0.0;
    for (const auto& layer : layers) {
        for (double v : layer.weights.values) {
            total += v * v;
        }
        for (double v : layer.biases) {
            total += v * v;
        }
    }
    return total;
}

Model init_model(std::size_t input_dim, std::span<const std::size_t> hidden_sizes, std::uint64_t weight_seed)
{
    if (input_dim == 0) {
        throw std::invalid_argument("init_model: input_dim must be at least 1");
    }
    Model model;
    std::size_t fan_in = input_dim;
    const std::size_t n_layers = hidden_sizes.size() + 1;
    for (std::size_t l = 0; l < n_layers; ++l) {
        const std::size_t fan_out = l + 1 < n_layers ? hidden_sizes[l] : 2;
        if (fan_out == 0) {
            throw std::invalid_argument("init_model: hidden sizes must be positive");
        }
        Layer layer{Matrix(fan_out, fan_in), std::vector<double>(fan_out, 0.0)};
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        Prng rng = Prng::from(weight_seed, l);
        for (double& w : layer.weights.values) {
            w = (2.0 * rng.uniform() - 1.0) * limit;
        }
        model.layers.push_back(std::move(layer));
        fan_in = fan_out;
    }
    return model;
}

void forward_into(const Model& model, const Matrix& inputs, double dropout_rate, Prng* dropout_rng,
                  ForwardCache& cache)
{
    if (model.layers.empty()) {
        throw std::invalid_argument("forward: model has no layers");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
        throw std::invalid_argument("forward: dropout rate must lie in [0, 1)");
    }
    if ((dropout_rate > 0.0) != (dropout_rng != nullptr)) {
        throw std::invalid_argument("forward: a dropout generator is required exactly when dropout is active");
    }

    const std::size_t n_hidden = model.layers.size() - 1;
    cache.input = inputs;
    cache.hidden.resize(n_hidden);
    cache.gates.resize(n_hidden);

    const double keep_scale = 1.0 / (1.0 - dropout_rate);
    std::vector<double> wt;
    const Matrix* current = &cache.input;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const Layer& layer = model.layers[l];
        if (current->cols != layer.fan_in()) {
            throw DimensionError(l, layer.fan_in(), current->cols);
        }
        if (l == n_hidden) {
            affine(layer, *current, cache.logits, wt);
            break;
        }
        Matrix& h = cache.hidden[l];
        Matrix& gate = cache.gates[l];
        affine(layer, *current, h, wt);
        gate.rows = h.rows;
        gate.cols = h.cols;
        gate.values.resize(h.values.size());
        if (dropout_rng == nullptr) {
            for (std::size_t i = 0; i < h.values.size(); ++i) {
                const double g = h.values[i] > 0.0 ? 1.0 : 0.0;
                gate.values[i] = g;
                h.values[i] = g * h.values[i];
            }
        } else {
            for (std::size_t i = 0; i < h.values.size(); ++i) {
                double g = h.values[i] > 0.0 ? 1.0 : 0.0;
                g = dropout_rng->uniform() < dropout_rate ? 0.0 : g * keep_scale;
                gate.values[i] = g;
                h.values[i] = g * h.values[i];
            }
        }
        current = &h;
    }
}

ForwardCache forward(const Model& model, const Matrix& inputs, double dropout_rate, Prng* dropout_rng)
{
    ForwardCache cache;
    forward_into(model, inputs, dropout_rate, dropout_rng, cache);
    return cache;
}

std::vector<double> positive_probabilities(const Matrix& logits)
{
    std::vector<double> probs(logits.rows);
    for (std::size_t b = 0; b < logits.rows; ++b) {
        probs[b] = softmax_positive(logits(b, 0), logits(b, 1));
    }
    return probs;
}

std::vector<int> predict_labels(const Matrix& logits)
{
    std::vector<int> preds(logits.rows);
    for (std::size_t b = 0; b < logits.rows; ++b) {
        preds[b] = logits(b, 1) > logits(b, 0) ? 1 : 0;
    }
    return preds;
}

double eq_odds_penalty(const Matrix& logits, std::span<const int> labels, const EqOddsTerm& eo_term)
{
    check_labels(labels, logits.rows, {});
    check_eo(eo_term, logits.rows);
    const auto probs = positive_probabilities(logits);
    const RateGap tpr = soft_rate_gap(probs, labels, eo_term.groups, 1);
    const RateGap fpr = soft_rate_gap(probs, labels, eo_term.groups, 0);
    return 0.5 * eo_term.lambda * (std::abs(tpr.gap) + std::abs(fpr.gap));
}

double loss(const Matrix& logits, std::span<const int> labels, std::span<const double> sample_weights,
            const std::optional<EqOddsTerm>& eo_term)
{
    check_labels(labels, logits.rows, sample_weights);
    double total = 0.0;
    for (std::size_t b = 0; b < logits.rows; ++b) {
        const double z0 = logits(b, 0);
        const double z1 = logits(b, 1);
        const double zmax = std::max(z0, z1);
        const double lse = zmax + std::log(std::exp(z0 - zmax) + std::exp(z1 - zmax));
        const double ce = lse - (labels[b] == 1 ? z1 : z0);
        total += (sample_weights.empty() ? 1.0 : sample_weights[b]) * ce;
    }
    double value = total / static_cast<double>(logits.rows);
    if (eo_term) {
        value += eq_odds_penalty(logits, labels, *eo_term);
    }
    return value;
}

void backward_into(const Model& model, const ForwardCache& cache, std::span<const int> labels,
                   std::span<const double> sample_weights, const std::optional<EqOddsTerm>& eo_term,
                   Gradients& grads)
{
    const Matrix& logits = cache.logits;
    const std::size_t batch = logits.rows;
    check_labels(labels, batch, sample_weights);
    if (eo_term) {
        check_eo(*eo_term, batch);
    }
    if (grads.layers.size() != model.layers.size()) {
        grads = Gradients::zeros_like(model);
    }

    // dL/dlogits
    Matrix delta(batch, 2);
    const auto probs = positive_probabilities(logits);
    const double inv_batch = 1.0 / static_cast<double>(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        const double w = (sample_weights.empty() ? 1.0 : sample_weights[b]) * inv_batch;
        const double p1 = probs[b];
        const double p0 = 1.0 - p1;
        delta(b, 0) = w * (p0 - (labels[b] == 0 ? 1.0 : 0.0));
        delta(b, 1) = w * (p1 - (labels[b] == 1 ? 1.0 : 0.0));
    }
    if (eo_term) {
        for (int label : {1, 0}) {
            const RateGap gap = soft_rate_gap(probs, labels, eo_term->groups, label);
            if (!gap.active) {
                continue;
            }
            const double outer = 0.5 * eo_term->lambda * sign(gap.gap);
            for (std::size_t b = 0; b < batch; ++b) {
                if (labels[b] != label) {
                    continue;
                }
                const int a = eo_term->groups[b];
                const double dp = (a == 0 ? 1.0 : -1.0) * outer / static_cast<double>(gap.count[a]);
                const double slope = probs[b] * (1.0 - probs[b]);
                delta(b, 1) += dp * slope;
                delta(b, 0) -= dp * slope;
            }
        }
    }

    Matrix upstream;
    std::vector<double> scratch;
    for (std::size_t l = model.layers.size(); l-- > 0;) {
        const Layer& layer = model.layers[l];
        Layer& g = grads.layers[l];
        const Matrix& input = l == 0 ? cache.input : cache.hidden[l - 1];
        const std::size_t n_out = layer.fan_out();
        const std::size_t n_in = layer.fan_in();

        std::fill(g.biases.begin(), g.biases.end(), 0.0);
        if (n_out >= n_in) {
            // accumulate transposed so the inner loop runs over outputs
            scratch.assign(n_in * n_out, 0.0);
            for (std::size_t b = 0; b < batch; ++b) {
                const double* xr = input.values.data() + b * n_in;
                const double* dr = delta.values.data() + b * n_out;
                for (std::size_t k = 0; k < n_in; ++k) {
                    const double xk = xr[k];
                    double* gk = scratch.data() + k * n_out;
                    for (std::size_t o = 0; o < n_out; ++o) {
                        gk[o] += dr[o] * xk;
                    }
                }
            }
            for (std::size_t o = 0; o < n_out; ++o) {
                for (std::size_t k = 0; k < n_in; ++k) {
                    g.weights.values[o * n_in + k] = scratch[k * n_out + o];
                }
            }
        } else {
            std::fill(g.weights.values.begin(), g.weights.values.end(), 0.0);
            for (std::size_t b = 0; b < batch; ++b) {
                const double* xr = input.values.data() + b * n_in;
                const double* dr = delta.values.data() + b * n_out;
                for (std::size_t o = 0; o < n_out; ++o) {
                    const double d = dr[o];
                    double* gw = g.weights.values.data() + o * n_in;
                    for (std::size_t k = 0; k < n_in; ++k) {
                        gw[k] += d * xr[k];
                    }
                }
            }
        }
        for (std::size_t b = 0; b < batch; ++b) {
            const double* dr = delta.values.data() + b * n_out;
            for (std::size_t o = 0; o < n_out; ++o) {
                g.biases[o] += dr[o];
            }
        }
        if (l == 0) {
            break;
        }

        // Propagate through W and the ReLU/dropout gate of the layer below.
        const Matrix& gate = cache.gates[l - 1];
        upstream.resize(batch, n_in);
        for (std::size_t b = 0; b < batch; ++b) {
            const double* dr = delta.values.data() + b * n_out;
            double* ur = upstream.values.data() + b * n_in;
            for (std::size_t o = 0; o < n_out; ++o) {
                const double d = dr[o];
                const double* wr = layer.weights.values.data() + o * n_in;
                for (std::size_t k = 0; k < n_in; ++k) {
                    ur[k] += d * wr[k];
                }
            }
            const double* gr = gate.values.data() + b * n_in;
            for (std::size_t k = 0; k < n_in; ++k) {
                ur[k] *= gr[k];
            }
        }
        std::swap(delta, upstream);
    }
}

Gradients backward(const Model& model, const ForwardCache& cache, std::span<const int> labels,
                   std::span<const double> sample_weights, const std::optional<EqOddsTerm>& eo_term)
{
    Gradients grads = Gradients::zeros_like(model);
    backward_into(model, cache, labels, sample_weights, eo_term, grads);
    return grads;
}

void apply_sgd(Model& model, const Gradients& grads, double learning_rate)
{
    if (grads.layers.size() != model.layers.size()) {
        throw std::invalid_argument("sgd_step: gradient shape does not match model");
    }
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        Layer& layer = model.layers[l];
        const Layer& g = grads.layers[l];
        if (g.weights.values.size() != layer.weights.values.size() || g.biases.size() != layer.biases.size()) {
            throw std::invalid_argument("sgd_step: gradient shape does not match model");
        }
        for (std::size_t i = 0; i < layer.weights.values.size(); ++i) {
            layer.weights.values[i] -= learning_rate * g.weights.values[i];
        }
        for (std::size_t i = 0; i < layer.biases.size(); ++i) {
            layer.biases[i] -= learning_rate * g.biases[i];
        }
    }
}

Model sgd_step(const Model& model, const Gradients& grads, double learning_rate)
{
    Model next = model;
    apply_sgd(next, grads, learning_rate);
    return next;
}

}  // namespace fairvar
