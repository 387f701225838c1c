// Independent reference implementations used as test oracles. None of
// these call into the library's own arithmetic for the quantity checked.
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "fairvar/nn.hpp"

namespace oracle {

/// The published SplitMix64 step.
inline std::uint64_t splitmix64(std::uint64_t& x)
{
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

struct BruteMetrics {
    long tp[2] = {0, 0};
    long fp[2] = {0, 0};
    long tn[2] = {0, 0};
    long fn[2] = {0, 0};
    std::optional<double> f1;
    std::optional<double> avg_odds;
    std::optional<double> eopp;
    std::optional<double> dp;
    std::optional<double> accuracy;
    std::optional<double> subgroup_acc[4];
};

/// Row-by-row tally and textbook formulas, all in percent.
inline BruteMetrics brute_metrics(const std::vector<int>& pred, const std::vector<int>& label,
                                  const std::vector<int>& group)
{
    BruteMetrics m;
    std::map<std::pair<int, int>, std::pair<long, long>> cell;  // (a, y) -> (correct, total)
    long correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const int a = group[i];
        if (pred[i] == 1 && label[i] == 1) {
            m.tp[a]++;
        } else if (pred[i] == 1 && label[i] == 0) {
            m.fp[a]++;
        } else if (pred[i] == 0 && label[i] == 0) {
            m.tn[a]++;
        } else {
            m.fn[a]++;
        }
        auto& c = cell[{a, label[i]}];
        c.second++;
        if (pred[i] == label[i]) {
            c.first++;
            correct++;
        }
    }
    const long TP = m.tp[0] + m.tp[1];
    const long FP = m.fp[0] + m.fp[1];
    const long FN = m.fn[0] + m.fn[1];
    if (2 * TP + FP + FN > 0) {
        m.f1 = 100.0 * 2.0 * TP / double(2 * TP + FP + FN);
    }
    if (!pred.empty()) {
        m.accuracy = 100.0 * correct / double(pred.size());
    }
    const bool pos_ok = m.tp[0] + m.fn[0] > 0 && m.tp[1] + m.fn[1] > 0;
    const bool neg_ok = m.fp[0] + m.tn[0] > 0 && m.fp[1] + m.tn[1] > 0;
    if (pos_ok) {
        const double tpr0 = double(m.tp[0]) / double(m.tp[0] + m.fn[0]);
        const double tpr1 = double(m.tp[1]) / double(m.tp[1] + m.fn[1]);
        m.eopp = 100.0 * std::fabs(tpr0 - tpr1);
        if (neg_ok) {
            const double fpr0 = double(m.fp[0]) / double(m.fp[0] + m.tn[0]);
            const double fpr1 = double(m.fp[1]) / double(m.fp[1] + m.tn[1]);
            m.avg_odds = 100.0 * 0.5 * (std::fabs(tpr0 - tpr1) + std::fabs(fpr0 - fpr1));
        }
    }
    const long c0 = m.tp[0] + m.fp[0];
    const long c1 = m.tp[1] + m.fp[1];
    if (c0 > 0 && c1 > 0) {
        m.dp = 100.0 * (1.0 - std::min(double(c0) / c1, double(c1) / c0));
    }
    const int order[4][2] = {{0, 1}, {0, 0}, {1, 1}, {1, 0}};
    for (int s = 0; s < 4; ++s) {
        auto it = cell.find({order[s][0], order[s][1]});
        if (it != cell.end() && it->second.second > 0) {
            m.subgroup_acc[s] = 100.0 * it->second.first / double(it->second.second);
        }
    }
    return m;
}

/// Loss evaluated through the library's forward pass for a parameter
/// perturbation; the dropout mask is replayed from a copied generator.
inline double loss_at(const fairvar::Model& model, const fairvar::Matrix& x, const std::vector<int>& y,
                      const std::vector<double>& w, const std::optional<fairvar::EqOddsTerm>& eo, double rate,
                      std::uint64_t mask_seed)
{
    std::optional<fairvar::Prng> rng;
    if (rate > 0.0) {
        rng = fairvar::Prng(mask_seed);
    }
    const auto cache = fairvar::forward(model, x, rate, rng ? &*rng : nullptr);
    return fairvar::loss(cache.logits, y, w, eo);
}

/// Largest relative error between analytic and central-difference
/// gradients over every parameter. Relative error uses max(|a|, |n|, 1e-5).
inline double max_gradient_error(const fairvar::Model& model, const fairvar::Matrix& x, const std::vector<int>& y,
                                 const std::vector<double>& w, const std::optional<fairvar::EqOddsTerm>& eo,
                                 double rate, std::uint64_t mask_seed)
{
    std::optional<fairvar::Prng> rng;
    if (rate > 0.0) {
        rng = fairvar::Prng(mask_seed);
    }
    const auto cache = fairvar::forward(model, x, rate, rng ? &*rng : nullptr);
    const auto grads = fairvar::backward(model, cache, y, w, eo);

    const double eps = 1e-5;
    double worst = 0.0;
    fairvar::Model probe = model;
    auto check = [&](double& param, double analytic) {
        const double saved = param;
        param = saved + eps;
        const double up = loss_at(probe, x, y, w, eo, rate, mask_seed);
        param = saved - eps;
        const double down = loss_at(probe, x, y, w, eo, rate, mask_seed);
        param = saved;
        const double numeric = (up - down) / (2.0 * eps);
        const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-5});
        worst = std::max(worst, std::fabs(analytic - numeric) / denom);
    };
    for (std::size_t l = 0; l < probe.layers.size(); ++l) {
        auto& layer = probe.layers[l];
        for (std::size_t k = 0; k < layer.weights.values.size(); ++k) {
            check(layer.weights.values[k], grads.layers[l].weights.values[k]);
        }
        for (std::size_t k = 0; k < layer.biases.size(); ++k) {
            check(layer.biases[k], grads.layers[l].biases[k]);
        }
    }
    return worst;
}

}  // namespace oracle

namespace oracle {

struct GradientCase {
    const char* name;
    bool weighted;
    bool eo;
    double dropout;
};

inline constexpr GradientCase kGradientCases[] = {
    {"plain", false, false, 0.0},     {"weighted", true, false, 0.0},  {"eo_penalty", false, true, 0.0},
    {"dropout_fixed_mask", false, false, 0.3}, {"weighted_eo_dropout", true, true, 0.25},
};

/// Worst relative gradient error over 10 random tiny nets for one case.
inline double gradient_case_error(const GradientCase& gc)
{
    double worst = 0.0;
    for (std::uint64_t net = 0; net < 10; ++net) {
        fairvar::Prng rng = fairvar::Prng::from(1000 + net, 77);
        const std::size_t in = 2 + rng.bounded(4);
        std::vector<std::size_t> hidden(1 + rng.bounded(2));
        for (auto& h : hidden) {
            h = 2 + rng.bounded(4);
        }
        fairvar::Model model = fairvar::init_model(in, hidden, 500 + net);
        for (auto& layer : model.layers) {
            for (auto& b : layer.biases) {
                b = 0.2 * rng.gaussian();
            }
        }
        const std::size_t n = 8;
        fairvar::Matrix x;
        x.resize(n, in);
        for (auto& v : x.values) {
            v = rng.gaussian();
        }
        std::vector<int> y(n);
        std::vector<int> a(n);
        std::vector<double> w;
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = static_cast<int>(i % 2);
            a[i] = static_cast<int>((i / 2) % 2);
            if (gc.weighted) {
                w.push_back(0.5 + rng.uniform());
            }
        }
        std::optional<fairvar::EqOddsTerm> eo;
        if (gc.eo) {
            eo = fairvar::EqOddsTerm{a, 0.7};
        }
        worst = std::max(worst, max_gradient_error(model, x, y, w, eo, gc.dropout, 9000 + net));
    }
    return worst;
}

}  // namespace oracle
