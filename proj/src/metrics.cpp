#include "fairvar/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "fairvar/errors.hpp"

namespace fairvar {

namespace {

double ratio(std::size_t num, std::size_t den) { return static_cast<double>(num) / static_cast<double>(den); }

struct Rates {
    double tpr[2];
    double fpr[2];
};

void require_positives(const GroupConfusion& conf, const char* metric)
{
    for (int a = 0; a < 2; ++a) {
        if (conf.groups[a].positives() == 0) {
            throw UndefinedMetricError(std::string(metric) + ": group " + std::to_string(a) + " has no positives");
        }
    }
}

template <typename F>
double or_nan(F&& f)
{
    try {
        return f();
    } catch (const UndefinedMetricError&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

}  // namespace

GroupConfusion confusion(std::span<const int> preds, std::span<const int> labels, std::span<const int> sensitive)
{
    if (preds.size() != labels.size() || preds.size() != sensitive.size()) {
        throw std::invalid_argument("confusion: predictions, labels and groups differ in length");
    }
    if (preds.empty()) {
        throw std::invalid_argument("confusion: no rows");
    }
    GroupConfusion conf;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        GroupCounts& g = conf.groups[sensitive[i] != 0 ? 1 : 0];
        if (labels[i] == 1) {
            (preds[i] == 1 ? g.tp : g.fn) += 1;
        } else {
            (preds[i] == 1 ? g.fp : g.tn) += 1;
        }
    }
    return conf;
}

double f1(const GroupConfusion& conf)
{
    const std::size_t tp = conf.groups[0].tp + conf.groups[1].tp;
    const std::size_t p = conf.groups[0].positives() + conf.groups[1].positives();
    const std::size_t pp = conf.groups[0].predicted_positive() + conf.groups[1].predicted_positive();
    if (p + pp == 0) {
        throw UndefinedMetricError("f1: no positives and no positive predictions");
    }
    return 100.0 * ratio(2 * tp, p + pp);
}

double average_odds(const GroupConfusion& conf)
{
    require_positives(conf, "average_odds");
    for (int a = 0; a < 2; ++a) {
        if (conf.groups[a].negatives() == 0) {
            throw UndefinedMetricError("average_odds: group " + std::to_string(a) + " has no negatives");
        }
    }
    const auto& g0 = conf.groups[0];
    const auto& g1 = conf.groups[1];
    const double tpr_gap = std::abs(ratio(g0.tp, g0.positives()) - ratio(g1.tp, g1.positives()));
    const double fpr_gap = std::abs(ratio(g0.fp, g0.negatives()) - ratio(g1.fp, g1.negatives()));
    return 100.0 * (tpr_gap + fpr_gap) / 2.0;
}

double equal_opportunity(const GroupConfusion& conf)
{
    require_positives(conf, "equal_opportunity");
    const auto& g0 = conf.groups[0];
    const auto& g1 = conf.groups[1];
    return 100.0 * std::abs(ratio(g0.tp, g0.positives()) - ratio(g1.tp, g1.positives()));
}

double demographic_parity(const GroupConfusion& conf)
{
    const std::size_t c0 = conf.groups[0].predicted_positive();
    const std::size_t c1 = conf.groups[1].predicted_positive();
    if (c0 == 0 || c1 == 0) {
        throw UndefinedMetricError("demographic_parity: a group has no positive predictions");
    }
    return 100.0 * (1.0 - std::min(ratio(c0, c1), ratio(c1, c0)));
}

double accuracy(const GroupConfusion& conf)
{
    if (conf.total() == 0) {
        throw UndefinedMetricError("accuracy: no rows");
    }
    const std::size_t correct = conf.groups[0].tp + conf.groups[0].tn + conf.groups[1].tp + conf.groups[1].tn;
    return 100.0 * ratio(correct, conf.total());
}

std::array<double, kSubgroups> subgroup_accuracy(const GroupConfusion& conf)
{
    std::array<double, kSubgroups> acc{};
    for (int a = 0; a < 2; ++a) {
        const auto& g = conf.groups[a];
        if (g.positives() == 0 || g.negatives() == 0) {
            throw UndefinedMetricError("subgroup_accuracy: group " + std::to_string(a) + " lacks a label value");
        }
        acc[subgroup_index(a, 1)] = 100.0 * ratio(g.tp, g.positives());
        acc[subgroup_index(a, 0)] = 100.0 * ratio(g.tn, g.negatives());
    }
    return acc;
}

std::array<double, kSubgroups> subgroup_accuracy(std::span<const int> preds, std::span<const int> labels,
                                                 std::span<const int> sensitive)
{
    return subgroup_accuracy(confusion(preds, labels, sensitive));
}

std::string_view metric_name(Metric metric) noexcept
{
    switch (metric) {
    case Metric::f1: return "f1";
    case Metric::avg_odds: return "avg_odds";
    case Metric::eopp: return "eopp";
    case Metric::dp: return "dp";
    case Metric::accuracy: return "acc";
    }
    return "?";
}

Metric parse_metric(std::string_view name)
{
    for (Metric m : {Metric::f1, Metric::avg_odds, Metric::eopp, Metric::dp, Metric::accuracy}) {
        if (metric_name(m) == name) {
            return m;
        }
    }
    throw std::invalid_argument("unknown metric '" + std::string(name) + "'");
}

double MetricRecord::value(Metric metric) const noexcept
{
    switch (metric) {
    case Metric::f1: return f1;
    case Metric::avg_odds: return avg_odds;
    case Metric::eopp: return eopp;
    case Metric::dp: return dp;
    case Metric::accuracy: return accuracy;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

MetricRecord make_record(int epoch, std::span<const int> preds, std::span<const int> labels,
                         std::span<const int> sensitive)
{
    const GroupConfusion conf = confusion(preds, labels, sensitive);
    MetricRecord rec;
    rec.epoch = epoch;
    rec.f1 = or_nan([&] { return fairvar::f1(conf); });
    rec.avg_odds = or_nan([&] { return average_odds(conf); });
    rec.eopp = or_nan([&] { return equal_opportunity(conf); });
    rec.dp = or_nan([&] { return demographic_parity(conf); });
    rec.accuracy = fairvar::accuracy(conf);
    for (int a = 0; a < 2; ++a) {
        const auto& g = conf.groups[a];
        const double nan = std::numeric_limits<double>::quiet_NaN();
        rec.subgroup_accuracy[subgroup_index(a, 1)] = g.positives() == 0 ? nan : 100.0 * ratio(g.tp, g.positives());
        rec.subgroup_accuracy[subgroup_index(a, 0)] = g.negatives() == 0 ? nan : 100.0 * ratio(g.tn, g.negatives());
    }
    return rec;
}

}  // namespace fairvar
