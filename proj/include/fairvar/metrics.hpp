#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>

#include "fairvar/data.hpp"

namespace fairvar {

struct GroupCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    std::size_t positives() const noexcept { return tp + fn; }
    std::size_t negatives() const noexcept { return fp + tn; }
    std::size_t predicted_positive() const noexcept { return tp + fp; }
    std::size_t total() const noexcept { return tp + fp + tn + fn; }

    friend bool operator==(const GroupCounts&, const GroupCounts&) = default;
};

/// Confusion counts split by sensitive value.
struct GroupConfusion {
    std::array<GroupCounts, 2> groups{};

    std::size_t total() const noexcept { return groups[0].total() + groups[1].total(); }

    friend bool operator==(const GroupConfusion&, const GroupConfusion&) = default;
};

GroupConfusion confusion(std::span<const int> preds, std::span<const int> labels, std::span<const int> sensitive);

// All metrics are percentages. Each throws UndefinedMetricError when its
// denominator is zero on the given counts.
double f1(const GroupConfusion& conf);
double average_odds(const GroupConfusion& conf);
double equal_opportunity(const GroupConfusion& conf);
double demographic_parity(const GroupConfusion& conf);
double accuracy(const GroupConfusion& conf);

/// Per-subgroup accuracy in canonical subgroup order.
std::array<double, kSubgroups> subgroup_accuracy(const GroupConfusion& conf);
std::array<double, kSubgroups> subgroup_accuracy(std::span<const int> preds, std::span<const int> labels,
                                                 std::span<const int> sensitive);

enum class Metric { f1, avg_odds, eopp, dp, accuracy };

std::string_view metric_name(Metric metric) noexcept;
Metric parse_metric(std::string_view name);

/// Test-set evaluation at the end of one epoch. A metric that is undefined
/// for this epoch's predictions is stored as NaN.
struct MetricRecord {
    int epoch = 0;
    double f1 = 0.0;
    double avg_odds = 0.0;
    double eopp = 0.0;
    double dp = 0.0;
    double accuracy = 0.0;
    std::array<double, kSubgroups> subgroup_accuracy{};

    double value(Metric metric) const noexcept;

    friend bool operator==(const MetricRecord&, const MetricRecord&) = default;
};

MetricRecord make_record(int epoch, std::span<const int> preds, std::span<const int> labels,
                         std::span<const int> sensitive);

}  // namespace fairvar
