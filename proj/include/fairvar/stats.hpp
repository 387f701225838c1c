#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fairvar/metrics.hpp"

namespace fairvar {

/// Per-epoch metric records of one training run.
struct Trajectory {
    std::size_t run_id = 0;
    std::uint64_t weight_seed = 0;
    std::uint64_t shuffle_seed = 0;
    std::vector<MetricRecord> records;

    /// Values of `metric` for epochs first..last inclusive. Throws
    /// std::out_of_range when the window is not covered by the records.
    std::vector<double> window(Metric metric, int first, int last) const;
    const MetricRecord& at_epoch(int epoch) const;
    const MetricRecord& final_record() const;
};

/// Population variance (divide by m); needs at least two values.
double population_variance(std::span<const double> values);
double var_across_runs(std::span<const double> final_values);
double var_across_epochs(const Trajectory& trajectory, int first, int last, Metric metric);

double mean(std::span<const double> values);

/// Linear-interpolated quantile (q in [0,1]) of an unsorted sample.
double quantile(std::span<const double> values, double q);
double median(std::span<const double> values);

/// Median, quartiles and range of a sample.
struct Summary {
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double min = 0.0;
    double max = 0.0;

    double iqr() const noexcept { return q3 - q1; }
};
Summary summarize(std::span<const double> values);

/// Sample Pearson correlation. Throws UndefinedMetricError on zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

/// Mean over all unordered run pairs of the Pearson correlation of their
/// metric-vs-epoch series on [first, last].
double mean_pairwise_pearson(std::span<const Trajectory> trajectories, Metric metric, int first, int last);

/// Empirical CDF: fraction of the sample <= x.
class Ecdf {
public:
    explicit Ecdf(std::span<const double> sample);

    double operator()(double x) const noexcept;
    const std::vector<double>& sorted() const noexcept { return sorted_; }

private:
    std::vector<double> sorted_;
};

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Kolmogorov tail probability Q(lambda), clamped to (0, 1].
double kolmogorov_q(double lambda);

struct ParetoPoint {
    double fairness = 0.0;     // lower is better
    double performance = 0.0;  // higher is better
    std::size_t run_id = 0;
    int epoch = 0;
};

bool dominates(const ParetoPoint& a, const ParetoPoint& b) noexcept;

/// Non-dominated subset; coordinate duplicates are kept once (first seen).
std::vector<ParetoPoint> pareto_front(std::span<const ParetoPoint> points);

/// Symmetric Hausdorff distance, Euclidean in (fairness, performance).
double hausdorff(std::span<const ParetoPoint> a, std::span<const ParetoPoint> b);

}  // namespace fairvar
