#include "fairvar/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "fairvar/errors.hpp"

namespace fairvar {

std::vector<double> Trajectory::window(Metric metric, int first, int last) const
{
    if (first > last || records.empty() || first < records.front().epoch || last > records.back().epoch) {
        throw std::out_of_range("trajectory window [" + std::to_string(first) + ", " + std::to_string(last) +
                                "] is outside the recorded epochs");
    }
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(last - first + 1));
    for (const auto& rec : records) {
        if (rec.epoch >= first && rec.epoch <= last) {
            values.push_back(rec.value(metric));
        }
    }
    return values;
}

const MetricRecord& Trajectory::at_epoch(int epoch) const
{
    for (const auto& rec : records) {
        if (rec.epoch == epoch) {
            return rec;
        }
    }
    throw std::out_of_range("trajectory has no record for epoch " + std::to_string(epoch));
}

const MetricRecord& Trajectory::final_record() const
{
    if (records.empty()) {
        throw std::out_of_range("trajectory is empty");
    }
    return records.back();
}

double mean(std::span<const double> values)
{
    if (values.empty()) {
        throw std::invalid_argument("mean: empty sample");
    }
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    return sum / static_cast<double>(values.size());
}

double population_variance(std::span<const double> values)
{
    if (values.size() < 2) {
        throw std::invalid_argument("variance: at least two values are required");
    }
    const double m = mean(values);
    double ss = 0.0;
    for (double v : values) {
        ss += (v - m) * (v - m);
    }
    return ss / static_cast<double>(values.size());
}

double var_across_runs(std::span<const double> final_values) { return population_variance(final_values); }

double var_across_epochs(const Trajectory& trajectory, int first, int last, Metric metric)
{
    return population_variance(trajectory.window(metric, first, last));
}

double quantile(std::span<const double> values, double q)
{
    if (values.empty()) {
        throw std::invalid_argument("quantile: empty sample");
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double median(std::span<const double> values) { return quantile(values, 0.5); }

Summary summarize(std::span<const double> values)
{
    Summary s;
    s.median = quantile(values, 0.5);
    s.q1 = quantile(values, 0.25);
    s.q3 = quantile(values, 0.75);
    s.min = *std::min_element(values.begin(), values.end());
    s.max = *std::max_element(values.begin(), values.end());
    return s;
}

double pearson(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size() || x.size() < 2) {
        throw std::invalid_argument("pearson: samples must have equal length of at least 2");
    }
    const double mx = mean(x);
    const double my = mean(y);
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw UndefinedMetricError("pearson: a sample has zero variance");
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double mean_pairwise_pearson(std::span<const Trajectory> trajectories, Metric metric, int first, int last)
{
    if (trajectories.size() < 2) {
        throw std::invalid_argument("mean_pairwise_pearson: at least two runs are required");
    }
    std::vector<std::vector<double>> series;
    series.reserve(trajectories.size());
    for (const auto& traj : trajectories) {
        series.push_back(traj.window(metric, first, last));
    }
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < series.size(); ++i) {
        for (std::size_t j = i + 1; j < series.size(); ++j) {
            total += pearson(series[i], series[j]);
            ++pairs;
        }
    }
    return total / static_cast<double>(pairs);
}

Ecdf::Ecdf(std::span<const double> sample) : sorted_(sample.begin(), sample.end())
{
    if (sorted_.empty()) {
        throw std::invalid_argument("ecdf: empty sample");
    }
    std::sort(sorted_.begin(), sorted_.end());
}

double Ecdf::operator()(double x) const noexcept
{
    const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
    return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
}

double kolmogorov_q(double lambda)
{
    constexpr double tiny = std::numeric_limits<double>::min();
    if (lambda <= 0.0) {
        return 1.0;
    }
    double sum = 0.0;
    for (int k = 1; k < 1000000; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1 ? term : -term);
        if (term < 1e-12) {
            break;
        }
    }
    return std::clamp(2.0 * sum, tiny, 1.0);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b)
{
    if (a.empty() || b.empty()) {
        throw std::invalid_argument("ks_two_sample: both samples must be nonempty");
    }
    std::vector<double> sa(a.begin(), a.end());
    std::vector<double> sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());

    const double na = static_cast<double>(sa.size());
    const double nb = static_cast<double>(sb.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double d = 0.0;
    while (i < sa.size() && j < sb.size()) {
        const double x = std::min(sa[i], sb[j]);
        while (i < sa.size() && sa[i] == x) {
            ++i;
        }
        while (j < sb.size() && sb[j] == x) {
            ++j;
        }
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }

    KsResult result;
    result.statistic = d;
    const double ne = na * nb / (na + nb);
    const double root = std::sqrt(ne);
    result.p_value = kolmogorov_q((root + 0.12 + 0.11 / root) * d);
    return result;
}

bool dominates(const ParetoPoint& a, const ParetoPoint& b) noexcept
{
    return a.fairness <= b.fairness && a.performance >= b.performance &&
           (a.fairness < b.fairness || a.performance > b.performance);
}

std::vector<ParetoPoint> pareto_front(std::span<const ParetoPoint> points)
{
    std::vector<ParetoPoint> front;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        bool keep = true;
        for (const auto& q : points) {
            if (dominates(q, p)) {
                keep = false;
                break;
            }
        }
        for (const auto& f : front) {
            if (f.fairness == p.fairness && f.performance == p.performance) {
                keep = false;
                break;
            }
        }
        if (keep) {
            front.push_back(p);
        }
    }
    return front;
}

namespace {

double directed_hausdorff(std::span<const ParetoPoint> from, std::span<const ParetoPoint> to)
{
    double worst = 0.0;
    for (const auto& p : from) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : to) {
            best = std::min(best, std::hypot(p.fairness - q.fairness, p.performance - q.performance));
        }
        worst = std::max(worst, best);
    }
    return worst;
}

}  // namespace

double hausdorff(std::span<const ParetoPoint> a, std::span<const ParetoPoint> b)
{
    if (a.empty() || b.empty()) {
        throw std::invalid_argument("hausdorff: both sets must be nonempty");
    }
    return std::max(directed_hausdorff(a, b), directed_hausdorff(b, a));
}

}  // namespace fairvar
