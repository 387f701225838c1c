#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fairvar/matrix.hpp"

namespace fairvar {

// Subgroups are indexed as (a=0,y=1), (a=0,y=0), (a=1,y=1), (a=1,y=0).
// Sensitive value 0 plays the role of the under-represented group ("F").
inline constexpr std::size_t kSubgroups = 4;

constexpr std::size_t subgroup_index(int sensitive, int label) noexcept
{
    return static_cast<std::size_t>(2 * sensitive + (1 - label));
}
constexpr int subgroup_sensitive(std::size_t index) noexcept { return static_cast<int>(index / 2); }
constexpr int subgroup_label(std::size_t index) noexcept { return 1 - static_cast<int>(index % 2); }

/// Tie-break order for largest-remainder apportionment: F+, M+, M-, F-.
inline constexpr std::array<std::size_t, kSubgroups> kSubgroupPriority = {0, 2, 3, 1};

inline constexpr std::array<const char*, kSubgroups> kSubgroupNames = {"a0y1", "a0y0", "a1y1", "a1y0"};

using SubgroupCounts = std::array<std::size_t, kSubgroups>;

struct Dataset {
    Matrix features;
    std::vector<int> labels;
    std::vector<int> sensitive;
    std::vector<std::string> columns;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t dim() const noexcept { return features.cols; }
    std::size_t subgroup(std::size_t row) const noexcept { return subgroup_index(sensitive[row], labels[row]); }

    SubgroupCounts subgroup_counts() const noexcept;
    Dataset subset(std::span<const std::size_t> rows) const;

    /// Throws DataError when n == 0, shapes disagree, a cell is non-finite or
    /// a label/sensitive value is not binary.
    void validate() const;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// A permutation of [0, n).
struct DataOrder {
    std::vector<std::size_t> indices;

    std::size_t size() const noexcept { return indices.size(); }
    bool is_permutation() const;

    friend bool operator==(const DataOrder&, const DataOrder&) = default;
};

struct Splits {
    Dataset train;
    Dataset validation;
    Dataset test;
};

/// Largest-remainder apportionment of `total` units over `shares`
/// (nonnegative, summing to 1). Remainder ties go to the earlier entry of
/// `priority`; an empty priority means index order.
std::vector<std::size_t> apportion(std::size_t total, std::span<const double> shares,
                                   std::span<const std::size_t> priority = {});

// CSV ingestion/export. Comma separated, header row, decimal-point reals.
Dataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                 const std::string& sensitive_column);
Dataset parse_csv(const std::string& text, const std::string& label_column, const std::string& sensitive_column);
std::string to_csv(const Dataset& data, const std::string& label_column = "label",
                   const std::string& sensitive_column = "sensitive");

struct SynthSpec {
    std::size_t n = 20000;
    std::size_t dims = 10;
    /// Subgroup shares in (F+, M+, M-, F-) order, i.e. (a0y1, a1y1, a1y0, a0y0).
    std::array<double, kSubgroups> proportions = {0.1651, 0.2455, 0.2816, 0.3078};
    double separation = 2.0;
    double group_shift = 0.5;
    double noise = 1.0;
    std::uint64_t seed = 0;
};

/// Gaussian subgroups with means separation*y*e1 + group_shift*a*e2.
Dataset synth_generate(const SynthSpec& spec);

/// One shuffle with the split seed, then contiguous cuts sized by
/// largest-remainder apportionment of n over the ratios.
Splits split(const Dataset& data, const std::array<double, 3>& ratios, std::uint64_t seed);

DataOrder reference_order(std::size_t n, std::uint64_t shuffle_seed);

/// Per-epoch reshuffle of the reference order, seeded by the epoch number.
DataOrder epoch_order(const DataOrder& reference, int epoch);

struct RatioSpec {
    int varied_group = 0;
    /// Positives : negatives inside the varied group.
    double pos_to_neg = 1.0;
};

/// A ratio-controlled order together with how it was assembled.
struct RatioOrder {
    DataOrder order;
    std::size_t prefix_size = 0;
    std::size_t suffix_batches = 0;
    /// Rows drawn from each subgroup for every suffix batch.
    SubgroupCounts batch_counts{};
    std::array<double, kSubgroups> target_shares{};
};

/// Leftover rows shuffled as the prefix, followed by batches whose subgroup
/// composition matches the target ratio exactly until a pool runs dry.
RatioOrder build_ratio_order(const Dataset& train, const RatioSpec& spec, std::size_t batch_size,
                             std::uint64_t seed);

/// Sensitive group whose positive subgroup is the smallest.
int minority_positive_group(const Dataset& train);

/// 1:1 within the minority-positive group.
RatioOrder equal_order(const Dataset& train, std::size_t batch_size, std::uint64_t seed);
/// 1:3 within the minority-positive group.
RatioOrder adv_order(const Dataset& train, std::size_t batch_size, std::uint64_t seed);

/// w(a,y) = N_a N_y / (N N_{a,y}) for each subgroup, canonical order.
std::array<double, kSubgroups> reweighing_factors(const Dataset& train);
std::vector<double> reweighing_weights(const Dataset& train);

}  // namespace fairvar
