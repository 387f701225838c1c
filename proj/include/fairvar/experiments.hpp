#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fairvar/data.hpp"
#include "fairvar/report.hpp"
#include "fairvar/training.hpp"

namespace fairvar {

enum class DecoupleMode { both_random, fixed_reshuffle, fixed_weight_init };

std::string decouple_mode_name(DecoupleMode mode);
DecoupleMode parse_decouple_mode(const std::string& name);

/// Shared inputs of every experiment. Seeds in `base` are ignored; each run
/// derives its own from `master_seed`.
struct ExperimentContext {
    Splits splits;
    TrainConfig base;
    std::uint64_t master_seed = 0;
    std::size_t jobs = 1;
};

struct RunSeeds {
    std::uint64_t weight_seed = 0;
    std::uint64_t shuffle_seed = 0;
};

/// Run i: weight = master + 2i, shuffle = master + 2i + 1, except that
/// fixed_reshuffle pins shuffle to master + 1 and fixed_weight_init pins
/// weight to master.
RunSeeds seeds_for_run(std::uint64_t master_seed, std::size_t run, DecoupleMode mode = DecoupleMode::both_random);

/// Calls fn(i) for i in [0, n) on up to `jobs` threads; results keep index order.
template <typename T>
std::vector<T> parallel_map(std::size_t n, std::size_t jobs, const std::function<T(std::size_t)>& fn);

/// Trains one run per seed pair (in parallel when ctx.jobs > 1).
std::vector<RunResult> train_runs(const ExperimentContext& ctx, std::span<const RunSeeds> seeds,
                                  const RunOptions& options);

// ---------------------------------------------------------------------------
// Decoupling weight initialization from data reshuffling.

ExperimentReport decouple_experiment(const ExperimentContext& ctx, std::size_t n_runs, DecoupleMode mode);

// ---------------------------------------------------------------------------
// Prediction changes across epochs.

struct PredictionChanges {
    /// Epoch k for each row of `cumulative`, covering (T1, T2].
    std::vector<int> epochs;
    /// Percent of each subgroup whose prediction changed at least once in
    /// (T1, k], canonical subgroup order.
    std::vector<std::array<double, kSubgroups>> cumulative;
    std::vector<double> overall;
};

/// `checkpoints` must hold consecutive epochs; the first one is T1.
PredictionChanges prediction_change_tracking(std::span<const Checkpoint> checkpoints, const Dataset& eval);

ExperimentReport changes_experiment(const ExperimentContext& ctx);

// ---------------------------------------------------------------------------
// MC-dropout uncertainty per subgroup.

struct UncertaintyProfile {
    /// Sorted per-example std for each subgroup (the ECDF support points).
    std::array<std::vector<double>, kSubgroups> sorted_std;

    double quantile(std::size_t subgroup, double q) const;
};

UncertaintyProfile uncertainty_profile(const Model& model, const Dataset& eval, std::size_t passes,
                                       double dropout_rate, std::uint64_t seed);

/// Trains one run with dropout at `dropout_rate`, then profiles its final model.
ExperimentReport uncertainty_experiment(const ExperimentContext& ctx, std::size_t passes, double dropout_rate);

// ---------------------------------------------------------------------------
// Checkpoint pools and fine-tuning on common batches.

struct PooledCheckpoint {
    std::size_t run_id = 0;
    int epoch = 0;
    Model model;
};

/// `n_checkpoints` drawn without replacement from epochs [T1, T2] of
/// `n_runs` both-random runs, ordered by (run, epoch).
std::vector<PooledCheckpoint> sample_checkpoints(const ExperimentContext& ctx, std::size_t n_runs,
                                                 std::size_t n_checkpoints);

struct DonorOrders {
    RunSeeds seeds;
    int best_epoch = 0;
    int worst_epoch = 0;
    double best_validation_ao = 0.0;
    double worst_validation_ao = 0.0;
    DataOrder best;
    DataOrder worst;
};

/// Trains a reference run and picks the epochs in [T1, T2] with the lowest
/// and highest validation average odds; their epoch orders are the donors.
DonorOrders select_donor_orders(const ExperimentContext& ctx, std::size_t run_index);

enum class BatchSelection { suffix, random };

/// For each b: fine-tune every checkpoint once over b batches of `donor`
/// (the last b, or b chosen at random with `seed`) and collect test AO.
/// Returned rows align with `b_values`; columns with `checkpoints`.
std::vector<std::vector<double>> suffix_finetune(std::span<const PooledCheckpoint> checkpoints,
                                                 const DataOrder& donor, std::span<const std::size_t> b_values,
                                                 const TrainConfig& config, const Splits& splits,
                                                 BatchSelection selection = BatchSelection::suffix,
                                                 std::uint64_t seed = 0);

ExperimentReport suffix_experiment(const ExperimentContext& ctx, std::span<const std::size_t> b_values,
                                   std::size_t n_runs, std::size_t n_checkpoints,
                                   BatchSelection selection = BatchSelection::suffix);

/// One full epoch of a fresh random order applied to every checkpoint;
/// reports AO before and after.
ExperimentReport common_order_experiment(const ExperimentContext& ctx, std::size_t n_runs,
                                         std::size_t n_checkpoints);

// ---------------------------------------------------------------------------
// Ratio-controlled manipulation.

struct SweepPoint {
    double ratio = 0.0;
    /// [checkpoint][subgroup] test accuracy after one epoch on the ratio order.
    std::vector<std::array<double, kSubgroups>> subgroup_accuracy;
    std::vector<double> overall_accuracy;
};

struct SweepResult {
    SweepPoint baseline;  // checkpoints without fine-tuning; ratio 0
    std::vector<SweepPoint> points;
};

SweepResult manipulate_sweep(std::span<const PooledCheckpoint> checkpoints, std::span<const double> ratios,
                             int varied_group, const TrainConfig& config, const Splits& splits, std::uint64_t seed);

/// A negative `varied_group` picks the group with the smallest positive subgroup.
ExperimentReport manipulate_experiment(const ExperimentContext& ctx, std::span<const double> ratios,
                                       int varied_group, std::size_t n_runs, std::size_t n_checkpoints);

// ---------------------------------------------------------------------------
// Single-run proxy and black swans.

struct Histogram {
    std::vector<double> edges;
    std::vector<std::size_t> counts_a;
    std::vector<std::size_t> counts_b;
};

struct ProxyResult {
    KsResult ks;
    Histogram histogram;
};

ProxyResult single_run_proxy(std::span<const double> multi_run_finals, std::span<const double> single_run_window,
                             std::size_t bins = 20);

/// `n_runs` runs give final AOs; run index `n_runs` gives the window sample.
ExperimentReport proxy_experiment(const ExperimentContext& ctx, std::size_t n_runs);

struct BlackSwanSurface {
    std::size_t t_max = 0;
    std::size_t s_max = 0;
    /// [t-1][s-1], averaged over repeats.
    std::vector<std::vector<double>> best_ao;
    std::vector<std::vector<double>> hausdorff_to_best;
};

BlackSwanSurface black_swan_surface(const ExperimentContext& ctx, std::size_t t_max, std::size_t s_max,
                                    std::size_t repeats);

/// Same surface from already-trained trajectories: `repeats` groups of
/// s_max trajectories each.
BlackSwanSurface black_swan_from_trajectories(std::span<const std::vector<Trajectory>> repeats, std::size_t t_max,
                                              std::size_t s_max);

ExperimentReport blackswan_experiment(const ExperimentContext& ctx, std::size_t t_max, std::size_t s_max,
                                      std::size_t repeats);

// ---------------------------------------------------------------------------
// Mitigation baselines against ratio-controlled orders.

enum class MitigationSetup { baseline, reweighing, eo_loss };
enum class PostOrder { none, equal_order, adv_order };

struct MitigationCell {
    MitigationSetup setup = MitigationSetup::baseline;
    PostOrder post = PostOrder::none;
    std::vector<double> f1;
    std::vector<double> avg_odds;
};

std::vector<MitigationCell> mitigation_compare(const ExperimentContext& ctx, std::span<const MitigationSetup> setups,
                                               std::size_t n_seeds);

ExperimentReport mitigation_experiment(const ExperimentContext& ctx, std::span<const MitigationSetup> setups,
                                       std::size_t n_seeds);

std::string mitigation_setup_name(MitigationSetup setup);
std::string post_order_name(PostOrder post);

}  // namespace fairvar

#include "fairvar/detail/parallel.hpp"
