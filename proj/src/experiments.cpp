#include "fairvar/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "fairvar/errors.hpp"

namespace fairvar {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Stream labels for experiment-level draws (pool sampling, batch picks).
constexpr std::uint64_t kPoolStream = 5;
constexpr std::uint64_t kBatchPickStream = 6;

double or_nan(const std::function<double()>& f)
{
    try {
        return f();
    } catch (const UndefinedMetricError&) {
        return kNaN;
    }
}

std::vector<double> finite_only(std::span<const double> values)
{
    std::vector<double> out;
    for (double v : values) {
        if (std::isfinite(v)) {
            out.push_back(v);
        }
    }
    return out;
}

nlohmann::json seeds_json(const RunSeeds& s, std::size_t run_id)
{
    return {{"run_id", run_id}, {"weight_seed", s.weight_seed}, {"shuffle_seed", s.shuffle_seed}};
}

nlohmann::json checkpoints_json(std::span<const PooledCheckpoint> pool)
{
    nlohmann::json out = nlohmann::json::array();
    for (const auto& c : pool) {
        out.push_back({{"run_id", c.run_id}, {"epoch", c.epoch}});
    }
    return out;
}

/// Fine-tuning keeps the parent run's hyperparameters; dropout draws use
/// the epoch after the last trained one.
int finetune_epoch(const TrainConfig& config) { return config.epochs + 1; }

void require_window(const TrainConfig& config)
{
    if (config.epochs < 1 || config.window_first < 1 || config.window_first > config.window_last ||
        config.window_last > config.epochs) {
        throw ConfigError({"record_window: requires 1 <= T1 <= T2 <= epochs"});
    }
}

}  // namespace

std::string decouple_mode_name(DecoupleMode mode)
{
    switch (mode) {
    case DecoupleMode::both_random: return "both_random";
    case DecoupleMode::fixed_reshuffle: return "fixed_reshuffle";
    case DecoupleMode::fixed_weight_init: return "fixed_weight_init";
    }
    return "?";
}

DecoupleMode parse_decouple_mode(const std::string& name)
{
    for (auto m : {DecoupleMode::both_random, DecoupleMode::fixed_reshuffle, DecoupleMode::fixed_weight_init}) {
        if (decouple_mode_name(m) == name) {
            return m;
        }
    }
    throw std::invalid_argument("unknown decouple mode '" + name + "'");
}

RunSeeds seeds_for_run(std::uint64_t master_seed, std::size_t run, DecoupleMode mode)
{
    RunSeeds s{master_seed + 2 * run, master_seed + 2 * run + 1};
    if (mode == DecoupleMode::fixed_reshuffle) {
        s.shuffle_seed = master_seed + 1;
    } else if (mode == DecoupleMode::fixed_weight_init) {
        s.weight_seed = master_seed;
    }
    return s;
}

std::vector<RunResult> train_runs(const ExperimentContext& ctx, std::span<const RunSeeds> seeds,
                                  const RunOptions& options)
{
    ctx.base.validate(ctx.splits.train.size());
    return parallel_map<RunResult>(seeds.size(), ctx.jobs, [&](std::size_t i) {
        TrainConfig config = ctx.base;
        config.weight_seed = seeds[i].weight_seed;
        config.shuffle_seed = seeds[i].shuffle_seed;
        RunOptions opts = options;
        opts.run_id = i;
        return train_run(ctx.splits, config, opts);
    });
}

// ---------------------------------------------------------------------------

ExperimentReport decouple_experiment(const ExperimentContext& ctx, std::size_t n_runs, DecoupleMode mode)
{
    if (n_runs < 2) {
        throw std::invalid_argument("decouple_experiment: at least two runs are required");
    }
    const TrainConfig& cfg = ctx.base;
    require_window(cfg);

    std::vector<RunSeeds> seeds;
    for (std::size_t i = 0; i < n_runs; ++i) {
        seeds.push_back(seeds_for_run(ctx.master_seed, i, mode));
    }
    auto runs = train_runs(ctx, seeds, {});

    ExperimentReport report;
    report.name = "decouple";
    report.parameters = {{"mode", decouple_mode_name(mode)},
                         {"n_runs", n_runs},
                         {"master_seed", ctx.master_seed},
                         {"window", {cfg.window_first, cfg.window_last}}};
    report.parameters["runs"] = nlohmann::json::array();
    for (std::size_t i = 0; i < n_runs; ++i) {
        report.parameters["runs"].push_back(seeds_json(seeds[i], i));
        report.trajectories.push_back(std::move(runs[i].trajectory));
    }
    const auto& trajs = report.trajectories;

    Table finals({"run_id", "epoch", "f1", "avg_odds", "eopp", "dp", "acc"});
    std::vector<double> final_f1;
    std::vector<double> final_ao;
    for (const auto& t : trajs) {
        const auto& r = t.final_record();
        finals.add_row({static_cast<double>(t.run_id), static_cast<double>(r.epoch), r.f1, r.avg_odds, r.eopp, r.dp,
                        r.accuracy});
        final_f1.push_back(r.f1);
        final_ao.push_back(r.avg_odds);
    }
    report.tables["finals"] = std::move(finals);

    Table bands({"epoch", "ao_median", "ao_q1", "ao_q3", "ao_min", "ao_max", "f1_median", "f1_q1", "f1_q3",
                 "f1_min", "f1_max"});
    for (int e = cfg.window_first; e <= cfg.window_last; ++e) {
        std::vector<double> ao;
        std::vector<double> f;
        for (const auto& t : trajs) {
            ao.push_back(t.at_epoch(e).avg_odds);
            f.push_back(t.at_epoch(e).f1);
        }
        const auto ao_clean = finite_only(ao);
        const auto f_clean = finite_only(f);
        std::vector<double> row{static_cast<double>(e)};
        for (const auto* sample : {&ao_clean, &f_clean}) {
            if (sample->empty()) {
                row.insert(row.end(), 5, kNaN);
            } else {
                const Summary s = summarize(*sample);
                row.insert(row.end(), {s.median, s.q1, s.q3, s.min, s.max});
            }
        }
        bands.add_row(std::move(row));
    }
    report.tables["bands"] = std::move(bands);

    auto& summary = report.summary;
    summary["var_runs_f1"] = var_across_runs(final_f1);
    summary["var_runs_ao"] = var_across_runs(final_ao);
    std::vector<double> ve_f1;
    std::vector<double> ve_ao;
    for (const auto& t : trajs) {
        ve_f1.push_back(var_across_epochs(t, cfg.window_first, cfg.window_last, Metric::f1));
        ve_ao.push_back(var_across_epochs(t, cfg.window_first, cfg.window_last, Metric::avg_odds));
    }
    summary["var_epochs_f1"] = mean(ve_f1);
    summary["var_epochs_ao"] = mean(ve_ao);
    summary["pearson_ao"] =
        or_nan([&] { return mean_pairwise_pearson(trajs, Metric::avg_odds, cfg.window_first, cfg.window_last); });
    summary["pearson_f1"] =
        or_nan([&] { return mean_pairwise_pearson(trajs, Metric::f1, cfg.window_first, cfg.window_last); });
    return report;
}

// ---------------------------------------------------------------------------

PredictionChanges prediction_change_tracking(std::span<const Checkpoint> checkpoints, const Dataset& eval)
{
    if (checkpoints.size() < 2) {
        throw std::invalid_argument("prediction_change_tracking: at least two checkpoints are required");
    }
    const auto counts = eval.subgroup_counts();
    std::vector<bool> changed(eval.size(), false);
    std::array<std::size_t, kSubgroups> changed_count{};
    std::size_t changed_total = 0;

    PredictionChanges out;
    std::vector<int> previous = predict(checkpoints.front().model, eval);
    for (std::size_t c = 1; c < checkpoints.size(); ++c) {
        if (checkpoints[c].epoch != checkpoints[c - 1].epoch + 1) {
            throw std::invalid_argument("prediction_change_tracking: checkpoints must be consecutive epochs");
        }
        std::vector<int> current = predict(checkpoints[c].model, eval);
        for (std::size_t i = 0; i < eval.size(); ++i) {
            if (!changed[i] && current[i] != previous[i]) {
                changed[i] = true;
                ++changed_count[eval.subgroup(i)];
                ++changed_total;
            }
        }
        std::array<double, kSubgroups> pct{};
        for (std::size_t sg = 0; sg < kSubgroups; ++sg) {
            pct[sg] = counts[sg] == 0 ? kNaN
                                      : 100.0 * static_cast<double>(changed_count[sg]) /
                                            static_cast<double>(counts[sg]);
        }
        out.epochs.push_back(checkpoints[c].epoch);
        out.cumulative.push_back(pct);
        out.overall.push_back(100.0 * static_cast<double>(changed_total) / static_cast<double>(eval.size()));
        previous = std::move(current);
    }
    return out;
}

ExperimentReport changes_experiment(const ExperimentContext& ctx)
{
    require_window(ctx.base);
    if (ctx.base.window_last <= ctx.base.window_first) {
        throw ConfigError({"record_window: prediction tracking needs T2 > T1"});
    }
    const RunSeeds seeds = seeds_for_run(ctx.master_seed, 0);
    auto runs = train_runs(ctx, std::span(&seeds, 1), {Retention::window});
    const auto changes = prediction_change_tracking(runs[0].checkpoints, ctx.splits.test);

    ExperimentReport report;
    report.name = "changes";
    report.parameters = {{"master_seed", ctx.master_seed},
                         {"runs", {seeds_json(seeds, 0)}},
                         {"window", {ctx.base.window_first, ctx.base.window_last}},
                         {"eval_split", "test"}};
    Table table({"epoch", "a0y1", "a0y0", "a1y1", "a1y0", "overall"});
    for (std::size_t k = 0; k < changes.epochs.size(); ++k) {
        const auto& c = changes.cumulative[k];
        table.add_row({static_cast<double>(changes.epochs[k]), c[0], c[1], c[2], c[3], changes.overall[k]});
    }
    report.tables["changes"] = std::move(table);
    for (std::size_t sg = 0; sg < kSubgroups; ++sg) {
        report.summary[std::string("final_changed_") + kSubgroupNames[sg]] = changes.cumulative.back()[sg];
    }
    report.summary["final_changed_overall"] = changes.overall.back();
    report.trajectories.push_back(std::move(runs[0].trajectory));
    return report;
}

// ---------------------------------------------------------------------------

double UncertaintyProfile::quantile(std::size_t subgroup, double q) const
{
    return fairvar::quantile(sorted_std.at(subgroup), q);
}

UncertaintyProfile uncertainty_profile(const Model& model, const Dataset& eval, std::size_t passes,
                                       double dropout_rate, std::uint64_t seed)
{
    const auto stds = mc_dropout_uncertainty(model, eval.features, passes, dropout_rate, seed);
    UncertaintyProfile profile;
    for (std::size_t i = 0; i < eval.size(); ++i) {
        profile.sorted_std[eval.subgroup(i)].push_back(stds[i]);
    }
    for (auto& v : profile.sorted_std) {
        std::sort(v.begin(), v.end());
    }
    return profile;
}

ExperimentReport uncertainty_experiment(const ExperimentContext& ctx, std::size_t passes, double dropout_rate)
{
    if (!(dropout_rate > 0.0 && dropout_rate < 1.0)) {
        throw ConfigError({"mc_dropout_rate: must lie in (0, 1)"});
    }
    ExperimentContext local = ctx;
    local.base.dropout_rate = dropout_rate;
    const RunSeeds seeds = seeds_for_run(ctx.master_seed, 0);
    auto runs = train_runs(local, std::span(&seeds, 1), {});
    const auto profile = uncertainty_profile(runs[0].final_model, ctx.splits.test, passes, dropout_rate,
                                             ctx.master_seed);

    ExperimentReport report;
    report.name = "uncertainty";
    report.parameters = {{"master_seed", ctx.master_seed},
                         {"runs", {seeds_json(seeds, 0)}},
                         {"passes", passes},
                         {"dropout_rate", dropout_rate},
                         {"eval_split", "test"}};
    Table ecdf({"subgroup", "std", "fraction"});
    for (std::size_t sg = 0; sg < kSubgroups; ++sg) {
        const auto& v = profile.sorted_std[sg];
        for (std::size_t i = 0; i < v.size(); ++i) {
            ecdf.add_row({static_cast<double>(sg), v[i],
                          static_cast<double>(i + 1) / static_cast<double>(v.size())});
        }
    }
    report.tables["ecdf"] = std::move(ecdf);
    Table deciles({"q", "a0y1", "a0y0", "a1y1", "a1y0"});
    for (int d = 1; d <= 9; ++d) {
        const double q = d / 10.0;
        std::vector<double> row{q};
        for (std::size_t sg = 0; sg < kSubgroups; ++sg) {
            row.push_back(profile.sorted_std[sg].empty() ? kNaN : profile.quantile(sg, q));
        }
        deciles.add_row(std::move(row));
    }
    report.tables["deciles"] = std::move(deciles);
    for (std::size_t sg = 0; sg < kSubgroups; ++sg) {
        if (!profile.sorted_std[sg].empty()) {
            report.summary[std::string("p90_std_") + kSubgroupNames[sg]] = profile.quantile(sg, 0.9);
        }
    }
    report.trajectories.push_back(std::move(runs[0].trajectory));
    return report;
}

// ---------------------------------------------------------------------------

std::vector<PooledCheckpoint> sample_checkpoints(const ExperimentContext& ctx, std::size_t n_runs,
                                                 std::size_t n_checkpoints)
{
    require_window(ctx.base);
    if (n_runs == 0 || n_checkpoints == 0) {
        throw std::invalid_argument("sample_checkpoints: need at least one run and one checkpoint");
    }
    std::vector<RunSeeds> seeds;
    for (std::size_t i = 0; i < n_runs; ++i) {
        seeds.push_back(seeds_for_run(ctx.master_seed, i));
    }
    auto runs = train_runs(ctx, seeds, {Retention::window});

    std::vector<std::pair<std::size_t, std::size_t>> candidates;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        for (std::size_t c = 0; c < runs[r].checkpoints.size(); ++c) {
            candidates.emplace_back(r, c);
        }
    }
    if (n_checkpoints > candidates.size()) {
        throw std::invalid_argument("sample_checkpoints: more checkpoints requested than the window holds");
    }
    std::vector<std::size_t> pick(candidates.size());
    std::iota(pick.begin(), pick.end(), 0);
    Prng rng = Prng::from(ctx.master_seed, kPoolStream);
    shuffle(pick, rng);
    pick.resize(n_checkpoints);
    std::sort(pick.begin(), pick.end());

    std::vector<PooledCheckpoint> pool;
    pool.reserve(n_checkpoints);
    for (std::size_t idx : pick) {
        const auto [r, c] = candidates[idx];
        pool.push_back({r, runs[r].checkpoints[c].epoch, std::move(runs[r].checkpoints[c].model)});
    }
    return pool;
}

DonorOrders select_donor_orders(const ExperimentContext& ctx, std::size_t run_index)
{
    require_window(ctx.base);
    DonorOrders donors;
    donors.seeds = seeds_for_run(ctx.master_seed, run_index);
    auto runs = train_runs(ctx, std::span(&donors.seeds, 1), {Retention::none, 0, true});
    const Trajectory& val = runs[0].validation;

    donors.best_validation_ao = std::numeric_limits<double>::infinity();
    donors.worst_validation_ao = -std::numeric_limits<double>::infinity();
    for (const auto& rec : val.records) {
        if (rec.epoch < ctx.base.window_first || rec.epoch > ctx.base.window_last || !std::isfinite(rec.avg_odds)) {
            continue;
        }
        if (rec.avg_odds < donors.best_validation_ao) {
            donors.best_validation_ao = rec.avg_odds;
            donors.best_epoch = rec.epoch;
        }
        if (rec.avg_odds > donors.worst_validation_ao) {
            donors.worst_validation_ao = rec.avg_odds;
            donors.worst_epoch = rec.epoch;
        }
    }
    if (donors.best_epoch == 0) {
        throw UndefinedMetricError("select_donor_orders: validation AO undefined throughout the window");
    }
    const DataOrder reference = reference_order(ctx.splits.train.size(), donors.seeds.shuffle_seed);
    donors.best = epoch_order(reference, donors.best_epoch);
    donors.worst = epoch_order(reference, donors.worst_epoch);
    return donors;
}

std::vector<std::vector<double>> suffix_finetune(std::span<const PooledCheckpoint> checkpoints,
                                                 const DataOrder& donor, std::span<const std::size_t> b_values,
                                                 const TrainConfig& config, const Splits& splits,
                                                 BatchSelection selection, std::uint64_t seed)
{
    if (checkpoints.empty()) {
        throw std::invalid_argument("suffix_finetune: no checkpoints");
    }
    const auto batches = make_batches(donor, config.batch_size);
    for (std::size_t b : b_values) {
        if (b > batches.size()) {
            throw std::invalid_argument("suffix_finetune: b = " + std::to_string(b) + " exceeds the " +
                                        std::to_string(batches.size()) + " batches of an epoch");
        }
    }
    const auto weights = training_weights(splits.train, config);

    std::vector<std::vector<double>> out;
    for (std::size_t b : b_values) {
        std::vector<std::vector<std::size_t>> chosen;
        if (selection == BatchSelection::suffix) {
            chosen.assign(batches.end() - static_cast<std::ptrdiff_t>(b), batches.end());
        } else {
            std::vector<std::size_t> ids(batches.size());
            std::iota(ids.begin(), ids.end(), 0);
            Prng rng = Prng::from(seed + b, kBatchPickStream);
            shuffle(ids, rng);
            ids.resize(b);
            std::sort(ids.begin(), ids.end());
            for (std::size_t id : ids) {
                chosen.push_back(batches[id]);
            }
        }
        std::vector<double> ao;
        ao.reserve(checkpoints.size());
        for (const auto& ckpt : checkpoints) {
            const Model tuned = train_batches(ckpt.model, splits.train, chosen, config, finetune_epoch(config), weights);
            ao.push_back(evaluate(tuned, splits.test, finetune_epoch(config)).avg_odds);
        }
        out.push_back(std::move(ao));
    }
    return out;
}

ExperimentReport suffix_experiment(const ExperimentContext& ctx, std::span<const std::size_t> b_values,
                                   std::size_t n_runs, std::size_t n_checkpoints, BatchSelection selection)
{
    const auto pool = sample_checkpoints(ctx, n_runs, n_checkpoints);
    const DonorOrders donors = select_donor_orders(ctx, n_runs);

    ExperimentReport report;
    report.name = "suffix";
    report.parameters = {{"master_seed", ctx.master_seed},
                         {"b_values", std::vector<std::size_t>(b_values.begin(), b_values.end())},
                         {"selection", selection == BatchSelection::suffix ? "suffix" : "random"},
                         {"checkpoint_runs", n_runs},
                         {"checkpoints", checkpoints_json(pool)},
                         {"donor_run", seeds_json(donors.seeds, n_runs)},
                         {"best_epoch", donors.best_epoch},
                         {"worst_epoch", donors.worst_epoch},
                         {"best_validation_ao", donors.best_validation_ao},
                         {"worst_validation_ao", donors.worst_validation_ao}};
    report.parameters["runs"] = nlohmann::json::array();
    for (std::size_t i = 0; i < n_runs; ++i) {
        report.parameters["runs"].push_back(seeds_json(seeds_for_run(ctx.master_seed, i), i));
    }

    Table summary_table({"donor", "b", "median", "q1", "q3", "min", "max", "iqr"});
    Table points({"donor", "b", "run_id", "epoch", "avg_odds"});
    const std::array<const DataOrder*, 2> orders = {&donors.best, &donors.worst};
    const std::array<const char*, 2> names = {"best", "worst"};
    for (std::size_t d = 0; d < 2; ++d) {
        const auto ao = suffix_finetune(pool, *orders[d], b_values, ctx.base, ctx.splits, selection,
                                        ctx.master_seed + d);
        for (std::size_t k = 0; k < b_values.size(); ++k) {
            const double b = static_cast<double>(b_values[k]);
            for (std::size_t c = 0; c < pool.size(); ++c) {
                points.add_row({static_cast<double>(d), b, static_cast<double>(pool[c].run_id),
                                static_cast<double>(pool[c].epoch), ao[k][c]});
            }
            const auto clean = finite_only(ao[k]);
            if (clean.empty()) {
                summary_table.add_row({static_cast<double>(d), b, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN});
                continue;
            }
            const Summary s = summarize(clean);
            summary_table.add_row({static_cast<double>(d), b, s.median, s.q1, s.q3, s.min, s.max, s.iqr()});
            const std::string key = std::string(names[d]) + "_b" + std::to_string(b_values[k]);
            report.summary[key + "_median"] = s.median;
            report.summary[key + "_iqr"] = s.iqr();
        }
    }
    report.tables["suffix"] = std::move(summary_table);
    report.tables["suffix_points"] = std::move(points);
    return report;
}

ExperimentReport common_order_experiment(const ExperimentContext& ctx, std::size_t n_runs,
                                         std::size_t n_checkpoints)
{
    const auto pool = sample_checkpoints(ctx, n_runs, n_checkpoints);
    const RunSeeds fresh = seeds_for_run(ctx.master_seed, n_runs);
    const DataOrder order = epoch_order(reference_order(ctx.splits.train.size(), fresh.shuffle_seed), 1);
    const std::size_t epoch_batches = make_batches(order, ctx.base.batch_size).size();
    const std::array<std::size_t, 2> b_values = {0, epoch_batches};
    const auto ao = suffix_finetune(pool, order, b_values, ctx.base, ctx.splits);

    ExperimentReport report;
    report.name = "common_order";
    report.parameters = {{"master_seed", ctx.master_seed},
                         {"checkpoints", checkpoints_json(pool)},
                         {"order_shuffle_seed", fresh.shuffle_seed},
                         {"epoch_batches", epoch_batches}};
    Table points({"stage", "run_id", "epoch", "avg_odds"});
    for (std::size_t stage = 0; stage < 2; ++stage) {
        for (std::size_t c = 0; c < pool.size(); ++c) {
            points.add_row({static_cast<double>(stage), static_cast<double>(pool[c].run_id),
                            static_cast<double>(pool[c].epoch), ao[stage][c]});
        }
        const auto clean = finite_only(ao[stage]);
        if (!clean.empty()) {
            const Summary s = summarize(clean);
            const std::string key = stage == 0 ? "before" : "after";
            report.summary[key + "_median"] = s.median;
            report.summary[key + "_iqr"] = s.iqr();
            report.summary[key + "_range"] = s.max - s.min;
        }
    }
    report.tables["common_order"] = std::move(points);
    return report;
}

// ---------------------------------------------------------------------------

SweepResult manipulate_sweep(std::span<const PooledCheckpoint> checkpoints, std::span<const double> ratios,
                             int varied_group, const TrainConfig& config, const Splits& splits, std::uint64_t seed)
{
    for (double r : ratios) {
        if (!(r > 0.0)) {
            throw std::invalid_argument("manipulate_sweep: ratios must be positive");
        }
    }
    const auto weights = training_weights(splits.train, config);
    auto evaluate_into = [&](const Model& model, SweepPoint& point) {
        const auto rec = evaluate(model, splits.test, finetune_epoch(config));
        point.subgroup_accuracy.push_back(rec.subgroup_accuracy);
        point.overall_accuracy.push_back(rec.accuracy);
    };

    SweepResult result;
    for (const auto& ckpt : checkpoints) {
        evaluate_into(ckpt.model, result.baseline);
    }
    for (double r : ratios) {
        const RatioOrder order = build_ratio_order(splits.train, {varied_group, r}, config.batch_size, seed);
        SweepPoint point;
        point.ratio = r;
        for (const auto& ckpt : checkpoints) {
            const Model tuned =
                train_epoch(ckpt.model, splits.train, order.order, config, finetune_epoch(config), weights);
            evaluate_into(tuned, point);
        }
        result.points.push_back(std::move(point));
    }
    return result;
}

ExperimentReport manipulate_experiment(const ExperimentContext& ctx, std::span<const double> ratios,
                                       int varied_group, std::size_t n_runs, std::size_t n_checkpoints)
{
    if (varied_group < 0) {
        varied_group = minority_positive_group(ctx.splits.train);
    }
    const auto pool = sample_checkpoints(ctx, n_runs, n_checkpoints);
    const auto sweep = manipulate_sweep(pool, ratios, varied_group, ctx.base, ctx.splits, ctx.master_seed);

    ExperimentReport report;
    report.name = "manipulate";
    report.parameters = {{"master_seed", ctx.master_seed},
                         {"ratios", std::vector<double>(ratios.begin(), ratios.end())},
                         {"varied_group", varied_group},
                         {"checkpoint_runs", n_runs},
                         {"checkpoints", checkpoints_json(pool)},
                         {"order_seed", ctx.master_seed}};

    std::vector<std::string> cols{"ratio"};
    for (const char* name : {"a0y1", "a0y0", "a1y1", "a1y0", "overall"}) {
        for (const char* stat : {"median", "min", "max"}) {
            cols.push_back(std::string(name) + "_" + stat);
        }
    }
    Table table(cols);
    Table points({"ratio", "run_id", "epoch", "a0y1", "a0y0", "a1y1", "a1y0", "overall"});
    auto add = [&](const SweepPoint& p, const std::string& label) {
        std::vector<double> row{p.ratio};
        for (std::size_t sg = 0; sg <= kSubgroups; ++sg) {
            std::vector<double> v;
            for (std::size_t c = 0; c < p.overall_accuracy.size(); ++c) {
                v.push_back(sg < kSubgroups ? p.subgroup_accuracy[c][sg] : p.overall_accuracy[c]);
            }
            const auto clean = finite_only(v);
            if (clean.empty()) {
                row.insert(row.end(), 3, kNaN);
                continue;
            }
            const Summary s = summarize(clean);
            row.insert(row.end(), {s.median, s.min, s.max});
            report.summary[label + "_" + (sg < kSubgroups ? kSubgroupNames[sg] : "overall") + "_median"] = s.median;
        }
        table.add_row(std::move(row));
        for (std::size_t c = 0; c < p.overall_accuracy.size(); ++c) {
            const auto& a = p.subgroup_accuracy[c];
            points.add_row({p.ratio, static_cast<double>(pool[c].run_id), static_cast<double>(pool[c].epoch), a[0],
                            a[1], a[2], a[3], p.overall_accuracy[c]});
        }
    };
    add(sweep.baseline, "baseline");
    for (const auto& p : sweep.points) {
        char label[48];
        std::snprintf(label, sizeof label, "ratio_%g", p.ratio);
        add(p, label);
    }
    report.tables["manipulate"] = std::move(table);
    report.tables["manipulate_points"] = std::move(points);
    return report;
}

// ---------------------------------------------------------------------------

ProxyResult single_run_proxy(std::span<const double> multi_run_finals, std::span<const double> single_run_window,
                             std::size_t bins)
{
    if (multi_run_finals.size() < 5 || single_run_window.size() < 5) {
        throw std::invalid_argument("single_run_proxy: both samples need at least 5 values");
    }
    if (bins == 0) {
        throw std::invalid_argument("single_run_proxy: at least one bin is required");
    }
    ProxyResult result;
    result.ks = ks_two_sample(multi_run_finals, single_run_window);

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (auto sample : {multi_run_finals, single_run_window}) {
        for (double v : sample) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (hi == lo) {
        bins = 1;
        hi = lo + 1.0;
    }
    auto& h = result.histogram;
    h.edges.resize(bins + 1);
    for (std::size_t k = 0; k <= bins; ++k) {
        h.edges[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(bins);
    }
    auto fill = [&](std::span<const double> sample, std::vector<std::size_t>& counts) {
        counts.assign(bins, 0);
        for (double v : sample) {
            auto k = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
            ++counts[std::min(k, bins - 1)];
        }
    };
    fill(multi_run_finals, h.counts_a);
    fill(single_run_window, h.counts_b);
    return result;
}

ExperimentReport proxy_experiment(const ExperimentContext& ctx, std::size_t n_runs)
{
    require_window(ctx.base);
    std::vector<RunSeeds> seeds;
    for (std::size_t i = 0; i <= n_runs; ++i) {
        seeds.push_back(seeds_for_run(ctx.master_seed, i));
    }
    auto runs = train_runs(ctx, seeds, {});

    std::vector<double> finals;
    for (std::size_t i = 0; i < n_runs; ++i) {
        finals.push_back(runs[i].trajectory.final_record().avg_odds);
    }
    const auto window = runs[n_runs].trajectory.window(Metric::avg_odds, ctx.base.window_first, ctx.base.window_last);
    const auto finals_clean = finite_only(finals);
    const auto window_clean = finite_only(window);
    const auto result = single_run_proxy(finals_clean, window_clean);

    ExperimentReport report;
    report.name = "proxy";
    report.parameters = {{"master_seed", ctx.master_seed},
                         {"n_runs", n_runs},
                         {"single_run_id", n_runs},
                         {"window", {ctx.base.window_first, ctx.base.window_last}}};
    report.parameters["runs"] = nlohmann::json::array();
    for (std::size_t i = 0; i <= n_runs; ++i) {
        report.parameters["runs"].push_back(seeds_json(seeds[i], i));
    }
    report.summary["ks_statistic"] = result.ks.statistic;
    report.summary["ks_p_value"] = result.ks.p_value;
    report.summary["multi_run_samples"] = static_cast<double>(finals_clean.size());
    report.summary["single_run_samples"] = static_cast<double>(window_clean.size());

    Table samples({"source", "run_id", "epoch", "avg_odds"});
    for (std::size_t i = 0; i < n_runs; ++i) {
        const auto& rec = runs[i].trajectory.final_record();
        samples.add_row({0.0, static_cast<double>(i), static_cast<double>(rec.epoch), rec.avg_odds});
    }
    for (int e = ctx.base.window_first; e <= ctx.base.window_last; ++e) {
        samples.add_row({1.0, static_cast<double>(n_runs), static_cast<double>(e),
                         runs[n_runs].trajectory.at_epoch(e).avg_odds});
    }
    report.tables["proxy_samples"] = std::move(samples);

    Table hist({"bin_lo", "bin_hi", "multi_run_count", "single_run_count"});
    const auto& h = result.histogram;
    for (std::size_t k = 0; k + 1 < h.edges.size(); ++k) {
        hist.add_row({h.edges[k], h.edges[k + 1], static_cast<double>(h.counts_a[k]),
                      static_cast<double>(h.counts_b[k])});
    }
    report.tables["proxy_histogram"] = std::move(hist);
    return report;
}

BlackSwanSurface black_swan_from_trajectories(std::span<const std::vector<Trajectory>> repeats, std::size_t t_max,
                                              std::size_t s_max)
{
    if (t_max == 0 || s_max == 0 || repeats.empty()) {
        throw std::invalid_argument("black_swan_surface: t_max, s_max and repeats must be positive");
    }
    BlackSwanSurface surface;
    surface.t_max = t_max;
    surface.s_max = s_max;
    surface.best_ao.assign(t_max, std::vector<double>(s_max, 0.0));
    surface.hausdorff_to_best.assign(t_max, std::vector<double>(s_max, 0.0));

    for (const auto& runs : repeats) {
        if (runs.size() < s_max) {
            throw std::invalid_argument("black_swan_surface: each repeat needs s_max runs");
        }
        // points[s][k]: run s, k-th most recent epoch
        std::vector<std::vector<ParetoPoint>> recent(s_max);
        for (std::size_t s = 0; s < s_max; ++s) {
            const auto& recs = runs[s].records;
            if (recs.size() < t_max) {
                throw std::invalid_argument("black_swan_surface: runs must cover t_max epochs");
            }
            for (std::size_t k = 0; k < t_max; ++k) {
                const auto& rec = recs[recs.size() - 1 - k];
                recent[s].push_back({rec.avg_odds, rec.f1, runs[s].run_id, rec.epoch});
            }
        }
        auto collect = [&](std::size_t t, std::size_t s) {
            std::vector<ParetoPoint> pts;
            for (std::size_t r = 0; r < s; ++r) {
                for (std::size_t k = 0; k < t; ++k) {
                    const auto& p = recent[r][k];
                    if (std::isfinite(p.fairness) && std::isfinite(p.performance)) {
                        pts.push_back(p);
                    }
                }
            }
            return pts;
        };
        const auto all = collect(t_max, s_max);
        if (all.empty()) {
            throw UndefinedMetricError("black_swan_surface: no finite (AO, F1) points");
        }
        const auto best_front = pareto_front(all);
        for (std::size_t t = 1; t <= t_max; ++t) {
            for (std::size_t s = 1; s <= s_max; ++s) {
                const auto pts = collect(t, s);
                double best = kNaN;
                double dist = kNaN;
                if (!pts.empty()) {
                    best = std::min_element(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
                               return a.fairness < b.fairness;
                           })->fairness;
                    dist = hausdorff(pareto_front(pts), best_front);
                }
                surface.best_ao[t - 1][s - 1] += best / static_cast<double>(repeats.size());
                surface.hausdorff_to_best[t - 1][s - 1] += dist / static_cast<double>(repeats.size());
            }
        }
    }
    return surface;
}

BlackSwanSurface black_swan_surface(const ExperimentContext& ctx, std::size_t t_max, std::size_t s_max,
                                    std::size_t repeats)
{
    if (static_cast<int>(t_max) > ctx.base.epochs) {
        throw std::invalid_argument("black_swan_surface: t_max exceeds the number of epochs");
    }
    std::vector<RunSeeds> seeds;
    for (std::size_t i = 0; i < repeats * s_max; ++i) {
        seeds.push_back(seeds_for_run(ctx.master_seed, i));
    }
    auto runs = train_runs(ctx, seeds, {});
    std::vector<std::vector<Trajectory>> groups(repeats);
    for (std::size_t i = 0; i < runs.size(); ++i) {
        groups[i / s_max].push_back(std::move(runs[i].trajectory));
    }
    return black_swan_from_trajectories(groups, t_max, s_max);
}

ExperimentReport blackswan_experiment(const ExperimentContext& ctx, std::size_t t_max, std::size_t s_max,
                                      std::size_t repeats)
{
    const auto surface = black_swan_surface(ctx, t_max, s_max, repeats);
    ExperimentReport report;
    report.name = "blackswan";
    report.parameters = {{"master_seed", ctx.master_seed},
                         {"t_max", t_max},
                         {"s_max", s_max},
                         {"repeats", repeats},
                         {"run_seed_rule", "repeat r, run s uses seeds_for_run(master, r * s_max + s)"}};
    Table table({"t", "s", "best_ao", "hausdorff"});
    for (std::size_t t = 1; t <= t_max; ++t) {
        for (std::size_t s = 1; s <= s_max; ++s) {
            table.add_row({static_cast<double>(t), static_cast<double>(s), surface.best_ao[t - 1][s - 1],
                           surface.hausdorff_to_best[t - 1][s - 1]});
        }
    }
    report.tables["blackswan"] = std::move(table);
    report.summary["best_ao_t1_s1"] = surface.best_ao[0][0];
    report.summary["best_ao_tmax_smax"] = surface.best_ao[t_max - 1][s_max - 1];
    report.summary["hausdorff_t1_s1"] = surface.hausdorff_to_best[0][0];
    return report;
}

// ---------------------------------------------------------------------------

std::string mitigation_setup_name(MitigationSetup setup)
{
    switch (setup) {
    case MitigationSetup::baseline: return "baseline";
    case MitigationSetup::reweighing: return "reweighing";
    case MitigationSetup::eo_loss: return "eo_loss";
    }
    return "?";
}

std::string post_order_name(PostOrder post)
{
    switch (post) {
    case PostOrder::none: return "none";
    case PostOrder::equal_order: return "equal_order";
    case PostOrder::adv_order: return "adv_order";
    }
    return "?";
}

std::vector<MitigationCell> mitigation_compare(const ExperimentContext& ctx, std::span<const MitigationSetup> setups,
                                               std::size_t n_seeds)
{
    if (n_seeds < 3) {
        throw std::invalid_argument("mitigation_compare: at least three seeds are required");
    }
    constexpr std::array<PostOrder, 3> posts = {PostOrder::none, PostOrder::equal_order, PostOrder::adv_order};
    const Dataset& train = ctx.splits.train;

    struct SeedOutcome {
        std::array<double, 3> f1{};
        std::array<double, 3> ao{};
    };
    const std::size_t jobs_total = setups.size() * n_seeds;
    const auto outcomes = parallel_map<SeedOutcome>(jobs_total, ctx.jobs, [&](std::size_t job) {
        const MitigationSetup setup = setups[job / n_seeds];
        const std::size_t i = job % n_seeds;
        TrainConfig config = ctx.base;
        config.loss = setup == MitigationSetup::baseline     ? LossKind::plain_ce
                      : setup == MitigationSetup::reweighing ? LossKind::weighted_ce
                                                             : LossKind::ce_plus_eo;
        if (setup != MitigationSetup::reweighing) {
            config.sample_weights.clear();
        }
        const RunSeeds seeds = seeds_for_run(ctx.master_seed, i);
        config.weight_seed = seeds.weight_seed;
        config.shuffle_seed = seeds.shuffle_seed;
        const RunResult run = train_run(ctx.splits, config, {Retention::none, i});
        const auto weights = training_weights(train, config);

        SeedOutcome out;
        for (std::size_t p = 0; p < posts.size(); ++p) {
            Model model = run.final_model;
            if (posts[p] != PostOrder::none) {
                const std::uint64_t order_seed = ctx.master_seed + i;
                const RatioOrder order = posts[p] == PostOrder::equal_order
                                             ? equal_order(train, config.batch_size, order_seed)
                                             : adv_order(train, config.batch_size, order_seed);
                model = train_epoch(std::move(model), train, order.order, config, finetune_epoch(config), weights);
            }
            const auto rec = evaluate(model, ctx.splits.test, config.epochs);
            out.f1[p] = rec.f1;
            out.ao[p] = rec.avg_odds;
        }
        return out;
    });

    std::vector<MitigationCell> cells;
    for (std::size_t s = 0; s < setups.size(); ++s) {
        for (std::size_t p = 0; p < posts.size(); ++p) {
            MitigationCell cell;
            cell.setup = setups[s];
            cell.post = posts[p];
            for (std::size_t i = 0; i < n_seeds; ++i) {
                cell.f1.push_back(outcomes[s * n_seeds + i].f1[p]);
                cell.avg_odds.push_back(outcomes[s * n_seeds + i].ao[p]);
            }
            cells.push_back(std::move(cell));
        }
    }
    return cells;
}

ExperimentReport mitigation_experiment(const ExperimentContext& ctx, std::span<const MitigationSetup> setups,
                                       std::size_t n_seeds)
{
    const auto cells = mitigation_compare(ctx, setups, n_seeds);
    ExperimentReport report;
    report.name = "mitigate";
    report.parameters = {{"master_seed", ctx.master_seed}, {"n_seeds", n_seeds}, {"eo_lambda", ctx.base.eo_lambda}};
    report.parameters["setups"] = nlohmann::json::array();
    for (auto s : setups) {
        report.parameters["setups"].push_back(mitigation_setup_name(s));
    }
    report.parameters["runs"] = nlohmann::json::array();
    for (std::size_t i = 0; i < n_seeds; ++i) {
        auto entry = seeds_json(seeds_for_run(ctx.master_seed, i), i);
        entry["order_seed"] = ctx.master_seed + i;
        report.parameters["runs"].push_back(entry);
    }

    Table table({"setup", "post_order", "f1_median", "f1_q1", "f1_q3", "ao_median", "ao_q1", "ao_q3"});
    Table points({"setup", "post_order", "run_id", "f1", "avg_odds"});
    for (const auto& cell : cells) {
        const double setup = static_cast<double>(cell.setup);
        const double post = static_cast<double>(cell.post);
        std::vector<double> row{setup, post};
        for (const auto* v : {&cell.f1, &cell.avg_odds}) {
            const auto clean = finite_only(*v);
            if (clean.empty()) {
                row.insert(row.end(), 3, kNaN);
                continue;
            }
            const Summary s = summarize(clean);
            row.insert(row.end(), {s.median, s.q1, s.q3});
        }
        const std::string key = mitigation_setup_name(cell.setup) + "_" + post_order_name(cell.post);
        report.summary[key + "_f1_median"] = row[2];
        report.summary[key + "_ao_median"] = row[5];
        table.add_row(std::move(row));
        for (std::size_t i = 0; i < cell.f1.size(); ++i) {
            points.add_row({setup, post, static_cast<double>(i), cell.f1[i], cell.avg_odds[i]});
        }
    }
    report.tables["mitigate"] = std::move(table);
    report.tables["mitigate_points"] = std::move(points);
    return report;
}

}  // namespace fairvar
