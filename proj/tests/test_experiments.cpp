#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "fairvar/errors.hpp"
#include "fairvar/experiments.hpp"

using namespace fairvar;

namespace {

ExperimentContext small_context(std::size_t jobs = 1)
{
    SynthSpec s;
    s.n = 600;
    s.dims = 3;
    s.seed = 4;
    ExperimentContext ctx;
    ctx.splits = split(synth_generate(s), {0.7, 0.1, 0.2}, 2);
    ctx.base.hidden_sizes = {6};
    ctx.base.batch_size = 32;
    ctx.base.learning_rate = 0.1;
    ctx.base.epochs = 12;
    ctx.base.window_first = 4;
    ctx.base.window_last = 12;
    ctx.master_seed = 21;
    ctx.jobs = jobs;
    return ctx;
}

/// One hidden ReLU unit copying x0; class 1 iff x0 > threshold.
Model threshold_model(double threshold)
{
    const std::vector<std::size_t> hidden = {1};
    Model m = init_model(1, hidden, 0);
    m.layers[0].weights.values = {1.0};
    m.layers[1].weights.values = {0.0, 1.0};
    m.layers[1].biases = {0.0, -threshold};
    return m;
}

Dataset ramp(std::size_t n)
{
    Dataset d;
    d.features.resize(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        d.features(i, 0) = static_cast<double>(i + 1);
        d.labels.push_back(static_cast<int>(i % 2));
        d.sensitive.push_back(static_cast<int>((i / 2) % 2));
    }
    d.columns = {"x0"};
    return d;
}

std::string report_bytes(const ExperimentReport& r)
{
    std::string out = report_json(r).dump();
    for (const auto& t : r.trajectories) {
        out += trajectory_csv(t);
    }
    for (const auto& [name, table] : r.tables) {
        out += name + table_csv(table);
    }
    return out;
}

}  // namespace

TEST_CASE("seed schedule")
{
    CHECK(seeds_for_run(100, 3).weight_seed == 106);
    CHECK(seeds_for_run(100, 3).shuffle_seed == 107);
    CHECK(seeds_for_run(100, 3, DecoupleMode::fixed_reshuffle).shuffle_seed == 101);
    CHECK(seeds_for_run(100, 3, DecoupleMode::fixed_reshuffle).weight_seed == 106);
    CHECK(seeds_for_run(100, 3, DecoupleMode::fixed_weight_init).weight_seed == 100);
    CHECK(seeds_for_run(100, 3, DecoupleMode::fixed_weight_init).shuffle_seed == 107);
    for (auto m : {DecoupleMode::both_random, DecoupleMode::fixed_reshuffle, DecoupleMode::fixed_weight_init}) {
        CHECK(parse_decouple_mode(decouple_mode_name(m)) == m);
    }
}

TEST_CASE("fixed reshuffling shares every epoch order")
{
    const auto a = seeds_for_run(5, 0, DecoupleMode::fixed_reshuffle);
    const auto b = seeds_for_run(5, 4, DecoupleMode::fixed_reshuffle);
    const DataOrder ra = reference_order(300, a.shuffle_seed);
    const DataOrder rb = reference_order(300, b.shuffle_seed);
    for (int t = 1; t <= 20; ++t) {
        CHECK(epoch_order(ra, t) == epoch_order(rb, t));
    }
}

TEST_CASE("identical seeds give identical runs")
{
    const ExperimentContext ctx = small_context();
    const std::vector<RunSeeds> seeds = {{7, 8}, {7, 8}};
    const auto runs = train_runs(ctx, seeds, {});
    std::vector<double> finals;
    for (const auto& r : runs) {
        finals.push_back(r.trajectory.final_record().avg_odds);
    }
    CHECK(trajectory_csv(runs[0].trajectory) == trajectory_csv(runs[1].trajectory));
    CHECK(var_across_runs(finals) == 0.0);
    const auto w0 = runs[0].trajectory.window(Metric::f1, 4, 12);
    const auto w1 = runs[1].trajectory.window(Metric::f1, 4, 12);
    CHECK(pearson(w0, w1) == doctest::Approx(1.0));
}

TEST_CASE("decouple experiment")
{
    const ExperimentContext ctx = small_context();
    const auto r = decouple_experiment(ctx, 3, DecoupleMode::fixed_reshuffle);
    CHECK(r.trajectories.size() == 3);
    CHECK(r.tables.at("finals").rows.size() == 3);
    CHECK(r.tables.at("bands").rows.size() == 9);
    CHECK(r.summary.contains("pearson_ao"));
    CHECK(r.parameters["runs"][2]["shuffle_seed"] == 22);
    CHECK_THROWS(decouple_experiment(ctx, 1, DecoupleMode::both_random));

    SUBCASE("parallel equals sequential")
    {
        const auto p = decouple_experiment(small_context(3), 3, DecoupleMode::fixed_reshuffle);
        CHECK(report_bytes(p) == report_bytes(r));
    }
    SUBCASE("lr 0 gives flat trajectories on a shared order")
    {
        ExperimentContext flat = ctx;
        flat.base.learning_rate = 0.0;
        const auto f = decouple_experiment(flat, 2, DecoupleMode::fixed_reshuffle);
        for (const auto& t : f.trajectories) {
            for (const auto& rec : t.records) {
                CHECK(rec.accuracy == t.records.front().accuracy);
                CHECK(rec.subgroup_accuracy == t.records.front().subgroup_accuracy);
            }
        }
        CHECK(f.trajectories[0].shuffle_seed == f.trajectories[1].shuffle_seed);
    }
}

TEST_CASE("prediction change tracking")
{
    const Dataset eval = ramp(8);
    SUBCASE("identical models")
    {
        const std::vector<Checkpoint> cps = {{1, threshold_model(3.5)}, {2, threshold_model(3.5)},
                                             {3, threshold_model(3.5)}};
        const auto c = prediction_change_tracking(cps, eval);
        CHECK(c.epochs == std::vector<int>{2, 3});
        for (const auto& row : c.cumulative) {
            for (double v : row) {
                CHECK(v == 0.0);
            }
        }
    }
    SUBCASE("one row flipping back and forth counts once")
    {
        // Row with x0 = 4 (index 3: label 1, group 1) flips at epochs 2 and 3.
        const std::vector<Checkpoint> cps = {{1, threshold_model(3.5)}, {2, threshold_model(4.5)},
                                             {3, threshold_model(3.5)}};
        const auto c = prediction_change_tracking(cps, eval);
        const std::size_t sg = subgroup_index(1, 1);
        const auto counts = eval.subgroup_counts();
        CHECK(c.cumulative[0][sg] == doctest::Approx(100.0 / counts[sg]));
        CHECK(c.cumulative[1][sg] == c.cumulative[0][sg]);
        for (std::size_t other = 0; other < kSubgroups; ++other) {
            if (other != sg) {
                CHECK(c.cumulative[1][other] == 0.0);
            }
        }
        CHECK(c.overall[1] == doctest::Approx(100.0 / 8.0));
    }
    SUBCASE("preconditions")
    {
        const std::vector<Checkpoint> one = {{1, threshold_model(1.0)}};
        CHECK_THROWS(prediction_change_tracking(one, eval));
        const std::vector<Checkpoint> gap = {{1, threshold_model(1.0)}, {3, threshold_model(1.0)}};
        CHECK_THROWS(prediction_change_tracking(gap, eval));
    }
    SUBCASE("curves from training are nondecreasing")
    {
        const auto r = changes_experiment(small_context());
        const auto& t = r.tables.at("changes");
        for (std::size_t col = 1; col < t.columns.size(); ++col) {
            for (std::size_t row = 1; row < t.rows.size(); ++row) {
                CHECK(t.rows[row][col] >= t.rows[row - 1][col]);
                CHECK(t.rows[row][col] <= 100.0);
            }
        }
    }
}

TEST_CASE("uncertainty profile")
{
    const std::vector<std::size_t> hidden = {3};
    Model zero = init_model(1, hidden, 0);
    for (auto& l : zero.layers) {
        std::fill(l.weights.values.begin(), l.weights.values.end(), 0.0);
    }
    const auto p = uncertainty_profile(zero, ramp(12), 20, 0.3, 1);
    for (const auto& sg : p.sorted_std) {
        for (double v : sg) {
            CHECK(v == 0.0);
        }
    }
    CHECK_THROWS(uncertainty_profile(zero, ramp(12), 20, 0.0, 1));
    CHECK_THROWS(uncertainty_experiment(small_context(), 20, 0.0));
}

TEST_CASE("suffix fine-tuning")
{
    ExperimentContext ctx = small_context();
    const auto pool = sample_checkpoints(ctx, 2, 5);
    REQUIRE(pool.size() == 5);
    for (std::size_t i = 1; i < pool.size(); ++i) {
        CHECK((pool[i - 1].run_id < pool[i].run_id ||
               (pool[i - 1].run_id == pool[i].run_id && pool[i - 1].epoch < pool[i].epoch)));
    }
    const DataOrder donor = epoch_order(reference_order(ctx.splits.train.size(), 3), 1);
    const std::vector<std::size_t> b = {0, 3, 14};

    std::vector<double> own;
    for (const auto& c : pool) {
        own.push_back(evaluate(c.model, ctx.splits.test, 0).avg_odds);
    }
    const auto ao = suffix_finetune(pool, donor, b, ctx.base, ctx.splits);
    CHECK(ao[0] == own);

    TrainConfig frozen = ctx.base;
    frozen.learning_rate = 0.0;
    for (const auto& row : suffix_finetune(pool, donor, b, frozen, ctx.splits)) {
        CHECK(row == own);
    }
    const auto random = suffix_finetune(pool, donor, b, ctx.base, ctx.splits, BatchSelection::random, 5);
    CHECK(random[0] == own);
    const std::vector<std::size_t> too_big = {15};
    CHECK_THROWS(suffix_finetune(pool, donor, too_big, ctx.base, ctx.splits));
    CHECK_THROWS(sample_checkpoints(ctx, 1, 100));

    const auto donors = select_donor_orders(ctx, 2);
    CHECK(donors.best_validation_ao <= donors.worst_validation_ao);
    CHECK(donors.best_epoch >= ctx.base.window_first);
    CHECK(donors.worst.is_permutation());
}

TEST_CASE("manipulation sweep")
{
    ExperimentContext ctx = small_context();
    const auto pool = sample_checkpoints(ctx, 2, 3);
    const std::vector<double> ratios = {0.5, 2.0};
    const auto sweep = manipulate_sweep(pool, ratios, 0, ctx.base, ctx.splits, 1);
    CHECK(sweep.points.size() == 2);
    CHECK(sweep.baseline.overall_accuracy.size() == 3);
    CHECK(sweep.points[1].ratio == 2.0);
    const std::vector<double> bad = {0.0};
    CHECK_THROWS(manipulate_sweep(pool, bad, 0, ctx.base, ctx.splits, 1));
}

TEST_CASE("single-run proxy")
{
    const std::vector<double> a = {1, 2, 3, 4, 5, 6};
    const auto same = single_run_proxy(a, a);
    CHECK(same.ks.statistic == 0.0);
    CHECK(same.ks.p_value == 1.0);
    const std::vector<double> b = {11, 12, 13, 14, 15};
    CHECK(single_run_proxy(a, b).ks.statistic == 1.0);
    std::size_t total = 0;
    for (auto c : single_run_proxy(a, b, 4).histogram.counts_a) {
        total += c;
    }
    CHECK(total == a.size());
    CHECK_THROWS(single_run_proxy(a, std::vector<double>{1, 2}));
}

TEST_CASE("black swan surface")
{
    auto traj = [](std::size_t id, std::vector<std::pair<double, double>> pts) {
        Trajectory t;
        t.run_id = id;
        int e = 1;
        for (auto [ao, f] : pts) {
            MetricRecord r;
            r.epoch = e++;
            r.avg_odds = ao;
            r.f1 = f;
            t.records.push_back(r);
        }
        return t;
    };
    const std::vector<std::vector<Trajectory>> repeats = {
        {traj(0, {{5, 70}, {4, 72}, {3, 71}}), traj(1, {{2, 60}, {6, 80}, {4, 75}})}};
    const auto s = black_swan_from_trajectories(repeats, 3, 2);
    CHECK(s.hausdorff_to_best[2][1] == 0.0);
    CHECK(s.best_ao[0][0] == 3.0);  // run 0, last epoch only
    CHECK(s.best_ao[2][1] == 2.0);
    // (t,s)=(1,1) is the single point (3,71); best front is {(2,60),(3,71),(4,75),(6,80)}.
    CHECK(s.hausdorff_to_best[0][0] == doctest::Approx(std::hypot(1.0, 11.0)));

    const auto real = black_swan_surface(small_context(), 4, 2, 2);
    CHECK(real.hausdorff_to_best[3][1] == 0.0);
    CHECK(real.best_ao[3][1] <= real.best_ao[0][0]);
}

TEST_CASE("mitigation comparison")
{
    const ExperimentContext ctx = small_context();
    const std::vector<MitigationSetup> setups = {MitigationSetup::baseline, MitigationSetup::eo_loss};
    const auto cells = mitigation_compare(ctx, setups, 3);
    REQUIRE(cells.size() == 6);
    const auto plain = decouple_experiment(ctx, 3, DecoupleMode::both_random);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(cells[0].avg_odds[i] == plain.trajectories[i].final_record().avg_odds);
        CHECK(cells[0].f1[i] == plain.trajectories[i].final_record().f1);
    }
    CHECK(cells[1].post == PostOrder::equal_order);
    CHECK(cells[3].setup == MitigationSetup::eo_loss);
    CHECK_THROWS(mitigation_compare(ctx, setups, 2));
}

TEST_CASE("report files")
{
    Trajectory t;
    t.run_id = 4;
    MetricRecord r;
    r.epoch = 1;
    r.f1 = 66.666666666;
    r.avg_odds = std::nan("");
    t.records.push_back(r);
    const std::string csv = trajectory_csv(t);
    CHECK(csv ==
          "epoch,f1,avg_odds,eopp,dp,acc,acc_a0y1,acc_a0y0,acc_a1y1,acc_a1y0\n"
          "1,66.666667,nan,0.000000,0.000000,0.000000,0.000000,0.000000,0.000000,0.000000\n");

    Table table({"a", "b"});
    CHECK_THROWS(table.add_row({1.0}));
    table.add_row({1.0, 2.5});
    CHECK(table.column("b") == std::vector<double>{2.5});

    ExperimentReport rep;
    rep.name = "x";
    rep.trajectories.push_back(t);
    rep.tables["tab"] = table;
    rep.summary["nan_value"] = std::nan("");
    const auto dir = std::filesystem::temp_directory_path() / "fairvar_report_test";
    std::filesystem::remove_all(dir);
    write_report(rep, dir);
    CHECK(std::filesystem::exists(dir / "report.json"));
    CHECK(std::filesystem::exists(dir / "trajectory_4.csv"));
    CHECK(std::filesystem::exists(dir / "tab.csv"));
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        CHECK(entry.path().extension() != ".tmp");
    }
    CHECK(report_json(rep)["summary"]["nan_value"].is_null());
    std::filesystem::remove_all(dir);
}
