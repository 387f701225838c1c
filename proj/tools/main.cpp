// fairvar command-line entry point.
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "fairvar/config.hpp"
#include "fairvar/errors.hpp"
#include "fairvar/experiments.hpp"
#include "fairvar/metrics.hpp"
#include "fairvar/report.hpp"

namespace fv = fairvar;
using nlohmann::json;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct Overrides {
    std::string config_path;
    std::string preset;
    std::optional<std::size_t> jobs;
    std::optional<std::uint64_t> seed;
    std::string output;
    std::optional<int> epochs;
    std::vector<int> window;
    std::optional<double> learning_rate;
    std::optional<double> dropout;
    std::string loss;
    std::optional<std::size_t> runs;
    std::string mode;
    // metrics
    std::string predictions;
    std::string pred_column = "pred";
    std::string label_column = "label";
    std::string sensitive_column = "sensitive";
    bool common_order = false;
};

void add_common(CLI::App* cmd, Overrides& o)
{
    cmd->add_option("-c,--config", o.config_path, "JSON run configuration");
    cmd->add_option("--preset", o.preset, "paper (default) or desk")->check(CLI::IsMember({"paper", "desk"}));
    cmd->add_option("-j,--jobs", o.jobs, "Maximum concurrent training runs");
    cmd->add_option("--seed", o.seed, "Master seed");
    cmd->add_option("-o,--output", o.output, "Output directory");
}

void add_training(CLI::App* cmd, Overrides& o)
{
    cmd->add_option("--epochs", o.epochs, "Training epochs T");
    cmd->add_option("--window", o.window, "Record window: first and last epoch")->expected(2);
    cmd->add_option("--lr", o.learning_rate, "Learning rate");
    cmd->add_option("--dropout", o.dropout, "Dropout rate during training");
    cmd->add_option("--loss", o.loss, "plain_ce, weighted_ce or ce_plus_eo");
}

/// Overrides are expressed as a JSON patch so the config echo stays complete.
json override_patch(const Overrides& o)
{
    json j = json::object();
    if (o.jobs) {
        j["jobs"] = *o.jobs;
    }
    if (o.seed) {
        j["master_seed"] = *o.seed;
    }
    if (!o.output.empty()) {
        j["output_dir"] = o.output;
    }
    if (o.epochs) {
        j["train"]["epochs"] = *o.epochs;
    }
    if (!o.window.empty()) {
        j["train"]["window"] = o.window;
    }
    if (o.learning_rate) {
        j["train"]["learning_rate"] = *o.learning_rate;
    }
    if (o.dropout) {
        j["train"]["dropout_rate"] = *o.dropout;
    }
    if (!o.loss.empty()) {
        j["train"]["loss"] = o.loss;
    }
    if (o.runs) {
        j["experiment"]["n_runs"] = *o.runs;
    }
    if (!o.mode.empty()) {
        j["experiment"]["mode"] = o.mode;
    }
    return j;
}

fv::RunConfig resolve_config(const Overrides& o)
{
    std::optional<std::filesystem::path> path;
    if (!o.config_path.empty()) {
        path = o.config_path;
    }
    std::optional<fv::Preset> preset;
    if (!o.preset.empty()) {
        preset = fv::parse_preset(o.preset);
    }
    fv::RunConfig config = fv::load_config(path, preset);
    std::vector<std::string> violations;
    fv::apply_json(config, override_patch(o), violations);
    if (!violations.empty()) {
        throw fv::ConfigError(std::move(violations));
    }
    return config;
}

void print_summary(const fv::ExperimentReport& report, const std::filesystem::path& dir)
{
    std::printf("%s: wrote %s\n", report.name.c_str(), dir.string().c_str());
    for (const auto& [key, value] : report.summary) {
        std::printf("  %-32s %.6f\n", key.c_str(), value);
    }
}

int run_metrics(const Overrides& o)
{
    if (o.predictions.empty()) {
        throw fv::ConfigError({"--predictions: a predictions CSV is required"});
    }
    std::ifstream in(o.predictions, std::ios::binary);
    if (!in) {
        throw fv::DataError(fv::DataError::Kind::io, "cannot read '" + o.predictions + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    const fv::Dataset data = fv::parse_csv(ss.str(), o.label_column, o.sensitive_column);
    std::size_t col = data.columns.size();
    for (std::size_t i = 0; i < data.columns.size(); ++i) {
        if (data.columns[i] == o.pred_column) {
            col = i;
        }
    }
    if (col == data.columns.size()) {
        throw fv::DataError(fv::DataError::Kind::missing_column, "missing column '" + o.pred_column + "'", 1,
                            o.pred_column);
    }
    std::vector<int> preds;
    for (std::size_t r = 0; r < data.size(); ++r) {
        const double v = data.features(r, col);
        if (v != 0.0 && v != 1.0) {
            throw fv::DataError(fv::DataError::Kind::non_binary_value, "prediction is not 0 or 1", r + 2,
                                o.pred_column);
        }
        preds.push_back(static_cast<int>(v));
    }
    const auto rec = fv::make_record(0, preds, data.labels, data.sensitive);
    const auto conf = fv::confusion(preds, data.labels, data.sensitive);

    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    json out = {{"experiment", "metrics"},
                {"predictions", o.predictions},
                {"rows", data.size()},
                {"metrics",
                 {{"f1", num(rec.f1)},
                  {"avg_odds", num(rec.avg_odds)},
                  {"eopp", num(rec.eopp)},
                  {"dp", num(rec.dp)},
                  {"acc", num(rec.accuracy)}}}};
    for (std::size_t sg = 0; sg < fv::kSubgroups; ++sg) {
        out["metrics"][std::string("acc_") + fv::kSubgroupNames[sg]] = num(rec.subgroup_accuracy[sg]);
    }
    for (int a = 0; a < 2; ++a) {
        const auto& g = conf.groups[a];
        out["confusion"]["a" + std::to_string(a)] = {{"tp", g.tp}, {"fp", g.fp}, {"tn", g.tn}, {"fn", g.fn}};
    }
    const std::string text = out.dump(2) + "\n";
    if (!o.output.empty()) {
        std::filesystem::create_directories(o.output);
        fv::write_file_atomic(std::filesystem::path(o.output) / "report.json", text);
    }
    std::fputs(text.c_str(), stdout);
    return 0;
}

int run_generate(const fv::RunConfig& config)
{
    const fv::Splits splits = fv::materialize(config);
    std::filesystem::create_directories(config.output_dir);
    fv::write_file_atomic(config.output_dir / "train.csv", fv::to_csv(splits.train));
    fv::write_file_atomic(config.output_dir / "validation.csv", fv::to_csv(splits.validation));
    fv::write_file_atomic(config.output_dir / "test.csv", fv::to_csv(splits.test));
    json counts = json::object();
    for (const auto* part : {&splits.train, &splits.validation, &splits.test}) {
        const auto c = part->subgroup_counts();
        const char* name = part == &splits.train ? "train" : part == &splits.validation ? "validation" : "test";
        for (std::size_t sg = 0; sg < fv::kSubgroups; ++sg) {
            counts[name][fv::kSubgroupNames[sg]] = c[sg];
        }
    }
    const json report = {{"experiment", "generate"}, {"config", fv::to_json(config)}, {"subgroup_counts", counts}};
    fv::write_file_atomic(config.output_dir / "report.json", report.dump(2) + "\n");
    std::printf("generate: wrote %s (train %zu, validation %zu, test %zu rows)\n",
                config.output_dir.string().c_str(), splits.train.size(), splits.validation.size(),
                splits.test.size());
    return 0;
}

fv::ExperimentReport run_train(const fv::ExperimentContext& ctx)
{
    const fv::RunSeeds seeds = fv::seeds_for_run(ctx.master_seed, 0);
    auto runs = fv::train_runs(ctx, std::span(&seeds, 1), {});
    fv::ExperimentReport report;
    report.name = "train";
    report.parameters = {{"master_seed", ctx.master_seed},
                         {"runs", {{{"run_id", 0}, {"weight_seed", seeds.weight_seed},
                                    {"shuffle_seed", seeds.shuffle_seed}}}}};
    const auto& last = runs[0].trajectory.records.empty() ? fv::MetricRecord{} : runs[0].trajectory.final_record();
    report.summary = {{"final_f1", last.f1}, {"final_avg_odds", last.avg_odds}, {"final_acc", last.accuracy}};
    report.trajectories.push_back(std::move(runs[0].trajectory));
    return report;
}

int run_experiment(const std::string& command, const fv::RunConfig& config, const Overrides& o)
{
    if (command == "generate") {
        auto v = fv::static_violations(config, command);
        if (!v.empty()) {
            throw fv::ConfigError(std::move(v));
        }
        return run_generate(config);
    }
    auto v = fv::static_violations(config, command);
    if (!v.empty()) {
        throw fv::ConfigError(std::move(v));
    }
    fv::Splits splits = fv::materialize(config);
    v = fv::data_violations(config, command, splits);
    if (!v.empty()) {
        throw fv::ConfigError(std::move(v));
    }
    const auto& x = config.experiment;
    const fv::ExperimentContext ctx = fv::make_context(config, std::move(splits));

    fv::ExperimentReport report;
    if (command == "train") {
        report = run_train(ctx);
    } else if (command == "decouple") {
        report = fv::decouple_experiment(ctx, x.n_runs, x.mode);
    } else if (command == "changes") {
        report = fv::changes_experiment(ctx);
    } else if (command == "uncertainty") {
        report = fv::uncertainty_experiment(ctx, x.passes, x.mc_dropout_rate);
    } else if (command == "suffix") {
        report = o.common_order ? fv::common_order_experiment(ctx, x.checkpoint_runs, x.n_checkpoints)
                                : fv::suffix_experiment(ctx, x.b_values, x.checkpoint_runs, x.n_checkpoints,
                                                        x.selection);
    } else if (command == "manipulate") {
        const int group = x.varied_group >= 0 ? x.varied_group : fv::minority_positive_group(ctx.splits.train);
        report = fv::manipulate_experiment(ctx, x.ratio_values, group, x.checkpoint_runs, x.n_checkpoints);
    } else if (command == "proxy") {
        report = fv::proxy_experiment(ctx, x.proxy_runs);
    } else if (command == "blackswan") {
        report = fv::blackswan_experiment(ctx, x.t_max, x.s_max, x.repeats);
    } else if (command == "mitigate") {
        report = fv::mitigation_experiment(ctx, x.setups, x.n_seeds);
    }
    report.config = fv::to_json(config);
    fv::write_report(report, config.output_dir);
    print_summary(report, config.output_dir);
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Fairness variance experiments: seeded MLP training and order-level analyses"};
    app.require_subcommand(1);
    Overrides o;

    struct Entry {
        const char* name;
        const char* help;
    };
    const Entry entries[] = {
        {"generate", "Generate the synthetic dataset and write its splits"},
        {"train", "Train one run and write its trajectory"},
        {"decouple", "Vary weight init and/or reshuffle seeds; variances and pairwise Pearson"},
        {"changes", "Cumulative per-subgroup prediction changes over the window"},
        {"uncertainty", "MC-dropout uncertainty ECDFs per subgroup"},
        {"suffix", "Fine-tune checkpoints on the last b batches of donor orders"},
        {"manipulate", "Fine-tune checkpoints on ratio-controlled orders"},
        {"proxy", "KS test between multi-run finals and one run's window"},
        {"blackswan", "Best AO and Hausdorff-to-best-front surfaces over (t, s)"},
        {"mitigate", "Reweighing / EO penalty versus EqualOrder / AdvOrder"},
        {"metrics", "Fairness metrics of a predictions CSV (pred, label, sensitive)"},
    };
    for (const auto& e : entries) {
        CLI::App* cmd = app.add_subcommand(e.name, e.help);
        if (std::string(e.name) == "metrics") {
            cmd->add_option("-p,--predictions", o.predictions, "CSV with prediction, label and sensitive columns")
                ->required();
            cmd->add_option("--pred-column", o.pred_column, "Prediction column name");
            cmd->add_option("--label-column", o.label_column, "Label column name");
            cmd->add_option("--sensitive-column", o.sensitive_column, "Sensitive column name");
            cmd->add_option("-o,--output", o.output, "Also write report.json here");
            continue;
        }
        add_common(cmd, o);
        if (std::string(e.name) != "generate") {
            add_training(cmd, o);
        }
        if (std::string(e.name) == "decouple") {
            cmd->add_option("--runs", o.runs, "Number of runs");
            cmd->add_option("--mode", o.mode, "both_random, fixed_reshuffle or fixed_weight_init");
        }
        if (std::string(e.name) == "suffix") {
            cmd->add_flag("--common-order", o.common_order, "One full epoch of a fresh random order instead");
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        if (command == "metrics") {
            return run_metrics(o);
        }
        return run_experiment(command, resolve_config(o), o);
    } catch (const fv::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const fv::DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "runtime error: %s\n", e.what());
        return kExitRuntime;
    }
}
