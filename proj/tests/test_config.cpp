#include <doctest.h>

#include <fstream>

#include "fairvar/config.hpp"
#include "fairvar/errors.hpp"

using namespace fairvar;
using nlohmann::json;

TEST_CASE("presets")
{
    const RunConfig paper = preset_config(Preset::paper);
    CHECK(paper.train.hidden_sizes == std::vector<std::size_t>{64});
    CHECK(paper.train.batch_size == 128);
    CHECK(paper.train.learning_rate == 1e-3);
    CHECK(paper.train.epochs == 300);
    CHECK(paper.train.window_first == 100);
    CHECK(paper.train.window_last == 300);
    CHECK(paper.split_ratios == std::array<double, 3>{0.7, 0.1, 0.2});

    const RunConfig desk = preset_config(Preset::desk);
    CHECK(desk.train.epochs == 150);
    CHECK(desk.train.window_first == 80);
    CHECK(desk.train.window_last == 150);
    CHECK(desk.experiment.n_runs == 10);
    CHECK(desk.experiment.n_checkpoints == 40);
    CHECK(desk.experiment.checkpoint_runs == 8);
}

TEST_CASE("json application collects every problem")
{
    RunConfig c = preset_config(Preset::paper);
    std::vector<std::string> v;
    apply_json(c,
               json::parse(R"({"bogus": 1, "train": {"epochs": "x", "batch_size": -3, "extra": true},
                              "experiment": {"mode": "sideways"}, "dataset": {"source": "csv", "n": 5}})"),
               v);
    CHECK(v.size() == 6);
    auto has = [&](const std::string& s) {
        return std::any_of(v.begin(), v.end(), [&](const std::string& x) { return x.rfind(s, 0) == 0; });
    };
    CHECK(has("bogus"));
    CHECK(has("train.epochs"));
    CHECK(has("train.batch_size"));
    CHECK(has("train.extra"));
    CHECK(has("experiment.mode"));
    CHECK(has("dataset.n"));
}

TEST_CASE("echo round trip")
{
    RunConfig c = preset_config(Preset::desk);
    c.master_seed = 77;
    c.train.loss = LossKind::ce_plus_eo;
    c.experiment.ratio_values = {1.0 / 3.0, 7.0};
    c.experiment.setups = {MitigationSetup::reweighing};
    const json echo = to_json(c);
    RunConfig back = preset_config(Preset::paper);
    std::vector<std::string> v;
    apply_json(back, echo, v);
    CHECK(v.empty());
    CHECK(to_json(back) == echo);
    CHECK(back.experiment.ratio_values[0] == 1.0 / 3.0);
}

TEST_CASE("load_config layering")
{
    const auto path = std::filesystem::temp_directory_path() / "fairvar_config_test.json";
    {
        std::ofstream out(path);
        out << R"({"preset": "desk", "train": {"epochs": 20, "window": [5, 20]}})";
    }
    const RunConfig c = load_config(path, std::nullopt);
    CHECK(c.preset == Preset::desk);
    CHECK(c.train.epochs == 20);
    CHECK(c.train.learning_rate == preset_config(Preset::desk).train.learning_rate);
    const RunConfig p = load_config(path, Preset::paper);
    CHECK(p.preset == Preset::paper);
    CHECK(p.train.learning_rate == 1e-3);
    CHECK(p.train.epochs == 20);
    std::filesystem::remove(path);

    CHECK_THROWS_AS(load_config(std::filesystem::path("/nonexistent.json"), std::nullopt), ConfigError);
}

TEST_CASE("static and data violations")
{
    RunConfig c = preset_config(Preset::desk);
    CHECK(static_violations(c, "decouple").empty());
    c.experiment.n_runs = 1;
    c.split_ratios = {0.5, 0.1, 0.1};
    c.jobs = 0;
    CHECK(static_violations(c, "decouple").size() == 3);
    CHECK(static_violations(c, "train").size() == 2);

    RunConfig d = preset_config(Preset::desk);
    d.dataset.synth.n = 400;
    d.experiment.b_values = {0, 500};
    const Splits s = materialize(d);
    CHECK(data_violations(d, "suffix", s).size() == 1);
    CHECK(data_violations(d, "train", s).empty());
}
