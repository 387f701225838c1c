#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairvar/data.hpp"
#include "fairvar/experiments.hpp"
#include "fairvar/training.hpp"

namespace fairvar {

enum class Preset { paper, desk };

std::string preset_name(Preset preset);
Preset parse_preset(const std::string& name);

struct DatasetSource {
    bool synthetic = true;
    SynthSpec synth;
    std::filesystem::path csv_path;
    std::string label_column = "label";
    std::string sensitive_column = "sensitive";
};

struct ExperimentParams {
    std::size_t n_runs = 10;
    DecoupleMode mode = DecoupleMode::both_random;
    std::vector<std::size_t> b_values = {0, 10, 25, 50, 100};
    BatchSelection selection = BatchSelection::suffix;
    std::vector<double> ratio_values = {1.0 / 8.0, 1.0 / 3.0, 1.0, 3.0, 8.0};
    /// Sensitive group whose positive:negative ratio is varied; -1 picks
    /// the group with the smallest positive subgroup.
    int varied_group = -1;
    std::size_t checkpoint_runs = 50;
    std::size_t n_checkpoints = 1000;
    std::size_t t_max = 50;
    std::size_t s_max = 10;
    std::size_t repeats = 50;
    std::size_t passes = 1000;
    double mc_dropout_rate = 0.2;
    std::size_t proxy_runs = 30;
    std::size_t n_seeds = 10;
    std::vector<MitigationSetup> setups = {MitigationSetup::baseline, MitigationSetup::reweighing,
                                           MitigationSetup::eo_loss};
};

struct RunConfig {
    Preset preset = Preset::paper;
    DatasetSource dataset;
    std::array<double, 3> split_ratios = {0.7, 0.1, 0.2};
    std::uint64_t split_seed = 0;
    TrainConfig train;
    ExperimentParams experiment;
    std::uint64_t master_seed = 0;
    std::filesystem::path output_dir = "out";
    std::size_t jobs = 1;
};

RunConfig preset_config(Preset preset);

/// Applies the keys of `j` on top of `config`. Unknown keys and wrong types
/// are collected into `violations` rather than thrown one at a time.
void apply_json(RunConfig& config, const nlohmann::json& j, std::vector<std::string>& violations);

/// Preset (the override if given, else the file's "preset" key, else paper)
/// followed by the file's keys. Throws ConfigError listing every problem.
RunConfig load_config(const std::optional<std::filesystem::path>& path, std::optional<Preset> preset_override);

/// Full echo; feeding it back through apply_json reproduces `config`.
nlohmann::json to_json(const RunConfig& config);

/// Checks that do not need the data, for subcommand `command`.
std::vector<std::string> static_violations(const RunConfig& config, const std::string& command);

/// Loads or generates the dataset and splits it.
Splits materialize(const RunConfig& config);

/// Checks that need the training split (batch counts, pool sizes); empty
/// when `command` can run.
std::vector<std::string> data_violations(const RunConfig& config, const std::string& command, const Splits& splits);

ExperimentContext make_context(const RunConfig& config, Splits splits);

}  // namespace fairvar
