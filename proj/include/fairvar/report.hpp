#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairvar/stats.hpp"

namespace fairvar {

/// Named numeric columns; the plot-ready long format of every experiment.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    Table() = default;
    explicit Table(std::vector<std::string> names) : columns(std::move(names)) {}

    void add_row(std::vector<double> row);
    std::vector<double> column(const std::string& name) const;
    std::size_t column_index(const std::string& name) const;
};

struct ExperimentReport {
    std::string name;
    /// Echo of the full run configuration, set by the caller.
    nlohmann::json config;
    /// Experiment-specific parameters and every seed used.
    nlohmann::json parameters;
    std::map<std::string, double> summary;
    std::vector<Trajectory> trajectories;
    std::map<std::string, Table> tables;
};

/// `epoch,f1,avg_odds,...` with six decimals; NaN cells print as `nan`.
std::string trajectory_csv(const Trajectory& trajectory);
std::string table_csv(const Table& table);
nlohmann::json report_json(const ExperimentReport& report);

/// Writes report.json, trajectory_<run>.csv and <table>.csv into `dir`.
/// Every file is written to a temporary name and renamed into place.
void write_report(const ExperimentReport& report, const std::filesystem::path& dir);

void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace fairvar
