#include "fairvar/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "fairvar/errors.hpp"

namespace fairvar {

namespace {

void append_number(std::string& out, double v)
{
    if (std::isnan(v)) {
        out += "nan";
        return;
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    out += buf;
}

}  // namespace

void Table::add_row(std::vector<double> row)
{
    if (row.size() != columns.size()) {
        throw std::invalid_argument("Table::add_row: expected " + std::to_string(columns.size()) + " cells, got " +
                                    std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
}

std::size_t Table::column_index(const std::string& name) const
{
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i] == name) {
            return i;
        }
    }
    throw std::out_of_range("Table: no column '" + name + "'");
}

std::vector<double> Table::column(const std::string& name) const
{
    const std::size_t idx = column_index(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
        out.push_back(r[idx]);
    }
    return out;
}

std::string trajectory_csv(const Trajectory& trajectory)
{
    std::string out = "epoch,f1,avg_odds,eopp,dp,acc,acc_a0y1,acc_a0y0,acc_a1y1,acc_a1y0\n";
    for (const auto& r : trajectory.records) {
        out += std::to_string(r.epoch);
        for (double v : {r.f1, r.avg_odds, r.eopp, r.dp, r.accuracy}) {
            out += ',';
            append_number(out, v);
        }
        for (double v : r.subgroup_accuracy) {
            out += ',';
            append_number(out, v);
        }
        out += '\n';
    }
    return out;
}

std::string table_csv(const Table& table)
{
    std::string out;
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
        out += (i ? "," : "") + table.columns[i];
    }
    out += '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) {
                out += ',';
            }
            append_number(out, row[i]);
        }
        out += '\n';
    }
    return out;
}

nlohmann::json report_json(const ExperimentReport& report)
{
    nlohmann::json j;
    j["experiment"] = report.name;
    j["config"] = report.config;
    j["parameters"] = report.parameters;
    j["summary"] = nlohmann::json::object();
    for (const auto& [k, v] : report.summary) {
        j["summary"][k] = std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
    }
    j["trajectories"] = nlohmann::json::array();
    for (const auto& t : report.trajectories) {
        j["trajectories"].push_back({{"run_id", t.run_id},
                                     {"weight_seed", t.weight_seed},
                                     {"shuffle_seed", t.shuffle_seed},
                                     {"file", "trajectory_" + std::to_string(t.run_id) + ".csv"}});
    }
    j["tables"] = nlohmann::json::array();
    for (const auto& [name, table] : report.tables) {
        j["tables"].push_back(name + ".csv");
    }
    return j;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents)
{
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error("cannot open '" + tmp.string() + "' for writing");
        }
        out << contents;
        out.flush();
        if (!out) {
            throw Error("failed writing '" + tmp.string() + "'");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw Error("cannot rename into '" + path.string() + "': " + ec.message());
    }
}

void write_report(const ExperimentReport& report, const std::filesystem::path& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw Error("cannot create output directory '" + dir.string() + "': " + ec.message());
    }
    for (const auto& t : report.trajectories) {
        write_file_atomic(dir / ("trajectory_" + std::to_string(t.run_id) + ".csv"), trajectory_csv(t));
    }
    for (const auto& [name, table] : report.tables) {
        write_file_atomic(dir / (name + ".csv"), table_csv(table));
    }
    write_file_atomic(dir / "report.json", report_json(report).dump(2) + "\n");
}

}  // namespace fairvar
