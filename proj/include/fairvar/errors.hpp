#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace fairvar {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shape mismatch between a model layer and its input.
class DimensionError : public Error {
public:
    DimensionError(std::size_t layer, std::size_t expected, std::size_t actual);

    std::size_t layer() const noexcept { return layer_; }
    std::size_t expected() const noexcept { return expected_; }
    std::size_t actual() const noexcept { return actual_; }

private:
    std::size_t layer_;
    std::size_t expected_;
    std::size_t actual_;
};

/// Malformed tabular input. Row numbers are 1-based file lines (header = line 1).
class DataError : public Error {
public:
    enum class Kind { missing_column, non_binary_value, non_numeric_cell, empty_dataset, io, invalid };

    DataError(Kind kind, std::string message, std::size_t row = 0, std::string column = {});

    Kind kind() const noexcept { return kind_; }
    std::size_t row() const noexcept { return row_; }
    const std::string& column() const noexcept { return column_; }

private:
    Kind kind_;
    std::size_t row_;
    std::string column_;
};

/// A metric or statistic whose denominator vanishes on the given input.
class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

/// Every violated configuration field, collected before any work starts.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> violations);

    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    std::vector<std::string> violations_;
};

}  // namespace fairvar
