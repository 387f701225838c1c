#include "fairvar/errors.hpp"

#include <utility>

namespace fairvar {

namespace {

std::string join_violations(const std::vector<std::string>& violations)
{
    std::string message = "invalid configuration:";
    for (const auto& v : violations) {
        message += "\n  - " + v;
    }
    return message;
}

}  // namespace

DimensionError::DimensionError(std::size_t layer, std::size_t expected, std::size_t actual)
    : Error("dimension mismatch at layer " + std::to_string(layer) + ": expected input width " +
            std::to_string(expected) + ", got " + std::to_string(actual)),
      layer_(layer), expected_(expected), actual_(actual)
{
}

DataError::DataError(Kind kind, std::string message, std::size_t row, std::string column)
    : Error(std::move(message)), kind_(kind), row_(row), column_(std::move(column))
{
}

ConfigError::ConfigError(std::vector<std::string> violations)
    : Error(join_violations(violations)), violations_(std::move(violations))
{
}

}  // namespace fairvar
