#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "repmtl/errors.hpp"
#include "repmtl/losses.hpp"

namespace repmtl {

/// Bad user input (config or data file). The CLI maps it to exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Reads a task CSV: header `x1,...,xp,y`, one sample per row, comma
/// separated, decimal point. Errors name the file and the 1-based line.
TaskData read_task_csv(const std::filesystem::path& path);

void write_task_csv(const std::filesystem::path& path, const TaskData& data);

/// %.17g: enough digits to round-trip any double.
std::string format_double(double v);

/// Writes `content` to a sibling temp file, then renames it over `path`.
void atomic_write(const std::filesystem::path& path, const std::string& content);

nlohmann::json to_json(const Eigen::VectorXd& v);
nlohmann::json to_json(const Eigen::MatrixXd& m);  ///< array of rows

Eigen::VectorXd vector_from_json(const nlohmann::json& j, const std::string& where);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& where);

}  // namespace repmtl
