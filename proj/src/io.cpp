#include "repmtl/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace repmtl {

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool parse_double(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

TaskData read_task_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path.string() + ": cannot open file");
  const std::string where = path.string();

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw InputError(where + ":1: empty file");
  ++line_no;
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_commas(line);
  if (header.size() < 2) throw InputError(where + ":1: header needs x1..xp and y columns");
  const std::size_t p = header.size() - 1;
  for (std::size_t j = 0; j < p; ++j) {
    if (trim(header[j]) != "x" + std::to_string(j + 1)) {
      throw InputError(where + ":1: expected header column 'x" + std::to_string(j + 1) +
                       "', found '" + trim(header[j]) + "'");
    }
  }
  if (trim(header.back()) != "y") throw InputError(where + ":1: last header column must be 'y'");

  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != p + 1) {
      throw InputError(where + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(p + 1) + " fields, found " + std::to_string(cells.size()));
    }
    for (std::size_t j = 0; j < cells.size(); ++j) {
      double v;
      if (!parse_double(cells[j], v) || !std::isfinite(v)) {
        throw InputError(where + ":" + std::to_string(line_no) + ": non-numeric value '" +
                         trim(cells[j]) + "' in column " + std::to_string(j + 1));
      }
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw InputError(where + ": no data rows");

  const auto n = static_cast<Eigen::Index>(rows);
  const auto cols = static_cast<Eigen::Index>(p + 1);
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> table(
      values.data(), n, cols);
  return TaskData(table.leftCols(cols - 1), table.col(cols - 1));
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_task_csv(const std::filesystem::path& path, const TaskData& data) {
  std::string out;
  for (Eigen::Index j = 0; j < data.p(); ++j) out += "x" + std::to_string(j + 1) + ",";
  out += "y\n";
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    for (Eigen::Index j = 0; j < data.p(); ++j) out += format_double(data.X()(i, j)) + ",";
    out += format_double(data.Y()(i)) + "\n";
  }
  atomic_write(path, out);
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

nlohmann::json to_json(const Eigen::VectorXd& v) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

nlohmann::json to_json(const Eigen::MatrixXd& m) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) j.push_back(to_json(Eigen::VectorXd(m.row(i).transpose())));
  return j;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array()) throw InputError(where + ": expected an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InputError(where + ": expected an array of numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw InputError(where + ": expected a non-empty array of rows");
  const Eigen::VectorXd first = vector_from_json(j[0], where);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), first.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Eigen::VectorXd row = vector_from_json(j[i], where);
    if (row.size() != first.size()) throw InputError(where + ": ragged matrix");
    m.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return m;
}

}  // namespace repmtl
