#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "icpm/errors.hpp"

namespace icpm {

inline constexpr const char* kVersion = "0.1.0";

/// Shortest-faithful fixed dialect: 17 significant digits.
inline std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// FNV-1a 64-bit hash, used to fingerprint configurations in output headers.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// CSV with the project-wide dialect: comma separators, '.' decimals,
/// 17 significant digits, '#' comment header lines, LF endings.
class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) fail(ErrorCode::config_error, "cannot open output file " + path.string());
  }

  void comment(const std::string& line) { out_ << "# " << line << "\n"; }

  void header(const std::vector<std::string>& cols) { write_cells(cols); }

  void row(const std::vector<std::string>& cells) { write_cells(cells); }

  void row(const std::vector<double>& vals) {
    std::vector<std::string> cells;
    cells.reserve(vals.size());
    for (double v : vals) cells.push_back(g17(v));
    write_cells(cells);
  }

 private:
  void write_cells(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  std::ofstream out_;
};

/// The metadata block every output file starts with.
inline std::vector<std::string> meta_lines(const std::string& config_hash, double rel_tol,
                                           double abs_tol, double event_tol) {
  return {
      std::string("icpm ") + kVersion,
      "config-hash: " + config_hash,
      "rel-tol: " + g17(rel_tol) + " abs-tol: " + g17(abs_tol) + " event-tol: " + g17(event_tol),
  };
}

inline nlohmann::json meta_json(const std::string& config_hash, double rel_tol, double abs_tol,
                                double event_tol) {
  return nlohmann::json{{"tool", std::string("icpm ") + kVersion},
                        {"config_hash", config_hash},
                        {"rel_tol", rel_tol},
                        {"abs_tol", abs_tol},
                        {"event_tol", event_tol}};
}

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) fail(ErrorCode::config_error, "expected a matrix");
  const auto rows = j.size();
  const auto cols = j[0].size();
  Eigen::MatrixXd m(rows, cols);
  for (size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols)
      fail(ErrorCode::config_error, "ragged matrix rows");
    for (size_t k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline nlohmann::json complex_list_to_json(const Eigen::VectorXcd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    a.push_back(nlohmann::json::array({v(i).real(), v(i).imag()}));
  return a;
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::config_error, "cannot open output file " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace icpm
