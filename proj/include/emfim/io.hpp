#pragma once

#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "emfim/error.hpp"
#include "emfim/models/gmm.hpp"
#include "emfim/models/ssm.hpp"

namespace emfim::io {

namespace detail {

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  return in;
}

inline std::vector<double> parse_numbers(const std::string& line, const std::string& where) {
  std::istringstream ss(line);
  std::vector<double> out;
  std::string tok;
  while (ss >> tok) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError(where + ": cannot parse '" + tok + "' as a number");
    }
  }
  return out;
}

inline bool blank(const std::string& line) { return line.find_first_not_of(" \t\r") == std::string::npos; }

}  // namespace detail

/// One observation per line; blank lines and lines starting with '#' are skipped.
inline gmm::Data read_gmm_data(const std::string& path) {
  auto in = detail::open_in(path);
  std::vector<double> y;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    if (detail::blank(line) || line.front() == '#') continue;
    const auto v = detail::parse_numbers(line, path + ":" + std::to_string(no));
    if (v.size() != 1) throw ConfigError(path + ":" + std::to_string(no) + ": expected exactly one value");
    y.push_back(v.front());
  }
  return gmm::Data(std::move(y));
}

inline void write_gmm_data(const std::string& path, const gmm::Data& data) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (double v : data.values()) out << v << '\n';
}

/// Header line with x_0, then one line of q whitespace-separated values per time step.
inline ssm::Data read_ssm_data(const std::string& path) {
  auto in = detail::open_in(path);
  std::string line;
  std::vector<double> x0;
  std::vector<std::vector<double>> rows;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    if (detail::blank(line) || line.front() == '#') continue;
    auto v = detail::parse_numbers(line, path + ":" + std::to_string(no));
    if (x0.empty()) {
      x0 = std::move(v);
      continue;
    }
    if (!rows.empty() && v.size() != rows.front().size())
      throw ConfigError(path + ":" + std::to_string(no) + ": inconsistent number of measurement values");
    rows.push_back(std::move(v));
  }
  if (x0.empty() || rows.empty()) throw ConfigError(path + ": needs an x_0 header line and at least one time step");
  Matrix y(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index t = 0; t < y.rows(); ++t)
    for (Eigen::Index j = 0; j < y.cols(); ++j) y(t, j) = rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)];
  return ssm::Data(Eigen::Map<const Vector>(x0.data(), static_cast<Eigen::Index>(x0.size())), std::move(y));
}

inline void write_ssm_data(const std::string& path, const ssm::Data& data) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index i = 0; i < data.x0().size(); ++i) out << (i ? " " : "") << data.x0()(i);
  out << '\n';
  for (Eigen::Index t = 0; t < data.y().rows(); ++t) {
    for (Eigen::Index j = 0; j < data.y().cols(); ++j) out << (j ? " " : "") << data.y()(t, j);
    out << '\n';
  }
}

/// Square matrix, one whitespace-separated row per line.
inline Matrix read_matrix(const std::string& path) {
  auto in = detail::open_in(path);
  std::string line;
  std::vector<std::vector<double>> rows;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    if (detail::blank(line) || line.front() == '#') continue;
    rows.push_back(detail::parse_numbers(line, path + ":" + std::to_string(no)));
  }
  if (rows.empty()) throw ConfigError(path + ": empty matrix file");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (rows[static_cast<std::size_t>(i)].size() != static_cast<std::size_t>(m.cols()))
      throw ConfigError(path + ": ragged matrix rows");
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return m;
}

}  // namespace emfim::io
