#pragma once

#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "emfim/linalg.hpp"
#include "emfim/types.hpp"

namespace emfim {

struct NamedMatrix {
  std::string name;
  Matrix matrix;
  Matrix standard_error;  ///< empty unless the matrix is a Monte Carlo estimate
};

struct ErrorRow {
  std::string estimate;
  std::string reference;
  double value = 0.0;  ///< ||estimate − reference|| / ||reference||, spectral norm
};

struct Report {
  std::string command;
  std::string model;
  std::vector<std::string> coordinates;
  std::size_t n = 0;
  Vector theta_star;
  bool em_run = false;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<NamedMatrix> information;  ///< Fisher information estimates
  std::vector<NamedMatrix> dm;           ///< EM-map Jacobians, matrix(i, j) = dM_j/dθ_i
  std::optional<NamedMatrix> reference;
  bool reference_is_inverse_scaled = false;
  std::vector<ErrorRow> errors;
  std::vector<std::string> notes;
  nlohmann::json config_echo;
};

/// (I / n)⁻¹, or nullopt when I is singular.
inline std::optional<Matrix> inverse_scaled(const Matrix& info, std::size_t n) {
  const Matrix scaled = info / static_cast<double>(n);
  Eigen::FullPivLU<Matrix> lu(scaled);
  if (!lu.isInvertible()) return std::nullopt;
  Matrix inv = lu.inverse();
  symmetrize_in_place(inv);
  return inv;
}

/// Fills report.errors: pairwise among information matrices, then each against the reference.
inline void compute_error_table(Report& report) {
  report.errors.clear();
  const auto& mats = report.information;
  for (std::size_t a = 0; a < mats.size(); ++a)
    for (std::size_t b = a + 1; b < mats.size(); ++b)
      report.errors.push_back({mats[b].name, mats[a].name, spectral_rel_error(mats[b].matrix, mats[a].matrix)});
  if (!report.reference) return;
  for (const auto& m : mats) {
    if (report.reference_is_inverse_scaled) {
      const auto inv = inverse_scaled(m.matrix, report.n);
      if (!inv) continue;
      report.errors.push_back({"(" + m.name + "/n)^-1", report.reference->name,
                               spectral_rel_error(*inv, report.reference->matrix)});
    } else {
      report.errors.push_back({m.name, report.reference->name, spectral_rel_error(m.matrix, report.reference->matrix)});
    }
  }
}

namespace report_detail {

inline nlohmann::json to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline nlohmann::json to_json(const Vector& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline nlohmann::json to_json(const NamedMatrix& m, std::size_t n, bool information) {
  nlohmann::json j;
  j["name"] = m.name;
  j["matrix"] = to_json(m.matrix);
  if (m.matrix.rows() == m.matrix.cols()) j["eigenvalues"] = to_json(Vector(symmetric_eigenvalues(m.matrix)));
  if (m.standard_error.size() > 0) j["standard_error"] = to_json(m.standard_error);
  if (information) {
    if (const auto inv = inverse_scaled(m.matrix, n)) j["inverse_scaled"] = to_json(*inv);
    else j["inverse_scaled"] = nullptr;
  }
  return j;
}

inline void print_matrix(std::ostream& os, const Matrix& m, const std::vector<std::string>& names) {
  auto name = [&](Eigen::Index i) {
    return static_cast<std::size_t>(i) < names.size() ? names[static_cast<std::size_t>(i)] : "#" + std::to_string(i);
  };
  os << std::setw(10) << "";
  for (Eigen::Index j = 0; j < m.cols(); ++j) os << std::setw(14) << name(j);
  os << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    os << std::setw(10) << name(i);
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << std::setw(14) << m(i, j);
    os << '\n';
  }
}

inline void print_vector(std::ostream& os, const Vector& v) {
  os << '(';
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v(i);
  os << ')';
}

}  // namespace report_detail

inline nlohmann::json to_json(const Report& r) {
  using report_detail::to_json;
  nlohmann::json j;
  j["command"] = r.command;
  j["model"] = r.model;
  j["coordinates"] = r.coordinates;
  j["n"] = r.n;
  j["theta_star"] = to_json(r.theta_star);
  j["em"] = {{"run", r.em_run}, {"iterations", r.iterations}, {"converged", r.converged}};
  j["information"] = nlohmann::json::array();
  for (const auto& m : r.information) j["information"].push_back(to_json(m, r.n, true));
  j["dm"] = nlohmann::json::array();
  for (const auto& m : r.dm) j["dm"].push_back(to_json(m, r.n, false));
  if (r.reference) {
    j["reference"] = to_json(*r.reference, r.n, false);
    j["reference"]["kind"] = r.reference_is_inverse_scaled ? "inverse_scaled" : "fim";
  } else {
    j["reference"] = nullptr;
  }
  j["errors"] = nlohmann::json::array();
  for (const auto& e : r.errors)
    j["errors"].push_back({{"estimate", e.estimate}, {"reference", e.reference}, {"relative_spectral_error", e.value}});
  j["notes"] = r.notes;
  j["config"] = r.config_echo;
  return j;
}

/// Human-readable summary, fixed 4-decimal matrices with coordinate headers.
inline std::string render_text(const Report& r) {
  using report_detail::print_matrix;
  using report_detail::print_vector;
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "model: " << r.model << "   command: " << r.command << "   n = " << r.n << '\n';
  os << "theta*: ";
  print_vector(os, r.theta_star);
  os << '\n';
  if (r.em_run)
    os << "EM: " << r.iterations << " iterations, " << (r.converged ? "converged" : "NOT converged") << '\n';

  for (const auto& m : r.information) {
    os << '\n' << m.name << ":\n";
    print_matrix(os, m.matrix, r.coordinates);
    os << "  eigenvalues: ";
    print_vector(os, symmetric_eigenvalues(m.matrix));
    os << '\n';
    if (const auto inv = inverse_scaled(m.matrix, r.n)) {
      os << "  (I/n)^-1:\n";
      print_matrix(os, *inv, r.coordinates);
    } else {
      os << "  (I/n)^-1: singular\n";
    }
  }
  for (const auto& m : r.dm) {
    os << '\n' << m.name << " (row i, column j = dM_j/dtheta_i):\n";
    print_matrix(os, m.matrix, r.coordinates);
    os << "  eigenvalues (real part): ";
    print_vector(os, real_eigenvalues(m.matrix));
    os << '\n';
  }
  if (r.reference) {
    os << '\n' << r.reference->name << (r.reference_is_inverse_scaled ? " [(I/n)^-1]" : "") << ":\n";
    print_matrix(os, r.reference->matrix, r.coordinates);
    os << "  eigenvalues: ";
    print_vector(os, symmetric_eigenvalues(r.reference->matrix));
    os << '\n';
  }
  if (!r.errors.empty()) {
    os << "\nrelative spectral errors ||estimate - reference|| / ||reference||:\n";
    for (const auto& e : r.errors)
      os << "  " << std::left << std::setw(28) << e.estimate << " vs " << std::setw(28) << e.reference << std::right
         << std::setw(10) << e.value << '\n';
  }
  for (const auto& note : r.notes) os << "note: " << note << '\n';
  return os.str();
}

}  // namespace emfim
