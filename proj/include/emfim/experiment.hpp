#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "emfim/baselines.hpp"
#include "emfim/em.hpp"
#include "emfim/error.hpp"
#include "emfim/io.hpp"
#include "emfim/models/gmm.hpp"
#include "emfim/models/ssm.hpp"
#include "emfim/models/synthetic.hpp"
#include "emfim/report.hpp"
#include "emfim/spsa.hpp"

namespace emfim {

enum class Command { fit, fim, dm, compare };
enum class FimMethod { spsa, louis, oakes, sem };
enum class ReferenceSource { oracle, file, none };

inline const char* to_string(Command c) {
  switch (c) {
    case Command::fit: return "fit";
    case Command::fim: return "fim";
    case Command::dm: return "dm";
    case Command::compare: return "compare";
  }
  return "?";
}

inline const char* to_string(FimMethod m) {
  switch (m) {
    case FimMethod::spsa: return "spsa";
    case FimMethod::louis: return "louis";
    case FimMethod::oakes: return "oakes";
    case FimMethod::sem: return "sem";
  }
  return "?";
}

struct ExperimentConfig {
  std::string model = "gmm";  ///< gmm | ssm | synthetic-quadratic
  nlohmann::json model_params = nlohmann::json::object();
  std::size_t n = 750;
  std::optional<Vector> true_theta;  ///< simulation parameter when no data file is given
  std::optional<std::string> data_file;
  std::uint64_t data_seed = 1;
  Vector theta0;
  std::optional<Vector> theta_star;  ///< skip EM and evaluate here
  EMConfig em;
  SPSAConfig spsa;
  double oakes_step = 1e-4;
  std::optional<double> sem_stability_tol;  ///< default sqrt(delta)
  std::size_t dm_samples = 50;
  double dm_c = 0.01;
  bool louis = true, oakes = true, sem = true, spsa_dm = true;
  ReferenceSource reference = ReferenceSource::none;
  std::optional<std::string> reference_file;
  bool reference_inverse_scaled = false;
  std::optional<std::string> output;

  Command command = Command::compare;
  FimMethod fim_method = FimMethod::spsa;
  DMMethod dm_method = DMMethod::sem;
};

namespace config_detail {

inline Vector vector_from(const nlohmann::json& j, const char* key) {
  if (!j.is_array()) throw ConfigError(std::string(key) + " must be an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(std::string(key) + " must contain only numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

inline Matrix matrix_from(const nlohmann::json& j, const char* key) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw ConfigError(std::string(key) + " must be an array of rows");
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Vector row = vector_from(j[i], key);
    if (row.size() != m.cols()) throw ConfigError(std::string(key) + " has ragged rows");
    m.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return m;
}

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

inline nlohmann::json to_json(const Vector& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

}  // namespace config_detail

inline FimMode parse_mode(const std::string& s) {
  if (s == "expected") return FimMode::expected;
  if (s == "observed") return FimMode::observed;
  throw ConfigError("mode must be 'expected' or 'observed', got '" + s + "'");
}

inline GradientSource parse_gradient_source(const std::string& s) {
  if (s == "direct_S" || s == "direct") return GradientSource::direct_score;
  if (s == "q_differences") return GradientSource::q_differences;
  throw ConfigError("gradient_source must be 'direct_S' or 'q_differences', got '" + s + "'");
}

inline FimMethod parse_fim_method(const std::string& s) {
  if (s == "spsa") return FimMethod::spsa;
  if (s == "louis") return FimMethod::louis;
  if (s == "oakes") return FimMethod::oakes;
  if (s == "sem") return FimMethod::sem;
  throw ConfigError("fim method must be spsa|louis|oakes|sem, got '" + s + "'");
}

inline DMMethod parse_dm_method(const std::string& s) {
  if (s == "sem") return DMMethod::sem;
  if (s == "spsa") return DMMethod::spsa;
  if (s == "fd") return DMMethod::oracle_fd;
  throw ConfigError("dm method must be sem|spsa|fd, got '" + s + "'");
}

/**
 * Reads the nested JSON configuration. Unknown top-level keys are rejected
 * so that typos surface as configuration errors.
 */
inline ExperimentConfig parse_config_unchecked(const nlohmann::json& j) {
  using namespace config_detail;
  static const std::vector<std::string> known = {"model", "model_params", "n", "true_theta", "data", "theta0",
                                                 "theta_star", "em", "spsa", "baselines", "reference", "output"};
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("unknown config key '" + key + "'");

  ExperimentConfig c;
  c.model = get_or<std::string>(j, "model", "gmm");
  if (c.model != "gmm" && c.model != "ssm" && c.model != "synthetic-quadratic")
    throw ConfigError("model must be gmm, ssm or synthetic-quadratic, got '" + c.model + "'");
  if (j.contains("model_params")) c.model_params = j["model_params"];
  const auto n = get_or<long long>(j, "n", c.model == "ssm" ? 100 : 750);
  if (n < 1) throw ConfigError("n must be at least 1");
  c.n = static_cast<std::size_t>(n);
  if (j.contains("true_theta")) c.true_theta = vector_from(j["true_theta"], "true_theta");
  if (j.contains("theta0")) c.theta0 = vector_from(j["theta0"], "theta0");
  if (j.contains("theta_star") && !j["theta_star"].is_null()) c.theta_star = vector_from(j["theta_star"], "theta_star");

  if (j.contains("data")) {
    const auto& d = j["data"];
    if (d.contains("file") && !d["file"].is_null()) c.data_file = d["file"].get<std::string>();
    c.data_seed = get_or<std::uint64_t>(d, "seed", c.data_seed);
  }
  if (j.contains("em")) {
    c.em.delta = get_or<double>(j["em"], "delta", c.em.delta);
    c.em.max_iterations = get_or<std::size_t>(j["em"], "max_iterations", c.em.max_iterations);
  }
  if (j.contains("spsa")) {
    const auto& s = j["spsa"];
    c.spsa.c = get_or<double>(s, "c", c.spsa.c);
    c.spsa.N = get_or<std::size_t>(s, "N", c.spsa.N);
    c.spsa.seed = get_or<std::uint64_t>(s, "seed", c.spsa.seed);
    c.spsa.mode = parse_mode(get_or<std::string>(s, "mode", to_string(c.spsa.mode)));
    c.spsa.gradient_source =
        parse_gradient_source(get_or<std::string>(s, "gradient_source", to_string(c.spsa.gradient_source)));
    c.spsa.threads = get_or<std::size_t>(s, "threads", 0);
  }
  if (j.contains("baselines")) {
    const auto& b = j["baselines"];
    c.louis = get_or<bool>(b, "louis", c.louis);
    c.oakes = get_or<bool>(b, "oakes", c.oakes);
    c.sem = get_or<bool>(b, "sem", c.sem);
    c.spsa_dm = get_or<bool>(b, "spsa_dm", c.spsa_dm);
    c.oakes_step = get_or<double>(b, "oakes_step", c.oakes_step);
    if (b.contains("sem_stability_tol") && !b["sem_stability_tol"].is_null())
      c.sem_stability_tol = b["sem_stability_tol"].get<double>();
    c.dm_samples = get_or<std::size_t>(b, "dm_samples", c.dm_samples);
    c.dm_c = get_or<double>(b, "dm_c", c.dm_c);
  }
  if (j.contains("reference")) {
    const auto& r = j["reference"];
    const auto src = get_or<std::string>(r, "source", "none");
    if (src == "oracle") c.reference = ReferenceSource::oracle;
    else if (src == "file") c.reference = ReferenceSource::file;
    else if (src == "none") c.reference = ReferenceSource::none;
    else throw ConfigError("reference.source must be oracle|file|none");
    if (r.contains("file")) c.reference_file = r["file"].get<std::string>();
    const auto kind = get_or<std::string>(r, "kind", "fim");
    if (kind != "fim" && kind != "inverse_scaled") throw ConfigError("reference.kind must be fim|inverse_scaled");
    c.reference_inverse_scaled = kind == "inverse_scaled";
  }
  if (j.contains("output") && !j["output"].is_null()) c.output = j["output"].get<std::string>();
  return c;
}

/// Validated configuration; JSON type errors surface as ConfigError.
inline ExperimentConfig parse_config(const nlohmann::json& j) {
  try {
    return parse_config_unchecked(j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(e.what());
  }
}

/// Parses a config file; relative data and reference paths are taken relative to the file's directory.
inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  ExperimentConfig c;
  try {
    c = parse_config(nlohmann::json::parse(in, nullptr, true, true));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  auto resolve = [&](std::optional<std::string>& p) {
    if (p && std::filesystem::path(*p).is_relative()) p = (base / *p).string();
  };
  resolve(c.data_file);
  resolve(c.reference_file);
  return c;
}

/// Normalized configuration echo; excludes the thread count, which never changes results.
inline nlohmann::json echo_config(const ExperimentConfig& c) {
  using config_detail::to_json;
  nlohmann::json j;
  j["model"] = c.model;
  j["model_params"] = c.model_params;
  j["n"] = c.n;
  j["true_theta"] = c.true_theta ? to_json(*c.true_theta) : nlohmann::json(nullptr);
  j["data"] = {{"file", c.data_file ? nlohmann::json(*c.data_file) : nlohmann::json(nullptr)}, {"seed", c.data_seed}};
  j["theta0"] = to_json(c.theta0);
  j["theta_star"] = c.theta_star ? to_json(*c.theta_star) : nlohmann::json(nullptr);
  j["em"] = {{"delta", c.em.delta}, {"max_iterations", c.em.max_iterations}};
  j["spsa"] = {{"c", c.spsa.c},
               {"N", c.spsa.N},
               {"seed", c.spsa.seed},
               {"mode", to_string(c.spsa.mode)},
               {"gradient_source", to_string(c.spsa.gradient_source)}};
  j["baselines"] = {{"louis", c.louis},           {"oakes", c.oakes},     {"sem", c.sem},
                    {"spsa_dm", c.spsa_dm},       {"oakes_step", c.oakes_step},
                    {"sem_stability_tol", c.sem_stability_tol ? *c.sem_stability_tol : std::sqrt(c.em.delta)},
                    {"dm_samples", c.dm_samples}, {"dm_c", c.dm_c}};
  const char* src = c.reference == ReferenceSource::oracle ? "oracle" : c.reference == ReferenceSource::file ? "file" : "none";
  j["reference"] = {{"source", src},
                    {"file", c.reference_file ? nlohmann::json(*c.reference_file) : nlohmann::json(nullptr)},
                    {"kind", c.reference_inverse_scaled ? "inverse_scaled" : "fim"}};
  j["command"] = to_string(c.command);
  j["fim_method"] = to_string(c.fim_method);
  j["dm_method"] = to_string(c.dm_method);
  return j;
}

/// Failure inside one stage of an experiment, tagged with that stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause, bool config)
      : Error(stage + ": " + cause.what()), stage_(std::move(stage)), config_(config) {}
  const std::string& stage() const { return stage_; }
  bool is_config_error() const { return config_; }

 private:
  std::string stage_;
  bool config_;
};

namespace experiment_detail {

template <class Fn>
auto stage(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const ConfigError& e) {
    throw StageError(name, e, true);
  } catch (const Error& e) {
    throw StageError(name, e, false);
  }
}

inline std::vector<std::string> coordinate_names(const std::string& model, std::size_t d) {
  if (model == "gmm") return {"pi", "mu1", "mu2"};
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= d; ++i) out.push_back((model == "ssm" ? "Q" : "theta") + std::to_string(i));
  return out;
}

inline ssm::Spec ssm_spec_from(const nlohmann::json& p, std::size_t n) {
  using config_detail::matrix_from;
  using config_detail::vector_from;
  ssm::Spec s = ssm::three_state_spec(n);
  if (p.contains("A")) s.A = matrix_from(p["A"], "model_params.A");
  if (p.contains("D")) s.D = matrix_from(p["D"], "model_params.D");
  if (p.contains("R")) s.R = matrix_from(p["R"], "model_params.R");
  if (p.contains("mu")) s.mu = vector_from(p["mu"], "model_params.mu");
  if (p.contains("Sigma")) s.Sigma = matrix_from(p["Sigma"], "model_params.Sigma");
  s.validate();
  return s;
}

/// Everything except the model-specific oracle.
template <EMModel M>
Report run_with_model(const ExperimentConfig& cfg, const M& model, const std::optional<typename M::Data>& file_data,
                      const Vector& default_true_theta, const std::function<std::optional<NamedMatrix>(const Vector&)>& oracle) {
  Report r;
  r.command = to_string(cfg.command);
  r.model = cfg.model;
  r.coordinates = coordinate_names(cfg.model, model.dim());
  r.config_echo = echo_config(cfg);

  const auto data = stage("data", [&]() -> typename M::Data {
    if (file_data) return *file_data;
    const Vector truth = cfg.true_theta.value_or(default_true_theta);
    RandomStream rng(cfg.data_seed, 0, StreamPurpose::aux);
    return sample_data(model, truth, cfg.n, rng);
  });
  r.n = data.size();

  const bool wants_sem = cfg.command == Command::fit ? false
                         : cfg.command == Command::fim ? cfg.fim_method == FimMethod::sem
                         : cfg.command == Command::dm  ? cfg.dm_method == DMMethod::sem
                                                       : cfg.sem && HasCompleteInfo<M>;
  const bool fixed_theta = cfg.theta_star.has_value() && cfg.command != Command::fit;
  if (fixed_theta && wants_sem && cfg.command != Command::compare)
    throw StageError("config", ConfigError("SEM needs the EM trace; remove theta_star"), true);

  std::optional<EMTrace> trace;
  if (!fixed_theta) {
    trace = stage("em", [&] {
      if (cfg.theta0.size() == 0) throw ConfigError("theta0 is required to run EM");
      return run_em(model, data, cfg.theta0, cfg.em);
    });
    r.em_run = true;
    r.iterations = trace->iterations;
    r.converged = trace->converged;
  } else if (wants_sem) {
    r.notes.push_back("SEM skipped: theta_star is fixed, so there is no EM trace");
  }
  const Vector theta_star = trace ? trace->theta_star() : *cfg.theta_star;
  stage("theta_star", [&] {
    validate_param(model, theta_star, "theta_star");
    return 0;
  });
  r.theta_star = theta_star;
  if (cfg.command == Command::fit) return r;

  auto add_spsa = [&](FimMode mode) {
    SPSAConfig sc = cfg.spsa;
    sc.mode = mode;
    const FIMEstimate est = stage("spsa", [&] { return estimate_fim(model, theta_star, data, sc); });
    r.information.push_back({std::string("spsa_") + to_string(mode), est.matrix, est.standard_error()});
  };
  auto add_louis = [&] {
    r.information.push_back({"louis", stage("louis", [&] { return louis_fim(model, theta_star, data); }), {}});
  };
  auto add_oakes = [&] {
    r.information.push_back(
        {"oakes", stage("oakes", [&] { return oakes_fim(model, theta_star, data, cfg.oakes_step); }), {}});
  };
  const double sem_tol = cfg.sem_stability_tol.value_or(std::sqrt(cfg.em.delta));
  auto sem_estimate = [&] {
    return stage("sem", [&] {
      if (!trace) throw ConfigError("SEM needs an EM run");
      return sem_dm(model, data, *trace, theta_star, sem_tol);
    });
  };
  auto add_dm = [&](DMMethod method) {
    DMEstimate est = method == DMMethod::sem ? sem_estimate()
                     : method == DMMethod::spsa
                         ? stage("spsa_dm", [&] {
                             return spsa_dm(model, data, theta_star, cfg.dm_c, cfg.dm_samples, cfg.spsa.seed, 1);
                           })
                         : stage("fd_dm", [&] { return fd_dm(model, data, theta_star); });
    r.dm.push_back({std::string("dm_") + to_string(method), est.matrix, {}});
    return est;
  };

  switch (cfg.command) {
    case Command::fim:
      switch (cfg.fim_method) {
        case FimMethod::spsa: add_spsa(cfg.spsa.mode); break;
        case FimMethod::louis: add_louis(); break;
        case FimMethod::oakes: add_oakes(); break;
        case FimMethod::sem: {
          const DMEstimate dm = add_dm(DMMethod::sem);
          r.information.push_back({"sem", stage("sem", [&] { return sem_fim(model, dm, theta_star, data); }), {}});
          break;
        }
      }
      break;
    case Command::dm:
      add_dm(cfg.dm_method);
      if (cfg.dm_method != DMMethod::oracle_fd) add_dm(DMMethod::oracle_fd);
      break;
    case Command::compare: {
      if (cfg.louis && HasCompleteInfo<M>) add_louis();
      if (cfg.oakes) add_oakes();
      if constexpr (HasObservedLoglik<M>) {
        r.information.push_back(
            {"fd_observed", stage("fd_observed", [&] { return fd_observed_fim(model, theta_star, data); }), {}});
      }
      if (cfg.sem && HasCompleteInfo<M> && trace) {
        const DMEstimate dm = add_dm(DMMethod::sem);
        r.information.push_back({"sem", stage("sem", [&] { return sem_fim(model, dm, theta_star, data); }), {}});
      }
      if (cfg.spsa_dm) add_dm(DMMethod::spsa);
      if (!r.dm.empty()) add_dm(DMMethod::oracle_fd);
      add_spsa(FimMode::observed);
      add_spsa(FimMode::expected);
      break;
    }
    case Command::fit: break;
  }

  if (cfg.reference == ReferenceSource::file) {
    if (!cfg.reference_file) throw StageError("reference", ConfigError("reference.file is required"), true);
    r.reference = NamedMatrix{"reference", stage("reference", [&] { return io::read_matrix(*cfg.reference_file); }), {}};
    r.reference_is_inverse_scaled = cfg.reference_inverse_scaled;
  } else if (cfg.reference == ReferenceSource::oracle) {
    r.reference = stage("reference", [&] { return oracle(theta_star); });
    if (!r.reference) r.notes.push_back("no oracle available for this model");
  }
  stage("report", [&] {
    compute_error_table(r);
    return 0;
  });

  const NamedMatrix* louis = nullptr;
  const NamedMatrix* sem = nullptr;
  for (const auto& m : r.information) {
    if (m.name == "louis") louis = &m;
    if (m.name == "sem") sem = &m;
  }
  if (louis && sem) {
    const double e = spectral_rel_error(sem->matrix, louis->matrix);
    if (e > 0.02)
      r.notes.push_back("SEM information differs from Louis by relative spectral error " + std::to_string(e));
  }
  return r;
}

}  // namespace experiment_detail

/**
 * End-to-end run: data (file or seeded simulation), EM fit, requested
 * information/DM estimates, reference comparison. Deterministic given the
 * configuration. Errors are rethrown as StageError naming the failing stage.
 */
inline Report run_experiment(const ExperimentConfig& cfg) {
  using namespace experiment_detail;
  stage("config", [&] {
    cfg.em.validate();
    cfg.spsa.validate();
    return 0;
  });

  if (cfg.model == "gmm") {
    const gmm::Model model;
    std::optional<gmm::Data> file_data;
    if (cfg.data_file) file_data = stage("data", [&] { return io::read_gmm_data(*cfg.data_file); });
    auto oracle = [&](const Vector& t) -> std::optional<NamedMatrix> {
      const std::size_t n = file_data ? file_data->size() : cfg.n;
      return NamedMatrix{"quadrature_expected", gmm::expected_fim_oracle(gmm::Params::from_vector(t), n), {}};
    };
    return run_with_model(cfg, model, file_data, Vector{{2.0 / 3.0, 3.0, 0.0}}, oracle);
  }
  if (cfg.model == "ssm") {
    const auto spec = stage("config", [&] { return ssm_spec_from(cfg.model_params, cfg.n); });
    const ssm::Model model(spec);
    std::optional<ssm::Data> file_data;
    if (cfg.data_file) file_data = stage("data", [&] { return io::read_ssm_data(*cfg.data_file); });
    auto oracle = [&](const Vector& t) -> std::optional<NamedMatrix> {
      ssm::Spec s = spec;
      s.n = file_data ? file_data->size() : cfg.n;
      return NamedMatrix{"dense_gaussian_expected", ssm::dense_expected_fim(s, t), {}};
    };
    return run_with_model(cfg, model, file_data, Vector::Ones(spec.p()), oracle);
  }
  const auto model = stage("config", [&] {
    using config_detail::matrix_from;
    using config_detail::vector_from;
    const auto& p = cfg.model_params;
    if (!p.contains("center") || !p.contains("curvature"))
      throw ConfigError("synthetic-quadratic needs model_params.center and model_params.curvature");
    const Vector center = vector_from(p["center"], "model_params.center");
    const Matrix curvature = matrix_from(p["curvature"], "model_params.curvature");
    const Matrix missing = p.contains("missing") ? matrix_from(p["missing"], "model_params.missing")
                                                 : Matrix(Matrix::Zero(curvature.rows(), curvature.cols()));
    return synthetic::QuadraticModel(center, curvature, missing);
  });
  auto oracle = [&](const Vector&) -> std::optional<NamedMatrix> {
    return NamedMatrix{"curvature", model.curvature(), {}};
  };
  return run_with_model(cfg, model, std::optional<synthetic::Data>{}, model.center(), oracle);
}

/// Writes the structured report; the JSON text is a pure function of the report.
inline void write_report(const Report& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write report to " + path);
  out << to_json(r).dump(2) << '\n';
}

}  // namespace emfim
