// Command-line front end: fit | fim | dm | compare.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "emfim/emfim.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitNotConverged = 4;

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> N;
  std::optional<double> c;
  std::optional<std::string> out;
  std::string mode;
  std::string fim_method = "spsa";
  std::string dm_method = "sem";
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "experiment configuration (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "master seed for data simulation and perturbations");
  cmd->add_option("--N", o.N, "number of Monte Carlo replicates");
  cmd->add_option("--c", o.c, "Bernoulli perturbation magnitude");
  cmd->add_option("--out", o.out, "structured report output path");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fisher information for EM estimates via simultaneous perturbation"};
  app.require_subcommand(1);
  Overrides o;

  auto* fit = app.add_subcommand("fit", "run EM only");
  add_common(fit, o);
  auto* fim = app.add_subcommand("fim", "estimate the Fisher information");
  add_common(fim, o);
  fim->add_option("--mode", o.mode, "expected | observed")->check(CLI::IsMember({"expected", "observed"}));
  fim->add_option("--method", o.fim_method, "spsa | louis | oakes | sem")
      ->check(CLI::IsMember({"spsa", "louis", "oakes", "sem"}));
  auto* dm = app.add_subcommand("dm", "estimate the Jacobian of the EM map");
  add_common(dm, o);
  dm->add_option("--method", o.dm_method, "sem | spsa | fd")->check(CLI::IsMember({"sem", "spsa", "fd"}));
  auto* compare = app.add_subcommand("compare", "run every applicable method and print the error table");
  add_common(compare, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    emfim::ExperimentConfig cfg = emfim::load_config(o.config_path);
    if (fit->parsed()) cfg.command = emfim::Command::fit;
    if (fim->parsed()) {
      cfg.command = emfim::Command::fim;
      cfg.fim_method = emfim::parse_fim_method(o.fim_method);
    }
    if (dm->parsed()) {
      cfg.command = emfim::Command::dm;
      cfg.dm_method = emfim::parse_dm_method(o.dm_method);
    }
    if (compare->parsed()) cfg.command = emfim::Command::compare;
    if (!o.mode.empty()) cfg.spsa.mode = emfim::parse_mode(o.mode);
    if (o.seed) cfg.spsa.seed = cfg.data_seed = *o.seed;
    if (o.N) cfg.spsa.N = *o.N;
    if (o.c) cfg.spsa.c = *o.c;
    if (o.out) cfg.output = *o.out;

    const emfim::Report report = emfim::run_experiment(cfg);
    if (cfg.output) emfim::write_report(report, *cfg.output);
    std::cout << emfim::render_text(report);
    if (report.em_run && !report.converged) {
      std::cerr << "error: EM did not converge within " << cfg.em.max_iterations << " iterations\n";
      return kExitNotConverged;
    }
    return 0;
  } catch (const emfim::StageError& e) {
    std::cerr << "error [" << e.stage() << "]: " << e.what() << '\n';
    return e.is_config_error() ? kExitConfig : kExitNumerical;
  } catch (const emfim::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const emfim::Error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return kExitNumerical;
  }
}
