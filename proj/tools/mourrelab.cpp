// mourrelab: one subcommand per experiment plus `validate`.
// Exit status: 0 all checks pass, 1 a check failed, 2 invalid config, 3 runtime error.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "mourrelab/errors.hpp"
#include "mourrelab/experiment.hpp"

namespace {

std::string read_file(const std::string& path) {
  if (path == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  std::ifstream is(path, std::ios::binary);
  if (!is) throw mourrelab::ConfigError({fmt::format("<file>: cannot read {}", path)});
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  using namespace mourrelab;
  CLI::App app{"Finite-volume checks for Anderson-type operators with sparse bump potentials"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string config_path, output, format;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "JSON config file ('-' for stdin)")->required();
  };

  auto* validate_cmd = app.add_subcommand("validate", "Parse a config and print it with defaults applied");
  add_common(validate_cmd);

  std::vector<std::pair<CLI::App*, Experiment>> runners;
  for (std::string_view name : experiment_names()) {
    auto* sub = app.add_subcommand(std::string(name), fmt::format("Run the {} experiment", name));
    add_common(sub);
    sub->add_option("-o,--output", output, "Data file path (overrides output_path)");
    sub->add_option("-f,--format", format, "csv or json (overrides format)")->check(CLI::IsMember({"csv", "json"}));
    runners.emplace_back(sub, *parse_experiment(name));
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate_cmd->parsed()) {
      const ExperimentConfig c = validate(read_file(config_path));
      fmt::print("ok: {} (dim {}, {} seed(s))\n", to_string(c.experiment), c.dim, c.seeds.size());
      return 0;
    }
    for (const auto& [sub, experiment] : runners) {
      if (!sub->parsed()) continue;
      ExperimentConfig c = validate(read_file(config_path), experiment);
      if (!output.empty()) c.output_path = output;
      if (!format.empty()) c.format = format == "csv" ? OutputFormat::Csv : OutputFormat::Json;
      const RunManifest m = run(c);
      for (const auto& check : m.checks)
        fmt::print("{} {} (value {:.6g}, threshold {:.6g})\n", check.pass ? "PASS" : "FAIL", check.name, check.value,
                   check.threshold);
      for (const auto& f : m.data_files) fmt::print("wrote {}\n", f);
      fmt::print("wrote {}.manifest.json ({:.2f} s)\n", m.data_files.front(), m.wall_time_seconds);
      return m.pass() ? 0 : 1;
    }
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 3;
}
