#include <hmono/hmono.hpp>

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Monotone-map laboratory for homogeneous power costs"};
  app.require_subcommand(0, 1);
  std::string config_path, out;
  long long seed = -1;
  int quad_nodes = 0;
  bool defaults = false;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "INI or JSON experiment configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "override run.seed");
  app.add_option("--out", out, "override run.out (report directory)");
  app.add_option("--quad-nodes", quad_nodes, "override quadrature.nodes_1d");
  app.add_option("--set", overrides, "override any field: section.key=value")->take_all();
  app.add_flag("--print-defaults", defaults, "print every configuration field with its default and exit");
  for (const auto& s : hmono::scenario_names()) app.add_subcommand(s, "run the " + s + " scenario")->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  if (defaults) {
    std::cout << hmono::print_defaults();
    return 0;
  }
  try {
    hmono::ExperimentConfig cfg = config_path.empty() ? hmono::ExperimentConfig{}
                                                      : hmono::ExperimentConfig::from_file(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw hmono::config_error("--set expects section.key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!app.get_subcommands().empty()) cfg.set("run.scenario", app.get_subcommands().front()->get_name());
    if (seed >= 0) cfg.set("run.seed", std::to_string(seed));
    if (!out.empty()) cfg.set("run.out", out);
    if (quad_nodes > 0) cfg.set("quadrature.nodes_1d", std::to_string(quad_nodes));
    const hmono::RunResult r = hmono::run(cfg);
    for (const auto& f : r.files) std::cout << f << "\n";
    if (!r.message.empty()) std::cerr << "hmono: " << r.message << "\n";
    return r.exit_code;
  } catch (const hmono::config_error& e) {
    std::cerr << "hmono: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "hmono: " << e.what() << "\n";
    return 3;
  }
}
