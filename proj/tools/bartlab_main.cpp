#include <CLI11.hpp>
#include <iostream>
#include <string>

#include "bartlab/common.hpp"
#include "bartlab/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"bartlab: config-driven BART experiment harness"};
  app.require_subcommand(1);

  struct SubArgs {
    std::string config_path;
    int workers = 0;
    std::string out;
  };
  std::map<std::string, SubArgs> args;
  for (const std::string name : {"fit", "sweep", "exact", "diagnose"}) {
    CLI::App* sub = app.add_subcommand(
        name, name == "fit"     ? "run chains and write traces + summary.csv"
              : name == "sweep" ? "aggregate summary.csv and render SVG plots"
              : name == "exact" ? "exact stationary/gap/hitting-time tables"
                                : "recompute Gelman-Rubin from trace files");
    SubArgs& a = args[name];
    sub->add_option("--config", a.config_path, "experiment config file")
        ->required();
    sub->add_option("--workers", a.workers,
                    "worker threads (default: hardware concurrency)");
    sub->add_option("--out", a.out, "output directory override");
  }

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();
  const SubArgs& a = args[command];

  bartlab::ExperimentConfig config;
  try {
    config = bartlab::load_experiment_config(a.config_path);
    bartlab::apply_env_seed(config);
  } catch (const bartlab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  bartlab::CliOptions options;
  options.workers = a.workers;
  options.out_override = a.out;
  return bartlab::run_command(command, config, options);
}
