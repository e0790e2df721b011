#pragma once

#include <string>
#include <vector>

#include "bartlab/config.hpp"

namespace bartlab {

struct CliOptions {
  int workers = 0;           // <= 0 means hardware concurrency
  std::string out_override;  // replaces config.out_dir when nonempty
};

// Mean and standard error of the sample mean (sample sd / sqrt(k)); a single
// value has zero standard error.
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};
MeanSe mean_se(const std::vector<double>& values);

// BARTLAB_SEED, when set, replaces config.seed (decimal uint64).
void apply_env_seed(ExperimentConfig& config);

// Runs every (point x replicate x chain) task on a bounded worker pool,
// writes one trace CSV per task plus summary.csv, all byte-deterministic
// and independent of the worker count. Returns the process exit code.
int cmd_fit(const ExperimentConfig& config, const CliOptions& options);

// Aggregates summary.csv into mean +/- 1.96 SE per run point and renders one
// SVG per metric, one line per swept-axis value with x = n_train. Missing
// replicates produce a warning and exit code 1.
int cmd_sweep(const ExperimentConfig& config, const CliOptions& options);

// Builds the exact chain for every run point on the enumerated additive
// fixture and writes stationary / spectral-gap / hitting-time / OPT
// membership tables with a pass/fail stationarity column.
int cmd_exact(const ExperimentConfig& config, const CliOptions& options);

// Recomputes the Gelman-Rubin columns from the trace CSVs a fit run left in
// the output directory and writes diagnose.csv.
int cmd_diagnose(const ExperimentConfig& config, const CliOptions& options);

// Dispatch plus exception-to-exit-code mapping: 0 success, 1 incomplete
// output, 2 config error, 3 capacity error, 4 numerical failure.
int run_command(const std::string& command, const ExperimentConfig& config,
                const CliOptions& options);

}  // namespace bartlab
