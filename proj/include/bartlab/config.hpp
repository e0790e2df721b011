#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bartlab/covariates.hpp"
#include "bartlab/samplers.hpp"

namespace bartlab {

// Flat INI-style text: "[section]" headers, "key = value" lines, '#' or ';'
// comment lines, blank lines ignored. Keys are returned as "section.key"
// paths; a duplicate path is an error.
std::map<std::string, std::string> parse_config_text(const std::string& text);
std::map<std::string, std::string> parse_config_file(const std::string& path);

struct DatasetSpec {
  enum class Kind { dgp, csv } kind = Kind::dgp;
  std::string name;  // row label; defaults to the dgp kind or the csv stem
  DgpSpec dgp;
  std::string csv_path;
  std::string target_column;
  long n_test = 2000;          // synthetic test-set size
  double test_fraction = 0.1;  // csv hold-out share
};

// The experiment lattice: each axis holds at least one value and the cross
// product (in declaration order, last axis fastest) is the set of run points.
struct ExperimentConfig {
  DatasetSpec dataset;

  std::vector<long> n_train{200};
  std::vector<TemperatureSchedule> temperatures{
      TemperatureSchedule::constant(1.0)};
  std::vector<int> m_values{10};
  std::vector<long> burn_ins{100};
  std::vector<BinStrategy> binnings{BinStrategy{}};
  std::vector<Priors::SplitPrior> split_priors{Priors::SplitPrior::uniform};
  std::vector<std::string> move_sets{"all"};  // all | grow_prune
  std::vector<SamplerVariant> samplers{SamplerVariant::default_sweep};
  std::vector<std::string> inits{"trivial"};  // trivial | greedy

  long iterations = 500;  // kept draws per chain, after burn-in
  int n_chains = 4;
  int replicates = 1;
  uint64_t seed = 1;
  std::string out_dir = "out";
  // Desk-scale caps (n_train <= 5000, kept iterations <= 2000, burn-in
  // <= 2000, replicates <= 10, n_test <= 2500) are lifted when true.
  bool paper_scale = false;

  Priors::SigmaMode sigma_mode = Priors::SigmaMode::inv_chi2;
  double sigma2 = 1.0;  // fixed-mode value, in scaled response units
  int r = 1;            // proposal steps, multistep sampler only

  int exact_max_internal = 1;
  int exact_opt_slack = 0;
};

// One lattice point. Replicates share the point and its hash.
struct RunPoint {
  long n_train = 200;
  size_t n_train_index = 0;  // position of n_train on its axis
  TemperatureSchedule temperature;
  int m = 10;
  long burn_in = 100;
  BinStrategy binning;
  Priors::SplitPrior split_prior = Priors::SplitPrior::uniform;
  std::string move_set = "all";
  SamplerVariant sampler = SamplerVariant::default_sweep;
  std::string init = "trivial";
  std::string hash;   // 16 lowercase hex digits
  std::string label;  // swept non-n_train axis values; "default" when none
};

ExperimentConfig experiment_config_from(
    const std::map<std::string, std::string>& entries);
ExperimentConfig load_experiment_config(const std::string& path);

// Field-path validation ("sweep.m: ...", "dataset.kind: ..."), including the
// desk-scale caps unless run.paper_scale lifts them.
void validate_experiment_config(const ExperimentConfig& config);

std::vector<RunPoint> expand_points(const ExperimentConfig& config);

// Sampler settings for one point; iterations = kept + burn-in, seed unset.
SamplerConfig sampler_config_for(const ExperimentConfig& config,
                                 const RunPoint& point);
MoveWeights move_weights_for(const std::string& move_set);

// FNV-1a (64-bit) over the canonical rendering of everything that identifies
// a run point: dataset, shared run settings, and the point's axis values.
// The replicate index and worker count are deliberately excluded, so all
// replicates of a point share the hash and identical configs hash equally.
std::string config_point_hash(const ExperimentConfig& config,
                              const RunPoint& point);

// Canonical single-token renderings shared by the hash, labels, and tables.
std::string render_temperature(const TemperatureSchedule& schedule);
std::string render_binning(const BinStrategy& strategy);
std::string render_sampler(SamplerVariant variant);
std::string render_split_prior(Priors::SplitPrior prior);

// Deterministic seed derivation. The shared synthetic test set uses one seed
// per config. Training draws, inits, and chain streams are keyed by the
// n_train axis position and the replicate, never by scheduling or by the
// kernel axes, so results are independent of the worker count and points
// differing only in kernel settings compare on common random numbers.
uint64_t test_seed(const ExperimentConfig& config);
uint64_t data_seed(const ExperimentConfig& config, size_t n_train_index,
                   int replicate);
uint64_t chain_base_seed(const ExperimentConfig& config, size_t n_train_index,
                         int replicate);
uint64_t init_seed(const ExperimentConfig& config, size_t n_train_index,
                   int replicate);

}  // namespace bartlab
