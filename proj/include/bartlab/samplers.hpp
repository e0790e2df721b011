#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "bartlab/model.hpp"
#include "bartlab/trees.hpp"

namespace bartlab {

// Temperature applied to the likelihood ratio in the acceptance probability.
// The linear schedule decays from T_max at iteration 0 to T_min at the last
// iteration, encouraging exploration during burn-in.
struct TemperatureSchedule {
  enum class Kind { constant, linear } kind = Kind::constant;
  double T = 1.0;      // constant
  double T_max = 3.0;  // linear
  double T_min = 1.0;

  double at(long iteration, long total_iterations) const;

  static TemperatureSchedule constant(double T);
  static TemperatureSchedule linear(double T_max, double T_min);
};

// default_sweep: Metropolis-within-Gibbs over trees with the conditional
// likelihood. marginalized: single-tree Metropolis-Hastings on the ensemble
// with leaf values integrated out. tempered: the marginalized kernel with
// T > 1. multistep: Q^r proposals, realizable only on enumerated spaces.
enum class SamplerVariant { default_sweep, marginalized, tempered, multistep };

struct SamplerConfig {
  SamplerVariant variant = SamplerVariant::default_sweep;
  int m = 200;
  MoveWeights weights;
  Priors priors;
  TemperatureSchedule temperature;
  int r = 1;  // proposal steps, multistep only
  bool lazy = false;
  long iterations = 11000;
  long burn_in = 1000;
  uint64_t seed = 0;
  RuleSelection selection = RuleSelection::pairs;
  bool keep_burnin = false;
};

void validate_config(const SamplerConfig& config);

// Leaf prior scale for the conditional kernel and the matching ridge
// parameter for the marginalized one; the two descriptions are linked by
// lambda = sigma^2 / sigma_mu^2.
double sigma_mu_of(const Priors& priors, int m, double sigma2);
double lambda_of(const Priors& priors, int m, double sigma2);

// Log Metropolis-Hastings acceptance ratio with the likelihood part tempered:
// d_loglik / T + d_logprior + log q_bwd - log q_fwd. The prior stays
// untempered, so the stationary law is p(E) p(y|E)^{1/T}.
double log_acceptance(double d_loglik, double d_logprior, double q_fwd,
                      double q_bwd, double T);

// Tree structures with their leaf values; the mutable sampler state and the
// chain initializers both use this shape.
struct Ensemble {
  std::vector<TreeStructure> trees;
  std::vector<Eigen::VectorXd> leaf_values;
};

Ensemble trivial_init(int m, const Dataset& data);

// Warm start: every tree begins as a trivial tree at ybar/m, then one greedy
// backfitting pass refits each tree to its residual by squared-error CART
// (depth <= max_depth, leaf values are plain residual means). Training error
// never exceeds the trivial initialization's.
Ensemble init_greedy_boost(const Dataset& data, int m, int max_depth,
                           Rng& rng);

struct ChainState {
  std::vector<TreeStructure> trees;
  std::vector<Eigen::VectorXd> leaf_values;
  Eigen::VectorXd feature_weights;  // dirichlet split prior; empty = uniform
  double sigma2 = 1.0;
  double lambda_cal = 0.0;  // inv_chi2 prior scale, calibrated at start
  long iteration = 0;

  // Cached per-tree fitted values on the training rows and their sum. The
  // marginalized kernels leave these stale between leaf redraws.
  std::vector<Eigen::VectorXd> fits;
  Eigen::VectorXd total_fit;

  // Log marginal likelihood of the current ensemble; invalidated by
  // acceptance and recomputed lazily (it dominates the marginalized cost).
  std::optional<double> cached_lml;

  // What the last step did, for trace recording.
  int last_accepts = 0;
  int last_proposals = 0;
  MoveKind last_move = MoveKind::stay;
};

ChainState make_state(const SamplerConfig& config, const Dataset& data,
                      const Ensemble& init);

// Redraw every tree's leaf values from their joint marginalized posterior and
// refresh the cached fits; the marginalized kernels call this only when a
// trace row is recorded, since leaf values never enter their acceptance.
void refresh_leaf_draws(ChainState& state, const Dataset& data,
                        const SamplerConfig& config, Rng& rng);

// One outer sweep: for each tree in order, Metropolis step against the
// conditional likelihood of its residual, immediate leaf redraw, then a
// sigma^2 draw (inv_chi2 mode) and a feature-weight draw (dirichlet mode).
void step_default(ChainState& state, const Dataset& data,
                  const SamplerConfig& config, Rng& rng);

// One Metropolis-Hastings step on a uniformly chosen tree with the ensemble
// marginal likelihood; requires fixed sigma^2.
void step_marginalized(ChainState& state, const Dataset& data,
                       const SamplerConfig& config, Rng& rng);

struct ChainTrace {
  long burn_in = 0;  // iterations dropped before row 0 (0 when kept)
  std::vector<double> sigma2;
  std::vector<int> accepts;        // accepted proposals in the iteration
  std::vector<int> proposals;      // proposals attempted (m or 1)
  std::vector<MoveKind> move_kinds;  // kind of the iteration's last proposal
  Eigen::MatrixXi leaf_counts;       // rows x m per-tree leaf counts
  Eigen::MatrixXd predictions;       // rows x n_test; 0 cols without test data

  long size() const { return static_cast<long>(sigma2.size()); }
};

ChainTrace run_chain(const SamplerConfig& config, const Dataset& data,
                     const Ensemble& init, const Dataset* test_data = nullptr);

// Independent chains seeded base_seed + chain index, run on one thread each;
// results are bit-identical to a sequential loop.
std::vector<ChainTrace> run_chains(const SamplerConfig& config,
                                   const Dataset& data, int n_chains,
                                   uint64_t base_seed, const Ensemble& init,
                                   const Dataset* test_data = nullptr);

}  // namespace bartlab
