#include "bartlab/samplers.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <thread>
#include <utility>

#include "bartlab/common.hpp"

namespace bartlab {

double TemperatureSchedule::at(long iteration, long total_iterations) const {
  if (kind == Kind::constant) return T;
  if (total_iterations <= 1) return T_max;
  const double frac = static_cast<double>(iteration) /
                      static_cast<double>(total_iterations - 1);
  return T_max + (T_min - T_max) * std::clamp(frac, 0.0, 1.0);
}

TemperatureSchedule TemperatureSchedule::constant(double T) {
  TemperatureSchedule out;
  out.kind = Kind::constant;
  out.T = T;
  return out;
}

TemperatureSchedule TemperatureSchedule::linear(double T_max, double T_min) {
  TemperatureSchedule out;
  out.kind = Kind::linear;
  out.T_max = T_max;
  out.T_min = T_min;
  return out;
}

void validate_config(const SamplerConfig& config) {
  validate_weights(config.weights);
  validate_priors(config.priors);
  if (config.m < 1) throw ConfigError("sampler: m must be >= 1");
  const auto& ts = config.temperature;
  if (ts.kind == TemperatureSchedule::Kind::constant) {
    if (!(ts.T >= 1.0)) throw ConfigError("sampler: temperature must be >= 1");
  } else {
    if (!(ts.T_min >= 1.0) || !(ts.T_max >= ts.T_min))
      throw ConfigError("sampler: linear schedule needs T_max >= T_min >= 1");
  }
  if (config.r < 1) throw ConfigError("sampler: r must be >= 1");
  if (config.r > 1 && config.variant != SamplerVariant::multistep)
    throw ConfigError("sampler: r > 1 requires the multistep variant");
  if (config.burn_in < 0 || config.iterations <= config.burn_in)
    throw ConfigError("sampler: need iterations > burn_in >= 0");
  if (config.variant != SamplerVariant::default_sweep &&
      config.priors.sigma_mode != Priors::SigmaMode::fixed)
    throw ConfigError(
        "sampler: marginalized variants require fixed sigma^2; the leaf "
        "values needed for an inv_chi2 update are integrated out");
}

double sigma_mu_of(const Priors& priors, int m, double sigma2) {
  if (priors.leaf_scale == Priors::LeafScale::k_factor)
    return priors.sigma_mu(m);
  return std::sqrt(sigma2 / priors.lambda);
}

double lambda_of(const Priors& priors, int m, double sigma2) {
  if (priors.leaf_scale == Priors::LeafScale::lambda) return priors.lambda;
  const double sm = priors.sigma_mu(m);
  return sigma2 / (sm * sm);
}

double log_acceptance(double d_loglik, double d_logprior, double q_fwd,
                      double q_bwd, double T) {
  return d_loglik / T + d_logprior + std::log(q_bwd) - std::log(q_fwd);
}

namespace {

Eigen::VectorXd fit_of(const TreeStructure& tree, const Eigen::VectorXd& mu,
                       const Eigen::MatrixXi& X, const CovariateSpace& space) {
  const auto assign = leaf_assignment(tree, X, space);
  Eigen::VectorXd fit(X.rows());
  for (long i = 0; i < X.rows(); ++i) fit[i] = mu[assign[i]];
  return fit;
}

#ifndef NDEBUG
void check_cached_fits(const ChainState& state, const Dataset& data) {
  Eigen::VectorXd total = Eigen::VectorXd::Zero(data.n());
  for (size_t j = 0; j < state.trees.size(); ++j) {
    const Eigen::VectorXd fit =
        fit_of(state.trees[j], state.leaf_values[j], data.X, data.space);
    assert((fit - state.fits[j]).lpNorm<Eigen::Infinity>() < 1e-8);
    total += fit;
  }
  assert((total - state.total_fit).lpNorm<Eigen::Infinity>() < 1e-8);
}
#endif

// Conjugate refresh of the Dirichlet feature weights from the rule counts of
// the current ensemble (each rule's feature treated as one categorical draw).
void resample_feature_weights(ChainState& state, const SamplerConfig& config,
                              Rng& rng) {
  const int d = static_cast<int>(state.feature_weights.size());
  std::vector<double> alpha(d, config.priors.alpha_dir / d);
  for (const auto& tree : state.trees)
    for (const auto& node : tree.nodes)
      if (!node.is_leaf()) alpha[node.rule.feature] += 1.0;
  const auto w = rng.dirichlet(alpha);
  for (int v = 0; v < d; ++v) state.feature_weights[v] = w[v];
}

void hold_iteration(ChainState& state) {
  state.last_accepts = 0;
  state.last_proposals = 0;
  state.last_move = MoveKind::stay;
}

// Greedy squared-error CART on a residual vector. Children are appended in
// processing order, which is exactly the canonical breadth-first numbering.
TreeStructure greedy_tree(const Dataset& data, const Eigen::VectorXd& resid,
                          int max_depth, Rng& rng,
                          std::vector<double>& node_mean) {
  TreeStructure tree;
  tree.nodes.push_back(TreeNode{});
  std::vector<std::vector<long>> rows_of(1);
  rows_of[0].resize(data.n());
  for (long i = 0; i < data.n(); ++i) rows_of[0][i] = i;
  std::vector<int> depth_of{0};
  node_mean.assign(1, 0.0);

  for (int id = 0; id < tree.n_nodes(); ++id) {
    // Moved out: splitting appends children and reallocates rows_of.
    const std::vector<long> rows = std::move(rows_of[id]);
    const double nn = static_cast<double>(rows.size());
    double s = 0.0;
    for (long i : rows) s += resid[i];
    node_mean[id] = s / nn;
    if (depth_of[id] >= max_depth) continue;

    const double base = s * s / nn;
    double best = base;
    std::vector<SplitRule> ties;
    for (int v = 0; v < data.space.d; ++v) {
      const int levels = data.space.n_levels(v);
      std::vector<double> sum(levels + 1, 0.0);
      std::vector<long> cnt(levels + 1, 0);
      for (long i : rows) {
        sum[data.X(i, v)] += resid[i];
        cnt[data.X(i, v)] += 1;
      }
      double sl = 0.0;
      long nl = 0;
      for (int t = 1; t < levels; ++t) {
        sl += sum[t];
        nl += cnt[t];
        const long nr = static_cast<long>(rows.size()) - nl;
        if (nl == 0 || nr == 0) continue;
        const double sr = s - sl;
        const double score = sl * sl / nl + sr * sr / nr;
        if (score > best) {
          best = score;
          ties.assign(1, SplitRule{v, t});
        } else if (score == best && !ties.empty()) {
          ties.push_back(SplitRule{v, t});
        }
      }
    }
    if (ties.empty() || best <= base + 1e-12 * (1.0 + std::abs(base)))
      continue;
    const SplitRule rule =
        ties.size() == 1
            ? ties[0]
            : ties[rng.unif_int(static_cast<int64_t>(ties.size()))];

    const int left = tree.n_nodes();
    tree.nodes[id].rule = rule;
    tree.nodes[id].left = left;
    tree.nodes[id].right = left + 1;
    tree.nodes.insert(tree.nodes.end(), 2, TreeNode{});
    rows_of.resize(tree.nodes.size());
    depth_of.resize(tree.nodes.size(), depth_of[id] + 1);
    node_mean.resize(tree.nodes.size(), 0.0);
    for (long i : rows) {
      (data.X(i, rule.feature) <= rule.threshold ? rows_of[left]
                                                 : rows_of[left + 1])
          .push_back(i);
    }
  }
  return tree;
}

}  // namespace

Ensemble trivial_init(int m, const Dataset& data) {
  if (m < 1) throw ConfigError("trivial_init: m must be >= 1");
  const double ybar = data.y.mean();
  Ensemble ens;
  ens.trees.assign(m, trivial_tree());
  ens.leaf_values.assign(m, Eigen::VectorXd::Constant(1, ybar / m));
  return ens;
}

Ensemble init_greedy_boost(const Dataset& data, int m, int max_depth,
                           Rng& rng) {
  if (!data.binned)
    throw ConfigError("init_greedy_boost: data must be binned");
  if (m < 1) throw ConfigError("init_greedy_boost: m must be >= 1");
  if (max_depth < 0)
    throw ConfigError("init_greedy_boost: max_depth must be >= 0");

  Ensemble ens = trivial_init(m, data);
  const double ybar = data.y.mean();
  std::vector<Eigen::VectorXd> fits(
      m, Eigen::VectorXd::Constant(data.n(), ybar / m));
  Eigen::VectorXd total = Eigen::VectorXd::Constant(data.n(), ybar);

  for (int j = 0; j < m; ++j) {
    const Eigen::VectorXd resid = data.y - total + fits[j];
    std::vector<double> node_mean;
    ens.trees[j] = greedy_tree(data, resid, max_depth, rng, node_mean);
    Eigen::VectorXd mu(ens.trees[j].n_leaves());
    int leaf = 0;
    for (int id = 0; id < ens.trees[j].n_nodes(); ++id)
      if (ens.trees[j].nodes[id].is_leaf()) mu[leaf++] = node_mean[id];
    ens.leaf_values[j] = mu;
    const Eigen::VectorXd fit = fit_of(ens.trees[j], mu, data.X, data.space);
    total += fit - fits[j];
    fits[j] = fit;
  }
  return ens;
}

ChainState make_state(const SamplerConfig& config, const Dataset& data,
                      const Ensemble& init) {
  if (!data.binned) throw ConfigError("make_state: data must be binned");
  if (static_cast<int>(init.trees.size()) != config.m)
    throw ConfigError("make_state: init ensemble size differs from m");
  if (!init.leaf_values.empty() &&
      init.leaf_values.size() != init.trees.size())
    throw ConfigError("make_state: leaf_values size differs from trees");

  ChainState state;
  state.trees = init.trees;
  state.leaf_values.resize(config.m);
  state.fits.resize(config.m);
  state.total_fit = Eigen::VectorXd::Zero(data.n());
  for (int j = 0; j < config.m; ++j) {
    const int b = state.trees[j].n_leaves();
    if (init.leaf_values.empty()) {
      state.leaf_values[j] = Eigen::VectorXd::Zero(b);
    } else {
      if (init.leaf_values[j].size() != b)
        throw ConfigError("make_state: leaf value length differs from leaves");
      state.leaf_values[j] = init.leaf_values[j];
    }
    state.fits[j] =
        fit_of(state.trees[j], state.leaf_values[j], data.X, data.space);
    state.total_fit += state.fits[j];
  }

  if (config.priors.sigma_mode == Priors::SigmaMode::fixed) {
    state.sigma2 = config.priors.sigma2;
  } else {
    const double ybar = data.y.mean();
    double s2 = 1.0;
    if (data.n() >= 2)
      s2 = (data.y.array() - ybar).matrix().squaredNorm() /
           static_cast<double>(data.n() - 1);
    s2 = std::max(s2, 1e-12);
    state.sigma2 = s2;
    state.lambda_cal = calibrate_lambda(s2, config.priors.nu, config.priors.q);
  }

  if (config.priors.split_prior == Priors::SplitPrior::dirichlet)
    state.feature_weights = Eigen::VectorXd::Constant(
        data.space.d, 1.0 / static_cast<double>(data.space.d));
  return state;
}

void refresh_leaf_draws(ChainState& state, const Dataset& data,
                        const SamplerConfig& config, Rng& rng) {
  const DesignMatrix design = design_matrix(state.trees, data.X, data.space);
  const double lambda = lambda_of(config.priors, config.m, state.sigma2);
  const Eigen::VectorXd mu =
      sample_leaf_params_marginalized(design, data.y, state.sigma2, lambda,
                                      rng);
  state.total_fit = Eigen::VectorXd::Zero(data.n());
  for (int j = 0; j < config.m; ++j) {
    const auto [begin, end] = design.tree_cols[j];
    state.leaf_values[j] = mu.segment(begin, end - begin);
    state.fits[j] =
        fit_of(state.trees[j], state.leaf_values[j], data.X, data.space);
    state.total_fit += state.fits[j];
  }
}

void step_default(ChainState& state, const Dataset& data,
                  const SamplerConfig& config, Rng& rng) {
  if (config.variant != SamplerVariant::default_sweep)
    throw ConfigError("step_default: config variant is not default_sweep");
#ifndef NDEBUG
  check_cached_fits(state, data);
#endif
  if (config.lazy && rng.unif() < 0.5) {
    hold_iteration(state);
    return;
  }
  const double T =
      config.temperature.at(state.iteration, config.iterations);
  const double sigma_mu = sigma_mu_of(config.priors, config.m, state.sigma2);

  int accepts = 0;
  MoveKind last = MoveKind::stay;
  for (int j = 0; j < config.m; ++j) {
    const Eigen::VectorXd resid = data.y - state.total_fit + state.fits[j];
    const Proposal prop =
        propose(state.trees[j], config.weights, data, rng, config.selection);
    last = prop.move.kind;
    if (!prop.no_op) {
      const double d_loglik =
          log_conditional_tree_likelihood(prop.tree, data.X, data.space, resid,
                                          state.sigma2, sigma_mu) -
          log_conditional_tree_likelihood(state.trees[j], data.X, data.space,
                                          resid, state.sigma2, sigma_mu);
      const double d_logprior =
          log_tree_prior(prop.tree, config.priors, data.space,
                         state.feature_weights) -
          log_tree_prior(state.trees[j], config.priors, data.space,
                         state.feature_weights);
      const double la =
          log_acceptance(d_loglik, d_logprior, prop.q_fwd, prop.q_bwd, T);
      if (std::log(rng.unif()) < la) {
        state.trees[j] = prop.tree;
        ++accepts;
      }
    }
    state.leaf_values[j] = sample_leaf_params_conditional(
        state.trees[j], data.X, data.space, resid, state.sigma2, sigma_mu,
        rng);
    const Eigen::VectorXd fit =
        fit_of(state.trees[j], state.leaf_values[j], data.X, data.space);
    state.total_fit += fit - state.fits[j];
    state.fits[j] = fit;
  }
  // Rebuilt from scratch once per sweep so incremental error cannot pile up.
  state.total_fit = Eigen::VectorXd::Zero(data.n());
  for (const auto& fit : state.fits) state.total_fit += fit;

  if (config.priors.split_prior == Priors::SplitPrior::dirichlet)
    resample_feature_weights(state, config, rng);
  if (config.priors.sigma_mode == Priors::SigmaMode::inv_chi2)
    state.sigma2 = sample_sigma2(data.y, state.total_fit, config.priors,
                                 state.lambda_cal, rng);

  state.last_accepts = accepts;
  state.last_proposals = config.m;
  state.last_move = last;
}

void step_marginalized(ChainState& state, const Dataset& data,
                       const SamplerConfig& config, Rng& rng) {
  if (config.variant == SamplerVariant::default_sweep)
    throw ConfigError("step_marginalized: config variant is default_sweep");
  if (config.variant == SamplerVariant::multistep)
    throw ConfigError(
        "step_marginalized: multistep proposals require an enumerated space");
  if (config.lazy && rng.unif() < 0.5) {
    hold_iteration(state);
    return;
  }
  const double T =
      config.temperature.at(state.iteration, config.iterations);
  const double lambda = lambda_of(config.priors, config.m, state.sigma2);
  if (!state.cached_lml)
    state.cached_lml = log_marginal_likelihood(state.trees, data.X, data.space,
                                               data.y, state.sigma2, lambda);

  const int k = static_cast<int>(rng.unif_int(config.m));
  const Proposal prop =
      propose(state.trees[k], config.weights, data, rng, config.selection);
  state.last_move = prop.move.kind;
  state.last_proposals = 1;
  state.last_accepts = 0;
  if (prop.no_op) return;

  std::vector<TreeStructure> proposed = state.trees;
  proposed[k] = prop.tree;
  const double lml_prop = log_marginal_likelihood(
      proposed, data.X, data.space, data.y, state.sigma2, lambda);
  const double d_logprior =
      log_tree_prior(prop.tree, config.priors, data.space,
                     state.feature_weights) -
      log_tree_prior(state.trees[k], config.priors, data.space,
                     state.feature_weights);
  const double la = log_acceptance(lml_prop - *state.cached_lml, d_logprior,
                                   prop.q_fwd, prop.q_bwd, T);
  if (std::log(rng.unif()) < la) {
    state.trees[k] = std::move(proposed[k]);
    state.cached_lml = lml_prop;
    state.last_accepts = 1;
  }
  if (config.priors.split_prior == Priors::SplitPrior::dirichlet)
    resample_feature_weights(state, config, rng);
}

namespace {

void record_row(ChainTrace& trace, long row, ChainState& state,
                const Dataset& data, const SamplerConfig& config,
                const Dataset* test, Rng& rng) {
  if (config.variant != SamplerVariant::default_sweep)
    refresh_leaf_draws(state, data, config, rng);
  trace.sigma2.push_back(state.sigma2);
  trace.accepts.push_back(state.last_accepts);
  trace.proposals.push_back(state.last_proposals);
  trace.move_kinds.push_back(state.last_move);
  for (int j = 0; j < config.m; ++j)
    trace.leaf_counts(row, j) = state.trees[j].n_leaves();
  if (test != nullptr) {
    Eigen::VectorXd pred = Eigen::VectorXd::Zero(test->n());
    for (int j = 0; j < config.m; ++j) {
      const auto assign =
          leaf_assignment(state.trees[j], test->X, test->space);
      for (long i = 0; i < test->n(); ++i)
        pred[i] += state.leaf_values[j][assign[i]];
    }
    trace.predictions.row(row) = pred;
  }
}

}  // namespace

ChainTrace run_chain(const SamplerConfig& config, const Dataset& data,
                     const Ensemble& init, const Dataset* test_data) {
  validate_config(config);
  if (config.variant == SamplerVariant::multistep)
    throw ConfigError(
        "run_chain: the multistep variant needs an enumerated space; use the "
        "exact-chain toolkit");
  if (test_data != nullptr) {
    if (!test_data->binned)
      throw ConfigError("run_chain: test data must be binned");
    if (test_data->space.d != data.space.d)
      throw ConfigError("run_chain: test space dimension differs");
  }

  Rng rng(config.seed);
  ChainState state = make_state(config, data, init);
  const long kept =
      config.keep_burnin ? config.iterations
                         : config.iterations - config.burn_in;
  ChainTrace trace;
  trace.burn_in = config.keep_burnin ? 0 : config.burn_in;
  trace.leaf_counts.resize(kept, config.m);
  trace.predictions.resize(kept, test_data != nullptr ? test_data->n() : 0);
  trace.sigma2.reserve(kept);
  trace.accepts.reserve(kept);
  trace.proposals.reserve(kept);
  trace.move_kinds.reserve(kept);

  long row = 0;
  for (long t = 0; t < config.iterations; ++t) {
    state.iteration = t;
    if (config.variant == SamplerVariant::default_sweep)
      step_default(state, data, config, rng);
    else
      step_marginalized(state, data, config, rng);
    if (config.keep_burnin || t >= config.burn_in)
      record_row(trace, row++, state, data, config, test_data, rng);
  }
  return trace;
}

std::vector<ChainTrace> run_chains(const SamplerConfig& config,
                                   const Dataset& data, int n_chains,
                                   uint64_t base_seed, const Ensemble& init,
                                   const Dataset* test_data) {
  if (n_chains < 1) throw ConfigError("run_chains: n_chains must be >= 1");
  std::vector<ChainTrace> traces(n_chains);
  std::vector<std::exception_ptr> errors(n_chains);
  std::vector<std::thread> workers;
  workers.reserve(n_chains);
  for (int i = 0; i < n_chains; ++i) {
    workers.emplace_back([&, i] {
      try {
        SamplerConfig chain_config = config;
        chain_config.seed = base_seed + static_cast<uint64_t>(i);
        traces[i] = run_chain(chain_config, data, init, test_data);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (const auto& err : errors)
    if (err) std::rethrow_exception(err);
  return traces;
}

}  // namespace bartlab
