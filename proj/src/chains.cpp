#include "bartlab/chains.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "bartlab/common.hpp"
#include "bartlab/model.hpp"

namespace bartlab {

namespace {

constexpr long kChainCapacity = 20000;
constexpr double kRowSumTol = 1e-12;
constexpr double kBalanceTol = 1e-10;
constexpr double kWeightMatchTol = 1e-10;
constexpr double kFixedPointTol = 1e-12;
constexpr double kLazyTol = 1e-9;

std::string list_states(const std::vector<long>& states, size_t cap = 10) {
  std::ostringstream os;
  for (size_t i = 0; i < states.size() && i < cap; ++i) {
    if (i) os << ", ";
    os << states[i];
  }
  if (states.size() > cap) os << " (and " << states.size() - cap << " more)";
  return os.str();
}

void validate_chain(const FiniteChain& chain, const std::string& who) {
  const long n = chain.P.rows();
  if (n < 1 || chain.P.cols() != n)
    throw ConfigError(who + ": transition matrix must be square and nonempty");
  for (long i = 0; i < n; ++i) {
    double sum = 0.0;
    for (long j = 0; j < n; ++j) {
      const double p = chain.P(i, j);
      if (!std::isfinite(p) || p < -1e-14)
        throw ConfigError(who + ": invalid entry P(" + std::to_string(i) +
                          ", " + std::to_string(j) + ")");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTol)
      throw ConfigError(who + ": row " + std::to_string(i) +
                        " sums to " + std::to_string(sum) +
                        ", not a stochastic matrix");
  }
  if (chain.log_w.size() != 0 && chain.log_w.size() != n)
    throw ConfigError(who + ": log_w has " +
                      std::to_string(chain.log_w.size()) + " entries for " +
                      std::to_string(n) + " states");
  for (long i = 0; i < chain.log_w.size(); ++i)
    if (!std::isfinite(chain.log_w(i)))
      throw ConfigError(who + ": log_w(" + std::to_string(i) +
                        ") is not finite");
}

Eigen::VectorXd softmax(const Eigen::VectorXd& log_w) {
  Eigen::VectorXd w = (log_w.array() - log_w.maxCoeff()).exp();
  return w / w.sum();
}

// Reachability over the support of P; transpose walks edges backwards, so
// the result marks states that can reach a source.
std::vector<uint8_t> reach_over_support(const Eigen::MatrixXd& P,
                                        const std::vector<long>& sources,
                                        bool transpose) {
  const long n = P.rows();
  std::vector<uint8_t> seen(static_cast<size_t>(n), 0);
  std::deque<long> queue;
  for (long s : sources) {
    if (!seen[static_cast<size_t>(s)]) {
      seen[static_cast<size_t>(s)] = 1;
      queue.push_back(s);
    }
  }
  while (!queue.empty()) {
    const long i = queue.front();
    queue.pop_front();
    for (long j = 0; j < n; ++j) {
      if (j == i || seen[static_cast<size_t>(j)]) continue;
      const double p = transpose ? P(j, i) : P(i, j);
      if (p > 0.0) {
        seen[static_cast<size_t>(j)] = 1;
        queue.push_back(j);
      }
    }
  }
  return seen;
}

void check_state_index(long s, long n, const std::string& who) {
  if (s < 0 || s >= n)
    throw ConfigError(who + ": state " + std::to_string(s) +
                      " out of range [0, " + std::to_string(n) + ")");
}

Move reverse_of(const TreeStructure& source, const Move& move) {
  switch (move.kind) {
    case MoveKind::grow:
      return Move{MoveKind::prune, move.node, SplitRule{}};
    case MoveKind::prune:
      return Move{MoveKind::grow, move.node, source.nodes[move.node].rule};
    case MoveKind::change:
      return Move{MoveKind::change, move.node, source.nodes[move.node].rule};
    case MoveKind::swap_rule:
      return Move{MoveKind::swap_rule, move.node, SplitRule{}};
    default:
      throw ConfigError("build_chain: stay moves have no reverse");
  }
}

struct TreeArc {
  int target = -1;     // tree id within the enumeration
  double q_fwd = 0.0;  // proposal probability of the move
  double q_bwd = 0.0;  // proposal probability of the reverse move
  double d_logpri = 0.0;
};

struct ArcTable {
  std::vector<std::vector<TreeArc>> arcs;  // per source tree
  std::vector<double> logpri;              // per tree
};

ArcTable build_arcs(const EnumeratedSpace& enumerated, const Dataset& data,
                    const SamplerConfig& config) {
  const long n_trees = enumerated.n_trees();
  ArcTable table;
  table.arcs.resize(static_cast<size_t>(n_trees));
  table.logpri.resize(static_cast<size_t>(n_trees));
  for (long t = 0; t < n_trees; ++t)
    table.logpri[static_cast<size_t>(t)] = log_tree_prior(
        enumerated.trees[static_cast<size_t>(t)], config.priors, data.space);

  const MoveKind kinds[] = {MoveKind::grow, MoveKind::prune, MoveKind::change,
                            MoveKind::swap_rule};
  // Feasible move lists per tree and kind, reused for the reverse-move
  // membership checks below.
  std::vector<std::array<std::vector<Move>, 4>> feasible(
      static_cast<size_t>(n_trees));
  for (long t = 0; t < n_trees; ++t)
    for (int k = 0; k < 4; ++k)
      feasible[static_cast<size_t>(t)][static_cast<size_t>(k)] =
          enumerate_feasible_moves(enumerated.trees[static_cast<size_t>(t)],
                                   kinds[k], data);

  for (long t = 0; t < n_trees; ++t) {
    const TreeStructure& tree = enumerated.trees[static_cast<size_t>(t)];
    for (int k = 0; k < 4; ++k) {
      for (const Move& move :
           feasible[static_cast<size_t>(t)][static_cast<size_t>(k)]) {
        const double q_fwd =
            move_probability(tree, move, config.weights, data,
                             config.selection);
        if (q_fwd <= 0.0) continue;
        const TreeStructure next = apply_move(tree, move);
        const auto it = enumerated.tree_index.find(serialize_tree(next));
        // Moves leaving the enumeration budget fold into the diagonal.
        if (it == enumerated.tree_index.end()) continue;
        const Move rev = reverse_of(tree, move);
        const int rk = static_cast<int>(rev.kind);
        const auto& rev_list =
            feasible[static_cast<size_t>(it->second)][static_cast<size_t>(rk)];
        double q_bwd = 0.0;
        if (std::find(rev_list.begin(), rev_list.end(), rev) !=
            rev_list.end())
          q_bwd = move_probability(next, rev, config.weights, data,
                                   config.selection);
        table.arcs[static_cast<size_t>(t)].push_back(
            TreeArc{it->second, q_fwd, q_bwd,
                    table.logpri[static_cast<size_t>(it->second)] -
                        table.logpri[static_cast<size_t>(t)]});
      }
    }
  }
  return table;
}

}  // namespace

FiniteChain build_chain(const EnumeratedSpace& enumerated, const Dataset& data,
                        const SamplerConfig& config) {
  validate_config(config);
  if (!data.binned)
    throw ConfigError("build_chain: dataset must be binned first");
  if (config.variant == SamplerVariant::default_sweep)
    throw ConfigError(
        "build_chain: the exact matrix realizes the marginalized kernel; "
        "default_sweep resamples leaf values and has no structure-only "
        "transition law");
  if (config.priors.split_prior == Priors::SplitPrior::dirichlet)
    throw ConfigError(
        "build_chain: dirichlet split weights depend on the sampled state; "
        "only the uniform rule prior yields a fixed transition matrix");
  if (config.temperature.kind == TemperatureSchedule::Kind::linear)
    throw ConfigError(
        "build_chain: a linear temperature schedule is time-inhomogeneous; "
        "use a constant temperature");
  if (config.m != enumerated.m)
    throw ConfigError("build_chain: config.m = " + std::to_string(config.m) +
                      " but the enumeration holds ensembles of " +
                      std::to_string(enumerated.m) + " trees");

  const long n = enumerated.n_tse();
  if (n > kChainCapacity)
    throw CapacityError("build_chain: " + std::to_string(n) +
                        " states exceed the dense-matrix capacity of " +
                        std::to_string(kChainCapacity));

  const double sigma2 = config.priors.sigma2;
  const double lambda = lambda_of(config.priors, config.m, sigma2);
  const double T = config.temperature.T;
  const long n_trees = enumerated.n_trees();
  const int m = config.m;

  const ArcTable table = build_arcs(enumerated, data, config);

  std::vector<double> lml(static_cast<size_t>(n));
  for (long e = 0; e < n; ++e)
    lml[static_cast<size_t>(e)] = log_marginal_likelihood(
        enumerated.tse_ensemble(e), data.X, data.space, data.y, sigma2,
        lambda);

  std::vector<long> pows(static_cast<size_t>(m) + 1, 1);
  for (int j = 0; j < m; ++j)
    pows[static_cast<size_t>(j) + 1] = pows[static_cast<size_t>(j)] * n_trees;

  FiniteChain chain;
  chain.temperature = T;
  chain.P = Eigen::MatrixXd::Zero(n, n);
  chain.log_w = Eigen::VectorXd::Zero(n);

  std::vector<double> logpri_sum(static_cast<size_t>(n));
  for (long e = 0; e < n; ++e) {
    const std::vector<int> ids = enumerated.tse_tree_ids(e);
    double logpri = 0.0;
    for (int j = 0; j < m; ++j)
      logpri += table.logpri[static_cast<size_t>(ids[static_cast<size_t>(j)])];
    logpri_sum[static_cast<size_t>(e)] = logpri;
    chain.log_w(e) = logpri + lml[static_cast<size_t>(e)] / T;
  }

  const double inv_m = 1.0 / static_cast<double>(m);
  if (config.variant == SamplerVariant::multistep) {
    // Raw proposal kernel with stay mass, no-ops, and out-of-budget
    // proposals on the diagonal, raised to the r-th power, then
    // Metropolized once with the ensemble-level ratio.
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, n);
    for (long e = 0; e < n; ++e) {
      const std::vector<int> ids = enumerated.tse_tree_ids(e);
      double out = 0.0;
      for (int j = 0; j < m; ++j) {
        const int t = ids[static_cast<size_t>(j)];
        for (const TreeArc& arc : table.arcs[static_cast<size_t>(t)]) {
          const long e2 =
              e + (static_cast<long>(arc.target) - t) * pows[static_cast<size_t>(j)];
          Q(e, e2) += inv_m * arc.q_fwd;
          out += inv_m * arc.q_fwd;
        }
      }
      Q(e, e) = std::max(0.0, 1.0 - out);
    }
    Eigen::MatrixXd Qr = Q;
    for (int step = 1; step < config.r; ++step) Qr = (Qr * Q).eval();

    for (long e = 0; e < n; ++e) {
      double out = 0.0;
      for (long e2 = 0; e2 < n; ++e2) {
        if (e2 == e) continue;
        const double q_fwd = Qr(e, e2);
        if (q_fwd <= 0.0) continue;
        const double q_bwd = Qr(e2, e);
        if (q_bwd <= 0.0) continue;
        const double la = log_acceptance(
            lml[static_cast<size_t>(e2)] - lml[static_cast<size_t>(e)],
            logpri_sum[static_cast<size_t>(e2)] -
                logpri_sum[static_cast<size_t>(e)],
            q_fwd, q_bwd, T);
        const double p = q_fwd * std::min(1.0, std::exp(la));
        chain.P(e, e2) = p;
        out += p;
      }
      chain.P(e, e) = std::max(0.0, 1.0 - out);
    }
  } else {
    for (long e = 0; e < n; ++e) {
      const std::vector<int> ids = enumerated.tse_tree_ids(e);
      double out = 0.0;
      for (int j = 0; j < m; ++j) {
        const int t = ids[static_cast<size_t>(j)];
        for (const TreeArc& arc : table.arcs[static_cast<size_t>(t)]) {
          if (arc.q_bwd <= 0.0) continue;
          const long e2 =
              e + (static_cast<long>(arc.target) - t) * pows[static_cast<size_t>(j)];
          const double la = log_acceptance(
              lml[static_cast<size_t>(e2)] - lml[static_cast<size_t>(e)],
              arc.d_logpri, arc.q_fwd, arc.q_bwd, T);
          const double p = inv_m * arc.q_fwd * std::min(1.0, std::exp(la));
          chain.P(e, e2) += p;
          out += p;
        }
      }
      chain.P(e, e) = std::max(0.0, 1.0 - out);
    }
  }

  if (config.lazy)
    chain.P = 0.5 * (chain.P + Eigen::MatrixXd::Identity(n, n));
  return chain;
}

Eigen::VectorXd stationary(const FiniteChain& chain) {
  validate_chain(chain, "stationary");
  const long n = chain.P.rows();

  const std::vector<uint8_t> fwd = reach_over_support(chain.P, {0}, false);
  const std::vector<uint8_t> bwd = reach_over_support(chain.P, {0}, true);
  std::vector<long> cut;
  for (long i = 0; i < n; ++i)
    if (!fwd[static_cast<size_t>(i)] || !bwd[static_cast<size_t>(i)])
      cut.push_back(i);
  if (!cut.empty())
    throw ConfigError(
        "stationary: chain is reducible; states not communicating with "
        "state 0: " +
        list_states(cut));

  Eigen::MatrixXd A =
      chain.P.transpose() - Eigen::MatrixXd::Identity(n, n);
  A.row(n - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b(n - 1) = 1.0;
  Eigen::VectorXd pi = A.partialPivLu().solve(b);

  for (long i = 0; i < n; ++i) {
    if (pi(i) < -1e-10)
      throw NumericalError("stationary: solve produced pi(" +
                           std::to_string(i) + ") = " + std::to_string(pi(i)));
    pi(i) = std::max(0.0, pi(i));
  }
  pi /= pi.sum();

  const double resid =
      (chain.P.transpose() * pi - pi).cwiseAbs().maxCoeff();
  if (resid > kFixedPointTol)
    throw NumericalError(
        "stationary: fixed-point residual " + std::to_string(resid) +
        " exceeds tolerance");

  if (chain.log_w.size() == n) {
    const Eigen::VectorXd w = softmax(chain.log_w);
    const double gap = (pi - w).cwiseAbs().maxCoeff();
    if (gap > kWeightMatchTol)
      throw NumericalError(
          "stationary: solved distribution disagrees with the normalized "
          "weights (max gap " +
          std::to_string(gap) + ")");
  }
  return pi;
}

double SpectralGap::t_mix_bound(double eps) const {
  if (!(eps > 0.0) || !(eps < 1.0))
    throw ConfigError("t_mix_bound: eps must lie in (0, 1)");
  if (gamma <= 0.0) return std::numeric_limits<double>::infinity();
  return std::max(0.0, std::log(1.0 / (pi_min * eps)) / gamma);
}

SpectralGap spectral_gap(const FiniteChain& chain) {
  validate_chain(chain, "spectral_gap");
  const long n = chain.P.rows();
  const Eigen::VectorXd pi =
      chain.log_w.size() == n ? softmax(chain.log_w) : stationary(chain);

  for (long i = 0; i < n; ++i)
    if (chain.P(i, i) < 0.5 - kLazyTol)
      throw ConfigError("spectral_gap: chain is not lazy (diagonal " +
                        std::to_string(chain.P(i, i)) + " at state " +
                        std::to_string(i) + "); rebuild with lazy = true");

  for (long i = 0; i < n; ++i)
    for (long j = i + 1; j < n; ++j) {
      const double flow = pi(i) * chain.P(i, j);
      const double back = pi(j) * chain.P(j, i);
      if (std::abs(flow - back) > kBalanceTol)
        throw NumericalError(
            "spectral_gap: detailed balance fails between states " +
            std::to_string(i) + " and " + std::to_string(j) + " (" +
            std::to_string(flow) + " vs " + std::to_string(back) + ")");
    }

  SpectralGap result;
  result.pi_min = pi.minCoeff();
  if (n == 1) {
    result.gamma = 1.0;
    result.lambda_min = 1.0;
    return result;
  }

  // Conjugate by D^{1/2} to get a symmetric matrix with the same spectrum.
  Eigen::VectorXd root = pi.cwiseSqrt();
  Eigen::MatrixXd S(n, n);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j)
      S(i, j) = root(i) * chain.P(i, j) / root(j);
  S = 0.5 * (S + S.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  if (es.info() != Eigen::Success)
    throw NumericalError("spectral_gap: eigensolver failed to converge");
  result.gamma = 1.0 - es.eigenvalues()(n - 2);
  result.lambda_min = es.eigenvalues()(0);
  return result;
}

Eigen::VectorXd expected_hitting_times(const FiniteChain& chain,
                                       const std::vector<long>& target) {
  validate_chain(chain, "expected_hitting_times");
  const long n = chain.P.rows();
  if (target.empty())
    throw ConfigError("expected_hitting_times: target set is empty");
  for (long s : target) check_state_index(s, n, "expected_hitting_times");
  std::set<long> target_set(target.begin(), target.end());

  const std::vector<uint8_t> reaches =
      reach_over_support(chain.P, target, true);
  std::vector<long> stuck;
  for (long i = 0; i < n; ++i)
    if (!reaches[static_cast<size_t>(i)]) stuck.push_back(i);
  if (!stuck.empty())
    throw ConfigError(
        "expected_hitting_times: target unreachable from states: " +
        list_states(stuck));

  std::vector<long> comp;
  for (long i = 0; i < n; ++i)
    if (!target_set.count(i)) comp.push_back(i);

  Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
  if (comp.empty()) return h;

  const long k = static_cast<long>(comp.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(k, k);
  for (long a = 0; a < k; ++a) {
    for (long b = 0; b < k; ++b) A(a, b) = -chain.P(comp[a], comp[b]);
    A(a, a) += 1.0;
  }
  const Eigen::VectorXd sol =
      A.partialPivLu().solve(Eigen::VectorXd::Ones(k));
  for (long a = 0; a < k; ++a) {
    if (sol(a) < -1e-9)
      throw NumericalError("expected_hitting_times: negative solution at "
                           "state " +
                           std::to_string(comp[a]));
    h(comp[a]) = std::max(0.0, sol(a));
  }
  return h;
}

Eigen::VectorXd hitting_precedence(const FiniteChain& chain,
                                   const std::vector<long>& A,
                                   const std::vector<long>& B) {
  validate_chain(chain, "hitting_precedence");
  const long n = chain.P.rows();
  if (A.empty() || B.empty())
    throw ConfigError("hitting_precedence: both state sets must be nonempty");
  for (long s : A) check_state_index(s, n, "hitting_precedence");
  for (long s : B) check_state_index(s, n, "hitting_precedence");
  std::set<long> a_set(A.begin(), A.end());
  std::set<long> b_set(B.begin(), B.end());
  for (long s : a_set)
    if (b_set.count(s))
      throw ConfigError("hitting_precedence: state " + std::to_string(s) +
                        " appears in both sets");

  std::vector<long> boundary(a_set.begin(), a_set.end());
  boundary.insert(boundary.end(), b_set.begin(), b_set.end());
  const std::vector<uint8_t> reaches =
      reach_over_support(chain.P, boundary, true);
  std::vector<long> stranded;
  for (long i = 0; i < n; ++i)
    if (!reaches[static_cast<size_t>(i)]) stranded.push_back(i);
  if (!stranded.empty())
    throw ConfigError(
        "hitting_precedence: states reaching neither boundary set: " +
        list_states(stranded));

  std::vector<long> interior;
  for (long i = 0; i < n; ++i)
    if (!a_set.count(i) && !b_set.count(i)) interior.push_back(i);

  Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
  for (long s : a_set) h(s) = 1.0;

  if (!interior.empty()) {
    const long k = static_cast<long>(interior.size());
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
    for (long a = 0; a < k; ++a) {
      for (long b = 0; b < k; ++b)
        M(a, b) = -chain.P(interior[a], interior[b]);
      M(a, a) += 1.0;
      for (long s : a_set) rhs(a) += chain.P(interior[a], s);
    }
    const Eigen::VectorXd sol = M.partialPivLu().solve(rhs);
    for (long a = 0; a < k; ++a) {
      if (sol(a) < -1e-9 || sol(a) > 1.0 + 1e-9)
        throw NumericalError("hitting_precedence: solution " +
                             std::to_string(sol(a)) + " at state " +
                             std::to_string(interior[a]) +
                             " leaves [0, 1]");
      h(interior[a]) = std::min(1.0, std::max(0.0, sol(a)));
    }
  }
  return h;
}

Network make_network(int n) {
  if (n < 1) throw ConfigError("make_network: need at least one state");
  Network network;
  network.c = Eigen::MatrixXd::Zero(n, n);
  network.active.assign(static_cast<size_t>(n), 1);
  return network;
}

namespace {

void check_active(const Network& network, int s, const std::string& who) {
  if (s < 0 || s >= network.n())
    throw ConfigError(who + ": state " + std::to_string(s) +
                      " out of range [0, " + std::to_string(network.n()) +
                      ")");
  if (!network.active[static_cast<size_t>(s)])
    throw ConfigError(who + ": state " + std::to_string(s) +
                      " was removed by an earlier reduction");
}

}  // namespace

void add_conductance(Network& network, int u, int v, double value) {
  check_active(network, u, "add_conductance");
  check_active(network, v, "add_conductance");
  if (u == v) throw ConfigError("add_conductance: self-loops carry no current");
  if (!(value > 0.0) || !std::isfinite(value))
    throw ConfigError("add_conductance: conductance must be positive");
  network.c(u, v) += value;
  network.c(v, u) += value;
}

Network network_reduce(Network network, const std::vector<ReduceOp>& ops) {
  const int n = network.n();
  for (const ReduceOp& op : ops) {
    if (op.kind == ReduceOp::Kind::glue) {
      check_active(network, op.u, "network_reduce (glue)");
      check_active(network, op.v, "network_reduce (glue)");
      if (op.u == op.v)
        throw ConfigError("network_reduce: cannot glue a state to itself");
      for (int x = 0; x < n; ++x) {
        if (x == op.u || x == op.v || !network.active[static_cast<size_t>(x)])
          continue;
        if (network.c(op.v, x) > 0.0) {
          network.c(op.u, x) += network.c(op.v, x);
          network.c(x, op.u) = network.c(op.u, x);
        }
      }
      network.c.row(op.v).setZero();
      network.c.col(op.v).setZero();
      network.active[static_cast<size_t>(op.v)] = 0;
    } else {
      check_active(network, op.u, "network_reduce (series_parallel)");
      check_active(network, op.v, "network_reduce (series_parallel)");
      check_active(network, op.w, "network_reduce (series_parallel)");
      if (op.u == op.v || op.v == op.w || op.u == op.w)
        throw ConfigError(
            "network_reduce: series_parallel needs three distinct states");
      if (!(network.c(op.u, op.v) > 0.0) || !(network.c(op.v, op.w) > 0.0))
        throw ConfigError("network_reduce: series_parallel needs edges " +
                          std::to_string(op.u) + "-" + std::to_string(op.v) +
                          " and " + std::to_string(op.v) + "-" +
                          std::to_string(op.w));
      for (int x = 0; x < n; ++x) {
        if (x == op.u || x == op.w || x == op.v ||
            !network.active[static_cast<size_t>(x)])
          continue;
        if (network.c(op.v, x) > 0.0)
          throw ConfigError(
              "network_reduce: state " + std::to_string(op.v) +
              " also neighbors state " + std::to_string(x) +
              "; series elimination needs degree two");
      }
      const double series =
          1.0 / (1.0 / network.c(op.u, op.v) + 1.0 / network.c(op.v, op.w));
      network.c(op.u, op.w) += series;
      network.c(op.w, op.u) = network.c(op.u, op.w);
      network.c.row(op.v).setZero();
      network.c.col(op.v).setZero();
      network.active[static_cast<size_t>(op.v)] = 0;
    }
  }
  return network;
}

double effective_resistance(const Network& network, int a, int z) {
  check_active(network, a, "effective_resistance");
  check_active(network, z, "effective_resistance");
  if (a == z)
    throw ConfigError("effective_resistance: endpoints must differ");
  const int n = network.n();

  std::vector<uint8_t> comp(static_cast<size_t>(n), 0);
  std::deque<int> queue{a};
  comp[static_cast<size_t>(a)] = 1;
  while (!queue.empty()) {
    const int i = queue.front();
    queue.pop_front();
    for (int j = 0; j < n; ++j) {
      if (comp[static_cast<size_t>(j)] ||
          !network.active[static_cast<size_t>(j)])
        continue;
      if (network.c(i, j) > 0.0) {
        comp[static_cast<size_t>(j)] = 1;
        queue.push_back(j);
      }
    }
  }
  if (!comp[static_cast<size_t>(z)])
    throw ConfigError("effective_resistance: no path between states " +
                      std::to_string(a) + " and " + std::to_string(z));

  std::vector<int> interior;
  for (int i = 0; i < n; ++i)
    if (comp[static_cast<size_t>(i)] && i != a && i != z)
      interior.push_back(i);

  // Potentials: v(a) = 1, v(z) = 0, harmonic elsewhere; the current out of
  // a equals the effective conductance.
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  v(a) = 1.0;
  if (!interior.empty()) {
    const long k = static_cast<long>(interior.size());
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
    for (long p = 0; p < k; ++p) {
      const int i = interior[static_cast<size_t>(p)];
      double degree = 0.0;
      for (int j = 0; j < n; ++j) degree += network.c(i, j);
      L(p, p) = degree;
      for (long q = 0; q < k; ++q)
        if (q != p) L(p, q) = -network.c(i, interior[static_cast<size_t>(q)]);
      rhs(p) = network.c(i, a);
    }
    const Eigen::VectorXd sol = L.partialPivLu().solve(rhs);
    for (long p = 0; p < k; ++p) v(interior[static_cast<size_t>(p)]) = sol(p);
  }

  double current = 0.0;
  for (int j = 0; j < n; ++j) current += network.c(a, j) * (1.0 - v(j));
  if (!(current > 0.0))
    throw NumericalError("effective_resistance: no current flows");
  return 1.0 / current;
}

double effective_resistance(const Network& network, int a, int z,
                            const std::vector<ReduceOp>& ops) {
  const double direct = effective_resistance(network, a, z);
  const Network reduced = network_reduce(network, ops);
  if (!reduced.active[static_cast<size_t>(a)] ||
      !reduced.active[static_cast<size_t>(z)])
    throw ConfigError(
        "effective_resistance: the reduction removed an endpoint");
  const double via_ops = effective_resistance(reduced, a, z);
  const double scale = std::max({1.0, std::abs(direct), std::abs(via_ops)});
  if (std::abs(direct - via_ops) > 1e-10 * scale)
    throw NumericalError(
        "effective_resistance: harmonic solve " + std::to_string(direct) +
        " disagrees with the reduction " + std::to_string(via_ops));
  return direct;
}

const std::vector<int>& PathEnsemble::path(long x, long y) const {
  if (x < 0 || x >= n || y < 0 || y >= n)
    throw ConfigError("PathEnsemble: pair (" + std::to_string(x) + ", " +
                      std::to_string(y) + ") out of range");
  return paths[static_cast<size_t>(x * n + y)];
}

long PathEnsemble::max_len() const {
  long longest = 0;
  for (const auto& p : paths)
    if (!p.empty())
      longest = std::max(longest, static_cast<long>(p.size()) - 1);
  return longest;
}

PathEnsemble bfs_path_ensemble(const FiniteChain& chain) {
  validate_chain(chain, "bfs_path_ensemble");
  const long n = chain.P.rows();
  PathEnsemble ensemble;
  ensemble.n = n;
  ensemble.paths.resize(static_cast<size_t>(n * n));

  for (long x = 0; x < n; ++x) {
    std::vector<long> parent(static_cast<size_t>(n), -1);
    std::vector<uint8_t> seen(static_cast<size_t>(n), 0);
    seen[static_cast<size_t>(x)] = 1;
    std::deque<long> queue{x};
    while (!queue.empty()) {
      const long i = queue.front();
      queue.pop_front();
      for (long j = 0; j < n; ++j) {
        if (j == i || seen[static_cast<size_t>(j)] || chain.P(i, j) <= 0.0)
          continue;
        seen[static_cast<size_t>(j)] = 1;
        parent[static_cast<size_t>(j)] = i;
        queue.push_back(j);
      }
    }
    for (long y = 0; y < n; ++y) {
      auto& path = ensemble.paths[static_cast<size_t>(x * n + y)];
      if (y == x) {
        path = {static_cast<int>(x)};
        continue;
      }
      if (!seen[static_cast<size_t>(y)])
        throw ConfigError("bfs_path_ensemble: no directed path from state " +
                          std::to_string(x) + " to state " +
                          std::to_string(y));
      std::vector<int> rev;
      for (long cur = y; cur != -1; cur = parent[static_cast<size_t>(cur)])
        rev.push_back(static_cast<int>(cur));
      path.assign(rev.rbegin(), rev.rend());
    }
  }
  return ensemble;
}

double congestion(const FiniteChain& chain, const PathEnsemble& ensemble) {
  validate_chain(chain, "congestion");
  const long n = chain.P.rows();
  if (ensemble.n != n)
    throw ConfigError("congestion: path ensemble covers " +
                      std::to_string(ensemble.n) + " states, chain has " +
                      std::to_string(n));
  if (static_cast<long>(ensemble.paths.size()) != n * n)
    throw ConfigError(
        "congestion: ensemble must hold one path per ordered state pair");

  const Eigen::VectorXd pi =
      chain.log_w.size() == n ? softmax(chain.log_w) : stationary(chain);

  std::map<std::pair<long, long>, double> load;
  for (long x = 0; x < n; ++x) {
    for (long y = 0; y < n; ++y) {
      const std::vector<int>& path = ensemble.path(x, y);
      if (path.empty() || path.front() != x || path.back() != y)
        throw ConfigError("congestion: path for pair (" + std::to_string(x) +
                          ", " + std::to_string(y) +
                          ") does not join its endpoints");
      std::set<std::pair<long, long>> edges;
      for (size_t s = 0; s + 1 < path.size(); ++s) {
        const long a = path[s];
        const long b = path[s + 1];
        if (a == b)
          throw ConfigError("congestion: path for pair (" +
                            std::to_string(x) + ", " + std::to_string(y) +
                            ") repeats state " + std::to_string(a));
        if (chain.P(a, b) <= 0.0)
          throw ConfigError("congestion: path for pair (" +
                            std::to_string(x) + ", " + std::to_string(y) +
                            ") uses edge " + std::to_string(a) + " -> " +
                            std::to_string(b) +
                            " with zero transition probability");
        edges.insert({std::min(a, b), std::max(a, b)});
      }
      for (const auto& edge : edges) load[edge] += pi(x) * pi(y);
    }
  }

  double rho = 0.0;
  for (long z = 0; z < n; ++z)
    for (long w = 0; w < n; ++w) {
      if (w == z || chain.P(z, w) <= 0.0) continue;
      const auto it = load.find({std::min(z, w), std::max(z, w)});
      if (it == load.end()) continue;
      rho = std::max(rho, it->second / (pi(z) * chain.P(z, w)));
    }
  return rho;
}

double gap_lower_bound(double rho, long max_len) {
  if (!(rho > 0.0) || !std::isfinite(rho))
    throw ConfigError("gap_lower_bound: congestion must be positive");
  if (max_len < 1)
    throw ConfigError("gap_lower_bound: paths must contain an edge");
  return 1.0 / (rho * static_cast<double>(max_len));
}

void export_chain_csv(const FiniteChain& chain,
                      const EnumeratedSpace& enumerated,
                      const std::string& edges_path,
                      const std::string& states_path) {
  validate_chain(chain, "export_chain_csv");
  const long n = chain.P.rows();
  if (enumerated.n_tse() != n)
    throw ConfigError("export_chain_csv: enumeration holds " +
                      std::to_string(enumerated.n_tse()) +
                      " states, chain has " + std::to_string(n));

  std::ofstream edges(edges_path);
  if (!edges)
    throw ConfigError("export_chain_csv: cannot open " + edges_path);
  edges.precision(17);
  edges << "i,j,p\n";
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j)
      if (chain.P(i, j) != 0.0)
        edges << i << "," << j << "," << chain.P(i, j) << "\n";
  if (!edges.good())
    throw ConfigError("export_chain_csv: write failed for " + edges_path);

  std::ofstream states(states_path);
  if (!states)
    throw ConfigError("export_chain_csv: cannot open " + states_path);
  states.precision(17);
  states << "index,log_w,ensemble\n";
  for (long i = 0; i < n; ++i) {
    const double lw =
        chain.log_w.size() == n ? chain.log_w(i)
                                : std::numeric_limits<double>::quiet_NaN();
    states << i << "," << lw << ","
           << serialize_ensemble(enumerated.tse_ensemble(i)) << "\n";
  }
  if (!states.good())
    throw ConfigError("export_chain_csv: write failed for " + states_path);
}

}  // namespace bartlab
