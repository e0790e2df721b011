#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "bartlab/optset.hpp"
#include "bartlab/samplers.hpp"

namespace bartlab {

// Exact transition matrix of a marginalized-family sampler over an
// EnumeratedSpace, together with the unnormalized log target weights
// log p(E) + log p(y|E) / T. Hand-built chains may leave log_w empty; the
// spectral and congestion tools then solve for the stationary distribution
// instead of trusting the weights.
struct FiniteChain {
  Eigen::MatrixXd P;
  Eigen::VectorXd log_w;
  double temperature = 1.0;
};

// Realizes the single-tree kernel as a matrix: off-diagonal mass is
// q * min(1, acceptance) summed over proposals, the diagonal absorbs
// rejections, no-ops, stay draws, and accepted moves leaving the budget.
// multistep configs Metropolize the r-step power of the raw proposal kernel;
// config.lazy maps the result P to (P+I)/2. Capacity cap: 20000 states.
FiniteChain build_chain(const EnumeratedSpace& enumerated, const Dataset& data,
                        const SamplerConfig& config);

// Left eigenvector of P for eigenvalue 1, via a dense solve after an
// irreducibility scan. When log_w is present the result must match the
// normalized weights within 1e-10.
Eigen::VectorXd stationary(const FiniteChain& chain);

struct SpectralGap {
  double gamma = 0.0;
  double lambda_min = 0.0;
  double pi_min = 0.0;

  // Mixing-time upper bound log(1/(pi_min * eps)) / gamma for lazy
  // reversible chains; infinite when the gap vanishes.
  double t_mix_bound(double eps) const;
};

// Requires a lazy, reversible chain (both are checked, not assumed); the gap
// comes from the symmetrized transform D^{1/2} P D^{-1/2}.
SpectralGap spectral_gap(const FiniteChain& chain);

// Expected steps to reach the target from every state: solves
// (I - P_restricted) h = 1 off the target, h = 0 on it.
Eigen::VectorXd expected_hitting_times(const FiniteChain& chain,
                                       const std::vector<long>& target);

// P{tau_A < tau_B | X_0 = x}: harmonic on the complement with boundary 1 on
// A and 0 on B.
Eigen::VectorXd hitting_precedence(const FiniteChain& chain,
                                   const std::vector<long>& A,
                                   const std::vector<long>& B);

// Electrical network with symmetric conductances; glued or series-eliminated
// states stay in the index space but become inactive.
struct Network {
  Eigen::MatrixXd c;
  std::vector<uint8_t> active;

  int n() const { return static_cast<int>(c.rows()); }
};

Network make_network(int n);
void add_conductance(Network& network, int u, int v, double value);

struct ReduceOp {
  enum class Kind { glue, series_parallel };
  Kind kind = Kind::glue;
  int u = -1;
  int v = -1;
  int w = -1;  // series_parallel only: the chain u - v - w, v eliminated

  static ReduceOp glue(int u, int v) {
    return ReduceOp{Kind::glue, u, v, -1};
  }
  static ReduceOp series_parallel(int u, int v, int w) {
    return ReduceOp{Kind::series_parallel, u, v, w};
  }
};

// Applies glue / series-parallel reductions in order; series_parallel
// requires v's only neighbors to be u and w and the error names any other.
Network network_reduce(Network network, const std::vector<ReduceOp>& ops);

// Harmonic-solve effective resistance between two active states.
double effective_resistance(const Network& network, int a, int z);

// Computes R both by the harmonic solve and through the supplied reduction
// sequence; the two must agree within 1e-10 (relative for large values).
double effective_resistance(const Network& network, int a, int z,
                            const std::vector<ReduceOp>& ops);

// One path per ordered state pair (x, y), stored row-major at x*n + y as a
// state sequence from x to y; self-pairs may be the trivial path {x}.
struct PathEnsemble {
  long n = 0;
  std::vector<std::vector<int>> paths;

  const std::vector<int>& path(long x, long y) const;
  long max_len() const;  // longest path, counted in edges
};

// Shortest directed paths via breadth-first search; the default ensemble for
// congestion reports (a toolkit choice, not a canonical object).
PathEnsemble bfs_path_ensemble(const FiniteChain& chain);

// rho(Gamma) = max over directed edges (z, w) with P(z, w) > 0 of
// sum_{paths using the undirected edge {z, w}} pi_x pi_y / (pi_z P(z, w)).
double congestion(const FiniteChain& chain, const PathEnsemble& ensemble);

// Spectral-gap lower bound gamma >= 1 / (rho * max_len).
double gap_lower_bound(double rho, long max_len);

// Edge list (i, j, P_ij) over nonzero entries plus a state manifest mapping
// indices to ensemble serializations.
void export_chain_csv(const FiniteChain& chain,
                      const EnumeratedSpace& enumerated,
                      const std::string& edges_path,
                      const std::string& states_path);

}  // namespace bartlab
