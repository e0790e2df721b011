#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "bartlab/samplers.hpp"
#include "bartlab/trees.hpp"

namespace bartlab {

// Every distinct tree structure whose rules all split their cells, up to
// max_internal_nodes, together with the ordered m-tuples over them. TSE
// index = sum_j ids[j] * n_trees^j (tree 0 least significant).
struct EnumeratedSpace {
  CovariateSpace space;
  int m = 1;
  int max_internal_nodes = 0;
  std::vector<TreeStructure> trees;
  std::map<std::string, int> tree_index;  // serialization -> tree id

  long n_trees() const { return static_cast<long>(trees.size()); }
  long n_tse() const;
  std::vector<int> tse_tree_ids(long index) const;
  std::vector<TreeStructure> tse_ensemble(long index) const;
  long tse_index(const std::vector<int>& tree_ids) const;
  // Index of a concrete ensemble, or -1 when any tree is outside the budget.
  long index_of(const std::vector<TreeStructure>& ensemble) const;
};

// Exhaustive grow-closure enumeration from the trivial tree; throws
// CapacityError once the TSE count would exceed cap.
EnumeratedSpace enumerate_tse_space(const CovariateSpace& space, int m,
                                    int max_internal_nodes,
                                    long cap = 1000000);

// All grid points of the space as coded rows, feature 0 cycling fastest.
Eigen::MatrixXi covariate_grid(const CovariateSpace& space);

// PEM dimension: rank of the Gram matrix of all leaf indicators under the
// measure nu on the grid (empty nu = uniform), tolerance 1e-9 relative to
// the largest eigenvalue. The rank is measure-invariant for full-support nu.
int df(const std::vector<TreeStructure>& ensemble, const CovariateSpace& space,
       const Eigen::VectorXd& nu = {});

// Exact squared L2(nu) residual of projecting the tabulated f_star onto the
// ensemble's PEM span.
double bias2(const std::vector<TreeStructure>& ensemble,
             const Eigen::VectorXd& f_star, const CovariateSpace& space,
             const Eigen::VectorXd& nu = {});

// Zero-bias test used by dim_m and opt_set: bias2 <= 1e-10 * mean(f_star^2).
bool zero_bias(double bias2_value, const Eigen::VectorXd& f_star);

// Minimum df over zero-bias TSEs in the enumeration; throws ConfigError when
// the budget holds no zero-bias ensemble.
int dim_m(const Eigen::VectorXd& f_star, int m,
          const EnumeratedSpace& enumerated);

// Sorted indices of {E : f_star in F(E), df(E) <= dim_m(f_star) + k}.
std::vector<long> opt_set(const Eigen::VectorXd& f_star, int k,
                          const EnumeratedSpace& enumerated);

// Canonical labeling of the partition of the grid induced by joint leaf
// membership; two ensembles are partition-equal iff the signatures match.
std::vector<int> partition_signature(const std::vector<TreeStructure>& ensemble,
                                     const CovariateSpace& space);

enum class TargetMatch { labeled, partition };

struct HittingTimes {
  std::vector<long> tau;          // per replicate, censored values equal cap
  std::vector<uint8_t> censored;  // 1 when the cap was reached first
};

// Monte Carlo hitting times of the target TSE set from the trivial ensemble.
// Marginalized-family configs walk the enumerated space exactly: accepted
// moves leaving the budget are folded back into the diagonal (the restricted
// kernel the exact-chain toolkit builds). The default sweep runs free and is
// matched structurally, so its states may leave the enumeration. seeds: one
// per replicate, or a single base seed extended as base + rep.
HittingTimes measure_hitting_time(const SamplerConfig& config,
                                  const Dataset& data,
                                  const EnumeratedSpace& enumerated,
                                  const std::vector<long>& target, long cap,
                                  int n_reps,
                                  const std::vector<uint64_t>& seeds,
                                  TargetMatch match = TargetMatch::labeled);

}  // namespace bartlab
