#include "bartlab/optset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <limits>
#include <set>
#include <thread>

#include "bartlab/common.hpp"

namespace bartlab {

namespace {

constexpr long kGridCap = 1L << 22;
constexpr double kRankTol = 1e-9;

// Product of tree counts with saturation, so cap comparisons never overflow.
long pow_saturated(long base, int exp) {
  const long cap = std::numeric_limits<long>::max();
  long out = 1;
  for (int i = 0; i < exp; ++i) {
    if (base != 0 && out > cap / base) return cap;
    out *= base;
  }
  return out;
}

// All grows whose rule strictly splits the leaf's cell; data-free by design,
// so the enumeration covers every structure the samplers could ever occupy.
std::vector<Move> cell_grow_moves(const TreeStructure& tree,
                                  const CovariateSpace& space) {
  std::vector<Move> moves;
  const auto bounds = cell_bounds(tree, space);
  for (int id = 0; id < tree.n_nodes(); ++id) {
    if (!tree.nodes[id].is_leaf()) continue;
    for (int v = 0; v < space.d; ++v) {
      const int lo = bounds[id].lo[v];
      const int hi = bounds[id].hi[v];
      for (int t = lo + 1; t <= hi - 1; ++t) {
        moves.push_back(Move{MoveKind::grow, id, SplitRule{v, t}});
      }
    }
  }
  return moves;
}

Eigen::VectorXd normalized_measure(const Eigen::VectorXd& nu, long n_grid,
                                   const char* who) {
  if (nu.size() == 0) {
    return Eigen::VectorXd::Constant(n_grid, 1.0 / static_cast<double>(n_grid));
  }
  if (nu.size() != n_grid) {
    throw ConfigError(std::string(who) + ": measure has " +
                      std::to_string(nu.size()) + " entries for a grid of " +
                      std::to_string(n_grid));
  }
  if ((nu.array() <= 0.0).any()) {
    throw ConfigError(std::string(who) + ": measure must have full support");
  }
  return nu / nu.sum();
}

Eigen::MatrixXd leaf_basis(const std::vector<TreeStructure>& ensemble,
                           const Eigen::MatrixXi& grid,
                           const CovariateSpace& space) {
  long total = 0;
  for (const auto& tree : ensemble) total += tree.n_leaves();
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(grid.rows(), total);
  long offset = 0;
  for (const auto& tree : ensemble) {
    const auto leaves = leaf_assignment(tree, grid, space);
    for (long i = 0; i < grid.rows(); ++i) basis(i, offset + leaves[i]) = 1.0;
    offset += tree.n_leaves();
  }
  return basis;
}

struct PemSummary {
  int rank = 0;
  double resid = 0.0;  // squared projection residual; 0 when f is empty
};

// Rank and projection residual from one eigendecomposition of the weighted
// Gram matrix. Zero eigenvalues stay at roundoff scale for any full-support
// measure, so the relative cutoff makes the rank measure-invariant.
PemSummary pem_summary(const Eigen::MatrixXd& basis, const Eigen::VectorXd& w,
                       const Eigen::VectorXd& f) {
  const Eigen::MatrixXd weighted = w.asDiagonal() * basis;
  const Eigen::MatrixXd gram = basis.transpose() * weighted;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("pem_summary: eigendecomposition failed");
  }
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double tol = kRankTol * std::max(lambda.maxCoeff(), 0.0);
  PemSummary out;
  for (long i = 0; i < lambda.size(); ++i) {
    if (lambda[i] > tol) ++out.rank;
  }
  if (f.size() > 0) {
    const Eigen::VectorXd z = basis.transpose() * w.cwiseProduct(f);
    const Eigen::VectorXd coef = eig.eigenvectors().transpose() * z;
    double projected = 0.0;
    for (long i = 0; i < lambda.size(); ++i) {
      if (lambda[i] > tol) projected += coef[i] * coef[i] / lambda[i];
    }
    out.resid = std::max(0.0, f.cwiseProduct(w).dot(f) - projected);
  }
  return out;
}

void check_ensemble(const std::vector<TreeStructure>& ensemble,
                    const char* who) {
  if (ensemble.empty()) throw ConfigError(std::string(who) + ": empty ensemble");
}

// Per-TSE scan shared by dim_m and opt_set: uniform measure, per-tree basis
// blocks cached once.
struct TseScan {
  std::vector<int> rank;
  std::vector<uint8_t> zero;
  int dim = -1;
};

TseScan scan_tses(const Eigen::VectorXd& f_star,
                  const EnumeratedSpace& enumerated) {
  const Eigen::MatrixXi grid = covariate_grid(enumerated.space);
  if (f_star.size() != grid.rows()) {
    throw ConfigError("dim_m: f_star has " + std::to_string(f_star.size()) +
                      " entries for a grid of " + std::to_string(grid.rows()));
  }
  const Eigen::VectorXd w = normalized_measure({}, grid.rows(), "dim_m");
  std::vector<Eigen::MatrixXd> blocks;
  blocks.reserve(enumerated.trees.size());
  for (const auto& tree : enumerated.trees) {
    blocks.push_back(leaf_basis({tree}, grid, enumerated.space));
  }
  const long total = enumerated.n_tse();
  TseScan scan;
  scan.rank.resize(total);
  scan.zero.resize(total);
  for (long idx = 0; idx < total; ++idx) {
    const auto ids = enumerated.tse_tree_ids(idx);
    long cols = 0;
    for (int id : ids) cols += blocks[id].cols();
    Eigen::MatrixXd basis(grid.rows(), cols);
    long offset = 0;
    for (int id : ids) {
      basis.middleCols(offset, blocks[id].cols()) = blocks[id];
      offset += blocks[id].cols();
    }
    const PemSummary s = pem_summary(basis, w, f_star);
    scan.rank[idx] = s.rank;
    scan.zero[idx] = zero_bias(s.resid, f_star) ? 1 : 0;
    if (scan.zero[idx] && (scan.dim < 0 || s.rank < scan.dim)) {
      scan.dim = s.rank;
    }
  }
  if (scan.dim < 0) {
    throw ConfigError(
        "dim_m: no zero-bias ensemble within the enumeration budget (m=" +
        std::to_string(enumerated.m) + ", max_internal_nodes=" +
        std::to_string(enumerated.max_internal_nodes) + ")");
  }
  return scan;
}

}  // namespace

long EnumeratedSpace::n_tse() const {
  const long count = pow_saturated(n_trees(), m);
  if (count == std::numeric_limits<long>::max()) {
    throw CapacityError("n_tse: tuple count overflows");
  }
  return count;
}

std::vector<int> EnumeratedSpace::tse_tree_ids(long index) const {
  if (index < 0 || index >= n_tse()) {
    throw ConfigError("tse_tree_ids: index " + std::to_string(index) +
                      " outside [0, " + std::to_string(n_tse()) + ")");
  }
  std::vector<int> ids(m);
  const long base = n_trees();
  for (int j = 0; j < m; ++j) {
    ids[j] = static_cast<int>(index % base);
    index /= base;
  }
  return ids;
}

std::vector<TreeStructure> EnumeratedSpace::tse_ensemble(long index) const {
  std::vector<TreeStructure> ensemble;
  ensemble.reserve(m);
  for (int id : tse_tree_ids(index)) ensemble.push_back(trees[id]);
  return ensemble;
}

long EnumeratedSpace::tse_index(const std::vector<int>& tree_ids) const {
  if (static_cast<int>(tree_ids.size()) != m) {
    throw ConfigError("tse_index: expected " + std::to_string(m) +
                      " tree ids, got " + std::to_string(tree_ids.size()));
  }
  long index = 0;
  for (int j = m - 1; j >= 0; --j) {
    if (tree_ids[j] < 0 || tree_ids[j] >= n_trees()) {
      throw ConfigError("tse_index: tree id " + std::to_string(tree_ids[j]) +
                        " outside [0, " + std::to_string(n_trees()) + ")");
    }
    index = index * n_trees() + tree_ids[j];
  }
  return index;
}

long EnumeratedSpace::index_of(
    const std::vector<TreeStructure>& ensemble) const {
  if (static_cast<int>(ensemble.size()) != m) return -1;
  std::vector<int> ids(m);
  for (int j = 0; j < m; ++j) {
    const auto it = tree_index.find(serialize_tree(ensemble[j]));
    if (it == tree_index.end()) return -1;
    ids[j] = it->second;
  }
  return tse_index(ids);
}

EnumeratedSpace enumerate_tse_space(const CovariateSpace& space, int m,
                                    int max_internal_nodes, long cap) {
  if (m < 1) throw ConfigError("enumerate_tse_space: m must be >= 1");
  if (max_internal_nodes < 0) {
    throw ConfigError("enumerate_tse_space: negative structure budget");
  }
  if (cap < 1) throw ConfigError("enumerate_tse_space: cap must be >= 1");
  EnumeratedSpace out;
  out.space = space;
  out.m = m;
  out.max_internal_nodes = max_internal_nodes;

  const auto admit = [&](const TreeStructure& tree) {
    const std::string key = serialize_tree(tree);
    if (out.tree_index.count(key)) return false;
    out.tree_index.emplace(key, static_cast<int>(out.trees.size()));
    out.trees.push_back(tree);
    if (pow_saturated(out.n_trees(), m) > cap) {
      throw CapacityError("enumerate_tse_space: reached " +
                          std::to_string(out.n_trees()) + " trees, so >" +
                          std::to_string(cap) + " ensembles of " +
                          std::to_string(m));
    }
    return true;
  };

  std::deque<int> queue;
  admit(trivial_tree());
  queue.push_back(0);
  while (!queue.empty()) {
    const TreeStructure tree = out.trees[queue.front()];
    queue.pop_front();
    if (tree.n_internal() >= max_internal_nodes) continue;
    for (const Move& move : cell_grow_moves(tree, space)) {
      const TreeStructure grown = apply_move(tree, move);
      if (admit(grown)) queue.push_back(static_cast<int>(out.trees.size()) - 1);
    }
  }
  return out;
}

Eigen::MatrixXi covariate_grid(const CovariateSpace& space) {
  long total = 1;
  for (int v = 0; v < space.d; ++v) {
    const long k = space.n_levels(v);
    if (k < 1) throw ConfigError("covariate_grid: feature without levels");
    if (total > kGridCap / k) {
      throw CapacityError("covariate_grid: more than " +
                          std::to_string(kGridCap) + " grid points");
    }
    total *= k;
  }
  Eigen::MatrixXi grid(total, space.d);
  for (long i = 0; i < total; ++i) {
    long rest = i;
    for (int v = 0; v < space.d; ++v) {
      const long k = space.n_levels(v);
      grid(i, v) = static_cast<int>(rest % k) + 1;
      rest /= k;
    }
  }
  return grid;
}

int df(const std::vector<TreeStructure>& ensemble, const CovariateSpace& space,
       const Eigen::VectorXd& nu) {
  check_ensemble(ensemble, "df");
  const Eigen::MatrixXi grid = covariate_grid(space);
  const Eigen::VectorXd w = normalized_measure(nu, grid.rows(), "df");
  return pem_summary(leaf_basis(ensemble, grid, space), w, {}).rank;
}

double bias2(const std::vector<TreeStructure>& ensemble,
             const Eigen::VectorXd& f_star, const CovariateSpace& space,
             const Eigen::VectorXd& nu) {
  check_ensemble(ensemble, "bias2");
  const Eigen::MatrixXi grid = covariate_grid(space);
  if (f_star.size() != grid.rows()) {
    throw ConfigError("bias2: f_star has " + std::to_string(f_star.size()) +
                      " entries for a grid of " + std::to_string(grid.rows()));
  }
  const Eigen::VectorXd w = normalized_measure(nu, grid.rows(), "bias2");
  return pem_summary(leaf_basis(ensemble, grid, space), w, f_star).resid;
}

bool zero_bias(double bias2_value, const Eigen::VectorXd& f_star) {
  const double scale =
      f_star.squaredNorm() / static_cast<double>(f_star.size());
  return bias2_value <= 1e-10 * scale;
}

int dim_m(const Eigen::VectorXd& f_star, int m,
          const EnumeratedSpace& enumerated) {
  if (m != enumerated.m) {
    throw ConfigError("dim_m: asked for m=" + std::to_string(m) +
                      " on a space enumerated with m=" +
                      std::to_string(enumerated.m));
  }
  return scan_tses(f_star, enumerated).dim;
}

std::vector<long> opt_set(const Eigen::VectorXd& f_star, int k,
                          const EnumeratedSpace& enumerated) {
  if (k < 0) throw ConfigError("opt_set: k must be >= 0");
  const TseScan scan = scan_tses(f_star, enumerated);
  std::vector<long> members;
  for (long idx = 0; idx < static_cast<long>(scan.rank.size()); ++idx) {
    if (scan.zero[idx] && scan.rank[idx] <= scan.dim + k) {
      members.push_back(idx);
    }
  }
  return members;
}

std::vector<int> partition_signature(
    const std::vector<TreeStructure>& ensemble, const CovariateSpace& space) {
  check_ensemble(ensemble, "partition_signature");
  const Eigen::MatrixXi grid = covariate_grid(space);
  std::vector<std::vector<int>> joint(grid.rows());
  for (const auto& tree : ensemble) {
    const auto leaves = leaf_assignment(tree, grid, space);
    for (long i = 0; i < grid.rows(); ++i) joint[i].push_back(leaves[i]);
  }
  std::map<std::vector<int>, int> labels;
  std::vector<int> signature(grid.rows());
  for (long i = 0; i < grid.rows(); ++i) {
    const auto it = labels.emplace(joint[i], static_cast<int>(labels.size()));
    signature[i] = it.first->second;
  }
  return signature;
}

HittingTimes measure_hitting_time(const SamplerConfig& config,
                                  const Dataset& data,
                                  const EnumeratedSpace& enumerated,
                                  const std::vector<long>& target, long cap,
                                  int n_reps,
                                  const std::vector<uint64_t>& seeds,
                                  TargetMatch match) {
  validate_config(config);
  if (config.variant == SamplerVariant::multistep) {
    throw ConfigError(
        "measure_hitting_time: multistep chains live in the exact-chain "
        "toolkit");
  }
  if (config.m != enumerated.m) {
    throw ConfigError("measure_hitting_time: config.m=" +
                      std::to_string(config.m) + " but space has m=" +
                      std::to_string(enumerated.m));
  }
  if (target.empty()) {
    throw ConfigError("measure_hitting_time: empty target set");
  }
  if (cap < 0) throw ConfigError("measure_hitting_time: negative cap");
  if (n_reps < 1) throw ConfigError("measure_hitting_time: n_reps must be >= 1");
  if (seeds.size() != static_cast<size_t>(n_reps) && seeds.size() != 1) {
    throw ConfigError(
        "measure_hitting_time: pass one seed per replicate or a single base "
        "seed");
  }

  std::set<std::string> labeled_target;
  std::set<std::vector<int>> partition_target;
  for (long idx : target) {
    const auto ensemble = enumerated.tse_ensemble(idx);  // validates range
    if (match == TargetMatch::labeled) {
      labeled_target.insert(serialize_ensemble(ensemble));
    } else {
      partition_target.insert(partition_signature(ensemble, enumerated.space));
    }
  }
  const auto in_target = [&](const std::vector<TreeStructure>& trees) {
    if (match == TargetMatch::labeled) {
      return labeled_target.count(serialize_ensemble(trees)) > 0;
    }
    return partition_target.count(partition_signature(trees,
                                                      enumerated.space)) > 0;
  };

  // Free default sweeps may leave the enumeration; marginalized-family walks
  // fold accepted exits back into the diagonal so they realize the restricted
  // kernel the exact-chain toolkit analyzes.
  const bool restricted = config.variant != SamplerVariant::default_sweep;

  HittingTimes out;
  out.tau.assign(n_reps, cap);
  out.censored.assign(n_reps, 1);

  const auto run_rep = [&](int rep) {
    SamplerConfig rep_config = config;
    rep_config.seed = seeds.size() == 1
                          ? seeds[0] + static_cast<uint64_t>(rep)
                          : seeds[rep];
    Rng rng(rep_config.seed);
    ChainState state =
        make_state(rep_config, data, trivial_init(rep_config.m, data));
    if (in_target(state.trees)) {
      out.tau[rep] = 0;
      out.censored[rep] = 0;
      return;
    }
    for (long t = 1; t <= cap; ++t) {
      state.iteration = t - 1;
      if (restricted) {
        ChainState before = state;
        step_marginalized(state, data, rep_config, rng);
        if (state.last_accepts > 0) {
          for (int j = 0; j < rep_config.m; ++j) {
            if (state.trees[j] == before.trees[j]) continue;
            if (!enumerated.tree_index.count(serialize_tree(state.trees[j]))) {
              state = std::move(before);
            }
            break;
          }
        }
      } else {
        step_default(state, data, rep_config, rng);
      }
      if (in_target(state.trees)) {
        out.tau[rep] = t;
        out.censored[rep] = 0;
        return;
      }
    }
  };

  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  const int n_workers = static_cast<int>(
      std::min<long>(static_cast<long>(hw), static_cast<long>(n_reps)));
  if (n_workers <= 1) {
    for (int rep = 0; rep < n_reps; ++rep) run_rep(rep);
    return out;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(n_workers);
  std::vector<std::thread> workers;
  workers.reserve(n_workers);
  for (int wkr = 0; wkr < n_workers; ++wkr) {
    workers.emplace_back([&, wkr]() {
      try {
        for (int rep = next.fetch_add(1); rep < n_reps;
             rep = next.fetch_add(1)) {
          run_rep(rep);
        }
      } catch (...) {
        errors[wkr] = std::current_exception();
      }
    });
  }
  for (auto& worker : workers) worker.join();
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
  return out;
}

}  // namespace bartlab
