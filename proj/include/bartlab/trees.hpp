#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "bartlab/covariates.hpp"
#include "bartlab/rng.hpp"

namespace bartlab {

// Split rule: x_feature <= threshold goes left; threshold is in code units
// (1..K-1 for a K-level feature).
struct SplitRule {
  int feature = -1;
  int threshold = 0;
  friend bool operator==(const SplitRule&, const SplitRule&) = default;
};

struct TreeNode {
  SplitRule rule;
  int left = -1;  // both -1 for a leaf
  int right = -1;
  bool is_leaf() const { return left < 0; }
};

// Immutable full binary tree; nodes stored in breadth-first order, node 0 is
// the root. Moves produce fresh trees.
struct TreeStructure {
  std::vector<TreeNode> nodes;

  int n_nodes() const { return static_cast<int>(nodes.size()); }
  int n_internal() const { return (n_nodes() - 1) / 2; }
  int n_leaves() const { return (n_nodes() + 1) / 2; }
  // Depth of every node; parents precede children so one forward pass works.
  std::vector<int> depths() const;
  std::vector<int> parents() const;
  // Leaf ids in node order; leaf_index[node] is the 0-based leaf index or -1.
  std::vector<int> leaf_ids() const;
  std::vector<int> leaf_index() const;

  friend bool operator==(const TreeStructure& a, const TreeStructure& b);
};

// Per-node rectangular cell bounds in code units: cell = prod_j (lo_j, hi_j].
struct CellBounds {
  std::vector<int> lo, hi;
};
std::vector<CellBounds> cell_bounds(const TreeStructure& tree,
                                    const CovariateSpace& space);

TreeStructure trivial_tree();

std::string serialize_tree(const TreeStructure& tree);
TreeStructure parse_tree(const std::string& text);
std::string serialize_ensemble(const std::vector<TreeStructure>& trees);

// Route rows down the tree; returns 0-based leaf indices (leaf order =
// node order).
std::vector<int> leaf_assignment(const TreeStructure& tree,
                                 const Eigen::MatrixXi& X,
                                 const CovariateSpace& space);

enum class MoveKind { grow, prune, change, swap_rule, stay };

struct Move {
  MoveKind kind = MoveKind::stay;
  int node = -1;    // grow: leaf id; prune/change: internal id; swap: child id
  SplitRule rule;   // grow/change only
  friend bool operator==(const Move&, const Move&) = default;
};

struct MoveWeights {
  double grow = 0.25;
  double prune = 0.25;
  double change = 0.4;
  double swap = 0.1;
  double stay = 0.0;

  double of(MoveKind k) const;
  double total() const { return grow + prune + change + swap + stay; }
};
void validate_weights(const MoveWeights& weights);

// How Grow/Change rules are drawn: uniformly over all valid (feature,
// threshold) pairs across eligible nodes, or node first, then feature among
// those with a valid threshold, then threshold.
enum class RuleSelection { pairs, feature_first };

TreeStructure apply_move(const TreeStructure& tree, const Move& move);

long count_feasible(const TreeStructure& tree, MoveKind kind,
                    const Dataset& data);
std::vector<Move> enumerate_feasible_moves(const TreeStructure& tree,
                                           MoveKind kind, const Dataset& data);

struct Proposal {
  TreeStructure tree;
  Move move;
  double q_fwd = 1.0;
  double q_bwd = 1.0;
  bool no_op = false;  // empty feasible set for the drawn kind
};

Proposal propose(const TreeStructure& tree, const MoveWeights& weights,
                 const Dataset& data, Rng& rng,
                 RuleSelection selection = RuleSelection::pairs);

// Probability that propose() emits exactly this move from this tree (kind
// weight included). Used when assembling exact proposal matrices.
double move_probability(const TreeStructure& tree, const Move& move,
                        const MoveWeights& weights, const Dataset& data,
                        RuleSelection selection = RuleSelection::pairs);

MoveKind reverse_kind(MoveKind kind);

}  // namespace bartlab
