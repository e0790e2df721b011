#include "bartlab/trees.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace bartlab {

std::vector<int> TreeStructure::depths() const {
  std::vector<int> d(nodes.size(), 0);
  for (size_t i = 0; i < nodes.size(); ++i) {
    if (!nodes[i].is_leaf()) {
      d[nodes[i].left] = d[i] + 1;
      d[nodes[i].right] = d[i] + 1;
    }
  }
  return d;
}

std::vector<int> TreeStructure::parents() const {
  std::vector<int> p(nodes.size(), -1);
  for (size_t i = 0; i < nodes.size(); ++i) {
    if (!nodes[i].is_leaf()) {
      p[nodes[i].left] = static_cast<int>(i);
      p[nodes[i].right] = static_cast<int>(i);
    }
  }
  return p;
}

std::vector<int> TreeStructure::leaf_ids() const {
  std::vector<int> ids;
  for (size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].is_leaf()) ids.push_back(static_cast<int>(i));
  return ids;
}

std::vector<int> TreeStructure::leaf_index() const {
  std::vector<int> idx(nodes.size(), -1);
  int k = 0;
  for (size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].is_leaf()) idx[i] = k++;
  return idx;
}

bool operator==(const TreeStructure& a, const TreeStructure& b) {
  if (a.nodes.size() != b.nodes.size()) return false;
  for (size_t i = 0; i < a.nodes.size(); ++i) {
    const auto& x = a.nodes[i];
    const auto& y = b.nodes[i];
    if (x.left != y.left || x.right != y.right) return false;
    if (!x.is_leaf() && !(x.rule == y.rule)) return false;
  }
  return true;
}

std::vector<CellBounds> cell_bounds(const TreeStructure& tree,
                                    const CovariateSpace& space) {
  std::vector<CellBounds> cells(tree.nodes.size());
  cells[0].lo.assign(space.d, 0);
  cells[0].hi.resize(space.d);
  for (int j = 0; j < space.d; ++j) cells[0].hi[j] = space.n_levels(j);
  for (size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& nd = tree.nodes[i];
    if (nd.is_leaf()) continue;
    cells[nd.left] = cells[i];
    cells[nd.right] = cells[i];
    cells[nd.left].hi[nd.rule.feature] = nd.rule.threshold;
    cells[nd.right].lo[nd.rule.feature] = nd.rule.threshold;
  }
  return cells;
}

TreeStructure trivial_tree() {
  TreeStructure t;
  t.nodes.push_back(TreeNode{});
  return t;
}

namespace {

// Rebuild in breadth-first node order, the canonical numbering assumed by
// equality and serialization. Keeping every tree in this form also makes node
// ids stable across moves: a node's BFS position depends only on shallower
// nodes and same-depth nodes to its left, none of which a move at or below it
// touches.
TreeStructure bfs_renumber(const TreeStructure& tree) {
  TreeStructure out;
  std::vector<int> queue{0};
  std::vector<int> new_id(tree.nodes.size(), -1);
  for (size_t q = 0; q < queue.size(); ++q) {
    const int old = queue[q];
    new_id[old] = static_cast<int>(q);
    out.nodes.push_back(tree.nodes[old]);
    if (!tree.nodes[old].is_leaf()) {
      queue.push_back(tree.nodes[old].left);
      queue.push_back(tree.nodes[old].right);
    }
  }
  for (auto& nd : out.nodes) {
    if (!nd.is_leaf()) {
      nd.left = new_id[nd.left];
      nd.right = new_id[nd.right];
    }
  }
  return out;
}

void serialize_node(const TreeStructure& tree, int id,
                    const std::vector<int>& leaf_idx, std::ostream& os) {
  const auto& nd = tree.nodes[id];
  if (nd.is_leaf()) {
    os << "(leaf " << leaf_idx[id] << ")";
  } else {
    os << "(split " << nd.rule.feature << " " << nd.rule.threshold << " ";
    serialize_node(tree, nd.left, leaf_idx, os);
    os << " ";
    serialize_node(tree, nd.right, leaf_idx, os);
    os << ")";
  }
}

struct TokenStream {
  std::vector<std::string> tokens;
  size_t pos = 0;
  const std::string& next() {
    if (pos >= tokens.size()) throw ConfigError("parse_tree: truncated input");
    return tokens[pos++];
  }
};

int parse_node(TreeStructure& tree, TokenStream& ts) {
  if (ts.next() != "(") throw ConfigError("parse_tree: expected '('");
  const std::string tag = ts.next();
  const int id = tree.n_nodes();
  tree.nodes.push_back(TreeNode{});
  if (tag == "leaf") {
    ts.next();  // stored leaf index, recomputed on use
  } else if (tag == "split") {
    tree.nodes[id].rule.feature = std::stoi(ts.next());
    tree.nodes[id].rule.threshold = std::stoi(ts.next());
    const int l = parse_node(tree, ts);
    const int r = parse_node(tree, ts);
    tree.nodes[id].left = l;
    tree.nodes[id].right = r;
  } else {
    throw ConfigError("parse_tree: unknown tag '" + tag + "'");
  }
  if (ts.next() != ")") throw ConfigError("parse_tree: expected ')'");
  return id;
}

int route_from(const TreeStructure& tree, int node, const Eigen::MatrixXi& X,
               long row) {
  int cur = node;
  while (!tree.nodes[cur].is_leaf()) {
    const auto& r = tree.nodes[cur].rule;
    cur = X(row, r.feature) <= r.threshold ? tree.nodes[cur].left
                                           : tree.nodes[cur].right;
  }
  return cur;
}

void check_codes(const Eigen::MatrixXi& X, const CovariateSpace& space) {
  if (static_cast<int>(X.cols()) != space.d)
    throw ConfigError("leaf_assignment: feature count mismatch");
  for (int j = 0; j < space.d; ++j) {
    const int hi = space.n_levels(j);
    for (long i = 0; i < X.rows(); ++i)
      if (X(i, j) < 1 || X(i, j) > hi)
        throw ConfigError("leaf_assignment: feature code out of range");
  }
}

// Rows listed per leaf node id.
std::vector<std::vector<long>> rows_by_leaf(const TreeStructure& tree,
                                            const Dataset& data) {
  std::vector<std::vector<long>> rows(tree.nodes.size());
  for (long i = 0; i < data.n(); ++i)
    rows[route_from(tree, 0, data.X, i)].push_back(i);
  return rows;
}

std::vector<long> rows_under(const TreeStructure& tree, int node,
                             const std::vector<std::vector<long>>& leaf_rows) {
  std::vector<long> out;
  std::vector<int> stack{node};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    if (tree.nodes[id].is_leaf())
      out.insert(out.end(), leaf_rows[id].begin(), leaf_rows[id].end());
    else {
      stack.push_back(tree.nodes[id].left);
      stack.push_back(tree.nodes[id].right);
    }
  }
  return out;
}

std::vector<int> leaves_under(const TreeStructure& tree, int node) {
  std::vector<int> out;
  std::vector<int> stack{node};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    if (tree.nodes[id].is_leaf())
      out.push_back(id);
    else {
      stack.push_back(tree.nodes[id].left);
      stack.push_back(tree.nodes[id].right);
    }
  }
  return out;
}

constexpr int kNoCode = std::numeric_limits<int>::max();

// Valid grow thresholds at a leaf for feature v form the interval
// [min code, max code - 1]: any such t leaves rows on both sides, anything
// outside empties one child.
struct GrowStats {
  std::vector<int> leaf_nodes;
  std::vector<std::vector<std::pair<int, int>>> minmax;  // per leaf x feature
  std::vector<long> leaf_total;
  long total = 0;
};

GrowStats grow_stats(const TreeStructure& tree, const Dataset& data,
                     const std::vector<std::vector<long>>& leaf_rows) {
  const int d = data.space.d;
  GrowStats st;
  for (size_t id = 0; id < tree.nodes.size(); ++id) {
    if (!tree.nodes[id].is_leaf() || leaf_rows[id].empty()) continue;
    std::vector<std::pair<int, int>> mm(d, {kNoCode, -kNoCode});
    for (const long row : leaf_rows[id]) {
      for (int j = 0; j < d; ++j) {
        const int c = data.X(row, j);
        mm[j].first = std::min(mm[j].first, c);
        mm[j].second = std::max(mm[j].second, c);
      }
    }
    long cnt = 0;
    for (int j = 0; j < d; ++j) cnt += mm[j].second - mm[j].first;
    st.leaf_nodes.push_back(static_cast<int>(id));
    st.minmax.push_back(std::move(mm));
    st.leaf_total.push_back(cnt);
    st.total += cnt;
  }
  return st;
}

// Valid replacement rules at internal node m for feature v: route m's rows
// through its two subtrees ignoring m's own rule. A threshold t keeps every
// left-subtree leaf non-empty iff t >= min x_v over that leaf's routed rows,
// and every right-subtree leaf non-empty iff t < its max x_v, so the valid
// set is the interval
//   [ max over left leaves of min x_v , min over right leaves of max x_v - 1 ]
// with the current rule excluded.
struct ChangeStats {
  std::vector<int> node_ids;
  std::vector<std::vector<std::pair<int, int>>> interval;  // per node x feature
  std::vector<long> node_total;
  long total = 0;
};

ChangeStats change_stats(const TreeStructure& tree, const Dataset& data,
                         const std::vector<std::vector<long>>& leaf_rows) {
  const int d = data.space.d;
  ChangeStats st;
  for (size_t m = 0; m < tree.nodes.size(); ++m) {
    if (tree.nodes[m].is_leaf()) continue;
    const auto rows = rows_under(tree, static_cast<int>(m), leaf_rows);
    const auto left_leaves = leaves_under(tree, tree.nodes[m].left);
    const auto right_leaves = leaves_under(tree, tree.nodes[m].right);

    std::vector<std::vector<int>> lmin(tree.nodes.size()),
        rmax(tree.nodes.size());
    for (const int l : left_leaves) lmin[l].assign(d, kNoCode);
    for (const int l : right_leaves) rmax[l].assign(d, -kNoCode);
    for (const long row : rows) {
      const int ll = route_from(tree, tree.nodes[m].left, data.X, row);
      const int rl = route_from(tree, tree.nodes[m].right, data.X, row);
      for (int j = 0; j < d; ++j) {
        lmin[ll][j] = std::min(lmin[ll][j], data.X(row, j));
        rmax[rl][j] = std::max(rmax[rl][j], data.X(row, j));
      }
    }
    bool dead = false;  // some subtree leaf received no rows at all
    for (const int l : left_leaves)
      if (lmin[l][0] == kNoCode) dead = true;
    for (const int l : right_leaves)
      if (rmax[l][0] == -kNoCode) dead = true;

    std::vector<std::pair<int, int>> iv(d, {1, 0});
    long total = 0;
    for (int j = 0; j < d && !dead; ++j) {
      int lo = 0, hi = kNoCode;
      for (const int l : left_leaves) lo = std::max(lo, lmin[l][j]);
      for (const int l : right_leaves) hi = std::min(hi, rmax[l][j] - 1);
      iv[j] = {lo, hi};
      if (hi >= lo) {
        long cnt = hi - lo + 1;
        const auto& cur = tree.nodes[m].rule;
        if (cur.feature == j && cur.threshold >= lo && cur.threshold <= hi)
          cnt -= 1;
        total += cnt;
      }
    }
    st.node_ids.push_back(static_cast<int>(m));
    st.interval.push_back(std::move(iv));
    st.node_total.push_back(total);
    st.total += total;
  }
  return st;
}

std::vector<int> prunable_nodes(const TreeStructure& tree) {
  std::vector<int> out;
  for (size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& nd = tree.nodes[i];
    if (!nd.is_leaf() && tree.nodes[nd.left].is_leaf() &&
        tree.nodes[nd.right].is_leaf())
      out.push_back(static_cast<int>(i));
  }
  return out;
}

// Swap candidates: internal child ids (the parent is internal by construction).
std::vector<int> swap_children(const TreeStructure& tree) {
  std::vector<int> out;
  for (size_t i = 0; i < tree.nodes.size(); ++i) {
    if (tree.nodes[i].is_leaf()) continue;
    const int l = tree.nodes[i].left, r = tree.nodes[i].right;
    if (!tree.nodes[l].is_leaf()) out.push_back(l);
    if (!tree.nodes[r].is_leaf()) out.push_back(r);
  }
  return out;
}

bool swap_feasible(const TreeStructure& tree, int child, const Dataset& data) {
  const TreeStructure cand = apply_move(tree, Move{MoveKind::swap_rule, child, {}});
  std::vector<long> count(cand.nodes.size(), 0);
  for (long i = 0; i < data.n(); ++i) count[route_from(cand, 0, data.X, i)]++;
  for (size_t id = 0; id < cand.nodes.size(); ++id)
    if (cand.nodes[id].is_leaf() && count[id] == 0) return false;
  return true;
}

std::vector<int> feasible_swaps(const TreeStructure& tree,
                                const Dataset& data) {
  std::vector<int> out;
  for (const int c : swap_children(tree))
    if (swap_feasible(tree, c, data)) out.push_back(c);
  return out;
}

// Decode the k-th grow move under the pairs ordering without materializing
// the full list.
Move decode_grow(const GrowStats& st, long k) {
  for (size_t i = 0; i < st.leaf_nodes.size(); ++i) {
    if (k >= st.leaf_total[i]) {
      k -= st.leaf_total[i];
      continue;
    }
    for (size_t j = 0; j < st.minmax[i].size(); ++j) {
      const long cnt = st.minmax[i][j].second - st.minmax[i][j].first;
      if (k >= cnt) {
        k -= cnt;
        continue;
      }
      return Move{MoveKind::grow, st.leaf_nodes[i],
                  {static_cast<int>(j),
                   st.minmax[i][j].first + static_cast<int>(k)}};
    }
  }
  throw NumericalError("decode_grow: index out of range");
}

Move decode_change(const TreeStructure& tree, const ChangeStats& st, long k) {
  for (size_t i = 0; i < st.node_ids.size(); ++i) {
    if (k >= st.node_total[i]) {
      k -= st.node_total[i];
      continue;
    }
    const auto& cur = tree.nodes[st.node_ids[i]].rule;
    for (size_t j = 0; j < st.interval[i].size(); ++j) {
      const auto [lo, hi] = st.interval[i][j];
      if (hi < lo) continue;
      long cnt = hi - lo + 1;
      const bool skip_cur = cur.feature == static_cast<int>(j) &&
                            cur.threshold >= lo && cur.threshold <= hi;
      if (skip_cur) cnt -= 1;
      if (k >= cnt) {
        k -= cnt;
        continue;
      }
      int t = lo + static_cast<int>(k);
      if (skip_cur && t >= cur.threshold) t += 1;
      return Move{MoveKind::change, st.node_ids[i], {static_cast<int>(j), t}};
    }
  }
  throw NumericalError("decode_change: index out of range");
}

}  // namespace

std::string serialize_tree(const TreeStructure& tree) {
  std::ostringstream os;
  serialize_node(tree, 0, tree.leaf_index(), os);
  return os.str();
}

std::string serialize_ensemble(const std::vector<TreeStructure>& trees) {
  std::ostringstream os;
  for (size_t j = 0; j < trees.size(); ++j) {
    if (j) os << " | ";
    os << serialize_tree(trees[j]);
  }
  return os.str();
}

TreeStructure parse_tree(const std::string& text) {
  TokenStream ts;
  std::string cur;
  for (const char ch : text) {
    if (ch == '(' || ch == ')') {
      if (!cur.empty()) {
        ts.tokens.push_back(cur);
        cur.clear();
      }
      ts.tokens.push_back(std::string(1, ch));
    } else if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) {
        ts.tokens.push_back(cur);
        cur.clear();
      }
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) ts.tokens.push_back(cur);
  TreeStructure tree;
  parse_node(tree, ts);
  if (ts.pos != ts.tokens.size())
    throw ConfigError("parse_tree: trailing tokens");
  return bfs_renumber(tree);
}

std::vector<int> leaf_assignment(const TreeStructure& tree,
                                 const Eigen::MatrixXi& X,
                                 const CovariateSpace& space) {
  check_codes(X, space);
  const auto leaf_idx = tree.leaf_index();
  std::vector<int> out(X.rows());
  for (long i = 0; i < X.rows(); ++i)
    out[i] = leaf_idx[route_from(tree, 0, X, i)];
  return out;
}

double MoveWeights::of(MoveKind k) const {
  switch (k) {
    case MoveKind::grow: return grow;
    case MoveKind::prune: return prune;
    case MoveKind::change: return change;
    case MoveKind::swap_rule: return swap;
    case MoveKind::stay: return stay;
  }
  return 0.0;
}

void validate_weights(const MoveWeights& weights) {
  if (weights.grow < 0 || weights.prune < 0 || weights.change < 0 ||
      weights.swap < 0 || weights.stay < 0)
    throw ConfigError("move weights must be non-negative");
  if (std::abs(weights.total() - 1.0) > 1e-9)
    throw ConfigError("move weights must sum to 1");
}

MoveKind reverse_kind(MoveKind kind) {
  switch (kind) {
    case MoveKind::grow: return MoveKind::prune;
    case MoveKind::prune: return MoveKind::grow;
    default: return kind;
  }
}

TreeStructure apply_move(const TreeStructure& tree, const Move& move) {
  TreeStructure out = tree;
  switch (move.kind) {
    case MoveKind::stay:
      return out;
    case MoveKind::grow: {
      if (!out.nodes[move.node].is_leaf())
        throw ConfigError("apply_move: grow target is not a leaf");
      const int l = out.n_nodes();
      out.nodes.push_back(TreeNode{});
      out.nodes.push_back(TreeNode{});
      out.nodes[move.node].rule = move.rule;
      out.nodes[move.node].left = l;
      out.nodes[move.node].right = l + 1;
      break;
    }
    case MoveKind::prune: {
      const auto& nd = out.nodes[move.node];
      if (nd.is_leaf() || !out.nodes[nd.left].is_leaf() ||
          !out.nodes[nd.right].is_leaf())
        throw ConfigError(
            "apply_move: prune target must have two leaf children");
      out.nodes[move.node].left = -1;
      out.nodes[move.node].right = -1;
      break;
    }
    case MoveKind::change: {
      if (out.nodes[move.node].is_leaf())
        throw ConfigError("apply_move: change target is a leaf");
      out.nodes[move.node].rule = move.rule;
      break;
    }
    case MoveKind::swap_rule: {
      const auto parents = out.parents();
      const int c = move.node;
      const int p = parents[c];
      if (p < 0 || out.nodes[c].is_leaf())
        throw ConfigError(
            "apply_move: swap needs an internal parent-child pair");
      const int sib =
          out.nodes[p].left == c ? out.nodes[p].right : out.nodes[p].left;
      const bool both_equal = !out.nodes[sib].is_leaf() &&
                              out.nodes[sib].rule == out.nodes[c].rule;
      const SplitRule parent_rule = out.nodes[p].rule;
      out.nodes[p].rule = out.nodes[c].rule;
      out.nodes[c].rule = parent_rule;
      // When both children carry the same rule the sibling swaps too, which
      // keeps the move an involution.
      if (both_equal) out.nodes[sib].rule = parent_rule;
      break;
    }
  }
  return bfs_renumber(out);
}

long count_feasible(const TreeStructure& tree, MoveKind kind,
                    const Dataset& data) {
  if (!data.binned) throw ConfigError("count_feasible: dataset not binned");
  switch (kind) {
    case MoveKind::stay:
      return 1;
    case MoveKind::prune:
      return static_cast<long>(prunable_nodes(tree).size());
    case MoveKind::grow: {
      const auto leaf_rows = rows_by_leaf(tree, data);
      return grow_stats(tree, data, leaf_rows).total;
    }
    case MoveKind::change: {
      const auto leaf_rows = rows_by_leaf(tree, data);
      return change_stats(tree, data, leaf_rows).total;
    }
    case MoveKind::swap_rule:
      return static_cast<long>(feasible_swaps(tree, data).size());
  }
  return 0;
}

std::vector<Move> enumerate_feasible_moves(const TreeStructure& tree,
                                           MoveKind kind,
                                           const Dataset& data) {
  // Deliberately plain: every candidate is materialized and re-checked by
  // routing, so this doubles as a reference for the counting paths.
  if (!data.binned)
    throw ConfigError("enumerate_feasible_moves: dataset not binned");
  std::vector<Move> out;
  const auto leaf_rows = rows_by_leaf(tree, data);
  const auto cells = cell_bounds(tree, data.space);
  switch (kind) {
    case MoveKind::stay:
      out.push_back(Move{MoveKind::stay, -1, {}});
      break;
    case MoveKind::prune:
      for (const int id : prunable_nodes(tree))
        out.push_back(Move{MoveKind::prune, id, {}});
      break;
    case MoveKind::grow: {
      for (size_t id = 0; id < tree.nodes.size(); ++id) {
        if (!tree.nodes[id].is_leaf()) continue;
        for (int j = 0; j < data.space.d; ++j) {
          for (int t = cells[id].lo[j] + 1; t < cells[id].hi[j]; ++t) {
            long left = 0, right = 0;
            for (const long row : leaf_rows[id])
              (data.X(row, j) <= t ? left : right)++;
            if (left > 0 && right > 0)
              out.push_back(Move{MoveKind::grow, static_cast<int>(id), {j, t}});
          }
        }
      }
      break;
    }
    case MoveKind::change: {
      for (size_t m = 0; m < tree.nodes.size(); ++m) {
        if (tree.nodes[m].is_leaf()) continue;
        const auto rows = rows_under(tree, static_cast<int>(m), leaf_rows);
        for (int j = 0; j < data.space.d; ++j) {
          for (int t = cells[m].lo[j] + 1; t < cells[m].hi[j]; ++t) {
            if (tree.nodes[m].rule == SplitRule{j, t}) continue;
            TreeStructure cand = tree;
            cand.nodes[m].rule = {j, t};
            std::vector<long> cnt(cand.nodes.size(), 0);
            for (const long row : rows)
              cnt[route_from(cand, static_cast<int>(m), data.X, row)]++;
            bool ok = true;
            for (const int l : leaves_under(cand, static_cast<int>(m)))
              if (cnt[l] == 0) ok = false;
            if (ok)
              out.push_back(
                  Move{MoveKind::change, static_cast<int>(m), {j, t}});
          }
        }
      }
      break;
    }
    case MoveKind::swap_rule: {
      for (const int c : feasible_swaps(tree, data))
        out.push_back(Move{MoveKind::swap_rule, c, {}});
      break;
    }
  }
  return out;
}

double move_probability(const TreeStructure& tree, const Move& move,
                        const MoveWeights& weights, const Dataset& data,
                        RuleSelection selection) {
  const double w = weights.of(move.kind);
  if (move.kind == MoveKind::stay) return w;
  if (selection == RuleSelection::pairs || move.kind == MoveKind::prune ||
      move.kind == MoveKind::swap_rule) {
    const long count = count_feasible(tree, move.kind, data);
    if (count == 0) return 0.0;
    return w / static_cast<double>(count);
  }
  // feature_first weighs grow and change by the node, feature, threshold
  // cascade instead of a flat draw over pairs.
  const auto leaf_rows = rows_by_leaf(tree, data);
  if (move.kind == MoveKind::grow) {
    const auto st = grow_stats(tree, data, leaf_rows);
    long eligible = 0;
    for (const long t : st.leaf_total)
      if (t > 0) eligible++;
    for (size_t i = 0; i < st.leaf_nodes.size(); ++i) {
      if (st.leaf_nodes[i] != move.node) continue;
      long features = 0;
      for (const auto& mm : st.minmax[i])
        if (mm.second > mm.first) features++;
      const auto& mm = st.minmax[i][move.rule.feature];
      const long span = mm.second - mm.first;
      if (span <= 0 || eligible == 0) return 0.0;
      return w / static_cast<double>(eligible) /
             static_cast<double>(features) / static_cast<double>(span);
    }
    return 0.0;
  }
  const auto st = change_stats(tree, data, leaf_rows);
  long eligible = 0;
  for (const long t : st.node_total)
    if (t > 0) eligible++;
  for (size_t i = 0; i < st.node_ids.size(); ++i) {
    if (st.node_ids[i] != move.node) continue;
    const auto& cur = tree.nodes[move.node].rule;
    long features = 0;
    std::vector<long> per_feature(st.interval[i].size(), 0);
    for (size_t j = 0; j < st.interval[i].size(); ++j) {
      const auto [lo, hi] = st.interval[i][j];
      if (hi < lo) continue;
      long cnt = hi - lo + 1;
      if (cur.feature == static_cast<int>(j) && cur.threshold >= lo &&
          cur.threshold <= hi)
        cnt -= 1;
      per_feature[j] = cnt;
      if (cnt > 0) features++;
    }
    const long cnt = per_feature[move.rule.feature];
    if (cnt <= 0 || eligible == 0) return 0.0;
    return w / static_cast<double>(eligible) / static_cast<double>(features) /
           static_cast<double>(cnt);
  }
  return 0.0;
}

Proposal propose(const TreeStructure& tree, const MoveWeights& weights,
                 const Dataset& data, Rng& rng, RuleSelection selection) {
  validate_weights(weights);
  const MoveKind kinds[] = {MoveKind::grow, MoveKind::prune, MoveKind::change,
                            MoveKind::swap_rule, MoveKind::stay};
  MoveKind kind = MoveKind::stay;
  {
    const double u = rng.unif() * weights.total();
    double acc = 0.0;
    bool found = false;
    for (const MoveKind k : kinds) {
      const double w = weights.of(k);
      if (w <= 0.0) continue;
      kind = k;  // last positive-weight kind absorbs rounding at u == total
      acc += w;
      if (u < acc) {
        found = true;
        break;
      }
    }
    if (!found && weights.of(kind) <= 0.0)
      throw ConfigError("propose: all move weights are zero");
  }

  Proposal prop;
  if (kind == MoveKind::stay) {
    prop.tree = tree;
    prop.move = Move{MoveKind::stay, -1, {}};
    prop.q_fwd = prop.q_bwd = weights.stay;
    return prop;
  }

  const auto leaf_rows = rows_by_leaf(tree, data);
  Move move;
  move.node = -1;
  double q_fwd = 0.0;
  switch (kind) {
    case MoveKind::grow: {
      const auto st = grow_stats(tree, data, leaf_rows);
      if (st.total == 0) break;
      if (selection == RuleSelection::pairs) {
        move = decode_grow(st, static_cast<long>(rng.unif_int(
                                   static_cast<uint64_t>(st.total))));
        q_fwd = weights.grow / static_cast<double>(st.total);
      } else {
        std::vector<size_t> eligible;
        for (size_t i = 0; i < st.leaf_nodes.size(); ++i)
          if (st.leaf_total[i] > 0) eligible.push_back(i);
        const size_t i = eligible[rng.unif_int(eligible.size())];
        std::vector<int> feats;
        for (size_t j = 0; j < st.minmax[i].size(); ++j)
          if (st.minmax[i][j].second > st.minmax[i][j].first)
            feats.push_back(static_cast<int>(j));
        const int j = feats[rng.unif_int(feats.size())];
        const long span = st.minmax[i][j].second - st.minmax[i][j].first;
        const int t =
            st.minmax[i][j].first +
            static_cast<int>(rng.unif_int(static_cast<uint64_t>(span)));
        move = Move{MoveKind::grow, st.leaf_nodes[i], {j, t}};
        q_fwd = weights.grow / static_cast<double>(eligible.size()) /
                static_cast<double>(feats.size()) / static_cast<double>(span);
      }
      break;
    }
    case MoveKind::prune: {
      const auto nodes = prunable_nodes(tree);
      if (nodes.empty()) break;
      move = Move{MoveKind::prune, nodes[rng.unif_int(nodes.size())], {}};
      q_fwd = weights.prune / static_cast<double>(nodes.size());
      break;
    }
    case MoveKind::change: {
      const auto st = change_stats(tree, data, leaf_rows);
      if (st.total == 0) break;
      if (selection == RuleSelection::pairs) {
        move = decode_change(tree, st,
                             static_cast<long>(rng.unif_int(
                                 static_cast<uint64_t>(st.total))));
        q_fwd = weights.change / static_cast<double>(st.total);
      } else {
        std::vector<size_t> eligible;
        for (size_t i = 0; i < st.node_ids.size(); ++i)
          if (st.node_total[i] > 0) eligible.push_back(i);
        const size_t i = eligible[rng.unif_int(eligible.size())];
        const auto& cur = tree.nodes[st.node_ids[i]].rule;
        std::vector<std::pair<int, long>> feats;
        for (size_t j = 0; j < st.interval[i].size(); ++j) {
          const auto [lo, hi] = st.interval[i][j];
          if (hi < lo) continue;
          long cnt = hi - lo + 1;
          if (cur.feature == static_cast<int>(j) && cur.threshold >= lo &&
              cur.threshold <= hi)
            cnt -= 1;
          if (cnt > 0) feats.push_back({static_cast<int>(j), cnt});
        }
        const auto [j, cnt] = feats[rng.unif_int(feats.size())];
        const long k =
            static_cast<long>(rng.unif_int(static_cast<uint64_t>(cnt)));
        const auto [lo, hi] = st.interval[i][j];
        int t = lo + static_cast<int>(k);
        if (cur.feature == j && cur.threshold >= lo && cur.threshold <= hi &&
            t >= cur.threshold)
          t += 1;
        move = Move{MoveKind::change, st.node_ids[i], {j, t}};
        q_fwd = weights.change / static_cast<double>(eligible.size()) /
                static_cast<double>(feats.size()) / static_cast<double>(cnt);
      }
      break;
    }
    case MoveKind::swap_rule: {
      const auto feasible = feasible_swaps(tree, data);
      if (feasible.empty()) break;
      move = Move{MoveKind::swap_rule, feasible[rng.unif_int(feasible.size())], {}};
      q_fwd = weights.swap / static_cast<double>(feasible.size());
      break;
    }
    case MoveKind::stay:
      break;
  }

  if (move.node < 0) {
    // Empty feasible set: propose staying put, counted as a rejection.
    prop.tree = tree;
    prop.move = Move{kind, -1, {}};
    prop.q_fwd = prop.q_bwd = 1.0;
    prop.no_op = true;
    return prop;
  }
  move.kind = kind;

  prop.move = move;
  prop.q_fwd = q_fwd;
  prop.tree = apply_move(tree, move);

  // Node ids survive BFS renumbering of any single move (the target's position
  // depends only on untouched nodes), so the reversing move reuses move.node.
  Move rev;
  switch (kind) {
    case MoveKind::grow:
      rev = Move{MoveKind::prune, move.node, {}};
      break;
    case MoveKind::prune:
      rev = Move{MoveKind::grow, move.node, tree.nodes[move.node].rule};
      break;
    case MoveKind::change:
      rev = Move{MoveKind::change, move.node, tree.nodes[move.node].rule};
      break;
    case MoveKind::swap_rule:
      rev = Move{MoveKind::swap_rule, move.node, {}};
      break;
    case MoveKind::stay:
      break;
  }
  prop.q_bwd = move_probability(prop.tree, rev, weights, data, selection);
  return prop;
}

}  // namespace bartlab
