#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "bartlab/trees.hpp"

using namespace bartlab;

namespace {

Dataset grid_dataset(Rng& rng, long n, int d, int levels) {
  Dataset ds;
  ds.space = grid_space(d, levels);
  ds.X.resize(n, d);
  ds.raw.resize(n, d);
  for (long i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) {
      ds.X(i, j) = 1 + static_cast<int>(rng.unif_int(levels));
      ds.raw(i, j) = ds.X(i, j);
    }
  }
  ds.y = Eigen::VectorXd::Zero(n);
  ds.binned = true;
  return ds;
}

// Two binary features, every code combination present twice.
Dataset binary_dataset() {
  Dataset ds;
  ds.space = grid_space(2, 2);
  ds.X.resize(8, 2);
  int r = 0;
  for (int rep = 0; rep < 2; ++rep)
    for (int a = 1; a <= 2; ++a)
      for (int b = 1; b <= 2; ++b) {
        ds.X(r, 0) = a;
        ds.X(r, 1) = b;
        ++r;
      }
  ds.raw = ds.X.cast<double>();
  ds.y = Eigen::VectorXd::Zero(8);
  ds.binned = true;
  return ds;
}

// Grow a random tree using only the enumeration path (the reference
// implementation), so the fast counting paths stay under test elsewhere.
TreeStructure random_tree(const Dataset& data, Rng& rng, int target_leaves) {
  TreeStructure t = trivial_tree();
  while (t.n_leaves() < target_leaves) {
    const auto moves = enumerate_feasible_moves(t, MoveKind::grow, data);
    if (moves.empty()) break;
    t = apply_move(t, moves[rng.unif_int(moves.size())]);
  }
  for (int r = 0; r < 4; ++r) {
    const auto moves = enumerate_feasible_moves(t, MoveKind::change, data);
    if (moves.empty()) break;
    t = apply_move(t, moves[rng.unif_int(moves.size())]);
  }
  return t;
}

bool leaves_all_nonempty(const TreeStructure& tree, const Dataset& data) {
  const auto assign = leaf_assignment(tree, data.X, data.space);
  std::vector<long> count(tree.n_leaves(), 0);
  for (const int a : assign) count[a]++;
  return std::all_of(count.begin(), count.end(),
                     [](long c) { return c > 0; });
}

bool bfs_valid(const TreeStructure& tree) {
  int next = 1;
  for (int i = 0; i < tree.n_nodes(); ++i) {
    const auto& nd = tree.nodes[i];
    if (nd.is_leaf()) {
      if (nd.right >= 0) return false;
      continue;
    }
    if (nd.left != next || nd.right != next + 1) return false;
    next += 2;
  }
  return next == tree.n_nodes();
}

std::string move_key(const Move& m) {
  return std::to_string(static_cast<int>(m.kind)) + ":" +
         std::to_string(m.node) + ":" + std::to_string(m.rule.feature) + ":" +
         std::to_string(m.rule.threshold);
}

}  // namespace

TEST_CASE("trivial tree shape and serialization") {
  const TreeStructure t = trivial_tree();
  CHECK(t.n_nodes() == 1);
  CHECK(t.n_leaves() == 1);
  CHECK(t.n_internal() == 0);
  CHECK(t.nodes[0].is_leaf());
  CHECK(serialize_tree(t) == "(leaf 0)");
  CHECK(parse_tree("(leaf 0)") == t);
}

TEST_CASE("trivial tree on the binary square: move lists and q values") {
  const Dataset ds = binary_dataset();
  const TreeStructure t0 = trivial_tree();
  const MoveWeights w;

  // Only grow is available, with one threshold per feature.
  CHECK(count_feasible(t0, MoveKind::grow, ds) == 2);
  CHECK(count_feasible(t0, MoveKind::prune, ds) == 0);
  CHECK(count_feasible(t0, MoveKind::change, ds) == 0);
  CHECK(count_feasible(t0, MoveKind::swap_rule, ds) == 0);

  const auto grows = enumerate_feasible_moves(t0, MoveKind::grow, ds);
  REQUIRE(grows.size() == 2);
  CHECK(grows[0].rule == SplitRule{0, 1});
  CHECK(grows[1].rule == SplitRule{1, 1});

  const Move g{MoveKind::grow, 0, {0, 1}};
  CHECK(move_probability(t0, g, w, ds) == doctest::Approx(0.25 / 2));

  // After growing, the single internal node is the only prune target.
  const TreeStructure t1 = apply_move(t0, g);
  CHECK(t1.n_leaves() == 2);
  CHECK(count_feasible(t1, MoveKind::prune, ds) == 1);
  const Move p{MoveKind::prune, 0, {}};
  CHECK(move_probability(t1, p, w, ds) == doctest::Approx(0.25));
  CHECK(apply_move(t1, p) == t0);

  // The single feasible change at the root is the other feature's split.
  const auto changes = enumerate_feasible_moves(t1, MoveKind::change, ds);
  REQUIRE(changes.size() == 1);
  CHECK(changes[0].rule == SplitRule{1, 1});
  CHECK(count_feasible(t1, MoveKind::change, ds) == 1);
}

TEST_CASE("propose on the binary square reports the documented q pair") {
  const Dataset ds = binary_dataset();
  const TreeStructure t0 = trivial_tree();
  const MoveWeights w;
  Rng rng(7);
  bool saw_grow = false;
  for (int it = 0; it < 200 && !saw_grow; ++it) {
    const Proposal prop = propose(t0, w, ds, rng);
    if (prop.move.kind != MoveKind::grow || prop.no_op) continue;
    saw_grow = true;
    CHECK(prop.q_fwd == doctest::Approx(0.25 / 2));
    CHECK(prop.q_bwd == doctest::Approx(0.25 / 1));
  }
  CHECK(saw_grow);
}

TEST_CASE("cell bounds agree with routing") {
  Rng rng(101);
  for (int rep = 0; rep < 20; ++rep) {
    const Dataset ds = grid_dataset(rng, 120, 3, 4);
    const TreeStructure t = random_tree(ds, rng, 6);
    const auto cells = cell_bounds(t, ds.space);
    const auto leaf_idx = t.leaf_index();
    const auto assign = leaf_assignment(t, ds.X, ds.space);
    for (long i = 0; i < ds.n(); ++i) {
      for (int id = 0; id < t.n_nodes(); ++id) {
        if (!t.nodes[id].is_leaf()) continue;
        bool inside = true;
        for (int j = 0; j < ds.space.d; ++j)
          inside = inside && cells[id].lo[j] < ds.X(i, j) &&
                   ds.X(i, j) <= cells[id].hi[j];
        CHECK(inside == (assign[i] == leaf_idx[id]));
      }
    }
  }
}

TEST_CASE("feasible counts match explicit enumeration") {
  Rng rng(202);
  const MoveKind kinds[] = {MoveKind::grow, MoveKind::prune, MoveKind::change,
                            MoveKind::swap_rule};
  for (int rep = 0; rep < 40; ++rep) {
    const int d = 1 + static_cast<int>(rng.unif_int(3));
    const int levels = 2 + static_cast<int>(rng.unif_int(5));
    const long n = 20 + static_cast<long>(rng.unif_int(100));
    const Dataset ds = grid_dataset(rng, n, d, levels);
    const TreeStructure t =
        random_tree(ds, rng, 2 + static_cast<int>(rng.unif_int(6)));
    for (const MoveKind k : kinds) {
      const auto moves = enumerate_feasible_moves(t, k, ds);
      CHECK(count_feasible(t, k, ds) == static_cast<long>(moves.size()));
      // Every enumerated move yields a tree with only populated leaves.
      for (const auto& m : moves)
        CHECK(leaves_all_nonempty(apply_move(t, m), ds));
      // Identity changes are excluded.
      if (k == MoveKind::change)
        for (const auto& m : moves)
          CHECK_FALSE(t.nodes[m.node].rule == m.rule);
    }
  }
}

TEST_CASE("proposals are valid, reversible, and priced consistently") {
  for (const RuleSelection sel :
       {RuleSelection::pairs, RuleSelection::feature_first}) {
    Rng rng(303);
    const Dataset ds = grid_dataset(rng, 150, 3, 5);
    const MoveWeights w;
    TreeStructure t = trivial_tree();
    int applied = 0;
    for (int it = 0; it < 4000; ++it) {
      const Proposal prop = propose(t, w, ds, rng, sel);
      if (prop.no_op) {
        CHECK(prop.tree == t);
        CHECK(prop.q_fwd == 1.0);
        CHECK(prop.q_bwd == 1.0);
        continue;
      }
      if (prop.move.kind == MoveKind::stay) continue;
      CHECK(prop.q_fwd ==
            doctest::Approx(move_probability(t, prop.move, w, ds, sel)));
      CHECK(bfs_valid(prop.tree));
      CHECK(leaves_all_nonempty(prop.tree, ds));

      Move rev;
      switch (prop.move.kind) {
        case MoveKind::grow:
          rev = Move{MoveKind::prune, prop.move.node, {}};
          break;
        case MoveKind::prune:
          rev = Move{MoveKind::grow, prop.move.node,
                     t.nodes[prop.move.node].rule};
          break;
        case MoveKind::change:
          rev = Move{MoveKind::change, prop.move.node,
                     t.nodes[prop.move.node].rule};
          break;
        default:
          rev = Move{MoveKind::swap_rule, prop.move.node, {}};
          break;
      }
      CHECK(apply_move(prop.tree, rev) == t);
      CHECK(prop.q_bwd ==
            doctest::Approx(move_probability(prop.tree, rev, w, ds, sel)));
      t = prop.tree;
      ++applied;
    }
    CHECK(applied > 1000);
  }
}

TEST_CASE("move probabilities sum to the kind weight") {
  Rng rng(404);
  const MoveWeights w;
  for (int rep = 0; rep < 10; ++rep) {
    const Dataset ds = grid_dataset(rng, 80, 2, 5);
    const TreeStructure t = random_tree(ds, rng, 5);
    for (const MoveKind k :
         {MoveKind::grow, MoveKind::prune, MoveKind::change,
          MoveKind::swap_rule}) {
      const auto moves = enumerate_feasible_moves(t, k, ds);
      if (moves.empty()) continue;
      for (const RuleSelection sel :
           {RuleSelection::pairs, RuleSelection::feature_first}) {
        double total = 0.0;
        for (const auto& m : moves)
          total += move_probability(t, m, w, ds, sel);
        CHECK(total == doctest::Approx(w.of(k)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("propose draws kinds and moves with the stated probabilities") {
  Rng rng(505);
  const Dataset ds = grid_dataset(rng, 60, 2, 4);
  const TreeStructure t = random_tree(ds, rng, 4);
  const MoveWeights w;

  const int N = 200000;
  std::map<std::string, long> freq;
  std::map<int, long> kind_freq;
  Rng draw(606);
  for (int it = 0; it < N; ++it) {
    const Proposal prop = propose(t, w, ds, draw);
    kind_freq[static_cast<int>(prop.move.kind)]++;
    if (!prop.no_op && prop.move.kind != MoveKind::stay)
      freq[move_key(prop.move)]++;
  }
  for (const MoveKind k :
       {MoveKind::grow, MoveKind::prune, MoveKind::change,
        MoveKind::swap_rule}) {
    const double p = w.of(k);
    const double got =
        static_cast<double>(kind_freq[static_cast<int>(k)]) / N;
    const double sd = std::sqrt(p * (1 - p) / N);
    CHECK(std::abs(got - p) < 5 * sd);
  }
  for (const MoveKind k :
       {MoveKind::grow, MoveKind::prune, MoveKind::change,
        MoveKind::swap_rule}) {
    for (const auto& m : enumerate_feasible_moves(t, k, ds)) {
      const double p = move_probability(t, m, w, ds);
      const double got = static_cast<double>(freq[move_key(m)]) / N;
      const double sd = std::sqrt(p * (1 - p) / N);
      CHECK(std::abs(got - p) < 5 * sd);
    }
  }
}

TEST_CASE("swap is an involution, including the shared-rule variant") {
  Rng rng(707);
  int checked = 0;
  for (int rep = 0; rep < 40 && checked < 20; ++rep) {
    const Dataset ds = grid_dataset(rng, 150, 3, 4);
    const TreeStructure t = random_tree(ds, rng, 7);
    for (const auto& m : enumerate_feasible_moves(t, MoveKind::swap_rule, ds)) {
      CHECK(apply_move(apply_move(t, m), m) == t);
      ++checked;
    }
  }
  CHECK(checked >= 20);

  // Both children sharing a rule: the parent takes it and both children take
  // the parent's rule.
  Dataset ds = grid_dataset(rng, 400, 2, 5);
  TreeStructure t = parse_tree(
      "(split 0 2 (split 1 2 (leaf 0) (leaf 1)) (split 1 2 (leaf 2) (leaf "
      "3)))");
  const Move m{MoveKind::swap_rule, 1, {}};
  const TreeStructure swapped = apply_move(t, m);
  CHECK(swapped.nodes[0].rule == SplitRule{1, 2});
  CHECK(swapped.nodes[1].rule == SplitRule{0, 2});
  CHECK(swapped.nodes[2].rule == SplitRule{0, 2});
  CHECK(apply_move(swapped, m) == t);
}

TEST_CASE("serialization round trips") {
  Rng rng(808);
  for (int rep = 0; rep < 30; ++rep) {
    const Dataset ds = grid_dataset(rng, 100, 3, 5);
    const TreeStructure t =
        random_tree(ds, rng, 2 + static_cast<int>(rng.unif_int(7)));
    CHECK(parse_tree(serialize_tree(t)) == t);
  }
  const std::vector<TreeStructure> ens{trivial_tree(), trivial_tree()};
  CHECK(serialize_ensemble(ens) == "(leaf 0) | (leaf 0)");
  CHECK_THROWS_AS(parse_tree("(split 0 1 (leaf 0))"), ConfigError);
  CHECK_THROWS_AS(parse_tree("(leaf 0) junk"), ConfigError);
}

TEST_CASE("leaf assignment validates codes") {
  const Dataset ds = binary_dataset();
  const TreeStructure t = trivial_tree();
  Eigen::MatrixXi bad = ds.X;
  bad(0, 0) = 0;
  CHECK_THROWS_AS(leaf_assignment(t, bad, ds.space), ConfigError);
  bad(0, 0) = 3;
  CHECK_THROWS_AS(leaf_assignment(t, bad, ds.space), ConfigError);
  CHECK_THROWS_AS(leaf_assignment(t, ds.X, grid_space(3, 2)), ConfigError);
}

TEST_CASE("stay weight flows through propose") {
  const Dataset ds = binary_dataset();
  MoveWeights w;
  w.grow = 0.2;
  w.prune = 0.2;
  w.change = 0.3;
  w.swap = 0.1;
  w.stay = 0.2;
  Rng rng(909);
  int stays = 0;
  for (int it = 0; it < 2000; ++it) {
    const Proposal prop = propose(trivial_tree(), w, ds, rng);
    if (prop.move.kind == MoveKind::stay) {
      CHECK(prop.q_fwd == doctest::Approx(0.2));
      CHECK(prop.q_bwd == doctest::Approx(0.2));
      CHECK(prop.tree == trivial_tree());
      CHECK_FALSE(prop.no_op);
      ++stays;
    }
  }
  CHECK(stays > 300);
  CHECK(stays < 500);
}

TEST_CASE("empty feasible set yields a no-op proposal") {
  // One distinct covariate value: nothing can ever grow.
  Dataset ds;
  ds.space = grid_space(1, 3);
  ds.X = Eigen::MatrixXi::Constant(10, 1, 2);
  ds.raw = ds.X.cast<double>();
  ds.y = Eigen::VectorXd::Zero(10);
  ds.binned = true;

  MoveWeights w{1.0, 0.0, 0.0, 0.0, 0.0};
  Rng rng(111);
  const Proposal prop = propose(trivial_tree(), w, ds, rng);
  CHECK(prop.no_op);
  CHECK(prop.q_fwd == 1.0);
  CHECK(prop.q_bwd == 1.0);
  CHECK(prop.tree == trivial_tree());
}

TEST_CASE("move weights are validated") {
  MoveWeights w;
  w.grow = -0.1;
  w.prune = 0.6;
  CHECK_THROWS_AS(validate_weights(w), ConfigError);
  w = MoveWeights{};
  w.stay = 0.5;
  CHECK_THROWS_AS(validate_weights(w), ConfigError);
  CHECK_NOTHROW(validate_weights(MoveWeights{}));
}

TEST_CASE("grown trees never split an empty side even with gapped data") {
  // Codes concentrated at the extremes leave interior thresholds valid only
  // while both sides keep rows.
  Dataset ds;
  ds.space = grid_space(1, 10);
  ds.X.resize(6, 1);
  ds.X << 1, 1, 2, 8, 9, 9;
  ds.raw = ds.X.cast<double>();
  ds.y = Eigen::VectorXd::Zero(6);
  ds.binned = true;

  const auto grows =
      enumerate_feasible_moves(trivial_tree(), MoveKind::grow, ds);
  // Thresholds 1..8 all keep both sides non-empty.
  CHECK(grows.size() == 8);
  CHECK(count_feasible(trivial_tree(), MoveKind::grow, ds) == 8);

  // Split at 2: left has codes {1,2}, right {8,9}. Any threshold 1..8 keeps
  // both sides non-empty; 2 itself is the excluded identity, leaving 7.
  const TreeStructure t =
      apply_move(trivial_tree(), Move{MoveKind::grow, 0, {0, 2}});
  CHECK(count_feasible(t, MoveKind::change, ds) == 7);
}
