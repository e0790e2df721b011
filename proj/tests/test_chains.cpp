#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "bartlab/chains.hpp"
#include "bartlab/model.hpp"

using namespace bartlab;

namespace {

DgpSpec additive_spec(int d, int levels, double noise_sd,
                      std::vector<AdditiveComponent> components) {
  DgpSpec spec;
  spec.kind = DgpSpec::Kind::additive_discrete;
  spec.d = d;
  spec.levels = levels;
  spec.noise_sd = noise_sd;
  spec.components = std::move(components);
  return spec;
}

SamplerConfig fixed_sigma_config(SamplerVariant variant, int m,
                                 double sigma2) {
  SamplerConfig config;
  config.variant = variant;
  config.m = m;
  config.priors.sigma_mode = Priors::SigmaMode::fixed;
  config.priors.sigma2 = sigma2;
  return config;
}

FiniteChain hand_chain(const std::vector<std::vector<double>>& rows,
                       const std::vector<double>& log_w = {}) {
  FiniteChain chain;
  const long n = static_cast<long>(rows.size());
  chain.P = Eigen::MatrixXd(n, n);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j) chain.P(i, j) = rows[i][j];
  if (!log_w.empty()) {
    chain.log_w = Eigen::VectorXd(n);
    for (long i = 0; i < n; ++i) chain.log_w(i) = log_w[i];
  }
  return chain;
}

Eigen::VectorXd normalized_weights(const FiniteChain& chain) {
  Eigen::VectorXd w =
      (chain.log_w.array() - chain.log_w.maxCoeff()).exp();
  return w / w.sum();
}

double max_balance_gap(const FiniteChain& chain) {
  const Eigen::VectorXd w = normalized_weights(chain);
  double worst = 0.0;
  for (long i = 0; i < chain.P.rows(); ++i)
    for (long j = i + 1; j < chain.P.cols(); ++j)
      worst = std::max(worst,
                       std::abs(w(i) * chain.P(i, j) - w(j) * chain.P(j, i)));
  return worst;
}

template <typename Fn>
std::string thrown_message(Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

struct Fixture {
  Dataset data;
  EnumeratedSpace enumerated;
};

Fixture fixture_d1b2() {
  const DgpSpec spec = additive_spec(1, 2, 0.5, {{0, {0.0, 1.0}}});
  Dataset data = sample_dgp(spec, 60, 11);
  EnumeratedSpace enumerated = enumerate_tse_space(data.space, 1, 1);
  return {std::move(data), std::move(enumerated)};
}

Fixture fixture_d1b3() {
  const DgpSpec spec = additive_spec(1, 3, 0.5, {{0, {0.0, 0.2, 0.4}}});
  Dataset data = sample_dgp(spec, 120, 13);
  EnumeratedSpace enumerated = enumerate_tse_space(data.space, 1, 2);
  return {std::move(data), std::move(enumerated)};
}

Fixture fixture_d2b2_m1() {
  const DgpSpec spec =
      additive_spec(2, 2, 0.7, {{0, {0.0, 0.6}}, {1, {0.0, 0.4}}});
  Dataset data = sample_dgp(spec, 200, 29);
  EnumeratedSpace enumerated = enumerate_tse_space(data.space, 1, 2);
  return {std::move(data), std::move(enumerated)};
}

Fixture fixture_d2b2_m2() {
  const DgpSpec spec =
      additive_spec(2, 2, 0.7, {{0, {0.0, 0.6}}, {1, {0.0, 0.4}}});
  Dataset data = sample_dgp(spec, 200, 29);
  EnumeratedSpace enumerated = enumerate_tse_space(data.space, 2, 1);
  return {std::move(data), std::move(enumerated)};
}

const char* kSplit0 = "(split 0 1 (leaf 0) (leaf 1))";

}  // namespace

TEST_CASE("two-state transition matrix matches hand-computed entries") {
  const Fixture fx = fixture_d1b2();
  const double sigma2 = 0.25;
  SamplerConfig config =
      fixed_sigma_config(SamplerVariant::marginalized, 1, sigma2);
  const double lambda = lambda_of(config.priors, 1, sigma2);

  const TreeStructure triv = trivial_tree();
  const TreeStructure split = parse_tree(kSplit0);
  const double lml_triv = log_marginal_likelihood(
      {triv}, fx.data.X, fx.data.space, fx.data.y, sigma2, lambda);
  const double lml_split = log_marginal_likelihood(
      {split}, fx.data.X, fx.data.space, fx.data.y, sigma2, lambda);
  const double pri_triv = log_tree_prior(triv, config.priors, fx.data.space);
  const double pri_split = log_tree_prior(split, config.priors, fx.data.space);
  REQUIRE(count_feasible(triv, MoveKind::grow, fx.data) == 1);
  REQUIRE(count_feasible(split, MoveKind::prune, fx.data) == 1);

  const long i_triv = fx.enumerated.index_of({triv});
  const long i_split = fx.enumerated.index_of({split});
  REQUIRE(i_triv == 0);
  REQUIRE(i_split >= 0);

  const double la = (lml_split - lml_triv) + (pri_split - pri_triv);
  const double p01 = config.weights.grow * std::min(1.0, std::exp(la));
  const double p10 = config.weights.prune * std::min(1.0, std::exp(-la));

  const FiniteChain chain = build_chain(fx.enumerated, fx.data, config);
  REQUIRE(chain.P.rows() == 2);
  CHECK(chain.P(i_triv, i_split) == doctest::Approx(p01).epsilon(1e-13));
  CHECK(chain.P(i_split, i_triv) == doctest::Approx(p10).epsilon(1e-13));
  CHECK(chain.P(i_triv, i_triv) ==
        doctest::Approx(1.0 - p01).epsilon(1e-13));
  CHECK(chain.P(i_split, i_split) ==
        doctest::Approx(1.0 - p10).epsilon(1e-13));
  CHECK(chain.log_w(i_triv) ==
        doctest::Approx(pri_triv + lml_triv).epsilon(1e-13));
  CHECK(chain.log_w(i_split) ==
        doctest::Approx(pri_split + lml_split).epsilon(1e-13));
  CHECK(chain.temperature == 1.0);

  config.temperature = TemperatureSchedule::constant(2.0);
  const FiniteChain hot = build_chain(fx.enumerated, fx.data, config);
  const double la_hot = (lml_split - lml_triv) / 2.0 + (pri_split - pri_triv);
  CHECK(hot.P(i_triv, i_split) ==
        doctest::Approx(config.weights.grow * std::min(1.0, std::exp(la_hot)))
            .epsilon(1e-13));
  CHECK(hot.log_w(i_triv) ==
        doctest::Approx(pri_triv + lml_triv / 2.0).epsilon(1e-13));
  CHECK(hot.temperature == 2.0);

  config.temperature = TemperatureSchedule::constant(1.0);
  config.lazy = true;
  const FiniteChain lazy = build_chain(fx.enumerated, fx.data, config);
  for (long i = 0; i < 2; ++i)
    for (long j = 0; j < 2; ++j)
      CHECK(lazy.P(i, j) == doctest::Approx(0.5 * chain.P(i, j) +
                                            (i == j ? 0.5 : 0.0))
                                .epsilon(1e-15));
}

TEST_CASE("built chains are stochastic, reversible, and match their weights") {
  const Fixture fixtures[] = {fixture_d1b3(), fixture_d2b2_m1(),
                              fixture_d2b2_m2()};
  for (const Fixture& fx : fixtures) {
    for (const double T : {1.0, 2.0, 10.0}) {
      for (const bool lazy : {false, true}) {
        SamplerConfig config = fixed_sigma_config(
            SamplerVariant::tempered, fx.enumerated.m, 0.25);
        config.temperature = TemperatureSchedule::constant(T);
        config.lazy = lazy;
        const FiniteChain chain = build_chain(fx.enumerated, fx.data, config);
        const long n = chain.P.rows();
        REQUIRE(n == fx.enumerated.n_tse());

        for (long i = 0; i < n; ++i) {
          CHECK(std::abs(chain.P.row(i).sum() - 1.0) <= 1e-12);
          CHECK(chain.P.row(i).minCoeff() >= 0.0);
          if (lazy) CHECK(chain.P(i, i) >= 0.5);
        }
        CHECK(max_balance_gap(chain) <= 1e-10);

        const Eigen::VectorXd pi = stationary(chain);
        CHECK((pi - normalized_weights(chain)).cwiseAbs().maxCoeff() <=
              1e-10);
        CHECK((chain.P.transpose() * pi - pi).cwiseAbs().maxCoeff() <=
              1e-12);
      }
    }
  }
}

TEST_CASE("stationary solves hand-built chains and rejects reducible ones") {
  const FiniteChain symmetric = hand_chain({{0.5, 0.5}, {0.5, 0.5}});
  const Eigen::VectorXd pi = stationary(symmetric);
  CHECK(pi(0) == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(pi(1) == doctest::Approx(0.5).epsilon(1e-13));

  const FiniteChain skewed = hand_chain({{0.7, 0.3}, {0.1, 0.9}});
  const Eigen::VectorXd pi2 = stationary(skewed);
  CHECK(pi2(0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(pi2(1) == doctest::Approx(0.75).epsilon(1e-12));

  const FiniteChain frozen = hand_chain({{1.0, 0.0}, {0.0, 1.0}});
  CHECK_THROWS_AS((void)stationary(frozen), ConfigError);
  const std::string msg =
      thrown_message([&] { (void)stationary(frozen); });
  CHECK(msg.find("reducible") != std::string::npos);
  CHECK(msg.find("1") != std::string::npos);

  const FiniteChain blocks = hand_chain({{0.5, 0.5, 0.0, 0.0},
                                         {0.5, 0.5, 0.0, 0.0},
                                         {0.0, 0.0, 0.5, 0.5},
                                         {0.0, 0.0, 0.5, 0.5}});
  const std::string msg2 =
      thrown_message([&] { (void)stationary(blocks); });
  CHECK(msg2.find("2, 3") != std::string::npos);

  const FiniteChain mislabeled =
      hand_chain({{0.5, 0.5}, {0.5, 0.5}}, {0.0, std::log(3.0)});
  CHECK_THROWS_AS((void)stationary(mislabeled), NumericalError);

  const FiniteChain ragged = hand_chain({{0.6, 0.3}, {0.5, 0.5}});
  CHECK_THROWS_AS((void)stationary(ragged), ConfigError);
}

TEST_CASE("spectral gap reproduces the lazy two-state example") {
  const FiniteChain lazy =
      hand_chain({{0.75, 0.25}, {0.25, 0.75}}, {0.0, 0.0});
  const SpectralGap gap = spectral_gap(lazy);
  CHECK(gap.gamma == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(gap.lambda_min == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(gap.pi_min == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(gap.t_mix_bound(0.05) ==
        doctest::Approx(std::log(1.0 / (0.5 * 0.05)) / 0.5).epsilon(1e-12));

  const FiniteChain frozen =
      hand_chain({{1.0, 0.0}, {0.0, 1.0}}, {0.0, 0.0});
  const SpectralGap none = spectral_gap(frozen);
  CHECK(std::abs(none.gamma) <= 1e-12);
  CHECK(std::isinf(none.t_mix_bound(0.1)));

  CHECK_THROWS_AS((void)gap.t_mix_bound(0.0), ConfigError);
  CHECK_THROWS_AS((void)gap.t_mix_bound(1.0), ConfigError);

  const FiniteChain busy = hand_chain({{0.4, 0.6}, {0.6, 0.4}}, {0.0, 0.0});
  const std::string msg = thrown_message([&] { (void)spectral_gap(busy); });
  CHECK(msg.find("lazy") != std::string::npos);

  const FiniteChain rotor = hand_chain(
      {{0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}}, {0.0, 0.0, 0.0});
  CHECK_THROWS_AS((void)spectral_gap(rotor), NumericalError);
}

TEST_CASE("spectral gap of built lazy chains is positive and bounded") {
  for (const Fixture& fx : {fixture_d1b3(), fixture_d2b2_m2()}) {
    SamplerConfig config =
        fixed_sigma_config(SamplerVariant::marginalized, fx.enumerated.m, 0.25);
    config.lazy = true;
    const FiniteChain chain = build_chain(fx.enumerated, fx.data, config);
    const SpectralGap gap = spectral_gap(chain);
    CHECK(gap.gamma > 0.0);
    CHECK(gap.gamma <= 1.0 + 1e-12);
    CHECK(gap.lambda_min >= -1e-10);
    CHECK(gap.pi_min > 0.0);
    const double bound = gap.t_mix_bound(0.25);
    CHECK(bound > 0.0);
    CHECK(std::isfinite(bound));
  }
}

TEST_CASE("expected hitting times match closed forms") {
  const FiniteChain loop = hand_chain({{0.7, 0.3}, {0.0, 1.0}});
  const Eigen::VectorXd h = expected_hitting_times(loop, {1});
  CHECK(h(1) == 0.0);
  CHECK(h(0) == doctest::Approx(10.0 / 3.0).epsilon(1e-12));

  const FiniteChain line = hand_chain(
      {{0.5, 0.5, 0.0}, {0.5, 0.0, 0.5}, {0.0, 0.0, 1.0}});
  const Eigen::VectorXd h2 = expected_hitting_times(line, {2});
  CHECK(h2(0) == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(h2(1) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(h2(2) == 0.0);

  const FiniteChain trap = hand_chain({{1.0, 0.0}, {0.5, 0.5}});
  const std::string msg =
      thrown_message([&] { (void)expected_hitting_times(trap, {1}); });
  CHECK(msg.find("unreachable") != std::string::npos);
  CHECK(msg.find("0") != std::string::npos);

  CHECK_THROWS_AS((void)expected_hitting_times(loop, {}), ConfigError);
  CHECK_THROWS_AS((void)expected_hitting_times(loop, {7}), ConfigError);
}

TEST_CASE("exact and simulated hitting times agree on an enumerated space") {
  const DgpSpec spec = additive_spec(1, 3, 0.5, {{0, {0.0, 0.2, 0.4}}});
  const Dataset data = sample_dgp(spec, 120, 13);
  const EnumeratedSpace enumerated = enumerate_tse_space(data.space, 1, 1);
  REQUIRE(enumerated.n_trees() == 3);

  const SamplerConfig config =
      fixed_sigma_config(SamplerVariant::marginalized, 1, 0.25);
  const FiniteChain chain = build_chain(enumerated, data, config);

  const long target = enumerated.index_of(
      {parse_tree("(split 0 2 (leaf 0) (leaf 1))")});
  REQUIRE(target >= 0);
  const Eigen::VectorXd h = expected_hitting_times(chain, {target});
  REQUIRE(h(0) > 1.0);

  const int reps = 10000;
  const auto hit = measure_hitting_time(config, data, enumerated, {target},
                                        200000, reps, {20240816});
  double mean = 0.0;
  for (int rep = 0; rep < reps; ++rep) {
    REQUIRE(hit.censored[rep] == 0);
    mean += static_cast<double>(hit.tau[rep]);
  }
  mean /= reps;
  double var = 0.0;
  for (int rep = 0; rep < reps; ++rep) {
    const double delta = static_cast<double>(hit.tau[rep]) - mean;
    var += delta * delta;
  }
  var /= (reps - 1);
  const double se = std::sqrt(var / reps);
  CHECK(std::abs(mean - h(0)) <= 3.0 * se);
}

TEST_CASE("hitting precedence solves boundary problems exactly") {
  const FiniteChain line = hand_chain(
      {{1.0, 0.0, 0.0}, {0.5, 0.0, 0.5}, {0.0, 0.0, 1.0}});
  const Eigen::VectorXd h = hitting_precedence(line, {2}, {0});
  CHECK(h(0) == 0.0);
  CHECK(h(1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(h(2) == 1.0);

  const FiniteChain ruin = hand_chain({{1.0, 0.0, 0.0, 0.0, 0.0},
                                       {0.5, 0.0, 0.5, 0.0, 0.0},
                                       {0.0, 0.5, 0.0, 0.5, 0.0},
                                       {0.0, 0.0, 0.5, 0.0, 0.5},
                                       {0.0, 0.0, 0.0, 0.0, 1.0}});
  const Eigen::VectorXd g = hitting_precedence(ruin, {4}, {0});
  for (long i = 0; i < 5; ++i)
    CHECK(g(i) == doctest::Approx(0.25 * static_cast<double>(i))
                      .epsilon(1e-12));

  CHECK_THROWS_AS((void)hitting_precedence(line, {0}, {0}), ConfigError);
  CHECK_THROWS_AS((void)hitting_precedence(line, {}, {0}), ConfigError);

  const FiniteChain marooned = hand_chain({{1.0, 0.0, 0.0, 0.0},
                                           {0.0, 1.0, 0.0, 0.0},
                                           {0.5, 0.5, 0.0, 0.0},
                                           {0.0, 0.0, 0.0, 1.0}});
  const std::string msg = thrown_message(
      [&] { (void)hitting_precedence(marooned, {0}, {1}); });
  CHECK(msg.find("3") != std::string::npos);
}

TEST_CASE("hitting precedence is harmonic on a built chain") {
  const Fixture fx = fixture_d2b2_m1();
  const SamplerConfig config =
      fixed_sigma_config(SamplerVariant::marginalized, 1, 0.25);
  const FiniteChain chain = build_chain(fx.enumerated, fx.data, config);
  const long n = chain.P.rows();
  REQUIRE(n >= 4);

  const std::vector<long> A = {1};
  const std::vector<long> B = {2, 3};
  const Eigen::VectorXd h = hitting_precedence(chain, A, B);
  for (long i = 0; i < n; ++i) {
    CHECK(h(i) >= 0.0);
    CHECK(h(i) <= 1.0);
  }
  CHECK(h(1) == 1.0);
  CHECK(h(2) == 0.0);
  CHECK(h(3) == 0.0);
  for (long i = 0; i < n; ++i) {
    if (i == 1 || i == 2 || i == 3) continue;
    CHECK(std::abs((chain.P.row(i) * h)(0) - h(i)) <= 1e-10);
  }
}

TEST_CASE("electrical reductions match harmonic solves") {
  Network series = make_network(3);
  add_conductance(series, 0, 1, 1.0);
  add_conductance(series, 1, 2, 1.0);
  CHECK(effective_resistance(series, 0, 2) ==
        doctest::Approx(2.0).epsilon(1e-12));
  CHECK(effective_resistance(series, 0, 2,
                             {ReduceOp::series_parallel(0, 1, 2)}) ==
        doctest::Approx(2.0).epsilon(1e-12));

  Network parallel = make_network(2);
  add_conductance(parallel, 0, 1, 1.0);
  add_conductance(parallel, 0, 1, 1.0);
  CHECK(effective_resistance(parallel, 0, 1) ==
        doctest::Approx(0.5).epsilon(1e-12));

  Network diamond = make_network(4);
  add_conductance(diamond, 0, 1, 2.0);
  add_conductance(diamond, 1, 3, 2.0);
  add_conductance(diamond, 0, 2, 2.0);
  add_conductance(diamond, 2, 3, 2.0);
  CHECK(effective_resistance(diamond, 0, 3) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(effective_resistance(diamond, 0, 3,
                             {ReduceOp::series_parallel(0, 1, 3),
                              ReduceOp::series_parallel(0, 2, 3)}) ==
        doctest::Approx(0.5).epsilon(1e-12));

  Network dangler = make_network(3);
  add_conductance(dangler, 0, 1, 1.0);
  add_conductance(dangler, 1, 2, 5.0);
  CHECK(effective_resistance(dangler, 0, 1, {ReduceOp::glue(1, 2)}) ==
        doctest::Approx(1.0).epsilon(1e-12));

  Network star = make_network(4);
  add_conductance(star, 0, 1, 1.0);
  add_conductance(star, 1, 2, 1.0);
  add_conductance(star, 1, 3, 1.0);
  const std::string msg = thrown_message([&] {
    (void)network_reduce(star, {ReduceOp::series_parallel(0, 1, 2)});
  });
  CHECK(msg.find("3") != std::string::npos);
  CHECK(msg.find("degree two") != std::string::npos);

  CHECK_THROWS_AS(
      (void)network_reduce(star, {ReduceOp::series_parallel(0, 2, 3)}),
      ConfigError);
  CHECK_THROWS_AS(add_conductance(star, 0, 0, 1.0), ConfigError);
  CHECK_THROWS_AS(add_conductance(star, 0, 1, 0.0), ConfigError);
  CHECK_THROWS_AS(add_conductance(star, 0, 9, 1.0), ConfigError);

  Network split = make_network(4);
  add_conductance(split, 0, 1, 1.0);
  add_conductance(split, 1, 2, 1.0);
  add_conductance(split, 2, 3, 1.0);
  const Network reduced =
      network_reduce(split, {ReduceOp::glue(2, 3)});
  CHECK_THROWS_AS((void)effective_resistance(reduced, 0, 3), ConfigError);
  CHECK_THROWS_AS(
      (void)network_reduce(reduced, {ReduceOp::glue(0, 3)}), ConfigError);

  Network cut = make_network(4);
  add_conductance(cut, 0, 1, 1.0);
  add_conductance(cut, 2, 3, 1.0);
  CHECK_THROWS_AS((void)effective_resistance(cut, 0, 3), ConfigError);
}

TEST_CASE("random tree resistances agree across solver, reduction, and sum") {
  for (const uint64_t seed : {7u, 19u, 23u, 101u, 222u}) {
    std::mt19937 rng(seed);
    const int n = 12;
    std::vector<int> parent(n, -1);
    std::vector<double> cond(n, 0.0);
    Network net = make_network(n);
    for (int i = 1; i < n; ++i) {
      parent[i] = std::uniform_int_distribution<int>(0, i - 1)(rng);
      cond[i] = std::uniform_real_distribution<double>(0.5, 2.0)(rng);
      add_conductance(net, i, parent[i], cond[i]);
    }
    const int a = 0;
    const int z = n - 1;
    double oracle = 0.0;
    for (int cur = z; cur != a; cur = parent[cur]) oracle += 1.0 / cond[cur];

    // Reduction plan: glue dangling leaves into their neighbors, then
    // series-eliminate the remaining a-z path.
    std::vector<ReduceOp> ops;
    Eigen::MatrixXd c = net.c;
    std::vector<uint8_t> alive(n, 1);
    bool changed = true;
    while (changed) {
      changed = false;
      for (int x = 0; x < n && !changed; ++x) {
        if (!alive[x] || x == a || x == z) continue;
        int degree = 0;
        int neighbor = -1;
        for (int j = 0; j < n; ++j)
          if (alive[j] && c(x, j) > 0.0) {
            ++degree;
            neighbor = j;
          }
        if (degree == 1) {
          ops.push_back(ReduceOp::glue(neighbor, x));
          c.row(x).setZero();
          c.col(x).setZero();
          alive[x] = 0;
          changed = true;
        }
      }
    }
    changed = true;
    while (changed) {
      changed = false;
      for (int v = 0; v < n && !changed; ++v) {
        if (!alive[v] || v == a || v == z) continue;
        std::vector<int> nbs;
        for (int j = 0; j < n; ++j)
          if (alive[j] && c(v, j) > 0.0) nbs.push_back(j);
        if (nbs.size() == 2) {
          ops.push_back(ReduceOp::series_parallel(nbs[0], v, nbs[1]));
          const double merged =
              1.0 / (1.0 / c(v, nbs[0]) + 1.0 / c(v, nbs[1]));
          c(nbs[0], nbs[1]) += merged;
          c(nbs[1], nbs[0]) = c(nbs[0], nbs[1]);
          c.row(v).setZero();
          c.col(v).setZero();
          alive[v] = 0;
          changed = true;
        }
      }
    }

    const double dual = effective_resistance(net, a, z, ops);
    CHECK(dual == doctest::Approx(oracle).epsilon(1e-9));
  }
}

TEST_CASE("raising a conductance never raises effective resistance") {
  std::mt19937 rng(404);
  const int n = 8;
  Network net = make_network(n);
  std::vector<std::pair<int, int>> edges;
  for (int i = 1; i < n; ++i) {
    const int p = std::uniform_int_distribution<int>(0, i - 1)(rng);
    add_conductance(net, i, p,
                    std::uniform_real_distribution<double>(0.5, 2.0)(rng));
    edges.push_back({p, i});
  }
  for (int extra = 0; extra < 4; ++extra) {
    const int u = std::uniform_int_distribution<int>(0, n - 1)(rng);
    int v = std::uniform_int_distribution<int>(0, n - 1)(rng);
    if (v == u) v = (v + 1) % n;
    add_conductance(net, u, v,
                    std::uniform_real_distribution<double>(0.5, 2.0)(rng));
    edges.push_back({u, v});
  }

  const double base = effective_resistance(net, 0, n - 1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto& edge =
        edges[std::uniform_int_distribution<size_t>(0, edges.size() - 1)(rng)];
    Network bumped = net;
    add_conductance(bumped, edge.first, edge.second,
                    std::uniform_real_distribution<double>(0.01, 1.0)(rng));
    CHECK(effective_resistance(bumped, 0, n - 1) <= base + 1e-12);
  }
}

TEST_CASE("congestion reproduces the two-state example") {
  const FiniteChain lazy =
      hand_chain({{0.75, 0.25}, {0.25, 0.75}}, {0.0, 0.0});

  PathEnsemble loops;
  loops.n = 2;
  loops.paths = {{0, 1, 0}, {0, 1}, {1, 0}, {1, 0, 1}};
  const double rho_loops = congestion(lazy, loops);
  CHECK(rho_loops == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(loops.max_len() == 2);

  const PathEnsemble bfs = bfs_path_ensemble(lazy);
  CHECK(bfs.path(0, 0) == std::vector<int>{0});
  CHECK(bfs.path(0, 1) == std::vector<int>{0, 1});
  const double rho_bfs = congestion(lazy, bfs);
  CHECK(rho_bfs == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(bfs.max_len() == 1);

  const SpectralGap gap = spectral_gap(lazy);
  CHECK(gap.gamma + 1e-12 >= gap_lower_bound(rho_loops, loops.max_len()));
  CHECK(gap.gamma + 1e-12 >= gap_lower_bound(rho_bfs, bfs.max_len()));

  const FiniteChain slower =
      hand_chain({{0.875, 0.125}, {0.125, 0.875}}, {0.0, 0.0});
  CHECK(congestion(slower, bfs_path_ensemble(slower)) ==
        doctest::Approx(2.0 * rho_bfs).epsilon(1e-12));

  const FiniteChain frozen =
      hand_chain({{1.0, 0.0}, {0.0, 1.0}}, {0.0, 0.0});
  PathEnsemble bogus;
  bogus.n = 2;
  bogus.paths = {{0}, {0, 1}, {1, 0}, {1}};
  const std::string msg =
      thrown_message([&] { (void)congestion(frozen, bogus); });
  CHECK(msg.find("0 -> 1") != std::string::npos);

  PathEnsemble stutter;
  stutter.n = 2;
  stutter.paths = {{0}, {0, 0, 1}, {1, 0}, {1}};
  CHECK_THROWS_AS((void)congestion(lazy, stutter), ConfigError);

  PathEnsemble detached;
  detached.n = 2;
  detached.paths = {{0}, {0}, {1, 0}, {1}};
  CHECK_THROWS_AS((void)congestion(lazy, detached), ConfigError);

  CHECK_THROWS_AS((void)gap_lower_bound(0.0, 2), ConfigError);
  CHECK_THROWS_AS((void)gap_lower_bound(4.0, 0), ConfigError);
}

TEST_CASE("congestion bounds the spectral gap of built chains") {
  for (const Fixture& fx : {fixture_d1b3(), fixture_d2b2_m2()}) {
    SamplerConfig config =
        fixed_sigma_config(SamplerVariant::marginalized, fx.enumerated.m, 0.25);
    config.lazy = true;
    const FiniteChain chain = build_chain(fx.enumerated, fx.data, config);
    const PathEnsemble paths = bfs_path_ensemble(chain);
    const double rho = congestion(chain, paths);
    const SpectralGap gap = spectral_gap(chain);
    CHECK(rho > 0.0);
    CHECK(gap.gamma + 1e-12 >= gap_lower_bound(rho, paths.max_len()));
  }
}

TEST_CASE("one-step multistep chains coincide with the marginalized build") {
  for (const Fixture& fx : {fixture_d1b2(), fixture_d2b2_m2()}) {
    for (const double T : {1.0, 2.0}) {
      for (const bool lazy : {false, true}) {
        SamplerConfig marg = fixed_sigma_config(
            SamplerVariant::tempered, fx.enumerated.m, 0.25);
        marg.temperature = TemperatureSchedule::constant(T);
        marg.lazy = lazy;
        SamplerConfig multi = marg;
        multi.variant = SamplerVariant::multistep;
        multi.r = 1;

        const FiniteChain a = build_chain(fx.enumerated, fx.data, marg);
        const FiniteChain b = build_chain(fx.enumerated, fx.data, multi);
        CHECK((a.P - b.P).cwiseAbs().maxCoeff() <= 1e-14);
        CHECK((a.log_w - b.log_w).cwiseAbs().maxCoeff() <= 1e-14);
      }
    }
  }
}

TEST_CASE("two-step proposals Metropolize the squared kernel") {
  const Fixture fx = fixture_d1b2();
  const double sigma2 = 0.25;
  SamplerConfig config =
      fixed_sigma_config(SamplerVariant::multistep, 1, sigma2);
  config.r = 2;
  const double lambda = lambda_of(config.priors, 1, sigma2);

  const TreeStructure triv = trivial_tree();
  const TreeStructure split = parse_tree(kSplit0);
  const double la =
      log_marginal_likelihood({split}, fx.data.X, fx.data.space, fx.data.y,
                              sigma2, lambda) -
      log_marginal_likelihood({triv}, fx.data.X, fx.data.space, fx.data.y,
                              sigma2, lambda) +
      log_tree_prior(split, config.priors, fx.data.space) -
      log_tree_prior(triv, config.priors, fx.data.space);

  // One-step proposal kernel: grow or prune with mass 1/4, rest stays put.
  // Its square is symmetric with off-diagonal mass 2 * 0.25 * 0.75.
  const double q2 = 2.0 * 0.25 * 0.75;
  const FiniteChain chain = build_chain(fx.enumerated, fx.data, config);
  CHECK(chain.P(0, 1) ==
        doctest::Approx(q2 * std::min(1.0, std::exp(la))).epsilon(1e-12));
  CHECK(chain.P(1, 0) ==
        doctest::Approx(q2 * std::min(1.0, std::exp(-la))).epsilon(1e-12));
  CHECK(std::abs(chain.P.row(0).sum() - 1.0) <= 1e-12);
  CHECK(std::abs(chain.P.row(1).sum() - 1.0) <= 1e-12);
  CHECK(max_balance_gap(chain) <= 1e-10);
  (void)stationary(chain);

  config.r = 3;
  config.temperature = TemperatureSchedule::constant(2.0);
  const FiniteChain third = build_chain(fx.enumerated, fx.data, config);
  for (long i = 0; i < third.P.rows(); ++i)
    CHECK(std::abs(third.P.row(i).sum() - 1.0) <= 1e-12);
  CHECK(max_balance_gap(third) <= 1e-10);
}

TEST_CASE("chain export writes readable edge and state tables") {
  const Fixture fx = fixture_d1b2();
  const SamplerConfig config =
      fixed_sigma_config(SamplerVariant::marginalized, 1, 0.25);
  const FiniteChain chain = build_chain(fx.enumerated, fx.data, config);

  const std::string edges_path = "/tmp/bartlab_chains_edges_test.csv";
  const std::string states_path = "/tmp/bartlab_chains_states_test.csv";
  export_chain_csv(chain, fx.enumerated, edges_path, states_path);

  long nnz = 0;
  for (long i = 0; i < chain.P.rows(); ++i)
    for (long j = 0; j < chain.P.cols(); ++j)
      if (chain.P(i, j) != 0.0) ++nnz;

  std::ifstream edges(edges_path);
  REQUIRE(edges.good());
  std::string header;
  std::getline(edges, header);
  CHECK(header == "i,j,p");
  long rows = 0;
  std::string row;
  double p00 = -1.0;
  while (std::getline(edges, row)) {
    if (row.empty()) continue;
    ++rows;
    if (row.rfind("0,0,", 0) == 0) p00 = std::stod(row.substr(4));
  }
  CHECK(rows == nnz);
  CHECK(p00 == doctest::Approx(chain.P(0, 0)).epsilon(1e-15));

  std::ifstream states(states_path);
  REQUIRE(states.good());
  std::getline(states, header);
  CHECK(header == "index,log_w,ensemble");
  long count = 0;
  bool saw_leaf = false;
  while (std::getline(states, row)) {
    if (row.empty()) continue;
    ++count;
    if (row.find("(leaf 0)") != std::string::npos) saw_leaf = true;
  }
  CHECK(count == chain.P.rows());
  CHECK(saw_leaf);

  std::remove(edges_path.c_str());
  std::remove(states_path.c_str());

  CHECK_THROWS_AS(
      export_chain_csv(chain, fx.enumerated,
                       "/nonexistent_dir_zz/e.csv",
                       "/nonexistent_dir_zz/s.csv"),
      ConfigError);
}

TEST_CASE("build_chain rejects configurations without a fixed kernel") {
  const Fixture fx = fixture_d1b2();

  SamplerConfig sweep =
      fixed_sigma_config(SamplerVariant::default_sweep, 1, 0.25);
  CHECK_THROWS_AS((void)build_chain(fx.enumerated, fx.data, sweep),
                  ConfigError);

  SamplerConfig dirichlet =
      fixed_sigma_config(SamplerVariant::marginalized, 1, 0.25);
  dirichlet.priors.split_prior = Priors::SplitPrior::dirichlet;
  CHECK_THROWS_AS((void)build_chain(fx.enumerated, fx.data, dirichlet),
                  ConfigError);

  SamplerConfig annealed =
      fixed_sigma_config(SamplerVariant::tempered, 1, 0.25);
  annealed.temperature = TemperatureSchedule::linear(3.0, 1.0);
  CHECK_THROWS_AS((void)build_chain(fx.enumerated, fx.data, annealed),
                  ConfigError);

  SamplerConfig wrong_m =
      fixed_sigma_config(SamplerVariant::marginalized, 2, 0.25);
  CHECK_THROWS_AS((void)build_chain(fx.enumerated, fx.data, wrong_m),
                  ConfigError);

  Dataset unbinned = fx.data;
  unbinned.binned = false;
  SamplerConfig ok = fixed_sigma_config(SamplerVariant::marginalized, 1, 0.25);
  CHECK_THROWS_AS((void)build_chain(fx.enumerated, unbinned, ok), ConfigError);

  std::vector<double> ramp(200);
  for (int i = 0; i < 200; ++i) ramp[i] = 0.01 * i;
  const DgpSpec wide = additive_spec(1, 200, 0.5, {{0, ramp}});
  const Dataset wide_data = sample_dgp(wide, 400, 3);
  const EnumeratedSpace big = enumerate_tse_space(wide_data.space, 2, 1);
  REQUIRE(big.n_tse() == 40000);
  SamplerConfig pair = fixed_sigma_config(SamplerVariant::marginalized, 2, 0.25);
  CHECK_THROWS_AS((void)build_chain(big, wide_data, pair), CapacityError);
}

TEST_CASE("states with no data support are isolated, not corrupting") {
  Dataset data;
  data.space = grid_space(1, 3);
  const int n = 24;
  data.X = Eigen::MatrixXi::Ones(n, 1);
  std::mt19937 rng(5);
  std::normal_distribution<double> noise(0.0, 0.3);
  data.y = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) data.y(i) = noise(rng);
  data.binned = true;

  const EnumeratedSpace enumerated = enumerate_tse_space(data.space, 1, 1);
  REQUIRE(enumerated.n_trees() == 3);
  const SamplerConfig config =
      fixed_sigma_config(SamplerVariant::marginalized, 1, 0.25);
  const FiniteChain chain = build_chain(enumerated, data, config);

  // Every split leaves an empty cell, so no move is feasible anywhere and
  // the matrix degenerates to the identity; the stationarity scan reports
  // the unreachable states rather than returning a bogus distribution.
  for (long i = 0; i < 3; ++i) {
    CHECK(chain.P(i, i) == 1.0);
    CHECK(std::abs(chain.P.row(i).sum() - 1.0) <= 1e-15);
  }
  const std::string msg = thrown_message([&] { (void)stationary(chain); });
  CHECK(msg.find("1, 2") != std::string::npos);
}
