#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "bartlab/covariates.hpp"
#include "bartlab/rng.hpp"

using namespace bartlab;

namespace {

double gfun(double x) { return 2.0 / (1.0 + std::exp(-12.0 * (x - 0.5))); }

DgpSpec two_step_spec(double noise_sd) {
  // f1 = 1{x1 > 1}, f2 = 1{x2 > 1} on the B=2, d=2 grid.
  DgpSpec spec;
  spec.kind = DgpSpec::Kind::additive_discrete;
  spec.d = 2;
  spec.levels = 2;
  spec.noise_sd = noise_sd;
  spec.components = {{0, {0.0, 1.0}}, {1, {0.0, 1.0}}};
  return spec;
}

std::string write_temp_csv(const std::string& body) {
  const std::string path = "/tmp/bartlab_test_cov.csv";
  std::ofstream out(path);
  out << body;
  return path;
}

}  // namespace

TEST_CASE("grid space thresholds are 1..B-1") {
  const auto space = grid_space(3, 4);
  CHECK(space.d == 3);
  for (int j = 0; j < 3; ++j) {
    REQUIRE(space.cuts[j].size() == 3);
    CHECK(space.cuts[j][0] == 1.0);
    CHECK(space.cuts[j][1] == 2.0);
    CHECK(space.cuts[j][2] == 3.0);
  }
  CHECK(space.n_levels(0) == 4);
}

TEST_CASE("additive_discrete noiseless proportions match the exact multinomial") {
  // Oracle: with x uniform on the 4-cell grid, y = 1{x1>1} + 1{x2>1} takes
  // values {0,1,2} with exact probabilities {1/4, 1/2, 1/4}.
  const long n = 100000;
  const auto data = sample_dgp(two_step_spec(0.0), n, 7);
  long counts[3] = {0, 0, 0};
  for (long i = 0; i < n; ++i) {
    const double y = data.y[i];
    REQUIRE((y == 0.0 || y == 1.0 || y == 2.0));
    counts[static_cast<int>(y)]++;
  }
  const double p[3] = {0.25, 0.5, 0.25};
  for (int v = 0; v < 3; ++v) {
    const double se = std::sqrt(p[v] * (1 - p[v]) / n);
    CHECK(std::abs(static_cast<double>(counts[v]) / n - p[v]) < 4 * se);
  }
}

TEST_CASE("additive_discrete marginals are uniform on the grid") {
  DgpSpec spec = two_step_spec(1.0);
  spec.levels = 3;
  spec.components = {{0, {0.0, 1.0, 2.0}}, {1, {0.0, 0.5, 1.0}}};
  const long n = 100000;
  const auto data = sample_dgp(spec, n, 11);
  // Chi-square against uniform; 4*sigma-equivalent threshold p > 0.001 means
  // chi2(2 dof) below 13.8.
  for (int j = 0; j < 2; ++j) {
    double chi2 = 0.0;
    for (int c = 1; c <= 3; ++c) {
      long cnt = 0;
      for (long i = 0; i < n; ++i)
        if (data.X(i, j) == c) cnt++;
      const double expd = n / 3.0;
      chi2 += (cnt - expd) * (cnt - expd) / expd;
    }
    CHECK(chi2 < 13.8);
  }
}

TEST_CASE("low_dim_smooth signal matches independent recomputation") {
  const DgpSpec spec{DgpSpec::Kind::low_dim_smooth};
  const auto data = sample_dgp(spec, 200, 3);
  REQUIRE(data.d() == 10);
  REQUIRE(!data.binned);
  for (long i = 0; i < data.n(); ++i) {
    // g(0.5) = 1 at the logistic midpoint; the response recipe is
    // g(x0) * g(x1) plus noise.
    const double f = gfun(data.raw(i, 0)) * gfun(data.raw(i, 1));
    CHECK(data.f_true[i] == doctest::Approx(f).epsilon(1e-12));
  }
  CHECK(gfun(0.5) == doctest::Approx(1.0));
}

TEST_CASE("low_dim_smooth noise variance hits the SNR-3 calibration") {
  // Oracle: fresh Monte Carlo with a different seed and 1e6 draws.
  Rng rng(99);
  const double rho = 0.01;
  const double a = std::sqrt(1.0 - rho * rho);
  double sum = 0.0, sumsq = 0.0;
  const long reps = 1000000;
  for (long i = 0; i < reps; ++i) {
    const double u1 = rng.normal();
    const double u2 = rng.normal();
    const double s = gfun(u1) * gfun(rho * u1 + a * u2);
    sum += s;
    sumsq += s * s;
  }
  const double mean = sum / reps;
  const double oracle = (sumsq / reps - mean * mean) / 3.0;
  CHECK(low_dim_smooth_noise_var() == doctest::Approx(oracle).epsilon(0.01));

  // Empirical residual variance of a sampled set agrees with the setting.
  const auto data = sample_dgp({DgpSpec::Kind::low_dim_smooth}, 100000, 5);
  const Eigen::VectorXd resid = data.y - data.f_true;
  const double var = (resid.array() - resid.mean()).square().sum() / (resid.size() - 1);
  CHECK(var == doctest::Approx(low_dim_smooth_noise_var()).epsilon(0.05));
}

TEST_CASE("piecewise_linear beta is shared across replications") {
  DgpSpec spec{DgpSpec::Kind::piecewise_linear};
  const auto recover_beta_mid = [](const Dataset& data) {
    // Middle regime uses features 6..10 of the copula values. Regime
    // membership is recovered by inverting the copula on the last feature:
    // the middle regime is Phi(-0.4) <= x20 < Phi(0.4).
    const double lo = 0.5 * std::erfc(0.4 / std::sqrt(2.0));
    const double hi = 0.5 * std::erfc(-0.4 / std::sqrt(2.0));
    std::vector<long> rows;
    for (long i = 0; i < data.n(); ++i) {
      const double x20 = data.raw(i, 19);
      if (x20 >= lo && x20 < hi) rows.push_back(i);
    }
    REQUIRE(rows.size() >= 10);
    Eigen::MatrixXd A(rows.size(), 5);
    Eigen::VectorXd b(rows.size());
    for (size_t r = 0; r < rows.size(); ++r) {
      A.row(r) = data.raw.row(rows[r]).segment(5, 5);
      b[r] = data.f_true[rows[r]];
    }
    return Eigen::VectorXd(A.colPivHouseholderQr().solve(b));
  };
  const auto d1 = sample_dgp(spec, 400, 21);
  const auto d2 = sample_dgp(spec, 400, 22);
  const Eigen::VectorXd b1 = recover_beta_mid(d1);
  const Eigen::VectorXd b2 = recover_beta_mid(d2);
  CHECK((b1 - b2).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(b1.cwiseAbs().maxCoeff() <= 15.0);
  // All three regimes occur.
  std::set<int> regimes;
  for (long i = 0; i < d1.n(); ++i) {
    const double x20 = d1.raw(i, 19);
    const double lo = 0.5 * std::erfc(0.4 / std::sqrt(2.0));
    const double hi = 0.5 * std::erfc(-0.4 / std::sqrt(2.0));
    regimes.insert(x20 < lo ? 0 : (x20 < hi ? 1 : 2));
  }
  CHECK(regimes.size() == 3);
}

TEST_CASE("sample_dgp is bit-identical for one (spec, n, seed)") {
  const DgpSpec spec{DgpSpec::Kind::low_dim_smooth};
  const auto a = sample_dgp(spec, 50, 1234);
  const auto b = sample_dgp(spec, 50, 1234);
  CHECK(a.raw == b.raw);
  CHECK(a.y == b.y);
  const auto c = sample_dgp(two_step_spec(0.5), 50, 9);
  const auto d = sample_dgp(two_step_spec(0.5), 50, 9);
  CHECK(c.X == d.X);
  CHECK(c.y == d.y);
}

TEST_CASE("dgp validation rejects bad specs") {
  DgpSpec spec = two_step_spec(1.0);
  spec.components[0].values = {1.0, 1.0};  // constant component
  CHECK_THROWS_AS(sample_dgp(spec, 10, 1), ConfigError);
  spec = two_step_spec(-1.0);
  CHECK_THROWS_AS(sample_dgp(spec, 10, 1), ConfigError);
  CHECK_THROWS_AS(sample_dgp(two_step_spec(1.0), 0, 1), ConfigError);
}

TEST_CASE("load_csv parses a small file") {
  const auto path = write_temp_csv("a,b,target\n1.5,2,3\n4,5.5,6\n1.5,2,3\n");
  const auto data = load_csv(path, "target");
  CHECK(data.n() == 3);
  CHECK(data.d() == 2);
  CHECK(data.raw(0, 0) == 1.5);
  CHECK(data.raw(1, 1) == 5.5);
  CHECK(data.y[2] == 3.0);
  // Duplicate rows preserved.
  CHECK(data.raw.row(0) == data.raw.row(2));
}

TEST_CASE("load_csv error paths name the location") {
  const auto path = write_temp_csv("a,b\n1,2\n");
  CHECK_THROWS_WITH_AS(load_csv(path, "target"),
                       doctest::Contains("target"), ConfigError);
  const auto bad = write_temp_csv("a,b\n1,oops\n");
  CHECK_THROWS_WITH_AS(load_csv(bad, "a"), doctest::Contains("row 2"),
                       ConfigError);
  const auto missing = write_temp_csv("a,b\n1,\n");
  CHECK_THROWS_AS(load_csv(missing, "a"), ConfigError);
}

TEST_CASE("bin_features unique keeps every value but the max as a cut") {
  Dataset data;
  data.raw.resize(3, 1);
  data.raw << 3.2, 3.2, 5.0;
  data.y.resize(3);
  data.y << 1, 2, 3;
  const auto binned = bin_features(data, {BinStrategy::Kind::unique, 0});
  REQUIRE(binned.space.cuts[0].size() == 1);
  CHECK(binned.space.cuts[0][0] == 3.2);
  CHECK(binned.X(0, 0) == 1);
  CHECK(binned.X(2, 0) == 2);
}

TEST_CASE("bin_features quantiles dedups to at most the distinct-value bound") {
  Dataset data;
  data.raw.resize(50, 1);
  data.y.resize(50);
  for (int i = 0; i < 50; ++i) {
    data.raw(i, 0) = i;
    data.y[i] = i;
  }
  const auto binned =
      bin_features(data, {BinStrategy::Kind::quantiles, 100});
  CHECK(binned.space.cuts[0].size() <= 49);
  CHECK(binned.space.cuts[0].size() >= 25);
}

TEST_CASE("bin_features on grid codes {1,2} gives threshold {1}") {
  Dataset data;
  data.raw.resize(4, 1);
  data.raw << 1, 2, 1, 2;
  data.y.resize(4);
  data.y << 0, 1, 0, 1;
  const auto binned = bin_features(data, {BinStrategy::Kind::unique, 0});
  REQUIRE(binned.space.cuts[0].size() == 1);
  CHECK(binned.space.cuts[0][0] == 1.0);
}

TEST_CASE("binned codes preserve raw order") {
  Rng rng(4);
  Dataset data;
  data.raw.resize(200, 2);
  data.y.resize(200);
  for (int i = 0; i < 200; ++i) {
    data.raw(i, 0) = std::floor(rng.unif() * 20.0);
    data.raw(i, 1) = rng.normal();
    data.y[i] = rng.normal();
  }
  for (const auto strat :
       {BinStrategy{BinStrategy::Kind::unique, 0},
        BinStrategy{BinStrategy::Kind::quantiles, 7}}) {
    const auto binned = bin_features(data, strat);
    for (int j = 0; j < 2; ++j)
      for (int a = 0; a < 200; ++a)
        for (int b = 0; b < 200; ++b)
          if (data.raw(a, j) < data.raw(b, j))
            CHECK(binned.X(a, j) <= binned.X(b, j));
  }
}

TEST_CASE("constant feature yields zero thresholds") {
  Dataset data;
  data.raw.resize(3, 2);
  data.raw << 7, 1, 7, 2, 7, 3;
  data.y.resize(3);
  data.y << 1, 2, 3;
  const auto binned = bin_features(data, {BinStrategy::Kind::unique, 0});
  CHECK(binned.space.cuts[0].empty());
  CHECK(binned.space.n_levels(0) == 1);
  for (long i = 0; i < 3; ++i) CHECK(binned.X(i, 0) == 1);
}

TEST_CASE("encode_with routes unseen values into the right bins") {
  CovariateSpace space;
  space.d = 1;
  space.cuts = {{1.0, 3.0}};
  Dataset data;
  data.raw.resize(4, 1);
  data.raw << 0.5, 2.0, 3.0, 6.0;
  data.y.resize(4);
  data.y << 0, 0, 0, 0;
  const auto coded = encode_with(data, space);
  CHECK(coded.X(0, 0) == 1);
  CHECK(coded.X(1, 0) == 2);
  CHECK(coded.X(2, 0) == 2);  // split is <=
  CHECK(coded.X(3, 0) == 3);
}

TEST_CASE("scale_response endpoints and midpoints") {
  Eigen::VectorXd y(2);
  y << 0, 10;
  auto [s, params] = scale_response(y);
  CHECK(s[0] == doctest::Approx(-0.5));
  CHECK(s[1] == doctest::Approx(0.5));

  Eigen::VectorXd y3(3);
  y3 << 2, 4, 6;
  auto [s3, p3] = scale_response(y3);
  CHECK(s3[0] == doctest::Approx(-0.5));
  CHECK(s3[1] == doctest::Approx(0.0));
  CHECK(s3[2] == doctest::Approx(0.5));

  Eigen::VectorXd constant = Eigen::VectorXd::Constant(5, 3.3);
  CHECK_THROWS_AS(scale_response(constant), ConfigError);
}

TEST_CASE("unscale round-trips random responses") {
  Rng rng(17);
  Eigen::VectorXd y(100);
  for (int i = 0; i < 100; ++i) y[i] = 5.0 * rng.normal() + 2.0;
  auto [s, params] = scale_response(y);
  const Eigen::VectorXd back = unscale(s, params);
  CHECK((back - y).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("split_train_test partitions deterministically") {
  const auto data = sample_dgp(two_step_spec(1.0), 10, 3);
  auto [train, test] = split_train_test(data, 0.1, 77);
  CHECK(test.n() == 1);
  CHECK(train.n() == 9);
  auto [train2, test2] = split_train_test(data, 0.1, 77);
  CHECK(train.y == train2.y);
  CHECK(test.y == test2.y);

  // Partition property: y-multisets union back to the original.
  const auto big = sample_dgp(two_step_spec(1.0), 50, 3);
  auto [tr, te] = split_train_test(big, 0.3, 5);
  std::multiset<double> all(big.y.data(), big.y.data() + big.y.size());
  std::multiset<double> got(tr.y.data(), tr.y.data() + tr.y.size());
  got.insert(te.y.data(), te.y.data() + te.y.size());
  CHECK(all == got);

  CHECK_THROWS_AS(split_train_test(data, 0.001, 1), ConfigError);
  CHECK_THROWS_AS(split_train_test(data, 1.5, 1), ConfigError);
}

TEST_CASE("subsample draws without replacement") {
  const auto data = sample_dgp(two_step_spec(0.0), 40, 8);
  const auto sub = subsample(data, 15, 3);
  CHECK(sub.n() == 15);
  const auto sub2 = subsample(data, 15, 3);
  CHECK(sub.y == sub2.y);
  CHECK_THROWS_AS(subsample(data, 0, 1), ConfigError);
  CHECK_THROWS_AS(subsample(data, 41, 1), ConfigError);
}
