#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "bartlab/common.hpp"

namespace bartlab {

// Discrete covariate space {1..K_1} x ... x {1..K_d}. cuts[j] holds the raw
// threshold values in increasing order; code c on feature j covers raw values
// in (cuts[j][c-2], cuts[j][c-1]], so a split "x_j <= t" in code units means
// raw value <= cuts[j][t-1]. For a grid space cuts[j] = {1,...,B-1} and codes
// coincide with raw values.
struct CovariateSpace {
  int d = 0;
  std::vector<std::vector<double>> cuts;

  int n_levels(int j) const { return static_cast<int>(cuts[j].size()) + 1; }
  int n_thresholds(int j) const { return static_cast<int>(cuts[j].size()); }
};

CovariateSpace grid_space(int d, int levels);
void validate_space(const CovariateSpace& space);

struct ScaleParams {
  double y_min = 0.0;
  double y_max = 1.0;
};

struct Dataset {
  Eigen::MatrixXd raw;   // raw feature values, n x d
  Eigen::MatrixXi X;     // 1-based integer codes once binned, else 0 x 0
  Eigen::VectorXd y;
  Eigen::VectorXd f_true;  // noiseless signal for synthetic data, else empty
  CovariateSpace space;    // meaningful once binned
  std::optional<ScaleParams> scale;
  bool binned = false;

  long n() const { return y.size(); }
  int d() const {
    return binned ? static_cast<int>(X.cols()) : static_cast<int>(raw.cols());
  }
};

// Synthetic data-generating processes. additive_discrete draws covariates
// uniformly on a grid and adds step-function components; the other two kinds
// are fixed recipes (10-d correlated Gaussian with a logistic-product signal
// at SNR 3; 20-d Gaussian copula with a 3-regime piecewise linear signal).
struct AdditiveComponent {
  int feature = 0;
  std::vector<double> values;  // value at code c is values[c-1]
};

struct DgpSpec {
  enum class Kind { additive_discrete, low_dim_smooth, piecewise_linear };
  Kind kind = Kind::additive_discrete;

  // additive_discrete
  int d = 2;
  int levels = 2;
  double noise_sd = 1.0;
  std::vector<AdditiveComponent> components;

  // piecewise_linear: one coefficient seed shared across replications
  uint64_t beta_seed = 0x5eedbeefULL;
};

void validate_dgp(const DgpSpec& spec);
Dataset sample_dgp(const DgpSpec& spec, long n, uint64_t seed);

// Signal value of an additive_discrete spec at a coded grid point.
double additive_value(const DgpSpec& spec, const Eigen::RowVectorXi& codes);

// Noise variance used by low_dim_smooth (signal variance / 3, signal variance
// from a fixed seeded 1e6-draw Monte Carlo; computed once and cached).
double low_dim_smooth_noise_var();

Dataset load_csv(const std::string& path, const std::string& target_column);

struct BinStrategy {
  enum class Kind { unique, quantiles } kind = Kind::unique;
  int k = 100;  // probability points for quantiles
};

Dataset bin_features(const Dataset& dataset, const BinStrategy& strategy);

// Code a raw dataset with an existing space's cuts (e.g. a test set with the
// training cuts). Values beyond the outermost cuts take the edge codes.
Dataset encode_with(const Dataset& dataset, const CovariateSpace& space);

std::pair<Eigen::VectorXd, ScaleParams> scale_response(
    const Eigen::VectorXd& y);
Eigen::VectorXd unscale(const Eigen::VectorXd& y_scaled,
                        const ScaleParams& params);

std::pair<Dataset, Dataset> split_train_test(const Dataset& dataset,
                                             double test_fraction,
                                             uint64_t seed);

// Subsample n rows without replacement, independently per call.
Dataset subsample(const Dataset& dataset, long n, uint64_t seed);

Dataset take_rows(const Dataset& dataset, const std::vector<long>& rows);

}  // namespace bartlab
