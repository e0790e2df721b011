#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bartlab/samplers.hpp"

namespace bartlab {

// Parallel scalar sequences, one per chain (e.g. per-iteration test RMSE).
struct ScalarChains {
  std::vector<std::vector<double>> chains;
};

// Split-free Gelman-Rubin: B = n/(k-1) sum (zbar_j - zbar)^2, W = mean of
// the within-chain sample variances (divisor n-1), Vhat = ((n-1)/n) W + B/n,
// Rhat = sqrt(Vhat/W). Requires k >= 2 chains of equal length n >= 2 and
// positive W.
double gelman_rubin(const ScalarChains& chains);

// Which truth a fit is scored against: the observed responses or, for
// synthetic data, the noiseless function values.
enum class TargetKind { response, function };

// Per-iteration test RMSE of one chain's recorded predictions.
std::vector<double> rmse_trace(const ChainTrace& trace, const Dataset& test,
                               TargetKind target = TargetKind::response);

// RMSE of the prediction averaged over every retained iteration of every
// chain. By convexity this never exceeds the mean per-iteration RMSE.
double posterior_rmse(const std::vector<ChainTrace>& traces,
                      const Dataset& test,
                      TargetKind target = TargetKind::response);

// predictive: quantile band of {h_t(x_i) + e_{i,t}}, e_{i,t} ~ N(0, sigma_t^2)
// drawn from a stream keyed by (chain, iteration, point), scored against y.
// function: band of {h_t(x_i)} scored against the true function values.
enum class CoverageMode { predictive, function };

double coverage(const std::vector<ChainTrace>& traces, const Dataset& test,
                CoverageMode mode, double lo = 0.025, double hi = 0.975);

// Per-iteration quantiles of the test-prediction vector; one ScalarChains
// per requested probability, ready for gelman_rubin.
std::vector<ScalarChains> quantile_traces(
    const std::vector<ChainTrace>& traces, const std::vector<double>& probs);

// Linear interpolation of order statistics (the common type-7 rule).
double interpolated_quantile(std::vector<double> values, double prob);

// Deterministic standard-normal draw keyed by (chain, iteration, point);
// the predictive-coverage noise stream.
double keyed_standard_normal(uint64_t chain, uint64_t iteration,
                             uint64_t point);

struct DiagnosticSummary {
  std::string dataset;
  long n_train = 0;
  std::string config_hash;
  double rhat_rmse = 0.0;
  double rhat_q05 = 0.0;
  double rhat_q25 = 0.0;
  double rhat_q50 = 0.0;
  double rhat_q75 = 0.0;
  double rhat_q95 = 0.0;
  double coverage = 0.0;
  double rmse = 0.0;
};

DiagnosticSummary summarize_chains(const std::vector<ChainTrace>& traces,
                                   const Dataset& test, CoverageMode mode,
                                   TargetKind target,
                                   const std::string& dataset, long n_train,
                                   const std::string& config_hash);

void write_summary_csv(const std::string& path,
                       const std::vector<DiagnosticSummary>& rows);

}  // namespace bartlab
