#include "bartlab/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "bartlab/common.hpp"
#include "bartlab/csvio.hpp"

namespace bartlab {

namespace {

void validate_scalar_chains(const ScalarChains& chains) {
  const size_t k = chains.chains.size();
  if (k < 2)
    throw ConfigError("gelman_rubin: need at least 2 chains, got " +
                      std::to_string(k));
  const size_t n = chains.chains[0].size();
  if (n < 2)
    throw ConfigError("gelman_rubin: chains must hold at least 2 samples");
  for (size_t j = 1; j < k; ++j)
    if (chains.chains[j].size() != n)
      throw ConfigError("gelman_rubin: chain " + std::to_string(j) + " has " +
                        std::to_string(chains.chains[j].size()) +
                        " samples, chain 0 has " + std::to_string(n));
}

Eigen::VectorXd target_values(const Dataset& test, TargetKind target,
                              const std::string& who) {
  if (test.n() == 0) throw ConfigError(who + ": empty test set");
  if (target == TargetKind::function) {
    if (test.f_true.size() != test.n())
      throw ConfigError(who +
                        ": function target needs true function values for "
                        "every test row");
    return test.f_true;
  }
  return test.y;
}

void check_predictions(const ChainTrace& trace, long n_test,
                       const std::string& who) {
  if (trace.size() < 1)
    throw ConfigError(who + ": trace holds no iterations");
  if (trace.predictions.rows() != trace.size())
    throw ConfigError(who + ": trace did not record predictions per iteration");
  if (trace.predictions.cols() != n_test)
    throw ConfigError(who + ": trace predictions cover " +
                      std::to_string(trace.predictions.cols()) +
                      " points, test set has " + std::to_string(n_test));
}

uint64_t mix64(uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double unit_open(uint64_t bits) {
  // (0, 1]: safe under log.
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

double gelman_rubin(const ScalarChains& chains) {
  validate_scalar_chains(chains);
  const size_t k = chains.chains.size();
  const size_t n = chains.chains[0].size();

  std::vector<double> means(k, 0.0);
  double grand = 0.0;
  for (size_t j = 0; j < k; ++j) {
    for (double v : chains.chains[j]) means[j] += v;
    means[j] /= static_cast<double>(n);
    grand += means[j];
  }
  grand /= static_cast<double>(k);

  double between = 0.0;
  for (size_t j = 0; j < k; ++j)
    between += (means[j] - grand) * (means[j] - grand);
  between *= static_cast<double>(n) / static_cast<double>(k - 1);

  double within = 0.0;
  for (size_t j = 0; j < k; ++j) {
    double ss = 0.0;
    for (double v : chains.chains[j])
      ss += (v - means[j]) * (v - means[j]);
    within += ss / static_cast<double>(n - 1);
  }
  within /= static_cast<double>(k);

  if (within <= 0.0)
    throw NumericalError(
        "gelman_rubin: zero within-chain variance, the diagnostic is "
        "undefined");

  const double nn = static_cast<double>(n);
  const double vhat = (nn - 1.0) / nn * within + between / nn;
  return std::sqrt(vhat / within);
}

std::vector<double> rmse_trace(const ChainTrace& trace, const Dataset& test,
                               TargetKind target) {
  const Eigen::VectorXd truth = target_values(test, target, "rmse_trace");
  check_predictions(trace, truth.size(), "rmse_trace");
  std::vector<double> out(static_cast<size_t>(trace.size()));
  for (long t = 0; t < trace.size(); ++t)
    out[static_cast<size_t>(t)] = std::sqrt(
        (trace.predictions.row(t).transpose() - truth).squaredNorm() /
        static_cast<double>(truth.size()));
  return out;
}

double posterior_rmse(const std::vector<ChainTrace>& traces,
                      const Dataset& test, TargetKind target) {
  const Eigen::VectorXd truth = target_values(test, target, "posterior_rmse");
  if (traces.empty())
    throw ConfigError("posterior_rmse: no traces supplied");
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(truth.size());
  long rows = 0;
  for (const ChainTrace& trace : traces) {
    check_predictions(trace, truth.size(), "posterior_rmse");
    for (long t = 0; t < trace.size(); ++t)
      mean += trace.predictions.row(t).transpose();
    rows += trace.size();
  }
  mean /= static_cast<double>(rows);
  return std::sqrt((mean - truth).squaredNorm() /
                   static_cast<double>(truth.size()));
}

double keyed_standard_normal(uint64_t chain, uint64_t iteration,
                             uint64_t point) {
  uint64_t state = mix64(chain);
  state = mix64(state ^ iteration);
  state = mix64(state ^ point);
  const double u1 = unit_open(mix64(state));
  const double u2 = unit_open(mix64(state + 1));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

double interpolated_quantile(std::vector<double> values, double prob) {
  if (values.empty())
    throw ConfigError("interpolated_quantile: empty sample");
  if (!(prob >= 0.0) || !(prob <= 1.0))
    throw ConfigError("interpolated_quantile: probability " +
                      std::to_string(prob) + " outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = prob * static_cast<double>(values.size() - 1);
  const size_t lo = static_cast<size_t>(h);
  if (lo + 1 >= values.size()) return values.back();
  const double frac = h - static_cast<double>(lo);
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

double coverage(const std::vector<ChainTrace>& traces, const Dataset& test,
                CoverageMode mode, double lo, double hi) {
  if (!(lo > 0.0) || !(hi < 1.0) || !(lo < hi))
    throw ConfigError("coverage: need 0 < lo < hi < 1");
  if (traces.empty()) throw ConfigError("coverage: no traces supplied");
  const Eigen::VectorXd truth = target_values(
      test, mode == CoverageMode::function ? TargetKind::function
                                           : TargetKind::response,
      "coverage");
  long rows = 0;
  for (const ChainTrace& trace : traces) {
    check_predictions(trace, truth.size(), "coverage");
    rows += trace.size();
  }

  long covered = 0;
  std::vector<double> sample(static_cast<size_t>(rows));
  for (long i = 0; i < truth.size(); ++i) {
    size_t at = 0;
    for (size_t c = 0; c < traces.size(); ++c) {
      const ChainTrace& trace = traces[c];
      for (long t = 0; t < trace.size(); ++t) {
        double value = trace.predictions(t, i);
        if (mode == CoverageMode::predictive) {
          const double sd = std::sqrt(trace.sigma2[static_cast<size_t>(t)]);
          value += sd * keyed_standard_normal(
                            c, static_cast<uint64_t>(trace.burn_in + t),
                            static_cast<uint64_t>(i));
        }
        sample[at++] = value;
      }
    }
    const double lower = interpolated_quantile(sample, lo);
    const double upper = interpolated_quantile(sample, hi);
    if (truth(i) >= lower && truth(i) <= upper) ++covered;
  }
  return static_cast<double>(covered) / static_cast<double>(truth.size());
}

std::vector<ScalarChains> quantile_traces(
    const std::vector<ChainTrace>& traces, const std::vector<double>& probs) {
  if (traces.empty())
    throw ConfigError("quantile_traces: no traces supplied");
  for (double p : probs)
    if (!(p > 0.0) || !(p < 1.0))
      throw ConfigError("quantile_traces: probability " + std::to_string(p) +
                        " outside (0, 1)");
  const long n_test = traces[0].predictions.cols();
  for (const ChainTrace& trace : traces)
    check_predictions(trace, n_test, "quantile_traces");
  if (n_test == 0)
    throw ConfigError("quantile_traces: traces carry no predictions");

  std::vector<ScalarChains> out(probs.size());
  for (auto& sc : out) sc.chains.resize(traces.size());
  for (size_t c = 0; c < traces.size(); ++c) {
    const ChainTrace& trace = traces[c];
    std::vector<double> row(static_cast<size_t>(n_test));
    for (long t = 0; t < trace.size(); ++t) {
      for (long i = 0; i < n_test; ++i)
        row[static_cast<size_t>(i)] = trace.predictions(t, i);
      for (size_t p = 0; p < probs.size(); ++p)
        out[p].chains[c].push_back(interpolated_quantile(row, probs[p]));
    }
  }
  return out;
}

DiagnosticSummary summarize_chains(const std::vector<ChainTrace>& traces,
                                   const Dataset& test, CoverageMode mode,
                                   TargetKind target,
                                   const std::string& dataset, long n_train,
                                   const std::string& config_hash) {
  if (traces.size() < 2)
    throw ConfigError("summarize_chains: need at least 2 chains for Rhat");
  DiagnosticSummary s;
  s.dataset = dataset;
  s.n_train = n_train;
  s.config_hash = config_hash;

  ScalarChains rmse_chains;
  for (const ChainTrace& trace : traces)
    rmse_chains.chains.push_back(rmse_trace(trace, test, target));
  s.rhat_rmse = gelman_rubin(rmse_chains);

  const std::vector<double> probs = {0.05, 0.25, 0.50, 0.75, 0.95};
  const std::vector<ScalarChains> quantiles = quantile_traces(traces, probs);
  double* slots[] = {&s.rhat_q05, &s.rhat_q25, &s.rhat_q50, &s.rhat_q75,
                     &s.rhat_q95};
  for (size_t p = 0; p < probs.size(); ++p)
    *slots[p] = gelman_rubin(quantiles[p]);

  s.coverage = coverage(traces, test, mode);
  s.rmse = posterior_rmse(traces, test, target);
  return s;
}

void write_summary_csv(const std::string& path,
                       const std::vector<DiagnosticSummary>& rows) {
  const std::vector<std::string> header = {
      "dataset",  "n_train",  "config_hash", "rhat_rmse",
      "rhat_q05", "rhat_q25", "rhat_q50",    "rhat_q75",
      "rhat_q95", "coverage", "rmse"};
  std::vector<std::vector<std::string>> cells;
  cells.reserve(rows.size());
  for (const DiagnosticSummary& s : rows)
    cells.push_back({s.dataset, std::to_string(s.n_train), s.config_hash,
                     csv_format(s.rhat_rmse), csv_format(s.rhat_q05),
                     csv_format(s.rhat_q25), csv_format(s.rhat_q50),
                     csv_format(s.rhat_q75), csv_format(s.rhat_q95),
                     csv_format(s.coverage), csv_format(s.rmse)});
  write_csv(path, header, cells);
}

}  // namespace bartlab
