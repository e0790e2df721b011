#include "bartlab/covariates.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>

#include "bartlab/rng.hpp"

namespace bartlab {

namespace {

double logistic_g(double x) { return 2.0 / (1.0 + std::exp(-12.0 * (x - 0.5))); }

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Correlated standard normals with pairwise correlation rho: z = L u for the
// exchangeable correlation matrix. Filling column by column via the explicit
// Cholesky recursion avoids storing L.
void draw_correlated_normals(
    Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> out, double rho,
    Rng& rng) {
  const int d = static_cast<int>(out.size());
  // Exchangeable correlation: L has a closed form, but a plain dense Cholesky
  // of the small d x d matrix is clearer and runs once per row.
  static thread_local Eigen::MatrixXd cached_L;
  static thread_local int cached_d = -1;
  static thread_local double cached_rho = -2.0;
  if (cached_d != d || cached_rho != rho) {
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Constant(d, d, rho);
    sigma.diagonal().setOnes();
    cached_L = sigma.llt().matrixL();
    cached_d = d;
    cached_rho = rho;
  }
  Eigen::VectorXd u(d);
  for (int j = 0; j < d; ++j) u[j] = rng.normal();
  out = (cached_L * u).transpose();
}

}  // namespace

CovariateSpace grid_space(int d, int levels) {
  if (d < 1 || levels < 2)
    throw ConfigError("grid_space: need d >= 1 and levels >= 2");
  CovariateSpace space;
  space.d = d;
  space.cuts.assign(d, {});
  for (int j = 0; j < d; ++j) {
    space.cuts[j].resize(levels - 1);
    for (int t = 1; t < levels; ++t) space.cuts[j][t - 1] = t;
  }
  return space;
}

void validate_space(const CovariateSpace& space) {
  if (space.d != static_cast<int>(space.cuts.size()))
    throw ConfigError("covariate space: d does not match threshold lists");
  for (int j = 0; j < space.d; ++j) {
    for (size_t t = 1; t < space.cuts[j].size(); ++t) {
      if (!(space.cuts[j][t - 1] < space.cuts[j][t]))
        throw ConfigError("covariate space: thresholds not strictly increasing");
    }
  }
}

void validate_dgp(const DgpSpec& spec) {
  if (spec.kind == DgpSpec::Kind::additive_discrete) {
    if (spec.d < 1 || spec.levels < 2)
      throw ConfigError("dgp: additive_discrete needs d >= 1, levels >= 2");
    if (spec.noise_sd < 0) throw ConfigError("dgp: negative noise sd");
    if (spec.components.empty())
      throw ConfigError("dgp: additive_discrete needs >= 1 component");
    for (const auto& c : spec.components) {
      if (c.feature < 0 || c.feature >= spec.d)
        throw ConfigError("dgp: component feature out of range");
      if (static_cast<int>(c.values.size()) != spec.levels)
        throw ConfigError("dgp: component value table length != levels");
      const auto [mn, mx] = std::minmax_element(c.values.begin(), c.values.end());
      if (!(*mn < *mx))
        throw ConfigError("dgp: additive component must be non-constant");
    }
  }
}

double additive_value(const DgpSpec& spec, const Eigen::RowVectorXi& codes) {
  double f = 0.0;
  for (const auto& c : spec.components) f += c.values[codes[c.feature] - 1];
  return f;
}

double low_dim_smooth_noise_var() {
  static double value = 0.0;
  static std::once_flag flag;
  std::call_once(flag, [] {
    Rng rng(0x10d5e0a1ULL);
    const long reps = 1000000;
    const double rho = 0.01;
    const double a = std::sqrt(1.0 - rho * rho);
    double sum = 0.0, sumsq = 0.0;
    for (long i = 0; i < reps; ++i) {
      const double u1 = rng.normal();
      const double u2 = rng.normal();
      const double x0 = u1;
      const double x1 = rho * u1 + a * u2;
      const double s = logistic_g(x0) * logistic_g(x1);
      sum += s;
      sumsq += s * s;
    }
    const double mean = sum / reps;
    value = (sumsq / reps - mean * mean) / 3.0;
  });
  return value;
}

Dataset sample_dgp(const DgpSpec& spec, long n, uint64_t seed) {
  if (n < 1) throw ConfigError("sample_dgp: n must be >= 1");
  validate_dgp(spec);
  Rng rng(seed);
  Dataset data;

  switch (spec.kind) {
    case DgpSpec::Kind::additive_discrete: {
      data.X.resize(n, spec.d);
      data.raw.resize(n, spec.d);
      data.y.resize(n);
      data.f_true.resize(n);
      for (long i = 0; i < n; ++i) {
        for (int j = 0; j < spec.d; ++j) {
          const int code = 1 + static_cast<int>(rng.unif_int(spec.levels));
          data.X(i, j) = code;
          data.raw(i, j) = code;
        }
        const double f = additive_value(spec, data.X.row(i));
        data.f_true[i] = f;
        data.y[i] = f + spec.noise_sd * rng.normal();
      }
      data.space = grid_space(spec.d, spec.levels);
      data.binned = true;
      break;
    }
    case DgpSpec::Kind::low_dim_smooth: {
      const int d = 10;
      const double noise_sd = std::sqrt(low_dim_smooth_noise_var());
      data.raw.resize(n, d);
      data.y.resize(n);
      data.f_true.resize(n);
      for (long i = 0; i < n; ++i) {
        draw_correlated_normals(data.raw.row(i), 0.01, rng);
        const double f = logistic_g(data.raw(i, 0)) * logistic_g(data.raw(i, 1));
        data.f_true[i] = f;
        data.y[i] = f + noise_sd * rng.normal();
      }
      break;
    }
    case DgpSpec::Kind::piecewise_linear: {
      const int d = 20;
      // One coefficient vector, drawn from its own fixed stream so it is
      // identical across replications regardless of the data seed.
      Rng beta_rng(spec.beta_seed);
      Eigen::VectorXd beta(d);
      for (int j = 0; j < d; ++j) beta[j] = -15.0 + 30.0 * beta_rng.unif();

      data.raw.resize(n, d);
      data.y.resize(n);
      data.f_true.resize(n);
      Eigen::RowVectorXd z(d);
      for (long i = 0; i < n; ++i) {
        draw_correlated_normals(z, 0.01, rng);
        // The regime indicator uses the Gaussian coordinate; +-0.4 on the
        // copula scale would leave the lower regime unreachable.
        const double split_var = z[d - 1];
        for (int j = 0; j < d; ++j) data.raw(i, j) = std_normal_cdf(z[j]);
        int lo, hi;
        if (split_var < -0.4) {
          lo = 1, hi = 5;
        } else if (split_var < 0.4) {
          lo = 6, hi = 10;
        } else {
          lo = 11, hi = 15;
        }
        double f = 0.0;
        for (int j = lo; j <= hi; ++j) f += data.raw(i, j - 1) * beta[j - 1];
        data.f_true[i] = f;
        data.y[i] = f + rng.normal();
      }
      break;
    }
  }
  return data;
}

Dataset load_csv(const std::string& path, const std::string& target_column) {
  std::ifstream in(path);
  if (!in) throw ConfigError("load_csv: cannot open " + path);

  auto split_line = [](const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
      const char ch = line[i];
      if (quoted) {
        if (ch == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            cur += '"';
            ++i;
          } else {
            quoted = false;
          }
        } else {
          cur += ch;
        }
      } else if (ch == '"') {
        quoted = true;
      } else if (ch == ',') {
        fields.push_back(cur);
        cur.clear();
      } else if (ch != '\r') {
        cur += ch;
      }
    }
    fields.push_back(cur);
    return fields;
  };

  std::string line;
  if (!std::getline(in, line) || line.empty())
    throw ConfigError("load_csv: empty file " + path);
  const auto header = split_line(line);
  long target_idx = -1;
  for (size_t j = 0; j < header.size(); ++j)
    if (header[j] == target_column) target_idx = static_cast<long>(j);
  if (target_idx < 0)
    throw ConfigError("load_csv: target column '" + target_column +
                      "' not found in " + path);

  const long ncol = static_cast<long>(header.size());
  std::vector<std::vector<double>> rows;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split_line(line);
    if (static_cast<long>(fields.size()) != ncol)
      throw ConfigError("load_csv: row " + std::to_string(lineno) + " has " +
                        std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(ncol));
    std::vector<double> vals(ncol);
    for (long j = 0; j < ncol; ++j) {
      const std::string& f = fields[j];
      if (f.empty())
        throw ConfigError("load_csv: missing value at row " +
                          std::to_string(lineno) + ", column " + header[j]);
      size_t pos = 0;
      try {
        vals[j] = std::stod(f, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos != f.size())
        throw ConfigError("load_csv: non-numeric cell '" + f + "' at row " +
                          std::to_string(lineno) + ", column " + header[j]);
    }
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw ConfigError("load_csv: no data rows in " + path);

  Dataset data;
  const long n = static_cast<long>(rows.size());
  data.raw.resize(n, ncol - 1);
  data.y.resize(n);
  for (long i = 0; i < n; ++i) {
    long k = 0;
    for (long j = 0; j < ncol; ++j) {
      if (j == target_idx)
        data.y[i] = rows[i][j];
      else
        data.raw(i, k++) = rows[i][j];
    }
  }
  return data;
}

namespace {

// Type-7 quantile on a sorted multiset.
double quantile_sorted(const std::vector<double>& v, double p) {
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const size_t lo = static_cast<size_t>(std::floor(h));
  const size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<double> cuts_for_feature(const Eigen::VectorXd& col,
                                     const BinStrategy& strategy) {
  std::vector<double> vals(col.data(), col.data() + col.size());
  std::sort(vals.begin(), vals.end());
  const double vmax = vals.back();
  std::vector<double> cuts;
  if (strategy.kind == BinStrategy::Kind::unique) {
    // Threshold = value, split is <=, so every unique value except the
    // maximum separates something.
    for (size_t i = 0; i < vals.size(); ++i)
      if ((i == 0 || vals[i] != vals[i - 1]) && vals[i] < vmax)
        cuts.push_back(vals[i]);
  } else {
    if (strategy.k < 1) throw ConfigError("bin_features: quantiles k >= 1");
    std::set<double> uniq;
    for (int j = 1; j <= strategy.k; ++j) {
      const double q =
          quantile_sorted(vals, static_cast<double>(j) / (strategy.k + 1));
      // Snap down to an observed value so threshold = value, split is <=;
      // interpolated points between the same two data values are duplicates.
      const auto it = std::upper_bound(vals.begin(), vals.end(), q);
      if (it == vals.begin()) continue;
      const double snapped = *(it - 1);
      if (snapped < vmax) uniq.insert(snapped);
    }
    cuts.assign(uniq.begin(), uniq.end());
  }
  return cuts;
}

int code_of(const std::vector<double>& cuts, double v) {
  // Number of cuts strictly below v, plus one.
  const auto it = std::lower_bound(cuts.begin(), cuts.end(), v);
  return static_cast<int>(it - cuts.begin()) + 1;
}

}  // namespace

Dataset bin_features(const Dataset& dataset, const BinStrategy& strategy) {
  if (dataset.binned) throw ConfigError("bin_features: dataset already binned");
  if (dataset.raw.size() == 0) throw ConfigError("bin_features: no raw features");
  Dataset out = dataset;
  const long n = dataset.raw.rows();
  const int d = static_cast<int>(dataset.raw.cols());
  out.space.d = d;
  out.space.cuts.resize(d);
  out.X.resize(n, d);
  for (int j = 0; j < d; ++j) {
    out.space.cuts[j] = cuts_for_feature(dataset.raw.col(j), strategy);
    for (long i = 0; i < n; ++i)
      out.X(i, j) = code_of(out.space.cuts[j], dataset.raw(i, j));
  }
  out.binned = true;
  return out;
}

Dataset encode_with(const Dataset& dataset, const CovariateSpace& space) {
  if (dataset.raw.size() == 0) throw ConfigError("encode_with: no raw features");
  if (static_cast<int>(dataset.raw.cols()) != space.d)
    throw ConfigError("encode_with: feature count mismatch");
  Dataset out = dataset;
  const long n = dataset.raw.rows();
  out.X.resize(n, space.d);
  for (int j = 0; j < space.d; ++j)
    for (long i = 0; i < n; ++i)
      out.X(i, j) = code_of(space.cuts[j], dataset.raw(i, j));
  out.space = space;
  out.binned = true;
  return out;
}

std::pair<Eigen::VectorXd, ScaleParams> scale_response(
    const Eigen::VectorXd& y) {
  const double lo = y.minCoeff();
  const double hi = y.maxCoeff();
  if (!(lo < hi)) throw ConfigError("scale_response: constant response");
  ScaleParams params{lo, hi};
  Eigen::VectorXd out = (y.array() - lo) / (hi - lo) - 0.5;
  return {out, params};
}

Eigen::VectorXd unscale(const Eigen::VectorXd& y_scaled,
                        const ScaleParams& params) {
  return ((y_scaled.array() + 0.5) * (params.y_max - params.y_min) +
          params.y_min)
      .matrix();
}

Dataset take_rows(const Dataset& dataset, const std::vector<long>& rows) {
  Dataset out;
  const long k = static_cast<long>(rows.size());
  if (dataset.raw.size() > 0) {
    out.raw.resize(k, dataset.raw.cols());
    for (long i = 0; i < k; ++i) out.raw.row(i) = dataset.raw.row(rows[i]);
  }
  if (dataset.binned) {
    out.X.resize(k, dataset.X.cols());
    for (long i = 0; i < k; ++i) out.X.row(i) = dataset.X.row(rows[i]);
  }
  out.y.resize(k);
  for (long i = 0; i < k; ++i) out.y[i] = dataset.y[rows[i]];
  if (dataset.f_true.size() > 0) {
    out.f_true.resize(k);
    for (long i = 0; i < k; ++i) out.f_true[i] = dataset.f_true[rows[i]];
  }
  out.space = dataset.space;
  out.scale = dataset.scale;
  out.binned = dataset.binned;
  return out;
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& dataset,
                                             double test_fraction,
                                             uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ConfigError("split_train_test: fraction must be in (0,1)");
  const long n = dataset.n();
  const long n_test = std::llround(test_fraction * static_cast<double>(n));
  if (n_test < 1 || n_test >= n)
    throw ConfigError("split_train_test: fraction yields an empty side");
  std::vector<long> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (long i = n - 1; i > 0; --i)
    std::swap(idx[i], idx[rng.unif_int(i + 1)]);
  std::vector<long> test_rows(idx.begin(), idx.begin() + n_test);
  std::vector<long> train_rows(idx.begin() + n_test, idx.end());
  return {take_rows(dataset, train_rows), take_rows(dataset, test_rows)};
}

Dataset subsample(const Dataset& dataset, long n, uint64_t seed) {
  const long total = dataset.n();
  if (n < 1 || n > total) throw ConfigError("subsample: bad size");
  std::vector<long> idx(total);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (long i = 0; i < n; ++i)
    std::swap(idx[i], idx[i + rng.unif_int(total - i)]);
  idx.resize(n);
  return take_rows(dataset, idx);
}

}  // namespace bartlab
