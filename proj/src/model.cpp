#include "bartlab/model.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <limits>

namespace bartlab {

void validate_priors(const Priors& priors) {
  if (!(priors.alpha > 0.0 && priors.alpha < 1.0))
    throw ConfigError("priors: alpha must lie in (0,1)");
  if (!(priors.beta >= 0.0)) throw ConfigError("priors: beta must be >= 0");
  if (priors.leaf_scale == Priors::LeafScale::lambda && !(priors.lambda > 0.0))
    throw ConfigError("priors: lambda must be > 0");
  if (priors.leaf_scale == Priors::LeafScale::k_factor && !(priors.k > 0.0))
    throw ConfigError("priors: k must be > 0");
  if (priors.sigma_mode == Priors::SigmaMode::fixed && !(priors.sigma2 > 0.0))
    throw ConfigError("priors: fixed sigma2 must be > 0");
  if (priors.sigma_mode == Priors::SigmaMode::inv_chi2) {
    if (!(priors.nu > 0.0)) throw ConfigError("priors: nu must be > 0");
    if (!(priors.q > 0.0 && priors.q < 1.0))
      throw ConfigError("priors: q must lie in (0,1)");
  }
  if (priors.split_prior == Priors::SplitPrior::dirichlet &&
      !(priors.alpha_dir > 0.0))
    throw ConfigError("priors: alpha_dir must be > 0");
}

DesignMatrix design_matrix(const std::vector<TreeStructure>& ensemble,
                           const Eigen::MatrixXi& X,
                           const CovariateSpace& space) {
  DesignMatrix dm;
  int b = 0;
  for (const auto& tree : ensemble) b += tree.n_leaves();
  dm.Psi = Eigen::MatrixXd::Zero(X.rows(), b);
  dm.tree_cols.reserve(ensemble.size());
  int col = 0;
  for (const auto& tree : ensemble) {
    const auto assign = leaf_assignment(tree, X, space);
    for (long i = 0; i < X.rows(); ++i) dm.Psi(i, col + assign[i]) = 1.0;
    dm.tree_cols.push_back({col, col + tree.n_leaves()});
    col += tree.n_leaves();
  }
  return dm;
}

double log_tree_prior(const TreeStructure& tree, const Priors& priors,
                      const CovariateSpace& space,
                      const Eigen::VectorXd& feature_weights) {
  const bool dirichlet = priors.split_prior == Priors::SplitPrior::dirichlet;
  if (dirichlet && feature_weights.size() != 0 &&
      feature_weights.size() != space.d)
    throw ConfigError("log_tree_prior: feature weight length mismatch");
  const auto cells = cell_bounds(tree, space);
  const auto depths = tree.depths();
  double logp = 0.0;
  for (int id = 0; id < tree.n_nodes(); ++id) {
    const double p_split =
        priors.alpha * std::pow(1.0 + depths[id], -priors.beta);
    // Valid thresholds for feature j within the node's cell (lo, hi].
    long total_rules = 0;
    for (int j = 0; j < space.d; ++j)
      total_rules +=
          std::max(0, cells[id].hi[j] - cells[id].lo[j] - 1);
    if (tree.nodes[id].is_leaf()) {
      // Cells admitting no rule are forced leaves and contribute factor 1.
      if (total_rules > 0) logp += std::log1p(-p_split);
      continue;
    }
    if (total_rules == 0) return -std::numeric_limits<double>::infinity();
    logp += std::log(p_split);
    const int v = tree.nodes[id].rule.feature;
    const long rules_v =
        std::max(0, cells[id].hi[v] - cells[id].lo[v] - 1);
    if (rules_v == 0) return -std::numeric_limits<double>::infinity();
    if (!dirichlet) {
      logp -= std::log(static_cast<double>(total_rules));
    } else {
      double w_v = feature_weights.size() ? feature_weights[v]
                                          : 1.0 / static_cast<double>(space.d);
      double w_total = 0.0;
      for (int j = 0; j < space.d; ++j) {
        if (cells[id].hi[j] - cells[id].lo[j] - 1 <= 0) continue;
        w_total += feature_weights.size()
                       ? feature_weights[j]
                       : 1.0 / static_cast<double>(space.d);
      }
      logp += std::log(w_v / w_total) -
              std::log(static_cast<double>(rules_v));
    }
  }
  return logp;
}

namespace {

// Minimum-norm solution of Psi^T Psi mu = Psi^T y via a rank-revealing
// decomposition of the (small) Gram matrix.
Eigen::VectorXd min_norm_ls(const Eigen::MatrixXd& A, const Eigen::VectorXd& z) {
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
  return cod.solve(z);
}

}  // namespace

double log_marginal_likelihood(const DesignMatrix& design,
                               const Eigen::VectorXd& y, double sigma2,
                               double lambda) {
  if (!(sigma2 > 0.0) || !(lambda > 0.0))
    throw ConfigError("log_marginal_likelihood: sigma2 and lambda must be > 0");
  const long n = design.n();
  const Eigen::MatrixXd A = design.Psi.transpose() * design.Psi;
  const Eigen::VectorXd z = design.Psi.transpose() * y;
  const Eigen::VectorXd mu = min_norm_ls(A, z);

  const int b = design.b();
  Eigen::MatrixXd M = A / lambda + Eigen::MatrixXd::Identity(b, b);
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success)
    throw NumericalError(
        "log_marginal_likelihood: Cholesky of lambda^-1 Psi'Psi + I failed "
        "(b=" + std::to_string(b) + ", lambda=" + std::to_string(lambda) + ")");
  double logdet = 0.0;
  const Eigen::MatrixXd& Lchol = llt.matrixLLT();
  for (int i = 0; i < b; ++i) logdet += 2.0 * std::log(Lchol(i, i));

  Eigen::LLT<Eigen::MatrixXd> llt_reg(
      A + lambda * Eigen::MatrixXd::Identity(b, b));
  if (llt_reg.info() != Eigen::Success)
    throw NumericalError(
        "log_marginal_likelihood: Cholesky of Psi'Psi + lambda I failed "
        "(b=" + std::to_string(b) + ", lambda=" + std::to_string(lambda) + ")");

  const Eigen::VectorXd Amu = A * mu;
  const double fit = y.squaredNorm() - 2.0 * mu.dot(z) + mu.dot(Amu);
  const double correction = mu.dot(Amu) - Amu.dot(llt_reg.solve(Amu));
  const double minus2 = n * std::log(2.0 * M_PI * sigma2) + logdet +
                        (fit + correction) / sigma2;
  return -0.5 * minus2;
}

double log_marginal_likelihood(const std::vector<TreeStructure>& ensemble,
                               const Eigen::MatrixXi& X,
                               const CovariateSpace& space,
                               const Eigen::VectorXd& y, double sigma2,
                               double lambda) {
  return log_marginal_likelihood(design_matrix(ensemble, X, space), y, sigma2,
                                 lambda);
}

double log_conditional_tree_likelihood(const TreeStructure& tree,
                                       const Eigen::MatrixXi& X,
                                       const CovariateSpace& space,
                                       const Eigen::VectorXd& r, double sigma2,
                                       double sigma_mu) {
  if (!(sigma2 > 0.0) || !(sigma_mu > 0.0))
    throw ConfigError(
        "log_conditional_tree_likelihood: sigma2 and sigma_mu must be > 0");
  const auto assign = leaf_assignment(tree, X, space);
  const int b = tree.n_leaves();
  Eigen::VectorXd s = Eigen::VectorXd::Zero(b);
  Eigen::VectorXd ss = Eigen::VectorXd::Zero(b);
  Eigen::VectorXd cnt = Eigen::VectorXd::Zero(b);
  for (long i = 0; i < r.size(); ++i) {
    s[assign[i]] += r[i];
    ss[assign[i]] += r[i] * r[i];
    cnt[assign[i]] += 1.0;
  }
  const double sm2 = sigma_mu * sigma_mu;
  double logp = 0.0;
  for (int j = 0; j < b; ++j) {
    if (cnt[j] == 0.0)
      throw NumericalError("log_conditional_tree_likelihood: empty leaf");
    logp += -0.5 * cnt[j] * std::log(2.0 * M_PI * sigma2) -
            0.5 * std::log1p(cnt[j] * sm2 / sigma2) - ss[j] / (2.0 * sigma2) +
            s[j] * s[j] * sm2 / (2.0 * sigma2 * (sigma2 + cnt[j] * sm2));
  }
  return logp;
}

double bic(const DesignMatrix& design, const Eigen::VectorXd& y, double sigma2,
           int df) {
  if (!(sigma2 > 0.0)) throw ConfigError("bic: sigma2 must be > 0");
  const long n = design.n();
  const Eigen::MatrixXd A = design.Psi.transpose() * design.Psi;
  const Eigen::VectorXd z = design.Psi.transpose() * y;
  const Eigen::VectorXd mu = min_norm_ls(A, z);
  const double rss = y.squaredNorm() - 2.0 * mu.dot(z) + mu.dot(A * mu);
  return rss / sigma2 + df * std::log(static_cast<double>(n)) +
         n * std::log(2.0 * M_PI * sigma2);
}

double delta_bic(double bic_a, double bic_b) { return bic_a - bic_b; }

Eigen::VectorXd sample_leaf_params_conditional(const TreeStructure& tree,
                                               const Eigen::MatrixXi& X,
                                               const CovariateSpace& space,
                                               const Eigen::VectorXd& r,
                                               double sigma2, double sigma_mu,
                                               Rng& rng) {
  const auto assign = leaf_assignment(tree, X, space);
  const int b = tree.n_leaves();
  Eigen::VectorXd s = Eigen::VectorXd::Zero(b);
  Eigen::VectorXd cnt = Eigen::VectorXd::Zero(b);
  for (long i = 0; i < r.size(); ++i) {
    s[assign[i]] += r[i];
    cnt[assign[i]] += 1.0;
  }
  Eigen::VectorXd out(b);
  for (int j = 0; j < b; ++j) {
    const double var = 1.0 / (cnt[j] / sigma2 + 1.0 / (sigma_mu * sigma_mu));
    const double mean = var * s[j] / sigma2;
    out[j] = mean + std::sqrt(var) * rng.normal();
  }
  return out;
}

Eigen::VectorXd sample_leaf_params_marginalized(const DesignMatrix& design,
                                                const Eigen::VectorXd& y,
                                                double sigma2, double lambda,
                                                Rng& rng) {
  const int b = design.b();
  const Eigen::MatrixXd A = design.Psi.transpose() * design.Psi;
  Eigen::LLT<Eigen::MatrixXd> llt(A +
                                  lambda * Eigen::MatrixXd::Identity(b, b));
  if (llt.info() != Eigen::Success)
    throw NumericalError(
        "sample_leaf_params_marginalized: Cholesky failed (b=" +
        std::to_string(b) + ")");
  const Eigen::VectorXd mean = llt.solve(design.Psi.transpose() * y);
  Eigen::VectorXd zdraw(b);
  for (int i = 0; i < b; ++i) zdraw[i] = rng.normal();
  // cov = sigma^2 (A + lambda I)^{-1} = sigma^2 (L L^T)^{-1}; L^{-T} z has
  // covariance (L L^T)^{-1}.
  const Eigen::VectorXd noise =
      llt.matrixL().transpose().solve(zdraw) * std::sqrt(sigma2);
  return mean + noise;
}

double sample_sigma2(const Eigen::VectorXd& y, const Eigen::VectorXd& fitted,
                     const Priors& priors, double lambda_cal, Rng& rng) {
  if (priors.sigma_mode != Priors::SigmaMode::inv_chi2)
    throw ConfigError("sample_sigma2: priors must be in inv_chi2 mode");
  const long n = y.size();
  if (n < 1) throw ConfigError("sample_sigma2: empty response");
  const double ssr = (y - fitted).squaredNorm();
  const double dof = priors.nu + static_cast<double>(n);
  return (priors.nu * lambda_cal + ssr) / rng.chi2(dof);
}

double calibrate_lambda(double s2, double nu, double q) {
  if (!(s2 > 0.0)) throw ConfigError("calibrate_lambda: s2 must be > 0");
  if (!(nu > 0.0) || !(q > 0.0 && q < 1.0))
    throw ConfigError("calibrate_lambda: need nu > 0 and q in (0,1)");
  // Prior sigma^2 = nu lambda / X, X ~ chi^2_nu, so P(sigma^2 < s2) = q
  // iff nu lambda / s2 is the upper-q quantile of chi^2_nu.
  boost::math::chi_squared dist(nu);
  return s2 * boost::math::quantile(dist, 1.0 - q) / nu;
}

}  // namespace bartlab
