#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "bartlab/trees.hpp"

namespace bartlab {

// Priors for the sum-of-trees model. The tree prior splits a depth-d node
// with probability alpha (1+d)^-beta and picks rules uniformly (or with
// Dirichlet feature weights). Leaf values are N(0, sigma_mu^2) with either
// sigma_mu = 0.5/(k sqrt(m)) or the ridge parameterization lambda =
// sigma^2 / sigma_mu^2 supplied directly. sigma^2 is fixed or carries a
// scaled-inverse-chi^2 hyperprior calibrated to the data.
struct Priors {
  double alpha = 0.95;
  double beta = 2.0;

  enum class LeafScale { lambda, k_factor } leaf_scale = LeafScale::k_factor;
  double lambda = 1.0;  // leaf_scale == lambda
  double k = 2.0;       // leaf_scale == k_factor

  enum class SigmaMode { fixed, inv_chi2 } sigma_mode = SigmaMode::inv_chi2;
  double sigma2 = 1.0;  // fixed mode
  double nu = 3.0;      // inv_chi2 mode
  double q = 0.90;

  enum class SplitPrior { uniform, dirichlet } split_prior =
      SplitPrior::uniform;
  double alpha_dir = 1.0;

  double sigma_mu(int m) const { return 0.5 / (k * std::sqrt(double(m))); }
};

void validate_priors(const Priors& priors);

// n x b 0/1 leaf-indicator matrix across the ensemble; each row sums to the
// number of trees. tree_cols[j] = [begin, end) column range of tree j.
struct DesignMatrix {
  Eigen::MatrixXd Psi;
  std::vector<std::pair<int, int>> tree_cols;

  long n() const { return Psi.rows(); }
  int b() const { return static_cast<int>(Psi.cols()); }
};

DesignMatrix design_matrix(const std::vector<TreeStructure>& ensemble,
                           const Eigen::MatrixXi& X,
                           const CovariateSpace& space);

// Log prior probability of a tree under the branching-process prior. Rule
// counts are cell-based: a rule is valid at a node when it splits the node's
// rectangular cell. Nodes whose cell admits no rule are forced leaves
// (factor 1); a split at such a node has probability zero. feature_weights
// (size d, summing to 1) are used in dirichlet mode; empty means symmetric.
double log_tree_prior(const TreeStructure& tree, const Priors& priors,
                      const CovariateSpace& space,
                      const Eigen::VectorXd& feature_weights = {});

// Log marginal likelihood of y for a TSE with leaf ridge lambda and noise
// sigma^2, evaluated in closed form; the least-squares coefficients use the
// minimum-norm solution since Psi^T Psi is routinely singular.
double log_marginal_likelihood(const DesignMatrix& design,
                               const Eigen::VectorXd& y, double sigma2,
                               double lambda);
double log_marginal_likelihood(const std::vector<TreeStructure>& ensemble,
                               const Eigen::MatrixXi& X,
                               const CovariateSpace& space,
                               const Eigen::VectorXd& y, double sigma2,
                               double lambda);

// Single-tree marginal likelihood of a residual vector with leaf prior
// N(0, sigma_mu^2): the diagonal case of the closed form above with
// lambda = sigma^2 / sigma_mu^2, computed per leaf.
double log_conditional_tree_likelihood(const TreeStructure& tree,
                                       const Eigen::MatrixXi& X,
                                       const CovariateSpace& space,
                                       const Eigen::VectorXd& r, double sigma2,
                                       double sigma_mu);

// BIC of a TSE: y^T (I - P) y / sigma^2 + df log n + n log(2 pi sigma^2),
// with P the projection onto the column space of Psi (applied via least
// squares, never materialized). df comes from the exact-analysis machinery.
double bic(const DesignMatrix& design, const Eigen::VectorXd& y, double sigma2,
           int df);
double delta_bic(double bic_a, double bic_b);

// Gibbs draw of one tree's leaf values given the residual it must fit:
// leaf j ~ N(mean_j, var_j), var_j = 1/(n_j/sigma^2 + 1/sigma_mu^2),
// mean_j = var_j * (sum of residuals in leaf j) / sigma^2.
Eigen::VectorXd sample_leaf_params_conditional(const TreeStructure& tree,
                                               const Eigen::MatrixXi& X,
                                               const CovariateSpace& space,
                                               const Eigen::VectorXd& r,
                                               double sigma2, double sigma_mu,
                                               Rng& rng);

// Joint draw of all leaf values from the marginalized posterior
// N((Psi^T Psi + lambda I)^{-1} Psi^T y, sigma^2 (Psi^T Psi + lambda I)^{-1}).
Eigen::VectorXd sample_leaf_params_marginalized(const DesignMatrix& design,
                                                const Eigen::VectorXd& y,
                                                double sigma2, double lambda,
                                                Rng& rng);

// Full-conditional draw of sigma^2: scaled-inverse-chi^2 with nu + n degrees
// of freedom and scale (nu lambda_cal + SSR)/(nu + n), SSR = ||y - fitted||^2.
double sample_sigma2(const Eigen::VectorXd& y, const Eigen::VectorXd& fitted,
                     const Priors& priors, double lambda_cal, Rng& rng);

// Prior scale such that the scaled-inverse-chi^2(nu, lambda_cal) prior puts
// mass q below s2 (typically the sample variance of the scaled response).
double calibrate_lambda(double s2, double nu, double q);

}  // namespace bartlab
