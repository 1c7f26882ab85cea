#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "nroy/emulator.hpp"

namespace nroy {

// Knobs for the training pipeline. Defaults follow the usual conventions for
// emulation on inputs scaled to [-1, 1]: correlation lengths bounded by the
// root spacing of the cubic Chebyshev polynomial, a small nugget floor to keep
// the likelihood identifiable, and regression coefficients treated as known.
struct TrainingOptions {
  enum class BetaMode { known, noninformative };

  BetaMode beta_mode = BetaMode::known;
  // minimum fraction of total output variance a retained term must explain
  double variance_explained_threshold = 0.01;
  double theta_lower = 0.57735026918962573;  // sqrt(3)/3
  double theta_upper = 1.7320508075688772;   // sqrt(3)
  double nugget_lower = 1e-4;
  double nugget_upper = 0.5;
  // soft lower barrier on the nugget: smooth deterministic residuals leave
  // delta statistically unidentifiable near zero (the likelihood flattens
  // below the resolution of the design), so estimates under the barrier pay
  // a half-log-normal penalty while noise-dominated fits stay free to climb
  double nugget_barrier = 0.05;
  double nugget_barrier_log_sd = 0.6;
  KernelKind kernel = KernelKind::exp_sq;
  double nu = 2.5;     // matern smoothness
  double alpha = 2.0;  // rat_quad shape
  // Var[s^2] = kurtosis_multiplier * s^4 / (N - 1); 2 is the normal-theory value
  double kurtosis_multiplier = 2.0;
  std::uint64_t seed = 1;
  int workers = 1;

  void validate() const;
};

// Least-squares regression surface chosen by stepwise search.
struct RegressionFit {
  std::vector<BasisTerm> basis;
  Eigen::VectorXd beta;
  Eigen::MatrixXd beta_cov;   // residual-variance-scaled normal-equation inverse
  Eigen::VectorXd residuals;  // y - G beta
  double resid_var = 0.0;     // RSS / (n - p)
  double total_var = 0.0;     // sample variance of y
};

/**
 * Stepwise least squares over scaled inputs U (rows in [-1,1]^d).
 *
 * Candidate terms: constant, every linear, every pure quadratic and every
 * pairwise interaction. Search adds terms one at a time when n is below the
 * candidate count and deletes from the full set otherwise, driven by the
 * corrected Akaike criterion; afterwards terms explaining less than
 * opts.variance_explained_threshold of the total output variance are pruned.
 * The constant is always kept.
 */
RegressionFit fit_regression(const Eigen::MatrixXd& U, const Eigen::VectorXd& y,
                             const TrainingOptions& opts = {});

/** Convenience wrapper: pull one output column out of a run table and scale. */
RegressionFit fit_regression(const RunTable& runs, const std::string& output,
                             const ParameterSpace& space, const TrainingOptions& opts = {});

// Residual-process hyperparameters with a flag for estimates stuck at the
// search bounds.
struct HyperFit {
  double theta = 0.0;
  double nugget = 0.0;
  double sigma_sq = 0.0;
  bool at_bounds = false;
};

/**
 * Bounded maximum-likelihood estimate of (theta, nugget) for residuals r over
 * scaled inputs U, restricted to the active coordinates. The process variance
 * is profiled analytically as r' R^-1 r / (n - p_basis); the remaining
 * two-parameter likelihood is maximized by a deterministic grid multi-start
 * followed by coordinate-wise golden-section refinement within the bounds.
 */
HyperFit estimate_hyperparameters(const Eigen::VectorXd& residuals, const Eigen::MatrixXd& U,
                                  const std::vector<bool>& actives, const TrainingOptions& opts,
                                  int p_basis);

/**
 * Full training pipeline: scale inputs, choose a regression surface per
 * output, derive active coordinates, estimate residual hyperparameters and
 * perform the Bayes linear adjustment. Stage banners go to standard error.
 * Optional per-output discrepancies are attached to the priors.
 */
EmulatorSet emulator_from_data(const RunTable& runs, const std::vector<std::string>& output_names,
                               const ParameterSpace& space, const TrainingOptions& opts = {},
                               const std::map<std::string, Discrepancy>& discrepancies = {});

// Replicated runs collapsed to per-unique-input counts and sample moments.
// Inputs keep first-occurrence order; sample variances are zero for groups
// with a single replicate (those feed the mean stage only).
struct ReplicateAggregate {
  Eigen::MatrixXd inputs;
  Eigen::VectorXd counts;
  std::vector<std::string> output_names;
  std::map<std::string, Eigen::VectorXd> means;
  std::map<std::string, Eigen::VectorXd> variances;
};

ReplicateAggregate aggregate_replicates(const RunTable& runs,
                                        const std::vector<std::string>& output_names);

/**
 * Two-stage emulation of stochastic runs. Sample variances are emulated
 * first, with per-point noise kurtosis_multiplier * s^4 / (N-1); replicate
 * means are then emulated with per-point noise vhat(x)/N, vhat being the
 * variance emulator's adjusted expectation clamped at zero. Requires at least
 * 10 * d unique inputs with two or more replicates.
 */
EmulatorSet train_variance_from_aggregates(const ReplicateAggregate& agg,
                                           const std::vector<std::string>& output_names,
                                           const ParameterSpace& space,
                                           const TrainingOptions& opts = {});

EmulatorSet train_variance_emulators(const RunTable& runs,
                                     const std::vector<std::string>& output_names,
                                     const ParameterSpace& space, const TrainingOptions& opts = {});

}  // namespace nroy
