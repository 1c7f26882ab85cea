#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nroy/basis.hpp"
#include "nroy/correlation.hpp"
#include "nroy/param_space.hpp"

namespace nroy {

// Structural model discrepancy, split into an internal and an external
// standard deviation; both enter implausibility denominators via disc_var.
struct Discrepancy {
  double internal = 0.0;
  double external = 0.0;
  double var() const { return internal * internal + external * external; }
};

// Observation a history match works towards: either a value with its
// observation error sd, or a plain interval.
struct Target {
  enum class Kind { value, interval };
  Kind kind = Kind::value;
  double val = 0.0;
  double sigma = 0.0;
  double lo = 0.0;
  double hi = 0.0;

  static Target value(double val, double sigma);
  static Target interval(double lo, double hi);

  // (mean, variance) as used in implausibility: an interval maps to its
  // midpoint with sd a sixth of its width, so the 3-sigma band is the
  // interval itself.
  std::pair<double, double> moments() const;

  // whether a simulator output matches the target at 3 sigma
  bool matched(double y) const;
};

using TargetMap = std::map<std::string, Target>;

// Second-order prior for one output: regression surface plus a correlated
// residual process over the active inputs and a nugget over the rest.
struct EmulatorPrior {
  std::string output_name;
  ParameterSpace space;
  std::vector<BasisTerm> basis;
  Eigen::VectorXd beta_mean;
  Eigen::MatrixXd beta_var;  // zero matrix when coefficients are treated as known
  double sigma_sq = 1.0;
  Correlator corr;
  std::vector<bool> actives;
  Discrepancy disc;

  void validate() const;
};

/**
 * Emulator adjusted on training runs by the Bayes linear update
 *
 *   E_D[f(x)]   = E[f(x)] + Cov[f(x), D] Var[D]^-1 (D - E[D])
 *   Var_D[f(x)] = Var[f(x)] - Cov[f(x), D] Var[D]^-1 Cov[D, f(x)]
 *
 * Var[D] carries the regression, residual-process and observation-noise
 * contributions plus a relative diagonal jitter. The factorization and the
 * solved residual are cached at construction; predictions then cost one
 * cross-covariance block per batch. Batches are processed in fixed-size
 * blocks to bound memory.
 */
class TrainedEmulator {
public:
  TrainedEmulator(EmulatorPrior prior, Eigen::MatrixXd train_inputs, Eigen::VectorXd train_outputs,
                  Eigen::VectorXd obs_noise_var = Eigen::VectorXd());

  const EmulatorPrior& prior() const { return prior_; }
  const Eigen::MatrixXd& train_inputs() const { return X_; }
  const Eigen::VectorXd& train_outputs() const { return y_; }
  const Eigen::VectorXd& obs_noise_var() const { return noise_; }
  std::size_t n_train() const { return static_cast<std::size_t>(X_.rows()); }

  // prior moments at scaled-unit-free natural points
  double prior_expectation(const Eigen::RowVectorXd& x) const;
  double prior_covariance(const Eigen::RowVectorXd& x, const Eigen::RowVectorXd& y) const;

  // adjusted moments; inputs in natural units, rows are points
  Eigen::VectorXd get_exp(const Eigen::MatrixXd& X) const;
  Eigen::VectorXd get_var(const Eigen::MatrixXd& X) const;
  Eigen::MatrixXd get_cov(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) const;
  Eigen::MatrixXd get_cov(const Eigen::MatrixXd& X) const;

  // points outside the trained box raise domain errors unless enabled
  void set_allow_extrapolation(bool allow) { allow_extrapolation_ = allow; }
  bool allow_extrapolation() const { return allow_extrapolation_; }

  std::vector<std::string>& flags() { return flags_; }
  const std::vector<std::string>& flags() const { return flags_; }

  std::string summary() const;

  // advanced accessors used by the diagnostics machinery
  const Eigen::VectorXd& centred_data() const { return resid_; }  // D - E[D]
  Eigen::VectorXd prior_mean_at_train() const { return G_ * prior_.beta_mean; }
  Eigen::MatrixXd vard_inverse() const;
  double jitter_var() const { return 1e-10 * prior_.sigma_sq; }

private:
  void evaluate_block(const Eigen::MatrixXd& Xblk, Eigen::VectorXd* exp_out, Eigen::VectorXd* var_out) const;
  Eigen::MatrixXd cov_x_data(const Eigen::MatrixXd& Ublk, const Eigen::MatrixXd& Gblk) const;

  EmulatorPrior prior_;
  Eigen::MatrixXd X_;      // natural units
  Eigen::VectorXd y_;
  Eigen::VectorXd noise_;  // per-run observation noise variance, may be empty
  bool allow_extrapolation_ = false;
  std::vector<std::string> flags_;

  // cache
  Eigen::MatrixXd U_;  // scaled training inputs
  Eigen::MatrixXd G_;  // basis at training inputs
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;  // Var[D]^-1 (D - E[D])
  Eigen::VectorXd resid_;
};

// Emulators for a collection of outputs. In variance mode the expectation
// emulators model replicate means and are backed by variance emulators for
// the replicate noise level.
struct EmulatorSet {
  bool variance_mode = false;
  std::vector<std::string> names;
  std::map<std::string, TrainedEmulator> expectation;
  std::map<std::string, TrainedEmulator> variance;

  const ParameterSpace& space() const;
  const TrainedEmulator& at(const std::string& name) const;
  std::size_t size() const { return names.size(); }
};

/** |E_D[f(x)] - z| / sqrt(Var_D[f(x)] + Var[e] + Var[eps]) per row of X. */
Eigen::VectorXd implausibility(const TrainedEmulator& em, const Eigen::MatrixXd& X, const Target& t);

/** Implausibility of raw simulator output against a target (no emulator variance). */
Eigen::VectorXd simulator_implausibility(const Eigen::VectorXd& y, const Target& t, const Discrepancy& disc);

/**
 * n-th largest implausibility across the set's outputs, n = 1 giving the
 * usual maximum. Every named output needs a target. In variance mode the
 * expectation emulators drive the measure.
 */
Eigen::VectorXd nth_implausibility(const EmulatorSet& ems, const Eigen::MatrixXd& X,
                                   const TargetMap& targets, int nth = 1);

}  // namespace nroy
