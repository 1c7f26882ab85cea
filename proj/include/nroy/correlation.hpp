#pragma once

#include <Eigen/Dense>
#include <vector>

namespace nroy {

enum class KernelKind { exp_sq, matern, orn_uhl, rat_quad };

const char* kernel_name(KernelKind k);
KernelKind kernel_from_name(const std::string& name);

/**
 * Stationary correlation over the scaled parameter cube.
 *
 * The smooth part c acts on the active coordinates only and is isotropic
 * with a single length-scale theta. The nugget mixes in a white component:
 *
 *   rho(u, v) = (1 - nugget) * c(u_A, v_A) + nugget * [u == v]
 *
 * where the indicator compares every coordinate, active or not, so points
 * that differ only in inactive directions decorrelate by the nugget amount.
 * With no active coordinates c is identically 1.
 */
struct Correlator {
  KernelKind kind = KernelKind::exp_sq;
  double theta = 0.1;
  double nu = 2.5;     // matern smoothness, one of 1/2, 3/2, 5/2
  double alpha = 2.0;  // rational quadratic mixture index
  double nugget = 0.0;

  void validate() const;

  /** Correlation of the smooth part at a given active-coordinate distance. */
  double base(double dist) const;
};

/** rho(u, v) for already-scaled points. */
double kernel_value(const Correlator& c, const Eigen::RowVectorXd& u, const Eigen::RowVectorXd& v,
                    const std::vector<bool>& actives);

/**
 * Cross-correlation matrix between two scaled point sets, row i of U against
 * row j of V. Exact coordinate equality is detected so replicated points
 * keep full correlation 1.
 */
Eigen::MatrixXd cross_kernel_matrix(const Correlator& c, const Eigen::MatrixXd& U,
                                    const Eigen::MatrixXd& V, const std::vector<bool>& actives);

/**
 * Self-correlation matrix of one scaled point set; symmetric with unit
 * diagonal. Positive semi-definite up to roundoff; factorizations add their
 * own diagonal jitter.
 */
Eigen::MatrixXd self_kernel_matrix(const Correlator& c, const Eigen::MatrixXd& U,
                                   const std::vector<bool>& actives);

}  // namespace nroy
