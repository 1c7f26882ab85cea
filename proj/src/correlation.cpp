#include "nroy/correlation.hpp"

#include <cmath>
#include <string>

#include "nroy/common.hpp"

namespace nroy {

const char* kernel_name(KernelKind k) {
  switch (k) {
    case KernelKind::exp_sq: return "exp_sq";
    case KernelKind::matern: return "matern";
    case KernelKind::orn_uhl: return "orn_uhl";
    case KernelKind::rat_quad: return "rat_quad";
  }
  return "?";
}

KernelKind kernel_from_name(const std::string& name) {
  if (name == "exp_sq") return KernelKind::exp_sq;
  if (name == "matern") return KernelKind::matern;
  if (name == "orn_uhl") return KernelKind::orn_uhl;
  if (name == "rat_quad") return KernelKind::rat_quad;
  fail(ErrorKind::schema, "unknown kernel '" + name + "'");
}

void Correlator::validate() const {
  if (!(theta > 0.0)) fail(ErrorKind::argument, "correlation length theta must be positive");
  if (!(nugget >= 0.0 && nugget <= 1.0)) fail(ErrorKind::argument, "nugget must lie in [0, 1]");
  if (kind == KernelKind::matern && nu != 0.5 && nu != 1.5 && nu != 2.5)
    fail(ErrorKind::argument, "matern smoothness must be one of 1/2, 3/2, 5/2");
  if (kind == KernelKind::rat_quad && !(alpha > 0.0))
    fail(ErrorKind::argument, "rational quadratic index alpha must be positive");
}

double Correlator::base(double d) const {
  const double r = d / theta;
  switch (kind) {
    case KernelKind::exp_sq:
      return std::exp(-r * r);
    case KernelKind::orn_uhl:
      return std::exp(-r);
    case KernelKind::matern: {
      if (nu == 0.5) return std::exp(-r);
      if (nu == 1.5) {
        const double s = std::sqrt(3.0) * r;
        return (1.0 + s) * std::exp(-s);
      }
      const double s = std::sqrt(5.0) * r;
      return (1.0 + s + s * s / 3.0) * std::exp(-s);
    }
    case KernelKind::rat_quad:
      return std::pow(1.0 + r * r / (2.0 * alpha), -alpha);
  }
  return 0.0;
}

namespace {

bool rows_equal(const Eigen::MatrixXd& U, Eigen::Index i, const Eigen::MatrixXd& V, Eigen::Index j) {
  for (Eigen::Index c = 0; c < U.cols(); ++c)
    if (U(i, c) != V(j, c)) return false;
  return true;
}

// squared distance over active coordinates only
Eigen::MatrixXd active_sq_dist(const Eigen::MatrixXd& U, const Eigen::MatrixXd& V,
                               const std::vector<bool>& actives) {
  Eigen::MatrixXd D2 = Eigen::MatrixXd::Zero(U.rows(), V.rows());
  for (Eigen::Index c = 0; c < U.cols(); ++c) {
    if (!actives[static_cast<std::size_t>(c)]) continue;
    const auto ucol = U.col(c);
    const auto vcol = V.col(c);
    for (Eigen::Index j = 0; j < V.rows(); ++j)
      D2.col(j).array() += (ucol.array() - vcol[j]).square();
  }
  return D2;
}

}  // namespace

double kernel_value(const Correlator& c, const Eigen::RowVectorXd& u, const Eigen::RowVectorXd& v,
                    const std::vector<bool>& actives) {
  if (u.size() != v.size() || static_cast<std::size_t>(u.size()) != actives.size())
    fail(ErrorKind::argument, "kernel points and active mask disagree in dimension");
  double d2 = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i)
    if (actives[static_cast<std::size_t>(i)]) {
      const double diff = u[i] - v[i];
      d2 += diff * diff;
    }
  bool same = true;
  for (Eigen::Index i = 0; i < u.size() && same; ++i) same = u[i] == v[i];
  if (same) return 1.0;
  const double smooth = d2 == 0.0 ? 1.0 : c.base(std::sqrt(d2));
  return (1.0 - c.nugget) * smooth;
}

Eigen::MatrixXd cross_kernel_matrix(const Correlator& c, const Eigen::MatrixXd& U,
                                    const Eigen::MatrixXd& V, const std::vector<bool>& actives) {
  c.validate();
  if (U.cols() != V.cols() || static_cast<std::size_t>(U.cols()) != actives.size())
    fail(ErrorKind::argument, "kernel point sets and active mask disagree in dimension");
  const Eigen::MatrixXd D2 = active_sq_dist(U, V, actives);
  const double t2 = c.theta * c.theta;
  const double w = 1.0 - c.nugget;
  Eigen::MatrixXd K(D2.rows(), D2.cols());
  switch (c.kind) {
    case KernelKind::exp_sq:
      K = w * (-D2.array() / t2).exp();
      break;
    case KernelKind::orn_uhl:
      K = w * (-D2.array().sqrt() / c.theta).exp();
      break;
    case KernelKind::matern: {
      if (c.nu == 0.5) {
        K = w * (-D2.array().sqrt() / c.theta).exp();
      } else if (c.nu == 1.5) {
        const auto s = std::sqrt(3.0) * D2.array().sqrt() / c.theta;
        K = w * (1.0 + s) * (-s).exp();
      } else {
        const auto s = std::sqrt(5.0) * D2.array().sqrt() / c.theta;
        K = w * (1.0 + s + s.square() / 3.0) * (-s).exp();
      }
      break;
    }
    case KernelKind::rat_quad:
      K = w * (1.0 + D2.array() / (2.0 * c.alpha * t2)).pow(-c.alpha);
      break;
  }
  // exact-match fixups: identical points correlate fully regardless of nugget
  if (c.nugget > 0.0) {
    for (Eigen::Index i = 0; i < U.rows(); ++i)
      for (Eigen::Index j = 0; j < V.rows(); ++j)
        if (D2(i, j) == 0.0 && rows_equal(U, i, V, j)) K(i, j) = 1.0;
  }
  return K;
}

Eigen::MatrixXd self_kernel_matrix(const Correlator& c, const Eigen::MatrixXd& U,
                                   const std::vector<bool>& actives) {
  Eigen::MatrixXd K = cross_kernel_matrix(c, U, U, actives);
  K = 0.5 * (K + K.transpose()).eval();
  K.diagonal().setOnes();
  return K;
}

}  // namespace nroy
