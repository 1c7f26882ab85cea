#include "nroy/emulator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nroy/common.hpp"

namespace nroy {

namespace {
constexpr Eigen::Index kBlock = 1024;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}
}  // namespace

Target Target::value(double val, double sigma) {
  if (!(sigma > 0.0)) fail(ErrorKind::schema, "target sd must be positive");
  Target t;
  t.kind = Kind::value;
  t.val = val;
  t.sigma = sigma;
  return t;
}

Target Target::interval(double lo, double hi) {
  if (!(lo < hi)) fail(ErrorKind::schema, "target interval must have positive width");
  Target t;
  t.kind = Kind::interval;
  t.lo = lo;
  t.hi = hi;
  return t;
}

std::pair<double, double> Target::moments() const {
  if (kind == Kind::value) return {val, sigma * sigma};
  const double mid = 0.5 * (lo + hi);
  const double sd = (hi - lo) / 6.0;
  return {mid, sd * sd};
}

bool Target::matched(double y) const {
  const auto [z, v] = moments();
  return std::abs(y - z) <= 3.0 * std::sqrt(v);
}

void EmulatorPrior::validate() const {
  const std::size_t d = space.dim();
  if (output_name.empty()) fail(ErrorKind::schema, "emulator output name is empty");
  if (basis.empty()) fail(ErrorKind::argument, "emulator needs at least one basis term");
  const auto p = static_cast<Eigen::Index>(basis.size());
  if (beta_mean.size() != p) fail(ErrorKind::argument, "coefficient mean length does not match basis");
  if (beta_var.rows() != p || beta_var.cols() != p)
    fail(ErrorKind::argument, "coefficient variance shape does not match basis");
  if (!(sigma_sq > 0.0)) fail(ErrorKind::argument, "prior variance sigma_sq must be positive");
  if (actives.size() != d) fail(ErrorKind::argument, "active mask length does not match space");
  corr.validate();
  for (const auto& b : basis) {
    if (b.i >= static_cast<int>(d) || b.j >= static_cast<int>(d))
      fail(ErrorKind::argument, "basis term refers to a parameter outside the space");
    if ((b.i >= 0 && !actives[static_cast<std::size_t>(b.i)]) ||
        (b.j >= 0 && !actives[static_cast<std::size_t>(b.j)]))
      fail(ErrorKind::argument, "basis term uses an inactive parameter");
  }
  if (disc.internal < 0.0 || disc.external < 0.0)
    fail(ErrorKind::argument, "discrepancy sds cannot be negative");
}

TrainedEmulator::TrainedEmulator(EmulatorPrior prior, Eigen::MatrixXd train_inputs,
                                 Eigen::VectorXd train_outputs, Eigen::VectorXd obs_noise_var)
    : prior_(std::move(prior)), X_(std::move(train_inputs)), y_(std::move(train_outputs)),
      noise_(std::move(obs_noise_var)) {
  prior_.validate();
  const Eigen::Index n = X_.rows();
  if (n < 1) fail(ErrorKind::argument, "adjustment needs at least one training run");
  if (y_.size() != n) fail(ErrorKind::argument, "training outputs do not match inputs in length");
  if (noise_.size() != 0 && noise_.size() != n)
    fail(ErrorKind::argument, "observation noise vector does not match the run count");
  if (noise_.size() != 0 && noise_.minCoeff() < 0.0)
    fail(ErrorKind::argument, "observation noise variances cannot be negative");

  U_ = prior_.space.scale_rows(X_, false);
  G_ = basis_matrix(prior_.basis, U_);
  const Eigen::MatrixXd R = self_kernel_matrix(prior_.corr, U_, prior_.actives);

  Eigen::MatrixXd vard = prior_.sigma_sq * R;
  vard.diagonal().array() += jitter_var();
  if (prior_.beta_var.squaredNorm() > 0.0) vard += G_ * prior_.beta_var * G_.transpose();
  if (noise_.size() != 0) vard.diagonal() += noise_;

  llt_.compute(vard);
  if (llt_.info() != Eigen::Success)
    fail(ErrorKind::conditioning,
         "training covariance for '" + prior_.output_name +
             "' could not be factorized; consider raising the nugget");
  resid_ = y_ - G_ * prior_.beta_mean;
  alpha_ = llt_.solve(resid_);
}

double TrainedEmulator::prior_expectation(const Eigen::RowVectorXd& x) const {
  const Eigen::RowVectorXd u = prior_.space.scale(x, allow_extrapolation_);
  double e = 0.0;
  for (std::size_t t = 0; t < prior_.basis.size(); ++t)
    e += prior_.beta_mean[static_cast<Eigen::Index>(t)] * prior_.basis[t].eval(u);
  return e;
}

double TrainedEmulator::prior_covariance(const Eigen::RowVectorXd& x, const Eigen::RowVectorXd& y) const {
  const Eigen::RowVectorXd ux = prior_.space.scale(x, allow_extrapolation_);
  const Eigen::RowVectorXd uy = prior_.space.scale(y, allow_extrapolation_);
  Eigen::VectorXd gx(prior_.basis.size()), gy(prior_.basis.size());
  for (std::size_t t = 0; t < prior_.basis.size(); ++t) {
    gx[static_cast<Eigen::Index>(t)] = prior_.basis[t].eval(ux);
    gy[static_cast<Eigen::Index>(t)] = prior_.basis[t].eval(uy);
  }
  double c = prior_.sigma_sq * kernel_value(prior_.corr, ux, uy, prior_.actives);
  if (prior_.beta_var.squaredNorm() > 0.0) c += gx.dot(prior_.beta_var * gy);
  return c;
}

Eigen::MatrixXd TrainedEmulator::cov_x_data(const Eigen::MatrixXd& Ublk, const Eigen::MatrixXd& Gblk) const {
  Eigen::MatrixXd cov = prior_.sigma_sq * cross_kernel_matrix(prior_.corr, Ublk, U_, prior_.actives);
  if (prior_.beta_var.squaredNorm() > 0.0) cov += Gblk * prior_.beta_var * G_.transpose();
  return cov;
}

void TrainedEmulator::evaluate_block(const Eigen::MatrixXd& Xblk, Eigen::VectorXd* exp_out,
                                     Eigen::VectorXd* var_out) const {
  const Eigen::MatrixXd Ublk = prior_.space.scale_rows(Xblk, allow_extrapolation_);
  const Eigen::MatrixXd Gblk = basis_matrix(prior_.basis, Ublk);
  const Eigen::MatrixXd cov = cov_x_data(Ublk, Gblk);
  if (exp_out) *exp_out = Gblk * prior_.beta_mean + cov * alpha_;
  if (var_out) {
    Eigen::VectorXd pv = Eigen::VectorXd::Constant(Xblk.rows(), prior_.sigma_sq);
    if (prior_.beta_var.squaredNorm() > 0.0)
      pv += ((Gblk * prior_.beta_var).array() * Gblk.array()).rowwise().sum().matrix();
    const Eigen::MatrixXd solved = llt_.solve(cov.transpose());
    Eigen::VectorXd v = pv - (cov.array() * solved.transpose().array()).rowwise().sum().matrix();
    const double slack = -1e-10 * std::max(1.0, pv.maxCoeff());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (v[i] < slack)
        fail(ErrorKind::numeric, "adjusted variance for '" + prior_.output_name +
                                     "' went significantly negative; the training matrix is too "
                                     "ill-conditioned, consider raising the nugget");
      if (v[i] < 0.0) v[i] = 0.0;
    }
    *var_out = std::move(v);
  }
}

Eigen::VectorXd TrainedEmulator::get_exp(const Eigen::MatrixXd& X) const {
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index lo = 0; lo < X.rows(); lo += kBlock) {
    const Eigen::Index len = std::min(kBlock, X.rows() - lo);
    Eigen::VectorXd e;
    evaluate_block(X.middleRows(lo, len), &e, nullptr);
    out.segment(lo, len) = e;
  }
  return out;
}

Eigen::VectorXd TrainedEmulator::get_var(const Eigen::MatrixXd& X) const {
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index lo = 0; lo < X.rows(); lo += kBlock) {
    const Eigen::Index len = std::min(kBlock, X.rows() - lo);
    Eigen::VectorXd v;
    evaluate_block(X.middleRows(lo, len), nullptr, &v);
    out.segment(lo, len) = v;
  }
  return out;
}

Eigen::MatrixXd TrainedEmulator::get_cov(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) const {
  Eigen::MatrixXd out(X.rows(), Y.rows());
  for (Eigen::Index xlo = 0; xlo < X.rows(); xlo += kBlock) {
    const Eigen::Index xlen = std::min(kBlock, X.rows() - xlo);
    const Eigen::MatrixXd Ux = prior_.space.scale_rows(X.middleRows(xlo, xlen), allow_extrapolation_);
    const Eigen::MatrixXd Gx = basis_matrix(prior_.basis, Ux);
    const Eigen::MatrixXd covx = cov_x_data(Ux, Gx);
    for (Eigen::Index ylo = 0; ylo < Y.rows(); ylo += kBlock) {
      const Eigen::Index ylen = std::min(kBlock, Y.rows() - ylo);
      const Eigen::MatrixXd Uy = prior_.space.scale_rows(Y.middleRows(ylo, ylen), allow_extrapolation_);
      const Eigen::MatrixXd Gy = basis_matrix(prior_.basis, Uy);
      const Eigen::MatrixXd covy = cov_x_data(Uy, Gy);

      Eigen::MatrixXd priorc = prior_.sigma_sq * cross_kernel_matrix(prior_.corr, Ux, Uy, prior_.actives);
      if (prior_.beta_var.squaredNorm() > 0.0) priorc += Gx * prior_.beta_var * Gy.transpose();
      out.block(xlo, ylo, xlen, ylen) = priorc - covx * llt_.solve(covy.transpose());
    }
  }
  return out;
}

Eigen::MatrixXd TrainedEmulator::get_cov(const Eigen::MatrixXd& X) const {
  Eigen::MatrixXd C = get_cov(X, X);
  C = 0.5 * (C + C.transpose()).eval();
  for (Eigen::Index i = 0; i < C.rows(); ++i) C(i, i) = std::max(C(i, i), 0.0);
  return C;
}

Eigen::MatrixXd TrainedEmulator::vard_inverse() const {
  const Eigen::Index n = X_.rows();
  return llt_.solve(Eigen::MatrixXd::Identity(n, n));
}

std::string TrainedEmulator::summary() const {
  const auto& p = prior_;
  std::ostringstream os;
  os << p.output_name << "\n";
  os << "  parameters:";
  for (std::size_t i = 0; i < p.space.dim(); ++i) {
    const auto [lo, hi] = p.space.range(i);
    os << (i ? "; " : " ") << p.space.names()[i] << " in [" << fmt(lo) << ", " << fmt(hi) << "]";
  }
  os << "\n  basis: " << basis_names(p.basis, p.space.names());
  os << "\n  active:";
  bool any = false;
  for (std::size_t i = 0; i < p.actives.size(); ++i)
    if (p.actives[i]) {
      os << (any ? "; " : " ") << p.space.names()[i];
      any = true;
    }
  if (!any) os << " none";
  os << "\n  coefficient expectation:";
  for (Eigen::Index i = 0; i < p.beta_mean.size(); ++i) os << (i ? ", " : " ") << fmt(p.beta_mean[i]);
  if (p.beta_var.squaredNorm() == 0.0) {
    os << "\n  coefficient variance: zero (coefficients treated as known)";
  } else {
    os << "\n  coefficient variance diagonal:";
    for (Eigen::Index i = 0; i < p.beta_var.rows(); ++i) os << (i ? ", " : " ") << fmt(p.beta_var(i, i));
  }
  os << "\n  residual variance: " << fmt(p.sigma_sq);
  os << "\n  correlation: " << kernel_name(p.corr.kind) << ", theta " << fmt(p.corr.theta);
  if (p.corr.kind == KernelKind::matern) os << ", nu " << fmt(p.corr.nu);
  if (p.corr.kind == KernelKind::rat_quad) os << ", alpha " << fmt(p.corr.alpha);
  os << ", nugget " << fmt(p.corr.nugget);
  os << "\n  discrepancy sd (internal, external): " << fmt(p.disc.internal) << ", "
     << fmt(p.disc.external);
  os << "\n  adjusted on " << n_train() << " runs";
  if (noise_.size() != 0) os << " with observation noise";
  for (const auto& f : flags_) os << "\n  note: " << f;
  os << "\n";
  return os.str();
}

const ParameterSpace& EmulatorSet::space() const {
  if (names.empty()) fail(ErrorKind::argument, "emulator set is empty");
  return expectation.at(names.front()).prior().space;
}

const TrainedEmulator& EmulatorSet::at(const std::string& name) const {
  auto it = expectation.find(name);
  if (it == expectation.end()) fail(ErrorKind::schema, "no emulator for output '" + name + "'");
  return it->second;
}

Eigen::VectorXd implausibility(const TrainedEmulator& em, const Eigen::MatrixXd& X, const Target& t) {
  const auto [z, var_e] = t.moments();
  const double extra = var_e + em.prior().disc.var();
  const Eigen::VectorXd e = em.get_exp(X);
  const Eigen::VectorXd v = em.get_var(X);
  return ((e.array() - z).abs() / (v.array() + extra).sqrt()).matrix();
}

Eigen::VectorXd simulator_implausibility(const Eigen::VectorXd& y, const Target& t, const Discrepancy& disc) {
  const auto [z, var_e] = t.moments();
  const double denom = std::sqrt(var_e + disc.var());
  return ((y.array() - z).abs() / denom).matrix();
}

Eigen::VectorXd nth_implausibility(const EmulatorSet& ems, const Eigen::MatrixXd& X,
                                   const TargetMap& targets, int nth) {
  const int m = static_cast<int>(ems.names.size());
  if (m == 0) fail(ErrorKind::argument, "emulator set is empty");
  if (nth < 1 || nth > m)
    fail(ErrorKind::argument, "implausibility rank must lie between 1 and the output count");
  Eigen::MatrixXd I(X.rows(), m);
  for (int k = 0; k < m; ++k) {
    const auto& name = ems.names[static_cast<std::size_t>(k)];
    auto it = targets.find(name);
    if (it == targets.end()) fail(ErrorKind::schema, "no target for output '" + name + "'");
    I.col(k) = implausibility(ems.at(name), X, it->second);
  }
  Eigen::VectorXd out(X.rows());
  std::vector<double> row(static_cast<std::size_t>(m));
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    for (int k = 0; k < m; ++k) row[static_cast<std::size_t>(k)] = I(r, k);
    std::nth_element(row.begin(), row.begin() + (nth - 1), row.end(), std::greater<double>());
    out[r] = row[static_cast<std::size_t>(nth - 1)];
  }
  return out;
}

}  // namespace nroy
