#pragma once

// Shared helpers for unit and acceptance tests.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "nroy/emulator.hpp"
#include "nroy/rng.hpp"

namespace testsup {

struct Instance {
  nroy::EmulatorPrior prior;
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  Eigen::VectorXd noise;  // zero length when noiseless
};

// Random small emulation problem: dimension, basis, kernel, hyperparameters,
// coefficient uncertainty and observation noise all drawn at random.
inline Instance random_instance(nroy::Rng& rng, int max_n = 8, int max_d = 3) {
  using namespace nroy;
  Instance inst;
  const int d = 1 + static_cast<int>(rng.index(static_cast<std::uint64_t>(max_d)));
  std::vector<std::string> names;
  std::vector<std::pair<double, double>> ranges;
  for (int i = 0; i < d; ++i) {
    names.push_back("x" + std::to_string(i));
    const double lo = rng.uniform(-2.0, 1.0);
    ranges.emplace_back(lo, lo + rng.uniform(0.5, 3.0));
  }
  ParameterSpace space(names, ranges);

  std::vector<BasisTerm> basis{BasisTerm::constant()};
  for (int i = 0; i < d; ++i) {
    if (rng.uniform() < 0.7) basis.push_back(BasisTerm::linear(i));
    if (rng.uniform() < 0.3) basis.push_back(BasisTerm::quadratic(i));
  }
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j)
      if (rng.uniform() < 0.2) basis.push_back(BasisTerm::interaction(i, j));

  auto actives = derive_actives(basis, static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i)
    if (!actives[static_cast<std::size_t>(i)] && rng.uniform() < 0.5)
      actives[static_cast<std::size_t>(i)] = true;

  const auto p = static_cast<Eigen::Index>(basis.size());
  Eigen::VectorXd beta(p);
  for (Eigen::Index k = 0; k < p; ++k) beta[k] = rng.uniform(-3.0, 3.0);
  Eigen::MatrixXd beta_var = Eigen::MatrixXd::Zero(p, p);
  if (rng.uniform() < 0.5) {
    Eigen::MatrixXd A(p, p);
    for (Eigen::Index r = 0; r < p; ++r)
      for (Eigen::Index c = 0; c < p; ++c) A(r, c) = rng.uniform(-0.5, 0.5);
    beta_var = A * A.transpose();
  }

  Correlator corr;
  const double kind_pick = rng.uniform();
  if (kind_pick < 0.25) corr.kind = KernelKind::exp_sq;
  else if (kind_pick < 0.5) corr.kind = KernelKind::matern;
  else if (kind_pick < 0.75) corr.kind = KernelKind::orn_uhl;
  else corr.kind = KernelKind::rat_quad;
  corr.theta = rng.uniform(0.4, 1.6);
  corr.nu = 0.5 + static_cast<double>(rng.index(3));
  corr.alpha = 1.0 + static_cast<double>(rng.index(3));
  corr.nugget = rng.uniform() < 0.4 ? 0.0 : rng.uniform(0.01, 0.3);

  inst.prior.output_name = "y";
  inst.prior.space = space;
  inst.prior.basis = basis;
  inst.prior.beta_mean = beta;
  inst.prior.beta_var = beta_var;
  inst.prior.sigma_sq = rng.uniform(0.5, 10.0);
  inst.prior.corr = corr;
  inst.prior.actives = actives;

  const int n = 1 + static_cast<int>(rng.index(static_cast<std::uint64_t>(max_n)));
  inst.X.resize(n, d);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < d; ++c)
      inst.X(r, c) = rng.uniform(ranges[static_cast<std::size_t>(c)].first,
                                 ranges[static_cast<std::size_t>(c)].second);
  const bool with_noise = rng.uniform() < 0.5;
  if (with_noise) {
    inst.noise.resize(n);
    for (int r = 0; r < n; ++r) inst.noise[r] = rng.uniform(0.01, 0.5);
    if (n >= 2 && rng.uniform() < 0.3) inst.X.row(n - 1) = inst.X.row(0);  // a replicate
  }
  inst.y.resize(n);
  for (int r = 0; r < n; ++r) inst.y[r] = rng.uniform(-5.0, 5.0);
  return inst;
}

// Condition number of the training covariance, assembled densely. Strict
// route-equality tolerances only make sense on well-posed instances; both
// algebraic routes lose log10(cond) digits to roundoff.
inline double vard_condition(const Instance& inst) {
  const Eigen::Index n = inst.X.rows();
  Eigen::MatrixXd vard(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::RowVectorXd ui = inst.prior.space.scale(inst.X.row(i), true);
      const Eigen::RowVectorXd uj = inst.prior.space.scale(inst.X.row(j), true);
      double c = inst.prior.sigma_sq * nroy::kernel_value(inst.prior.corr, ui, uj, inst.prior.actives);
      for (std::size_t s = 0; s < inst.prior.basis.size(); ++s)
        for (std::size_t t = 0; t < inst.prior.basis.size(); ++t)
          c += inst.prior.basis[s].eval(ui) *
               inst.prior.beta_var(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) *
               inst.prior.basis[t].eval(uj);
      vard(i, j) = c;
    }
  vard.diagonal().array() += 1e-10 * inst.prior.sigma_sq;
  if (inst.noise.size() != 0) vard.diagonal() += inst.noise;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(vard);
  const auto& sv = svd.singularValues();
  return sv[0] / sv[sv.size() - 1];
}

inline Instance well_posed_instance(nroy::Rng& rng, int max_n = 8, int max_d = 3,
                                    double max_cond = 1e6) {
  for (;;) {
    Instance inst = random_instance(rng, max_n, max_d);
    if (vard_condition(inst) <= max_cond) return inst;
  }
}

inline Eigen::MatrixXd random_points_in(const nroy::ParameterSpace& space, int count, nroy::Rng& rng) {
  Eigen::MatrixXd P(count, static_cast<Eigen::Index>(space.dim()));
  for (int r = 0; r < count; ++r)
    for (std::size_t c = 0; c < space.dim(); ++c) {
      const auto [lo, hi] = space.range(c);
      P(r, static_cast<Eigen::Index>(c)) = rng.uniform(lo, hi);
    }
  return P;
}

}  // namespace testsup
