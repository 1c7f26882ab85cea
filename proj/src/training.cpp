#include "nroy/training.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iostream>
#include <limits>

#include "nroy/common.hpp"

namespace nroy {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Ols {
  Eigen::VectorXd beta;
  Eigen::VectorXd resid;
  double rss = 0.0;
};

Ols least_squares(const std::vector<BasisTerm>& basis, const Eigen::MatrixXd& U,
                  const Eigen::VectorXd& y) {
  const Eigen::MatrixXd G = basis_matrix(basis, U);
  Ols out;
  out.beta = G.colPivHouseholderQr().solve(y);
  out.resid = y - G * out.beta;
  out.rss = out.resid.squaredNorm();
  return out;
}

// Corrected Akaike criterion; k counts the coefficients plus the noise
// variance. Models without enough runs for the correction are ruled out.
// rss_floor keeps numerically exact fits from trading infinitesimal residual
// changes against the complexity penalty.
double aicc(double rss, Eigen::Index n, std::size_t p, double rss_floor) {
  const double k = static_cast<double>(p) + 1.0;
  const double nn = static_cast<double>(n);
  if (nn - k - 1.0 <= 0.0) return kInf;
  const double ms = std::max(rss, rss_floor) / nn;
  return nn * std::log(std::max(ms, 1e-300)) + 2.0 * k + 2.0 * k * (k + 1.0) / (nn - k - 1.0);
}

std::vector<BasisTerm> candidate_terms(Eigen::Index d) {
  std::vector<BasisTerm> cand;
  cand.push_back(BasisTerm::constant());
  for (int i = 0; i < d; ++i) cand.push_back(BasisTerm::linear(i));
  for (int i = 0; i < d; ++i) cand.push_back(BasisTerm::quadratic(i));
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) cand.push_back(BasisTerm::interaction(i, j));
  return cand;
}

std::vector<BasisTerm> pick(const std::vector<BasisTerm>& cand, const std::vector<int>& idx) {
  std::vector<BasisTerm> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(cand[static_cast<std::size_t>(i)]);
  return out;
}

// Re-throws any stored exception, earliest index first so the reported
// failure does not depend on the worker count.
void run_indexed(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  parallel_for(n, workers, [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

[[noreturn]] void rethrow_for_output(const std::string& name) {
  try {
    throw;
  } catch (const Error& e) {
    fail(e.kind(), "output '" + name + "': " + e.what());
  }
}

double golden_section(double lo, double hi, const std::function<double(double)>& f, int iters) {
  constexpr double invphi = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < iters; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = f(x2);
    }
  }
  return f1 <= f2 ? x1 : x2;
}

std::vector<double> geom_grid(double lo, double hi, int count) {
  std::vector<double> g(static_cast<std::size_t>(count));
  const double llo = std::log(lo), lhi = std::log(hi);
  for (int i = 0; i < count; ++i)
    g[static_cast<std::size_t>(i)] = std::exp(llo + (lhi - llo) * i / (count - 1.0));
  return g;
}

}  // namespace

void TrainingOptions::validate() const {
  if (!(variance_explained_threshold >= 0.0 && variance_explained_threshold < 1.0))
    fail(ErrorKind::argument, "variance_explained_threshold must lie in [0, 1)");
  if (!(theta_lower > 0.0 && theta_lower < theta_upper))
    fail(ErrorKind::argument, "correlation length bounds must be ordered and positive");
  if (!(nugget_lower > 0.0 && nugget_lower < nugget_upper && nugget_upper < 1.0))
    fail(ErrorKind::argument, "nugget bounds must satisfy 0 < lower < upper < 1");
  if (!(nugget_barrier > 0.0 && nugget_barrier_log_sd > 0.0))
    fail(ErrorKind::argument, "nugget barrier must have positive location and log-scale spread");
  if (!(kurtosis_multiplier > 0.0))
    fail(ErrorKind::argument, "kurtosis multiplier must be positive");
  if (workers < 1) fail(ErrorKind::argument, "worker count must be at least 1");
  Correlator probe{kernel, theta_lower, nu, alpha, nugget_lower};
  probe.validate();
}

RegressionFit fit_regression(const Eigen::MatrixXd& U, const Eigen::VectorXd& y,
                             const TrainingOptions& opts) {
  opts.validate();
  const Eigen::Index n = U.rows(), d = U.cols();
  if (y.size() != n) fail(ErrorKind::argument, "output length does not match the input rows");
  if (n < d + 2)
    fail(ErrorKind::insufficient_data,
         "regression needs at least " + std::to_string(d + 2) + " runs for " + std::to_string(d) +
             " parameters; have " + std::to_string(n));

  const std::vector<BasisTerm> cand = candidate_terms(d);
  const double ymean = y.mean();
  const double tss = (y.array() - ymean).square().sum();
  const double rss_floor = 1e-20 * std::max({tss, y.squaredNorm(), 1e-280});

  auto model_aicc = [&](const std::vector<int>& idx) {
    return aicc(least_squares(pick(cand, idx), U, y).rss, n, idx.size(), rss_floor);
  };

  std::vector<int> current;
  if (n < static_cast<Eigen::Index>(cand.size())) {
    // forward selection from the intercept
    current = {0};
    std::vector<char> used(cand.size(), 0);
    used[0] = 1;
    double cur = model_aicc(current);
    for (;;) {
      int best_term = -1;
      double best = cur;
      for (std::size_t c = 1; c < cand.size(); ++c) {
        if (used[c]) continue;
        std::vector<int> trial = current;
        trial.push_back(static_cast<int>(c));
        const double a = model_aicc(trial);
        if (a < best - 1e-9 * (1.0 + std::abs(best))) {
          best = a;
          best_term = static_cast<int>(c);
        }
      }
      if (best_term < 0) break;
      current.push_back(best_term);
      used[static_cast<std::size_t>(best_term)] = 1;
      cur = best;
    }
    std::sort(current.begin(), current.end());
  } else {
    // backward elimination from the full candidate set; first make room for
    // the criterion's small-sample correction
    current.resize(cand.size());
    for (std::size_t c = 0; c < cand.size(); ++c) current[c] = static_cast<int>(c);
    while (static_cast<Eigen::Index>(current.size()) > n - 3) {
      std::size_t drop = 1;
      double best_rss = kInf;
      for (std::size_t t = 1; t < current.size(); ++t) {
        std::vector<int> trial = current;
        trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(t));
        const double rss = least_squares(pick(cand, trial), U, y).rss;
        if (rss < best_rss) {
          best_rss = rss;
          drop = t;
        }
      }
      current.erase(current.begin() + static_cast<std::ptrdiff_t>(drop));
    }
    double cur = model_aicc(current);
    for (;;) {
      int drop_at = -1;
      double best = cur;
      for (std::size_t t = 1; t < current.size(); ++t) {
        std::vector<int> trial = current;
        trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(t));
        const double a = model_aicc(trial);
        if (a < best - 1e-9 * (1.0 + std::abs(best))) {
          best = a;
          drop_at = static_cast<int>(t);
        }
      }
      if (drop_at < 0) break;
      current.erase(current.begin() + drop_at);
      cur = best;
    }
  }

  // prune terms whose incremental share of the total output variance is
  // below the threshold, weakest first
  if (tss > 0.0) {
    for (;;) {
      if (current.size() <= 1) break;
      const double rss_now = least_squares(pick(cand, current), U, y).rss;
      double weakest_ve = kInf;
      std::size_t weakest = 0;
      for (std::size_t t = 1; t < current.size(); ++t) {
        std::vector<int> trial = current;
        trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(t));
        const double rss_without = least_squares(pick(cand, trial), U, y).rss;
        const double ve = std::max(0.0, (rss_without - rss_now) / tss);
        if (ve < weakest_ve) {
          weakest_ve = ve;
          weakest = t;
        }
      }
      if (weakest_ve < opts.variance_explained_threshold)
        current.erase(current.begin() + static_cast<std::ptrdiff_t>(weakest));
      else
        break;
    }
  }

  RegressionFit fit;
  fit.basis = pick(cand, current);
  const Eigen::MatrixXd G = basis_matrix(fit.basis, U);
  const Ols final_fit = least_squares(fit.basis, U, y);
  fit.beta = final_fit.beta;
  fit.residuals = final_fit.resid;
  const Eigen::Index p = static_cast<Eigen::Index>(fit.basis.size());
  fit.resid_var = final_fit.rss / static_cast<double>(n - p);
  fit.total_var = n > 1 ? tss / static_cast<double>(n - 1) : 0.0;
  const Eigen::MatrixXd gtg = G.transpose() * G;
  fit.beta_cov = fit.resid_var * gtg.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  return fit;
}

RegressionFit fit_regression(const RunTable& runs, const std::string& output,
                             const ParameterSpace& space, const TrainingOptions& opts) {
  const RunTable aligned = runs.aligned_to(space);
  return fit_regression(space.scale_rows(aligned.inputs), aligned.output(output), opts);
}

HyperFit estimate_hyperparameters(const Eigen::VectorXd& residuals, const Eigen::MatrixXd& U,
                                  const std::vector<bool>& actives, const TrainingOptions& opts,
                                  int p_basis) {
  opts.validate();
  const Eigen::Index n = residuals.size();
  if (U.rows() != n) fail(ErrorKind::argument, "residual length does not match the input rows");
  if (n < 4) fail(ErrorKind::insufficient_data, "hyperparameter estimation needs at least 4 runs");
  const double dof = static_cast<double>(n - p_basis);
  if (dof <= 0.0) fail(ErrorKind::argument, "basis size must be below the run count");

  HyperFit out;
  out.theta = std::sqrt(opts.theta_lower * opts.theta_upper);
  out.nugget = std::clamp(opts.nugget_barrier, opts.nugget_lower, opts.nugget_upper);
  const double s0 = residuals.squaredNorm() / dof;
  if (s0 < 1e-300) {
    // the regression surface is numerically exact; keep a token residual
    // process so downstream variance algebra stays positive definite
    out.sigma_sq = 1e-12;
    return out;
  }

  double best_s2 = s0;
  auto objective = [&](double theta, double delta, double* s2_out) {
    Correlator c{opts.kernel, theta, opts.nu, opts.alpha, delta};
    Eigen::MatrixXd R = self_kernel_matrix(c, U, actives);
    R.diagonal().array() += 1e-10;
    Eigen::LLT<Eigen::MatrixXd> llt(R);
    if (llt.info() != Eigen::Success) return kInf;
    double logdet = 0.0;
    const auto& L = llt.matrixLLT();
    for (Eigen::Index i = 0; i < n; ++i) logdet += 2.0 * std::log(L(i, i));
    const double quad = residuals.dot(llt.solve(residuals));
    if (!(quad > 0.0)) return kInf;
    const double s2 = quad / dof;
    if (s2_out) *s2_out = s2;
    const double z =
        std::min(0.0, std::log(delta / opts.nugget_barrier)) / opts.nugget_barrier_log_sd;
    return static_cast<double>(n) * std::log(s2) + logdet + z * z;
  };

  const std::vector<double> theta_grid = geom_grid(opts.theta_lower, opts.theta_upper, 10);
  const std::vector<double> delta_grid = geom_grid(opts.nugget_lower, opts.nugget_upper, 8);

  struct Point {
    double theta, delta, value;
  };
  std::vector<Point> grid;
  grid.reserve(theta_grid.size() * delta_grid.size());
  for (double th : theta_grid)
    for (double de : delta_grid) grid.push_back({th, de, objective(th, de, nullptr)});
  std::sort(grid.begin(), grid.end(), [](const Point& a, const Point& b) {
    if (a.value != b.value) return a.value < b.value;
    if (a.theta != b.theta) return a.theta < b.theta;
    return a.delta < b.delta;
  });
  if (!std::isfinite(grid.front().value))
    fail(ErrorKind::conditioning, "correlation likelihood is degenerate over the whole search box");

  // refine the three best starts by coordinate-wise golden section in log
  // units, bracketing each coordinate by its grid neighbours
  auto refine = [&](Point p, int sweeps) {
    for (int sweep = 0; sweep < sweeps; ++sweep) {
      const double th_step = std::log(theta_grid[1] / theta_grid[0]);
      double lo = std::max(std::log(opts.theta_lower), std::log(p.theta) - th_step);
      double hi = std::min(std::log(opts.theta_upper), std::log(p.theta) + th_step);
      p.theta = std::exp(golden_section(
          lo, hi, [&](double lt) { return objective(std::exp(lt), p.delta, nullptr); }, 24));
      const double de_step = std::log(delta_grid[1] / delta_grid[0]);
      lo = std::max(std::log(opts.nugget_lower), std::log(p.delta) - de_step);
      hi = std::min(std::log(opts.nugget_upper), std::log(p.delta) + de_step);
      p.delta = std::exp(golden_section(
          lo, hi, [&](double ld) { return objective(p.theta, std::exp(ld), nullptr); }, 24));
      p.value = objective(p.theta, p.delta, nullptr);
    }
    return p;
  };

  Point best = grid.front();
  const std::size_t starts = std::min<std::size_t>(3, grid.size());
  for (std::size_t s = 0; s < starts; ++s) {
    if (!std::isfinite(grid[s].value)) continue;
    const Point refined = refine(grid[s], 1);
    if (refined.value < best.value) best = refined;
  }
  best = refine(best, 1);

  const double final_value = objective(best.theta, best.delta, &best_s2);
  if (!std::isfinite(final_value))
    fail(ErrorKind::conditioning, "correlation likelihood is degenerate at the chosen estimate");
  out.theta = best.theta;
  out.nugget = best.delta;
  out.sigma_sq = best_s2;
  // A nugget at its floor is the expected answer for smooth deterministic
  // residuals, so only the remaining edges signal a questionable fit.
  out.at_bounds = best.theta <= opts.theta_lower * 1.01 || best.theta >= opts.theta_upper * 0.99 ||
                  best.delta >= opts.nugget_upper * 0.99;
  return out;
}

namespace {

struct SingleFit {
  RegressionFit regression;
  HyperFit hyper;
  std::vector<bool> actives;
};

SingleFit fit_single_output(const Eigen::MatrixXd& U, const Eigen::VectorXd& y,
                            const TrainingOptions& opts) {
  SingleFit sf;
  sf.regression = fit_regression(U, y, opts);
  sf.actives = derive_actives(sf.regression.basis, static_cast<std::size_t>(U.cols()));
  sf.hyper = estimate_hyperparameters(sf.regression.residuals, U, sf.actives, opts,
                                      static_cast<int>(sf.regression.basis.size()));
  return sf;
}

EmulatorPrior prior_from_fit(const std::string& name, const ParameterSpace& space,
                             const SingleFit& sf, const TrainingOptions& opts,
                             const Discrepancy& disc) {
  EmulatorPrior prior;
  prior.output_name = name;
  prior.space = space;
  prior.basis = sf.regression.basis;
  prior.beta_mean = sf.regression.beta;
  if (opts.beta_mode == TrainingOptions::BetaMode::noninformative)
    prior.beta_var = sf.regression.beta_cov;
  else
    prior.beta_var = Eigen::MatrixXd::Zero(sf.regression.beta.size(), sf.regression.beta.size());
  prior.sigma_sq = sf.hyper.sigma_sq;
  prior.corr = Correlator{opts.kernel, sf.hyper.theta, opts.nu, opts.alpha, sf.hyper.nugget};
  prior.actives = sf.actives;
  prior.disc = disc;
  return prior;
}

}  // namespace

EmulatorSet emulator_from_data(const RunTable& runs, const std::vector<std::string>& output_names,
                               const ParameterSpace& space, const TrainingOptions& opts,
                               const std::map<std::string, Discrepancy>& discrepancies) {
  opts.validate();
  if (output_names.empty()) fail(ErrorKind::argument, "no outputs requested");
  const RunTable aligned = runs.aligned_to(space);
  const Eigen::MatrixXd U = space.scale_rows(aligned.inputs);
  const std::size_t m = output_names.size();

  std::vector<Eigen::VectorXd> ys(m);
  for (std::size_t i = 0; i < m; ++i) ys[i] = aligned.output(output_names[i]);

  std::cerr << "Fitting regression surfaces\n";
  std::vector<SingleFit> fits(m);
  run_indexed(m, opts.workers, [&](std::size_t i) {
    try {
      fits[i].regression = fit_regression(U, ys[i], opts);
      fits[i].actives = derive_actives(fits[i].regression.basis, space.dim());
    } catch (...) {
      rethrow_for_output(output_names[i]);
    }
  });

  std::cerr << "Building correlation structures\n";
  run_indexed(m, opts.workers, [&](std::size_t i) {
    try {
      fits[i].hyper =
          estimate_hyperparameters(fits[i].regression.residuals, U, fits[i].actives, opts,
                                   static_cast<int>(fits[i].regression.basis.size()));
    } catch (...) {
      rethrow_for_output(output_names[i]);
    }
  });

  std::cerr << "Creating emulators\n";
  std::vector<EmulatorPrior> priors(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto it = discrepancies.find(output_names[i]);
    priors[i] = prior_from_fit(output_names[i], space, fits[i], opts,
                               it == discrepancies.end() ? Discrepancy{} : it->second);
  }

  std::cerr << "Performing Bayes linear adjustment\n";
  EmulatorSet set;
  set.variance_mode = false;
  set.names = output_names;
  for (std::size_t i = 0; i < m; ++i) {
    try {
      TrainedEmulator em(priors[i], aligned.inputs, ys[i]);
      if (fits[i].hyper.at_bounds)
        em.flags().push_back("hyperparameter estimate at its search bound");
      set.expectation.emplace(output_names[i], std::move(em));
    } catch (...) {
      rethrow_for_output(output_names[i]);
    }
  }
  return set;
}

ReplicateAggregate aggregate_replicates(const RunTable& runs,
                                        const std::vector<std::string>& output_names) {
  if (runs.rows() == 0) fail(ErrorKind::argument, "run table is empty");
  const Eigen::Index n = runs.inputs.rows();

  // group rows by exact input equality, first occurrence fixing the order
  std::vector<Eigen::Index> group_of(static_cast<std::size_t>(n));
  std::vector<std::vector<Eigen::Index>> groups;
  std::map<std::vector<double>, Eigen::Index> seen;
  for (Eigen::Index r = 0; r < n; ++r) {
    std::vector<double> key(runs.inputs.row(r).begin(), runs.inputs.row(r).end());
    auto [it, fresh] = seen.try_emplace(key, static_cast<Eigen::Index>(groups.size()));
    if (fresh) groups.emplace_back();
    groups[static_cast<std::size_t>(it->second)].push_back(r);
    group_of[static_cast<std::size_t>(r)] = it->second;
  }

  ReplicateAggregate agg;
  const auto g = static_cast<Eigen::Index>(groups.size());
  agg.inputs.resize(g, runs.inputs.cols());
  agg.counts.resize(g);
  for (Eigen::Index j = 0; j < g; ++j) {
    agg.inputs.row(j) = runs.inputs.row(groups[static_cast<std::size_t>(j)].front());
    agg.counts[j] = static_cast<double>(groups[static_cast<std::size_t>(j)].size());
  }
  agg.output_names = output_names;
  for (const auto& name : output_names) {
    const Eigen::VectorXd col = runs.output(name);
    Eigen::VectorXd mean(g), var(g);
    for (Eigen::Index j = 0; j < g; ++j) {
      const auto& members = groups[static_cast<std::size_t>(j)];
      double m = 0.0;
      for (Eigen::Index r : members) m += col[r];
      m /= static_cast<double>(members.size());
      double ss = 0.0;
      for (Eigen::Index r : members) ss += (col[r] - m) * (col[r] - m);
      mean[j] = m;
      var[j] = members.size() > 1 ? ss / static_cast<double>(members.size() - 1) : 0.0;
    }
    agg.means.emplace(name, std::move(mean));
    agg.variances.emplace(name, std::move(var));
  }
  return agg;
}

EmulatorSet train_variance_from_aggregates(const ReplicateAggregate& agg,
                                           const std::vector<std::string>& output_names,
                                           const ParameterSpace& space,
                                           const TrainingOptions& opts) {
  opts.validate();
  if (output_names.empty()) fail(ErrorKind::argument, "no outputs requested");
  const Eigen::Index g = agg.inputs.rows();
  if (agg.counts.size() != g) fail(ErrorKind::argument, "aggregate counts do not match inputs");

  std::vector<Eigen::Index> rep;
  for (Eigen::Index j = 0; j < g; ++j)
    if (agg.counts[j] >= 2.0) rep.push_back(j);
  if (rep.empty())
    fail(ErrorKind::insufficient_data,
         "every input has a single replicate; train deterministically with emulator_from_data");
  const std::size_t need = 10 * space.dim();
  if (rep.size() < need)
    fail(ErrorKind::insufficient_data,
         "variance emulation needs at least " + std::to_string(need) +
             " unique inputs with two or more replicates; have " + std::to_string(rep.size()));

  Eigen::MatrixXd X_rep(static_cast<Eigen::Index>(rep.size()), agg.inputs.cols());
  Eigen::VectorXd n_rep(static_cast<Eigen::Index>(rep.size()));
  for (std::size_t k = 0; k < rep.size(); ++k) {
    X_rep.row(static_cast<Eigen::Index>(k)) = agg.inputs.row(rep[k]);
    n_rep[static_cast<Eigen::Index>(k)] = agg.counts[rep[k]];
  }
  const Eigen::MatrixXd U_rep = space.scale_rows(X_rep);
  const Eigen::MatrixXd U_all = space.scale_rows(agg.inputs);

  EmulatorSet set;
  set.variance_mode = true;
  set.names = output_names;

  std::vector<std::pair<std::string, TrainedEmulator>> var_ems, mean_ems;
  var_ems.reserve(output_names.size());
  mean_ems.reserve(output_names.size());
  for (const auto& name : output_names) {
    const auto mit = agg.means.find(name);
    const auto vit = agg.variances.find(name);
    if (mit == agg.means.end() || vit == agg.variances.end())
      fail(ErrorKind::schema, "aggregate is missing output '" + name + "'");
    try {
      Eigen::VectorXd y_var(static_cast<Eigen::Index>(rep.size()));
      Eigen::VectorXd noise_var(static_cast<Eigen::Index>(rep.size()));
      for (std::size_t k = 0; k < rep.size(); ++k) {
        const double s2 = vit->second[rep[k]];
        y_var[static_cast<Eigen::Index>(k)] = s2;
        noise_var[static_cast<Eigen::Index>(k)] =
            opts.kurtosis_multiplier * s2 * s2 / (n_rep[static_cast<Eigen::Index>(k)] - 1.0);
      }
      SingleFit sfv = fit_single_output(U_rep, y_var, opts);
      EmulatorPrior prior_v = prior_from_fit(name, space, sfv, opts, Discrepancy{});
      TrainedEmulator em_v(prior_v, X_rep, y_var, noise_var);

      // replicate means, noised by the emulated within-point variance
      const Eigen::VectorXd vhat = em_v.get_exp(agg.inputs).cwiseMax(0.0);
      const Eigen::VectorXd noise_mean = vhat.array() / agg.counts.array();
      const Eigen::VectorXd& y_mean = mit->second;
      SingleFit sfm = fit_single_output(U_all, y_mean, opts);
      EmulatorPrior prior_m = prior_from_fit(name, space, sfm, opts, Discrepancy{});
      TrainedEmulator em_m(prior_m, agg.inputs, y_mean, noise_mean);

      if (sfv.hyper.at_bounds)
        em_v.flags().push_back("hyperparameter estimate at its search bound");
      if (sfm.hyper.at_bounds)
        em_m.flags().push_back("hyperparameter estimate at its search bound");
      var_ems.emplace_back(name, std::move(em_v));
      mean_ems.emplace_back(name, std::move(em_m));
    } catch (const Error&) {
      rethrow_for_output(name);
    }
  }
  for (auto& [name, em] : var_ems) set.variance.emplace(name, std::move(em));
  for (auto& [name, em] : mean_ems) set.expectation.emplace(name, std::move(em));
  return set;
}

EmulatorSet train_variance_emulators(const RunTable& runs,
                                     const std::vector<std::string>& output_names,
                                     const ParameterSpace& space, const TrainingOptions& opts) {
  const RunTable aligned = runs.aligned_to(space);
  return train_variance_from_aggregates(aggregate_replicates(aligned, output_names), output_names,
                                        space, opts);
}

}  // namespace nroy
