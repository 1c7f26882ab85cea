#include "nroy/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "nroy/common.hpp"
#include "nroy/training.hpp"

namespace nroy {

namespace {

struct Moments {
  Eigen::VectorXd exp;
  Eigen::VectorXd sd;
};

Moments adjusted_moments(const TrainedEmulator& em, const Eigen::MatrixXd& X) {
  Moments m;
  m.exp = em.get_exp(X);
  m.sd = em.get_var(X).cwiseMax(0.0).cwiseSqrt();
  return m;
}

Eigen::VectorXd sim_implausibility(const Eigen::VectorXd& f, const Target& t,
                                   const Discrepancy& disc) {
  return simulator_implausibility(f, t, disc);
}

std::vector<Eigen::Index> comparison_core(const Moments& m, const Eigen::VectorXd& f, double c,
                                          const Eigen::VectorXd* i_sim) {
  std::vector<Eigen::Index> fails;
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    if (std::abs(f[i] - m.exp[i]) <= c * m.sd[i]) continue;
    if (i_sim && (*i_sim)[i] > c) continue;  // far from the observation region
    fails.push_back(i);
  }
  return fails;
}

std::vector<Eigen::Index> classification_core(const Eigen::VectorXd& i_em,
                                              const Eigen::VectorXd& i_sim, double cutoff) {
  std::vector<Eigen::Index> fails;
  for (Eigen::Index i = 0; i < i_em.size(); ++i)
    if (i_em[i] > cutoff && i_sim[i] <= cutoff) fails.push_back(i);
  return fails;
}

StandardizedErrors standardized_core(const Moments& m, const Eigen::VectorXd& f) {
  StandardizedErrors out;
  out.u.resize(f.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    const double err = f[i] - m.exp[i];
    if (m.sd[i] > 0.0) {
      out.u[i] = err / m.sd[i];
    } else if (std::abs(err) <= 1e-8 * std::max(1.0, std::abs(f[i]))) {
      out.u[i] = 0.0;  // reproduced training point: zero error at zero sd
    } else {
      fail(ErrorKind::numeric, "zero predictive sd with a non-zero error at a validation point");
    }
    if (std::abs(out.u[i]) > 3.0) out.failures.push_back(i);
  }
  out.underconfident = f.size() > 0 && out.u.cwiseAbs().maxCoeff() < 1.0;
  return out;
}

// emulator implausibility from precomputed moments
Eigen::VectorXd implausibility_core(const Moments& m, const Target& t, const Discrepancy& disc) {
  const auto [z, var_e] = t.moments();
  const double extra = var_e + disc.var();
  Eigen::VectorXd out(m.exp.size());
  for (Eigen::Index i = 0; i < out.size(); ++i)
    out[i] = std::abs(m.exp[i] - z) / std::sqrt(m.sd[i] * m.sd[i] + extra);
  return out;
}

// Held-out moments for each training run. Past 50 runs they are read off the
// precision matrix: dropping run i from the adjustment gives
//   E_-i = y_i - [K^-1 r]_i / [K^-1]_ii,   Var_-i = 1 / [K^-1]_ii
// for the held-out observation; subtracting jitter and observation noise
// converts the latter to the emulator's predictive variance for f(x_i).
Moments loo_moments(const TrainedEmulator& em) {
  const Eigen::Index n = static_cast<Eigen::Index>(em.n_train());
  Moments m;
  m.exp.resize(n);
  m.sd.resize(n);
  if (n < 2) fail(ErrorKind::insufficient_data, "leave-one-out needs at least 2 training runs");

  if (n > 50) {
    const Eigen::MatrixXd kinv = em.vard_inverse();
    const Eigen::VectorXd kr = kinv * em.centred_data();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double pii = kinv(i, i);
      m.exp[i] = em.train_outputs()[i] - kr[i] / pii;
      double v = 1.0 / pii - em.jitter_var();
      if (em.obs_noise_var().size() != 0) v -= em.obs_noise_var()[i];
      m.sd[i] = std::sqrt(std::max(v, 0.0));
    }
    return m;
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::MatrixXd X(n - 1, em.train_inputs().cols());
    Eigen::VectorXd y(n - 1);
    Eigen::VectorXd noise;
    if (em.obs_noise_var().size() != 0) noise.resize(n - 1);
    Eigen::Index w = 0;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (r == i) continue;
      X.row(w) = em.train_inputs().row(r);
      y[w] = em.train_outputs()[r];
      if (noise.size() != 0) noise[w] = em.obs_noise_var()[r];
      ++w;
    }
    const TrainedEmulator fold(em.prior(), X, y, noise);
    const Eigen::MatrixXd xi = em.train_inputs().row(i);
    m.exp[i] = fold.get_exp(xi)[0];
    m.sd[i] = std::sqrt(std::max(fold.get_var(xi)[0], 0.0));
  }
  return m;
}

const Target* find_target(const TargetMap* targets, const std::string& name) {
  if (!targets) return nullptr;
  const auto it = targets->find(name);
  return it == targets->end() ? nullptr : &it->second;
}

EmulatorDiagnostics run_tests(const std::string& name, const Moments& m, const Eigen::VectorXd& f,
                              const Target* target, const Discrepancy& disc, double c) {
  EmulatorDiagnostics d;
  d.output_name = name;
  d.exp = m.exp;
  d.sd = m.sd;
  d.sim = f;
  const Eigen::VectorXd* isim_ptr = nullptr;
  if (target) {
    d.i_em = implausibility_core(m, *target, disc);
    d.i_sim = sim_implausibility(f, *target, disc);
    isim_ptr = &d.i_sim;
    d.classification_failures = classification_core(d.i_em, d.i_sim, c);
  }
  d.comparison_failures = comparison_core(m, f, c, isim_ptr);
  StandardizedErrors se = standardized_core(m, f);
  d.u = std::move(se.u);
  d.standardized_failures = std::move(se.failures);
  d.underconfident = se.underconfident;
  return d;
}

// Rows entering the report-level failing union. Comparison failures arrive
// already exempted; standardized-error failures get the same
// far-from-observation exemption when a target is known.
void collect_union(const EmulatorDiagnostics& d, double c, bool has_target,
                   const std::vector<Eigen::Index>& row_map, std::set<Eigen::Index>* rows) {
  for (Eigen::Index i : d.comparison_failures) rows->insert(row_map.empty() ? i : row_map[i]);
  for (Eigen::Index i : d.classification_failures) rows->insert(row_map.empty() ? i : row_map[i]);
  for (Eigen::Index i : d.standardized_failures) {
    if (has_target && d.i_sim[i] > c) continue;
    rows->insert(row_map.empty() ? i : row_map[i]);
  }
}

}  // namespace

std::vector<Eigen::Index> comparison_test(const TrainedEmulator& em, const RunTable& validation,
                                          double c, const Target* target) {
  const RunTable v = validation.aligned_to(em.prior().space);
  const Moments m = adjusted_moments(em, v.inputs);
  const Eigen::VectorXd f = v.output(em.prior().output_name);
  if (!target) return comparison_core(m, f, c, nullptr);
  const Eigen::VectorXd i_sim = sim_implausibility(f, *target, em.prior().disc);
  return comparison_core(m, f, c, &i_sim);
}

std::vector<Eigen::Index> classification_test(const TrainedEmulator& em, const RunTable& validation,
                                              const Target& target, double cutoff) {
  const RunTable v = validation.aligned_to(em.prior().space);
  const Moments m = adjusted_moments(em, v.inputs);
  const Eigen::VectorXd f = v.output(em.prior().output_name);
  return classification_core(implausibility_core(m, target, em.prior().disc),
                             sim_implausibility(f, target, em.prior().disc), cutoff);
}

StandardizedErrors standardized_errors(const TrainedEmulator& em, const RunTable& validation) {
  const RunTable v = validation.aligned_to(em.prior().space);
  return standardized_core(adjusted_moments(em, v.inputs),
                           v.output(em.prior().output_name));
}

DiagnosticReport validation_diagnostics(const EmulatorSet& ems, const TargetMap* targets,
                                        const RunTable* validation, double c) {
  if (ems.names.empty()) fail(ErrorKind::argument, "emulator set is empty");
  const ParameterSpace& space = ems.space();
  DiagnosticReport report;
  report.input_names = space.names();
  std::set<Eigen::Index> union_rows;

  if (!validation) {
    // leave-one-out over each emulator's own training runs; in variance mode
    // those are already the aggregated tables
    report.leave_one_out = true;
    const TrainedEmulator& first = ems.at(ems.names.front());
    report.inputs = first.train_inputs();
    for (const auto& name : ems.names) {
      const TrainedEmulator& em = ems.at(name);
      const Target* target = find_target(targets, name);
      EmulatorDiagnostics d = run_tests(name, loo_moments(em), em.train_outputs(), target,
                                        em.prior().disc, c);
      collect_union(d, c, target != nullptr, {}, &union_rows);
      report.per_emulator.push_back(std::move(d));
      if (ems.variance_mode) {
        const auto vit = ems.variance.find(name);
        if (vit != ems.variance.end()) {
          EmulatorDiagnostics dv = run_tests(name + " (variance)", loo_moments(vit->second),
                                             vit->second.train_outputs(), nullptr,
                                             Discrepancy{}, c);
          // variance-emulator rows are the replicated subset of the mean
          // rows; map them back by input equality for the union
          const Eigen::MatrixXd& vx = vit->second.train_inputs();
          std::vector<Eigen::Index> row_map(static_cast<std::size_t>(vx.rows()), -1);
          for (Eigen::Index k = 0; k < vx.rows(); ++k)
            for (Eigen::Index j = 0; j < report.inputs.rows(); ++j)
              if (vx.row(k) == report.inputs.row(j)) {
                row_map[static_cast<std::size_t>(k)] = j;
                break;
              }
          collect_union(dv, c, false, row_map, &union_rows);
          report.per_emulator.push_back(std::move(dv));
        }
      }
    }
  } else if (!ems.variance_mode) {
    const RunTable v = validation->aligned_to(space);
    report.inputs = v.inputs;
    for (const auto& name : ems.names) {
      const TrainedEmulator& em = ems.at(name);
      const Target* target = find_target(targets, name);
      EmulatorDiagnostics d = run_tests(name, adjusted_moments(em, v.inputs), v.output(name),
                                        target, em.prior().disc, c);
      collect_union(d, c, target != nullptr, {}, &union_rows);
      report.per_emulator.push_back(std::move(d));
    }
  } else {
    // variance mode: aggregate the unaggregated validation table; means
    // validate the expectation emulators, sample variances the variance
    // emulators (rows with at least two replicates)
    const RunTable v = validation->aligned_to(space);
    const ReplicateAggregate agg = aggregate_replicates(v, ems.names);
    report.inputs = agg.inputs;
    std::vector<Eigen::Index> rep_rows;
    for (Eigen::Index j = 0; j < agg.counts.size(); ++j)
      if (agg.counts[j] >= 2.0) rep_rows.push_back(j);
    Eigen::MatrixXd rep_inputs(static_cast<Eigen::Index>(rep_rows.size()), agg.inputs.cols());
    for (std::size_t k = 0; k < rep_rows.size(); ++k)
      rep_inputs.row(static_cast<Eigen::Index>(k)) = agg.inputs.row(rep_rows[k]);

    for (const auto& name : ems.names) {
      const TrainedEmulator& em = ems.at(name);
      const Target* target = find_target(targets, name);
      EmulatorDiagnostics d = run_tests(name, adjusted_moments(em, agg.inputs),
                                        agg.means.at(name), target, em.prior().disc, c);
      collect_union(d, c, target != nullptr, {}, &union_rows);
      report.per_emulator.push_back(std::move(d));

      const auto vit = ems.variance.find(name);
      if (vit != ems.variance.end() && !rep_rows.empty()) {
        Eigen::VectorXd s2(static_cast<Eigen::Index>(rep_rows.size()));
        for (std::size_t k = 0; k < rep_rows.size(); ++k)
          s2[static_cast<Eigen::Index>(k)] = agg.variances.at(name)[rep_rows[k]];
        EmulatorDiagnostics dv = run_tests(name + " (variance)",
                                           adjusted_moments(vit->second, rep_inputs), s2, nullptr,
                                           Discrepancy{}, c);
        collect_union(dv, c, false, rep_rows, &union_rows);
        report.per_emulator.push_back(std::move(dv));
      }
    }
  }

  report.failing_rows.assign(union_rows.begin(), union_rows.end());
  report.failing_points.resize(static_cast<Eigen::Index>(report.failing_rows.size()),
                               report.inputs.cols());
  for (std::size_t k = 0; k < report.failing_rows.size(); ++k)
    report.failing_points.row(static_cast<Eigen::Index>(k)) =
        report.inputs.row(report.failing_rows[k]);
  return report;
}

void write_diagnostic_csvs(const DiagnosticReport& report, const std::string& dir) {
  auto open = [&](const std::string& name) {
    std::ofstream out(dir + "/" + name);
    if (!out) fail(ErrorKind::schema, "cannot write " + dir + "/" + name);
    return out;
  };
  auto is_failing = [](const std::vector<Eigen::Index>& rows, Eigen::Index i) {
    return std::binary_search(rows.begin(), rows.end(), i);
  };
  auto sanitize = [](std::string s) {
    for (char& ch : s)
      if (ch == ' ' || ch == '(' || ch == ')') ch = '_';
    return s;
  };

  for (const auto& d : report.per_emulator) {
    const Eigen::Index n = d.sim.size();
    const std::string stem = sanitize(d.output_name);
    {
      auto out = open(stem + "_comparison.csv");
      for (const auto& nm : report.input_names) out << nm << ",";
      out << "simulated,expectation,sd,fail\n";
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index jc = 0; jc < report.inputs.cols(); ++jc)
          out << format_double(report.inputs(i, jc)) << ",";
        out << format_double(d.sim[i]) << "," << format_double(d.exp[i]) << ","
            << format_double(d.sd[i]) << "," << (is_failing(d.comparison_failures, i) ? 1 : 0)
            << "\n";
      }
    }
    if (d.i_em.size() != 0) {
      auto out = open(stem + "_classification.csv");
      for (const auto& nm : report.input_names) out << nm << ",";
      out << "emulator_implausibility,simulator_implausibility,fail\n";
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index jc = 0; jc < report.inputs.cols(); ++jc)
          out << format_double(report.inputs(i, jc)) << ",";
        out << format_double(d.i_em[i]) << "," << format_double(d.i_sim[i]) << ","
            << (is_failing(d.classification_failures, i) ? 1 : 0) << "\n";
      }
    }
    {
      auto out = open(stem + "_standardized.csv");
      for (const auto& nm : report.input_names) out << nm << ",";
      out << "standardized_error,fail\n";
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index jc = 0; jc < report.inputs.cols(); ++jc)
          out << format_double(report.inputs(i, jc)) << ",";
        out << format_double(d.u[i]) << "," << (is_failing(d.standardized_failures, i) ? 1 : 0)
            << "\n";
      }
    }
  }
}

}  // namespace nroy
