#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "doctest.h"
#include "nroy/common.hpp"
#include "nroy/diagnostics.hpp"
#include "nroy/param_space.hpp"
#include "nroy/rng.hpp"
#include "nroy/sirs.hpp"
#include "nroy/training.hpp"

using namespace nroy;

namespace {

ParameterSpace plane() { return ParameterSpace({"x0", "x1"}, {{-1.0, 2.0}, {0.0, 3.0}}); }

// Train a set while swallowing the stage banners.
EmulatorSet train_quiet(const RunTable& runs, const std::vector<std::string>& names,
                        const ParameterSpace& space, const TrainingOptions& opts = {}) {
  std::ostringstream sink;
  auto* old = std::cerr.rdbuf(sink.rdbuf());
  try {
    EmulatorSet ems = emulator_from_data(runs, names, space, opts);
    std::cerr.rdbuf(old);
    return ems;
  } catch (...) {
    std::cerr.rdbuf(old);
    throw;
  }
}

RunTable smooth_table(const ParameterSpace& space, int n, std::uint64_t seed, double noise_sd) {
  RunTable t = latin_hypercube(static_cast<std::size_t>(n), space, seed);
  Rng rng(seed ^ 0xabcdef);
  const Eigen::MatrixXd U = space.scale_rows(t.inputs);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i)
    y[i] = std::sin(3.0 * U(i, 0)) + U(i, 1) * U(i, 1) + noise_sd * rng.normal();
  t.output_names = {"y"};
  t.outputs = y;
  return t;
}

// Validation table at the given points whose outputs sit a chosen number of
// predictive sds away from the adjusted expectation.
RunTable offset_validation(const TrainedEmulator& em, const Eigen::MatrixXd& X,
                           const Eigen::VectorXd& sds_away) {
  RunTable v;
  v.input_names = em.prior().space.names();
  v.inputs = X;
  const Eigen::VectorXd e = em.get_exp(X);
  const Eigen::VectorXd sd = em.get_var(X).cwiseMax(0.0).cwiseSqrt();
  v.output_names = {em.prior().output_name};
  v.outputs = e + sds_away.cwiseProduct(sd);
  return v;
}

}  // namespace

TEST_CASE("validating on the training runs passes every check") {
  const ParameterSpace space = plane();
  const RunTable runs = smooth_table(space, 20, 3, 0.0);
  const auto ems = train_quiet(runs, {"y"}, space);
  TargetMap targets{{"y", Target::value(1.0, 0.5)}};

  const DiagnosticReport rep = validation_diagnostics(ems, &targets, &runs);
  CHECK(rep.passed());
  CHECK_FALSE(rep.leave_one_out);
  REQUIRE(rep.per_emulator.size() == 1);
  const auto& d = rep.per_emulator.front();
  CHECK(d.comparison_failures.empty());
  CHECK(d.classification_failures.empty());
  CHECK(d.standardized_failures.empty());
  // reproduced training data: tiny errors, so the caution flag trips
  CHECK(d.underconfident);
  CHECK(d.u.cwiseAbs().maxCoeff() < 1e-3);
  // at a training point the emulator implausibility can only shrink the
  // simulator's (equal numerator, inflated denominator)
  REQUIRE(d.i_em.size() == 20);
  for (Eigen::Index i = 0; i < 20; ++i) CHECK(d.i_em[i] <= d.i_sim[i] + 1e-9);
}

TEST_CASE("a simulator ten sds away fails comparison and standardized checks everywhere") {
  const ParameterSpace space = plane();
  const RunTable runs = smooth_table(space, 20, 4, 0.0);
  const auto ems = train_quiet(runs, {"y"}, space);
  const TrainedEmulator& em = ems.at("y");

  const RunTable fresh = latin_hypercube(12, space, 99);
  const RunTable v = offset_validation(em, fresh.inputs, Eigen::VectorXd::Constant(12, 10.0));

  const DiagnosticReport rep = validation_diagnostics(ems, nullptr, &v);
  REQUIRE(rep.per_emulator.size() == 1);
  const auto& d = rep.per_emulator.front();
  CHECK(d.comparison_failures.size() == 12);
  CHECK(d.standardized_failures.size() == 12);
  CHECK(d.i_em.size() == 0);  // no targets: no implausibility columns
  CHECK_FALSE(d.underconfident);
  CHECK(rep.failing_rows.size() == 12);
  REQUIRE(rep.failing_points.rows() == 12);
  CHECK(rep.failing_points == rep.inputs);
}

TEST_CASE("mispredictions far from the observation are exempted when targets are known") {
  const ParameterSpace space = plane();
  const RunTable runs = smooth_table(space, 20, 5, 0.0);
  const auto ems = train_quiet(runs, {"y"}, space);
  const TrainedEmulator& em = ems.at("y");

  const RunTable fresh = latin_hypercube(1, space, 17);
  const RunTable v = offset_validation(em, fresh.inputs, Eigen::VectorXd::Constant(1, 10.0));
  // put the observation fifty sigmas from the simulated value: the point is
  // hopeless for matching, so its misprediction carries no information
  const Target t = Target::value(v.outputs(0, 0) - 50.0, 1.0);

  CHECK(comparison_test(em, v, 3.0, nullptr) == std::vector<Eigen::Index>{0});
  CHECK(comparison_test(em, v, 3.0, &t).empty());

  TargetMap targets{{"y", t}};
  const DiagnosticReport with = validation_diagnostics(ems, &targets, &v);
  const DiagnosticReport without = validation_diagnostics(ems, nullptr, &v);
  // the raw standardized list still reports the row; the report-level union
  // applies the same far-from-observation exemption the comparison test uses
  CHECK(with.per_emulator.front().standardized_failures == std::vector<Eigen::Index>{0});
  CHECK(with.passed());
  CHECK(without.failing_rows == std::vector<Eigen::Index>{0});
}

TEST_CASE("points cut by emulator error alone are classification failures") {
  const ParameterSpace space = plane();
  RunTable runs = latin_hypercube(20, space, 6);
  Eigen::VectorXd y(20);
  for (int i = 0; i < 20; ++i) y[i] = 50.0 + 0.1 * runs.inputs(i, 0);
  runs.output_names = {"y"};
  runs.outputs = y;
  const auto ems = train_quiet(runs, {"y"}, space);
  const TrainedEmulator& em = ems.at("y");
  const Target t = Target::value(0.0, 1.0);

  // the simulator actually hits the target at these points; the emulator,
  // trained on values near fifty, would wrongly rule all of them out
  RunTable v;
  v.input_names = space.names();
  v.inputs = latin_hypercube(8, space, 23).inputs;
  v.output_names = {"y"};
  v.outputs = Eigen::VectorXd::Zero(8);

  const auto fails = classification_test(em, v, t, 3.0);
  REQUIRE(fails.size() == 8);
  TargetMap targets{{"y", t}};
  const DiagnosticReport rep = validation_diagnostics(ems, &targets, &v);
  CHECK(rep.per_emulator.front().classification_failures == fails);
  CHECK(rep.failing_rows.size() == 8);
  CHECK_FALSE(rep.passed());
}

TEST_CASE("standardized errors flag only strictly beyond three sds") {
  const ParameterSpace space = plane();
  const RunTable runs = smooth_table(space, 20, 7, 0.0);
  const auto ems = train_quiet(runs, {"y"}, space);
  const TrainedEmulator& em = ems.at("y");

  const RunTable fresh = latin_hypercube(2, space, 31);
  Eigen::VectorXd away(2);
  away << 3.0 - 1e-6, -(3.0 + 1e-6);
  const RunTable v = offset_validation(em, fresh.inputs, away);

  const StandardizedErrors se = standardized_errors(em, v);
  CHECK(se.u[0] == doctest::Approx(3.0 - 1e-6).epsilon(1e-9));
  CHECK(se.u[1] == doctest::Approx(-(3.0 + 1e-6)).epsilon(1e-9));
  CHECK(se.failures == std::vector<Eigen::Index>{1});
  CHECK(comparison_test(em, v) == std::vector<Eigen::Index>{1});
}

TEST_CASE("uniformly tiny errors raise the underconfidence flag") {
  const ParameterSpace space = plane();
  const RunTable runs = smooth_table(space, 20, 8, 0.0);
  const auto ems = train_quiet(runs, {"y"}, space);
  const TrainedEmulator& em = ems.at("y");

  const RunTable fresh = latin_hypercube(10, space, 57);
  const RunTable v = offset_validation(em, fresh.inputs, Eigen::VectorXd::Constant(10, 0.1));
  const StandardizedErrors se = standardized_errors(em, v);
  CHECK(se.underconfident);
  CHECK(se.failures.empty());
}

TEST_CASE("leave-one-out matches explicit fold re-adjustment") {
  const ParameterSpace space = plane();
  // past fifty runs the held-out moments come from precision downdates;
  // both routes must agree with rebuilding the emulator minus one run
  for (int n : {30, 60}) {
    const RunTable runs = smooth_table(space, n, 11, 0.05);
    const auto ems = train_quiet(runs, {"y"}, space);
    const TrainedEmulator& em = ems.at("y");

    const DiagnosticReport rep = validation_diagnostics(ems, nullptr, nullptr);
    CHECK(rep.leave_one_out);
    REQUIRE(rep.inputs.rows() == n);
    CHECK(rep.inputs == em.train_inputs());
    const auto& d = rep.per_emulator.front();
    REQUIRE(d.exp.size() == n);
    CHECK(d.sim == em.train_outputs());

    const double tol = n > 50 ? 1e-6 : 1e-10;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::MatrixXd X(n - 1, 2);
      Eigen::VectorXd y(n - 1);
      Eigen::Index w = 0;
      for (Eigen::Index r = 0; r < n; ++r) {
        if (r == i) continue;
        X.row(w) = em.train_inputs().row(r);
        y[w] = em.train_outputs()[r];
        ++w;
      }
      const TrainedEmulator fold(em.prior(), X, y);
      const Eigen::MatrixXd xi = em.train_inputs().row(i);
      const double fe = fold.get_exp(xi)[0];
      const double fsd = std::sqrt(std::max(fold.get_var(xi)[0], 0.0));
      CHECK(d.exp[i] == doctest::Approx(fe).epsilon(tol).scale(std::abs(fe) + 1.0));
      CHECK(d.sd[i] == doctest::Approx(fsd).epsilon(tol).scale(fsd + 1e-6));
    }
  }
}

TEST_CASE("epidemic wave-one validation reproduces the bundled behavior") {
  const auto space = sirs_space();
  const auto targets = sirs_targets();
  auto [train, valid] = make_wave0(space, 30, 60, 1);
  const auto ems = train_quiet(train, {"nS", "nI", "nR"}, space);

  // with the observations known, every validation miss is either within
  // tolerance or sits outside the plausible region and is exempted
  const DiagnosticReport with = validation_diagnostics(ems, &targets, &valid);
  CHECK(with.passed());
  for (const auto& d : with.per_emulator) CHECK(d.classification_failures.empty());

  // without them, the recovered-population emulator struggles at low values
  const DiagnosticReport without = validation_diagnostics(ems, nullptr, &valid);
  CHECK(without.failing_rows.size() == 3);
  const auto& nr = *std::find_if(without.per_emulator.begin(), without.per_emulator.end(),
                                 [](const auto& d) { return d.output_name == "nR"; });
  REQUIRE(nr.comparison_failures.size() == 3);
  double min_sim = 1e300;
  for (Eigen::Index i : nr.comparison_failures) min_sim = std::min(min_sim, nr.sim[i]);
  CHECK(min_sim < 199.0);  // below the lower observation bound

  // cross-validation of the training runs themselves is clean
  const DiagnosticReport loo = validation_diagnostics(ems, &targets, nullptr);
  CHECK(loo.leave_one_out);
  CHECK(loo.inputs.rows() == 30);
  CHECK(loo.passed());
}

TEST_CASE("replicate tables validate means and sample variances") {
  const ParameterSpace space({"x"}, {{0.0, 2.0}});
  Rng rng(301);
  const int uniq = 12, reps = 4;
  RunTable runs;
  runs.input_names = {"x"};
  runs.inputs.resize(uniq * reps, 1);
  runs.output_names = {"y"};
  runs.outputs.resize(uniq * reps, 1);
  for (int j = 0; j < uniq; ++j) {
    const double x = 2.0 * (j + 0.5) / uniq;
    for (int r = 0; r < reps; ++r) {
      runs.inputs(j * reps + r, 0) = x;
      runs.outputs(j * reps + r, 0) = 5.0 + 2.0 * x + 0.3 * (0.5 + x) * rng.normal();
    }
  }
  std::ostringstream sink;
  auto* old = std::cerr.rdbuf(sink.rdbuf());
  const EmulatorSet ems = train_variance_emulators(runs, {"y"}, space, {});
  std::cerr.rdbuf(old);
  REQUIRE(ems.variance_mode);

  // validation: five replicated points and three singletons
  RunTable v;
  v.input_names = {"x"};
  std::vector<double> xs{0.11, 0.52, 0.93, 1.34, 1.75, 0.33, 1.11, 1.93};
  std::vector<int> vreps{3, 3, 3, 3, 3, 1, 1, 1};
  int total = 0;
  for (int c : vreps) total += c;
  v.inputs.resize(total, 1);
  v.outputs.resize(total, 1);
  v.output_names = {"y"};
  int row = 0;
  for (std::size_t j = 0; j < xs.size(); ++j)
    for (int r = 0; r < vreps[j]; ++r, ++row) {
      v.inputs(row, 0) = xs[j];
      v.outputs(row, 0) = 5.0 + 2.0 * xs[j] + 0.3 * (0.5 + xs[j]) * rng.normal();
    }

  const DiagnosticReport rep = validation_diagnostics(ems, nullptr, &v);
  REQUIRE(rep.inputs.rows() == 8);  // unique validation inputs
  REQUIRE(rep.per_emulator.size() == 2);
  CHECK(rep.per_emulator[0].output_name == "y");
  CHECK(rep.per_emulator[0].sim.size() == 8);
  CHECK(rep.per_emulator[1].output_name == "y (variance)");
  CHECK(rep.per_emulator[1].sim.size() == 5);  // replicated subset only
  for (Eigen::Index r2 : rep.failing_rows) {
    CHECK(r2 >= 0);
    CHECK(r2 < 8);
  }

  const auto dir = std::filesystem::temp_directory_path() / "nroy_diag_csv";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  write_diagnostic_csvs(rep, dir.string());
  CHECK(std::filesystem::exists(dir / "y_comparison.csv"));
  CHECK(std::filesystem::exists(dir / "y_standardized.csv"));
  CHECK(std::filesystem::exists(dir / "y__variance__comparison.csv"));
  CHECK(std::filesystem::exists(dir / "y__variance__standardized.csv"));
  // no targets anywhere: no classification files
  CHECK_FALSE(std::filesystem::exists(dir / "y_classification.csv"));

  std::ifstream in(dir / "y_comparison.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "x,simulated,expectation,sd,fail");
  int lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == 8);
  std::filesystem::remove_all(dir);
}

TEST_CASE("failing rows are the union across outputs and tests") {
  const ParameterSpace space = plane();
  RunTable runs = latin_hypercube(20, space, 12);
  Eigen::MatrixXd Y(20, 2);
  for (int i = 0; i < 20; ++i) {
    Y(i, 0) = 1.0 + runs.inputs(i, 0);
    Y(i, 1) = 2.0 - runs.inputs(i, 1) + 0.3 * runs.inputs(i, 0) * runs.inputs(i, 1);
  }
  runs.output_names = {"y1", "y2"};
  runs.outputs = Y;
  const auto ems = train_quiet(runs, {"y1", "y2"}, space);

  const RunTable fresh = latin_hypercube(10, space, 77);
  RunTable v;
  v.input_names = space.names();
  v.inputs = fresh.inputs;
  v.output_names = {"y1", "y2"};
  v.outputs.resize(10, 2);
  for (const std::string& name : {std::string("y1"), std::string("y2")}) {
    const TrainedEmulator& em = ems.at(name);
    const int col = name == "y1" ? 0 : 1;
    const Eigen::VectorXd e = em.get_exp(v.inputs);
    const Eigen::VectorXd sd = em.get_var(v.inputs).cwiseMax(0.0).cwiseSqrt();
    v.outputs.col(col) = e;
    for (Eigen::Index i : (name == "y1" ? std::vector<Eigen::Index>{2, 5}
                                        : std::vector<Eigen::Index>{5, 7}))
      v.outputs(i, col) = e[i] + 10.0 * sd[i];
  }

  const DiagnosticReport rep = validation_diagnostics(ems, nullptr, &v);
  CHECK(rep.failing_rows == std::vector<Eigen::Index>({2, 5, 7}));
  REQUIRE(rep.failing_points.rows() == 3);
  CHECK(rep.failing_points.row(0) == rep.inputs.row(2));
  CHECK(rep.failing_points.row(1) == rep.inputs.row(5));
  CHECK(rep.failing_points.row(2) == rep.inputs.row(7));
}
