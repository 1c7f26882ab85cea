#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "nroy/common.hpp"
#include "nroy/param_space.hpp"
#include "nroy/proposal.hpp"
#include "nroy/sirs.hpp"
#include "nroy/training.hpp"

using namespace nroy;

namespace {

struct CaptureCerr {
  std::ostringstream ss;
  std::streambuf* old;
  CaptureCerr() : old(std::cerr.rdbuf(ss.rdbuf())) {}
  ~CaptureCerr() { std::cerr.rdbuf(old); }
  std::string str() const { return ss.str(); }
};

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

AcceptanceMeasure from_fn(std::function<double(const Eigen::RowVectorXd&)> f) {
  return [f = std::move(f)](const Eigen::MatrixXd& X) {
    Eigen::VectorXd s(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) s[i] = f(X.row(i));
    return s;
  };
}

AcceptanceMeasure accept_all() {
  return from_fn([](const Eigen::RowVectorXd&) { return 0.0; });
}

// score scaled so that the cutoff 3 accepts exactly the disk of the given
// radius
AcceptanceMeasure disk_measure(double cx, double cy, double radius) {
  return from_fn([=](const Eigen::RowVectorXd& x) {
    return 3.0 * std::hypot(x[0] - cx, x[1] - cy) / radius;
  });
}

ParameterSpace unit_square() { return ParameterSpace({"x", "y"}, {{-1.0, 1.0}, {-1.0, 1.0}}); }

const EmulatorSet& wave1() {
  static const EmulatorSet ems = [] {
    auto [train, valid] = make_wave0(sirs_space(), 30, 60, 1);
    (void)valid;
    std::ostringstream sink;
    auto* old = std::cerr.rdbuf(sink.rdbuf());
    try {
      EmulatorSet e = emulator_from_data(train, {"nS", "nI", "nR"}, sirs_space());
      std::cerr.rdbuf(old);
      return e;
    } catch (...) {
      std::cerr.rdbuf(old);
      throw;
    }
  }();
  return ems;
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd ac = a.array() - a.mean();
  const Eigen::VectorXd bc = b.array() - b.mean();
  return ac.dot(bc) / std::sqrt(ac.squaredNorm() * bc.squaredNorm());
}

// Kolmogorov-Smirnov distance of the sample from Uniform(lo, hi)
double ks_stat(std::vector<double> v, double lo, double hi) {
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double u = (v[i] - lo) / (hi - lo);
    d = std::max(d, std::max(std::abs((static_cast<double>(i) + 1.0) / n - u),
                             std::abs(u - static_cast<double>(i) / n)));
  }
  return d;
}

// heart-shaped test region: inside r <= 0.5 (1 + cos t) but outside the disk
// of radius 0.15 about (0.25, 0)
bool in_heart_region(double x, double y) {
  const double r = std::hypot(x, y);
  if (r > 0.5 * (1.0 + std::cos(std::atan2(y, x)))) return false;
  return std::hypot(x - 0.25, y) > 0.15;
}

double dist_to_heart_curve(double x, double y) {
  double best = std::numeric_limits<double>::infinity();
  const int m = 4000;
  for (int k = 0; k <= m; ++k) {
    const double t = 2.0 * M_PI * static_cast<double>(k) / m;
    const double rr = 0.5 * (1.0 + std::cos(t));
    best = std::min(best, std::hypot(x - rr * std::cos(t), y - rr * std::sin(t)));
  }
  return best;
}

void expect_argument_error(const std::function<void()>& f) {
  try {
    f();
    FAIL_CHECK("expected an argument error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::argument);
  }
}

}  // namespace

TEST_CASE("latin hypercube rejection keeps exactly the acceptable rows") {
  const ParameterSpace box({"a", "b"}, {{0.0, 1.0}, {0.0, 2.0}});
  const auto half = from_fn([](const Eigen::RowVectorXd& x) { return x[0] <= 0.5 ? 0.0 : 10.0; });

  const RunTable kept = lhd_reject(box, 100, half, 3.0, 11);
  // one design point per column stratum, so exactly half the rows survive
  CHECK(kept.inputs.rows() == 50);
  CHECK(kept.input_names == box.names());
  for (Eigen::Index i = 0; i < kept.inputs.rows(); ++i) {
    CHECK(kept.inputs(i, 0) <= 0.5);
    CHECK(box.contains(kept.inputs.row(i)));
  }

  CHECK(lhd_reject(box, 100, accept_all(), 3.0, 11).inputs.rows() == 100);
  const auto none = from_fn([](const Eigen::RowVectorXd&) { return 10.0; });
  CHECK(lhd_reject(box, 100, none, 3.0, 11).inputs.rows() == 0);
}

TEST_CASE("rejection rate for the bundled epidemic wave is small but nonzero") {
  const AcceptanceMeasure m = implausibility_measure(wave1(), sirs_targets());
  const RunTable kept = lhd_reject(sirs_space(), 2000, m, 3.0, 42);
  const double rate = static_cast<double>(kept.inputs.rows()) / 2000.0;
  INFO("acceptance rate ", rate);
  // the first wave cuts the box hard: between 85% and 99.9% removed
  CHECK(rate >= 0.005);
  CHECK(rate <= 0.15);
}

TEST_CASE("line sampling on an unconstrained box keeps only the ray ends") {
  const ParameterSpace box = unit_square();
  RunTable seeds;
  seeds.input_names = box.names();
  seeds.inputs = latin_hypercube(12, box, 3).inputs;

  ProposalOptions opts;
  opts.n_lines = 20;
  const RunTable out = line_sample(seeds, box, accept_all(), 3.0, opts, 4);

  // every stop is acceptable, so only the two extended ray ends survive
  CHECK(out.inputs.rows() == 2 * 20);
  const Eigen::MatrixXd U = box.scale_rows(out.inputs, true);
  for (Eigen::Index i = 0; i < U.rows(); ++i) {
    CHECK(U.row(i).cwiseAbs().maxCoeff() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(U.row(i).cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
  }
}

TEST_CASE("line sampling brackets interior region boundaries") {
  const ParameterSpace box({"x"}, {{0.0, 1.0}});
  RunTable seeds;
  seeds.input_names = box.names();
  seeds.inputs.resize(2, 1);
  seeds.inputs << 0.35, 0.45;

  const auto slab =
      from_fn([](const Eigen::RowVectorXd& x) { return (x[0] >= 0.205 && x[0] <= 0.615) ? 0.0 : 10.0; });
  ProposalOptions opts;
  opts.n_lines = 1;
  opts.points_per_line = 21;  // stops every 0.05 across the box
  const RunTable out = line_sample(seeds, box, slab, 3.0, opts, 9);

  REQUIRE(out.inputs.rows() == 2);
  std::vector<double> xs{out.inputs(0, 0), out.inputs(1, 0)};
  std::sort(xs.begin(), xs.end());
  CHECK(xs[0] == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(xs[1] == doctest::Approx(0.60).epsilon(1e-9));
  // each retained stop sits within one step of a region boundary and both
  // boundaries are bracketed
  CHECK(std::abs(xs[0] - 0.205) <= 0.0501);
  CHECK(std::abs(xs[1] - 0.615) <= 0.0501);
}

TEST_CASE("line sampling needs two seed points") {
  const ParameterSpace box = unit_square();
  RunTable seeds;
  seeds.input_names = box.names();
  seeds.inputs = Eigen::MatrixXd::Zero(1, 2);

  CaptureCerr cap;
  const RunTable out = line_sample(seeds, box, accept_all(), 3.0, {}, 1);
  CHECK(out.inputs.rows() == 0);
  CHECK(cap.str().find("line sampling needs at least two accepted points") != std::string::npos);
}

TEST_CASE("single-seed importance sampling is uniform with unit weights") {
  const ParameterSpace box = unit_square();
  Eigen::MatrixXd seed(1, 2);
  seed << 0.0, 0.0;

  CaptureCerr cap;
  const WeightedPoints w = ellipsoid_importance_sample(seed, box, accept_all(), 3.0, 2000, {}, 7);
  CHECK(cap.str().find("degenerate seed covariance") != std::string::npos);

  REQUIRE(w.points.rows() == 2000);
  REQUIRE(w.weights.size() == 2000);
  int inside_half = 0, inside_unit = 0;
  Eigen::RowVector2d mean = Eigen::RowVector2d::Zero();
  for (Eigen::Index i = 0; i < w.points.rows(); ++i) {
    CHECK(w.weights[i] == 1.0);
    const double r = w.points.row(i).norm();
    CHECK(w.points.row(i).cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
    // the tuned radius stays within two growth steps of the inscribed ball
    CHECK(r <= 1.5626);
    inside_half += r <= 0.5;
    inside_unit += r <= 1.0;
    mean += w.points.row(i);
  }
  mean /= 2000.0;
  CHECK(std::abs(mean[0]) < 0.06);
  CHECK(std::abs(mean[1]) < 0.06);
  // uniform density: a disk of half the radius holds a quarter of the mass
  REQUIRE(inside_unit > 500);
  const double ratio = static_cast<double>(inside_half) / inside_unit;
  CHECK(std::abs(ratio - 0.25) < 0.06);
}

TEST_CASE("coincident seed ellipsoids split the weights") {
  const ParameterSpace box = unit_square();
  Eigen::MatrixXd seeds(2, 2);
  seeds << 0.3, 0.1, 0.3, 0.1;

  CaptureCerr cap;
  const WeightedPoints w = ellipsoid_importance_sample(seeds, box, accept_all(), 3.0, 500, {}, 5);
  REQUIRE(w.points.rows() == 500);
  for (Eigen::Index i = 0; i < w.points.rows(); ++i) {
    CHECK(w.weights[i] == 0.5);
    CHECK(w.points.row(i).cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
  }
}

TEST_CASE("line sampling recovers both boundaries of a holed region") {
  const ParameterSpace box({"x", "y"}, {{-0.25, 1.25}, {-0.75, 0.75}});
  const auto heart =
      from_fn([](const Eigen::RowVectorXd& p) { return in_heart_region(p[0], p[1]) ? 0.0 : 10.0; });

  const RunTable seeds = lhd_reject(box, 400, heart, 3.0, 5);
  REQUIRE(seeds.inputs.rows() > 100);

  ProposalOptions opts;
  opts.n_lines = 40;
  opts.points_per_line = 30;
  const RunTable out = line_sample(seeds, box, heart, 3.0, opts, 6);
  REQUIRE(out.inputs.rows() > 20);

  // the longest possible step: box diagonal over (points per line - 1)
  const double step = 0.75 * 2.0 * std::sqrt(2.0) / 29.0;
  bool near_outer = false, near_hole = false;
  for (Eigen::Index i = 0; i < out.inputs.rows(); ++i) {
    const double x = out.inputs(i, 0), y = out.inputs(i, 1);
    CHECK(in_heart_region(x, y));
    const double d_outer = dist_to_heart_curve(x, y);
    const double d_hole = std::abs(std::hypot(x - 0.25, y) - 0.15);
    // retained points hug one of the two boundary components
    CHECK(std::min(d_outer, d_hole) <= step + 2e-3);
    near_outer = near_outer || d_outer <= step + 2e-3;
    near_hole = near_hole || d_hole <= step + 2e-3;
  }
  CHECK(near_outer);
  CHECK(near_hole);
}

TEST_CASE("epidemic proposals follow the staged log and respect the cutoff") {
  const TargetMap targets = sirs_targets();
  ProposalOptions opts;
  opts.seed = 1;

  CaptureCerr cap;
  const RunTable out = generate_new_design(wave1(), 100, targets, opts);
  const std::string log = cap.str();
  const auto lines = split_lines(log);

  REQUIRE(out.inputs.rows() == 100);
  CHECK(out.input_names == sirs_space().names());
  const Eigen::VectorXd imp = nth_implausibility(wave1(), out.inputs, targets, 1);
  for (Eigen::Index i = 0; i < imp.size(); ++i) {
    CHECK(imp[i] <= 3.0);
    CHECK(sirs_space().contains(out.inputs.row(i)));
  }

  // staged progress lines, one pass plus one resample pass
  REQUIRE(lines.size() == 12);
  CHECK(lines[0] == "Proposing from LHS...");
  CHECK(lines[1].find(" initial valid points generated for I=3") != std::string::npos);
  CHECK(lines[2] == "Performing line sampling...");
  CHECK(lines[3].rfind("Line sampling generated ", 0) == 0);
  CHECK(lines[4] == "Performing importance sampling...");
  CHECK(lines[5].rfind("Importance sampling generated ", 0) == 0);
  CHECK(lines[6] == "Resample 1");
  CHECK(lines[7] == "Performing line sampling...");
  CHECK(lines[8].rfind("Line sampling generated ", 0) == 0);
  CHECK(lines[9] == "Performing importance sampling...");
  CHECK(lines[10].rfind("Importance sampling generated ", 0) == 0);
  CHECK(lines[11] == "Selecting final points using maximin criterion...");
  CHECK(log.find("warning") == std::string::npos);

  const int initial = std::stoi(lines[1]);
  CHECK(initial >= 5);
  CHECK(initial <= 150);

  // infection and recovery rates must rise together to hold the infected
  // count on target, so the proposal concentrates along a rising band
  const double corr = pearson(out.inputs.col(0), out.inputs.col(1));
  INFO("aSI/aIR correlation ", corr);
  CHECK(corr > 0.1);
}

TEST_CASE("identical options give identical proposals") {
  const ParameterSpace box = unit_square();
  const AcceptanceMeasure m = disk_measure(0.1, -0.2, 0.6);
  ProposalOptions opts;
  opts.seed = 13;

  CaptureCerr cap;
  const RunTable a = generate_new_design(box, 60, m, opts);
  const RunTable b = generate_new_design(box, 60, m, opts);
  REQUIRE(a.inputs.rows() == 60);
  REQUIRE(b.inputs.rows() == a.inputs.rows());
  CHECK(a.inputs == b.inputs);
}

TEST_CASE("the cutoff ladder finds a vanishing target region") {
  const ParameterSpace box = unit_square();
  // a disk holding one ten-thousandth of the box: direct rejection from a
  // thousand-point design usually misses it
  const double radius = 0.01128;
  const AcceptanceMeasure m = disk_measure(0.37, -0.22, radius);

  int direct_hits = 0, ladder_hits = 0;
  for (std::uint64_t k = 1; k <= 20; ++k) {
    if (lhd_reject(box, 1000, m, 3.0, 777 + k).inputs.rows() > 0) ++direct_hits;
    ProposalOptions opts;
    opts.seed = k;
    CaptureCerr cap;
    const RunTable out = generate_new_design(box, 100, m, opts);
    if (out.inputs.rows() > 0) {
      ++ladder_hits;
      for (Eigen::Index i = 0; i < out.inputs.rows(); ++i)
        CHECK(std::hypot(out.inputs(i, 0) - 0.37, out.inputs(i, 1) + 0.22) <= radius + 1e-12);
    }
  }
  INFO("direct hits ", direct_hits, ", ladder hits ", ladder_hits);
  CHECK(direct_hits <= 6);
  CHECK(ladder_hits >= 7);
  CHECK(ladder_hits >= direct_hits + 3);
}

TEST_CASE("final designs are uniform across a convex region") {
  const ParameterSpace box = unit_square();
  const AcceptanceMeasure m = disk_measure(0.0, 0.0, 0.5);

  // equal-area cells: four radial bands times eight sectors
  int passes = 0;
  for (std::uint64_t s = 1; s <= 20; ++s) {
    ProposalOptions opts;
    opts.seed = s;
    CaptureCerr cap;
    const RunTable out = generate_new_design(box, 400, m, opts);
    REQUIRE(out.inputs.rows() >= 395);

    std::vector<int> counts(32, 0);
    for (Eigen::Index i = 0; i < out.inputs.rows(); ++i) {
      const double x = out.inputs(i, 0), y = out.inputs(i, 1);
      const double r = std::hypot(x, y);
      const int band = std::min(3, static_cast<int>(4.0 * (r / 0.5) * (r / 0.5)));
      const double ang = std::atan2(y, x) + M_PI;
      const int sector = std::min(7, static_cast<int>(ang / (2.0 * M_PI) * 8.0));
      ++counts[band * 8 + sector];
    }
    const double expected = static_cast<double>(out.inputs.rows()) / 32.0;
    double chi2 = 0.0;
    for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
    // 99th percentile of chi-square with 31 degrees of freedom
    if (chi2 < 52.191) ++passes;
  }
  INFO("uniformity passes ", passes, "/20");
  CHECK(passes >= 18);
}

TEST_CASE("unconstrained proposals project uniformly in every dimension") {
  const ParameterSpace box({"a", "b", "c"}, {{0.0, 1.0}, {-2.0, 2.0}, {10.0, 30.0}});
  ProposalOptions opts;
  opts.seed = 21;

  CaptureCerr cap;
  const RunTable out = generate_new_design(box, 300, accept_all(), opts);
  REQUIRE(out.inputs.rows() == 300);

  for (Eigen::Index j = 0; j < 3; ++j) {
    std::vector<double> v(out.inputs.col(j).data(), out.inputs.col(j).data() + 300);
    const auto [lo, hi] = box.range(static_cast<std::size_t>(j));
    const double d = ks_stat(std::move(v), lo, hi);
    // 1% critical value of the one-sample Kolmogorov-Smirnov statistic
    CHECK(d < 1.628 / std::sqrt(300.0));
  }
}

TEST_CASE("resample passes run exactly as requested") {
  const ParameterSpace box = unit_square();
  const AcceptanceMeasure m = disk_measure(0.0, 0.0, 0.8);

  ProposalOptions opts;
  opts.seed = 2;
  opts.resample = 0;
  {
    CaptureCerr cap;
    const RunTable out = generate_new_design(box, 50, m, opts);
    CHECK(out.inputs.rows() == 50);
    CHECK(cap.str().find("Resample") == std::string::npos);
  }
  opts.resample = 2;
  {
    CaptureCerr cap;
    const RunTable out = generate_new_design(box, 50, m, opts);
    CHECK(out.inputs.rows() == 50);
    CHECK(cap.str().find("Resample 1\n") != std::string::npos);
    CHECK(cap.str().find("Resample 2\n") != std::string::npos);
  }
}

TEST_CASE("an impossible region yields an empty proposal and a warning") {
  const ParameterSpace box = unit_square();
  const auto none = from_fn([](const Eigen::RowVectorXd&) { return 10.0; });

  CaptureCerr cap;
  const RunTable out = generate_new_design(box, 20, none, {});
  CHECK(out.inputs.rows() == 0);
  CHECK(out.input_names == box.names());
  const std::string log = cap.str();
  CHECK(log.find("warning: empty proposal") != std::string::npos);
  // the default ladder tries the requested cutoff and three looser rungs
  std::size_t attempts = 0, pos = 0;
  while ((pos = log.find("Proposing from LHS...", pos)) != std::string::npos) {
    ++attempts;
    pos += 1;
  }
  CHECK(attempts == 4);
  CHECK(log.find("I=6") != std::string::npos);
}

TEST_CASE("nth-maximum implausibility relaxes monotonically") {
  const TargetMap targets = sirs_targets();
  const Eigen::MatrixXd X = latin_hypercube(50, sirs_space(), 77).inputs;
  const Eigen::VectorXd first = implausibility_measure(wave1(), targets, 1)(X);
  const Eigen::VectorXd second = implausibility_measure(wave1(), targets, 2)(X);
  CHECK(first == nth_implausibility(wave1(), X, targets, 1));
  for (Eigen::Index i = 0; i < X.rows(); ++i) CHECK(second[i] <= first[i] + 1e-12);
}

TEST_CASE("invalid proposal options are rejected") {
  expect_argument_error([] {
    ProposalOptions o;
    o.cutoff = 0.0;
    o.validate();
  });
  expect_argument_error([] {
    ProposalOptions o;
    o.nth = 0;
    o.validate();
  });
  expect_argument_error([] {
    ProposalOptions o;
    o.points_per_line = 1;
    o.validate();
  });
  expect_argument_error([] {
    ProposalOptions o;
    o.oversample = 0.99;
    o.validate();
  });
  expect_argument_error([] {
    ProposalOptions o;
    o.resample = -1;
    o.validate();
  });
  expect_argument_error([] {
    ProposalOptions o;
    o.ladder = {2.0, -1.0};
    o.validate();
  });
  expect_argument_error([] {
    ellipsoid_importance_sample(Eigen::MatrixXd(0, 2), unit_square(), accept_all(), 3.0, 10, {},
                                1);
  });
}
