#include <doctest.h>

#include <cmath>

#include "nroy/common.hpp"
#include "nroy/emulator.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace nroy;

namespace {

// minimal zero-mean prior on [-1, 1] so natural and scaled units agree
EmulatorPrior unit_prior(double sigma_sq, double theta) {
  EmulatorPrior p;
  p.output_name = "y";
  p.space = ParameterSpace({"x"}, {{-1.0, 1.0}});
  p.basis = {BasisTerm::constant()};
  p.beta_mean = Eigen::VectorXd::Zero(1);
  p.beta_var = Eigen::MatrixXd::Zero(1, 1);
  p.sigma_sq = sigma_sq;
  p.corr.theta = theta;
  p.actives = {true};
  return p;
}

}  // namespace

TEST_CASE("target moments for value and interval forms") {
  const Target tv = Target::value(169.0, 8.45);
  auto [z1, v1] = tv.moments();
  CHECK(z1 == 169.0);
  CHECK(v1 == doctest::Approx(71.4025).epsilon(1e-14));
  CHECK(tv.matched(169.0 + 25.35));
  CHECK_FALSE(tv.matched(169.0 + 25.36));

  const Target ti = Target::interval(580.0, 651.0);
  auto [z2, v2] = ti.moments();
  CHECK(z2 == doctest::Approx(615.5));
  CHECK(v2 == doctest::Approx(140.02777777777777).epsilon(1e-12));
  CHECK(ti.matched(580.0));
  CHECK(ti.matched(651.0));
  CHECK_FALSE(ti.matched(579.9));

  CHECK_THROWS_AS(Target::value(1.0, 0.0), Error);
  CHECK_THROWS_AS(Target::interval(2.0, 2.0), Error);
}

TEST_CASE("single-point adjustment matches the closed form") {
  // prior mean zero, sigma^2 = 4, exp_sq with theta = 1, one run at x = 0
  // with value 2: E_D(x) = 2 c(x), Var_D(x) = 4 (1 - c(x)^2)
  auto em = TrainedEmulator(unit_prior(4.0, 1.0), Eigen::MatrixXd::Zero(1, 1),
                            Eigen::VectorXd::Constant(1, 2.0));
  Eigen::MatrixXd x(1, 1);
  x << 1.0;  // scaled distance 1, c = e^-1
  CHECK(em.get_exp(x)[0] == doctest::Approx(0.7357588823428847).epsilon(1e-8));
  CHECK(em.get_var(x)[0] == doctest::Approx(3.4586588670535492).epsilon(1e-8));
  x << 0.0;
  CHECK(em.get_exp(x)[0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(em.get_var(x)[0] <= 1e-8 * 4.0);
}

TEST_CASE("adjusted moments match the dense explicit-inverse oracle") {
  Rng rng(404);
  int done = 0;
  while (done < 60) {
    // Both routes lose ~log10(cond) digits, so the 1e-8 route-equality claim
    // is only testable on well-conditioned training covariances.
    const auto inst = testsup::well_posed_instance(rng);
    const TrainedEmulator em(inst.prior, inst.X, inst.y, inst.noise);
    const oracle::DenseBayesLinear ref(inst.prior, inst.X, inst.y, inst.noise);
    auto pts = testsup::random_points_in(inst.prior.space, 5, rng);
    const Eigen::VectorXd e = em.get_exp(pts);
    const Eigen::VectorXd v = em.get_var(pts);
    const Eigen::MatrixXd C = em.get_cov(pts, pts);
    const double scale = inst.prior.sigma_sq;
    for (int i = 0; i < 5; ++i) {
      const double eo = ref.exp_at(pts.row(i));
      const double vo = ref.var_at(pts.row(i));
      CHECK(std::abs(e[i] - eo) <= 1e-8 * std::max({1.0, std::abs(eo), scale}));
      CHECK(std::abs(v[i] - std::max(vo, 0.0)) <= 1e-8 * std::max(1.0, scale));
      for (int j = 0; j < 5; ++j) {
        const double co = ref.cov_at(pts.row(i), pts.row(j));
        CHECK(std::abs(C(i, j) - co) <= 1e-8 * std::max(1.0, scale));
      }
    }
    ++done;
  }
}

TEST_CASE("noiseless training runs are interpolated") {
  Rng rng(812);
  int done = 0;
  while (done < 30) {
    // The stabilising jitter shifts training-point predictions by about
    // jitter * cond, so exact interpolation needs a tighter conditioning cap.
    auto inst = testsup::well_posed_instance(rng, 8, 3, 1e4);
    if (inst.noise.size() != 0) continue;  // noiseless cases only
    const TrainedEmulator em(inst.prior, inst.X, inst.y);
    const Eigen::VectorXd e = em.get_exp(inst.X);
    const Eigen::VectorXd v = em.get_var(inst.X);
    for (Eigen::Index i = 0; i < inst.y.size(); ++i) {
      CHECK(std::abs(e[i] - inst.y[i]) <= 1e-6 * std::max(1.0, std::abs(inst.y[i])));
      CHECK(v[i] <= 1e-8 * inst.prior.sigma_sq);
    }
    ++done;
  }
}

TEST_CASE("observation noise keeps variance positive at training runs") {
  Rng rng(271);
  int done = 0;
  while (done < 20) {
    auto inst = testsup::random_instance(rng);
    if (inst.noise.size() == 0) continue;
    const TrainedEmulator em(inst.prior, inst.X, inst.y, inst.noise);
    const Eigen::VectorXd v = em.get_var(inst.X);
    for (Eigen::Index i = 0; i < v.size(); ++i) CHECK(v[i] > 0.0);
    ++done;
  }
}

TEST_CASE("adjustment never inflates variance beyond the prior") {
  Rng rng(555);
  for (int rep = 0; rep < 30; ++rep) {
    const auto inst = testsup::random_instance(rng);
    const TrainedEmulator em(inst.prior, inst.X, inst.y, inst.noise);
    auto pts = testsup::random_points_in(inst.prior.space, 8, rng);
    const Eigen::VectorXd v = em.get_var(pts);
    for (int i = 0; i < 8; ++i) {
      const double pv = em.prior_covariance(pts.row(i), pts.row(i));
      CHECK(v[i] <= pv + 1e-10 * std::max(1.0, pv));
    }
  }
}

TEST_CASE("adjusted covariances satisfy Cauchy-Schwarz") {
  Rng rng(9001);
  for (int rep = 0; rep < 20; ++rep) {
    const auto inst = testsup::random_instance(rng);
    const TrainedEmulator em(inst.prior, inst.X, inst.y, inst.noise);
    auto pts = testsup::random_points_in(inst.prior.space, 6, rng);
    const Eigen::MatrixXd C = em.get_cov(pts);
    const Eigen::VectorXd v = em.get_var(pts);
    const double slack = 1e-8 * inst.prior.sigma_sq;
    for (int i = 0; i < 6; ++i) {
      CHECK(C(i, i) == doctest::Approx(v[i]).epsilon(1e-6));
      for (int j = 0; j < 6; ++j)
        CHECK(std::abs(C(i, j)) <= std::sqrt(v[i] * v[j]) + slack);
    }
  }
}

TEST_CASE("block evaluation agrees with pointwise evaluation across boundaries") {
  Rng rng(33);
  auto inst = testsup::random_instance(rng, 6, 2);
  const TrainedEmulator em(inst.prior, inst.X, inst.y, inst.noise);
  const auto pts = testsup::random_points_in(inst.prior.space, 2500, rng);
  const Eigen::VectorXd e = em.get_exp(pts);
  const Eigen::VectorXd v = em.get_var(pts);
  for (int i : {0, 1023, 1024, 1025, 2047, 2048, 2499}) {
    const Eigen::VectorXd e1 = em.get_exp(pts.row(i));
    const Eigen::VectorXd v1 = em.get_var(pts.row(i));
    CHECK(e[i] == doctest::Approx(e1[0]).epsilon(1e-12));
    CHECK(v[i] == doctest::Approx(v1[0]).epsilon(1e-12));
  }
}

TEST_CASE("implausibility is invariant under affine output rescaling") {
  Rng rng(616);
  for (double a : {3.2, -2.0}) {
    const double b = -40.0;
    auto inst = testsup::random_instance(rng);
    const TrainedEmulator em(inst.prior, inst.X, inst.y, inst.noise);

    EmulatorPrior p2 = inst.prior;
    p2.beta_mean *= a;
    for (auto& t : p2.basis)
      if (t.kind == BasisTerm::Kind::constant) break;
    // shift enters through the constant coefficient, present in every instance
    p2.beta_mean[0] += b;
    p2.beta_var *= a * a;
    p2.sigma_sq *= a * a;
    p2.disc.internal *= std::abs(a);
    p2.disc.external *= std::abs(a);
    Eigen::VectorXd noise2 = inst.noise;
    if (noise2.size() != 0) noise2 *= a * a;
    const TrainedEmulator em2(p2, inst.X, (a * inst.y.array() + b).matrix(), noise2);

    const Target t1 = Target::value(1.7, 0.9);
    const Target t2 = Target::value(a * 1.7 + b, std::abs(a) * 0.9);
    const auto pts = testsup::random_points_in(inst.prior.space, 10, rng);
    const Eigen::VectorXd i1 = implausibility(em, pts, t1);
    const Eigen::VectorXd i2 = implausibility(em2, pts, t2);
    for (int i = 0; i < 10; ++i) CHECK(i1[i] == doctest::Approx(i2[i]).epsilon(1e-9));
  }
}

TEST_CASE("wider observation error shrinks implausibility") {
  Rng rng(22);
  const auto inst = testsup::random_instance(rng);
  const TrainedEmulator em(inst.prior, inst.X, inst.y, inst.noise);
  const auto pts = testsup::random_points_in(inst.prior.space, 20, rng);
  const Eigen::VectorXd tight = implausibility(em, pts, Target::value(1.0, 0.5));
  const Eigen::VectorXd loose = implausibility(em, pts, Target::value(1.0, 2.0));
  for (int i = 0; i < 20; ++i) CHECK(loose[i] <= tight[i]);
}

TEST_CASE("nth largest implausibility ranks outputs correctly") {
  // three constant-mean emulators trained at one point with values 2, 5, 1;
  // at the training point predictions are exact with near-zero variance
  EmulatorSet set;
  const Eigen::MatrixXd x0 = Eigen::MatrixXd::Zero(1, 1);
  TargetMap targets;
  const std::vector<double> vals{2.0, 5.0, 1.0};
  for (int k = 0; k < 3; ++k) {
    auto p = unit_prior(1.0, 1.0);
    p.output_name = "f" + std::to_string(k);
    set.names.push_back(p.output_name);
    set.expectation.emplace(p.output_name,
                            TrainedEmulator(p, x0, Eigen::VectorXd::Constant(1, vals[static_cast<std::size_t>(k)])));
    targets.emplace(p.output_name, Target::value(0.0, 1.0));
  }
  const Eigen::VectorXd i1 = nth_implausibility(set, x0, targets, 1);
  const Eigen::VectorXd i2 = nth_implausibility(set, x0, targets, 2);
  const Eigen::VectorXd i3 = nth_implausibility(set, x0, targets, 3);
  CHECK(i1[0] == doctest::Approx(5.0).epsilon(1e-6));
  CHECK(i2[0] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(i3[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_THROWS_AS(nth_implausibility(set, x0, targets, 4), Error);
  CHECK_THROWS_AS(nth_implausibility(set, x0, targets, 0), Error);

  targets.erase("f1");
  CHECK_THROWS_AS(nth_implausibility(set, x0, targets, 1), Error);
}

TEST_CASE("evaluation outside the trained box needs the extrapolation flag") {
  auto em = TrainedEmulator(unit_prior(1.0, 1.0), Eigen::MatrixXd::Zero(1, 1),
                            Eigen::VectorXd::Constant(1, 2.0));
  Eigen::MatrixXd x(1, 1);
  x << 1.5;
  CHECK_THROWS_AS(em.get_exp(x), Error);
  em.set_allow_extrapolation(true);
  CHECK(std::isfinite(em.get_exp(x)[0]));
}

TEST_CASE("prior validation rejects inconsistent pieces") {
  auto p = unit_prior(1.0, 1.0);
  p.sigma_sq = 0.0;
  CHECK_THROWS_AS(p.validate(), Error);
  p = unit_prior(1.0, 1.0);
  p.actives = {false};  // basis uses an inactive parameter once a linear term exists
  p.basis.push_back(BasisTerm::linear(0));
  p.beta_mean = Eigen::VectorXd::Zero(2);
  p.beta_var = Eigen::MatrixXd::Zero(2, 2);
  CHECK_THROWS_AS(p.validate(), Error);
  p = unit_prior(1.0, 1.0);
  p.beta_mean = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("emulator summary lists the structural pieces") {
  auto p = unit_prior(4.0, 0.9);
  p.corr.nugget = 0.05;
  auto em = TrainedEmulator(p, Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Constant(1, 2.0));
  const std::string s = em.summary();
  CHECK(s.find("basis: 1") != std::string::npos);
  CHECK(s.find("exp_sq") != std::string::npos);
  CHECK(s.find("nugget 0.05") != std::string::npos);
  CHECK(s.find("adjusted on 1 runs") != std::string::npos);
}
