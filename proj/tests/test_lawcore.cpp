#include <cmath>
#include <random>

#include "doctest.h"
#include "mixlaw/lawcore.hpp"

using namespace mixlaw;

namespace {

// Frozen from a 30-digit mpmath evaluation of the closed forms.
constexpr double kPowerLawOracle = 16.6113883008418966599944677222;    // 500*(1e6)^-0.25 + 0.8
constexpr double kBivariateOracle = 0.516300718929862360220467645884;  // 250*(2e8)^-0.3*(3e8)^-0.2 + 0.5
constexpr double kNeffOracle = 182181455.705177836454673306304;        // (3/5)^(1/0.3) * 1e9

JointLaw make_law(std::map<WeightKey, double> betas, double alpha, double l_inf) {
  return JointLaw(TaskId("en-de"), alpha, l_inf, std::move(betas));
}

WeightKey key(double p) { return WeightKey::from_weight(p); }

bool rel_close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b)); }

}  // namespace

TEST_CASE("eval_power_law") {
  PowerLawParams law(100.0, 0.5, 1.0);
  CHECK(eval_power_law(law, ModelSize(1e4)) == 2.0);
  CHECK(eval_power_law(law, ModelSize(1e300)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(eval_power_law(PowerLawParams(500.0, 0.25, 0.8), ModelSize(1e6)) ==
        doctest::Approx(kPowerLawOracle).epsilon(1e-14));
}

TEST_CASE("power law parameters reject invariant violations") {
  CHECK_THROWS_AS(PowerLawParams(0.0, 0.5, 1.0), Error);
  CHECK_THROWS_AS(PowerLawParams(1.0, 0.0, 1.0), Error);
  CHECK_THROWS_AS(PowerLawParams(1.0, 0.5, -0.1), Error);
  CHECK_THROWS_AS(ModelSize(0.0), Error);
  CHECK_THROWS_AS(BivariateLawParams(100.0, 0.5, 0.0, 0.0), Error);
}

TEST_CASE("quality law increases and saturates") {
  PowerLawParams law(100.0, 0.5, 60.0);
  CHECK(eval_quality_law(law, ModelSize(1e4)) == 59.0);
  CHECK(eval_law(law, ModelSize(1e4), MetricDirection::loss_like) == 61.0);
  CHECK(eval_quality_law(law, ModelSize(4e4)) > eval_quality_law(law, ModelSize(1e4)));
}

TEST_CASE("eval_bivariate_law") {
  CHECK(eval_bivariate_law(BivariateLawParams(100.0, 0.25, 0.25, 1.0), ModelSize(1e4), ModelSize(1e4)) ==
        doctest::Approx(2.0).epsilon(1e-15));
  CHECK(eval_bivariate_law(BivariateLawParams(100.0, 0.5, 0.5, 0.0), ModelSize(1e4), ModelSize(1.0)) == 1.0);
  CHECK(eval_bivariate_law(BivariateLawParams(250.0, 0.3, 0.2, 0.5), ModelSize(2e8), ModelSize(3e8)) ==
        doctest::Approx(kBivariateOracle).epsilon(1e-14));
}

TEST_CASE("eval_joint_loss") {
  auto law = make_law({{kFullWeight, 2.0}}, 0.5, 1.0);
  CHECK(eval_joint_loss(law, 1.0, ModelSize(4.0)) == 2.0);
  try {
    eval_joint_loss(law, 0.3, ModelSize(4.0));
    FAIL("expected unknown weighting");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::unknown_weighting);
  }
  auto law2 = make_law({{key(0.5), 8.0}}, 1.5, 0.25);
  CHECK(eval_joint_loss(law2, 0.5, ModelSize(4.0)) == 1.25);
}

TEST_CASE("weights are matched after rounding to 6 decimals") {
  auto law = make_law({{key(0.3), 5.0}, {kFullWeight, 2.0}}, 0.5, 1.0);
  CHECK(law.beta_at(0.3000000004) == 5.0);
  CHECK(key(0.1 + 0.2) == key(0.3));
  CHECK(key(0.05).to_string() == "0.050000");
  CHECK(WeightKey::parse("0.050000") == key(0.05));
}

TEST_CASE("zero weight is rejected everywhere") {
  auto law = make_law({{kFullWeight, 2.0}}, 0.5, 1.0);
  auto code_of = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::fit_failure;
  };
  CHECK(code_of([&] { eval_joint_loss(law, 0.0, ModelSize(4.0)); }) == ErrorCode::zero_shot);
  CHECK(code_of([&] { effective_fraction(law, 0.0); }) == ErrorCode::zero_shot);
  CHECK(code_of([&] {
          predict_loss_any_weighting(PowerLawParams(1, 1, 1), FractionFit::identity(TaskId("t")), 0.0,
                                     ModelSize(10.0));
        }) == ErrorCode::zero_shot);
}

TEST_CASE("effective_fraction closed forms") {
  CHECK(effective_fraction(make_law({{kFullWeight, 2.0}, {key(0.5), 4.0}}, 0.5, 1.0), 0.5) == 0.25);
  CHECK(effective_fraction(make_law({{kFullWeight, 3.0}, {key(0.5), 3.0}}, 0.7, 1.0), 0.5) == 1.0);
  CHECK(effective_fraction(make_law({{kFullWeight, 3.0}}, 0.7, 1.0), 1.0) == 1.0);
  CHECK(effective_fraction(make_law({{kFullWeight, 1.0}, {key(0.5), 8.0}}, 1.5, 1.0), 0.5) ==
        doctest::Approx(0.25).epsilon(1e-15));

  auto no_base = make_law({{key(0.5), 4.0}}, 0.5, 1.0);
  try {
    effective_fraction(no_base, 0.5);
    FAIL("expected missing baseline");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::missing_baseline);
  }
}

TEST_CASE("synergy: fraction above one is not clamped") {
  auto law = make_law({{kFullWeight, 4.0}, {key(0.5), 2.0}}, 0.5, 1.0);
  CHECK(effective_fraction(law, 0.5) == 4.0);
}

TEST_CASE("effective_params") {
  auto quarter = make_law({{kFullWeight, 2.0}, {key(0.5), 4.0}}, 0.5, 1.0);
  CHECK(effective_params(quarter, 0.5, ModelSize(1e8)).value() == 2.5e7);
  CHECK(effective_params(quarter, 1.0, ModelSize(123456.0)).value() == 123456.0);
  auto law = make_law({{kFullWeight, 3.0}, {key(0.4), 5.0}}, 0.3, 1.0);
  CHECK(effective_params(law, 0.4, ModelSize(1e9)).value() == doctest::Approx(kNeffOracle).epsilon(1e-13));
}

TEST_CASE("eval_fraction_curve") {
  TaskId t("en-de");
  CHECK(eval_fraction_curve(FractionFit::flexible(t, 1.0, 1.0, 1.0), 0.5) == 0.75);
  CHECK(eval_fraction_curve(FractionFit::flexible(t, -3.7, 0.2, 2.5), 1.0) == 1.0);
  CHECK(eval_fraction_curve(FractionFit::linear(t, 0.5), 0.5) == 0.75);
  CHECK_THROWS_AS(eval_fraction_curve(FractionFit::linear(t, 0.5), 1.5), Error);
  CHECK_THROWS_AS(eval_fraction_curve(FractionFit::linear(t, 0.5), -0.1), Error);
  CHECK_THROWS_AS(FractionFit::flexible(t, 1.0, 0.0, 1.0), Error);
}

TEST_CASE("predict_loss_any_weighting") {
  PowerLawParams single(100.0, 0.5, 1.0);
  TaskId t("en-de");
  CHECK(predict_loss_any_weighting(single, FractionFit::flexible(t, 0.3, 0.8, 1.2), 1.0, ModelSize(1e4)) ==
        eval_power_law(single, ModelSize(1e4)));
  // f(0.25) = 0.25 under the identity linear form.
  CHECK(predict_loss_any_weighting(single, FractionFit::identity(t), 0.25, ModelSize(1e4)) == 3.0);
  // linear c1 = 2 gives f <= 0 for p <= 0.5
  CHECK_THROWS_AS(predict_loss_any_weighting(single, FractionFit::linear(t, 2.0), 0.3, ModelSize(1e4)), Error);
}

TEST_CASE("neff_consistency_check") {
  auto law = make_law({{kFullWeight, 2.0}, {key(0.5), 4.0}}, 0.5, 1.0);
  auto pair = neff_consistency_check(law, 0.5, ModelSize(1e6));
  CHECK(rel_close(pair.via_joint_law, pair.via_effective_params, 1e-12));
  auto at_one = neff_consistency_check(law, 1.0, ModelSize(1e6));
  CHECK(at_one.via_joint_law == eval_joint_loss(law, 1.0, ModelSize(1e6)));
  CHECK(at_one.via_effective_params == at_one.via_joint_law);
}

TEST_CASE("weight vector invariants") {
  CHECK_NOTHROW(WeightVector({{"a", 0.5}, {"b", 0.5}}));
  CHECK_THROWS_AS(WeightVector({{"a", 0.5}, {"b", 0.48}}), Error);
  CHECK_THROWS_AS(WeightVector({{"a", -0.1}, {"b", 1.1}}), Error);
  CHECK_THROWS_AS(WeightVector(std::map<std::string, double>{}), Error);
  auto w = WeightVector::pair("a", "b", 0.3);
  CHECK(w.weight("a") == 0.3);
  CHECK(w.weight("zz") == 0.0);
}

// ---- properties ----------------------------------------------------------

TEST_CASE("property: joint law equals the p=1 law at N_eff") {
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double alpha = 0.05 + 1.45 * u(rng);
    const double l_inf = 3.0 * u(rng);
    const double beta1 = std::exp(-2.0 + 10.0 * u(rng));
    const double p = 0.01 + 0.99 * u(rng);
    const double beta_p = beta1 * std::exp(-3.0 + 6.0 * u(rng));
    const double n = std::exp(std::log(1e6) + u(rng) * std::log(1e5));
    auto law = make_law({{kFullWeight, beta1}, {key(p), beta_p}}, alpha, l_inf);
    auto pair = neff_consistency_check(law, p, ModelSize(n));
    worst = std::max(worst, std::abs(pair.via_joint_law - pair.via_effective_params) / std::abs(pair.via_joint_law));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("property: loss-like power law strictly decreases toward l_inf") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    PowerLawParams law(1.0 + 100.0 * u(rng), 0.05 + u(rng), 2.0 * u(rng));
    double prev = eval_power_law(law, ModelSize(1e3));
    for (double n = 2e3; n < 1e12; n *= 2.0) {
      const double v = eval_power_law(law, ModelSize(n));
      CHECK(v < prev);
      CHECK(v > law.l_inf);
      prev = v;
    }
  }
}

TEST_CASE("property: effective params scale exactly with n") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double p = 0.05 + 0.9 * u(rng);
    auto law = make_law({{kFullWeight, 1.0 + 10 * u(rng)}, {key(p), 1.0 + 10 * u(rng)}}, 0.1 + u(rng), 1.0);
    const double n = 1e6 + 1e9 * u(rng);
    CHECK(effective_params(law, p, ModelSize(2.0 * n)).value() == 2.0 * effective_params(law, p, ModelSize(n)).value());
  }
}

TEST_CASE("property: both fraction forms pass through (1, 1)") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TaskId t("x");
  for (int i = 0; i < 500; ++i) {
    const double c1 = -5.0 + 10.0 * u(rng);
    CHECK(eval_fraction_curve(FractionFit::flexible(t, c1, 1e-3 + 5 * u(rng), 1e-3 + 5 * u(rng)), 1.0) == 1.0);
    CHECK(eval_fraction_curve(FractionFit::linear(t, c1), 1.0) == 1.0);
  }
}

TEST_CASE("property: identity fraction reproduces the single-task law at p*n") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TaskId t("x");
  for (int i = 0; i < 200; ++i) {
    PowerLawParams law(1.0 + 100.0 * u(rng), 0.05 + u(rng), 2.0 * u(rng));
    const double p = 0.01 + 0.99 * u(rng);
    const double n = 1e6 + 1e9 * u(rng);
    CHECK(predict_loss_any_weighting(law, FractionFit::identity(t), p, ModelSize(n)) ==
          doctest::Approx(eval_power_law(law, ModelSize(p * n))).epsilon(1e-14));
  }
}
