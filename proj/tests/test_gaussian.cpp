#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "optopulse/constants.hpp"
#include "optopulse/errors.hpp"
#include "optopulse/gaussian.hpp"
#include "optopulse/hilbert.hpp"
#include "optopulse/measurement.hpp"
#include "optopulse/rng.hpp"
#include "optopulse/stats.hpp"

namespace {

using namespace optopulse;
using namespace optopulse::gaussian;

constexpr double kPi = std::numbers::pi;
const double kOmegaM = 2.0 * kPi * 5e5;

TEST(GaussianState, RejectsUncertaintyViolation) {
  EXPECT_THROW(GaussianState(Eigen::Vector2d::Zero(), Eigen::Vector2d(0.1, 0.5).asDiagonal().toDenseMatrix()),
               DomainError);
}

TEST(Thermal, Covariance) {
  EXPECT_NEAR((thermal_gaussian(0.0).cov() - 0.5 * Eigen::Matrix2d::Identity()).norm(), 0.0, 1e-15);
  EXPECT_NEAR((thermal_gaussian(10.0).cov() - 10.5 * Eigen::Matrix2d::Identity()).norm(), 0.0, 1e-15);
}

TEST(Thermal, MatchesFockMoments) {
  const hilbert::Moments m = hilbert::moments(hilbert::new_thermal(10.0, 200));
  EXPECT_LT((m.cov - thermal_gaussian(10.0).cov()).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Rotate, QuarterPeriodSwap) {
  const GaussianState g(Eigen::Vector2d::Zero(), Eigen::Vector2d(0.1, 2.5).asDiagonal().toDenseMatrix());
  const GaussianState r = rotate_gaussian(g, kPi / 2.0);
  EXPECT_NEAR(r.var_x(), 2.5, 1e-12);
  EXPECT_NEAR(r.var_p(), 0.1, 1e-12);
  EXPECT_NEAR((rotate_gaussian(g, 0.0).cov() - g.cov()).norm(), 0.0, 1e-15);
}

TEST(Rotate, MatchesFockOracle) {
  // Squeezed, displaced and tilted, so the covariance has a correlation term.
  const measurement::MeasurementSpec spec{1.5, 0.7};
  const hilbert::FockState f =
      hilbert::rotate(measurement::apply_upsilon(hilbert::new_thermal(2.0, 80), spec, 1.0), 0.4);
  const hilbert::Moments m0 = hilbert::moments(f);
  const GaussianState g(m0.mean, m0.cov);
  const hilbert::Moments m = hilbert::moments(hilbert::rotate(f, 0.3));
  const GaussianState r = rotate_gaussian(g, 0.3);
  EXPECT_LT((m.mean - r.mean()).cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_LT((m.cov - r.cov()).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(OutcomeStats, Values) {
  const OutcomeStats z = pulse_outcome_stats(thermal_gaussian(3.0), 0.0);
  EXPECT_DOUBLE_EQ(z.mean, 0.0);
  EXPECT_DOUBLE_EQ(z.variance, 0.5);
  EXPECT_NEAR(pulse_outcome_stats(thermal_gaussian(10.0), 1.5).variance, 24.125, 1e-12);
}

TEST(Conditional, ThermalTenForcedOutcome) {
  const GaussianState g = conditional_update(thermal_gaussian(10.0), 1.5, 0.0, 6.0);
  EXPECT_NEAR(g.mean()(0), 9.0 / (2.25 + 1.0 / 21.0), 1e-9);
  EXPECT_NEAR(g.mean()(0), 3.9170984455958546, 1e-9);
  EXPECT_NEAR(g.var_x(), 0.5 / (2.25 + 1.0 / 21.0), 1e-9);
  EXPECT_NEAR(g.var_x(), 0.21761658031088082, 1e-9);
  EXPECT_NEAR(g.var_p(), 10.5 + 2.25 / 2.0, 1e-12);
}

TEST(Conditional, LargeOccupationLimit) {
  EXPECT_NEAR(conditional_update(thermal_gaussian(1e9), 1.5, 0.0, 0.0).var_x(), 1.0 / 4.5, 1e-9);
}

TEST(Conditional, CoherentInputSqueezes) {
  const GaussianState g = conditional_update(thermal_gaussian(0.0), 1.5, 0.0, 0.0);
  EXPECT_NEAR(g.var_x(), 0.5 / 3.25, 1e-12);
  // Minimum uncertainty: pure squeezed state.
  EXPECT_NEAR(g.var_x() * g.var_p(), 0.25, 1e-12);
}

TEST(Conditional, KickShiftsMomentumOnly) {
  const GaussianState a = conditional_update(thermal_gaussian(2.0), 1.2, 0.0, 1.0);
  const GaussianState b = conditional_update(thermal_gaussian(2.0), 1.2, 4.0, 1.0);
  EXPECT_DOUBLE_EQ(a.mean()(0), b.mean()(0));
  EXPECT_NEAR(b.mean()(1) - a.mean()(1), 4.0, 1e-12);
  EXPECT_EQ(a.cov(), b.cov());
}

TEST(Sampling, DeterministicAndPhaseNoiseOnly) {
  EXPECT_EQ(sample_outcome(thermal_gaussian(3.0), 1.0, 42), sample_outcome(thermal_gaussian(3.0), 1.0, 42));
  Rng rng(5);
  std::vector<double> s(100000);
  for (double& v : s) v = sample_outcome(thermal_gaussian(3.0), 0.0, rng);
  const stats::SampleMoments m = stats::sample_moments(s);
  EXPECT_NEAR(m.mean, 0.0, 3.0 * std::sqrt(0.5 / 1e5));
  EXPECT_NEAR(m.variance, 0.5, 0.01);
}

TEST(Sampling, ThermalTenVariance) {
  Rng rng(11);
  std::vector<double> s(100000);
  for (double& v : s) v = sample_outcome(thermal_gaussian(10.0), 1.5, rng);
  const stats::SampleMoments m = stats::sample_moments(s);
  EXPECT_NEAR(m.variance, 24.125, 0.4);
  EXPECT_NEAR(m.mean, 0.0, 3.0 * std::sqrt(24.125 / 1e5));
}

TEST(EffectiveOccupation, Values) {
  EXPECT_NEAR(effective_occupation(thermal_gaussian(0.0)), 0.0, 1e-15);
  EXPECT_NEAR(effective_occupation(thermal_gaussian(10.0)), 10.0, 1e-9);
  const GaussianState g = conditional_update(thermal_gaussian(1e4), 1.5, 0.0, 0.0);
  EXPECT_NEAR(effective_occupation(g), std::sqrt(1e4 / 4.5), 0.5);
}

TEST(Thermalize, IdentityAndFixedPoint) {
  const BathSpec bath = BathSpec::from_quality(1e5, 100.0, kOmegaM);
  const GaussianState g = conditional_update(thermal_gaussian(10.0), 1.5, 2.0, 3.0);
  const GaussianState same = thermalize(g, bath, 0.0);
  EXPECT_LT((same.cov() - g.cov()).norm(), 1e-15);
  EXPECT_LT((same.mean() - g.mean()).norm(), 1e-15);
  const GaussianState late = thermalize(g, bath, 1e3 * bath.quality_factor() / kOmegaM);
  EXPECT_LT((late.cov() - thermal_gaussian(100.0).cov()).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT(late.mean().norm(), 1e-6);
}

TEST(Thermalize, LabFrameAddsRotation) {
  const BathSpec bath = BathSpec::from_quality(1e5, 10.0, kOmegaM);
  const GaussianState g = conditional_update(thermal_gaussian(10.0), 1.5, 0.0, 3.0);
  const double t = 0.25 / 5e5;
  const GaussianState lab = thermalize(g, bath, t, Frame::Lab);
  const GaussianState rot = rotate_gaussian(thermalize(g, bath, t, Frame::Rotating), kOmegaM * t);
  EXPECT_LT((lab.cov() - rot.cov()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Lifetime, CrossingMatchesClosedForm) {
  for (double chi : {1.2, 1.5, 2.0}) {
    const double nbar = 4.17e4;
    const BathSpec bath = BathSpec::from_quality(1e5, nbar, kOmegaM);
    const GaussianState sq(Eigen::Vector2d::Zero(),
                           Eigen::Vector2d(0.5 / (chi * chi), 0.5 * chi * chi).asDiagonal().toDenseMatrix());
    const double tau = squeezing_lifetime(chi, 1e5, nbar, kOmegaM);
    EXPECT_NEAR(crossing_time(sq, bath) / tau, 1.0, 0.02) << chi;
  }
}

TEST(Lifetime, ReferenceDevice) {
  const double nbar = bose_einstein_occupation(1.0, kOmegaM, OccupationModel::HighTemperature);
  EXPECT_NEAR(nbar, constants::k_boltzmann / (constants::hbar * kOmegaM), 1e-6);
  EXPECT_NEAR(nbar, 4.17e4, 0.01e4);
  EXPECT_NEAR(squeezing_lifetime(1.5, 1e5, nbar, kOmegaM), 2.1e-7, 0.02 * 2.1e-7);
}

TEST(Lifetime, Scaling) {
  EXPECT_NEAR(squeezing_lifetime(1.5, 1e5, 2e4, kOmegaM) / squeezing_lifetime(1.5, 1e5, 1e4, kOmegaM), 0.5, 1e-12);
  EXPECT_NEAR(squeezing_lifetime(1.0 + 1e-9, 1e5, 1e4, kOmegaM), 1e5 / (1e4 * kOmegaM) * 1e-9, 1e-20);
  EXPECT_THROW(squeezing_lifetime(0.9, 1e5, 1e4, kOmegaM), DomainError);
}

TEST(Purification, ClosedForms) {
  EXPECT_NEAR(predicted_neff2(1.5), 0.047158766766450255, 1e-12);
  EXPECT_LT(predicted_neff2(1e3), 1e-12);
  EXPECT_NEAR(predicted_neff2_thermal(1.5, 1e5, 4.17e4), 0.15, 0.03);
}

TEST(Occupation, BoseEinsteinAgainstHighTemperature) {
  const double be = bose_einstein_occupation(1.0, kOmegaM);
  const double ht = bose_einstein_occupation(1.0, kOmegaM, OccupationModel::HighTemperature);
  EXPECT_NEAR(be, ht - 0.5, 1e-3);
}

}  // namespace
