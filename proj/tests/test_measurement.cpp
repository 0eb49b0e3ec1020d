#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "optopulse/errors.hpp"
#include "optopulse/gaussian.hpp"
#include "optopulse/hilbert.hpp"
#include "optopulse/measurement.hpp"
#include "optopulse/rng.hpp"
#include "optopulse/stats.hpp"
#include "optopulse/tomography.hpp"

namespace {

using namespace optopulse;
using namespace optopulse::hilbert;
using namespace optopulse::measurement;

MeasurementSpec strength(double chi, double omega = 0.0) {
  MeasurementSpec s;
  s.chi = chi;
  s.omega_kick = omega;
  return s;
}

double density_variance(const OutcomeDensity& d) {
  double m0 = 0.0, m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    m0 += d.values[i];
    m1 += d.values[i] * d.p[i];
    m2 += d.values[i] * d.p[i] * d.p[i];
  }
  return m2 / m0 - (m1 / m0) * (m1 / m0);
}

TEST(Upsilon, ZeroStrengthIsIdentity) {
  const FockState s = new_cat(1.2, CatAxis::PlusI, 30);
  const FockState out = apply_upsilon(s, strength(0.0), 2.7);
  EXPECT_LT((out.density() - s.density()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Upsilon, VacuumBecomesSqueezedVacuum) {
  const FockState out = apply_upsilon(new_thermal(0.0, 40), strength(1.5), 0.0);
  const Moments m = moments(out);
  EXPECT_NEAR(m.cov(0, 0), 0.5 / 3.25, 1e-6);
  EXPECT_NEAR(m.cov(1, 1), 0.5 + 2.25 / 2.0, 1e-6);
  EXPECT_NEAR(out.purity(), 1.0, 1e-9);
}

TEST(Upsilon, ThermalMatchesGaussianUpdate) {
  const FockState out = apply_upsilon(new_thermal(10.0, default_n_max(10.0)), strength(1.5), 6.0);
  const gaussian::GaussianState g = gaussian::conditional_update(gaussian::thermal_gaussian(10.0), 1.5, 0.0, 6.0);
  const Moments m = moments(out);
  EXPECT_NEAR(m.mean(0), g.mean()(0), 1e-3);
  EXPECT_NEAR(m.mean(1), g.mean()(1), 1e-3);
  EXPECT_NEAR(m.cov(0, 0), g.var_x(), 1e-3);
  EXPECT_NEAR(m.cov(1, 1), g.var_p(), 1e-3);
}

TEST(Upsilon, KickLeavesPositionAlone) {
  for (const FockState& s : {new_thermal(2.0, 120), new_cat(1.5, CatAxis::PlusI, 80), new_coherent({1.0, 0.5}, 80)}) {
    const Moments a = moments(apply_upsilon(s, strength(1.5, 0.0), 0.8));
    const Moments b = moments(apply_upsilon(s, strength(1.5, 2.0), 0.8));
    EXPECT_NEAR(a.mean(0), b.mean(0), 1e-9);
    EXPECT_NEAR(a.cov(0, 0), b.cov(0, 0), 1e-9);
    EXPECT_NEAR(b.mean(1) - a.mean(1), 2.0, 1e-6);
  }
}

TEST(Upsilon, NeverBroadensPosition) {
  for (const FockState& s : {new_thermal(3.0, 80), new_cat(1.5, CatAxis::PlusI, 40), new_cat(1.0, CatAxis::Real, 30)}) {
    const double before = moments(s).cov(0, 0);
    for (double p : {-3.0, -0.5, 0.0, 1.0, 2.5}) {
      EXPECT_LE(moments(apply_upsilon(s, strength(1.2), p)).cov(0, 0), before + 1e-12);
    }
  }
}

TEST(OutcomePdf, VacuumIsGaussian) {
  const OutcomeDensity d = outcome_pdf(new_thermal(0.0, 20), strength(1.5), UniformGrid::centered(10.0, 2001));
  EXPECT_NEAR(d.integral(), 1.0, 1e-6);
  EXPECT_NEAR(density_variance(d), 1.625, 1e-6);
}

TEST(OutcomePdf, ConvolutionMatchesTrace) {
  const FockState s = new_cat(1.5, CatAxis::PlusI, 40);
  const UniformGrid p = UniformGrid::centered(30.0, 1501);
  for (double theta : {0.0, 0.7, 1.5}) {
    const OutcomeDensity a = outcome_pdf(s, strength(2.0), p, theta);
    const OutcomeDensity b = outcome_pdf_trace(s, strength(2.0), p, theta);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) worst = std::max(worst, std::abs(a.values[i] - b.values[i]));
    EXPECT_LT(worst, 1e-6) << theta;
    EXPECT_NEAR(a.integral(), 1.0, 1e-6);
  }
}

TEST(OutcomePdf, RejectsNarrowGrid) {
  EXPECT_THROW(outcome_pdf(new_thermal(0.0, 20), strength(1.5), UniformGrid::centered(2.0, 201)), GridError);
}

TEST(OutcomePdf, FringeSuppression) {
  const FockState s = new_cat(1.5, CatAxis::PlusI, 40);
  const double chi = 2.0;
  const UniformGrid x = UniformGrid::centered(6.0, 1201);
  const Marginal bare = marginal(s, 0.0, x);
  const OutcomeDensity d = outcome_pdf(s, strength(chi), UniformGrid::centered(chi * 6.0, 1201));
  Marginal convolved{0.0, UniformGrid(d.p.start() / chi, d.p.step() / chi, d.p.size()), {}};
  for (double v : d.values) convolved.values.push_back(chi * v);
  const double ratio = tomography::fringe_visibility(convolved) / tomography::fringe_visibility(bare);
  EXPECT_NEAR(ratio, std::exp(-2.0 * 2.25 / (chi * chi + 1.0)), 1e-3);
}

TEST(OutcomePdf, StrongMeasurementApproachesMarginal) {
  const FockState s = new_cat(1.5, CatAxis::PlusI, 40);
  const double chi = 50.0;
  const OutcomeDensity d = outcome_pdf(s, strength(chi), UniformGrid::centered(chi * 6.0, 6001));
  const UniformGrid x = UniformGrid::centered(4.0, 401);
  const Marginal m = marginal(s, 0.0, x);
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    worst = std::max(worst, std::abs(chi * interpolate(d.p, d.values, chi * x[i]) - m.values[i]));
  }
  EXPECT_LT(worst, 0.01);
}

TEST(Sampling, VacuumVariance) {
  const OutcomeSampler sampler(new_thermal(0.0, 20), strength(1.5));
  Rng rng(11);
  std::vector<double> x(100000);
  for (double& v : x) v = sampler(rng);
  EXPECT_NEAR(stats::sample_moments(x).variance, 1.625, 0.03);
  EXPECT_NEAR(stats::sample_moments(x).mean, 0.0, 0.02);
}

TEST(Sampling, ZeroStrengthIsPhaseNoise) {
  const OutcomeSampler sampler(new_cat(1.5, CatAxis::PlusI, 40), strength(0.0));
  Rng rng(3), ref(4);
  std::vector<double> x(20000), y(20000);
  for (double& v : x) v = sampler(rng);
  for (double& v : y) v = ref.normal(0.0, std::sqrt(0.5));
  EXPECT_NEAR(stats::sample_moments(x).variance, 0.5, 0.02);
  EXPECT_GT(stats::ks_two_sample_pvalue(x, y), 0.01);
}

TEST(Sampling, DeterministicUnderSeed) {
  const FockState s = new_thermal(1.0, 40);
  EXPECT_EQ(sample_outcome_fock(s, strength(1.5), 99), sample_outcome_fock(s, strength(1.5), 99));
  EXPECT_NE(sample_outcome_fock(s, strength(1.5), 99), sample_outcome_fock(s, strength(1.5), 100));
}

TEST(Sampling, CatHistogramMatchesDensity) {
  const OutcomeSampler sampler(new_cat(1.5, CatAxis::PlusI, 40), strength(2.0));
  Rng rng(2024);
  std::vector<double> x(100000);
  for (double& v : x) v = sampler(rng);
  const double lo = -8.0, hi = 8.0;
  const std::size_t bins = 80;
  const tomography::Histogram h = tomography::make_histogram(x, lo, hi, bins);
  std::vector<double> expected(bins);
  const OutcomeDensity& d = sampler.density();
  for (std::size_t b = 0; b < bins; ++b) {
    const UniformGrid sub = UniformGrid::linspace(h.edges[b], h.edges[b + 1], 41);
    std::vector<double> f;
    for (double p : sub.points()) f.push_back(interpolate(d.p, d.values, p));
    expected[b] = trapezoid(f, sub.step()) * static_cast<double>(x.size());
  }
  EXPECT_GT(stats::chi_square_pvalue(h.counts, expected), 0.01);
}

TEST(Compensate, SubtractsKnownMean) {
  MeasurementRecord r;
  r.p_l = 3.0;
  r.known_mean = 3.0;
  EXPECT_DOUBLE_EQ(compensate(r), 0.0);
  r.known_mean.reset();
  EXPECT_THROW(compensate(r), DomainError);
}

TEST(Povm, Completeness) {
  const Matrix m = povm_integral(strength(1.5, 0.7), 20, UniformGrid::centered(40.0, 4001));
  EXPECT_LT((m - Matrix::Identity(21, 21)).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(NoiseMode, RecordOnlyLeavesConditioningAlone) {
  const FockState s = new_thermal(1.0, 40);
  MeasurementSpec noisy = strength(1.5);
  noisy.extra_noise_var = 0.3;
  const Moments plain = moments(apply_upsilon(s, strength(1.5), 1.0));
  EXPECT_NEAR(moments(apply_upsilon(s, noisy, 1.0)).cov(0, 0), plain.cov(0, 0), 1e-12);
  const UniformGrid p = UniformGrid::centered(16.0, 3201);
  EXPECT_NEAR(density_variance(outcome_pdf(s, noisy, p)), density_variance(outcome_pdf(s, strength(1.5), p)) + 0.3,
              1e-6);

  noisy.noise_mode = NoiseMode::Subsumed;
  const gaussian::GaussianState g = gaussian::conditional_update(gaussian::thermal_gaussian(1.0), 1.5, 0.0, 1.0, 0.8);
  EXPECT_NEAR(moments(apply_upsilon(s, noisy, 1.0)).cov(0, 0), g.var_x(), 1e-6);
  EXPECT_NEAR(density_variance(outcome_pdf(s, noisy, p)), 0.8 + 2.25 * 1.5, 1e-6);
}

}  // namespace
