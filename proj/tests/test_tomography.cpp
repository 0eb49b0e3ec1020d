#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "optopulse/errors.hpp"
#include "optopulse/hilbert.hpp"
#include "optopulse/measurement.hpp"
#include "optopulse/stats.hpp"
#include "optopulse/tomography.hpp"

namespace {

using namespace optopulse;
using namespace optopulse::hilbert;
using namespace optopulse::tomography;
using measurement::MeasurementSpec;
using measurement::OutcomeDensity;

constexpr double kPi = std::numbers::pi;

MeasurementSpec strength(double chi, double extra = 0.0) {
  MeasurementSpec s;
  s.chi = chi;
  s.extra_noise_var = extra;
  return s;
}

Kernel exact_kernel(const MeasurementSpec& spec) {
  const double v = spec.record_variance();
  return gaussian_kernel(v, UniformGrid::centered(8.0 * std::sqrt(v), 801), spec.chi);
}

double spread(const FockState& s, const MeasurementSpec& spec, double theta) {
  const Moments m = moments(rotate(s, theta));
  return std::abs(spec.chi * m.mean(0)) +
         8.0 * std::sqrt(spec.record_variance() + spec.chi * spec.chi * m.cov(0, 0));
}

OutcomeDensity exact_outcomes(const FockState& s, const MeasurementSpec& spec, double theta) {
  const double half = spread(s, spec, theta);
  const double step = 0.025 * spec.chi;
  return measurement::outcome_pdf(s, spec, UniformGrid::centered(half, 2 * std::size_t(std::ceil(half / step)) + 1),
                                  theta);
}

std::vector<Marginal> exact_marginals(const FockState& s, const MeasurementSpec& spec, std::size_t count,
                                      double regularization = 1e-4) {
  std::vector<Marginal> out;
  for (double theta : half_period_angles(count)) {
    out.push_back(deconvolve(exact_outcomes(s, spec, theta), exact_kernel(spec), regularization, theta));
  }
  return out;
}

double variance_of(const OutcomeDensity& d) {
  double m0 = 0.0, m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    m0 += d.values[i];
    m1 += d.values[i] * d.p[i];
    m2 += d.values[i] * d.p[i] * d.p[i];
  }
  return m2 / m0 - (m1 / m0) * (m1 / m0);
}

TEST(Acquire, VacuumIsIsotropic) {
  AcquireOptions opts;
  opts.keep_samples = true;
  const Tomogram t = acquire(new_thermal(0.0, 20), strength(1.5), half_period_angles(12), 20000, 5, opts);
  ASSERT_EQ(t.samples.size(), 12u);
  for (const auto& s : t.samples) EXPECT_NEAR(stats::sample_moments(s).variance, 1.625, 0.07);
  for (const Histogram& h : t.histograms) EXPECT_LE(h.total(), 20000.0);
  EXPECT_NO_THROW(t.validate());
}

TEST(Acquire, ThreadCountDoesNotChangeData) {
  const FockState s = new_cat(1.0, CatAxis::PlusI, 30);
  const std::vector<double> angles = half_period_angles(12);
  AcquireOptions one, four;
  four.threads = 4;
  const Tomogram a = acquire(s, strength(2.0), angles, 2000, 77, one);
  const Tomogram b = acquire(s, strength(2.0), angles, 2000, 77, four);
  for (std::size_t j = 0; j < angles.size(); ++j) EXPECT_EQ(a.histograms[j].counts, b.histograms[j].counts);
}

TEST(Acquire, RejectsEmptyAngles) {
  EXPECT_THROW(acquire(new_thermal(0.0, 20), strength(1.5), std::vector<double>{}, 100, 1), DomainError);
}

TEST(Acquire, CatQuarterTurnIsBimodal) {
  const FockState s = new_cat(1.5, CatAxis::PlusI, 40);
  const Tomogram t = acquire(s, strength(2.0), std::vector<double>{kPi / 2.0}, 50000, 9);
  const OutcomeDensity d = t.histograms[0].density();
  const double lobe = 2.0 * 1.5 * std::sqrt(2.0);
  EXPECT_LT(interpolate(d.p, d.values, 0.0), 0.5 * interpolate(d.p, d.values, lobe));
  EXPECT_LT(interpolate(d.p, d.values, 0.0), 0.5 * interpolate(d.p, d.values, -lobe));
}

TEST(Acquire, SqueezedVarianceFollowsRotation) {
  const FockState prepared = measurement::apply_upsilon(new_thermal(1.0, 60), strength(1.5), 0.0);
  const Moments m = moments(prepared);
  const double var_x = 0.5 / (2.25 + 1.0 / 3.0);
  EXPECT_NEAR(m.cov(0, 0), var_x, 1e-6);
  AcquireOptions opts;
  opts.keep_samples = true;
  const std::vector<double> angles{0.0, kPi / 4.0, kPi / 2.0};
  const Tomogram t = acquire(prepared, strength(1.0), angles, 40000, 21, opts);
  for (std::size_t j = 0; j < angles.size(); ++j) {
    const double c = std::cos(angles[j]), s = std::sin(angles[j]);
    const double expected = 0.5 + var_x * c * c + m.cov(1, 1) * s * s;
    EXPECT_NEAR(stats::sample_moments(t.samples[j]).variance, expected, 5.0 * expected * std::sqrt(2.0 / 40000.0));
  }
}

TEST(Acquire, AngleShiftCovariance) {
  const FockState s = new_cat(1.5, CatAxis::PlusI, 40);
  AcquireOptions opts;
  opts.keep_samples = true;
  const Tomogram a = acquire(rotate(s, 0.4), strength(2.0), std::vector<double>{0.3}, 20000, 1, opts);
  const Tomogram b = acquire(s, strength(2.0), std::vector<double>{0.7}, 20000, 2, opts);
  EXPECT_GT(stats::ks_two_sample_pvalue(a.samples[0], b.samples[0]), 0.01);
}

TEST(Kernel, CalibratedVariance) {
  const Kernel k = calibrate_kernel(strength(1.5), 100000, 3);
  EXPECT_NEAR(k.integral(), 1.0, 1e-6);
  EXPECT_NEAR(k.mean(), 0.0, 0.01);
  EXPECT_NEAR(k.variance(), 0.5, 0.01);
  EXPECT_NEAR(calibrate_kernel(strength(1.5, 0.25), 100000, 4).variance(), 0.75, 0.015);
}

TEST(Kernel, GaussianIsSymmetric) {
  const Kernel k = exact_kernel(strength(2.0));
  EXPECT_NEAR(k.integral(), 1.0, 1e-6);
  for (std::size_t i = 0; i < k.values.size() / 2; ++i) {
    EXPECT_NEAR(k.values[i], k.values[k.values.size() - 1 - i], 1e-15);
  }
  EXPECT_NEAR(k.variance(), 0.5, 1e-6);
}

TEST(Kernel, ChiCalibration) {
  const std::vector<double> displacements{-2.0, -1.0, 0.0, 1.0, 2.0};
  const ChiCalibration c = calibrate_chi(strength(1.5), displacements, 100000, 8);
  EXPECT_NEAR(c.chi, 1.5, 0.015);
  EXPECT_NEAR(c.offset, 0.0, 0.01);
}

TEST(Deconvolve, GaussianRoundTrip) {
  const FockState s = new_thermal(1.0, 60);
  const MeasurementSpec spec = strength(2.0);
  const Marginal back = deconvolve(exact_outcomes(s, spec, 0.0), exact_kernel(spec), 1e-6);
  const Marginal truth = marginal(s, 0.0, back.x);
  double l2 = 0.0;
  for (std::size_t i = 0; i < back.values.size(); ++i) l2 += std::pow(back.values[i] - truth.values[i], 2);
  EXPECT_LT(std::sqrt(l2 * back.x.step()), 1e-3);
  EXPECT_NEAR(back.integral(), 1.0, 1e-9);
}

TEST(Deconvolve, RestoresCatFringes) {
  const FockState s = new_cat(1.5, CatAxis::PlusI, 40);
  const MeasurementSpec spec = strength(2.0);
  const Marginal back = deconvolve(exact_outcomes(s, spec, 0.0), exact_kernel(spec), 1e-4);
  const double truth = fringe_visibility(marginal(s, 0.0, UniformGrid::centered(8.0, 321)));
  EXPECT_GE(fringe_visibility(back) / truth, 0.95);
}

TEST(Deconvolve, RejectsBadInput) {
  const MeasurementSpec spec = strength(2.0);
  const OutcomeDensity d = exact_outcomes(new_thermal(0.0, 20), spec, 0.0);
  Kernel blind = exact_kernel(spec);
  blind.chi = 0.0;
  EXPECT_THROW(deconvolve(d, blind), DomainError);
  EXPECT_THROW(deconvolve(d, exact_kernel(spec), -1.0), DomainError);
}

TEST(Reconstruct, VacuumFidelity) {
  const FockState s = new_thermal(0.0, 20);
  const WignerGrid w = reconstruct_wigner(exact_marginals(s, strength(1.5), 24));
  EXPECT_GE(fidelity(wigner_to_fock(w, 20), s), 0.999);
}

TEST(Reconstruct, CatFidelityAndNegativity) {
  const FockState s = new_cat(1.5, CatAxis::PlusI, 40);
  const WignerGrid w = reconstruct_wigner(exact_marginals(s, strength(2.0), 24));
  EXPECT_GE(fidelity(wigner_to_fock(w, 40), s), 0.98);
  EXPECT_LT(w.min(), -0.01);
}

TEST(Reconstruct, ThermalOccupation) {
  const FockState s = new_thermal(5.0, default_n_max(5.0));
  ReconstructOptions opts;
  opts.half_width = 12.0;
  const Moments m = wigner_moments(reconstruct_wigner(exact_marginals(s, strength(1.5), 24), opts));
  const double n_eff = 0.5 * (std::sqrt(4.0 * m.cov(0, 0) * m.cov(1, 1)) - 1.0);
  EXPECT_NEAR(n_eff, 5.0, 0.1);
}

TEST(Reconstruct, NeedsTwelveAngles) {
  const FockState s = new_thermal(0.0, 20);
  EXPECT_THROW(reconstruct_wigner(exact_marginals(s, strength(1.5), 11)), DomainError);
}

TEST(Reconstruct, ForwardSimulationReproducesData) {
  const FockState s = new_cat(1.5, CatAxis::PlusI, 40);
  const MeasurementSpec spec = strength(2.0);
  const FockState rec = wigner_to_fock(reconstruct_wigner(exact_marginals(s, spec, 24)), 40);
  AcquireOptions opts;
  opts.keep_samples = true;
  const std::vector<double> angles{0.0, kPi / 4.0, kPi / 2.0};
  const Tomogram a = acquire(s, spec, angles, 5000, 31, opts);
  const Tomogram b = acquire(rec, spec, angles, 5000, 32, opts);
  for (std::size_t j = 0; j < angles.size(); ++j) {
    EXPECT_GT(stats::ks_two_sample_pvalue(a.samples[j], b.samples[j]), 0.01) << angles[j];
  }
}

TEST(Outcomes, ScaledVarianceAddsKernel) {
  const FockState s = new_cat(1.5, CatAxis::PlusI, 40);
  const MeasurementSpec spec = strength(2.0);
  for (double theta : {0.0, 0.9, kPi / 2.0}) {
    const double scaled = variance_of(exact_outcomes(s, spec, theta)) / 4.0;
    EXPECT_NEAR(scaled, moments(rotate(s, theta)).cov(0, 0) + 0.5 / 4.0, 1e-6) << theta;
  }
}

TEST(Fringes, ThermalHasNone) {
  EXPECT_THROW(fringe_visibility(marginal(new_thermal(2.0, 80), 0.0, UniformGrid::centered(10.0, 401))), NumericError);
}

TEST(Fringes, ConvolutionSuppression) {
  const FockState s = new_cat(1.5, CatAxis::PlusI, 40);
  const OutcomeDensity d = exact_outcomes(s, strength(2.0), 0.0);
  Marginal record{0.0, UniformGrid(d.p.start() / 2.0, d.p.step() / 2.0, d.p.size()), d.values};
  for (double& v : record.values) v *= 2.0;
  const double ratio =
      fringe_visibility(record) / fringe_visibility(marginal(s, 0.0, UniformGrid::centered(8.0, 321)));
  EXPECT_NEAR(ratio, std::exp(-0.9), 0.02);
}

TEST(Tomogram, JsonRoundTrip) {
  const Tomogram t = acquire(new_thermal(0.5, 40), strength(1.5), half_period_angles(12), 500, 4);
  const Tomogram back = Tomogram::from_json(nlohmann::json::parse(t.to_json().dump()));
  EXPECT_EQ(back.angles, t.angles);
  EXPECT_EQ(back.shots, t.shots);
  EXPECT_DOUBLE_EQ(back.spec.chi, 1.5);
  ASSERT_EQ(back.histograms.size(), t.histograms.size());
  for (std::size_t j = 0; j < t.histograms.size(); ++j) {
    EXPECT_EQ(back.histograms[j].edges, t.histograms[j].edges);
    EXPECT_EQ(back.histograms[j].counts, t.histograms[j].counts);
  }
}

TEST(Tomogram, RejectsNegativeCounts) {
  Tomogram t = acquire(new_thermal(0.0, 20), strength(1.5), half_period_angles(12), 200, 4);
  t.histograms[3].counts[0] = -1.0;
  EXPECT_THROW(t.validate(), DomainError);
}

}  // namespace
