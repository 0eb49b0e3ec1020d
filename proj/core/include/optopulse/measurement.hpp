#pragma once

// Pulsed position measurement on number-basis states. The Kraus operator for
// outcome p is diagonal in position,
//   Upsilon(p) = (2 pi V)^{-1/4} exp(i Omega X - (p - chi X)^2 / (4 V)),
// so \int dp Upsilon^dag Upsilon = 1 and Pr(p) = Tr(Upsilon rho Upsilon^dag).

#include <cstdint>
#include <optional>
#include <vector>

#include "optopulse/grid.hpp"
#include "optopulse/hilbert.hpp"

namespace optopulse {
class Rng;
}

namespace optopulse::measurement {

/// How extra classical noise enters. RecordOnly widens the recorded outcome
/// distribution but leaves the state update untouched; Subsumed adds it to
/// the optical phase variance inside Upsilon.
enum class NoiseMode { RecordOnly, Subsumed };

struct MeasurementSpec {
  double chi = 0.0;
  double omega_kick = 0.0;
  double var_pl_in = 0.5;
  double extra_noise_var = 0.0;
  NoiseMode noise_mode = NoiseMode::RecordOnly;

  void validate() const;
  /// Variance of the outcome record around chi X.
  double record_variance() const { return var_pl_in + extra_noise_var; }
  /// Variance V used in Upsilon for the state update.
  double conditioning_variance() const {
    return noise_mode == NoiseMode::Subsumed ? var_pl_in + extra_noise_var : var_pl_in;
  }
};

struct MeasurementRecord {
  double p_l = 0.0;
  double theta = 0.0;
  MeasurementSpec spec;
  std::optional<double> known_mean;  ///< expected chi <X> of the prepared state
};

/// Number-basis matrix of Upsilon(p_l) with phase variance `variance`.
hilbert::Matrix upsilon_matrix(const MeasurementSpec& spec, double p_l, int n_max, double variance);
/// Same with the spec's conditioning variance.
hilbert::Matrix upsilon_matrix(const MeasurementSpec& spec, double p_l, int n_max);

/// Number-basis matrix of the effect Upsilon^dag Upsilon(p_l), a Gaussian of
/// p_l - chi X with the given variance. Built as a function of X directly, not
/// as a product of truncated Upsilon matrices.
hilbert::Matrix effect_matrix(const MeasurementSpec& spec, double p_l, int n_max, double variance);

/// Conditional state Upsilon rho Upsilon^dag / Pr. Throws TruncationError when
/// the result no longer fits the truncation and NumericError for outcomes
/// of vanishing probability.
hilbert::FockState apply_upsilon(const hilbert::FockState& state, const MeasurementSpec& spec, double p_l);

struct OutcomeDensity {
  UniformGrid p;
  std::vector<double> values;

  double integral() const;
};

/// Outcome density as the rotated position marginal convolved with the
/// Gaussian record kernel (variance record_variance()). The grid must span
/// mean +- 6 sigma of the outcome.
OutcomeDensity outcome_pdf(const hilbert::FockState& state, const MeasurementSpec& spec, const UniformGrid& p_grid,
                           double theta = 0.0);

/// Tr(E(p) rho) with E from effect_matrix at the record variance.
OutcomeDensity outcome_pdf_trace(const hilbert::FockState& state, const MeasurementSpec& spec,
                                 const UniformGrid& p_grid, double theta = 0.0);

/// Inverse-CDF sampler for the outcome of a pulse at quadrature angle theta.
/// The tabulated density spans mean +- 8 sigma and is refined until its
/// integral is stable to 1e-9.
class OutcomeSampler {
 public:
  OutcomeSampler(const hilbert::FockState& state, const MeasurementSpec& spec, double theta = 0.0);

  double operator()(Rng& rng) const;
  /// Outcome at cumulative probability u in (0, 1).
  double quantile(double u) const;
  const OutcomeDensity& density() const { return pdf_; }

 private:
  OutcomeDensity pdf_;
  std::vector<double> cdf_;
};

double sample_outcome_fock(const hilbert::FockState& state, const MeasurementSpec& spec, std::uint64_t seed);

/// p_l - known_mean; throws DomainError when the record has no known mean.
double compensate(const MeasurementRecord& record);

/// \int dp E(p) over `p_grid` (trapezoid), E at the conditioning variance.
hilbert::Matrix povm_integral(const MeasurementSpec& spec, int n_max, const UniformGrid& p_grid);

}  // namespace optopulse::measurement
