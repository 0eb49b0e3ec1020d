#pragma once

// Cavity response to a drive pulse: intracavity envelope, phase-accumulation
// mode, measurement strength chi and momentum kick Omega, plus first-order
// corrections for mechanical motion during the pulse.

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "optopulse/grid.hpp"

namespace optopulse::pulse {

struct PhysicalParams {
  double wavelength = 1064e-9;  ///< m
  double cavity_length = 4.0 * 1064e-9;  ///< m
  double mass = 1e-11;  ///< kg
  double omega_m = 2.0 * 3.141592653589793 * 5e5;  ///< rad/s
  double finesse = 7000.0;
};

struct DerivedPhysical {
  double x0 = 0.0;       ///< zero-point length sqrt(hbar / (m omega_m)), m
  double omega_c = 0.0;  ///< optical angular frequency, rad/s
  double g0 = 0.0;       ///< omega_c x0 / (sqrt2 L), rad/s
  double kappa = 0.0;    ///< amplitude decay rate pi c / (2 F L), rad/s
};

DerivedPhysical derive_physical(const PhysicalParams& p);

enum class EnvelopeShape { Optimal, Gaussian, Square, OneSidedExponential, Sampled };

/// Real drive envelope alpha_in(t) sampled on a uniform time grid with
/// \int alpha_in^2 dt = 1. Built-in shapes keep their analytic form so the
/// cavity equations can be integrated below the sampling step.
struct Envelope {
  UniformGrid t;
  std::vector<double> values;
  EnvelopeShape shape = EnvelopeShape::Sampled;
  double rate = 0.0;  ///< kappa for Optimal, width/duration/rate otherwise
  std::function<double(double)> analytic;
  std::vector<double> breakpoints;  ///< kinks or jumps of `analytic`

  double energy() const;
};

/// [-span/kappa, span/kappa] with `points` samples.
UniformGrid default_time_grid(double kappa, std::size_t points = 4096, double span = 10.0);

/// sqrt(kappa) e^{-kappa |t|}; the grid must reach +-10/kappa.
Envelope optimal_drive(double kappa, const UniformGrid& t);
/// Intensity |alpha_in|^2 is a normal density of standard deviation `sigma` (s).
Envelope gaussian_drive(double sigma, const UniformGrid& t);
/// Flat-top of length `duration` centred on 0.
Envelope square_drive(double duration, const UniformGrid& t);
/// sqrt(2 rate) e^{-rate t} for t >= 0.
Envelope one_sided_exponential_drive(double rate, const UniformGrid& t);
/// Arbitrary samples, rescaled to unit energy (trapezoid rule).
Envelope sampled_envelope(const UniformGrid& t, std::vector<double> values);

struct PulseSpec {
  double kappa = 0.0;
  double g0 = 0.0;
  double n_photons = 0.0;
  double eta = 1.0;  ///< detection efficiency in (0, 1]
  Envelope drive;

  void validate() const;
};

struct CavityResponse {
  UniformGrid t;
  std::vector<double> alpha;        ///< intracavity envelope (dimensionless)
  std::vector<double> phi;          ///< phase-accumulation mode, s^{-1/2}
  std::vector<double> lo_envelope;  ///< n_phi * phi, unit energy
  double n_phi = 0.0;               ///< (\int phi^2 dt)^{-1/2}
  double alpha_energy = 0.0;        ///< \int alpha^2 dt, s
  double chi_ideal = 0.0;           ///< before detection losses
  double chi = 0.0;                 ///< sqrt(eta) chi_ideal
  double omega_kick = 0.0;          ///< sqrt2 g0 N_p \int alpha^2 dt
  std::optional<double> omega_closed_form;  ///< (3/sqrt2)(g0/kappa) N_p, optimal drive only
};

CavityResponse compute_response(const PulseSpec& pulse);

/// compute_response(pulse).chi
double measurement_strength(const PulseSpec& pulse);

struct FiniteEvolutionCoeffs {
  std::array<double, 3> xi{};
  std::array<double, 3> norms{};
  double zeta = 0.0;
};

/// First-order (in omega_m / kappa) input-output coefficients. Throws
/// DomainError when omega_m / kappa > 0.1.
FiniteEvolutionCoeffs finite_evolution_coeffs(const PulseSpec& pulse, double omega_m);

/// (1/chi^2 + zeta^2 chi^2 eps^2) / 2 with eps = omega_m / kappa.
double corrected_conditional_variance(double chi, double omega_m_over_kappa, double zeta);

/// Two-column text (time_seconds amplitude) under a `# pulse-envelope v1` header.
void write_envelope(std::ostream& out, const Envelope& e);
Envelope read_envelope(std::istream& in);

}  // namespace optopulse::pulse
