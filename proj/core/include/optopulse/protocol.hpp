#pragma once

// Pulse sequences: measurement pulses, free evolution and bath coupling
// applied to a Gaussian or number-basis state.

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "optopulse/gaussian.hpp"
#include "optopulse/hilbert.hpp"
#include "optopulse/measurement.hpp"

namespace optopulse::protocol {

enum class Representation { Gaussian, Fock };

struct InitialState {
  enum class Kind { Thermal, Coherent, Cat };
  Kind kind = Kind::Thermal;
  double nbar = 0.0;
  std::complex<double> alpha{0.0, 0.0};
  double delta = 0.0;
  hilbert::CatAxis axis = hilbert::CatAxis::PlusI;
  int n_max = 0;  ///< 0 selects hilbert::default_n_max

  static InitialState thermal(double nbar) { return {Kind::Thermal, nbar, {}, 0.0, hilbert::CatAxis::PlusI, 0}; }
};

hilbert::FockState prepare_fock(const InitialState& init);
/// Gaussian state for thermal and coherent descriptors; DomainError for cats.
gaussian::GaussianState prepare_gaussian(const InitialState& init);

struct PulseStep {
  measurement::MeasurementSpec spec;
  std::optional<double> forced_outcome;
};

/// Free harmonic rotation by `theta`.
struct EvolveStep {
  double theta = 0.0;
};

/// Bath coupling for `duration` seconds; includes the free rotation
/// omega_m * duration.
struct ThermalizeStep {
  double duration = 0.0;
  gaussian::BathSpec bath;
};

using Step = std::variant<PulseStep, EvolveStep, ThermalizeStep>;

struct SequenceConfig {
  InitialState initial;
  std::vector<Step> steps;
  Representation representation = Representation::Gaussian;
  std::uint64_t master_seed = 0;

  void validate() const;
};

struct Snapshot {
  hilbert::Moments moments;
  double n_eff = 0.0;
  std::optional<hilbert::FockState> state;  ///< number-basis runs only
};

struct Trajectory {
  std::vector<Snapshot> snapshots;  ///< initial state plus one per step
  std::vector<measurement::MeasurementRecord> records;

  nlohmann::json to_json() const;
};

/// Executes the steps in order. Pulse k draws its outcome from the uniform
/// stream derive_seed(master_seed, k), inverted through the Gaussian or the
/// tabulated number-basis outcome distribution, unless the outcome is forced.
Trajectory run_sequence(const SequenceConfig& cfg);

/// Pulse, quarter-period gap (bath-coupled when given), pulse; outcomes
/// forced to 0, Gaussian representation.
SequenceConfig purification_sequence(double nbar, double chi, const std::optional<gaussian::BathSpec>& bath = {},
                                     double omega = 0.0);

struct PurificationResult {
  gaussian::GaussianState after_first;
  gaussian::GaussianState final_state;
  double n_eff_first = 0.0;
  double n_eff = 0.0;
};

/// Two pulses a quarter period apart on a thermal state (Gaussian path),
/// with the bath acting during the gap when given. Throws NumericError if
/// the final n_eff depends on the outcomes.
PurificationResult purify_two_pulse(double nbar, double chi, const std::optional<gaussian::BathSpec>& bath = {},
                                    double omega = 0.0);

struct ReadoutPoint {
  double theta = 0.0;
  double mean = 0.0;      ///< of compensated outcomes
  double variance = 0.0;  ///< of compensated outcomes (unbiased)
};

/// For every angle, prepares `shots` fresh realizations with `prep`
/// (Gaussian representation, sampled outcomes), rotates by theta, applies
/// `readout` and records P_L - chi <X_theta> of the prepared conditional state.
std::vector<ReadoutPoint> readout_session(const SequenceConfig& prep, std::span<const double> theta_grid,
                                          std::size_t shots, const measurement::MeasurementSpec& readout);

/// Kick estimate from pulse, free rotation by `theta`, and a read-out pulse on
/// the ground state: -mean(compensated outcome) / chi_known. The compensation
/// uses the conditional means without the kick, so the readout offset is
/// -chi Omega sin(theta).
double calibrate_omega(double chi_known, const measurement::MeasurementSpec& pulse, std::size_t shots,
                       std::uint64_t seed, double theta = 1.5707963267948966);

}  // namespace optopulse::protocol
