#pragma once

// Closed-form Gaussian path: first moments and covariance of (X, P).

#include <cstdint>

#include <Eigen/Core>

namespace optopulse {
class Rng;
}

namespace optopulse::gaussian {

class GaussianState {
 public:
  GaussianState() = default;
  /// Validates symmetry (1e-12 relative), positivity and det(cov) >= 1/4 - 1e-9.
  GaussianState(Eigen::Vector2d mean, Eigen::Matrix2d cov);

  const Eigen::Vector2d& mean() const { return mean_; }
  const Eigen::Matrix2d& cov() const { return cov_; }
  double var_x() const { return cov_(0, 0); }
  double var_p() const { return cov_(1, 1); }

 private:
  Eigen::Vector2d mean_ = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov_ = 0.5 * Eigen::Matrix2d::Identity();
};

enum class OccupationModel { BoseEinstein, HighTemperature };

/// Mean thermal occupation of a mode at angular frequency `omega` (rad/s).
double bose_einstein_occupation(double temperature_kelvin, double omega,
                                OccupationModel model = OccupationModel::BoseEinstein);

struct BathSpec {
  double gamma_m = 0.0;    ///< mechanical energy damping rate, rad/s
  double nbar_bath = 0.0;  ///< mean bath occupation
  double omega_m = 0.0;    ///< mechanical angular frequency, rad/s

  double quality_factor() const { return omega_m / gamma_m; }
  void validate() const;

  static BathSpec from_quality(double q, double nbar_bath, double omega_m);
  static BathSpec from_temperature(double q, double temperature_kelvin, double omega_m,
                                   OccupationModel model = OccupationModel::BoseEinstein);
};

GaussianState thermal_gaussian(double nbar);

/// Same convention as hilbert::rotate: mean -> R mean, cov -> R cov R^T with
/// R = [[cos, -sin], [sin, cos]].
GaussianState rotate_gaussian(const GaussianState& g, double theta);

struct OutcomeStats {
  double mean = 0.0;
  double variance = 0.0;
};

/// P_L ~ N(chi <X>, var_pl_in + chi^2 Var(X)).
OutcomeStats pulse_outcome_stats(const GaussianState& g, double chi, double var_pl_in = 0.5);

/// State after a pulse with outcome `p_l`. The position record is a noisy
/// readout chi X + noise(var_pl_in); conditioning follows the Gaussian
/// (Schur complement) rule, the measurement kernel adds chi^2 / (4 var_pl_in)
/// to Var(P) and the radiation-pressure kick shifts <P> by omega.
GaussianState conditional_update(const GaussianState& g, double chi, double omega, double p_l,
                                 double var_pl_in = 0.5);

double sample_outcome(const GaussianState& g, double chi, std::uint64_t seed, double var_pl_in = 0.5);
double sample_outcome(const GaussianState& g, double chi, Rng& rng, double var_pl_in = 0.5);

/// n_eff from 1 + 2 n_eff = sqrt(4 Var_X Var_P), variances taken along the
/// fixed X and P axes.
double effective_occupation(const GaussianState& g);

enum class Frame { Lab, Rotating };

/// Markovian bath for a duration `t` (s). The covariance relaxes as
/// e^{-gamma t} cov + (1 - e^{-gamma t})(nbar + 1/2) I and the mean decays at
/// gamma/2; in the lab frame the free rotation omega_m t is applied as well.
GaussianState thermalize(const GaussianState& g, const BathSpec& bath, double t, Frame frame = Frame::Lab);

/// True while gamma_m t <= 0.1, where the linear rethermalization law holds.
bool weak_coupling(const BathSpec& bath, double t);

/// Rotating-frame time at which Var_X first reaches `target`; found by
/// bracketing and root refinement on thermalize().
double crossing_time(const GaussianState& g, const BathSpec& bath, double target = 0.5);

/// tau = (Q / (nbar omega_m)) (1 - 1/chi^2) / 2; requires chi > 1.
double squeezing_lifetime(double chi, double q, double nbar, double omega_m);

/// (sqrt(1 + 1/chi^4) - 1) / 2
double predicted_neff2(double chi);
/// (sqrt(1 + 1/chi^4 + pi nbar / (Q chi^2)) - 1) / 2
double predicted_neff2_thermal(double chi, double q, double nbar);

}  // namespace optopulse::gaussian
