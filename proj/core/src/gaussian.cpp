#include "optopulse/gaussian.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>

#include <boost/math/tools/roots.hpp>

#include "optopulse/constants.hpp"
#include "optopulse/errors.hpp"
#include "optopulse/rng.hpp"

namespace optopulse::gaussian {

GaussianState::GaussianState(Eigen::Vector2d mean, Eigen::Matrix2d cov) : mean_(mean), cov_(cov) {
  if (!mean_.allFinite() || !cov_.allFinite()) throw DomainError("Gaussian state has non-finite moments");
  const double scale = cov_.cwiseAbs().maxCoeff();
  if (std::abs(cov_(0, 1) - cov_(1, 0)) > 1e-12 * scale) throw DomainError("covariance is not symmetric");
  cov_(0, 1) = cov_(1, 0) = 0.5 * (cov_(0, 1) + cov_(1, 0));
  if (!(cov_(0, 0) > 0.0) || !(cov_(1, 1) > 0.0) || cov_(0, 0) * cov_(1, 1) - cov_(0, 1) * cov_(0, 1) < 0.25 - 1e-9) {
    throw DomainError("covariance violates positivity or det(cov) >= 1/4");
  }
}

double bose_einstein_occupation(double temperature_kelvin, double omega, OccupationModel model) {
  if (!(temperature_kelvin > 0.0) || !(omega > 0.0)) throw DomainError("temperature and frequency must be positive");
  const double ratio = constants::hbar * omega / (constants::k_boltzmann * temperature_kelvin);
  if (model == OccupationModel::HighTemperature) return 1.0 / ratio;
  return 1.0 / std::expm1(ratio);
}

void BathSpec::validate() const {
  if (!(gamma_m > 0.0) || !(omega_m > 0.0) || !(nbar_bath >= 0.0)) {
    throw DomainError("bath needs positive rates and non-negative occupation");
  }
  if (quality_factor() < 1.0) throw DomainError("bath quality factor must be >= 1");
}

BathSpec BathSpec::from_quality(double q, double nbar_bath, double omega_m) {
  if (!(q > 0.0)) throw DomainError("quality factor must be positive");
  BathSpec b{omega_m / q, nbar_bath, omega_m};
  b.validate();
  return b;
}

BathSpec BathSpec::from_temperature(double q, double temperature_kelvin, double omega_m, OccupationModel model) {
  return from_quality(q, bose_einstein_occupation(temperature_kelvin, omega_m, model), omega_m);
}

GaussianState thermal_gaussian(double nbar) {
  if (!(nbar >= 0.0) || !std::isfinite(nbar)) throw DomainError("thermal occupation must be >= 0");
  return {Eigen::Vector2d::Zero(), (nbar + 0.5) * Eigen::Matrix2d::Identity()};
}

GaussianState rotate_gaussian(const GaussianState& g, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  Eigen::Matrix2d cov = r * g.cov() * r.transpose();
  cov(0, 1) = cov(1, 0);
  return {r * g.mean(), cov};
}

OutcomeStats pulse_outcome_stats(const GaussianState& g, double chi, double var_pl_in) {
  if (!(var_pl_in > 0.0)) throw DomainError("input phase variance must be positive");
  return {chi * g.mean()(0), var_pl_in + chi * chi * g.var_x()};
}

GaussianState conditional_update(const GaussianState& g, double chi, double omega, double p_l, double var_pl_in) {
  if (!(var_pl_in > 0.0)) throw DomainError("input phase variance must be positive");
  const Eigen::Matrix2d& s = g.cov();
  const double innovation_var = chi * chi * s(0, 0) + var_pl_in;
  const Eigen::Vector2d gain = s.col(0) * (chi / innovation_var);
  Eigen::Vector2d mean = g.mean() + gain * (p_l - chi * g.mean()(0));
  // Written without subtraction so huge prior variances keep full precision.
  const double det = s(0, 0) * s(1, 1) - s(0, 1) * s(0, 1);
  Eigen::Matrix2d cov;
  cov(0, 0) = s(0, 0) * var_pl_in / innovation_var;
  cov(0, 1) = cov(1, 0) = s(0, 1) * var_pl_in / innovation_var;
  cov(1, 1) = (s(1, 1) * var_pl_in + chi * chi * det) / innovation_var + chi * chi / (4.0 * var_pl_in);
  mean(1) += omega;
  return {mean, cov};
}

double sample_outcome(const GaussianState& g, double chi, Rng& rng, double var_pl_in) {
  const OutcomeStats st = pulse_outcome_stats(g, chi, var_pl_in);
  return rng.normal(st.mean, std::sqrt(st.variance));
}

double sample_outcome(const GaussianState& g, double chi, std::uint64_t seed, double var_pl_in) {
  Rng rng(seed);
  return sample_outcome(g, chi, rng, var_pl_in);
}

double effective_occupation(const GaussianState& g) {
  return 0.5 * (std::sqrt(4.0 * g.var_x() * g.var_p()) - 1.0);
}

GaussianState thermalize(const GaussianState& g, const BathSpec& bath, double t, Frame frame) {
  bath.validate();
  if (!(t >= 0.0)) throw DomainError("thermalization time must be >= 0");
  const double decay = std::exp(-bath.gamma_m * t);
  Eigen::Matrix2d cov = decay * g.cov() + (1.0 - decay) * (bath.nbar_bath + 0.5) * Eigen::Matrix2d::Identity();
  cov(0, 1) = cov(1, 0);
  GaussianState relaxed(std::sqrt(decay) * g.mean(), cov);
  if (frame == Frame::Rotating) return relaxed;
  return rotate_gaussian(relaxed, bath.omega_m * t);
}

bool weak_coupling(const BathSpec& bath, double t) { return bath.gamma_m * t <= 0.1; }

double crossing_time(const GaussianState& g, const BathSpec& bath, double target) {
  bath.validate();
  if (g.var_x() >= target) return 0.0;
  if (!(target < bath.nbar_bath + 0.5)) throw DomainError("target variance is never reached by the bath");
  auto excess = [&](double t) { return thermalize(g, bath, t, Frame::Rotating).var_x() - target; };
  double hi = 1.0 / (bath.gamma_m * (bath.nbar_bath + 1.0));
  int doublings = 0;
  while (excess(hi) < 0.0) {
    hi *= 2.0;
    if (++doublings > 200) throw NumericError("crossing time could not be bracketed");
  }
  std::uintmax_t iterations = 200;
  const auto [lo_t, hi_t] = boost::math::tools::toms748_solve(
      excess, 0.0, hi, g.var_x() - target, excess(hi), boost::math::tools::eps_tolerance<double>(50), iterations);
  return 0.5 * (lo_t + hi_t);
}

double squeezing_lifetime(double chi, double q, double nbar, double omega_m) {
  if (!(chi > 1.0)) throw DomainError("chi <= 1 prepares no squeezing to lose");
  if (!(q > 0.0) || !(nbar > 0.0) || !(omega_m > 0.0)) throw DomainError("Q, nbar and omega_m must be positive");
  return q / (nbar * omega_m) * 0.5 * (1.0 - 1.0 / (chi * chi));
}

double predicted_neff2(double chi) {
  if (!(chi > 0.0)) throw DomainError("chi must be positive");
  return 0.5 * (std::sqrt(1.0 + 1.0 / std::pow(chi, 4)) - 1.0);
}

double predicted_neff2_thermal(double chi, double q, double nbar) {
  if (!(chi > 0.0) || !(q > 0.0) || !(nbar >= 0.0)) throw DomainError("chi and Q must be positive");
  return 0.5 * (std::sqrt(1.0 + 1.0 / std::pow(chi, 4) + std::numbers::pi * nbar / (q * chi * chi)) - 1.0);
}

}  // namespace optopulse::gaussian
