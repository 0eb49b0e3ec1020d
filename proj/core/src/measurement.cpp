#include "optopulse/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "optopulse/errors.hpp"
#include "optopulse/rng.hpp"

namespace optopulse::measurement {

using hilbert::Complex;
using hilbert::FockState;
using hilbert::Matrix;

namespace {

constexpr double kPi = std::numbers::pi;

double reach(int n_max) { return std::sqrt(2.0 * n_max + 1.0); }

double gaussian_density(double d, double variance) {
  return std::exp(-d * d / (2.0 * variance)) / std::sqrt(2.0 * kPi * variance);
}

double trapezoid_weight(std::size_t i, std::size_t n) { return (i == 0 || i + 1 == n) ? 0.5 : 1.0; }

// Position grid wide enough for the number states and fine enough for the
// kernel of width sqrt(variance) / chi.
UniformGrid convolution_grid(int n_max, double chi, double variance) {
  const double r = reach(n_max);
  const double half = r + 8.0;
  double step = std::min(0.03, kPi / (8.0 * r));
  if (chi > 0.0) step = std::min(step, 0.2 * std::sqrt(variance) / chi);
  const auto n = static_cast<std::size_t>(std::ceil(2.0 * half / step)) + 1;
  return UniformGrid::centered(half, n);
}

void check_outcome_grid(const FockState& state, const MeasurementSpec& spec, const UniformGrid& p_grid,
                        double theta) {
  const hilbert::Moments m = hilbert::moments(hilbert::rotate(state, theta));
  const double mu = spec.chi * m.mean(0);
  const double sigma = std::sqrt(spec.record_variance() + spec.chi * spec.chi * std::max(m.cov(0, 0), 0.0));
  if (p_grid.front() > mu - 6.0 * sigma || p_grid.back() < mu + 6.0 * sigma) {
    throw GridError("outcome grid must span mean +- 6 sigma");
  }
}

}  // namespace

void MeasurementSpec::validate() const {
  if (!(chi >= 0.0) || !std::isfinite(chi)) throw DomainError("chi must be finite and >= 0");
  if (!std::isfinite(omega_kick)) throw DomainError("Omega must be finite");
  if (!(var_pl_in > 0.0)) throw DomainError("input phase variance must be positive");
  if (!(extra_noise_var >= 0.0)) throw DomainError("extra noise variance must be >= 0");
}

Matrix upsilon_matrix(const MeasurementSpec& spec, double p_l, int n_max, double variance) {
  spec.validate();
  if (!(variance > 0.0)) throw DomainError("kernel variance must be positive");
  const double r = reach(n_max);
  const double half = r + 8.0;
  double lo = -half, hi = half;
  double step = std::min(0.03, kPi / (4.0 * (2.0 * r + std::abs(spec.omega_kick))));
  if (spec.chi > 0.0) {
    const double width = std::sqrt(2.0 * variance) / spec.chi;
    lo = std::max(lo, p_l / spec.chi - 10.0 * width);
    hi = std::min(hi, p_l / spec.chi + 10.0 * width);
    step = std::min(step, 0.2 * width);
  }
  const int dim = n_max + 1;
  if (!(hi > lo)) return Matrix::Zero(dim, dim);
  const auto n = std::max<std::size_t>(3, static_cast<std::size_t>(std::ceil((hi - lo) / step)) + 1);
  const UniformGrid grid = UniformGrid::linspace(lo, hi, n);
  const std::vector<double> x = grid.points();
  const Eigen::MatrixXd psi = hilbert::hermite_functions(n_max, x);

  const double norm = std::pow(2.0 * kPi * variance, -0.25);
  Eigen::VectorXcd kernel(static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    const double d = p_l - spec.chi * x[j];
    kernel(static_cast<Eigen::Index>(j)) = trapezoid_weight(j, n) * grid.step() * norm *
                                           std::polar(std::exp(-d * d / (4.0 * variance)), spec.omega_kick * x[j]);
  }
  const Eigen::MatrixXcd left = psi.cast<Complex>() * kernel.asDiagonal();
  return left * psi.transpose().cast<Complex>();
}

Matrix upsilon_matrix(const MeasurementSpec& spec, double p_l, int n_max) {
  return upsilon_matrix(spec, p_l, n_max, spec.conditioning_variance());
}

Matrix effect_matrix(const MeasurementSpec& spec, double p_l, int n_max, double variance) {
  spec.validate();
  if (!(variance > 0.0)) throw DomainError("kernel variance must be positive");
  const int dim = n_max + 1;
  if (spec.chi == 0.0) return gaussian_density(p_l, variance) * Matrix::Identity(dim, dim);
  const double r = reach(n_max);
  const double width = std::sqrt(variance) / spec.chi;
  const double lo = std::max(-r - 8.0, p_l / spec.chi - 12.0 * width);
  const double hi = std::min(r + 8.0, p_l / spec.chi + 12.0 * width);
  if (!(hi > lo)) return Matrix::Zero(dim, dim);
  const double step = std::min({0.03, kPi / (8.0 * r), 0.2 * width});
  const auto n = std::max<std::size_t>(3, static_cast<std::size_t>(std::ceil((hi - lo) / step)) + 1);
  const UniformGrid grid = UniformGrid::linspace(lo, hi, n);
  const std::vector<double> x = grid.points();
  const Eigen::MatrixXd psi = hilbert::hermite_functions(n_max, x);
  Eigen::VectorXd w(static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    w(static_cast<Eigen::Index>(j)) =
        trapezoid_weight(j, n) * grid.step() * gaussian_density(p_l - spec.chi * x[j], variance);
  }
  return (psi * w.asDiagonal() * psi.transpose()).cast<Complex>();
}

FockState apply_upsilon(const FockState& state, const MeasurementSpec& spec, double p_l) {
  const Matrix a = upsilon_matrix(spec, p_l, state.n_max());
  Matrix out = a * state.density() * a.adjoint();
  const double tr = out.trace().real();
  if (!(tr > 1e-300) || !std::isfinite(tr)) {
    throw NumericError("measurement outcome has vanishing probability within the truncation");
  }
  out /= tr;
  out = 0.5 * (out + out.adjoint()).eval();
  return FockState::from_density(std::move(out));
}

double OutcomeDensity::integral() const { return trapezoid(values, p.step()); }

OutcomeDensity outcome_pdf(const FockState& state, const MeasurementSpec& spec, const UniformGrid& p_grid,
                           double theta) {
  spec.validate();
  check_outcome_grid(state, spec, p_grid, theta);
  const double v = spec.record_variance();
  OutcomeDensity out{p_grid, std::vector<double>(p_grid.size())};
  if (spec.chi == 0.0) {
    for (std::size_t j = 0; j < p_grid.size(); ++j) out.values[j] = gaussian_density(p_grid[j], v);
    return out;
  }
  const UniformGrid xg = convolution_grid(state.n_max(), spec.chi, v);
  const hilbert::Marginal m = hilbert::marginal(state, theta, xg);
  // Only positions within 12 kernel widths of p / chi contribute.
  const double width = std::sqrt(v) / spec.chi;
  for (std::size_t j = 0; j < p_grid.size(); ++j) {
    const double c = p_grid[j] / spec.chi;
    const double lo = std::max(0.0, std::floor((c - 12.0 * width - xg.start()) / xg.step()));
    const double hi = std::min(static_cast<double>(xg.size() - 1), std::ceil((c + 12.0 * width - xg.start()) / xg.step()));
    double sum = 0.0;
    for (auto i = static_cast<std::size_t>(lo); static_cast<double>(i) <= hi; ++i) {
      sum += trapezoid_weight(i, xg.size()) * m.values[i] * gaussian_density(p_grid[j] - spec.chi * xg[i], v);
    }
    out.values[j] = sum * xg.step();
  }
  return out;
}

OutcomeDensity outcome_pdf_trace(const FockState& state, const MeasurementSpec& spec, const UniformGrid& p_grid,
                                 double theta) {
  spec.validate();
  check_outcome_grid(state, spec, p_grid, theta);
  const FockState rotated = hilbert::rotate(state, theta);
  OutcomeDensity out{p_grid, std::vector<double>(p_grid.size())};
  for (std::size_t j = 0; j < p_grid.size(); ++j) {
    const Matrix e = effect_matrix(spec, p_grid[j], state.n_max(), spec.record_variance());
    out.values[j] = std::max(0.0, (e * rotated.density()).trace().real());
  }
  return out;
}

OutcomeSampler::OutcomeSampler(const FockState& state, const MeasurementSpec& spec, double theta) {
  spec.validate();
  const hilbert::Moments m = hilbert::moments(hilbert::rotate(state, theta));
  const double mu = spec.chi * m.mean(0);
  const double sigma = std::sqrt(spec.record_variance() + spec.chi * spec.chi * std::max(m.cov(0, 0), 0.0));

  double span = 8.0;
  std::size_t points = 4097;
  auto tabulate = [&] {
    return outcome_pdf(state, spec, UniformGrid::linspace(mu - span * sigma, mu + span * sigma, points), theta);
  };
  pdf_ = tabulate();
  for (int widen = 0; pdf_.integral() < 1.0 - 1e-8; ++widen) {
    if (widen == 6) throw GridError("outcome density mass not captured by the sampling grid");
    span *= 1.5;
    pdf_ = tabulate();
  }
  for (int refine = 0;; ++refine) {
    points = 2 * points - 1;
    OutcomeDensity finer = tabulate();
    const bool stable = std::abs(finer.integral() - pdf_.integral()) <= 1e-9;
    pdf_ = std::move(finer);
    if (stable) break;
    if (refine == 3) throw GridError("outcome density not resolved by the sampling grid");
  }

  cdf_.assign(pdf_.values.size(), 0.0);
  const double h = pdf_.p.step();
  for (std::size_t i = 1; i < cdf_.size(); ++i) cdf_[i] = cdf_[i - 1] + 0.5 * h * (pdf_.values[i - 1] + pdf_.values[i]);
  const double total = cdf_.back();
  if (!(total > 0.0)) throw NumericError("outcome density integrates to zero");
  for (double& c : cdf_) c /= total;
  for (double& v : pdf_.values) v /= total;
}

double OutcomeSampler::quantile(double u) const {
  u = std::clamp(u, 0.0, 1.0);
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.begin()) return pdf_.p.front();
  if (it == cdf_.end()) return pdf_.p.back();
  const auto i = static_cast<std::size_t>(it - cdf_.begin()) - 1;
  // Linear density inside the cell: solve c0 + f0 s + (f1 - f0) s^2 / (2h) = u.
  const double h = pdf_.p.step();
  const double f0 = pdf_.values[i], f1 = pdf_.values[i + 1];
  const double need = u - cdf_[i];
  const double slope = (f1 - f0) / h;
  const double denom = f0 + std::sqrt(std::max(f0 * f0 + 2.0 * slope * need, 0.0));
  const double s = denom > 0.0 ? 2.0 * need / denom : 0.5 * h;
  return pdf_.p[i] + std::clamp(s, 0.0, h);
}

double OutcomeSampler::operator()(Rng& rng) const { return quantile(rng.uniform()); }

double sample_outcome_fock(const FockState& state, const MeasurementSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  return OutcomeSampler(state, spec)(rng);
}

double compensate(const MeasurementRecord& record) {
  if (!record.known_mean) throw DomainError("record carries no known mean to compensate");
  return record.p_l - *record.known_mean;
}

Matrix povm_integral(const MeasurementSpec& spec, int n_max, const UniformGrid& p_grid) {
  Matrix total = Matrix::Zero(n_max + 1, n_max + 1);
  for (std::size_t j = 0; j < p_grid.size(); ++j) {
    total += trapezoid_weight(j, p_grid.size()) * p_grid.step() *
             effect_matrix(spec, p_grid[j], n_max, spec.conditioning_variance());
  }
  return total;
}

}  // namespace optopulse::measurement
