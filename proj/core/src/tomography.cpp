#include "optopulse/tomography.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <exception>
#include <numbers>
#include <ostream>
#include <thread>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>
#include <unsupported/Eigen/FFT>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include "optopulse/errors.hpp"
#include "optopulse/format.hpp"
#include "optopulse/rng.hpp"
#include "optopulse/stats.hpp"

namespace optopulse::tomography {

using hilbert::FockState;
using hilbert::Marginal;
using hilbert::WignerGrid;
using measurement::MeasurementSpec;
using measurement::OutcomeDensity;

namespace {

constexpr double kPi = std::numbers::pi;

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<double> fft_convolve_real(const std::vector<double>& signal, const std::vector<std::complex<double>>& kernel_hat,
                                      std::size_t fft_size) {
  Eigen::FFT<double> fft;
  std::vector<double> padded(fft_size, 0.0);
  std::copy(signal.begin(), signal.end(), padded.begin());
  std::vector<std::complex<double>> hat;
  fft.fwd(hat, padded);
  for (std::size_t i = 0; i < hat.size(); ++i) hat[i] *= kernel_hat[i];
  std::vector<double> out;
  fft.inv(out, hat);
  return out;
}

void normalize_trapezoid(std::vector<double>& v, double step) {
  const double total = trapezoid(v, step);
  if (!(total > 0.0)) throw NumericError("density has no positive mass");
  for (double& x : v) x /= total;
}

}  // namespace

// --------------------------------------------------------------- histograms

double Histogram::total() const {
  double s = 0.0;
  for (double c : counts) s += c;
  return s;
}

OutcomeDensity Histogram::density() const {
  if (counts.size() < 2 || edges.size() != counts.size() + 1) throw GridError("malformed histogram");
  const double w = bin_width();
  const double n = total();
  if (!(n > 0.0)) throw NumericError("empty histogram");
  OutcomeDensity d{UniformGrid(edges.front() + 0.5 * w, w, counts.size()), std::vector<double>(counts.size())};
  for (std::size_t i = 0; i < counts.size(); ++i) d.values[i] = counts[i] / (n * w);
  return d;
}

Histogram make_histogram(std::span<const double> samples, double lo, double hi, std::size_t bins) {
  if (bins < 2 || !(hi > lo)) throw GridError("histogram needs >= 2 bins and hi > lo");
  Histogram h;
  const UniformGrid e = UniformGrid::linspace(lo, hi, bins + 1);
  h.edges = e.points();
  h.counts.assign(bins, 0.0);
  const double w = e.step();
  for (double s : samples) {
    if (s < lo || s > hi) continue;
    auto b = static_cast<std::size_t>((s - lo) / w);
    if (b >= bins) b = bins - 1;
    h.counts[b] += 1.0;
  }
  return h;
}

Histogram auto_histogram(std::span<const double> samples, std::size_t bins, double sigmas) {
  if (samples.size() < 2) throw DomainError("histogram needs at least two samples");
  const stats::SampleMoments m = stats::sample_moments(samples);
  const double sd = std::sqrt(m.variance);
  if (!(sd > 0.0)) throw NumericError("samples have zero spread");
  return make_histogram(samples, m.mean - sigmas * sd, m.mean + sigmas * sd, bins);
}

Histogram histogram_from_records(std::span<const measurement::MeasurementRecord> records, std::size_t bins,
                                 double sigmas) {
  std::vector<double> values;
  values.reserve(records.size());
  for (const auto& r : records) values.push_back(r.known_mean ? measurement::compensate(r) : r.p_l);
  return auto_histogram(values, bins, sigmas);
}

// ----------------------------------------------------------------- tomogram

void Tomogram::validate() const {
  if (angles.empty()) throw DomainError("tomogram has no angles");
  if (histograms.size() != angles.size()) throw DomainError("tomogram needs one histogram per angle");
  for (const auto& h : histograms) {
    if (h.edges.size() != h.counts.size() + 1 || h.counts.size() < 2) throw GridError("malformed histogram");
    const double w = h.bin_width();
    for (std::size_t i = 1; i < h.edges.size(); ++i) {
      if (std::abs(h.edges[i] - h.edges[i - 1] - w) > 1e-9 * std::max(1.0, std::abs(w))) {
        throw GridError("histogram bins are not uniform");
      }
    }
    for (double c : h.counts) {
      if (c < 0.0) throw DomainError("negative histogram count");
    }
  }
}

nlohmann::json Tomogram::to_json() const {
  nlohmann::json hs = nlohmann::json::array();
  for (const auto& h : histograms) hs.push_back({{"edges", h.edges}, {"counts", h.counts}});
  return {{"angles", angles}, {"chi", spec.chi}, {"omega", spec.omega_kick}, {"shots", shots}, {"histograms", hs}};
}

Tomogram Tomogram::from_json(const nlohmann::json& j) {
  Tomogram t;
  t.angles = j.at("angles").get<std::vector<double>>();
  t.spec.chi = j.at("chi").get<double>();
  t.spec.omega_kick = j.at("omega").get<double>();
  t.shots = j.at("shots").get<std::size_t>();
  for (const auto& h : j.at("histograms")) {
    t.histograms.push_back({h.at("edges").get<std::vector<double>>(), h.at("counts").get<std::vector<double>>()});
  }
  t.validate();
  return t;
}

std::vector<double> half_period_angles(std::size_t count) {
  if (count == 0) throw DomainError("need at least one angle");
  std::vector<double> a(count);
  for (std::size_t j = 0; j < count; ++j) a[j] = kPi * static_cast<double>(j) / static_cast<double>(count);
  return a;
}

Tomogram acquire(const FockState& state, const MeasurementSpec& spec, std::span<const double> angles,
                 std::size_t shots, std::uint64_t seed, const AcquireOptions& options) {
  if (angles.empty()) throw DomainError("acquire needs at least one angle");
  if (shots < 2) throw DomainError("acquire needs at least two shots per angle");
  spec.validate();
  Tomogram t;
  t.angles.assign(angles.begin(), angles.end());
  t.spec = spec;
  t.shots = shots;
  t.histograms.resize(angles.size());
  std::vector<std::vector<double>> samples(angles.size());

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(angles.size());
  auto worker = [&] {
    for (std::size_t j = next++; j < angles.size(); j = next++) {
      try {
        const measurement::OutcomeSampler sampler(state, spec, angles[j]);
        Rng rng(derive_seed(seed, j));
        std::vector<double>& s = samples[j];
        s.resize(shots);
        for (double& v : s) v = sampler(rng);
        t.histograms[j] = auto_histogram(s, options.bins, options.sigmas);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
  };
  const unsigned n_threads = std::clamp<unsigned>(options.threads, 1, static_cast<unsigned>(angles.size()));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < n_threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  if (options.keep_samples) t.samples = std::move(samples);
  return t;
}

// ------------------------------------------------------------------ kernels

double Kernel::integral() const { return trapezoid(values, grid.step()); }

double Kernel::mean() const {
  std::vector<double> w(values.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = grid[i] * values[i];
  return trapezoid(w, grid.step()) / integral();
}

double Kernel::variance() const {
  const double mu = mean();
  std::vector<double> w(values.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = (grid[i] - mu) * (grid[i] - mu) * values[i];
  return trapezoid(w, grid.step()) / integral();
}

Kernel gaussian_kernel(double variance, const UniformGrid& grid, double chi) {
  if (!(variance > 0.0)) throw DomainError("kernel variance must be positive");
  Kernel k{grid, std::vector<double>(grid.size()), chi};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    k.values[i] = std::exp(-grid[i] * grid[i] / (2.0 * variance)) / std::sqrt(2.0 * kPi * variance);
  }
  return k;
}

namespace {

std::vector<double> fixed_mirror_outcomes(const MeasurementSpec& spec, double position, std::size_t shots,
                                          std::uint64_t seed) {
  Rng rng(seed);
  const double sd = std::sqrt(spec.record_variance());
  std::vector<double> out(shots);
  for (double& v : out) v = rng.normal(spec.chi * position, sd);
  return out;
}

}  // namespace

Kernel calibrate_kernel(const MeasurementSpec& spec, std::size_t shots, std::uint64_t seed, double mirror_position,
                        std::size_t bins) {
  spec.validate();
  if (shots < 2) throw DomainError("kernel calibration needs at least two shots");
  std::vector<double> s = fixed_mirror_outcomes(spec, mirror_position, shots, seed);
  const double mu = stats::sample_moments(s).mean;
  for (double& v : s) v -= mu;
  const OutcomeDensity d = auto_histogram(s, bins, 5.0).density();
  return {d.p, d.values, spec.chi};
}

ChiCalibration calibrate_chi(const MeasurementSpec& spec, std::span<const double> displacements, std::size_t shots,
                             std::uint64_t seed) {
  spec.validate();
  if (displacements.size() < 2) throw DomainError("chi calibration needs at least two displacements");
  std::vector<double> means;
  for (std::size_t i = 0; i < displacements.size(); ++i) {
    const std::vector<double> s = fixed_mirror_outcomes(spec, displacements[i], shots, derive_seed(seed, i));
    means.push_back(stats::sample_moments(s).mean);
  }
  const stats::LineFit fit = stats::fit_line(displacements, means);
  return {fit.slope, fit.intercept};
}

// ------------------------------------------------------------ deconvolution

Marginal deconvolve(const OutcomeDensity& outcomes, const Kernel& kernel, double regularization, double theta) {
  if (!(kernel.chi > 0.0)) throw DomainError("no position information: chi = 0");
  if (!(regularization >= 0.0)) throw DomainError("regularization must be >= 0");
  const double chi = kernel.chi;
  const std::size_t n = outcomes.values.size();
  if (n < 4) throw GridError("outcome density needs at least four points");
  const double du = outcomes.p.step() / chi;

  // Kernel on the u = p / chi axis, sampled at multiples of du.
  const double reach_u = std::max(std::abs(kernel.grid.front()), std::abs(kernel.grid.back())) / chi;
  const auto half = static_cast<std::size_t>(std::ceil(reach_u / du));
  const std::size_t size = next_pow2(n + 2 * half + 1);
  std::vector<double> kvec(size, 0.0);
  double kmass = 0.0;
  for (std::size_t m = 0; m <= half; ++m) {
    const double off = static_cast<double>(m) * du;
    const double plus = chi * interpolate(kernel.grid, kernel.values, chi * off);
    kvec[m] = plus;
    kmass += plus;
    if (m > 0) {
      const double minus = chi * interpolate(kernel.grid, kernel.values, -chi * off);
      kvec[size - m] = minus;
      kmass += minus;
    }
  }
  if (!(kmass > 0.0)) throw NumericError("kernel has no mass on the outcome grid");
  for (double& v : kvec) v /= kmass;

  std::vector<double> data(size, 0.0);
  for (std::size_t i = 0; i < n; ++i) data[half + i] = chi * outcomes.values[i];

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> khat, dhat;
  fft.fwd(khat, kvec);
  fft.fwd(dhat, data);
  double peak = 0.0;
  for (const auto& c : khat) peak = std::max(peak, std::norm(c));
  const double lambda = regularization * peak;
  for (std::size_t i = 0; i < size; ++i) {
    const double denom = std::norm(khat[i]) + lambda;
    dhat[i] = denom > 0.0 ? dhat[i] * std::conj(khat[i]) / denom : 0.0;
  }
  std::vector<double> rec;
  fft.inv(rec, dhat);

  Marginal out{theta, UniformGrid(outcomes.p.start() / chi, du, n), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) out.values[i] = std::max(0.0, rec[half + i]);
  normalize_trapezoid(out.values, du);
  return out;
}

// ----------------------------------------------------------- reconstruction

WignerGrid reconstruct_wigner(std::span<const Marginal> marginals, const ReconstructOptions& options) {
  const std::size_t m = marginals.size();
  if (m < 12) throw DomainError("reconstruction needs at least 12 angles");
  if (options.grid_points < 3 || !(options.half_width > 0.0)) throw GridError("invalid phase-space grid");

  // Angular quadrature weights on the half circle.
  std::vector<std::pair<double, std::size_t>> reduced(m);
  for (std::size_t j = 0; j < m; ++j) {
    double a = std::fmod(marginals[j].theta, kPi);
    if (a < 0.0) a += kPi;
    reduced[j] = {a, j};
  }
  std::sort(reduced.begin(), reduced.end());
  std::vector<double> weight(m);
  double max_gap = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double prev = k == 0 ? reduced[m - 1].first - kPi : reduced[k - 1].first;
    const double next = k + 1 == m ? reduced[0].first + kPi : reduced[k + 1].first;
    weight[reduced[k].second] = 0.5 * (next - prev);
    max_gap = std::max(max_gap, next - reduced[k].first);
  }
  if (max_gap > kPi / 6.0) throw DomainError("angles do not cover the half period");

  const UniformGrid axis = UniformGrid::centered(options.half_width, options.grid_points);
  const std::size_t g = axis.size();
  std::vector<double> w(g * g, 0.0);

  for (std::size_t j = 0; j < m; ++j) {
    const Marginal& mg = marginals[j];
    const std::size_t n = mg.values.size();
    const double dx = mg.x.step();
    // Zero-padded projection (n on each side) so the filtered tails extend
    // beyond the measured window.
    const std::size_t padded = 3 * n;
    const std::size_t size = next_pow2(padded + 2 * padded);
    std::vector<double> ramp(size, 0.0);
    ramp[0] = 1.0 / (4.0 * dx * dx);
    for (std::size_t k = 1; k < padded; k += 2) {
      const double v = -1.0 / (kPi * kPi * static_cast<double>(k * k) * dx * dx);
      ramp[k] = v;
      ramp[size - k] = v;
    }
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> rhat;
    fft.fwd(rhat, ramp);
    for (std::size_t k = 0; k < size; ++k) {
      rhat[k] *= dx;
      if (options.apodization > 0.0) {
        const double f = static_cast<double>(k <= size / 2 ? k : size - k) / (static_cast<double>(size) * dx);
        rhat[k] *= std::exp(-0.5 * f * f / (options.apodization * options.apodization));
      }
    }
    std::vector<double> signal(padded, 0.0);
    std::copy(mg.values.begin(), mg.values.end(), signal.begin() + static_cast<std::ptrdiff_t>(n));
    std::vector<double> q = fft_convolve_real(signal, rhat, size);
    q.resize(padded);
    const UniformGrid qgrid(mg.x.start() - static_cast<double>(n) * dx, dx, padded);

    const double c = std::cos(mg.theta), s = std::sin(mg.theta);
    for (std::size_t a = 0; a < g; ++a) {
      for (std::size_t b = 0; b < g; ++b) {
        w[a * g + b] += weight[j] * interpolate(qgrid, q, axis[a] * c - axis[b] * s);
      }
    }
  }
  return {axis, axis, std::move(w)};
}

FockState wigner_to_fock(const WignerGrid& w, int n_max) {
  hilbert::Matrix r = hilbert::wigner_to_density(w, n_max);
  r = 0.5 * (r + r.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<hilbert::Matrix> es(r);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  const double total = ev.sum();
  if (!(total > 0.0)) throw NumericError("reconstruction has no positive spectrum");
  ev /= total;
  hilbert::Matrix physical = es.eigenvectors() * ev.cast<hilbert::Complex>().asDiagonal() * es.eigenvectors().adjoint();
  return FockState::from_density(std::move(physical), false);
}

hilbert::Moments wigner_moments(const WignerGrid& wg) {
  double s0 = 0, sx = 0, sp = 0, sxx = 0, spp = 0, sxp = 0;
  const std::size_t nx = wg.x.size(), np = wg.p.size();
  for (std::size_t i = 0; i < nx; ++i) {
    const double wx = (i == 0 || i + 1 == nx) ? 0.5 : 1.0;
    for (std::size_t j = 0; j < np; ++j) {
      const double wt = wx * ((j == 0 || j + 1 == np) ? 0.5 : 1.0) * wg.at(i, j);
      const double x = wg.x[i], p = wg.p[j];
      s0 += wt;
      sx += wt * x;
      sp += wt * p;
      sxx += wt * x * x;
      spp += wt * p * p;
      sxp += wt * x * p;
    }
  }
  if (!(s0 > 0.0)) throw NumericError("Wigner grid has no positive mass");
  hilbert::Moments m;
  m.mean << sx / s0, sp / s0;
  m.cov(0, 0) = sxx / s0 - m.mean(0) * m.mean(0);
  m.cov(1, 1) = spp / s0 - m.mean(1) * m.mean(1);
  m.cov(0, 1) = m.cov(1, 0) = sxp / s0 - m.mean(0) * m.mean(1);
  return m;
}

// ------------------------------------------------------------------ fringes

namespace {

// Residuals of A exp(-(u - mu)^2 / (2 s^2)) (1 + V cos(k (u - mu) + phase)).
struct FringeModel {
  using Scalar = double;
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

  const std::vector<double>* u;
  const std::vector<double>* y;
  FringeModel(const std::vector<double>& uu, const std::vector<double>& yy) : u(&uu), y(&yy) {}
  int inputs() const { return 6; }
  int values() const { return static_cast<int>(u->size()); }
  int operator()(const Eigen::VectorXd& a, Eigen::VectorXd& r) const {
    for (std::size_t i = 0; i < u->size(); ++i) {
      const double d = (*u)[i] - a(1);
      const double env = a(0) * std::exp(-d * d / (2.0 * a(2) * a(2)));
      r(static_cast<Eigen::Index>(i)) = env * (1.0 + a(3) * std::cos(a(4) * d + a(5))) - (*y)[i];
    }
    return 0;
  }
};

}  // namespace

double fringe_visibility(const Marginal& marginal) {
  const double mu = marginal.mean();
  const double sigma = std::sqrt(marginal.variance());
  const double norm = marginal.integral();
  if (!(sigma > 0.0) || !(norm > 0.0)) throw NumericError("marginal has no spread");

  // Residual against the moment-matched Gaussian within +-2 sigma; the
  // periodogram peak of the residual seeds the fit.
  std::vector<double> d, env, res;
  for (std::size_t i = 0; i < marginal.values.size(); ++i) {
    const double di = marginal.x[i] - mu;
    if (std::abs(di) > 2.0 * sigma) continue;
    const double e = norm * std::exp(-di * di / (2.0 * sigma * sigma)) / (std::sqrt(2.0 * kPi) * sigma);
    d.push_back(di);
    env.push_back(e);
    res.push_back(marginal.values[i] - e);
  }
  if (d.size() < 8) throw NumericError("no oscillation");
  const double k_lo = 1.0 / sigma;
  const double k_hi = std::min(kPi / marginal.x.step(), 20.0 / sigma);
  double best = 0.0, k0 = 0.0, phase0 = 0.0;
  constexpr int kScan = 2000;
  for (int s = 0; s <= kScan && k_hi > k_lo; ++s) {
    const double k = k_lo + (k_hi - k_lo) * s / kScan;
    double c = 0.0, sn = 0.0, cc = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double ec = env[i] * std::cos(k * d[i]), es = env[i] * std::sin(k * d[i]);
      c += res[i] * ec;
      sn += res[i] * es;
      cc += ec * ec;
      ss += es * es;
    }
    const double ac = cc > 0.0 ? c / cc : 0.0, as = ss > 0.0 ? sn / ss : 0.0;
    const double amp = std::hypot(ac, as);
    if (amp > best) {
      best = amp;
      k0 = k;
      phase0 = std::atan2(-as, ac);
    }
  }
  const double amplitude = best;
  if (!(amplitude >= 1e-3)) throw NumericError("no oscillation");

  std::vector<double> u, y;
  for (std::size_t i = 0; i < marginal.values.size(); ++i) {
    if (std::abs(marginal.x[i] - mu) <= 3.0 * sigma) {
      u.push_back(marginal.x[i]);
      y.push_back(marginal.values[i]);
    }
  }
  Eigen::VectorXd a(6);
  a << norm / (std::sqrt(2.0 * kPi) * sigma), mu, sigma, std::min(amplitude, 0.99), k0, phase0;
  FringeModel model(u, y);
  Eigen::NumericalDiff<FringeModel> diff(model);
  Eigen::LevenbergMarquardt<Eigen::NumericalDiff<FringeModel>> lm(diff);
  lm.parameters.xtol = 1e-12;
  lm.parameters.ftol = 1e-14;
  lm.parameters.maxfev = 4000;
  const auto status = lm.minimize(a);
  if (status == Eigen::LevenbergMarquardtSpace::ImproperInputParameters || !a.allFinite()) {
    throw NumericError("fringe fit failed");
  }
  const double v = std::abs(a(3));
  if (v < 1e-3) throw NumericError("no oscillation");
  return v;
}

// ---------------------------------------------------------------------- CSV

void write_marginal_csv(std::ostream& out, const Marginal& m) {
  out << "# marginal v1\n# theta=" << format_double(m.theta) << "\n# x_start=" << format_double(m.x.start())
      << " x_step=" << format_double(m.x.step()) << " points=" << m.x.size() << "\nx,density\n";
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    out << format_double(m.x[i]) << ',' << format_double(m.values[i]) << '\n';
  }
}

void write_wigner_csv(std::ostream& out, const WignerGrid& w) {
  out << "# wigner v1\n# x_start=" << format_double(w.x.start()) << " x_step=" << format_double(w.x.step())
      << " x_points=" << w.x.size() << "\n# p_start=" << format_double(w.p.start())
      << " p_step=" << format_double(w.p.step()) << " p_points=" << w.p.size() << "\nx,p,w\n";
  for (std::size_t i = 0; i < w.x.size(); ++i) {
    for (std::size_t j = 0; j < w.p.size(); ++j) {
      out << format_double(w.x[i]) << ',' << format_double(w.p[j]) << ',' << format_double(w.at(i, j)) << '\n';
    }
  }
}

}  // namespace optopulse::tomography
