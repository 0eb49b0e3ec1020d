#include "optopulse/pulse_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "optopulse/constants.hpp"
#include "optopulse/errors.hpp"
#include "optopulse/format.hpp"

namespace optopulse::pulse {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;
constexpr int kSubsteps = 16;

void check_window(const UniformGrid& t, double lo, double hi, const char* what) {
  const double slack = 1e-9 * std::max(std::abs(lo), std::abs(hi));
  if (t.size() < 2 || t.front() > lo + slack || t.back() < hi - slack) {
    throw GridError(std::string(what) + ": time grid too short for the envelope");
  }
}

Envelope from_analytic(const UniformGrid& t, EnvelopeShape shape, double rate, std::function<double(double)> f,
                       std::vector<double> breakpoints) {
  Envelope e;
  e.t = t;
  e.shape = shape;
  e.rate = rate;
  e.values.resize(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) e.values[i] = f(t[i]);
  e.analytic = std::move(f);
  e.breakpoints = std::move(breakpoints);
  return e;
}

// Linear-source exact recursions for y' = -k y + s (forward) and for the
// anti-causal filter B(t) = \int_t^\infty e^{-k (t' - t)} s(t') dt'.
std::vector<double> filter_forward(const std::vector<double>& s, double h, double k, double initial) {
  const double e = std::exp(-k * h);
  const double b = 1.0 / k - (1.0 - e) / (k * k * h);
  const double a = (1.0 - e) / k - b;
  std::vector<double> y(s.size());
  y[0] = initial;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) y[i + 1] = e * y[i] + a * s[i] + b * s[i + 1];
  return y;
}

std::vector<double> filter_backward(const std::vector<double>& s, double h, double k) {
  const double e = std::exp(-k * h);
  const double b = 1.0 / k - (1.0 - e) / (k * k * h);
  const double a = (1.0 - e) / k - b;
  std::vector<double> y(s.size(), 0.0);
  for (std::size_t i = s.size() - 1; i-- > 0;) y[i] = e * y[i + 1] + a * s[i + 1] + b * s[i];
  return y;
}

// Value at the first sample of \int_{-\infty}^t e^{-k (t - t')} y(t') dt',
// assuming y grows exponentially before the grid starts.
double causal_start(const std::vector<double>& y, double h, double k) {
  if (y[0] == 0.0) return 0.0;
  double lambda = 0.0;
  if (y[0] > 0.0 && y[1] > 0.0) lambda = std::log(y[1] / y[0]) / h;
  lambda = std::max(lambda, -0.5 * k);
  return y[0] / (k + lambda);
}

std::vector<double> cumulative_trapezoid(const std::vector<double>& y, double h) {
  std::vector<double> c(y.size(), 0.0);
  for (std::size_t i = 1; i < y.size(); ++i) c[i] = c[i - 1] + 0.5 * h * (y[i - 1] + y[i]);
  return c;
}

double integral(const std::vector<double>& y, double h) { return trapezoid(y, h); }

double integral_of_product(const std::vector<double>& a, const std::vector<double>& b, double h) {
  std::vector<double> p(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) p[i] = a[i] * b[i];
  return trapezoid(p, h);
}

struct FineSolution {
  UniformGrid grid;
  int substeps = 1;
  std::vector<double> drive;
  std::vector<double> alpha;
  std::vector<double> phi;
};

FineSolution solve_cavity(const PulseSpec& pulse) {
  const Envelope& d = pulse.drive;
  const int k_sub = d.analytic ? kSubsteps : 1;
  const std::size_t n_fine = (d.t.size() - 1) * static_cast<std::size_t>(k_sub) + 1;
  FineSolution sol{UniformGrid(d.t.start(), d.t.step() / k_sub, n_fine), k_sub, {}, {}, {}};
  sol.drive.resize(n_fine);
  for (std::size_t i = 0; i < n_fine; ++i) {
    sol.drive[i] = d.analytic ? d.analytic(sol.grid[i]) : d.values[i];
  }
  const double kappa = pulse.kappa;
  const double h = sol.grid.step();
  const double root = std::sqrt(2.0 * kappa);
  std::vector<double> alpha = filter_forward(sol.drive, h, kappa, causal_start(sol.drive, h, kappa));
  for (double& a : alpha) a *= root;
  const double phi_scale = std::pow(2.0 * kappa, 1.5);
  std::vector<double> phi = filter_forward(alpha, h, kappa, causal_start(alpha, h, kappa));
  for (double& p : phi) p *= phi_scale;
  for (std::size_t i = 0; i < n_fine; ++i) {
    if (!std::isfinite(alpha[i]) || !std::isfinite(phi[i])) throw NumericError("cavity integration diverged");
  }
  sol.alpha = std::move(alpha);
  sol.phi = std::move(phi);
  return sol;
}

std::vector<double> downsample(const std::vector<double>& fine, int k_sub) {
  std::vector<double> out((fine.size() - 1) / static_cast<std::size_t>(k_sub) + 1);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fine[i * static_cast<std::size_t>(k_sub)];
  return out;
}

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t envelope_key(const PulseSpec& pulse) {
  const double header[4] = {pulse.kappa, pulse.drive.t.start(), pulse.drive.t.step(), pulse.drive.rate};
  std::uint64_t h = fnv1a(header, sizeof header);
  const int shape = static_cast<int>(pulse.drive.shape);
  h = fnv1a(&shape, sizeof shape, h);
  return fnv1a(pulse.drive.values.data(), pulse.drive.values.size() * sizeof(double), h);
}

}  // namespace

DerivedPhysical derive_physical(const PhysicalParams& p) {
  if (!(p.wavelength > 0.0) || !(p.cavity_length > 0.0) || !(p.mass > 0.0) || !(p.omega_m > 0.0) ||
      !(p.finesse > 0.0)) {
    throw DomainError("physical parameters must be positive");
  }
  DerivedPhysical d;
  d.x0 = std::sqrt(constants::hbar / (p.mass * p.omega_m));
  d.omega_c = 2.0 * std::numbers::pi * constants::speed_of_light / p.wavelength;
  d.g0 = d.omega_c * d.x0 / (kSqrt2 * p.cavity_length);
  d.kappa = std::numbers::pi * constants::speed_of_light / (2.0 * p.finesse * p.cavity_length);
  return d;
}

double Envelope::energy() const {
  if (!analytic) {
    std::vector<double> sq(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) sq[i] = values[i] * values[i];
    return trapezoid(sq, t.step());
  }
  std::vector<double> cuts{t.front()};
  for (double b : breakpoints) {
    if (b > t.front() && b < t.back()) cuts.push_back(b);
  }
  cuts.push_back(t.back());
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  auto sq = [this](double x) {
    const double v = analytic(x);
    return v * v;
  };
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(sq, cuts[i], cuts[i + 1], 15, 1e-14);
  }
  return total;
}

UniformGrid default_time_grid(double kappa, std::size_t points, double span) {
  if (!(kappa > 0.0)) throw DomainError("kappa must be positive");
  return UniformGrid::linspace(-span / kappa, span / kappa, points);
}

Envelope optimal_drive(double kappa, const UniformGrid& t) {
  if (!(kappa > 0.0)) throw DomainError("kappa must be positive");
  check_window(t, -10.0 / kappa, 10.0 / kappa, "optimal drive");
  const double amp = std::sqrt(kappa);
  return from_analytic(t, EnvelopeShape::Optimal, kappa, [amp, kappa](double x) { return amp * std::exp(-kappa * std::abs(x)); },
                       {0.0});
}

Envelope gaussian_drive(double sigma, const UniformGrid& t) {
  if (!(sigma > 0.0)) throw DomainError("Gaussian width must be positive");
  const double amp = std::pow(2.0 * std::numbers::pi * sigma * sigma, -0.25);
  return from_analytic(t, EnvelopeShape::Gaussian, sigma,
                       [amp, sigma](double x) { return amp * std::exp(-x * x / (4.0 * sigma * sigma)); }, {});
}

Envelope square_drive(double duration, const UniformGrid& t) {
  if (!(duration > 0.0)) throw DomainError("square pulse duration must be positive");
  check_window(t, -0.5 * duration, 0.5 * duration, "square drive");
  const double amp = 1.0 / std::sqrt(duration);
  return from_analytic(t, EnvelopeShape::Square, duration,
                       [amp, duration](double x) { return std::abs(x) <= 0.5 * duration ? amp : 0.0; },
                       {-0.5 * duration, 0.5 * duration});
}

Envelope one_sided_exponential_drive(double rate, const UniformGrid& t) {
  if (!(rate > 0.0)) throw DomainError("exponential rate must be positive");
  const double amp = std::sqrt(2.0 * rate);
  return from_analytic(t, EnvelopeShape::OneSidedExponential, rate,
                       [amp, rate](double x) { return x >= 0.0 ? amp * std::exp(-rate * x) : 0.0; }, {0.0});
}

Envelope sampled_envelope(const UniformGrid& t, std::vector<double> values) {
  if (values.size() != t.size() || t.size() < 2) throw GridError("envelope samples do not match the time grid");
  Envelope e;
  e.t = t;
  e.values = std::move(values);
  const double en = e.energy();
  if (!(en > 0.0) || !std::isfinite(en)) throw DomainError("envelope has zero energy");
  const double scale = 1.0 / std::sqrt(en);
  for (double& v : e.values) v *= scale;
  return e;
}

void PulseSpec::validate() const {
  if (!(kappa > 0.0)) throw DomainError("kappa must be positive");
  if (!(g0 > 0.0)) throw DomainError("g0 must be positive");
  if (!(n_photons > 0.0)) throw DomainError("photon number must be positive");
  if (!(eta > 0.0 && eta <= 1.0)) throw DomainError("efficiency must lie in (0, 1]");
  if (drive.values.size() != drive.t.size() || drive.t.size() < 3) {
    throw GridError("drive envelope does not match its time grid");
  }
  if (std::abs(drive.energy() - 1.0) > 1e-8) {
    throw GridError("drive envelope energy deviates from 1 by more than 1e-8 on its grid");
  }
}

CavityResponse compute_response(const PulseSpec& pulse) {
  pulse.validate();
  const FineSolution sol = solve_cavity(pulse);
  const double h = sol.grid.step();

  std::vector<double> sq(sol.phi.size());
  for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = sol.phi[i] * sol.phi[i];
  const double phi_energy = integral(sq, h);
  for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = sol.alpha[i] * sol.alpha[i];
  const double alpha_energy = integral(sq, h);
  if (!(phi_energy > 0.0)) throw NumericError("phase mode vanishes");

  CavityResponse r;
  r.t = pulse.drive.t;
  r.alpha = downsample(sol.alpha, sol.substeps);
  r.phi = downsample(sol.phi, sol.substeps);
  r.n_phi = 1.0 / std::sqrt(phi_energy);
  r.lo_envelope = r.phi;
  for (double& v : r.lo_envelope) v *= r.n_phi;
  r.alpha_energy = alpha_energy;
  r.chi_ideal = kSqrt2 * std::sqrt(phi_energy) * (pulse.g0 / pulse.kappa) * std::sqrt(pulse.n_photons);
  r.chi = std::sqrt(pulse.eta) * r.chi_ideal;
  r.omega_kick = kSqrt2 * pulse.g0 * pulse.n_photons * alpha_energy;

  if (pulse.drive.shape == EnvelopeShape::Optimal &&
      std::abs(pulse.drive.rate - pulse.kappa) <= 1e-12 * pulse.kappa) {
    r.omega_closed_form = 3.0 / kSqrt2 * (pulse.g0 / pulse.kappa) * pulse.n_photons;
    if (std::abs(r.omega_kick / *r.omega_closed_form - 1.0) > 0.01) {
      throw NumericError("momentum kick integral disagrees with the optimal-drive closed form by > 1%");
    }
  }
  return r;
}

double measurement_strength(const PulseSpec& pulse) { return compute_response(pulse).chi; }

FiniteEvolutionCoeffs finite_evolution_coeffs(const PulseSpec& pulse, double omega_m) {
  if (!(omega_m > 0.0)) throw DomainError("omega_m must be positive");
  pulse.validate();
  if (omega_m / pulse.kappa > 0.1) {
    throw DomainError("omega_m / kappa > 0.1: outside the first-order regime");
  }

  static std::mutex cache_mutex;
  static std::unordered_map<std::uint64_t, FiniteEvolutionCoeffs> cache;
  const std::uint64_t key = envelope_key(pulse);
  {
    std::lock_guard lock(cache_mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }

  // Dimensionless time tau = kappa t about the pulse centre t = 0.
  const FineSolution sol = solve_cavity(pulse);
  const std::size_t n = sol.alpha.size();
  const double h = sol.grid.step() * pulse.kappa;
  std::vector<double> tau(n), alpha = sol.alpha, phi(n);
  const double phi_unit = 1.0 / std::sqrt(pulse.kappa);
  for (std::size_t i = 0; i < n; ++i) {
    tau[i] = sol.grid[i] * pulse.kappa;
    phi[i] = sol.phi[i] * phi_unit;
  }
  auto times = [&](const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = a[i] * b[i];
    return p;
  };
  auto norm = [&](const std::vector<double>& a) { return std::sqrt(integral_of_product(a, a, h)); };

  const double r = kSqrt2 / norm(phi);
  const std::vector<double> alpha2 = times(alpha, alpha);
  const std::vector<double> t_alpha = times(tau, alpha);
  const double alpha2_int = integral(alpha2, h);

  std::vector<double> f1 = filter_backward(alpha, h, 1.0);
  std::vector<double> f2 = filter_backward(t_alpha, h, 1.0);
  std::vector<double> w = times(filter_backward(phi, h, 1.0), alpha);
  const double w_int = integral(w, h);
  for (double& v : w) v /= w_int;

  FiniteEvolutionCoeffs c;
  c.xi[0] = integral_of_product(tau, alpha2, h) / alpha2_int;
  c.xi[1] = integral_of_product(tau, w, h);
  const std::vector<double> c0 = cumulative_trapezoid(alpha2, h);
  const std::vector<double> c1 = cumulative_trapezoid(times(tau, alpha2), h);
  std::vector<double> inner(n);
  for (std::size_t i = 0; i < n; ++i) inner[i] = tau[i] * c0[i] - c1[i];
  c.xi[2] = integral_of_product(w, inner, h) / alpha2_int;

  const std::vector<double> w0 = cumulative_trapezoid(w, h);
  const std::vector<double> w1 = cumulative_trapezoid(times(tau, w), h);
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = alpha[i] * ((w1.back() - w1[i]) - tau[i] * (w0.back() - w0[i]));
  }
  std::vector<double> f3 = filter_backward(g, h, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    f1[i] *= kSqrt2;
    f2[i] *= kSqrt2;
    f3[i] *= kSqrt2;
  }
  c.norms = {r * norm(f1), r * norm(f2), r * norm(f3)};
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = -r * f3[i] - r * f2[i] + c.xi[1] * r * f1[i];
  c.zeta = norm(v);

  std::lock_guard lock(cache_mutex);
  cache.emplace(key, c);
  return c;
}

double corrected_conditional_variance(double chi, double omega_m_over_kappa, double zeta) {
  if (!(chi > 0.0) || !(omega_m_over_kappa >= 0.0) || !(zeta >= 0.0)) {
    throw DomainError("chi must be positive and omega_m/kappa, zeta non-negative");
  }
  const double e = omega_m_over_kappa;
  return 0.5 * (1.0 / (chi * chi) + zeta * zeta * chi * chi * e * e);
}

void write_envelope(std::ostream& out, const Envelope& e) {
  out << "# pulse-envelope v1\n";
  for (std::size_t i = 0; i < e.t.size(); ++i) {
    out << format_double(e.t[i]) << ' ' << format_double(e.values[i]) << '\n';
  }
}

Envelope read_envelope(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# pulse-envelope v1", 0) != 0) {
    throw DomainError("envelope file must start with '# pulse-envelope v1'");
  }
  std::vector<double> t, v;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double a = 0.0, b = 0.0;
    if (!(ls >> a >> b)) throw DomainError("malformed envelope line: " + line);
    t.push_back(a);
    v.push_back(b);
  }
  if (t.size() < 3) throw GridError("envelope needs at least three samples");
  const UniformGrid grid = UniformGrid::linspace(t.front(), t.back(), t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (std::abs(t[i] - grid[i]) > 1e-6 * grid.step()) throw GridError("envelope time samples are not uniform");
  }
  return sampled_envelope(grid, std::move(v));
}

}  // namespace optopulse::pulse
