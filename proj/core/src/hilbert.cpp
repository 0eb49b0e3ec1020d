#include "optopulse/hilbert.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "optopulse/errors.hpp"

namespace optopulse::hilbert {

namespace {

constexpr double kPi = std::numbers::pi;

void check_n_max(int n_max) {
  if (n_max < 1) throw DomainError("n_max must be at least 1");
}

void check_tail(const Matrix& rho, const char* what) {
  const auto d = rho.rows();
  double top = rho(d - 1, d - 1).real();
  if (d > 1) top += rho(d - 2, d - 2).real();
  if (top > kTailTolerance) {
    throw TruncationError(std::string(what) + ": top two Fock levels hold " + std::to_string(top) +
                          " > 1e-6; increase n_max");
  }
}

Eigen::VectorXcd coherent_amplitudes(Complex alpha, int n_max) {
  Eigen::VectorXcd c(n_max + 1);
  c(0) = std::exp(-0.5 * std::norm(alpha));
  for (int n = 1; n <= n_max; ++n) c(n) = c(n - 1) * alpha / std::sqrt(static_cast<double>(n));
  return c;
}

// b, b^2 in the truncated basis: <n-1|b|n> = sqrt(n).
Matrix lowering(int dim) {
  Matrix b = Matrix::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) b(n - 1, n) = std::sqrt(static_cast<double>(n));
  return b;
}

Matrix lowering_squared(int dim) {
  Matrix b2 = Matrix::Zero(dim, dim);
  for (int n = 2; n < dim; ++n) b2(n - 2, n) = std::sqrt(static_cast<double>(n) * (n - 1));
  return b2;
}

}  // namespace

// ---------------------------------------------------------------- FockState

FockState FockState::from_density(Matrix rho, bool check_truncation) {
  if (rho.rows() != rho.cols() || rho.rows() < 2) {
    throw DomainError("density matrix must be square with dimension >= 2");
  }
  const double scale = std::max(rho.cwiseAbs().maxCoeff(), 1e-300);
  const double herm_defect = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  if (herm_defect > 1e-8 * scale) throw DomainError("density matrix is not Hermitian");
  Matrix h = 0.5 * (rho + rho.adjoint());
  const double tr = h.trace().real();
  if (!(tr > 0.0) || !std::isfinite(tr)) throw DomainError("density matrix has non-positive trace");
  h /= tr;
  if (check_truncation) check_tail(h, "FockState");
  return FockState(std::move(h));
}

double FockState::trace() const { return rho_.trace().real(); }

double FockState::purity() const { return (rho_ * rho_).trace().real(); }

double FockState::mean_number() const {
  double n = 0.0;
  for (Eigen::Index k = 0; k < rho_.rows(); ++k) n += static_cast<double>(k) * rho_(k, k).real();
  return n;
}

double FockState::top_population(int levels) const {
  double top = 0.0;
  for (int k = 0; k < levels && k < rho_.rows(); ++k) top += rho_(rho_.rows() - 1 - k, rho_.rows() - 1 - k).real();
  return top;
}

double FockState::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Matrix> es(rho_, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// ------------------------------------------------------------- constructors

int default_n_max(double nbar, double alpha_abs2) {
  if (nbar < 0.0 || alpha_abs2 < 0.0) throw DomainError("occupation must be non-negative");
  int n = static_cast<int>(std::ceil(8.0 * (nbar + alpha_abs2 + 1.0)));
  if (nbar > 0.0) {
    // Top-two Bose-Einstein population (1-r) r^{N-1} (1+r) <= 1e-7.
    const double r = nbar / (nbar + 1.0);
    const double need = std::log(1e-7 / ((1.0 - r) * (1.0 + r))) / std::log(r) + 1.0;
    n = std::max(n, static_cast<int>(std::ceil(need)) + static_cast<int>(std::ceil(alpha_abs2 + 6.0 * std::sqrt(alpha_abs2))));
  }
  return n;
}

FockState new_thermal(double nbar, int n_max) {
  if (nbar < 0.0 || !std::isfinite(nbar)) throw DomainError("thermal occupation must be >= 0");
  check_n_max(n_max);
  Matrix rho = Matrix::Zero(n_max + 1, n_max + 1);
  if (nbar == 0.0) {
    rho(0, 0) = 1.0;
  } else {
    const double r = nbar / (nbar + 1.0);
    double w = 1.0;
    for (int n = 0; n <= n_max; ++n) {
      rho(n, n) = w;
      w *= r;
    }
  }
  return FockState::from_density(std::move(rho));
}

FockState from_amplitudes(const Eigen::VectorXcd& amplitudes, bool check_truncation) {
  const double norm = amplitudes.norm();
  if (!(norm > 0.0)) throw DomainError("state vector has zero norm");
  const Eigen::VectorXcd psi = amplitudes / norm;
  return FockState::from_density(psi * psi.adjoint(), check_truncation);
}

FockState new_coherent(Complex alpha, int n_max) {
  check_n_max(n_max);
  const double a = std::abs(alpha);
  if (a * a + 6.0 * a > n_max) {
    throw TruncationError("coherent state needs |alpha|^2 + 6|alpha| <= n_max");
  }
  return from_amplitudes(coherent_amplitudes(alpha, n_max));
}

FockState new_cat(double delta, CatAxis axis, int n_max) {
  if (delta < 0.0 || !std::isfinite(delta)) throw DomainError("cat amplitude must be >= 0");
  check_n_max(n_max);
  if (delta * delta + 6.0 * delta > n_max) {
    throw TruncationError("cat state needs delta^2 + 6 delta <= n_max");
  }
  const Complex unit = axis == CatAxis::Real ? Complex(1.0, 0.0) : Complex(0.0, 1.0);
  const double sign = axis == CatAxis::MinusI ? -1.0 : 1.0;
  if (delta == 0.0) {
    if (axis == CatAxis::MinusI) throw DomainError("odd cat with delta = 0 is the zero vector");
    return new_number(0, n_max);
  }
  const Eigen::VectorXcd psi =
      coherent_amplitudes(unit * delta, n_max) + sign * coherent_amplitudes(-unit * delta, n_max);
  return from_amplitudes(psi);
}

FockState new_number(int n, int n_max) {
  check_n_max(n_max);
  if (n < 0 || n > n_max) throw DomainError("number state outside truncation");
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(n_max + 1);
  psi(n) = 1.0;
  return from_amplitudes(psi, n + 2 <= n_max);
}

// ------------------------------------------------------------------ rotate

FockState rotate(const FockState& state, double theta) {
  const Matrix& rho = state.density();
  Matrix out(rho.rows(), rho.cols());
  for (Eigen::Index n = 0; n < rho.rows(); ++n) {
    for (Eigen::Index m = 0; m < rho.cols(); ++m) {
      out(n, m) = rho(n, m) * std::polar(1.0, theta * static_cast<double>(n - m));
    }
  }
  return FockState::from_density(std::move(out), false);
}

// --------------------------------------------------------- position basis

Eigen::MatrixXd hermite_functions(int n_max, std::span<const double> x) {
  const auto g = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd psi(n_max + 1, g);
  const double c0 = std::pow(kPi, -0.25);
  for (Eigen::Index j = 0; j < g; ++j) {
    const double xj = x[static_cast<std::size_t>(j)];
    psi(0, j) = c0 * std::exp(-0.5 * xj * xj);
    if (n_max >= 1) psi(1, j) = std::sqrt(2.0) * xj * psi(0, j);
    for (int n = 2; n <= n_max; ++n) {
      psi(n, j) = std::sqrt(2.0 / n) * xj * psi(n - 1, j) - std::sqrt((n - 1.0) / n) * psi(n - 2, j);
    }
  }
  return psi;
}

UniformGrid position_quadrature_grid(int n_max, double extra_freq) {
  const double reach = std::sqrt(2.0 * n_max + 1.0);
  const double half = reach + 9.0;
  // products of two number states oscillate at up to 2*reach rad per unit x
  const double step = std::min(0.04, std::numbers::pi / (3.0 * (2.0 * reach + std::abs(extra_freq))));
  const auto points = static_cast<std::size_t>(std::ceil(2.0 * half / step)) + 1;
  return UniformGrid::centered(half, points);
}

Matrix position_function_matrix(int n_max, const UniformGrid& grid,
                                const std::function<Complex(double)>& f) {
  const auto x = grid.points();
  const Eigen::MatrixXd psi = hermite_functions(n_max, x);
  Eigen::MatrixXcd weighted(psi.rows(), psi.cols());
  for (Eigen::Index j = 0; j < psi.cols(); ++j) {
    double w = grid.step();
    if (j == 0 || j == psi.cols() - 1) w *= 0.5;
    weighted.col(j) = psi.col(j).cast<Complex>() * (w * f(x[static_cast<std::size_t>(j)]));
  }
  return weighted * psi.transpose().cast<Complex>();
}

// ---------------------------------------------------------------- marginal

double Marginal::integral() const { return trapezoid(values, x.step()); }

double Marginal::mean() const {
  std::vector<double> w(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) w[i] = x[i] * values[i];
  return trapezoid(w, x.step()) / integral();
}

double Marginal::variance() const {
  const double mu = mean();
  std::vector<double> w(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) w[i] = (x[i] - mu) * (x[i] - mu) * values[i];
  return trapezoid(w, x.step()) / integral();
}

Marginal marginal(const FockState& state, double theta, const UniformGrid& x_grid) {
  const FockState rotated = rotate(state, theta);
  const Moments mom = moments(rotated);
  const double mu = mom.mean(0);
  const double sigma = std::sqrt(std::max(mom.cov(0, 0), 0.0));
  if (x_grid.front() > mu - 3.0 * sigma || x_grid.back() < mu + 3.0 * sigma) {
    throw GridError("marginal grid must span at least mean +- 3 sigma");
  }
  const auto x = x_grid.points();
  const Eigen::MatrixXd psi = hermite_functions(state.n_max(), x);
  const Eigen::MatrixXcd m = rotated.density() * psi.cast<Complex>();
  Marginal out{theta, x_grid, std::vector<double>(x.size())};
  for (Eigen::Index j = 0; j < psi.cols(); ++j) {
    const double v = (psi.col(j).cast<Complex>().transpose() * m.col(j))(0, 0).real();
    out.values[static_cast<std::size_t>(j)] = std::max(v, 0.0);
  }
  return out;
}

// ------------------------------------------------------------------ wigner

double WignerGrid::integral() const {
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double wx = (i == 0 || i + 1 == x.size()) ? 0.5 : 1.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double wp = (j == 0 || j + 1 == p.size()) ? 0.5 : 1.0;
      sum += wx * wp * at(i, j);
    }
  }
  return sum * x.step() * p.step();
}

double WignerGrid::min() const { return *std::min_element(values.begin(), values.end()); }

std::vector<double> WignerGrid::x_marginal() const {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = trapezoid(std::span<const double>(values).subspan(i * p.size(), p.size()), p.step());
  }
  return out;
}

namespace {

// Iterates the Wigner functions W_mn of |m><n| (n >= m) over the grid using
// the Laguerre recurrence; `visit(m, n, Wlist[n])` is called for every pair.
template <typename Visit>
void for_each_wigner_basis(int n_max, const UniformGrid& xg, const UniformGrid& pg, Visit&& visit) {
  const auto npts = static_cast<Eigen::Index>(xg.size() * pg.size());
  Eigen::ArrayXcd a(npts);
  for (std::size_t i = 0; i < xg.size(); ++i) {
    for (std::size_t j = 0; j < pg.size(); ++j) {
      a(static_cast<Eigen::Index>(i * pg.size() + j)) = Complex(xg[i], pg[j]) / std::sqrt(2.0);
    }
  }
  const Eigen::ArrayXcd two_a = 2.0 * a;
  const Eigen::ArrayXcd two_a_conj = two_a.conjugate();
  std::vector<Eigen::ArrayXcd> wl(static_cast<std::size_t>(n_max + 1));
  wl[0] = (-2.0 * a.abs2()).exp().cast<Complex>() / kPi;
  visit(0, 0, wl[0]);
  for (int n = 1; n <= n_max; ++n) {
    wl[n] = two_a * wl[n - 1] / std::sqrt(static_cast<double>(n));
    visit(0, n, wl[n]);
  }
  Eigen::ArrayXcd temp, temp2;
  for (int m = 1; m <= n_max; ++m) {
    const double sm = std::sqrt(static_cast<double>(m));
    temp = wl[m];
    wl[m] = (two_a_conj * temp - sm * wl[m - 1]) / sm;
    visit(m, m, wl[m]);
    for (int n = m + 1; n <= n_max; ++n) {
      temp2 = (two_a * wl[n - 1] - sm * temp) / std::sqrt(static_cast<double>(n));
      temp = std::move(wl[n]);
      wl[n] = temp2;
      visit(m, n, wl[n]);
    }
  }
}

}  // namespace

WignerGrid wigner(const FockState& state, const UniformGrid& x_grid, const UniformGrid& p_grid) {
  const Moments mom = moments(state);
  const double sx = std::sqrt(std::max(mom.cov(0, 0), 0.0));
  const double sp = std::sqrt(std::max(mom.cov(1, 1), 0.0));
  if (x_grid.front() > mom.mean(0) - 3.0 * sx || x_grid.back() < mom.mean(0) + 3.0 * sx ||
      p_grid.front() > mom.mean(1) - 3.0 * sp || p_grid.back() < mom.mean(1) + 3.0 * sp) {
    throw GridError("Wigner grid must span at least mean +- 3 sigma in both quadratures");
  }
  const Matrix& rho = state.density();
  Eigen::ArrayXd w = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(x_grid.size() * p_grid.size()));
  for_each_wigner_basis(state.n_max(), x_grid, p_grid, [&](int m, int n, const Eigen::ArrayXcd& basis) {
    if (m == n) {
      w += rho(m, m).real() * basis.real();
    } else {
      w += 2.0 * (rho(m, n) * basis).real();
    }
  });
  return {x_grid, p_grid, std::vector<double>(w.data(), w.data() + w.size())};
}

Matrix wigner_to_density(const WignerGrid& wg, int n_max) {
  check_n_max(n_max);
  const auto nx = wg.x.size(), np = wg.p.size();
  Eigen::ArrayXd weighted(static_cast<Eigen::Index>(nx * np));
  for (std::size_t i = 0; i < nx; ++i) {
    const double wx = (i == 0 || i + 1 == nx) ? 0.5 : 1.0;
    for (std::size_t j = 0; j < np; ++j) {
      const double wp = (j == 0 || j + 1 == np) ? 0.5 : 1.0;
      weighted(static_cast<Eigen::Index>(i * np + j)) = wx * wp * wg.at(i, j);
    }
  }
  weighted *= 2.0 * kPi * wg.x.step() * wg.p.step();
  Matrix rho = Matrix::Zero(n_max + 1, n_max + 1);
  for_each_wigner_basis(n_max, wg.x, wg.p, [&](int m, int n, const Eigen::ArrayXcd& basis) {
    const Complex c = (weighted.cast<Complex>() * basis.conjugate()).sum();
    rho(m, n) = c;
    rho(n, m) = std::conj(c);
  });
  return rho;
}

// ----------------------------------------------------------------- moments

Moments moments(const FockState& state) {
  const Matrix& rho = state.density();
  const int d = static_cast<int>(rho.rows());
  const Matrix b = lowering(d);
  const Matrix b2 = lowering_squared(d);
  const double s2 = std::sqrt(2.0);

  // <b> = Tr(rho b), <b^2> = Tr(rho b^2), <b^dag b> = n.
  const Complex eb = (rho * b).trace();
  const Complex eb2 = (rho * b2).trace();
  const double n = state.mean_number();

  Moments out;
  out.mean(0) = s2 * eb.real();
  out.mean(1) = s2 * eb.imag();
  // X^2 = (b^2 + b^dag^2 + 2 n + 1)/2, P^2 = (2 n + 1 - b^2 - b^dag^2)/2,
  // (XP + PX)/2 = i (b^dag^2 - b^2)/2.
  const double x2 = eb2.real() + n + 0.5;
  const double p2 = n + 0.5 - eb2.real();
  const double xp = eb2.imag();
  out.cov(0, 0) = x2 - out.mean(0) * out.mean(0);
  out.cov(1, 1) = p2 - out.mean(1) * out.mean(1);
  out.cov(0, 1) = out.cov(1, 0) = xp - out.mean(0) * out.mean(1);
  return out;
}

// ---------------------------------------------------------------- fidelity

double fidelity(const FockState& a, const FockState& b) {
  if (a.dim() != b.dim()) throw DomainError("fidelity needs states of equal dimension");
  Eigen::SelfAdjointEigenSolver<Matrix> ea(a.density());
  const Eigen::VectorXd la = ea.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Matrix sqrt_a = ea.eigenvectors() * la.asDiagonal() * ea.eigenvectors().adjoint();
  const Matrix m = sqrt_a * b.density() * sqrt_a;
  Eigen::SelfAdjointEigenSolver<Matrix> em(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
  const double root = em.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  return std::clamp(root * root, 0.0, 1.0);
}

}  // namespace optopulse::hilbert
