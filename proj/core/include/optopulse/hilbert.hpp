#pragma once

// Truncated number-basis representation of a single mechanical mode.
//
// Units: hbar = 1, X = (b + b^dag)/sqrt2, P = i(b^dag - b)/sqrt2, so the
// ground state has Var(X) = Var(P) = 1/2. A rotation by theta maps the
// quadratures as X -> X cos(theta) - P sin(theta), P -> X sin(theta) + P cos(theta).

#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "optopulse/grid.hpp"

namespace optopulse::hilbert {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;

/// Largest population allowed in the top two Fock levels.
inline constexpr double kTailTolerance = 1e-6;

/// Density matrix on span{|0>, ..., |n_max>}. Immutable after construction.
class FockState {
 public:
  /// Wraps a density matrix. The matrix is Hermitized and normalized to unit
  /// trace; construction fails on non-positive trace, on a Hermiticity defect
  /// larger than 1e-8 relative to the largest entry, or (when
  /// `check_truncation`) on more than kTailTolerance in the top two levels.
  static FockState from_density(Matrix rho, bool check_truncation = true);

  std::size_t dim() const { return static_cast<std::size_t>(rho_.rows()); }
  int n_max() const { return static_cast<int>(rho_.rows()) - 1; }
  const Matrix& density() const { return rho_; }

  double trace() const;
  double purity() const;
  double mean_number() const;
  /// Population held by the `levels` highest Fock levels.
  double top_population(int levels = 2) const;
  double min_eigenvalue() const;

 private:
  explicit FockState(Matrix rho) : rho_(std::move(rho)) {}
  Matrix rho_;
};

/// Truncation recommended for a state of mean thermal occupation `nbar`
/// displaced by |alpha|^2: max(ceil(8 (nbar + |alpha|^2 + 1)), the first level
/// whose Bose-Einstein tail falls below 1e-7).
int default_n_max(double nbar, double alpha_abs2 = 0.0);

FockState new_thermal(double nbar, int n_max);
FockState new_coherent(Complex alpha, int n_max);

enum class CatAxis {
  PlusI,   ///< |i delta> + |-i delta>
  MinusI,  ///< |i delta> - |-i delta>
  Real,    ///< |delta> + |-delta>
};
FockState new_cat(double delta, CatAxis axis, int n_max);

/// Fock number state |n>.
FockState new_number(int n, int n_max);

/// Builds a pure state from (unnormalized) number-basis amplitudes.
FockState from_amplitudes(const Eigen::VectorXcd& amplitudes, bool check_truncation = true);

FockState rotate(const FockState& state, double theta);

/// Position-representation number states psi_n(x_j), rows n = 0..n_max,
/// computed with the normalized Hermite-function recurrence.
Eigen::MatrixXd hermite_functions(int n_max, std::span<const double> x);

/// Matrix elements <n| f(X) |m> = sum_j w psi_n(x_j) f(x_j) psi_m(x_j) on
/// `grid` (trapezoid weights).
Matrix position_function_matrix(int n_max, const UniformGrid& grid,
                                const std::function<Complex(double)>& f);

/// Quadrature grid adequate for integrating products of number states up to
/// `n_max` against a function with extra oscillation frequency `extra_freq`.
UniformGrid position_quadrature_grid(int n_max, double extra_freq = 0.0);

/// Probability density of a rotated quadrature on a uniform grid.
struct Marginal {
  double theta = 0.0;
  UniformGrid x;
  std::vector<double> values;

  double integral() const;
  double mean() const;
  double variance() const;
};

/// <x| R(theta) rho R(theta)^dag |x> for x on `x_grid`. The grid must cover
/// mean +- 3 sigma of the rotated quadrature.
Marginal marginal(const FockState& state, double theta, const UniformGrid& x_grid);

/// Wigner quasi-probability on a Cartesian grid; values[i * p.size() + j]
/// is W(x_i, p_j).
struct WignerGrid {
  UniformGrid x;
  UniformGrid p;
  std::vector<double> values;

  double at(std::size_t i, std::size_t j) const { return values[i * p.size() + j]; }
  double integral() const;
  double min() const;
  /// Integral over p at each x (the theta = 0 marginal).
  std::vector<double> x_marginal() const;
};

WignerGrid wigner(const FockState& state, const UniformGrid& x_grid, const UniformGrid& p_grid);

/// Projects a Wigner function onto the truncated Fock basis,
/// rho_mn = 2 pi \int W conj(W_mn) dx dp.
Matrix wigner_to_density(const WignerGrid& w, int n_max);

/// First moments and symmetrized second central moments of (X, P).
struct Moments {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
};

Moments moments(const FockState& state);

/// Uhlmann fidelity (Tr sqrt(sqrt(a) b sqrt(a)))^2.
double fidelity(const FockState& a, const FockState& b);

}  // namespace optopulse::hilbert
