#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace optopulse {

/// Uniformly spaced sample points start + i * step, i in [0, size).
class UniformGrid {
 public:
  UniformGrid() = default;
  UniformGrid(double start, double step, std::size_t size);

  /// Grid of `size` points from `first` to `last` inclusive.
  static UniformGrid linspace(double first, double last, std::size_t size);
  /// Symmetric grid [-half_width, half_width].
  static UniformGrid centered(double half_width, std::size_t size);

  double start() const { return start_; }
  double step() const { return step_; }
  std::size_t size() const { return size_; }
  double front() const { return start_; }
  double back() const { return start_ + step_ * static_cast<double>(size_ - 1); }
  double operator[](std::size_t i) const { return start_ + step_ * static_cast<double>(i); }

  std::vector<double> points() const;

  friend bool operator==(const UniformGrid&, const UniformGrid&) = default;

 private:
  double start_ = 0.0;
  double step_ = 1.0;
  std::size_t size_ = 0;
};

/// Composite trapezoid rule on a uniform grid.
double trapezoid(std::span<const double> values, double step);

/// Piecewise-linear interpolation of samples on `grid`; zero outside.
double interpolate(const UniformGrid& grid, std::span<const double> values, double x);

}  // namespace optopulse
