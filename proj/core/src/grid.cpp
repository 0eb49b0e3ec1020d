#include "optopulse/grid.hpp"

#include <cmath>

#include "optopulse/errors.hpp"

namespace optopulse {

UniformGrid::UniformGrid(double start, double step, std::size_t size)
    : start_(start), step_(step), size_(size) {
  if (!(step > 0.0) || !std::isfinite(start) || !std::isfinite(step)) {
    throw GridError("uniform grid needs a finite positive step");
  }
}

UniformGrid UniformGrid::linspace(double first, double last, std::size_t size) {
  if (size < 2 || !(last > first)) {
    throw GridError("linspace needs at least two points and last > first");
  }
  return UniformGrid(first, (last - first) / static_cast<double>(size - 1), size);
}

UniformGrid UniformGrid::centered(double half_width, std::size_t size) {
  return linspace(-half_width, half_width, size);
}

std::vector<double> UniformGrid::points() const {
  std::vector<double> out(size_);
  for (std::size_t i = 0; i < size_; ++i) out[i] = (*this)[i];
  return out;
}

double trapezoid(std::span<const double> values, double step) {
  if (values.size() < 2) return 0.0;
  double sum = 0.5 * (values.front() + values.back());
  for (std::size_t i = 1; i + 1 < values.size(); ++i) sum += values[i];
  return sum * step;
}

double interpolate(const UniformGrid& grid, std::span<const double> values, double x) {
  const double pos = (x - grid.start()) / grid.step();
  if (pos < 0.0 || pos > static_cast<double>(grid.size() - 1)) return 0.0;
  auto i = static_cast<std::size_t>(pos);
  if (i + 1 >= grid.size()) return values[grid.size() - 1];
  const double frac = pos - static_cast<double>(i);
  return values[i] + frac * (values[i + 1] - values[i]);
}

}  // namespace optopulse
