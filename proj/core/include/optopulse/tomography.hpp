#pragma once

// Homodyne-style state reconstruction: outcome histograms over quadrature
// angles, kernel calibration, deconvolution onto the position axis and
// filtered backprojection to a Wigner function.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "optopulse/grid.hpp"
#include "optopulse/hilbert.hpp"
#include "optopulse/measurement.hpp"

namespace optopulse::tomography {

struct Histogram {
  std::vector<double> edges;   ///< uniform, size = counts.size() + 1
  std::vector<double> counts;

  double total() const;
  double bin_width() const { return edges[1] - edges[0]; }
  /// Counts per unit outcome normalized to unit integral, at bin centres.
  measurement::OutcomeDensity density() const;
};

/// Uniform bins on [lo, hi]; samples outside are dropped.
Histogram make_histogram(std::span<const double> samples, double lo, double hi, std::size_t bins);
/// `bins` bins over sample mean +- `sigmas` sample standard deviations.
Histogram auto_histogram(std::span<const double> samples, std::size_t bins = 101, double sigmas = 5.0);
/// Histogram of records, each compensated by its known mean when present.
Histogram histogram_from_records(std::span<const measurement::MeasurementRecord> records, std::size_t bins = 101,
                                 double sigmas = 5.0);

struct Tomogram {
  std::vector<double> angles;
  measurement::MeasurementSpec spec;
  std::size_t shots = 0;
  std::vector<Histogram> histograms;
  std::vector<std::vector<double>> samples;  ///< raw outcomes when kept; not serialized

  void validate() const;
  nlohmann::json to_json() const;
  static Tomogram from_json(const nlohmann::json& j);
};

/// theta_j = j pi / count, j = 0..count-1.
std::vector<double> half_period_angles(std::size_t count);

struct AcquireOptions {
  std::size_t bins = 101;
  double sigmas = 5.0;
  unsigned threads = 1;
  bool keep_samples = false;
};

/// Samples `shots` outcomes at every angle. Angle j draws from the stream
/// derive_seed(seed, j), so results do not depend on the thread count.
Tomogram acquire(const hilbert::FockState& state, const measurement::MeasurementSpec& spec,
                 std::span<const double> angles, std::size_t shots, std::uint64_t seed,
                 const AcquireOptions& options = {});

/// Outcome-offset density of the optical phase noise, in P_L units.
struct Kernel {
  UniformGrid grid;
  std::vector<double> values;
  double chi = 0.0;

  double integral() const;
  double mean() const;
  double variance() const;
};

/// Exact Gaussian kernel of the given variance on `grid`.
Kernel gaussian_kernel(double variance, const UniformGrid& grid, double chi);

/// Kernel estimated from a fixed-mirror run: every shot records
/// chi * mirror_position + phase noise; the histogram is centred on the
/// sample mean.
Kernel calibrate_kernel(const measurement::MeasurementSpec& spec, std::size_t shots, std::uint64_t seed,
                        double mirror_position = 0.0, std::size_t bins = 101);

struct ChiCalibration {
  double chi = 0.0;
  double offset = 0.0;
};

/// Fits the mean outcome against known fixed-mirror displacements.
ChiCalibration calibrate_chi(const measurement::MeasurementSpec& spec, std::span<const double> displacements,
                             std::size_t shots, std::uint64_t seed);

/// Wiener deconvolution of an outcome density. The outcome axis is rescaled
/// to u = p / chi, the kernel is divided out with regularization
/// lambda = `regularization` * max |K(w)|^2, and the result is clipped at zero
/// and renormalized.
hilbert::Marginal deconvolve(const measurement::OutcomeDensity& outcomes, const Kernel& kernel,
                             double regularization = 1e-4, double theta = 0.0);

struct ReconstructOptions {
  double half_width = 7.0;         ///< phase-space grid spans +- half_width
  std::size_t grid_points = 201;   ///< per axis
  double apodization = 0.0;        ///< Gaussian filter roll-off in cycles per unit x; 0 disables
};

/// Filtered backprojection (Ram-Lak) of marginals at >= 12 angles covering
/// [0, pi).
hilbert::WignerGrid reconstruct_wigner(std::span<const hilbert::Marginal> marginals,
                                       const ReconstructOptions& options = {});

/// Projects a Wigner function onto the number basis and onto the nearest
/// physical state (Hermitian, negative eigenvalues clipped, unit trace).
hilbert::FockState wigner_to_fock(const hilbert::WignerGrid& w, int n_max);

/// Means and covariance of a Wigner grid by direct quadrature.
hilbert::Moments wigner_moments(const hilbert::WignerGrid& w);

/// Central-fringe contrast of an interference pattern: the density is
/// modelled as A exp(-(u - mu)^2 / (2 s^2)) (1 + V cos(k (u - mu) + phase)) and
/// |V| returned. Throws NumericError("no oscillation") when the flattened
/// density shows no fringe above 1e-3.
double fringe_visibility(const hilbert::Marginal& marginal);

void write_marginal_csv(std::ostream& out, const hilbert::Marginal& m);
void write_wigner_csv(std::ostream& out, const hilbert::WignerGrid& w);

}  // namespace optopulse::tomography
