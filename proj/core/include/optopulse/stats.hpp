#pragma once

#include <span>

namespace optopulse::stats {

struct SampleMoments {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
};

SampleMoments sample_moments(std::span<const double> samples);

/// Least-squares line y = intercept + slope * x.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};
LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Two-sample Kolmogorov-Smirnov test; returns the asymptotic p-value.
double ks_two_sample_pvalue(std::span<const double> a, std::span<const double> b);

/// Pearson chi-square goodness of fit of observed counts against expected
/// counts. Cells with expectation below `min_expected` are pooled.
/// Returns the p-value.
double chi_square_pvalue(std::span<const double> observed, std::span<const double> expected,
                         double min_expected = 5.0);

}  // namespace optopulse::stats
