#include "optopulse/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <vector>

#include "optopulse/errors.hpp"

namespace optopulse::stats {

SampleMoments sample_moments(std::span<const double> samples) {
  if (samples.size() < 2) throw DomainError("sample moments need at least two samples");
  // Welford update.
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t n = 0;
  for (double s : samples) {
    ++n;
    const double delta = s - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (s - mean);
  }
  return {mean, m2 / static_cast<double>(n - 1)};
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("line fit needs matching samples");
  const auto n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0.0) throw DomainError("line fit needs distinct abscissae");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

double ks_two_sample_pvalue(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DomainError("KS test needs non-empty samples");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const auto na = static_cast<double>(sa.size());
  const auto nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const double v = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] <= v) ++i;
    while (j < sb.size() && sb[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = na * nb / (na + nb);
  const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  if (lambda < 1e-3) return 1.0;
  // Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
  double q = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    q += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(q, 0.0, 1.0);
}

double chi_square_pvalue(std::span<const double> observed, std::span<const double> expected,
                         double min_expected) {
  if (observed.size() != expected.size()) throw DomainError("chi-square cells mismatch");
  std::vector<double> obs, exp;
  double pool_o = 0.0, pool_e = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    pool_o += observed[i];
    pool_e += expected[i];
    if (pool_e >= min_expected) {
      obs.push_back(pool_o);
      exp.push_back(pool_e);
      pool_o = pool_e = 0.0;
    }
  }
  if (!exp.empty()) {
    obs.back() += pool_o;
    exp.back() += pool_e;
  }
  if (exp.size() < 2) throw DomainError("chi-square test needs at least two populated cells");
  double stat = 0.0;
  for (std::size_t i = 0; i < exp.size(); ++i) stat += (obs[i] - exp[i]) * (obs[i] - exp[i]) / exp[i];
  const auto cells = static_cast<int>(exp.size());
  const boost::math::chi_squared_distribution<double> dist(cells - 1);
  return boost::math::cdf(boost::math::complement(dist, stat));
}

}  // namespace optopulse::stats
