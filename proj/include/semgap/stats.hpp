#pragma once

// Correlation, least-squares and normality tests with two-sided p-values.
//
// Tail probabilities go through Boost.Math's regularized incomplete beta and
// gamma functions. Everything here is a pure function of its inputs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "semgap/error.hpp"

namespace semgap::stats {

struct StatResult {
  std::string test;
  double statistic = 0.0;
  std::size_t n = 0;
  double p_value = 1.0;
  std::string warning;
};

struct OlsFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
  std::vector<double> residuals;
};

/// P(|T| >= |t|) for Student's t with `df` degrees of freedom.
inline double student_t_two_sided(double t, double df) {
  if (!(df > 0.0)) throw UsageError("student_t_two_sided: df must be positive");
  if (std::isinf(t)) return 0.0;
  const double x = df / (df + t * t);
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return boost::math::ibeta(df / 2.0, 0.5, x);
}

/// Upper tail of the chi-square distribution.
inline double chi2_sf(double x, double df) {
  if (!(df > 0.0)) throw UsageError("chi2_sf: df must be positive");
  if (x <= 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::gamma_q(df / 2.0, x / 2.0);
}

/// Upper tail of the standard normal.
inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

namespace detail {

inline void require_paired(std::span<const double> x, std::span<const double> y,
                           std::size_t min_n, const char* who) {
  if (x.size() != y.size()) {
    throw UsageError(std::string(who) + ": vectors differ in length (" +
                     std::to_string(x.size()) + " vs " + std::to_string(y.size()) + ")");
  }
  if (x.size() < min_n) {
    throw DataError(std::string(who) + ": need at least " + std::to_string(min_n) +
                    " observations, got " + std::to_string(x.size()));
  }
}

inline double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Central moment sums around the mean, two-pass.
struct CrossMoments {
  double sxx = 0.0, syy = 0.0, sxy = 0.0, mx = 0.0, my = 0.0;
};

inline CrossMoments cross_moments(std::span<const double> x, std::span<const double> y) {
  CrossMoments m;
  m.mx = mean(x);
  m.my = mean(y);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - m.mx;
    const double dy = y[i] - m.my;
    m.sxx += dx * dx;
    m.syy += dy * dy;
    m.sxy += dx * dy;
  }
  return m;
}

inline StatResult correlation_from_r(std::string name, double r, std::size_t n) {
  r = std::clamp(r, -1.0, 1.0);
  StatResult out{std::move(name), r, n, 1.0, {}};
  const double df = static_cast<double>(n) - 2.0;
  if (std::abs(r) == 1.0) {
    out.p_value = 0.0;
  } else {
    const double t = r * std::sqrt(df / ((1.0 - r) * (1.0 + r)));
    out.p_value = student_t_two_sided(t, df);
  }
  return out;
}

}  // namespace detail

/// Product-moment correlation, p-value from the t transform with n-2 df.
inline StatResult pearson(std::span<const double> x, std::span<const double> y) {
  detail::require_paired(x, y, 3, "pearson");
  const auto m = detail::cross_moments(x, y);
  if (m.sxx == 0.0 || m.syy == 0.0) {
    throw DataError("pearson: zero variance, correlation undefined");
  }
  return detail::correlation_from_r("pearson", m.sxy / std::sqrt(m.sxx * m.syy), x.size());
}

/// 1-based ranks; tied values share the mean of the positions they occupy.
inline std::vector<double> fractional_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);  // mean of (i+1)..j
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}

/// Rank correlation: Pearson on fractional ranks, same t-transform p-value.
inline StatResult spearman(std::span<const double> x, std::span<const double> y) {
  detail::require_paired(x, y, 3, "spearman");
  const auto rx = fractional_ranks(x);
  const auto ry = fractional_ranks(y);
  const auto m = detail::cross_moments(rx, ry);
  if (m.sxx == 0.0 || m.syy == 0.0) {
    throw DataError("spearman: zero rank variance (all values tied)");
  }
  return detail::correlation_from_r("spearman", m.sxy / std::sqrt(m.sxx * m.syy), x.size());
}

/// Least-squares line y = intercept + slope * x.
inline OlsFit ols(std::span<const double> x, std::span<const double> y) {
  detail::require_paired(x, y, 3, "ols");
  const auto m = detail::cross_moments(x, y);
  if (m.sxx == 0.0) throw DataError("ols: constant x, degenerate fit");
  OlsFit fit;
  fit.slope = m.sxy / m.sxx;
  fit.intercept = m.my - fit.slope * m.mx;
  fit.residuals.resize(x.size());
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    fit.residuals[i] = y[i] - (fit.intercept + fit.slope * x[i]);
    ss_res += fit.residuals[i] * fit.residuals[i];
  }
  fit.r_squared = m.syy == 0.0 ? 1.0 : 1.0 - ss_res / m.syy;
  return fit;
}

namespace detail {

struct SampleMoments {
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
};

inline SampleMoments sample_moments(std::span<const double> x) {
  const double mu = mean(x);
  SampleMoments s;
  for (double v : x) {
    const double d = v - mu;
    const double d2 = d * d;
    s.m2 += d2;
    s.m3 += d2 * d;
    s.m4 += d2 * d2;
  }
  const double n = static_cast<double>(x.size());
  s.m2 /= n;
  s.m3 /= n;
  s.m4 /= n;
  return s;
}

}  // namespace detail

/// Z score of the sample skewness sqrt(b1) (D'Agostino 1970 transform).
inline double skewness_z(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  if (x.size() < 8) throw DataError("skewness_z: need at least 8 observations");
  const auto s = detail::sample_moments(x);
  if (s.m2 == 0.0) throw DataError("skewness_z: zero variance");
  const double b1 = s.m3 / std::pow(s.m2, 1.5);
  double y = b1 * std::sqrt((n + 1.0) * (n + 3.0) / (6.0 * (n - 2.0)));
  const double beta2 = 3.0 * (n * n + 27.0 * n - 70.0) * (n + 1.0) * (n + 3.0) /
                       ((n - 2.0) * (n + 5.0) * (n + 7.0) * (n + 9.0));
  const double w2 = -1.0 + std::sqrt(2.0 * (beta2 - 1.0));
  const double delta = 1.0 / std::sqrt(0.5 * std::log(w2));
  const double alpha = std::sqrt(2.0 / (w2 - 1.0));
  if (y == 0.0) y = 1.0;
  return delta * std::log(y / alpha + std::sqrt((y / alpha) * (y / alpha) + 1.0));
}

/// Z score of the sample kurtosis b2 (Anscombe-Glynn 1983 transform).
inline double kurtosis_z(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  if (x.size() < 5) throw DataError("kurtosis_z: need at least 5 observations");
  const auto s = detail::sample_moments(x);
  if (s.m2 == 0.0) throw DataError("kurtosis_z: zero variance");
  const double b2 = s.m4 / (s.m2 * s.m2);
  const double expected = 3.0 * (n - 1.0) / (n + 1.0);
  const double var_b2 = 24.0 * n * (n - 2.0) * (n - 3.0) /
                        ((n + 1.0) * (n + 1.0) * (n + 3.0) * (n + 5.0));
  const double xs = (b2 - expected) / std::sqrt(var_b2);
  const double sqrt_beta1 = 6.0 * (n * n - 5.0 * n + 2.0) / ((n + 7.0) * (n + 9.0)) *
                            std::sqrt(6.0 * (n + 3.0) * (n + 5.0) / (n * (n - 2.0) * (n - 3.0)));
  const double a = 6.0 + 8.0 / sqrt_beta1 *
                             (2.0 / sqrt_beta1 + std::sqrt(1.0 + 4.0 / (sqrt_beta1 * sqrt_beta1)));
  const double term1 = 1.0 - 2.0 / (9.0 * a);
  const double denom = 1.0 + xs * std::sqrt(2.0 / (a - 4.0));
  if (denom == 0.0) throw DataError("kurtosis_z: undefined transform (denominator 0)");
  const double term2 = std::copysign(std::cbrt((1.0 - 2.0 / a) / std::abs(denom)), denom);
  return (term1 - term2) / std::sqrt(2.0 / (9.0 * a));
}

/// D'Agostino-Pearson omnibus K^2 = Z_skew^2 + Z_kurt^2, p from chi-square(2).
inline StatResult dagostino_k2(std::span<const double> x) {
  const double zs = skewness_z(x);
  const double zk = kurtosis_z(x);
  StatResult out{"dagostino_k2", zs * zs + zk * zk, x.size(), 1.0, {}};
  out.p_value = chi2_sf(out.statistic, 2.0);
  if (x.size() < 20) {
    out.warning = "kurtosis test is unreliable for n < 20 (n=" + std::to_string(x.size()) + ")";
  }
  return out;
}

}  // namespace semgap::stats
