#pragma once

// Shared fixtures and independent oracles for the test programs.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <unistd.h>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "semgap/io.hpp"

namespace testsupport {

namespace fs = std::filesystem;

inline fs::path data_dir() { return SEMGAP_TEST_DATA; }

/// Fresh directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("semgap_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

struct RefTableRow {
  std::string domain;
  double gap_rank = 0.0;
  double gap_score = 0.0;
  double mean_rating = 0.0;
  std::optional<double> avg_j;
};

inline std::vector<RefTableRow> load_reftable() {
  const auto t = semgap::io::read_csv(data_dir() / "reftable.csv");
  const auto d = t.require("domain"), r = t.require("gap_rank"), g = t.require("gap_score"),
             m = t.require("mean_rating"), a = t.require("avg_j");
  std::vector<RefTableRow> out;
  for (const auto& row : t.rows) {
    out.push_back({row[d], *semgap::io::parse_number(row[r], t.origin),
                   *semgap::io::parse_number(row[g], t.origin), *semgap::io::parse_number(row[m], t.origin),
                   semgap::io::parse_number(row[a], t.origin)});
  }
  return out;
}

namespace oracle {

// Tail probabilities by direct integration of the densities.

inline double t_density(double u, double df) {
  const double c = std::lgamma((df + 1.0) / 2.0) - std::lgamma(df / 2.0) - 0.5 * std::log(df * M_PI);
  return std::exp(c - (df + 1.0) / 2.0 * std::log1p(u * u / df));
}

inline double t_two_sided(double t, double df) {
  boost::math::quadrature::exp_sinh<double> integrator;
  const double a = std::abs(t);
  return 2.0 * integrator.integrate([&](double u) { return t_density(u + a, df); }, 0.0,
                                    std::numeric_limits<double>::infinity());
}

inline double chi2_density(double x, double df) {
  if (x <= 0.0) return 0.0;
  const double k = df / 2.0;
  return std::exp((k - 1.0) * std::log(x) - x / 2.0 - k * std::log(2.0) - std::lgamma(k));
}

inline double chi2_upper(double x, double df) {
  if (x < df) {
    boost::math::quadrature::tanh_sinh<double> integrator;
    return 1.0 - integrator.integrate([&](double u) { return chi2_density(u, df); }, 0.0, x);
  }
  boost::math::quadrature::exp_sinh<double> integrator;
  return integrator.integrate([&](double u) { return chi2_density(u + x, df); }, 0.0,
                              std::numeric_limits<double>::infinity());
}

// Closed forms in extended precision, written independently of the library.

inline long double pearson_r(const std::vector<double>& x, const std::vector<double>& y) {
  const long double n = static_cast<long double>(x.size());
  long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += static_cast<long double>(x[i]) * x[i];
    syy += static_cast<long double>(y[i]) * y[i];
    sxy += static_cast<long double>(x[i]) * y[i];
  }
  return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

/// Rank of each value: number of smaller values plus the mean position among
/// equal ones.
inline std::vector<double> ranks_by_counting(const std::vector<double>& v) {
  std::vector<double> out;
  for (double a : v) {
    double less = 0, equal = 0;
    for (double b : v) {
      less += b < a;
      equal += b == a;
    }
    out.push_back(less + (equal + 1.0) / 2.0);
  }
  return out;
}

/// 1 - 6 sum d^2 / (n (n^2 - 1)); valid without ties.
inline long double spearman_no_ties(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = ranks_by_counting(x), ry = ranks_by_counting(y);
  long double d2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
  const long double n = static_cast<long double>(x.size());
  return 1.0L - 6.0L * d2 / (n * (n * n - 1.0L));
}

inline long double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson_r(ranks_by_counting(x), ranks_by_counting(y));
}

struct Line {
  long double intercept, slope;
};

/// Normal equations solved by Cramer's rule.
inline Line ols_line(const std::vector<double>& x, const std::vector<double>& y) {
  const long double n = static_cast<long double>(x.size());
  long double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += static_cast<long double>(x[i]) * x[i];
    sxy += static_cast<long double>(x[i]) * y[i];
  }
  const long double det = n * sxx - sx * sx;
  return {(sy * sxx - sx * sxy) / det, (n * sxy - sx * sy) / det};
}

/// Exact two-sided permutation p-value of a correlation statistic, by
/// enumerating every ordering of y.
template <typename Stat>
double permutation_p(const std::vector<double>& x, std::vector<double> y, Stat stat) {
  const long double observed = std::abs(stat(x, y));
  std::sort(y.begin(), y.end());
  std::size_t hits = 0, total = 0;
  do {
    ++total;
    hits += std::abs(stat(x, y)) >= observed - 1e-12L;
  } while (std::next_permutation(y.begin(), y.end()));
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace oracle

inline double rel_err(double got, double want) {
  if (want == 0.0) return std::abs(got);
  return std::abs(got - want) / std::abs(want);
}

}  // namespace testsupport
