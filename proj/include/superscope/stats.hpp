#pragma once

#include "superscope/core.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace superscope::stats {

inline double mean(std::span<const double> x) {
  if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Population standard deviation (divides by n).
inline double stddev(std::span<const double> x) {
  if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size()));
}

/// Pearson correlation; NaN when either input is constant.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorCode::LengthMismatch, "pearson: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline double pearson(const Vector& x, const Vector& y) {
  return pearson(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
                 std::span<const double>(y.data(), static_cast<std::size_t>(y.size())));
}

/// 1-based average ranks (ties share the mean of their positions).
inline std::vector<double> ranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

struct CorrelationTest {
  double r = std::numeric_limits<double>::quiet_NaN();
  double p = std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 0;
};

/// Two-sided p-value of a correlation coefficient via the t approximation
/// with n-2 degrees of freedom.
inline double correlation_p_value(double r, std::size_t n) {
  if (!std::isfinite(r) || n < 3) return std::numeric_limits<double>::quiet_NaN();
  if (std::abs(r) >= 1.0) return 0.0;
  const double df = static_cast<double>(n - 2);
  const double t = r * std::sqrt(df / (1.0 - r * r));
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

inline CorrelationTest pearson_test(std::span<const double> x, std::span<const double> y) {
  CorrelationTest out;
  out.n = x.size();
  out.r = pearson(x, y);
  out.p = correlation_p_value(out.r, out.n);
  return out;
}

/// Spearman rank correlation; p-value by the t approximation (approximate).
inline CorrelationTest spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorCode::LengthMismatch, "spearman: length mismatch");
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  CorrelationTest out;
  out.n = x.size();
  out.r = pearson(rx, ry);
  out.p = correlation_p_value(out.r, out.n);
  return out;
}

struct RankSumTest {
  double u = 0.0;              // Mann-Whitney U of the first sample
  double z = 0.0;              // tie-corrected normal statistic
  double p_greater = 1.0;      // one-sided: first sample stochastically larger
  double p_two_sided = 1.0;
  double effect = 0.5;         // U / (n1 n2), the common-language effect size
};

/// Wilcoxon rank-sum / Mann-Whitney U with normal approximation and tie correction.
inline RankSumTest rank_sum(std::span<const double> a, std::span<const double> b) {
  RankSumTest out;
  const std::size_t n1 = a.size(), n2 = b.size();
  if (n1 == 0 || n2 == 0) return out;
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto r = ranks(pooled);
  double r1 = 0.0;
  for (std::size_t i = 0; i < n1; ++i) r1 += r[i];
  const double dn1 = static_cast<double>(n1), dn2 = static_cast<double>(n2);
  out.u = r1 - dn1 * (dn1 + 1.0) / 2.0;
  out.effect = out.u / (dn1 * dn2);

  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double n = dn1 + dn2;
  const double var = dn1 * dn2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (var <= 0.0) return out;
  out.z = (out.u - dn1 * dn2 / 2.0) / std::sqrt(var);
  boost::math::normal_distribution<double> nd;
  out.p_greater = boost::math::cdf(boost::math::complement(nd, out.z));
  out.p_two_sided = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(nd, std::abs(out.z))));
  return out;
}

/// ROC AUC of `score` for predicting `positive`; ties count one half.
/// Returns NaN when either class is empty.
inline double roc_auc(std::span<const double> score, const std::vector<bool>& positive) {
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < score.size(); ++i) (positive[i] ? pos : neg).push_back(score[i]);
  if (pos.empty() || neg.empty()) return std::numeric_limits<double>::quiet_NaN();
  return rank_sum(pos, neg).effect;
}

/// Linear-interpolation quantile (numpy's default, "type 7").
inline double quantile(std::vector<double> x, double q) {
  if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(x.begin(), x.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(x.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, x.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return x[lo] + frac * (x[hi] - x[lo]);
}

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> counts;

  double bin_width() const { return counts.empty() ? 0.0 : (hi - lo) / static_cast<double>(counts.size()); }
};

/// Fixed-width bins spanning [min, max] of the data; the maximum lands in the last bin.
inline Histogram histogram(std::span<const double> x, std::size_t bins) {
  Histogram h;
  h.counts.assign(std::max<std::size_t>(bins, 1), 0);
  if (x.empty()) return h;
  h.lo = *std::min_element(x.begin(), x.end());
  h.hi = *std::max_element(x.begin(), x.end());
  if (h.hi == h.lo) h.hi = h.lo + 1.0;
  const double width = h.bin_width();
  for (double v : x) {
    auto b = static_cast<std::size_t>((v - h.lo) / width);
    h.counts[std::min(b, h.counts.size() - 1)] += 1;
  }
  return h;
}

}  // namespace superscope::stats
