#pragma once

// Pairwise synergy: how much more interpretable the sum of two z-scored
// units is than the better of the two alone.

#include "superscope/interpret.hpp"

namespace superscope {

/// Columns shifted to mean 0 and scaled to population sd 1. Constant columns
/// become zeros and are listed in `constant`.
inline RowMatrix zscore_columns(const RowMatrix& acts, std::vector<Index>* constant = nullptr) {
  RowMatrix z = acts.rowwise() - acts.colwise().mean();
  const double d = static_cast<double>(acts.rows());
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    const double sd = std::sqrt(z.col(c).squaredNorm() / d);
    const double scale = std::max(1.0, acts.col(c).cwiseAbs().maxCoeff());
    if (sd > 1e-12 * scale) {
      z.col(c) /= sd;
    } else {
      z.col(c).setZero();
      if (constant) constant->push_back(static_cast<Index>(c));
    }
  }
  return z;
}

struct SynergyRecord {
  Index a = 0;
  Index b = 0;
  double ii_a = 0.0;
  double ii_b = 0.0;
  double ii_sum = 0.0;
  double synergy = 0.0;
  double correlation = 0.0;
};

namespace detail {

inline std::vector<double> summed_columns(const RowMatrix& z, Index a, Index b) {
  std::vector<double> s(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index r = 0; r < z.rows(); ++r) s[r] = z(r, static_cast<Eigen::Index>(a)) + z(r, static_cast<Eigen::Index>(b));
  return s;
}

}  // namespace detail

template <typename Sim>
SynergyRecord pair_synergy(Index a, Index b, const RowMatrix& z, const Sim& sim, Index m = kDefaultM) {
  if (a >= static_cast<Index>(z.cols()) || b >= static_cast<Index>(z.cols()))
    fail(ErrorCode::IndexOutOfRange, "unit index outside activation width");
  SynergyRecord r;
  r.a = a;
  r.b = b;
  r.ii_a = interpretability_index(top_m(column(z, static_cast<Eigen::Index>(a)), m), sim);
  r.ii_b = interpretability_index(top_m(column(z, static_cast<Eigen::Index>(b)), m), sim);
  r.ii_sum = interpretability_index(top_m(detail::summed_columns(z, a, b), m), sim);
  r.synergy = r.ii_sum - std::max(r.ii_a, r.ii_b);
  r.correlation = stats::pearson(Vector(z.col(static_cast<Eigen::Index>(a))), Vector(z.col(static_cast<Eigen::Index>(b))));
  return r;
}

struct SynergyScan {
  std::vector<SynergyRecord> records;  // (a, b) with a < b, lexicographic order
  std::vector<double> ii;              // per unit
  std::vector<double> max_synergy;     // per unit, over its pairings
  stats::CorrelationTest corr_vs_synergy;
  stats::CorrelationTest ii_vs_max_synergy;
  stats::Histogram histogram;
};

/// Every unordered pair of columns of the z-scored matrix. Single-unit IIs
/// are computed once; `sim` should be a memoizing metric for large scans.
template <typename Sim>
SynergyScan synergy_scan(const RowMatrix& z, const Sim& sim, Index m = kDefaultM, std::size_t bins = 20) {
  const auto n = static_cast<Index>(z.cols());
  if (n < 2) fail(ErrorCode::ShapeMismatch, "synergy scan needs at least 2 units");
  SynergyScan s;
  s.ii = ii_per_direction(z, sim, m);

  std::vector<std::pair<Index, Index>> pairs;
  for (Index a = 0; a < n; ++a)
    for (Index b = a + 1; b < n; ++b) pairs.emplace_back(a, b);
  s.records.resize(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t p) {
    auto [a, b] = pairs[p];
    SynergyRecord r;
    r.a = a;
    r.b = b;
    r.ii_a = s.ii[a];
    r.ii_b = s.ii[b];
    r.ii_sum = interpretability_index(top_m(detail::summed_columns(z, a, b), m), sim);
    r.synergy = r.ii_sum - std::max(r.ii_a, r.ii_b);
    r.correlation = stats::pearson(Vector(z.col(static_cast<Eigen::Index>(a))), Vector(z.col(static_cast<Eigen::Index>(b))));
    s.records[p] = r;
  });

  s.max_synergy.assign(n, -std::numeric_limits<double>::infinity());
  std::vector<double> corr, syn;
  for (const auto& r : s.records) {
    s.max_synergy[r.a] = std::max(s.max_synergy[r.a], r.synergy);
    s.max_synergy[r.b] = std::max(s.max_synergy[r.b], r.synergy);
    if (!std::isnan(r.correlation)) {
      corr.push_back(r.correlation);
      syn.push_back(r.synergy);
    }
  }
  s.corr_vs_synergy = stats::spearman(corr, syn);
  s.ii_vs_max_synergy = stats::spearman(s.ii, s.max_synergy);
  std::vector<double> all;
  for (const auto& r : s.records) all.push_back(r.synergy);
  s.histogram = stats::histogram(all, bins);
  return s;
}

}  // namespace superscope
