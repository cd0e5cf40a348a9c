#pragma once

// Disentanglement (MCC, DCI), spectral power law, co-activation and
// cross-system unit matching.

#include "superscope/assignment.hpp"
#include "superscope/data_model.hpp"
#include "superscope/directions.hpp"
#include "superscope/stats.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace superscope {

struct MatchResult {
  std::vector<std::pair<Index, Index>> pairs;  // (column of A, column of B)
  std::vector<double> correlations;            // matched |corr| per pair
  double mcc = 0.0;
};

namespace detail {

/// Columns centered and scaled to unit L2 norm; constant columns become zero.
inline RowMatrix unit_columns(const RowMatrix& x, std::vector<Index>* constant = nullptr) {
  RowMatrix out = x.rowwise() - x.colwise().mean();
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    const double n = out.col(c).norm();
    if (n > 1e-12 * std::max(1.0, x.col(c).cwiseAbs().maxCoeff())) {
      out.col(c) /= n;
    } else {
      out.col(c).setZero();
      if (constant) constant->push_back(static_cast<Index>(c));
    }
  }
  return out;
}

inline MatchResult match_by_score(const Matrix& score) {
  MatchResult r;
  const auto assign = hungarian_max(score);
  for (std::size_t i = 0; i < assign.size(); ++i) {
    if (assign[i] < 0) continue;
    r.pairs.emplace_back(i, static_cast<Index>(assign[i]));
    r.correlations.push_back(score(static_cast<Eigen::Index>(i), assign[i]));
  }
  r.mcc = r.correlations.empty() ? 0.0 : stats::mean(r.correlations);
  return r;
}

}  // namespace detail

/// |Pearson| between every column of `a` and every column of `b`.
inline Matrix abs_correlation_matrix(const RowMatrix& a, const RowMatrix& b) {
  if (a.rows() != b.rows()) fail(ErrorCode::RowMismatch, "inputs must share stimuli rows");
  return (detail::unit_columns(a).transpose() * detail::unit_columns(b)).cwiseAbs().cwiseMin(1.0);
}

/// Mean matched |correlation| after optimal one-to-one matching of columns.
inline MatchResult mcc(const RowMatrix& a, const RowMatrix& b) {
  if (a.rows() != b.rows()) fail(ErrorCode::RowMismatch, "mcc inputs must share stimuli rows");
  if (a.rows() < 3) fail(ErrorCode::TooFewStimuli, "mcc needs at least 3 stimuli");
  return detail::match_by_score(abs_correlation_matrix(a, b));
}

/// Same matching on |cosine| between direction vectors (rows of both inputs),
/// used to score recovered directions against a planted dictionary.
inline MatchResult direction_mcc(const RowMatrix& a, const RowMatrix& b) {
  if (a.cols() != b.cols()) fail(ErrorCode::WidthMismatch, "direction widths differ");
  RowMatrix an = a, bn = b;
  for (Eigen::Index r = 0; r < an.rows(); ++r)
    if (an.row(r).norm() > 0) an.row(r).normalize();
  for (Eigen::Index r = 0; r < bn.rows(); ++r)
    if (bn.row(r).norm() > 0) bn.row(r).normalize();
  return detail::match_by_score((an * bn.transpose()).cwiseAbs().cwiseMin(1.0));
}

// --- DCI ------------------------------------------------------------------------

struct DciResult {
  double disentanglement = 0.0;
  double completeness = 0.0;
  double informativeness = 0.0;
  Matrix importance;  // codes x factors, |lasso coefficient|
  double alpha = 0.0;
};

/// Lasso by cyclic coordinate descent on columns with unit norm and zero mean:
/// minimizes 0.5 ||y - X b||^2 + alpha ||b||_1 (X columns already unit norm).
inline Vector lasso_unit_columns(const RowMatrix& x, const Vector& y, double alpha, int max_sweeps = 10000,
                                 double tol = 1e-13) {
  const auto p = x.cols();
  Vector b = Vector::Zero(p);
  Vector resid = y;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double sq = x.col(j).squaredNorm();
      if (sq == 0.0) continue;
      const double rho = x.col(j).dot(resid) + sq * b(j);
      double nb = 0.0;
      if (rho > alpha)
        nb = (rho - alpha) / sq;
      else if (rho < -alpha)
        nb = (rho + alpha) / sq;
      const double delta = nb - b(j);
      if (delta != 0.0) {
        resid -= delta * x.col(j);
        b(j) = nb;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    if (max_change < tol) break;
  }
  return b;
}

/// Eastwood-Williams DCI with L1-regularized linear regressors. Codes and
/// factors are standardized; `alpha` is the L1 weight relative to unit-norm
/// columns (a coefficient of 1 shrinks to 1 - alpha).
inline DciResult dci(const RowMatrix& codes, const RowMatrix& factors, double alpha = 0.01) {
  if (codes.rows() != factors.rows()) fail(ErrorCode::RowMismatch, "codes and factors must share rows");
  if (codes.rows() < 3) fail(ErrorCode::TooFewStimuli, "dci needs at least 3 samples");
  std::vector<Index> constant_factors;
  const RowMatrix x = detail::unit_columns(codes);
  const RowMatrix y = detail::unit_columns(factors, &constant_factors);
  if (!constant_factors.empty())
    fail(ErrorCode::DegenerateFactor, "factor " + std::to_string(constant_factors.front()) + " is constant");

  const auto c = x.cols(), f = y.cols();
  DciResult r;
  r.alpha = alpha;
  r.importance = Matrix::Zero(c, f);
  double r2_sum = 0.0;
  for (Eigen::Index j = 0; j < f; ++j) {
    const Vector b = lasso_unit_columns(x, y.col(j), alpha);
    r.importance.col(j) = b.cwiseAbs();
    const double r2 = 1.0 - (y.col(j) - x * b).squaredNorm() / y.col(j).squaredNorm();
    r2_sum += std::clamp(r2, 0.0, 1.0);
  }
  r.informativeness = r2_sum / static_cast<double>(f);

  auto one_minus_entropy = [](const Vector& w, Eigen::Index base) {
    const double total = w.sum();
    if (total <= 0.0 || base <= 1) return 1.0;
    double h = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double p = w(i) / total;
      if (p > 0.0) h -= p * std::log(p);
    }
    return 1.0 - h / std::log(static_cast<double>(base));
  };

  const double total = r.importance.sum();
  if (total > 0.0) {
    for (Eigen::Index i = 0; i < c; ++i) {
      const Vector row = r.importance.row(i).transpose();
      r.disentanglement += (row.sum() / total) * one_minus_entropy(row, f);
    }
    for (Eigen::Index j = 0; j < f; ++j) {
      const Vector col = r.importance.col(j);
      r.completeness += (col.sum() / total) * one_minus_entropy(col, c);
    }
  }
  r.disentanglement = std::clamp(r.disentanglement, 0.0, 1.0);
  r.completeness = std::clamp(r.completeness, 0.0, 1.0);
  return r;
}

// --- spectrum -------------------------------------------------------------------

struct SpectrumFit {
  std::vector<double> eigenvalues;  // descending, normalized to sum 1
  Index rank_lo = 0;                // 1-based inclusive
  Index rank_hi = 0;
  double alpha = 0.0;
  double r2 = 0.0;
};

inline std::pair<Index, Index> default_rank_range(Index n_units, Index n_images) {
  return {11, std::min(n_units, n_images) / 2};
}

/// Power-law exponent of the covariance eigenspectrum: alpha = -slope of
/// log(lambda_n) against log(n) over the 1-based inclusive rank range.
/// Passing rank_hi = 0 selects the default range.
inline SpectrumFit spectrum_alpha(const RowMatrix& acts, Index rank_lo = 0, Index rank_hi = 0) {
  const auto n = static_cast<Index>(acts.cols()), d = static_cast<Index>(acts.rows());
  if (rank_hi == 0) std::tie(rank_lo, rank_hi) = default_rank_range(n, d);
  if (rank_lo < 1 || rank_hi > std::min(n, d) || rank_hi < rank_lo + 1)
    fail(ErrorCode::RangeTooNarrow, "rank range [" + std::to_string(rank_lo) + ", " + std::to_string(rank_hi) +
                                        "] needs two ranks within [1, " + std::to_string(std::min(n, d)) + "]");
  const RowMatrix centered = acts.rowwise() - acts.colwise().mean();
  const Matrix cov = centered.transpose() * centered / std::max<double>(1.0, static_cast<double>(d - 1));
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov, Eigen::EigenvaluesOnly);
  std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + n);
  std::reverse(ev.begin(), ev.end());
  for (auto& v : ev) v = std::max(v, 0.0);
  const double total = std::accumulate(ev.begin(), ev.end(), 0.0);
  if (total <= 0.0) fail(ErrorCode::DegenerateFactor, "activations have zero variance");
  for (auto& v : ev) v /= total;

  std::vector<double> lx, ly;
  for (Index r = rank_lo; r <= rank_hi; ++r) {
    const double lam = ev[r - 1];
    if (lam <= 0.0) continue;
    lx.push_back(std::log(static_cast<double>(r)));
    ly.push_back(std::log(lam));
  }
  if (lx.size() < 2) fail(ErrorCode::RangeTooNarrow, "fewer than two positive eigenvalues in range");
  const double mx = stats::mean(lx), my = stats::mean(ly);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  SpectrumFit fit;
  fit.eigenvalues = std::move(ev);
  fit.rank_lo = rank_lo;
  fit.rank_hi = rank_hi;
  fit.alpha = -sxy / sxx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

// --- co-activation --------------------------------------------------------------

struct CoactivationResult {
  std::vector<double> coactivation;  // NaN for constant columns
  std::vector<Index> constant_columns;
  stats::CorrelationTest vs_ii;  // Pearson against the supplied II values
};

/// Pearson correlation of each column with the mean of all other columns.
inline std::vector<double> coactivation(const RowMatrix& acts, std::vector<Index>* constant = nullptr) {
  const auto n = acts.cols();
  if (n < 3) fail(ErrorCode::ShapeMismatch, "co-activation needs at least 3 units");
  const Vector total = acts.rowwise().sum();
  std::vector<double> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector col = acts.col(i);
    const Vector others = (total - col) / static_cast<double>(n - 1);
    out[i] = stats::pearson(col, others);
    if (std::isnan(out[i]) && constant) constant->push_back(static_cast<Index>(i));
  }
  return out;
}

inline CoactivationResult coactivation_vs_ii(const RowMatrix& acts, const std::vector<double>& ii) {
  if (ii.size() != static_cast<std::size_t>(acts.cols())) fail(ErrorCode::LengthMismatch, "one II per unit expected");
  CoactivationResult r;
  r.coactivation = coactivation(acts, &r.constant_columns);
  std::vector<double> x, y;
  for (std::size_t i = 0; i < ii.size(); ++i)
    if (!std::isnan(r.coactivation[i])) {
      x.push_back(r.coactivation[i]);
      y.push_back(ii[i]);
    }
  r.vs_ii = stats::pearson_test(x, y);
  return r;
}

// --- cross-system matching ------------------------------------------------------

struct BestMatch {
  std::vector<double> best;  // per column of A: max over B of |corr|
  std::vector<Index> index;  // argmax column of B
};

inline BestMatch best_match(const RowMatrix& a, const RowMatrix& b) {
  if (a.rows() != b.rows()) fail(ErrorCode::RowMismatch, "best_match inputs must share stimuli rows");
  const Matrix c = abs_correlation_matrix(a, b);
  BestMatch r;
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    Eigen::Index j = 0;
    r.best.push_back(c.row(i).maxCoeff(&j));
    r.index.push_back(static_cast<Index>(j));
  }
  return r;
}

/// Compares how well units and clusters carry over to a second system seeing
/// the same stimuli. Clusters are rebuilt in both systems from A's assignment
/// with the same centroid rule, so the comparison needs no direction-space
/// alignment and a system transferred onto itself matches exactly.
struct TransferResult {
  std::vector<double> unit_best;     // per unit of A
  std::vector<double> cluster_best;  // per cluster of A
  DirectionSet transferred;
};

inline TransferResult transfer_analysis(const DirectionSet& source, const RowMatrix& acts_a, const RowMatrix& acts_b) {
  if (acts_a.rows() != acts_b.rows()) fail(ErrorCode::RowMismatch, "transfer needs the same stimuli in both systems");
  if (source.assignment.size() != static_cast<std::size_t>(acts_a.rows()))
    fail(ErrorCode::LengthMismatch, "source directions carry no per-row assignment");
  TransferResult r;
  r.unit_best = best_match(acts_a, acts_b).best;
  r.transferred = transfer_clusters(source.assignment, acts_b, source.size());
  const DirectionSet own = transfer_clusters(source.assignment, acts_a, source.size());
  r.cluster_best = best_match(project(acts_a, own), project(acts_b, r.transferred)).best;
  return r;
}

}  // namespace superscope
