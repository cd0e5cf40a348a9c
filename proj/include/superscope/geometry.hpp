#pragma once

// Centroid interpolation, input-gradient and noise sensitivity, and the
// t-SNE based sparse-manifold analysis.

#include "superscope/assignment.hpp"
#include "superscope/directions.hpp"
#include "superscope/interpret.hpp"
#include "superscope/oracle.hpp"

#include <random>

namespace superscope {

// --- interpolation -----------------------------------------------------------

/// -0.5, -0.4, ..., 1.5 with each value computed from its integer step.
inline std::vector<double> default_alphas() {
  std::vector<double> a;
  for (int i = -5; i <= 15; ++i) a.push_back(static_cast<double>(i) / 10.0);
  return a;
}

inline std::optional<Vector> unit_vector(const Vector& v, double scale_hint = 1.0) {
  const double n = v.norm();
  if (!(n > 1e-12 * std::max(1.0, scale_hint))) return std::nullopt;
  return Vector(v / n);
}

/// II of the images closest to `point`, i.e. ranked by -||y(x) - point||.
template <typename Sim>
double ii_at_point(const RowMatrix& acts, const Vector& point, const Sim& sim, Index m = kDefaultM) {
  const Vector scores = neg_distance_scores(acts, point);
  return interpretability_index(top_m(std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())), m), sim);
}

inline std::vector<Index> mei_at_point(const RowMatrix& acts, const Vector& point, Index m = kDefaultM) {
  const Vector scores = neg_distance_scores(acts, point);
  return top_m(std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())), m);
}

struct PathPoint {
  double alpha = 0.0;
  Vector v;  // unit norm unless degenerate
  bool degenerate = false;
  double ii = std::numeric_limits<double>::quiet_NaN();
  std::vector<Index> top;
  double grad_mean = std::numeric_limits<double>::quiet_NaN();
  double grad_min = std::numeric_limits<double>::quiet_NaN();
  Index probes_used = 0;
  Index probes_skipped = 0;
};

struct InterpolationPath {
  int a = 0;
  int b = 0;
  Vector mu_a;
  Vector mu_b;
  std::vector<PathPoint> points;
};

/// v(alpha) = alpha mu_a + (1 - alpha) mu_b, renormalized to unit length.
/// A vanishing v is flagged on its point and skipped, never fatal.
template <typename Sim>
InterpolationPath interpolation_profile(const Vector& mu_a, const Vector& mu_b, const std::vector<double>& alphas,
                                        const RowMatrix& acts, const Sim& sim, Index m = kDefaultM) {
  if (mu_a.size() != acts.cols() || mu_b.size() != acts.cols()) fail(ErrorCode::WidthMismatch, "centroid width");
  if ((mu_a - mu_b).norm() == 0.0) fail(ErrorCode::IdenticalEndpoints, "interpolation endpoints coincide");
  InterpolationPath path;
  path.mu_a = mu_a;
  path.mu_b = mu_b;
  path.points.resize(alphas.size());
  const double scale = std::max(mu_a.norm(), mu_b.norm());
  parallel_for(alphas.size(), [&](std::size_t i) {
    PathPoint& p = path.points[i];
    p.alpha = alphas[i];
    const Vector raw = alphas[i] * mu_a + (1.0 - alphas[i]) * mu_b;
    const auto unit = unit_vector(raw, scale);
    if (!unit) {
      p.degenerate = true;
      p.v = raw;
      return;
    }
    p.v = *unit;
    const Vector scores = neg_distance_scores(acts, p.v);
    p.top = top_m(std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())), m);
    p.ii = interpretability_index(p.top, sim);
  });
  return path;
}

/// Pairs of centroids chosen to be maximally far apart: a minimum-cost
/// assignment on -distance with self-matches forbidden; each unordered pair
/// is reported once.
inline std::vector<std::pair<int, int>> maximal_separation_pairs(const RowMatrix& centroids) {
  const auto k = centroids.rows();
  if (k < 2) return {};
  Matrix cost(k, k);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) {
      cost(i, j) = -(centroids.row(i) - centroids.row(j)).norm();
      worst = std::max(worst, -cost(i, j));
    }
  for (Eigen::Index i = 0; i < k; ++i) cost(i, i) = 1.0 + 10.0 * worst * static_cast<double>(k);
  const auto assign = hungarian_min(cost);
  std::vector<std::pair<int, int>> pairs;
  for (Eigen::Index i = 0; i < k; ++i) {
    const int j = assign[i];
    if (j < 0 || j == i) continue;
    const std::pair<int, int> pr{std::min(static_cast<int>(i), j), std::max(static_cast<int>(i), j)};
    if (std::find(pairs.begin(), pairs.end(), pr) == pairs.end()) pairs.push_back(pr);
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

/// II of the union of two MEI sets.
template <typename Sim>
double cross_ii(const std::vector<Index>& top_a, const std::vector<Index>& top_b, const Sim& sim) {
  std::vector<Index> all = top_a;
  for (auto i : top_b)
    if (std::find(all.begin(), all.end(), i) == all.end()) all.push_back(i);
  return interpretability_index(all, sim);
}

// --- gradient sensitivity -------------------------------------------------------

/// Mean and minimum of ||grad_x[-||y(x) - v||]|| over the probes at every
/// non-degenerate point of the path. Probes where y(x) == v are skipped.
inline void gradient_norm_profile(const ModelOracle& oracle, const std::vector<Vector>& probes, InterpolationPath& path) {
  if (probes.empty()) fail(ErrorCode::InsufficientPoints, "no probe images");
  parallel_for(path.points.size(), [&](std::size_t i) {
    PathPoint& p = path.points[i];
    if (p.degenerate) return;
    double sum = 0.0, mn = std::numeric_limits<double>::infinity();
    for (const auto& x : probes) {
      try {
        const double g = distance_gradient(oracle, x, p.v).norm();
        sum += g;
        mn = std::min(mn, g);
        ++p.probes_used;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::AtSingularity) throw;
        ++p.probes_skipped;
      }
    }
    if (p.probes_used) {
      p.grad_mean = sum / static_cast<double>(p.probes_used);
      p.grad_min = mn;
    }
  });
}

/// Same summary from precomputed gradient norms: an image x direction matrix
/// whose columns first_column, first_column + 1, ... hold the path's points
/// in order. Non-finite entries count as skipped probes.
inline void gradient_norms_from_matrix(const RowMatrix& norms, const std::vector<Index>& probes, InterpolationPath& path,
                                       Index first_column = 0) {
  if (probes.empty()) fail(ErrorCode::InsufficientPoints, "no probe images");
  if (first_column + path.points.size() > static_cast<Index>(norms.cols()))
    fail(ErrorCode::ShapeMismatch, "gradient-norm matrix has " + std::to_string(norms.cols()) + " columns, need " +
                                       std::to_string(first_column + path.points.size()));
  for (std::size_t i = 0; i < path.points.size(); ++i) {
    PathPoint& p = path.points[i];
    if (p.degenerate) continue;
    double sum = 0.0, mn = std::numeric_limits<double>::infinity();
    for (auto x : probes) {
      if (x >= static_cast<Index>(norms.rows())) fail(ErrorCode::IndexOutOfRange, "probe image outside gradient matrix");
      const double g = norms(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(first_column + i));
      if (!std::isfinite(g)) {
        ++p.probes_skipped;
        continue;
      }
      sum += g;
      mn = std::min(mn, g);
      ++p.probes_used;
    }
    if (p.probes_used) {
      p.grad_mean = sum / static_cast<double>(p.probes_used);
      p.grad_min = mn;
    }
  }
}

/// Per output unit: mean over images of the largest |f_i(x + eta) - f_i(x)|
/// over draws and noise levels. Each draw uses one standard normal vector z
/// scaled by every sigma, so a larger grid can only raise the maximum.
inline std::vector<double> noise_sensitivity(const ModelOracle& oracle, const std::vector<Vector>& images,
                                             const std::vector<double>& sigmas, Index n_samples, std::uint64_t seed) {
  if (images.empty()) fail(ErrorCode::InsufficientPoints, "no images");
  const auto n = static_cast<Eigen::Index>(oracle.output_dim());
  std::vector<Vector> per_image(images.size(), Vector::Zero(n));
  parallel_for(images.size(), [&](std::size_t m) {
    const Vector clean = oracle.forward(images[m]);
    Vector worst = Vector::Zero(n);
    for (Index s = 0; s < n_samples; ++s) {
      std::mt19937_64 rng(mix_seed(mix_seed(seed, m), s));
      std::normal_distribution<double> normal(0.0, 1.0);
      Vector z(images[m].size());
      for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = normal(rng);
      for (double sigma : sigmas) {
        if (sigma == 0.0) continue;
        worst = worst.cwiseMax((oracle.forward(images[m] + sigma * z) - clean).cwiseAbs());
      }
    }
    per_image[m] = worst;
  });
  Vector total = Vector::Zero(n);
  for (const auto& v : per_image) total += v;
  total /= static_cast<double>(images.size());
  return std::vector<double>(total.data(), total.data() + total.size());
}

// --- t-SNE ---------------------------------------------------------------------

struct TsneConfig {
  double perplexity = 10.0;
  std::uint64_t seed = 0;
  int iterations = 1000;
  double exaggeration = 12.0;
  int exaggeration_iters = 250;
  double learning_rate = 200.0;
  double momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch = 250;

  json to_json() const {
    return json{{"perplexity", perplexity},   {"seed", seed},
                {"iterations", iterations},   {"exaggeration", exaggeration},
                {"exaggeration_iters", exaggeration_iters}, {"learning_rate", learning_rate},
                {"momentum", momentum},       {"final_momentum", final_momentum},
                {"momentum_switch", momentum_switch}};
  }
};

struct TsneResult {
  RowMatrix y;                          // n x 2
  std::vector<double> perplexity;       // achieved per point
  std::vector<double> kl;               // per iteration, on the unexaggerated P
  Index backtracked_steps = 0;
};

inline void validate_distance_matrix(const RowMatrix& d) {
  if (d.rows() != d.cols() || d.rows() < 1) fail(ErrorCode::BadDistanceMatrix, "distance matrix must be square");
  if (!d.allFinite()) fail(ErrorCode::BadDistanceMatrix, "non-finite distances");
  const double scale = std::max(1.0, d.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    if (d(i, i) != 0.0) fail(ErrorCode::BadDistanceMatrix, "non-zero diagonal at " + std::to_string(i));
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
      if (d(i, j) < 0.0) fail(ErrorCode::BadDistanceMatrix, "negative distance");
      if (std::abs(d(i, j) - d(j, i)) > 1e-9 * scale) fail(ErrorCode::BadDistanceMatrix, "asymmetric distances");
    }
  }
}

/// Conditional affinities p_{j|i} = exp(-beta_i d_ij^2) / Z_i with beta_i found
/// by bisection so that exp(H(P_i)) equals the target perplexity.
inline RowMatrix conditional_affinities(const RowMatrix& dist, double perplexity, std::vector<double>* achieved = nullptr) {
  const auto n = dist.rows();
  const double target = std::log(perplexity);
  RowMatrix p = RowMatrix::Zero(n, n);
  if (achieved) achieved->assign(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    double dmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) dmin = std::min(dmin, dist(i, j) * dist(i, j));
    Vector row(n);
    double entropy = 0.0;
    for (int it = 0; it < 500; ++it) {
      double z = 0.0, wsum = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) {
          row(j) = 0.0;
          continue;
        }
        const double d2 = dist(i, j) * dist(i, j) - dmin;  // shift for stability
        row(j) = std::exp(-beta * d2);
        z += row(j);
        wsum += d2 * row(j);
      }
      entropy = std::log(z) + beta * wsum / z;
      row /= z;
      const double diff = entropy - target;
      if (std::abs(diff) < 1e-10) break;
      if (diff > 0.0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
    }
    p.row(i) = row.transpose();
    if (achieved) (*achieved)[i] = std::exp(entropy);
  }
  return p;
}

namespace detail {

/// KL(P || Q) for exaggeration 1; otherwise the objective whose gradient is the
/// exaggerated one, sum p (log p - e log num) + log Z.
inline double tsne_kl(const RowMatrix& p, const RowMatrix& y, double exaggeration = 1.0) {
  const auto n = y.rows();
  double z = 0.0;
  RowMatrix num(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      num(i, j) = i == j ? 0.0 : 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
      z += num(i, j);
    }
  double kl = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j || p(i, j) <= 0.0) continue;
      kl += p(i, j) * (std::log(p(i, j)) - exaggeration * std::log(std::max(num(i, j), 1e-300)));
    }
  return kl + std::log(z);
}

inline RowMatrix tsne_gradient(const RowMatrix& p, const RowMatrix& y, double exaggeration) {
  const auto n = y.rows();
  RowMatrix num(n, n);
  double z = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      num(i, j) = i == j ? 0.0 : 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
      z += num(i, j);
    }
  RowMatrix grad = RowMatrix::Zero(n, 2);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double w = (exaggeration * p(i, j) - num(i, j) / z) * num(i, j);
      grad.row(i) += 4.0 * w * (y.row(i) - y.row(j));
    }
  return grad;
}

}  // namespace detail

/// Exact t-SNE on a precomputed distance matrix. After the exaggeration phase
/// a step that would raise the KL divergence by more than 1e-6 is retried with
/// a halved plain gradient step (momentum reset), so the KL never climbs.
inline TsneResult tsne_embed(const RowMatrix& dist, const TsneConfig& cfg) {
  validate_distance_matrix(dist);
  const auto n = dist.rows();
  if (!(cfg.perplexity > 0.0) || cfg.perplexity >= static_cast<double>(n - 1))
    fail(ErrorCode::InsufficientPoints,
         "perplexity " + std::to_string(cfg.perplexity) + " needs more than " + std::to_string(n) + " points");
  TsneResult r;
  const RowMatrix cond = conditional_affinities(dist, cfg.perplexity, &r.perplexity);
  RowMatrix p = (cond + cond.transpose()) / (2.0 * static_cast<double>(n));
  p = p.cwiseMax(1e-12);
  for (Eigen::Index i = 0; i < n; ++i) p(i, i) = 0.0;
  p /= p.sum();

  std::mt19937_64 rng(mix_seed(cfg.seed, 0x75E));
  std::normal_distribution<double> normal(0.0, 1e-2);
  RowMatrix y(n, 2);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = normal(rng);
  RowMatrix velocity = RowMatrix::Zero(n, 2);
  RowMatrix gains = RowMatrix::Ones(n, 2);

  double kl = detail::tsne_kl(p, y, cfg.exaggeration_iters > 0 ? cfg.exaggeration : 1.0);
  for (int it = 0; it < cfg.iterations; ++it) {
    const bool exaggerating = it < cfg.exaggeration_iters;
    const double ex = exaggerating ? cfg.exaggeration : 1.0;
    if (it == cfg.exaggeration_iters && it > 0) kl = detail::tsne_kl(p, y);
    const double mom = it < cfg.momentum_switch ? cfg.momentum : cfg.final_momentum;
    const RowMatrix grad = detail::tsne_gradient(p, y, ex);
    for (Eigen::Index k = 0; k < gains.size(); ++k) {
      const bool same_sign = (grad.data()[k] > 0.0) == (velocity.data()[k] > 0.0);
      gains.data()[k] = std::max(0.01, same_sign ? gains.data()[k] * 0.8 : gains.data()[k] + 0.2);
    }
    RowMatrix next_velocity = mom * velocity - cfg.learning_rate * gains.cwiseProduct(grad);
    RowMatrix candidate = y + next_velocity;
    candidate.rowwise() -= candidate.colwise().mean();
    double next_kl = detail::tsne_kl(p, candidate, ex);
    // momentum steps that raise the objective fall back to halving plain gradient steps
    if (next_kl > kl + 1e-6) {
      ++r.backtracked_steps;
      next_velocity.setZero();
      gains.setOnes();
      candidate = y;
      next_kl = kl;
      double step = cfg.learning_rate;
      for (int half = 0; half < 40; ++half) {
        step *= 0.5;
        RowMatrix trial = y - step * grad;
        trial.rowwise() -= trial.colwise().mean();
        const double trial_kl = detail::tsne_kl(p, trial, ex);
        if (trial_kl <= kl) {
          candidate = trial;
          next_kl = trial_kl;
          next_velocity = -step * grad;
          break;
        }
      }
    }
    y = candidate;
    velocity = next_velocity;
    kl = next_kl;
    r.kl.push_back(exaggerating ? detail::tsne_kl(p, y) : kl);
  }
  r.y = y;
  return r;
}

// --- manifold sparsity ----------------------------------------------------------------

struct ManifoldSparsity {
  std::vector<double> sparsity;  // per direction: mean pairwise distance of its top_p union points
  std::vector<double> entropy;   // per direction: entropy of its normalized activations over the union
  std::vector<std::vector<Index>> top;  // positions within the union
};

/// `scores` are D x K activations (ExpNegZDist); `union_idx` are the image
/// indices covered by `dist` (same order).
inline ManifoldSparsity manifold_sparsity(const RowMatrix& scores, const std::vector<Index>& union_idx,
                                          const RowMatrix& dist, Index top_p = 5) {
  if (dist.rows() != static_cast<Eigen::Index>(union_idx.size()) || dist.cols() != dist.rows())
    fail(ErrorCode::BadDistanceMatrix, "distance matrix must cover the union set");
  if (top_p < 2 || union_idx.size() < top_p)
    fail(ErrorCode::InsufficientPoints, "need at least top_p >= 2 points in the union");
  ManifoldSparsity out;
  const auto k = scores.cols();
  out.sparsity.resize(static_cast<std::size_t>(k));
  out.entropy.resize(static_cast<std::size_t>(k));
  out.top.resize(static_cast<std::size_t>(k));
  for (Eigen::Index c = 0; c < k; ++c) {
    std::vector<double> a(union_idx.size());
    for (std::size_t u = 0; u < union_idx.size(); ++u) a[u] = scores(static_cast<Eigen::Index>(union_idx[u]), c);
    const auto top = top_m(a, top_p);
    double sum = 0.0;
    int pairs = 0;
    for (std::size_t x = 0; x < top.size(); ++x)
      for (std::size_t y = x + 1; y < top.size(); ++y) {
        sum += dist(static_cast<Eigen::Index>(top[x]), static_cast<Eigen::Index>(top[y]));
        ++pairs;
      }
    out.sparsity[c] = sum / pairs;
    out.top[c] = top;
    double total = 0.0;
    for (double v : a) total += std::max(v, 0.0);
    double h = 0.0;
    if (total > 0.0)
      for (double v : a) {
        const double q = std::max(v, 0.0) / total;
        if (q > 0.0) h -= q * std::log(q);
      }
    out.entropy[c] = h;
  }
  return out;
}

/// Sorted, de-duplicated union of the top-M images of every column.
inline std::vector<Index> mei_union(const std::vector<RowMatrix>& score_sets, Index m = kDefaultM) {
  std::vector<Index> all;
  for (const auto& s : score_sets)
    for (Eigen::Index c = 0; c < s.cols(); ++c) {
      const auto t = top_m(column(s, c), m);
      all.insert(all.end(), t.begin(), t.end());
    }
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  return all;
}

/// Pairwise distances (negated similarity) among the given images.
template <typename Sim>
RowMatrix distance_matrix(const std::vector<Index>& idx, const Sim& sim) {
  RowMatrix d = -sim_matrix(idx, sim);
  d.diagonal().setZero();
  return d.cwiseMax(0.0);
}

}  // namespace superscope

namespace superscope {

// --- composite analyses ----------------------------------------------------------

struct SensitivityScan {
  std::vector<std::pair<int, int>> pairs;
  std::vector<InterpolationPath> paths;
  std::vector<double> cross_ii;  // II over the union of both endpoint MEI sets
  std::vector<std::vector<Index>> probes;  // image indices used as gradient probes, per path
};

/// Interpolation profiles between Hungarian-matched, maximally separated
/// centroids, with gradient norms at the top-M images of both endpoints.
template <typename Sim>
SensitivityScan sensitivity_scan(const DirectionSet& clusters, const RowMatrix& acts, const Sim& sim,
                                 const ModelOracle* oracle, const ImageSet* images, const std::vector<double>& alphas,
                                 Index m = kDefaultM) {
  if (!clusters.centroids) fail(ErrorCode::UnavailableCentroids, "sensitivity needs cluster centroids");
  SensitivityScan out;
  out.pairs = maximal_separation_pairs(*clusters.centroids);
  for (auto [a, b] : out.pairs) {
    const Vector mu_a = clusters.centroids->row(a).transpose(), mu_b = clusters.centroids->row(b).transpose();
    InterpolationPath path = interpolation_profile(mu_a, mu_b, alphas, acts, sim, m);
    path.a = a;
    path.b = b;
    std::vector<Index> top_a, top_b;
    if (const auto u = unit_vector(mu_a)) top_a = mei_at_point(acts, *u, m);
    if (const auto u = unit_vector(mu_b)) top_b = mei_at_point(acts, *u, m);
    out.cross_ii.push_back(cross_ii(top_a, top_b, sim));
    std::vector<Index> probe_idx = top_a;
    for (auto i : top_b)
      if (std::find(probe_idx.begin(), probe_idx.end(), i) == probe_idx.end()) probe_idx.push_back(i);
    if (oracle && images) {
      if (oracle->output_dim() != static_cast<Index>(acts.cols()))
        fail(ErrorCode::WidthMismatch, "oracle output width differs from activations");
      std::vector<Vector> probes;
      for (auto i : probe_idx) probes.push_back(image_vector(*images, i));
      gradient_norm_profile(*oracle, probes, path);
    }
    out.probes.push_back(probe_idx);
    out.paths.push_back(std::move(path));
  }
  return out;
}

template <typename Sim>
SensitivityScan sensitivity_scan(const DirectionSet& clusters, const RowMatrix& acts, const Sim& sim,
                                 const ModelOracle& oracle, const ImageSet& images, const std::vector<double>& alphas,
                                 Index m = kDefaultM) {
  return sensitivity_scan(clusters, acts, sim, &oracle, &images, alphas, m);
}

/// Evenly spaced image indices, at most `count` of them.
inline std::vector<Index> spaced_indices(Index total, Index count) {
  std::vector<Index> idx;
  count = std::min(count, total);
  for (Index k = 0; k < count; ++k) idx.push_back(k * total / count);
  return idx;
}

/// noise_sensitivity over an evenly spaced subset of a bundle's images.
inline std::vector<double> noise_sensitivity_for_bundle(const ModelOracle& oracle, const ImageSet& images,
                                                        const std::vector<double>& sigmas, Index n_samples, Index n_images,
                                                        std::uint64_t seed) {
  std::vector<Vector> xs;
  for (auto i : spaced_indices(images.count, n_images)) xs.push_back(image_vector(images, i));
  return noise_sensitivity(oracle, xs, sigmas, n_samples, seed);
}

struct ManifoldConfig {
  TsneConfig tsne;
  double tau = 2.0;
  Index top_p = 5;
  Index m = kDefaultM;

  json to_json() const {
    json j = tsne.to_json();
    j["tau"] = tau;
    j["top_p"] = top_p;
    j["m"] = m;
    return j;
  }
};

struct ManifoldResult {
  std::vector<Index> union_idx;
  RowMatrix dist;
  TsneResult tsne;
  ManifoldSparsity neurons;
  ManifoldSparsity features;
  std::vector<double> neuron_ii;
  std::vector<double> feature_ii;
  stats::CorrelationTest neuron_corr;   // Pearson(sparsity, II)
  stats::CorrelationTest feature_corr;
};

/// Top-M images of every neuron and cluster feature (raw activations and Dot
/// projections), their pairwise metric distances embedded with t-SNE, and how
/// tightly each unit's strongest points in that set sit together when units
/// are scored by the z-scored exponential distance activation (one-hot points
/// for neurons, centroids for features). II is the ordinary per-unit II.
template <typename Sim>
ManifoldResult manifold_analysis(const RowMatrix& acts, const DirectionSet& clusters, const Sim& sim,
                                 const ManifoldConfig& cfg) {
  ManifoldResult r;
  const RowMatrix feature_scores = project(acts, clusters);
  r.union_idx = mei_union({acts, feature_scores}, cfg.m);
  r.dist = distance_matrix(r.union_idx, sim);
  r.tsne = tsne_embed(r.dist, cfg.tsne);
  const ProjectionMode mode{ProjectionKind::ExpNegZDist, cfg.tau};
  const auto neurons = neuron_basis(static_cast<Index>(acts.cols()));
  r.neurons = manifold_sparsity(project(acts, neurons, mode), r.union_idx, r.dist, cfg.top_p);
  r.features = manifold_sparsity(project(acts, clusters, mode), r.union_idx, r.dist, cfg.top_p);
  r.neuron_ii = ii_per_direction(acts, sim, cfg.m);
  r.feature_ii = ii_per_direction(feature_scores, sim, cfg.m);
  r.neuron_corr = stats::pearson_test(r.neurons.sparsity, r.neuron_ii);
  r.feature_corr = stats::pearson_test(r.features.sparsity, r.feature_ii);
  return r;
}

}  // namespace superscope
