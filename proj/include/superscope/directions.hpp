#pragma once

#include "superscope/data_model.hpp"
#include "superscope/npy.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

namespace superscope {

enum class Method { Neurons, PCA, ICA, NMF, KMeans, SparseAE };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::Neurons: return "neurons";
    case Method::PCA: return "pca";
    case Method::ICA: return "ica";
    case Method::NMF: return "nmf";
    case Method::KMeans: return "kmeans";
    case Method::SparseAE: return "sae";
  }
  return "?";
}

inline Method method_from_string(const std::string& s) {
  for (Method m : {Method::Neurons, Method::PCA, Method::ICA, Method::NMF, Method::KMeans, Method::SparseAE})
    if (s == to_string(m)) return m;
  fail(ErrorCode::ConfigInvalid, "unknown direction method '" + s + "'");
}

/// K unit-norm directions in an N-dimensional activation space.
struct DirectionSet {
  RowMatrix dirs;  // K x N, unit rows
  Method method = Method::Neurons;
  json params = json::object();
  std::uint64_t seed = 0;
  std::optional<Vector> offset;        // subtracted before Dot projection (PCA/ICA)
  std::optional<RowMatrix> centroids;  // unnormalized cluster means (KMeans, transfer)
  std::vector<int> assignment;         // cluster id per image, -1 when excluded

  Index size() const { return static_cast<Index>(dirs.rows()); }
  Index width() const { return static_cast<Index>(dirs.cols()); }

  void validate(double tol = 1e-9) const {
    if (dirs.rows() < 1) fail(ErrorCode::ShapeMismatch, "direction set is empty");
    for (Eigen::Index k = 0; k < dirs.rows(); ++k)
      if (std::abs(dirs.row(k).norm() - 1.0) > tol)
        fail(ErrorCode::DegenerateDirection, "direction " + std::to_string(k) + " is not unit norm");
    if (offset && offset->size() != dirs.cols()) fail(ErrorCode::WidthMismatch, "offset width");
    if (centroids && (centroids->rows() != dirs.rows() || centroids->cols() != dirs.cols()))
      fail(ErrorCode::WidthMismatch, "centroid shape");
  }
};

namespace detail {

/// Normalizes each row; rows with zero norm are left untouched and reported.
inline std::vector<Index> normalize_rows(RowMatrix& m) {
  std::vector<Index> zero;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double n = m.row(r).norm();
    if (n > 0.0) {
      m.row(r) /= n;
    } else {
      zero.push_back(static_cast<Index>(r));
    }
  }
  return zero;
}

/// Flips each direction so that its most extreme projection is positive.
inline void fix_signs(RowMatrix& dirs, const RowMatrix& acts, const std::optional<Vector>& offset) {
  RowMatrix centered = acts;
  if (offset) centered.rowwise() -= offset->transpose();
  const Matrix proj = centered * dirs.transpose();
  for (Eigen::Index k = 0; k < dirs.rows(); ++k)
    if (-proj.col(k).minCoeff() > proj.col(k).maxCoeff()) dirs.row(k) *= -1.0;
}

inline Vector column_mean(const RowMatrix& x) { return x.colwise().mean().transpose(); }

/// Eigen-decomposition of the sample covariance, sorted by decreasing eigenvalue.
inline std::pair<Vector, Matrix> sorted_covariance_eigen(const RowMatrix& centered) {
  const double denom = std::max<double>(1.0, static_cast<double>(centered.rows() - 1));
  const Matrix cov = (centered.transpose() * centered) / denom;
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  const auto n = cov.rows();
  Vector vals(n);
  Matrix vecs(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    vals(i) = es.eigenvalues()(n - 1 - i);
    vecs.col(i) = es.eigenvectors().col(n - 1 - i);
  }
  return {vals, vecs};
}

}  // namespace detail

inline DirectionSet neuron_basis(Index n) {
  if (n < 1) fail(ErrorCode::ShapeMismatch, "neuron_basis needs N >= 1");
  DirectionSet s;
  s.method = Method::Neurons;
  s.dirs = RowMatrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  return s;
}

// --- spherical k-means -------------------------------------------------------

struct KMeansOptions {
  Index k = 8;
  std::uint64_t seed = 0;
  int max_iter = 300;
  double tol = 1e-10;  // relative objective decrease that counts as converged
};

/// K-Means under cosine distance. Rows with zero norm are excluded from the
/// fit (assignment -1). The objective sum(1 - cos) is recorded after every
/// assignment step in params["objective"] and never increases.
inline DirectionSet spherical_kmeans(const RowMatrix& acts, const KMeansOptions& opt) {
  const Eigen::Index d = acts.rows(), n = acts.cols();
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < d; ++i)
    if (acts.row(i).norm() > 0.0) rows.push_back(i);
  if (rows.empty()) fail(ErrorCode::AllZeroRows, "every activation row has zero norm");
  if (opt.k < 1 || opt.k > rows.size())
    fail(ErrorCode::KTooLarge, "k=" + std::to_string(opt.k) + " exceeds " + std::to_string(rows.size()) + " usable rows");
  const auto m = static_cast<Eigen::Index>(rows.size());
  const auto k = static_cast<Eigen::Index>(opt.k);

  RowMatrix x(m, n);
  for (Eigen::Index r = 0; r < m; ++r) x.row(r) = acts.row(rows[r]) / acts.row(rows[r]).norm();

  std::mt19937_64 rng(mix_seed(opt.seed, 0x6B6D));
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // k-means++ seeding with probability proportional to cosine distance
  RowMatrix c(k, n);
  std::vector<char> chosen(m, 0);
  Eigen::Index first = static_cast<Eigen::Index>(unif(rng) * static_cast<double>(m));
  first = std::min(first, m - 1);
  c.row(0) = x.row(first);
  chosen[first] = 1;
  Vector best_dist = (1.0 - (x * c.row(0).transpose()).array()).max(0.0).matrix();
  for (Eigen::Index j = 1; j < k; ++j) {
    const double total = best_dist.sum();
    Eigen::Index pick = -1;
    if (total > 0.0) {
      double target = unif(rng) * total;
      for (Eigen::Index i = 0; i < m; ++i) {
        target -= best_dist(i);
        if (target <= 0.0 && best_dist(i) > 0.0) {
          pick = i;
          break;
        }
      }
      if (pick < 0)
        for (Eigen::Index i = m - 1; i >= 0; --i)
          if (best_dist(i) > 0.0) {
            pick = i;
            break;
          }
    } else {
      std::vector<Eigen::Index> free;
      for (Eigen::Index i = 0; i < m; ++i)
        if (!chosen[i]) free.push_back(i);
      pick = free[std::min<std::size_t>(free.size() - 1, static_cast<std::size_t>(unif(rng) * free.size()))];
    }
    chosen[pick] = 1;
    c.row(j) = x.row(pick);
    best_dist = best_dist.cwiseMin((1.0 - (x * c.row(j).transpose()).array()).max(0.0).matrix());
  }

  std::vector<Eigen::Index> assign(m, 0);
  std::vector<double> objective;
  Vector fit(m);
  int iter = 0;
  bool converged = false;
  for (; iter < opt.max_iter; ++iter) {
    const Matrix cos = x * c.transpose();
    double obj = 0.0;
    bool changed = iter == 0;
    for (Eigen::Index i = 0; i < m; ++i) {
      Eigen::Index best = 0;
      for (Eigen::Index j = 1; j < k; ++j)
        if (cos(i, j) > cos(i, best)) best = j;
      if (assign[i] != best) changed = true;
      assign[i] = best;
      fit(i) = cos(i, best);
      obj += 1.0 - fit(i);
    }
    objective.push_back(obj);

    // empty clusters take the currently worst-fit point
    std::vector<Eigen::Index> counts(k, 0);
    for (auto a : assign) counts[a] += 1;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (counts[j] > 0) continue;
      Eigen::Index worst = -1;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (counts[assign[i]] <= 1) continue;
        if (worst < 0 || fit(i) < fit(worst)) worst = i;
      }
      if (worst < 0) break;
      counts[assign[worst]] -= 1;
      assign[worst] = j;
      counts[j] = 1;
      fit(worst) = 1.0;
      changed = true;
    }

    c.setZero();
    for (Eigen::Index i = 0; i < m; ++i) c.row(assign[i]) += x.row(i);
    for (Eigen::Index j = 0; j < k; ++j) {
      const double nrm = c.row(j).norm();
      if (nrm > 0.0) {
        c.row(j) /= nrm;
      } else {
        for (Eigen::Index i = 0; i < m; ++i)
          if (assign[i] == j) {
            c.row(j) = x.row(i);
            break;
          }
      }
    }

    if (!changed) {
      converged = true;
      break;
    }
    if (objective.size() >= 2) {
      const double prev = objective[objective.size() - 2];
      if (prev - obj <= opt.tol * std::max(1.0, obj)) {
        converged = true;
        break;
      }
    }
  }

  DirectionSet s;
  s.method = Method::KMeans;
  s.seed = opt.seed;
  s.dirs = c;
  s.assignment.assign(static_cast<std::size_t>(d), -1);
  for (Eigen::Index r = 0; r < m; ++r) s.assignment[rows[r]] = static_cast<int>(assign[r]);

  RowMatrix centroids = RowMatrix::Zero(k, n);
  std::vector<double> counts(k, 0.0);
  for (Eigen::Index r = 0; r < m; ++r) {
    centroids.row(assign[r]) += acts.row(rows[r]);
    counts[assign[r]] += 1.0;
  }
  for (Eigen::Index j = 0; j < k; ++j)
    if (counts[j] > 0) centroids.row(j) /= counts[j];
  s.centroids = centroids;
  s.params = json{{"k", opt.k},
                  {"max_iter", opt.max_iter},
                  {"tol", opt.tol},
                  {"iterations", iter + (converged ? 1 : 0)},
                  {"converged", converged},
                  {"objective", objective},
                  {"excluded_zero_rows", d - m}};
  return s;
}

// --- PCA / ICA / NMF -----------------------------------------------------------

inline DirectionSet pca(const RowMatrix& acts, Index k) {
  const auto n = static_cast<Index>(acts.cols()), d = static_cast<Index>(acts.rows());
  if (k < 1 || k > std::min(n, d)) fail(ErrorCode::KTooLarge, "pca k=" + std::to_string(k));
  const Vector mu = detail::column_mean(acts);
  RowMatrix centered = acts.rowwise() - mu.transpose();
  auto [vals, vecs] = detail::sorted_covariance_eigen(centered);
  DirectionSet s;
  s.method = Method::PCA;
  s.offset = mu;
  s.dirs = vecs.leftCols(static_cast<Eigen::Index>(k)).transpose();
  detail::fix_signs(s.dirs, acts, s.offset);
  std::vector<double> ev(vals.data(), vals.data() + k);
  for (auto& v : ev) v = std::max(v, 0.0);
  s.params = json{{"k", k}, {"explained_variance", ev}};
  return s;
}

struct IcaOptions {
  Index k = 8;
  std::uint64_t seed = 0;
  int max_iter = 1000;
  double tol = 1e-6;
};

/// FastICA (logcosh contrast, symmetric decorrelation) on PCA-whitened data.
/// Directions are the unit-normalized mixing columns, i.e. the directions in
/// activation space along which each independent source varies.
inline DirectionSet ica(const RowMatrix& acts, const IcaOptions& opt) {
  const auto n = static_cast<Index>(acts.cols()), d = static_cast<Index>(acts.rows());
  if (opt.k < 1 || opt.k > std::min(n, d)) fail(ErrorCode::KTooLarge, "ica k=" + std::to_string(opt.k));
  const auto k = static_cast<Eigen::Index>(opt.k);
  const Vector mu = detail::column_mean(acts);
  const RowMatrix centered = acts.rowwise() - mu.transpose();
  auto [vals, vecs] = detail::sorted_covariance_eigen(centered);
  const double floor = std::max(vals(0), 1.0) * 1e-12;
  Vector lam = vals.head(k).cwiseMax(floor);
  const Matrix e = vecs.leftCols(k);
  const Matrix whiten = lam.cwiseSqrt().cwiseInverse().asDiagonal() * e.transpose();  // k x N
  const Matrix z = whiten * centered.transpose();                                     // k x D

  auto sym_decorrelate = [](const Matrix& w) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(w * w.transpose());
    const Vector inv_sqrt = es.eigenvalues().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
    return Matrix(es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose() * w);
  };

  std::mt19937_64 rng(mix_seed(opt.seed, 0x1CA));
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix w(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) w(i, j) = normal(rng);
  w = sym_decorrelate(w);

  const double inv_d = 1.0 / static_cast<double>(d);
  int iter = 0;
  double lim = std::numeric_limits<double>::infinity();
  for (; iter < opt.max_iter; ++iter) {
    const Matrix wx = w * z;
    const Matrix g = wx.array().tanh().matrix();
    const Vector g_prime_mean = (1.0 - g.array().square()).rowwise().mean().matrix();
    Matrix w_new = g * z.transpose() * inv_d - g_prime_mean.asDiagonal() * w;
    w_new = sym_decorrelate(w_new);
    lim = ((w_new * w.transpose()).diagonal().cwiseAbs().array() - 1.0).abs().maxCoeff();
    w = w_new;
    if (lim < opt.tol) break;
  }
  if (iter >= opt.max_iter)
    fail(ErrorCode::ConvergenceFailure, "FastICA did not converge in " + std::to_string(opt.max_iter) + " iterations");

  // mixing matrix A = E diag(sqrt(lambda)) W^T, columns are source directions
  const Matrix mixing = e * lam.cwiseSqrt().asDiagonal() * w.transpose();  // N x k
  DirectionSet s;
  s.method = Method::ICA;
  s.seed = opt.seed;
  s.offset = mu;
  s.dirs = mixing.transpose();
  detail::normalize_rows(s.dirs);
  detail::fix_signs(s.dirs, acts, s.offset);
  s.params = json{{"k", opt.k}, {"contrast", "logcosh"}, {"iterations", iter + 1}, {"tol", opt.tol}};
  return s;
}

struct NmfOptions {
  Index k = 8;
  std::uint64_t seed = 0;
  int max_iter = 500;
};

/// Lee-Seung multiplicative updates for X ~ H W (Frobenius loss). Rows of W,
/// normalized, are the directions; their scale is folded into H.
inline DirectionSet nmf(const RowMatrix& acts, const NmfOptions& opt) {
  const auto n = static_cast<Index>(acts.cols()), d = static_cast<Index>(acts.rows());
  if (opt.k < 1 || opt.k > std::min(n, d)) fail(ErrorCode::KTooLarge, "nmf k=" + std::to_string(opt.k));
  const auto k = static_cast<Eigen::Index>(opt.k);
  Matrix x = acts;
  const auto negatives = static_cast<std::int64_t>((x.array() < 0.0).count());
  x = x.cwiseMax(0.0);

  std::mt19937_64 rng(mix_seed(opt.seed, 0x4E4D));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double scale = std::sqrt(std::max(x.mean(), 1e-12) / static_cast<double>(k));
  Matrix h(x.rows(), k), w(k, x.cols());
  for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = scale * unif(rng);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = scale * unif(rng);

  constexpr double eps = 1e-12;
  for (int it = 0; it < opt.max_iter; ++it) {
    const Matrix htx = h.transpose() * x;
    const Matrix hthw = (h.transpose() * h) * w;
    w = w.cwiseProduct(htx.cwiseQuotient(hthw.array().max(eps).matrix()));
    const Matrix xwt = x * w.transpose();
    const Matrix hwwt = h * (w * w.transpose());
    h = h.cwiseProduct(xwt.cwiseQuotient(hwwt.array().max(eps).matrix()));
  }
  const double err = (x - h * w).norm() / std::max(x.norm(), eps);

  DirectionSet s;
  s.method = Method::NMF;
  s.seed = opt.seed;
  s.dirs = w;
  const auto dead = detail::normalize_rows(s.dirs);
  for (auto r : dead) s.dirs.row(static_cast<Eigen::Index>(r)).setConstant(1.0 / std::sqrt(static_cast<double>(n)));
  s.params = json{{"k", opt.k},
                  {"max_iter", opt.max_iter},
                  {"relative_error", err},
                  {"clamped_negatives", negatives},
                  {"dead_components", dead}};
  return s;
}

// --- sparse autoencoder -----------------------------------------------------

struct SparseAEConfig {
  Index hidden = 32;
  double l1_weight = 1e-3;
  int epochs = 200;
  double learning_rate = 1e-3;
  Index batch_size = 256;
  std::uint64_t seed = 0;
  bool identity_init = false;  // requires hidden == input width
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

  void validate() const {
    if (hidden < 1 || l1_weight < 0.0 || epochs < 1 || batch_size < 1 || !(learning_rate > 0.0))
      fail(ErrorCode::ConfigInvalid, "invalid sparse autoencoder config");
  }
};

/// Single hidden layer: h = relu(We x + be), x_hat = Wd h + bd (untied).
struct SparseAutoencoder {
  Matrix enc_w;  // Z x N
  Vector enc_b;  // Z
  Matrix dec_w;  // N x Z
  Vector dec_b;  // N

  RowMatrix encode(const RowMatrix& x) const {
    RowMatrix pre = x * enc_w.transpose();
    pre.rowwise() += enc_b.transpose();
    return pre.cwiseMax(0.0);
  }

  RowMatrix decode(const RowMatrix& h) const {
    RowMatrix out = h * dec_w.transpose();
    out.rowwise() += dec_b.transpose();
    return out;
  }

  /// Mean over rows of ||x - x_hat||^2.
  double reconstruction_error(const RowMatrix& x) const {
    return (decode(encode(x)) - x).rowwise().squaredNorm().mean();
  }
};

struct SparseAEResult {
  DirectionSet directions;
  SparseAutoencoder model;
  std::vector<double> loss_history;  // mean objective per epoch
};

inline SparseAEResult sparse_autoencoder(const RowMatrix& acts, const SparseAEConfig& cfg) {
  cfg.validate();
  const auto n = acts.cols(), z = static_cast<Eigen::Index>(cfg.hidden), d = acts.rows();
  if (cfg.identity_init && z != n) fail(ErrorCode::ConfigInvalid, "identity init needs hidden == input width");

  std::mt19937_64 rng(mix_seed(cfg.seed, 0x5AE));
  SparseAutoencoder ae;
  if (cfg.identity_init) {
    ae.enc_w = Matrix::Identity(z, n);
    ae.dec_w = Matrix::Identity(n, z);
  } else {
    const double a = std::sqrt(6.0 / static_cast<double>(n + z));
    std::uniform_real_distribution<double> unif(-a, a);
    ae.enc_w.resize(z, n);
    ae.dec_w.resize(n, z);
    for (Eigen::Index i = 0; i < ae.enc_w.size(); ++i) ae.enc_w.data()[i] = unif(rng);
    for (Eigen::Index i = 0; i < ae.dec_w.size(); ++i) ae.dec_w.data()[i] = unif(rng);
  }
  ae.enc_b = Vector::Zero(z);
  ae.dec_b = Vector::Zero(n);

  // Adam state
  Matrix m_ew = Matrix::Zero(z, n), v_ew = Matrix::Zero(z, n);
  Matrix m_dw = Matrix::Zero(n, z), v_dw = Matrix::Zero(n, z);
  Vector m_eb = Vector::Zero(z), v_eb = Vector::Zero(z), m_db = Vector::Zero(n), v_db = Vector::Zero(n);
  long step = 0;
  auto adam = [&](auto& param, auto& m, auto& v, const auto& grad, double c1, double c2) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
    param.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.adam_eps);
  };

  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::vector<double> history;
  const auto batch = static_cast<Eigen::Index>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (Eigen::Index start = 0; start < d; start += batch) {
      const Eigen::Index b = std::min(batch, d - start);
      RowMatrix xb(b, n);
      for (Eigen::Index r = 0; r < b; ++r) xb.row(r) = acts.row(order[static_cast<std::size_t>(start + r)]);
      RowMatrix pre = xb * ae.enc_w.transpose();
      pre.rowwise() += ae.enc_b.transpose();
      const RowMatrix h = pre.cwiseMax(0.0);
      RowMatrix xhat = h * ae.dec_w.transpose();
      xhat.rowwise() += ae.dec_b.transpose();
      const RowMatrix resid = xhat - xb;
      const double loss = resid.squaredNorm() + cfg.l1_weight * h.sum();
      if (!std::isfinite(loss)) fail(ErrorCode::DivergedLoss, "non-finite loss at epoch " + std::to_string(epoch));
      epoch_loss += loss;

      const double inv_b = 1.0 / static_cast<double>(b);
      const RowMatrix d_xhat = 2.0 * inv_b * resid;
      const Matrix g_dw = d_xhat.transpose() * h;
      const Vector g_db = d_xhat.colwise().sum().transpose();
      RowMatrix d_h = d_xhat * ae.dec_w;
      d_h += (cfg.l1_weight * inv_b) * (h.array() > 0.0).cast<double>().matrix();
      const RowMatrix d_pre = d_h.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
      const Matrix g_ew = d_pre.transpose() * xb;
      const Vector g_eb = d_pre.colwise().sum().transpose();

      ++step;
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      adam(ae.enc_w, m_ew, v_ew, g_ew, c1, c2);
      adam(ae.enc_b, m_eb, v_eb, g_eb, c1, c2);
      adam(ae.dec_w, m_dw, v_dw, g_dw, c1, c2);
      adam(ae.dec_b, m_db, v_db, g_db, c1, c2);
    }
    history.push_back(epoch_loss / static_cast<double>(d));
  }

  SparseAEResult out;
  out.model = ae;
  out.loss_history = history;
  DirectionSet& s = out.directions;
  s.method = Method::SparseAE;
  s.seed = cfg.seed;
  s.dirs = ae.dec_w.transpose();
  const auto dead = detail::normalize_rows(s.dirs);
  for (auto r : dead) {
    Vector fallback = ae.enc_w.row(static_cast<Eigen::Index>(r)).transpose();
    if (fallback.norm() == 0.0) fallback = Vector::Unit(n, 0);
    s.dirs.row(static_cast<Eigen::Index>(r)) = fallback.normalized().transpose();
  }
  const RowMatrix codes = ae.encode(acts);
  const double mean_l0 = (codes.array() > 1e-3).cast<double>().rowwise().sum().mean();
  s.params = json{{"hidden", cfg.hidden},         {"l1_weight", cfg.l1_weight},     {"epochs", cfg.epochs},
                  {"learning_rate", cfg.learning_rate}, {"batch_size", cfg.batch_size}, {"optimizer", "adam"},
                  {"decoder", "untied"},          {"loss_history", history},         {"mean_l0", mean_l0},
                  {"dead_units", dead}};
  return out;
}

// --- projection ---------------------------------------------------------------

enum class ProjectionKind { Dot, NegDistance, ExpNegZDist };

struct ProjectionMode {
  ProjectionKind kind = ProjectionKind::Dot;
  double tau = 2.0;  // ExpNegZDist temperature
};

/// Distance from every activation row to `point`, negated (closest = 0).
inline Vector neg_distance_scores(const RowMatrix& acts, const Vector& point) {
  if (point.size() != acts.cols()) fail(ErrorCode::WidthMismatch, "point width");
  return -((acts.rowwise() - point.transpose()).rowwise().norm());
}

/// D x K score matrix. Dot: (acts - offset) dirs^T. NegDistance: -||a - c_k||
/// to unnormalized centroids. ExpNegZDist: exp(-z(d)/tau) with d = ||a - mu_k||^2
/// z-scored per direction over the rows; mu_k are the centroids when present,
/// otherwise the direction rows themselves (one-hot vectors for neurons).
inline RowMatrix project(const RowMatrix& acts, const DirectionSet& set, ProjectionMode mode = {}) {
  if (acts.cols() != set.dirs.cols()) fail(ErrorCode::WidthMismatch, "activation width differs from directions");
  const auto d = acts.rows(), k = set.dirs.rows();
  switch (mode.kind) {
    case ProjectionKind::Dot: {
      if (set.offset) return (acts.rowwise() - set.offset->transpose()) * set.dirs.transpose();
      return acts * set.dirs.transpose();
    }
    case ProjectionKind::NegDistance: {
      if (!set.centroids) fail(ErrorCode::UnavailableCentroids, std::string(to_string(set.method)) + " set has no centroids");
      RowMatrix out(d, k);
      for (Eigen::Index j = 0; j < k; ++j) out.col(j) = neg_distance_scores(acts, set.centroids->row(j).transpose());
      return out;
    }
    case ProjectionKind::ExpNegZDist: {
      const RowMatrix& mu = set.centroids ? *set.centroids : set.dirs;
      RowMatrix out(d, k);
      for (Eigen::Index j = 0; j < k; ++j) {
        Vector dist = (acts.rowwise() - mu.row(j)).rowwise().squaredNorm();
        const double mean = dist.mean();
        const double sd = std::sqrt((dist.array() - mean).square().mean());
        Vector zd = sd > 0.0 ? Vector((dist.array() - mean) / sd) : Vector(Vector::Zero(d));
        out.col(j) = (-zd.array() / mode.tau).exp().matrix();
      }
      return out;
    }
  }
  return {};
}

/// Centroids in a target space computed from cluster labels found in a
/// source space (same stimuli, row-aligned). Labels < 0 are ignored.
inline DirectionSet transfer_clusters(const std::vector<int>& assignment, const RowMatrix& target, Index k = 0) {
  if (assignment.size() != static_cast<std::size_t>(target.rows()))
    fail(ErrorCode::LengthMismatch, "assignment length " + std::to_string(assignment.size()) + " vs " +
                                        std::to_string(target.rows()) + " target rows");
  int max_label = -1;
  for (int a : assignment) max_label = std::max(max_label, a);
  const auto kk = static_cast<Eigen::Index>(std::max<Index>(k, static_cast<Index>(max_label + 1)));
  if (kk < 1) fail(ErrorCode::LengthMismatch, "no cluster labels");
  RowMatrix centroids = RowMatrix::Zero(kk, target.cols());
  std::vector<double> counts(static_cast<std::size_t>(kk), 0.0);
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] < 0) continue;
    centroids.row(assignment[i]) += target.row(static_cast<Eigen::Index>(i));
    counts[assignment[i]] += 1.0;
  }
  std::vector<int> empty;
  for (Eigen::Index j = 0; j < kk; ++j) {
    if (counts[j] > 0)
      centroids.row(j) /= counts[j];
    else
      empty.push_back(static_cast<int>(j));
  }
  DirectionSet s;
  s.method = Method::KMeans;
  s.centroids = centroids;
  s.dirs = centroids;
  const auto zero = detail::normalize_rows(s.dirs);
  for (auto r : zero) s.dirs.row(static_cast<Eigen::Index>(r)) = Vector::Unit(target.cols(), 0).transpose();
  s.assignment = assignment;
  s.params = json{{"k", kk}, {"transferred", true}, {"empty_clusters", empty}, {"zero_norm_centroids", zero}};
  return s;
}

// --- persistence -------------------------------------------------------------

/// Writes `<stem>.npy` (float32 directions) and `<stem>.json` (sidecar).
inline void save_direction_set(const fs::path& stem, const DirectionSet& s) {
  fs::create_directories(stem.parent_path().empty() ? fs::path(".") : stem.parent_path());
  auto npy_path = stem;
  npy_path += ".npy";
  auto json_path = stem;
  json_path += ".json";
  npy::save_matrix(npy_path, s.dirs);
  json side{{"method", to_string(s.method)}, {"params", s.params}, {"seed", s.seed}, {"k", s.size()}, {"n", s.width()}};
  if (s.offset) side["offset"] = std::vector<double>(s.offset->data(), s.offset->data() + s.offset->size());
  if (s.centroids) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < s.centroids->rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(s.centroids->cols()));
      for (Eigen::Index c = 0; c < s.centroids->cols(); ++c) row[c] = (*s.centroids)(r, c);
      rows.push_back(row);
    }
    side["centroids"] = rows;
  }
  if (!s.assignment.empty()) side["assignment"] = s.assignment;
  write_text_atomic(json_path, side.dump(1) + "\n");
}

/// Loads a direction file; rows are re-normalized in double precision since
/// the NPY payload is float32. The sidecar is optional.
inline DirectionSet load_direction_set(const fs::path& npy_path) {
  DirectionSet s;
  s.dirs = npy::load_matrix(npy_path);
  auto side_path = npy_path;
  side_path.replace_extension(".json");
  if (fs::exists(side_path)) {
    const json side = read_json(side_path);
    s.method = method_from_string(side.value("method", "neurons"));
    s.params = side.value("params", json::object());
    s.seed = side.value("seed", std::uint64_t{0});
    if (side.contains("offset")) {
      const auto v = side.at("offset").get<std::vector<double>>();
      s.offset = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    if (side.contains("centroids")) {
      const auto rows = side.at("centroids").get<std::vector<std::vector<double>>>();
      RowMatrix c(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
      for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t col = 0; col < rows[r].size(); ++col) c(r, col) = rows[r][col];
      s.centroids = c;
    }
    if (side.contains("assignment")) s.assignment = side.at("assignment").get<std::vector<int>>();
  }
  const auto zero = detail::normalize_rows(s.dirs);
  if (!zero.empty()) fail(ErrorCode::DegenerateDirection, npy_path.string() + " has zero rows");
  return s;
}

}  // namespace superscope
