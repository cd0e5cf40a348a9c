#include "helpers.hpp"

using namespace testing;

namespace {

DatasetBundle labelled_bundle(const RowMatrix& acts, std::uint64_t seed) {
  DatasetBundle b;
  b.activations.values = acts;
  std::mt19937_64 rng(seed);
  LabelSet ls;
  for (Eigen::Index i = 0; i < acts.rows(); ++i) ls.labels.push_back(static_cast<int>(rng() % 4));
  ls.class_names = {"a", "b", "c", "d"};
  b.labels = ls;
  return b;
}

}  // namespace

TEST_CASE("interpolation endpoints") {
  const RowMatrix acts = random_matrix(60, 4, 1);
  const auto b = labelled_bundle(acts, 2);
  const Similarity lab({MetricKind::Label}, b);
  const Vector mu_a = acts.row(0).transpose(), mu_b = acts.row(1).transpose();
  const auto path = interpolation_profile(mu_a, mu_b, {0.0, 0.5, 1.0}, acts, lab);
  CHECK(path.points[2].ii == ii_at_point(acts, mu_a.normalized(), lab));
  CHECK(path.points[0].ii == ii_at_point(acts, mu_b.normalized(), lab));
  CHECK(code_of([&] { interpolation_profile(mu_a, mu_a, {0.5}, acts, lab); }) == ErrorCode::IdenticalEndpoints);
}

TEST_CASE("opposite endpoints vanish halfway") {
  const RowMatrix acts = random_matrix(30, 3, 3);
  const auto b = labelled_bundle(acts, 4);
  const Similarity lab({MetricKind::Label}, b);
  const Vector mu = acts.row(2).transpose();
  const auto path = interpolation_profile(mu, Vector(-mu), {0.25, 0.5, 1.0}, acts, lab);
  CHECK(path.points[1].degenerate);
  CHECK(std::isnan(path.points[1].ii));
  CHECK_FALSE(path.points[0].degenerate);
  CHECK_FALSE(std::isnan(path.points[2].ii));
}

TEST_CASE("default alpha grid") {
  const auto a = default_alphas();
  REQUIRE(a.size() == 21);
  CHECK(a.front() == -0.5);
  CHECK(a[5] == 0.0);
  CHECK(a.back() == 1.5);
}

TEST_CASE("separated pairs") {
  RowMatrix c(4, 2);
  c << 0, 0, 10, 0, 0, 1, 10, 1;
  const auto pairs = maximal_separation_pairs(c);
  for (auto [a, b] : pairs) CHECK(a != b);
  CHECK(maximal_separation_pairs(RowMatrix::Ones(1, 2)).empty());
}

TEST_CASE("gradient of a linear map") {
  Matrix w(2, 3);
  w << 1, 2, 0, -1, 0.5, 3;
  const ToyModel lin(w, false);
  Vector x(3), v(2);
  x << 0.2, -0.4, 1.0;
  v << 0.3, 0.1;
  const Vector y = w * x;
  const Vector expected = -w.transpose() * (y - v) / (y - v).norm();
  CHECK((distance_gradient(lin, x, v) - expected).norm() <= 1e-10);
  CHECK(code_of([&] { distance_gradient(lin, x, y); }) == ErrorCode::AtSingularity);
}

TEST_CASE("probes at the target are skipped") {
  const ToyModel lin(Matrix::Identity(2, 2), false);
  InterpolationPath path;
  PathPoint p;
  p.v = Vector::Unit(2, 0);
  path.points = {p};
  gradient_norm_profile(lin, {Vector::Unit(2, 0), Vector::Unit(2, 1)}, path);
  CHECK(path.points[0].probes_used == 1);
  CHECK(path.points[0].probes_skipped == 1);
  CHECK(path.points[0].grad_mean == Catch::Approx(1.0));
}

TEST_CASE("gradient norms read from a matrix") {
  RowMatrix norms(3, 4);
  norms << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, std::numeric_limits<double>::quiet_NaN(), 12;
  InterpolationPath path;
  path.points.resize(2);
  gradient_norms_from_matrix(norms, {0, 2}, path, 1);
  CHECK(path.points[0].grad_mean == 6.0);
  CHECK(path.points[0].grad_min == 2.0);
  CHECK(path.points[1].probes_skipped == 1);
  CHECK(path.points[1].grad_mean == 3.0);
  CHECK(code_of([&] { gradient_norms_from_matrix(norms, {0}, path, 3); }) == ErrorCode::ShapeMismatch);
  CHECK(code_of([&] { gradient_norms_from_matrix(norms, {5}, path, 0); }) == ErrorCode::IndexOutOfRange);
}

TEST_CASE("noise sensitivity") {
  Matrix w(2, 4);
  w << 1, 0, 0, 0, 0, 2, 2, 0;
  const ToyModel lin(w, false);
  const std::vector<Vector> images{Vector::Constant(4, 0.5), Vector::Constant(4, 0.2)};
  const auto zero = noise_sensitivity(lin, images, {0.0}, 8, 1);
  CHECK(zero == std::vector<double>{0.0, 0.0});
  std::vector<double> prev{0.0, 0.0};
  for (double s : {0.02, 0.04, 0.06, 0.08, 0.1}) {
    const auto cur = noise_sensitivity(lin, images, {s}, 8, 1);
    CHECK(cur[0] > prev[0]);
    CHECK(cur[1] > prev[1]);
    if (prev[0] > 0.0) CHECK(cur[0] == Catch::Approx(prev[0] * s / (s - 0.02)).epsilon(1e-9));
    prev = cur;
  }
}

TEST_CASE("t-SNE keeps tight clusters apart") {
  // two groups of six points, 0.1 apart within a group and 10 apart across
  RowMatrix pts = RowMatrix::Zero(12, 3);
  const RowMatrix jitter = random_matrix(12, 3, 4) * 0.05;
  for (Eigen::Index i = 0; i < 12; ++i) pts.row(i) = jitter.row(i) + RowMatrix::Constant(1, 3, i < 6 ? 0.0 : 10.0 / std::sqrt(3.0));
  RowMatrix d(12, 12);
  for (Eigen::Index i = 0; i < 12; ++i)
    for (Eigen::Index j = 0; j < 12; ++j) d(i, j) = (pts.row(i) - pts.row(j)).norm();
  TsneConfig cfg;
  cfg.perplexity = 3.0;
  cfg.iterations = 500;
  const auto r = tsne_embed(d, cfg);
  double within = 0.0, across = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < 12; ++i)
    for (Eigen::Index j = i + 1; j < 12; ++j) {
      const double e = (r.y.row(i) - r.y.row(j)).norm();
      if ((i < 6) == (j < 6)) within = std::max(within, e);
      else across = std::min(across, e);
    }
  CHECK(within < across);
  CHECK(r.kl.back() < r.kl[cfg.exaggeration_iters]);
  cfg.perplexity = 11.0;
  CHECK(code_of([&] { tsne_embed(d, cfg); }) == ErrorCode::InsufficientPoints);
}

TEST_CASE("affinities hit the target perplexity") {
  const RowMatrix pts = random_matrix(40, 5, 7);
  RowMatrix d(40, 40);
  for (Index i = 0; i < 40; ++i)
    for (Index j = 0; j < 40; ++j) d(i, j) = (pts.row(i) - pts.row(j)).norm();
  std::vector<double> achieved;
  const RowMatrix p = conditional_affinities(d, 10.0, &achieved);
  for (Eigen::Index i = 0; i < 40; ++i) {
    double h = 0.0;
    for (Eigen::Index j = 0; j < 40; ++j)
      if (p(i, j) > 0.0) h -= p(i, j) * std::log(p(i, j));
    CHECK(std::abs(std::exp(h) - 10.0) <= 1e-4);
    CHECK(p.row(i).sum() == Catch::Approx(1.0));
  }
}

TEST_CASE("malformed distance matrices") {
  RowMatrix d = RowMatrix::Zero(3, 3);
  d(0, 1) = 1.0;
  CHECK(code_of([&] { validate_distance_matrix(d); }) == ErrorCode::BadDistanceMatrix);
  d(1, 0) = 1.0;
  d(2, 2) = 0.5;
  CHECK(code_of([&] { validate_distance_matrix(d); }) == ErrorCode::BadDistanceMatrix);
  CHECK(code_of([] { validate_distance_matrix(RowMatrix::Zero(2, 3)); }) == ErrorCode::BadDistanceMatrix);
}

TEST_CASE("manifold sparsity") {
  RowMatrix dist(4, 4);
  dist << 0, 0, 0, 3, 0, 0, 0, 4, 0, 0, 0, 5, 3, 4, 5, 0;
  RowMatrix scores(6, 1);
  scores << 0.1, 9, 8, 7, 1, 0.2;
  const std::vector<Index> union_idx{1, 2, 3, 4};
  CHECK(manifold_sparsity(scores, union_idx, dist, 3).sparsity[0] == 0.0);
  const auto two = manifold_sparsity(scores, union_idx, dist, 2);
  CHECK(two.sparsity[0] == dist(0, 1));
  scores(4, 0) = 8.5;
  CHECK(manifold_sparsity(scores, union_idx, dist, 2).sparsity[0] == dist(0, 3));
  CHECK(code_of([&] { manifold_sparsity(scores, union_idx, dist, 1); }) == ErrorCode::InsufficientPoints);
  CHECK(code_of([&] { manifold_sparsity(scores, union_idx, dist, 5); }) == ErrorCode::InsufficientPoints);
}

TEST_CASE("MEI union is sorted and unique") {
  RowMatrix a(6, 2);
  a << 5, 0, 4, 0, 3, 9, 0, 8, 0, 7, 0, 0;
  const auto u = mei_union({a}, 2);
  CHECK(u == std::vector<Index>{0, 1, 2, 3});
}

TEST_CASE("evenly spaced subsets") {
  CHECK(spaced_indices(10, 3) == std::vector<Index>{0, 3, 6});
  CHECK(spaced_indices(2, 5) == std::vector<Index>{0, 1});
}
