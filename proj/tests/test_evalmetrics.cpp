#include "helpers.hpp"

#include <algorithm>

using namespace testing;

TEST_CASE("assignment matches brute force on 3x3") {
  Matrix cost(3, 3);
  cost << 4, 1, 3, 2, 0, 5, 3, 2, 2;
  const auto assign = hungarian_min(cost);
  std::vector<int> perm{0, 1, 2}, best;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (int i = 0; i < 3; ++i) c += cost(i, perm[i]);
    if (c < best_cost) {
      best_cost = c;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  double got = 0.0;
  for (int i = 0; i < 3; ++i) got += cost(i, assign[i]);
  CHECK(got == best_cost);
  CHECK(assign == best);
}

TEST_CASE("rectangular assignment leaves extra rows unmatched") {
  Matrix cost(3, 2);
  cost << 1, 9, 9, 1, 0, 0;
  const auto assign = hungarian_min(cost);
  CHECK(std::count(assign.begin(), assign.end(), -1) == 1);
  double total = 0.0;
  for (int i = 0; i < 3; ++i)
    if (assign[i] >= 0) total += cost(i, assign[i]);
  CHECK(total == 1.0);
}

TEST_CASE("MCC is invariant to column order and sign") {
  const RowMatrix a = random_matrix(200, 6, 1);
  RowMatrix b(200, 6);
  const std::vector<int> perm{3, 0, 5, 1, 4, 2};
  for (int c = 0; c < 6; ++c) b.col(perm[c]) = (c % 2 ? -1.0 : 2.0) * a.col(c);
  const auto r = mcc(a, b);
  CHECK(r.mcc == Catch::Approx(1.0).margin(1e-6));
  for (const auto& [i, j] : r.pairs) CHECK(perm[i] == static_cast<int>(j));
}

TEST_CASE("MCC of independent noise is small") {
  for (std::uint64_t seed : {1, 2, 3})
    CHECK(mcc(random_matrix(1000, 8, 10 + seed), random_matrix(1000, 8, 20 + seed)).mcc < 0.2);
  CHECK(code_of([] { mcc(RowMatrix::Ones(2, 2), RowMatrix::Ones(2, 2)); }) == ErrorCode::TooFewStimuli);
  CHECK(code_of([] { mcc(RowMatrix::Ones(4, 2), RowMatrix::Ones(5, 2)); }) == ErrorCode::RowMismatch);
}

TEST_CASE("direction MCC uses absolute cosine") {
  RowMatrix a = RowMatrix::Identity(3, 3);
  RowMatrix b(3, 3);
  b << 0, -2, 0, 0, 0, 1, 5, 0, 0;
  CHECK(direction_mcc(a, b).mcc == Catch::Approx(1.0));
}

TEST_CASE("DCI of identical codes and factors") {
  const RowMatrix f = random_matrix(300, 4, 5);
  const auto r = dci(f, f);
  CHECK(r.disentanglement == Catch::Approx(1.0).margin(1e-6));
  CHECK(r.completeness == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("a dense rotation lowers disentanglement") {
  const RowMatrix f = random_matrix(300, 4, 6);
  Eigen::HouseholderQR<Matrix> qr(Matrix(random_matrix(4, 4, 7)));
  const Matrix rot = qr.householderQ();
  const auto id = dci(f, f), mixed = dci(f * rot, f);
  CHECK(mixed.disentanglement < id.disentanglement - 0.2);
  RowMatrix constant = f;
  constant.col(1).setConstant(3.0);
  CHECK(code_of([&] { dci(f, constant); }) == ErrorCode::DegenerateFactor);
}

TEST_CASE("spectrum with an exact power law") {
  // zero-mean orthonormal columns scaled so the sample covariance is diag(n^-1.5)
  const Index d = 400, n = 40;
  RowMatrix g = random_matrix(d, n, 8);
  g = g.rowwise() - g.colwise().mean();
  Eigen::HouseholderQR<Matrix> qr(g);
  const Matrix q = qr.householderQ() * Matrix::Identity(d, n);
  RowMatrix x(d, n);
  for (Index c = 0; c < n; ++c)
    x.col(c) = q.col(c) * std::sqrt(std::pow(static_cast<double>(c + 1), -1.5) * static_cast<double>(d - 1));
  const auto fit = spectrum_alpha(x, 1, n);
  CHECK(fit.alpha == Catch::Approx(1.5).margin(1e-9));
  CHECK(fit.r2 == Catch::Approx(1.0).margin(1e-12));
  CHECK(std::accumulate(fit.eigenvalues.begin(), fit.eigenvalues.end(), 0.0) == Catch::Approx(1.0));
  CHECK(code_of([&] { spectrum_alpha(x, 1, 1); }) == ErrorCode::RangeTooNarrow);
  CHECK(code_of([&] { spectrum_alpha(x, 2, n + 1); }) == ErrorCode::RangeTooNarrow);
}

TEST_CASE("co-activation") {
  RowMatrix acts = random_matrix(500, 6, 9);
  acts.col(4) = acts.col(1);
  const auto c = coactivation(acts);
  std::vector<Index> order(6);
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return c[a] > c[b]; });
  CHECK(((order[0] == 1 && order[1] == 4) || (order[0] == 4 && order[1] == 1)));

  RowMatrix three = random_matrix(100, 3, 10);
  three.col(0) = three.col(1) + three.col(2);
  CHECK(coactivation(three)[0] == Catch::Approx(1.0).margin(1e-12));

  RowMatrix with_constant = random_matrix(50, 4, 11);
  with_constant.col(2).setConstant(1.0);
  const auto r = coactivation_vs_ii(with_constant, {1, 2, 3, 4});
  CHECK(r.constant_columns == std::vector<Index>{2});
  CHECK(std::isnan(r.coactivation[2]));
  CHECK(r.vs_ii.n == 3);
}

TEST_CASE("best matches") {
  const RowMatrix a = random_matrix(100, 5, 12);
  for (double v : best_match(a, a).best) CHECK(v == Catch::Approx(1.0));
  RowMatrix b(100, 5);
  const std::vector<Index> perm{2, 4, 0, 1, 3};
  for (Index c = 0; c < 5; ++c) b.col(perm[c]) = a.col(c);
  const auto r = best_match(a, b);
  for (Index c = 0; c < 5; ++c) {
    CHECK(r.best[c] == Catch::Approx(1.0));
    CHECK(r.index[c] == perm[c]);
  }
  CHECK(code_of([&] { best_match(a, RowMatrix(b.topRows(50))); }) == ErrorCode::RowMismatch);
}

TEST_CASE("transfer analysis needs an assignment") {
  const RowMatrix a = random_matrix(40, 3, 13).cwiseAbs();
  KMeansOptions opt;
  opt.k = 3;
  const auto km = spherical_kmeans(a, opt);
  const auto r = transfer_analysis(km, a, a);
  CHECK(r.unit_best.size() == 3);
  for (double v : r.cluster_best) CHECK(v == Catch::Approx(1.0));
  CHECK(code_of([&] { transfer_analysis(neuron_basis(3), a, a); }) == ErrorCode::LengthMismatch);
  CHECK(code_of([&] { transfer_analysis(km, a, RowMatrix(a.topRows(10))); }) == ErrorCode::RowMismatch);
}

TEST_CASE("rank statistics") {
  const std::vector<double> x{1, 2, 2, 4};
  CHECK(stats::ranks(x) == std::vector<double>{1, 2.5, 2.5, 4});
  const std::vector<double> y{10, 20, 30, 40};
  CHECK(stats::spearman(y, std::vector<double>{1, 4, 9, 16}).r == Catch::Approx(1.0));
  const auto t = stats::rank_sum(std::vector<double>{5, 6, 7, 8}, std::vector<double>{1, 2, 3, 4});
  CHECK(t.effect == 1.0);
  CHECK(t.p_greater < 0.05);
  CHECK(stats::roc_auc(std::vector<double>{0.1, 0.9}, {false, true}) == 1.0);
}
