#include "helpers.hpp"

using namespace testing;

namespace {

/// 30 images: 0-4 share label 0; 5-14 carry distinct labels, as do the rest.
DatasetBundle labelled(Index n = 30) {
  DatasetBundle b;
  b.activations.values = RowMatrix::Zero(n, 1);
  LabelSet ls;
  for (Index i = 0; i < n; ++i) ls.labels.push_back(i < 5 ? 0 : static_cast<int>(i));
  for (Index c = 0; c < n; ++c) ls.class_names.push_back(std::to_string(c));
  b.labels = ls;
  return b;
}

}  // namespace

TEST_CASE("z-scored columns have zero mean and unit sd") {
  RowMatrix x(3, 2);
  x << 1, 5, 2, 5, 3, 5;
  std::vector<Index> constant;
  const RowMatrix z = zscore_columns(x, &constant);
  CHECK(z.col(0).mean() == Catch::Approx(0.0).margin(1e-15));
  CHECK(std::sqrt(z.col(0).squaredNorm() / 3.0) == Catch::Approx(1.0));
  CHECK(z(0, 0) == Catch::Approx(-std::sqrt(1.5)));
  CHECK(z.col(1).isZero());
  CHECK(constant == std::vector<Index>{1});
}

TEST_CASE("z-scoring is idempotent") {
  const RowMatrix z = zscore_columns(random_matrix(50, 6, 3) * 7.0);
  const RowMatrix zz = zscore_columns(z);
  CHECK((z - zz).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("a unit paired with itself has no synergy") {
  const auto b = labelled();
  const Similarity lab({MetricKind::Label}, b);
  const RowMatrix z = zscore_columns(random_matrix(30, 3, 4));
  CHECK(pair_synergy(1, 1, z, lab).synergy == 0.0);
  RowMatrix dup = z;
  dup.col(2) = dup.col(0);
  CHECK(pair_synergy(0, 2, dup, lab).synergy == 0.0);
}

TEST_CASE("cancelling distractors make the sum more interpretable") {
  const auto b = labelled();
  const Similarity lab({MetricKind::Label}, b);
  // unit a = feature + distractor, unit b = feature - distractor
  Vector feature = Vector::Zero(30), distract = Vector::Zero(30);
  for (Index i = 0; i < 5; ++i) feature(i) = 1.0;
  for (Index i = 5; i < 10; ++i) distract(i) = 1.5;
  for (Index i = 10; i < 15; ++i) distract(i) = -1.5;
  RowMatrix acts(30, 2);
  acts.col(0) = feature + distract;
  acts.col(1) = feature - distract;
  const auto r = pair_synergy(0, 1, zscore_columns(acts), lab);
  CHECK(r.ii_a == 1.0);
  CHECK(r.ii_b == 1.0);
  CHECK(r.ii_sum == 5.0);
  CHECK(r.synergy > 0.0);
}

TEST_CASE("scan records") {
  const auto b = labelled();
  const Similarity lab({MetricKind::Label}, b);
  const RowMatrix z = zscore_columns(random_matrix(30, 2, 5));
  CHECK(synergy_scan(z, lab).records.size() == 1);

  const RowMatrix z4 = zscore_columns(random_matrix(30, 4, 6));
  RowMatrix swapped = z4;
  swapped.col(0) = z4.col(3);
  swapped.col(3) = z4.col(0);
  const auto a = synergy_scan(z4, lab), s = synergy_scan(swapped, lab);
  REQUIRE(a.records.size() == 6);
  auto find = [](const SynergyScan& scan, Index x, Index y) {
    for (const auto& r : scan.records)
      if ((r.a == x && r.b == y) || (r.a == y && r.b == x)) return r.synergy;
    return std::numeric_limits<double>::quiet_NaN();
  };
  CHECK(find(a, 0, 1) == find(s, 3, 1));
  CHECK(find(a, 1, 2) == find(s, 1, 2));
  CHECK(find(a, 0, 3) == find(s, 3, 0));
  CHECK(code_of([&] { synergy_scan(RowMatrix(z.leftCols(1)), lab); }) == ErrorCode::ShapeMismatch);
}
