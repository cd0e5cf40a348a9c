#include "helpers.hpp"

using namespace testing;

TEST_CASE("one-sparse noiseless activations are scaled dictionary columns") {
  synth::SuperpositionSpec spec;
  spec.n_samples = 300;
  spec.noise_sd = 0.0;
  const auto data = synth::gen_superposition(spec);
  const RowMatrix& acts = data.bundle.activations.values;
  for (Eigen::Index i = 0; i < acts.rows(); ++i) {
    Eigen::Index k;
    const double s = data.codes.row(i).maxCoeff(&k);
    REQUIRE((data.codes.row(i).array() > 0.0).count() == 1);
    for (Eigen::Index c = 0; c < acts.cols(); ++c)
      CHECK(acts(i, c) == static_cast<double>(static_cast<float>(std::max(0.0, s * data.dictionary(c, k)))));
  }
  for (Eigen::Index k = 0; k < data.dictionary.cols(); ++k)
    CHECK(data.dictionary.col(k).norm() == Catch::Approx(1.0));
}

TEST_CASE("identity dictionary is recovered exactly") {
  synth::SuperpositionSpec spec;
  spec.n_units = spec.n_features = 8;
  spec.identity_dictionary = true;
  spec.noise_sd = 0.0;
  spec.n_samples = 400;
  const auto data = synth::gen_superposition(spec);
  KMeansOptions opt;
  opt.k = 8;
  const auto km = spherical_kmeans(data.bundle.activations.values, opt);
  CHECK(direction_mcc(km.dirs, RowMatrix::Identity(8, 8)).mcc == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("invalid generator settings") {
  synth::SuperpositionSpec spec;
  spec.sparsity = 0.5;
  CHECK(code_of([&] { synth::gen_superposition(spec); }) == ErrorCode::SpecInvalid);
  spec = {};
  spec.identity_dictionary = true;
  CHECK(code_of([&] { synth::gen_superposition(spec); }) == ErrorCode::SpecInvalid);
  spec = {};
  spec.noise_sd = -1.0;
  CHECK(code_of([&] { synth::gen_superposition(spec); }) == ErrorCode::SpecInvalid);
}

TEST_CASE("generator is deterministic and its settings round-trip") {
  synth::SuperpositionSpec spec;
  spec.n_samples = 100;
  spec.sparsity = 2.5;
  spec.seed = 7;
  const auto a = synth::gen_superposition(spec), b = synth::gen_superposition(spec);
  CHECK(a.bundle.activations.values == b.bundle.activations.values);
  CHECK(a.bundle.images->pixels == b.bundle.images->pixels);
  const auto back = synth::spec_from_json(synth::to_json(spec));
  CHECK(back.sparsity == 2.5);
  CHECK(back.seed == 7);
  for (Eigen::Index i = 0; i < a.codes.rows(); ++i) CHECK((a.codes.row(i).array() > 0.0).count() >= 1);
}

TEST_CASE("twin shares codes and images but not the dictionary") {
  synth::SuperpositionSpec spec;
  spec.n_samples = 100;
  const auto a = synth::gen_superposition(spec);
  const auto t = synth::gen_twin(a, 3);
  CHECK(t.codes == a.codes);
  CHECK(t.bundle.images->pixels == a.bundle.images->pixels);
  CHECK(t.dictionary != a.dictionary);
}

TEST_CASE("saved oracle maps images to activations") {
  TempDir dir("oracle");
  synth::SuperpositionSpec spec;
  spec.n_samples = 60;
  spec.noise_sd = 0.0;
  const auto data = synth::gen_superposition(spec);
  const auto manifest = synth::save_synth(data, dir.path);
  const auto oracle = synth::load_oracle(manifest);
  REQUIRE(oracle);
  // rendering saturates each feature at intensity_scale, so the oracle sees clipped codes
  const RowMatrix clipped = data.codes.cwiseMin(spec.intensity_scale);
  for (Index i = 0; i < 60; ++i) {
    const Vector y = oracle->forward(image_vector(*data.bundle.images, i));
    const Vector want = (data.dictionary * clipped.row(i).transpose()).cwiseMax(0.0);
    CHECK((y - want).norm() <= 0.02 * std::max(1.0, want.norm()));
    if (data.codes.row(i).maxCoeff() < spec.intensity_scale)
      CHECK((y - data.bundle.activations.values.row(i).transpose()).norm() <= 0.02 * std::max(1.0, want.norm()));
  }
}

TEST_CASE("quadrant generator") {
  const auto uniform = synth::gen_quadrant_data(3, std::vector<double>(8, 0.125), 8000, 1);
  for (Eigen::Index c = 0; c < 3; ++c) {
    const double rate = (uniform.relu.col(c).array() > 0.0).cast<double>().mean();
    CHECK(rate == Catch::Approx(0.5).margin(0.03));
  }
  std::vector<double> negative(8, 0.0);
  negative[0] = 1.0;
  CHECK(synth::gen_quadrant_data(3, negative, 500, 2).relu.isZero());
  CHECK(code_of([] { synth::gen_quadrant_data(2, {0.5, 0.5, 0.5, 0.5}, 10, 0); }) == ErrorCode::DensityNotNormalized);
  CHECK(code_of([] { synth::gen_quadrant_data(2, {1.0}, 10, 0); }) == ErrorCode::DensityNotNormalized);
}

TEST_CASE("a unit that often fires alone") {
  const Index n = 4;
  const auto q = synth::gen_quadrant_data(n, synth::fires_alone_density(n, 1, 0.5), 3000, 3);
  DatasetBundle b;
  b.activations.values = q.relu;
  b.images = synth::quadrant_images(q.quadrant, Index{1} << n);
  const Similarity col({MetricKind::Color}, b);
  const auto co = coactivation(q.relu);
  const auto ii = ii_per_direction(q.relu, col);
  for (Index k = 0; k < n; ++k) {
    if (k == 1) continue;
    CHECK(co[1] < co[k]);
    CHECK(ii[1] > ii[k]);
  }
}

TEST_CASE("toy model gradients") {
  std::mt19937_64 rng(4);
  ToyModel model(Matrix(random_matrix(6, 5, 5)));
  model.w2 = Matrix(random_matrix(3, 6, 6));
  model.b2 = Vector::Zero(3);
  const Vector v = Vector::Constant(3, 0.1);
  int used = 0;
  for (int p = 0; p < 100; ++p) {
    const Vector x0 = random_matrix(5, 1, 100 + p).col(0);
    const auto x = off_kink_probe(model, x0, 1e-5, 200 + p);
    if (!x) continue;
    const Vector analytic = distance_gradient(model, *x, v);
    const Vector fd = finite_difference_gradient(model, *x, v, 1e-5);
    CHECK((analytic - fd).norm() <= 1e-4 * std::max(1e-8, analytic.norm()));
    ++used;
  }
  CHECK(used >= 90);

  ToyModel off(Matrix(-Matrix::Identity(3, 3)));
  CHECK(distance_gradient(off, Vector::Constant(3, 1.0), Vector::Constant(3, 1.0)).isZero());
}
