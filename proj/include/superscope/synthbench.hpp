#pragma once

// Synthetic superposition data with a known dictionary, rendered images,
// labels, colour-histogram embeddings, and a matching toy ReLU network.

#include "superscope/data_model.hpp"
#include "superscope/oracle.hpp"

#include <cmath>
#include <random>

namespace superscope::synth {

struct SuperpositionSpec {
  Index n_units = 16;
  Index n_features = 32;
  double sparsity = 1.0;  // expected active features per sample; 1 means exactly one
  double noise_sd = 0.02;
  Index n_samples = 5000;
  std::uint64_t seed = 0;
  Index image_size = 32;
  Index n_classes = 10;
  Index support = 3;               // units carrying each feature
  bool identity_dictionary = false;  // requires n_features == n_units
  bool permute_labels = false;     // labels unrelated to image content
  double intensity_scale = 3.0;    // code value rendered at full brightness

  void validate() const {
    auto bad = [](const std::string& why) { fail(ErrorCode::SpecInvalid, why); };
    if (n_units < 1 || n_features < 1) bad("need at least one unit and one feature");
    if (!(sparsity >= 1.0) || sparsity > static_cast<double>(n_features)) bad("sparsity must lie in [1, n_features]");
    if (!(noise_sd >= 0.0)) bad("noise_sd must be non-negative");
    if (n_samples < 1) bad("n_samples must be positive");
    if (image_size < 8) bad("image_size must be at least 8");
    if (n_classes < 1) bad("n_classes must be positive");
    if (support < 1) bad("support must be positive");
    if (identity_dictionary && n_features != n_units) bad("identity dictionary needs n_features == n_units");
    if (!(intensity_scale > 0.0)) bad("intensity_scale must be positive");
  }
};

inline json to_json(const SuperpositionSpec& s) {
  return json{{"n_units", s.n_units},       {"n_features", s.n_features},
              {"sparsity", s.sparsity},     {"noise_sd", s.noise_sd},
              {"n_samples", s.n_samples},   {"seed", s.seed},
              {"image_size", s.image_size}, {"n_classes", s.n_classes},
              {"support", s.support},       {"identity_dictionary", s.identity_dictionary},
              {"permute_labels", s.permute_labels}, {"intensity_scale", s.intensity_scale}};
}

inline SuperpositionSpec spec_from_json(const json& j) {
  SuperpositionSpec s;
  s.n_units = j.value("n_units", s.n_units);
  s.n_features = j.value("n_features", s.n_features);
  s.sparsity = j.value("sparsity", s.sparsity);
  s.noise_sd = j.value("noise_sd", s.noise_sd);
  s.n_samples = j.value("n_samples", s.n_samples);
  s.seed = j.value("seed", s.seed);
  s.image_size = j.value("image_size", s.image_size);
  s.n_classes = j.value("n_classes", s.n_classes);
  s.support = j.value("support", s.support);
  s.identity_dictionary = j.value("identity_dictionary", s.identity_dictionary);
  s.permute_labels = j.value("permute_labels", s.permute_labels);
  s.intensity_scale = j.value("intensity_scale", s.intensity_scale);
  return s;
}

// --- appearance ------------------------------------------------------------------

enum class Shape { Square, Disc, Cross, Ring };

struct Appearance {
  std::array<double, 3> rgb{};
  Shape shape = Shape::Square;
  Index cell = 0;  // position in a 2 x 2 grid
};

/// Fully saturated HSV colour at the given hue in [0, 1).
inline std::array<double, 3> hue_to_rgb(double hue) {
  const double h = 6.0 * (hue - std::floor(hue));
  const int sector = static_cast<int>(h) % 6;
  const double f = h - std::floor(h);
  switch (sector) {
    case 0: return {1.0, f, 0.0};
    case 1: return {1.0 - f, 1.0, 0.0};
    case 2: return {0.0, 1.0, f};
    case 3: return {0.0, 1.0 - f, 1.0};
    case 4: return {f, 0.0, 1.0};
    default: return {1.0, 0.0, 1.0 - f};
  }
}

inline Appearance feature_appearance(Index f, Index n_features) {
  Appearance a;
  a.rgb = hue_to_rgb(static_cast<double>(f) / static_cast<double>(n_features));
  a.shape = static_cast<Shape>(f % 4);
  a.cell = (f / 4) % 4;
  return a;
}

/// Binary mask of a feature's shape, H x W, row-major.
inline std::vector<std::uint8_t> shape_mask(const Appearance& a, Index size) {
  std::vector<std::uint8_t> mask(size * size, 0);
  const double half = static_cast<double>(size) / 2.0;
  const double cy = (a.cell / 2 == 0 ? 0.5 : 1.5) * half, cx = (a.cell % 2 == 0 ? 0.5 : 1.5) * half;
  const double r = 0.4 * half;
  for (Index y = 0; y < size; ++y)
    for (Index x = 0; x < size; ++x) {
      const double dy = static_cast<double>(y) + 0.5 - cy, dx = static_cast<double>(x) + 0.5 - cx;
      const double dist = std::sqrt(dx * dx + dy * dy);
      bool on = false;
      switch (a.shape) {
        case Shape::Square: on = std::abs(dx) <= r && std::abs(dy) <= r; break;
        case Shape::Disc: on = dist <= r; break;
        case Shape::Cross: on = (std::abs(dx) <= r / 3 && std::abs(dy) <= r) || (std::abs(dy) <= r / 3 && std::abs(dx) <= r); break;
        case Shape::Ring: on = dist <= r && dist >= r / 2; break;
      }
      mask[y * size + x] = on ? 1 : 0;
    }
  return mask;
}

/// Per-feature flattened templates (P = H * W * 3, values in [0, 1]); an image
/// is sum_f min(1, s_f / scale) * template_f, clamped and quantized.
inline RowMatrix feature_templates(Index n_features, Index size) {
  RowMatrix t = RowMatrix::Zero(static_cast<Eigen::Index>(n_features), static_cast<Eigen::Index>(size * size * 3));
  for (Index f = 0; f < n_features; ++f) {
    const auto a = feature_appearance(f, n_features);
    const auto mask = shape_mask(a, size);
    for (Index p = 0; p < size * size; ++p)
      if (mask[p])
        for (int c = 0; c < 3; ++c) t(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(3 * p + c)) = a.rgb[c];
  }
  return t;
}

inline void render_image(const RowMatrix& templates, std::span<const double> code, double scale, std::uint8_t* out) {
  const auto p = templates.cols();
  std::vector<double> acc(static_cast<std::size_t>(p), 0.0);
  for (std::size_t f = 0; f < code.size(); ++f) {
    if (code[f] <= 0.0) continue;
    const double level = std::min(1.0, code[f] / scale);
    for (Eigen::Index i = 0; i < p; ++i) acc[i] += level * templates(static_cast<Eigen::Index>(f), i);
  }
  for (Eigen::Index i = 0; i < p; ++i) out[i] = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(acc[i], 0.0, 1.0)));
}

/// 3 channels x 8 bins of pixel values, as fractions of the pixel count. A
/// cheap stand-in for perceptual embeddings; it is not LPIPS.
inline RowMatrix color_histograms(const ImageSet& images) {
  RowMatrix h = RowMatrix::Zero(static_cast<Eigen::Index>(images.count), 24);
  const double inv = 1.0 / static_cast<double>(images.height * images.width);
  for (Index i = 0; i < images.count; ++i) {
    const std::uint8_t* px = images.pixels.data() + i * images.image_stride();
    for (Index k = 0; k < images.height * images.width; ++k)
      for (int c = 0; c < 3; ++c) h(static_cast<Eigen::Index>(i), c * 8 + px[3 * k + c] / 32) += inv;
  }
  return h;
}

// --- generator -------------------------------------------------------------------

struct SynthData {
  SuperpositionSpec spec;
  RowMatrix dictionary;  // N x F, unit non-negative columns
  RowMatrix codes;       // samples x F, non-negative
  std::vector<int> dominant;  // strongest feature per sample
  DatasetBundle bundle;
  ToyModel model;  // y(x) = relu(W1 x) reproduces the activations from images
};

inline RowMatrix random_dictionary(const SuperpositionSpec& s, std::uint64_t seed) {
  const auto n = static_cast<Eigen::Index>(s.n_units), f = static_cast<Eigen::Index>(s.n_features);
  if (s.identity_dictionary) return RowMatrix::Identity(n, f);
  std::mt19937_64 rng(mix_seed(seed, 0xD1C7));
  std::uniform_real_distribution<double> weight(0.5, 1.0);
  RowMatrix u = RowMatrix::Zero(n, f);
  const Index support = std::min(s.support, s.n_units);
  std::vector<Index> units(s.n_units);
  for (Eigen::Index c = 0; c < f; ++c) {
    std::iota(units.begin(), units.end(), Index{0});
    std::shuffle(units.begin(), units.end(), rng);
    for (Index k = 0; k < support; ++k) u(static_cast<Eigen::Index>(units[k]), c) = weight(rng);
    u.col(c).normalize();
  }
  return u;
}

/// Sparse non-negative codes. Sparsity 1 gives exactly one active feature per
/// sample; larger values use Bernoulli(sparsity / F) gates with at least one
/// feature forced on. Magnitudes are Exp(1).
inline RowMatrix sample_codes(const SuperpositionSpec& s) {
  const auto f = static_cast<Eigen::Index>(s.n_features);
  RowMatrix codes = RowMatrix::Zero(static_cast<Eigen::Index>(s.n_samples), f);
  parallel_for(s.n_samples, [&](std::size_t i) {
    std::mt19937_64 rng(mix_seed(mix_seed(s.seed, 0xC0DE), i));
    std::exponential_distribution<double> mag(1.0);
    std::uniform_int_distribution<Eigen::Index> pick(0, f - 1);
    if (s.sparsity <= 1.0) {
      const auto k = pick(rng);
      codes(static_cast<Eigen::Index>(i), k) = mag(rng);
      return;
    }
    std::bernoulli_distribution gate(s.sparsity / static_cast<double>(s.n_features));
    bool any = false;
    for (Eigen::Index k = 0; k < f; ++k)
      if (gate(rng)) {
        codes(static_cast<Eigen::Index>(i), k) = mag(rng);
        any = true;
      }
    if (!any) codes(static_cast<Eigen::Index>(i), pick(rng)) = mag(rng);
  });
  return codes;
}

/// Toy first layer mapping a rendered image back to relu(U s): recover the
/// feature levels by least squares on the templates, then apply the dictionary.
inline ToyModel toy_model_for(const RowMatrix& dictionary, const RowMatrix& templates, double scale) {
  const Matrix r = templates;  // F x P
  const Matrix gram = r * r.transpose();
  const Matrix readout = gram.ldlt().solve(r);  // F x P
  return ToyModel(scale * Matrix(dictionary) * readout);
}

inline SynthData generate_with(const SuperpositionSpec& s, RowMatrix codes, std::uint64_t dictionary_seed,
                               std::uint64_t noise_seed) {
  SynthData out;
  out.spec = s;
  out.dictionary = random_dictionary(s, dictionary_seed);
  out.codes = std::move(codes);
  const auto d = out.codes.rows(), n = out.dictionary.rows(), f = out.codes.cols();

  RowMatrix acts = out.codes * out.dictionary.transpose();
  parallel_for(static_cast<std::size_t>(d), [&](std::size_t i) {
    std::mt19937_64 rng(mix_seed(mix_seed(noise_seed, 0x901E), i));
    std::normal_distribution<double> noise(0.0, 1.0);
    for (Eigen::Index c = 0; c < n; ++c) {
      double v = acts(static_cast<Eigen::Index>(i), c);
      if (s.noise_sd > 0.0) v += s.noise_sd * noise(rng);
      acts(static_cast<Eigen::Index>(i), c) = static_cast<double>(static_cast<float>(std::max(v, 0.0)));
    }
  });
  out.bundle.activations.values = std::move(acts);
  for (Index c = 0; c < s.n_units; ++c) out.bundle.activations.unit_names.push_back("unit" + std::to_string(c));
  out.bundle.activations.source_tag = "synthbench";

  const RowMatrix templates = feature_templates(s.n_features, s.image_size);
  ImageSet images;
  images.count = static_cast<Index>(d);
  images.height = images.width = s.image_size;
  images.pixels.assign(images.count * images.image_stride(), 0);
  parallel_for(images.count, [&](std::size_t i) {
    const auto row = out.codes.row(static_cast<Eigen::Index>(i));
    std::vector<double> code(row.data(), row.data() + f);
    render_image(templates, code, s.intensity_scale, images.pixels.data() + i * images.image_stride());
  });

  out.dominant.resize(static_cast<std::size_t>(d));
  LabelSet labels;
  for (Index c = 0; c < s.n_classes; ++c) labels.class_names.push_back("class" + std::to_string(c));
  std::vector<int> class_of(s.n_features);
  for (Index k = 0; k < s.n_features; ++k) class_of[k] = static_cast<int>(k % s.n_classes);
  for (Eigen::Index i = 0; i < d; ++i) {
    Eigen::Index best = 0;
    out.codes.row(i).maxCoeff(&best);
    out.dominant[i] = static_cast<int>(best);
    labels.labels.push_back(class_of[best]);
  }
  if (s.permute_labels) {
    std::mt19937_64 rng(mix_seed(s.seed, 0x1ABE1));
    std::shuffle(labels.labels.begin(), labels.labels.end(), rng);
  }

  EmbeddingSet emb;
  emb.layer_names = {"color_hist"};
  emb.layers = {color_histograms(images)};
  out.bundle.images = std::move(images);
  out.bundle.labels = std::move(labels);
  out.bundle.embeddings = std::move(emb);
  out.bundle.validate();
  out.model = toy_model_for(out.dictionary, templates, s.intensity_scale);
  return out;
}

inline SynthData gen_superposition(const SuperpositionSpec& s) {
  s.validate();
  return generate_with(s, sample_codes(s), s.seed, s.seed);
}

/// A second "subject": the same codes and images seen through an independent
/// dictionary with independent noise.
inline SynthData gen_twin(const SynthData& first, std::uint64_t twin_seed) {
  return generate_with(first.spec, first.codes, mix_seed(twin_seed, 0x7717), mix_seed(twin_seed, 0x7718));
}

/// Writes the bundle plus ground_truth.npy (U), codes.npy (S) and the toy
/// model's weights; returns the manifest path.
inline fs::path save_synth(const SynthData& data, const fs::path& dir) {
  fs::create_directories(dir);
  npy::save_matrix(dir / "ground_truth.npy", data.dictionary);
  npy::save_matrix(dir / "codes.npy", data.codes);
  npy::save_matrix(dir / "toy_w1.npy", data.model.w1);
  json extra{{"ground_truth", "ground_truth.npy"},
             {"codes", "codes.npy"},
             {"oracle", {{"type", "toy_relu"}, {"w1", "toy_w1.npy"}}},
             {"synth_spec", to_json(data.spec)}};
  return save_bundle(data.bundle, dir, extra);
}

/// Toy oracle named in a manifest, if any. Weights are float32 on disk.
inline std::optional<ToyModel> load_oracle(const fs::path& manifest_path) {
  const json m = read_json(manifest_path);
  if (!m.contains("oracle")) return std::nullopt;
  const fs::path base = manifest_path.parent_path();
  ToyModel model(npy::load_matrix(base / m.at("oracle").at("w1").get<std::string>()));
  if (m.at("oracle").contains("w2")) {
    model.w2 = Matrix(npy::load_matrix(base / m.at("oracle").at("w2").get<std::string>()));
    model.b2 = Vector::Zero(model.w2->rows());
  }
  return model;
}

// --- quadrant data ------------------------------------------------------------------

struct QuadrantData {
  RowMatrix raw;   // signed responses
  RowMatrix relu;  // max(raw, 0)
  std::vector<Index> quadrant;  // bit i set means unit i is positive
};

/// Signed half-normal responses whose sign pattern (quadrant) is drawn from
/// `density` over the 2^N orthants.
inline QuadrantData gen_quadrant_data(Index n, const std::vector<double>& density, Index n_samples, std::uint64_t seed) {
  if (n < 1 || n > 12) fail(ErrorCode::SpecInvalid, "quadrant generator supports 1 <= N <= 12");
  if (density.size() != (std::size_t{1} << n))
    fail(ErrorCode::DensityNotNormalized, "density needs 2^N = " + std::to_string(std::size_t{1} << n) + " entries");
  double total = 0.0;
  for (double p : density) {
    if (!(p >= 0.0)) fail(ErrorCode::DensityNotNormalized, "negative quadrant mass");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) fail(ErrorCode::DensityNotNormalized, "quadrant masses sum to " + std::to_string(total));

  QuadrantData q;
  q.raw.resize(static_cast<Eigen::Index>(n_samples), static_cast<Eigen::Index>(n));
  q.quadrant.resize(n_samples);
  std::vector<double> cdf(density.size());
  std::partial_sum(density.begin(), density.end(), cdf.begin());
  parallel_for(n_samples, [&](std::size_t i) {
    std::mt19937_64 rng(mix_seed(mix_seed(seed, 0x0A0D), i));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double u = unif(rng) * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    Index quad = static_cast<Index>(std::min<std::ptrdiff_t>(it - cdf.begin(), static_cast<std::ptrdiff_t>(cdf.size()) - 1));
    while (density[quad] == 0.0 && quad > 0) --quad;
    q.quadrant[i] = quad;
    for (Index k = 0; k < n; ++k) {
      const double mag = std::abs(normal(rng));
      q.raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = ((quad >> k) & 1U) ? mag : -mag;
    }
  });
  q.relu = q.raw.cwiseMax(0.0);
  return q;
}

/// Mass `alone` on the quadrant where only `unit` is positive, the rest spread
/// evenly over all other quadrants.
inline std::vector<double> fires_alone_density(Index n, Index unit, double alone) {
  const std::size_t count = std::size_t{1} << n;
  std::vector<double> d(count, (1.0 - alone) / static_cast<double>(count - 1));
  d[std::size_t{1} << unit] = alone;
  return d;
}

/// Solid-colour images, one hue per quadrant, so the colour metric reads the
/// quadrant identity.
inline ImageSet quadrant_images(const std::vector<Index>& quadrant, Index n_quadrants, Index size = 8) {
  ImageSet s;
  s.count = quadrant.size();
  s.height = s.width = size;
  s.pixels.resize(s.count * s.image_stride());
  for (Index i = 0; i < s.count; ++i) {
    const auto rgb = hue_to_rgb(static_cast<double>(quadrant[i]) / static_cast<double>(n_quadrants));
    for (Index p = 0; p < size * size; ++p)
      for (int c = 0; c < 3; ++c) s.pixels[i * s.image_stride() + 3 * p + c] = static_cast<std::uint8_t>(std::lround(255.0 * rgb[c]));
  }
  return s;
}

}  // namespace superscope::synth
