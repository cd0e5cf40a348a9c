#pragma once

#include "superscope/core.hpp"
#include "superscope/npy.hpp"

#include <json.hpp>

#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace superscope {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// Per-image, per-unit responses. Rows are images, columns are units.
struct ActivationMatrix {
  RowMatrix values;
  std::vector<std::string> unit_names;
  std::string source_tag;

  Index images() const { return static_cast<Index>(values.rows()); }
  Index units() const { return static_cast<Index>(values.cols()); }

  void validate() const {
    if (values.rows() < 1 || values.cols() < 1) fail(ErrorCode::ShapeMismatch, "activations must be at least 1x1");
    if (!values.allFinite()) fail(ErrorCode::BadFormat, "activations contain non-finite values");
    if (!unit_names.empty() && unit_names.size() != units())
      fail(ErrorCode::ShapeMismatch, "unit_names length differs from unit count");
  }
};

/// Packed D x H x W x 3 uint8 tensor.
struct ImageSet {
  std::vector<std::uint8_t> pixels;
  Index count = 0;
  Index height = 0;
  Index width = 0;
  std::vector<std::string> names;

  std::size_t image_stride() const { return height * width * 3; }

  std::uint8_t at(Index image, Index y, Index x, Index c) const {
    return pixels[image * image_stride() + (y * width + x) * 3 + c];
  }

  /// Spatial mean per channel, rescaled to [0, 1].
  std::array<double, 3> channel_means(Index image) const {
    if (image >= count) fail(ErrorCode::IndexOutOfRange, "image " + std::to_string(image));
    std::array<double, 3> sum{0.0, 0.0, 0.0};
    const std::uint8_t* p = pixels.data() + image * image_stride();
    for (std::size_t k = 0; k < height * width; ++k)
      for (int c = 0; c < 3; ++c) sum[c] += p[3 * k + c];
    const double scale = 1.0 / (255.0 * static_cast<double>(height * width));
    for (auto& s : sum) s *= scale;
    return sum;
  }

  void validate() const {
    if (height < 1 || width < 1) fail(ErrorCode::ShapeMismatch, "images need H, W >= 1");
    if (pixels.size() != count * image_stride()) fail(ErrorCode::ShapeMismatch, "pixel buffer size");
    if (!names.empty() && names.size() != count) fail(ErrorCode::RowCountMismatch, "images.names");
  }
};

struct LabelSet {
  std::vector<int> labels;
  std::vector<std::string> class_names;

  void validate() const {
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= class_names.size())
        fail(ErrorCode::IndexOutOfRange, "label " + std::to_string(labels[i]) + " at index " + std::to_string(i));
  }
};

/// Precomputed per-image embeddings; the perceptual distance between two images
/// is the sum over layers of squared Euclidean distances.
struct EmbeddingSet {
  std::vector<std::string> layer_names;
  std::vector<RowMatrix> layers;

  Index images() const { return layers.empty() ? 0 : static_cast<Index>(layers.front().rows()); }

  std::size_t layer_index(const std::string& name) const {
    for (std::size_t l = 0; l < layer_names.size(); ++l)
      if (layer_names[l] == name) return l;
    fail(ErrorCode::UnknownLayer, "embedding layer '" + name + "'");
  }

  void validate() const {
    if (layer_names.size() != layers.size()) fail(ErrorCode::ShapeMismatch, "embedding layer names");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      if (layers[l].rows() != layers.front().rows())
        fail(ErrorCode::RowCountMismatch, "embedding layer '" + layer_names[l] + "'");
      if (!layers[l].allFinite()) fail(ErrorCode::BadFormat, "embedding layer '" + layer_names[l] + "' not finite");
    }
  }
};

struct DatasetBundle {
  ActivationMatrix activations;
  std::optional<ImageSet> images;
  std::optional<LabelSet> labels;
  std::optional<EmbeddingSet> embeddings;

  Index images_count() const { return activations.images(); }

  /// Rejects any member whose row count differs from the activations.
  void validate() const {
    activations.validate();
    const Index d = activations.images();
    if (images) {
      images->validate();
      if (images->count != d) fail(ErrorCode::RowCountMismatch, "images");
    }
    if (labels) {
      labels->validate();
      if (labels->labels.size() != d) fail(ErrorCode::RowCountMismatch, "labels");
    }
    if (embeddings) {
      embeddings->validate();
      if (embeddings->images() != d) fail(ErrorCode::RowCountMismatch, "embeddings");
    }
  }
};

/// One human 2AFC record: which of two queries people picked as the strongly
/// activating one, given 9 positive and 9 negative reference images.
struct HumanTrialRecord {
  int direction_id = 0;
  std::vector<Index> ref_pos;
  std::vector<Index> ref_neg;
  Index query_a = 0;
  Index query_b = 0;
  bool correct_is_a = true;
  double human_choice_fraction = 0.5;  // fraction of participants choosing query_a

  void validate(Index image_count) const {
    if (ref_pos.size() != 9 || ref_neg.size() != 9) fail(ErrorCode::BadFormat, "trial needs 9 + 9 references");
    const auto check = [&](Index i) {
      if (i >= image_count) fail(ErrorCode::IndexOutOfRange, "trial image index " + std::to_string(i));
    };
    for (auto i : ref_pos) check(i);
    for (auto i : ref_neg) check(i);
    check(query_a);
    check(query_b);
    for (auto q : {query_a, query_b}) {
      if (std::find(ref_pos.begin(), ref_pos.end(), q) != ref_pos.end() ||
          std::find(ref_neg.begin(), ref_neg.end(), q) != ref_neg.end())
        fail(ErrorCode::BadFormat, "query " + std::to_string(q) + " appears in a reference set");
    }
    if (!(human_choice_fraction >= 0.0 && human_choice_fraction <= 1.0))
      fail(ErrorCode::BadFormat, "human_choice_fraction outside [0, 1]");
  }
};

inline json to_json(const HumanTrialRecord& r) {
  return json{{"direction_id", r.direction_id},       {"ref_pos", r.ref_pos},  {"ref_neg", r.ref_neg},
              {"query_a", r.query_a},                 {"query_b", r.query_b},  {"correct", r.correct_is_a ? "a" : "b"},
              {"human_choice_fraction", r.human_choice_fraction}};
}

inline HumanTrialRecord human_trial_from_json(const json& j) {
  HumanTrialRecord r;
  try {
    r.direction_id = j.at("direction_id").get<int>();
    r.ref_pos = j.at("ref_pos").get<std::vector<Index>>();
    r.ref_neg = j.at("ref_neg").get<std::vector<Index>>();
    r.query_a = j.at("query_a").get<Index>();
    r.query_b = j.at("query_b").get<Index>();
    const auto correct = j.at("correct").get<std::string>();
    if (correct != "a" && correct != "b") fail(ErrorCode::BadFormat, "correct must be \"a\" or \"b\"");
    r.correct_is_a = correct == "a";
    r.human_choice_fraction = j.at("human_choice_fraction").get<double>();
  } catch (const json::exception& e) {
    fail(ErrorCode::BadFormat, std::string("trial record: ") + e.what());
  }
  return r;
}

/// JSON-lines, one trial per line; blank lines are skipped.
inline std::vector<HumanTrialRecord> read_human_trials(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<HumanTrialRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(human_trial_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      fail(ErrorCode::BadFormat, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      fail(e.code(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline void write_human_trials(const fs::path& path, const std::vector<HumanTrialRecord>& records) {
  std::string text;
  for (const auto& r : records) text += to_json(r).dump() + "\n";
  npy::write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline void write_text_atomic(const fs::path& path, const std::string& text) {
  npy::write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    fail(ErrorCode::BadFormat, path.string() + ": " + e.what());
  }
}

// --- labels CSV ------------------------------------------------------------

/// Parses `index,label_id` rows (an optional header line is skipped).
inline std::vector<int> read_label_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<std::pair<long, int>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) fail(ErrorCode::BadFormat, path.string() + ": expected index,label_id");
    try {
      rows.emplace_back(std::stol(line.substr(0, comma)), std::stoi(line.substr(comma + 1)));
    } catch (const std::exception&) {
      if (rows.empty()) continue;  // header
      fail(ErrorCode::BadFormat, path.string() + ": bad row '" + line + "'");
    }
  }
  std::vector<int> labels(rows.size(), -1);
  for (auto [idx, label] : rows) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= rows.size() || labels[idx] != -1)
      fail(ErrorCode::BadFormat, path.string() + ": indices must cover 0..n-1 exactly once");
    labels[idx] = label;
  }
  return labels;
}

inline void write_label_csv(const fs::path& path, const std::vector<int>& labels) {
  std::string text = "index,label_id\n";
  for (std::size_t i = 0; i < labels.size(); ++i) text += std::to_string(i) + "," + std::to_string(labels[i]) + "\n";
  write_text_atomic(path, text);
}

// --- images ----------------------------------------------------------------

inline ImageSet load_images(const fs::path& path) {
  const npy::Array a = npy::read(path);
  if (a.dtype != npy::Dtype::UInt8) fail(ErrorCode::UnsupportedDtype, path.string() + ": images must be uint8");
  if (a.shape.size() != 4 || a.shape[3] != 3)
    fail(ErrorCode::ShapeMismatch, path.string() + ": images must be D x H x W x 3");
  ImageSet s;
  s.count = a.shape[0];
  s.height = a.shape[1];
  s.width = a.shape[2];
  s.pixels = a.bytes;
  return s;
}

inline void save_images(const fs::path& path, const ImageSet& s) {
  npy::Array a;
  a.dtype = npy::Dtype::UInt8;
  a.shape = {s.count, s.height, s.width, 3};
  a.bytes = s.pixels;
  npy::write(path, a);
}

/// Flattened image in [0, 1], the input convention of model oracles.
inline Vector image_vector(const ImageSet& images, Index i) {
  const std::uint8_t* px = images.pixels.data() + i * images.image_stride();
  Vector x(static_cast<Eigen::Index>(images.image_stride()));
  for (Eigen::Index k = 0; k < x.size(); ++k) x(k) = static_cast<double>(px[k]) / 255.0;
  return x;
}

// --- manifest --------------------------------------------------------------

namespace detail {

inline std::string file_entry(const json& j, const std::string& member) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_object() && j.contains("file")) return j.at("file").get<std::string>();
  fail(ErrorCode::BadFormat, "manifest member '" + member + "' needs a file path");
}

inline std::vector<std::string> string_list(const json& j, const fs::path& base) {
  if (j.is_array()) return j.get<std::vector<std::string>>();
  if (j.is_string()) return read_json(base / j.get<std::string>()).get<std::vector<std::string>>();
  fail(ErrorCode::BadFormat, "expected a list of strings or a JSON file reference");
}

}  // namespace detail

/// Loads a manifest-described bundle. Paths are relative to the manifest's
/// directory. Row counts are checked here, never later.
inline DatasetBundle load_bundle(const fs::path& manifest_path) {
  const json m = read_json(manifest_path);
  if (!m.is_object()) fail(ErrorCode::BadFormat, "manifest must be a JSON object");
  const fs::path base = manifest_path.parent_path();
  DatasetBundle b;
  if (!m.contains("activations")) fail(ErrorCode::MissingActivations, manifest_path.string());
  try {
    const json& act = m.at("activations");
    b.activations.values = npy::load_matrix(base / detail::file_entry(act, "activations"));
    if (act.is_object() && act.contains("unit_names"))
      b.activations.unit_names = detail::string_list(act.at("unit_names"), base);
    else if (m.contains("unit_names"))
      b.activations.unit_names = detail::string_list(m.at("unit_names"), base);
    if (m.contains("source_tag")) b.activations.source_tag = m.at("source_tag").get<std::string>();

    if (m.contains("images") && !m.at("images").is_null()) {
      const json& im = m.at("images");
      b.images = load_images(base / detail::file_entry(im, "images"));
      if (im.is_object() && im.contains("names")) b.images->names = detail::string_list(im.at("names"), base);
    }
    if (m.contains("labels") && !m.at("labels").is_null()) {
      const json& lb = m.at("labels");
      LabelSet ls;
      ls.labels = read_label_csv(base / detail::file_entry(lb, "labels"));
      if (lb.is_object() && lb.contains("class_names")) {
        ls.class_names = detail::string_list(lb.at("class_names"), base);
      } else {
        int max_label = -1;
        for (int l : ls.labels) max_label = std::max(max_label, l);
        for (int c = 0; c <= max_label; ++c) ls.class_names.push_back(std::to_string(c));
      }
      b.labels = std::move(ls);
    }
    if (m.contains("embeddings") && !m.at("embeddings").is_null()) {
      EmbeddingSet es;
      for (const auto& layer : m.at("embeddings").at("layers")) {
        es.layer_names.push_back(layer.at("name").get<std::string>());
        es.layers.push_back(npy::load_matrix(base / layer.at("file").get<std::string>()));
      }
      b.embeddings = std::move(es);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::BadFormat, manifest_path.string() + ": " + e.what());
  }
  b.validate();
  return b;
}

/// Writes every present member plus `manifest.json` into `dir`. `extra` keys
/// are merged into the manifest (e.g. oracle weights written by the caller).
inline fs::path save_bundle(const DatasetBundle& b, const fs::path& dir, const json& extra = json::object()) {
  fs::create_directories(dir);
  b.validate();
  json m = json::object();
  npy::save_matrix(dir / "activations.npy", b.activations.values);
  m["activations"] = json{{"file", "activations.npy"}};
  if (!b.activations.unit_names.empty()) m["activations"]["unit_names"] = b.activations.unit_names;
  if (!b.activations.source_tag.empty()) m["source_tag"] = b.activations.source_tag;
  if (b.images) {
    save_images(dir / "images.npy", *b.images);
    m["images"] = json{{"file", "images.npy"}};
    if (!b.images->names.empty()) m["images"]["names"] = b.images->names;
  }
  if (b.labels) {
    write_label_csv(dir / "labels.csv", b.labels->labels);
    write_text_atomic(dir / "classes.json", json(b.labels->class_names).dump(2) + "\n");
    m["labels"] = json{{"file", "labels.csv"}, {"class_names", "classes.json"}};
  }
  if (b.embeddings) {
    json layers = json::array();
    for (std::size_t l = 0; l < b.embeddings->layers.size(); ++l) {
      const std::string file = "emb_" + b.embeddings->layer_names[l] + ".npy";
      npy::save_matrix(dir / file, b.embeddings->layers[l]);
      layers.push_back(json{{"name", b.embeddings->layer_names[l]}, {"file", file}});
    }
    m["embeddings"] = json{{"layers", layers}, {"metric_norm", "sum_sq_layer_dist"}};
  }
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  const fs::path manifest = dir / "manifest.json";
  write_text_atomic(manifest, m.dump(2) + "\n");
  return manifest;
}

}  // namespace superscope
