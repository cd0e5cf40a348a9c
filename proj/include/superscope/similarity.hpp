#pragma once

// Image similarity at three levels: mean colour, perceptual embedding, label.
// Larger is more similar. Colour and embedding are negated distances (so the
// maximum, 0, is reached on identical inputs); label is 1 on a match, else 0.

#include "superscope/data_model.hpp"

#include <cmath>
#include <numbers>
#include <shared_mutex>
#include <unordered_map>

namespace superscope {

enum class MetricKind { Color, Embedding, Label };
enum class ChannelMode { RGB, Grey };

struct MetricSpec {
  MetricKind kind = MetricKind::Color;
  std::vector<std::string> layers;  // Embedding only; empty means all layers
  ChannelMode channels = ChannelMode::RGB;

  std::string name() const {
    switch (kind) {
      case MetricKind::Color: return channels == ChannelMode::RGB ? "color" : "color_grey";
      case MetricKind::Label: return "label";
      case MetricKind::Embedding: {
        std::string n = "embedding";
        for (const auto& l : layers) n += ":" + l;
        return n;
      }
    }
    return "?";
  }

  double self_similarity() const { return kind == MetricKind::Label ? 1.0 : 0.0; }
};

inline MetricSpec metric_from_json(const json& j) {
  MetricSpec s;
  const std::string kind = j.is_string() ? j.get<std::string>() : j.at("metric").get<std::string>();
  if (kind == "color") {
    s.kind = MetricKind::Color;
  } else if (kind == "embedding" || kind == "lpips") {
    s.kind = MetricKind::Embedding;
  } else if (kind == "label") {
    s.kind = MetricKind::Label;
  } else {
    fail(ErrorCode::ConfigInvalid, "unknown metric '" + kind + "'");
  }
  if (j.is_object()) {
    if (j.contains("layers")) s.layers = j.at("layers").get<std::vector<std::string>>();
    if (j.contains("channels")) {
      const auto ch = j.at("channels").get<std::string>();
      if (ch == "rgb") {
        s.channels = ChannelMode::RGB;
      } else if (ch == "grey" || ch == "gray") {
        s.channels = ChannelMode::Grey;
      } else {
        fail(ErrorCode::ConfigInvalid, "channels must be rgb or grey");
      }
    }
  }
  return s;
}

inline json to_json(const MetricSpec& s) {
  json j;
  j["metric"] = s.kind == MetricKind::Color ? "color" : s.kind == MetricKind::Label ? "label" : "embedding";
  if (s.kind == MetricKind::Embedding && !s.layers.empty()) j["layers"] = s.layers;
  if (s.kind == MetricKind::Color) j["channels"] = s.channels == ChannelMode::RGB ? "rgb" : "grey";
  return j;
}

// --- element-wise metrics ----------------------------------------------------

inline double color_sim(Index i, Index j, const ImageSet& images, ChannelMode mode = ChannelMode::RGB) {
  if (i >= images.count || j >= images.count) fail(ErrorCode::IndexOutOfRange, "color_sim");
  const auto a = images.channel_means(i);
  const auto b = images.channel_means(j);
  if (mode == ChannelMode::Grey) return -std::abs((a[0] + a[1] + a[2]) / 3.0 - (b[0] + b[1] + b[2]) / 3.0);
  double d2 = 0.0;
  for (int c = 0; c < 3; ++c) d2 += (a[c] - b[c]) * (a[c] - b[c]);
  return -std::sqrt(d2);
}

inline double label_sim(Index i, Index j, const LabelSet& labels) {
  if (i >= labels.labels.size() || j >= labels.labels.size()) fail(ErrorCode::IndexOutOfRange, "label_sim");
  return labels.labels[i] == labels.labels[j] ? 1.0 : 0.0;
}

inline std::vector<std::size_t> resolve_layers(const EmbeddingSet& emb, const std::vector<std::string>& subset) {
  std::vector<std::size_t> idx;
  if (subset.empty()) {
    for (std::size_t l = 0; l < emb.layers.size(); ++l) idx.push_back(l);
  } else {
    for (const auto& name : subset) idx.push_back(emb.layer_index(name));
  }
  if (idx.empty()) fail(ErrorCode::UnknownLayer, "embedding set has no layers");
  return idx;
}

inline double embed_sim(Index i, Index j, const EmbeddingSet& emb, const std::vector<std::string>& layer_subset = {}) {
  const auto layers = resolve_layers(emb, layer_subset);
  if (i >= emb.images() || j >= emb.images()) fail(ErrorCode::IndexOutOfRange, "embed_sim");
  double d = 0.0;
  for (auto l : layers) d += (emb.layers[l].row(i) - emb.layers[l].row(j)).squaredNorm();
  return -d;
}

// --- bound metric ------------------------------------------------------------

/// A MetricSpec bound to a bundle, with per-image features precomputed.
/// Immutable after construction and safe to call from several threads.
class Similarity {
 public:
  Similarity(const MetricSpec& spec, const DatasetBundle& bundle) : spec_(spec) {
    count_ = bundle.images_count();
    switch (spec.kind) {
      case MetricKind::Color: {
        if (!bundle.images) fail(ErrorCode::MissingBundleMember, "color metric needs images");
        const auto& im = *bundle.images;
        const std::size_t dims = spec.channels == ChannelMode::RGB ? 3 : 1;
        features_.resize(static_cast<Eigen::Index>(im.count), static_cast<Eigen::Index>(dims));
        for (Index i = 0; i < im.count; ++i) {
          const auto m = im.channel_means(i);
          if (dims == 3) {
            for (int c = 0; c < 3; ++c) features_(static_cast<Eigen::Index>(i), c) = m[c];
          } else {
            features_(static_cast<Eigen::Index>(i), 0) = (m[0] + m[1] + m[2]) / 3.0;
          }
        }
        break;
      }
      case MetricKind::Embedding: {
        if (!bundle.embeddings) fail(ErrorCode::MissingBundleMember, "embedding metric needs embeddings");
        const auto& emb = *bundle.embeddings;
        const auto layers = resolve_layers(emb, spec.layers);
        Eigen::Index width = 0;
        for (auto l : layers) width += emb.layers[l].cols();
        features_.resize(static_cast<Eigen::Index>(emb.images()), width);
        Eigen::Index off = 0;
        for (auto l : layers) {
          features_.middleCols(off, emb.layers[l].cols()) = emb.layers[l];
          off += emb.layers[l].cols();
        }
        break;
      }
      case MetricKind::Label: {
        if (!bundle.labels) fail(ErrorCode::MissingBundleMember, "label metric needs labels");
        labels_ = bundle.labels->labels;
        break;
      }
    }
  }

  const MetricSpec& spec() const { return spec_; }
  Index size() const { return count_; }

  double operator()(Index i, Index j) const {
    if (i >= count_ || j >= count_) fail(ErrorCode::IndexOutOfRange, "similarity index");
    if (i == j) return spec_.self_similarity();
    switch (spec_.kind) {
      case MetricKind::Label: return labels_[i] == labels_[j] ? 1.0 : 0.0;
      case MetricKind::Color: {
        // summing in index order keeps sim(i, j) == sim(j, i) bit for bit
        const auto a = std::min(i, j), b = std::max(i, j);
        const double d2 = (features_.row(static_cast<Eigen::Index>(a)) - features_.row(static_cast<Eigen::Index>(b))).squaredNorm();
        return -std::sqrt(d2);
      }
      case MetricKind::Embedding: {
        const auto a = std::min(i, j), b = std::max(i, j);
        return -(features_.row(static_cast<Eigen::Index>(a)) - features_.row(static_cast<Eigen::Index>(b))).squaredNorm();
      }
    }
    return 0.0;
  }

 private:
  MetricSpec spec_;
  Index count_ = 0;
  RowMatrix features_;
  std::vector<int> labels_;
};

/// Memoizes pair similarities; the stored value is whatever the wrapped metric
/// returns, so which worker fills an entry never matters.
class CachedSimilarity {
 public:
  explicit CachedSimilarity(const Similarity& sim) : sim_(sim) {}

  double operator()(Index i, Index j) const {
    const std::uint64_t key = (static_cast<std::uint64_t>(std::min(i, j)) << 32) | std::max(i, j);
    {
      std::shared_lock lock(mutex_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    const double v = sim_(i, j);
    std::unique_lock lock(mutex_);
    cache_.emplace(key, v);
    return v;
  }

  const MetricSpec& spec() const { return sim_.spec(); }
  std::size_t entries() const {
    std::shared_lock lock(mutex_);
    return cache_.size();
  }

 private:
  const Similarity& sim_;
  mutable std::shared_mutex mutex_;
  mutable std::unordered_map<std::uint64_t, double> cache_;
};

template <typename Sim>
RowMatrix sim_matrix(const std::vector<Index>& indices, const Sim& sim) {
  const auto n = static_cast<Eigen::Index>(indices.size());
  RowMatrix s(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    s(a, a) = sim(indices[a], indices[a]);
    for (Eigen::Index b = a + 1; b < n; ++b) {
      s(a, b) = sim(indices[a], indices[b]);
      s(b, a) = s(a, b);
    }
  }
  return s;
}

}  // namespace superscope
