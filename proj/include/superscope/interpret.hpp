#pragma once

// Most exciting images, the Interpretability Index, and the simulated
// two-alternative forced-choice task.

#include "superscope/similarity.hpp"
#include "superscope/stats.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <span>

namespace superscope {

inline constexpr Index kDefaultM = 5;
inline constexpr Index kReferenceCount = 9;

struct MeiSet {
  int direction_id = 0;
  std::vector<Index> top;  // descending score, ties to the lower index
  std::vector<Index> bottom;  // ascending score, ties to the lower index
  std::vector<double> top_scores;
  std::vector<double> bottom_scores;
  bool degenerate = false;  // top and bottom overlap
};

/// Image indices sorted by descending score; equal scores keep index order.
inline std::vector<Index> order_descending(std::span<const double> scores) {
  std::vector<Index> idx(scores.size());
  std::iota(idx.begin(), idx.end(), Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) { return scores[a] > scores[b]; });
  return idx;
}

inline std::vector<Index> order_ascending(std::span<const double> scores) {
  std::vector<Index> idx(scores.size());
  std::iota(idx.begin(), idx.end(), Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) { return scores[a] < scores[b]; });
  return idx;
}

/// Top-M indices only, without sorting the whole column.
inline std::vector<Index> top_m(std::span<const double> scores, Index m) {
  std::vector<Index> idx(scores.size());
  std::iota(idx.begin(), idx.end(), Index{0});
  m = std::min<Index>(m, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m), idx.end(), [&](Index a, Index b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  });
  idx.resize(m);
  return idx;
}

inline MeiSet mei(std::span<const double> scores, Index m = kDefaultM, int direction_id = 0) {
  if (m < 1 || scores.size() < 2 * m)
    fail(ErrorCode::TooFewImages, std::to_string(scores.size()) + " images cannot supply 2 x " + std::to_string(m) + " MEIs");
  MeiSet s;
  s.direction_id = direction_id;
  s.top = top_m(scores, m);
  std::vector<Index> idx(scores.size());
  std::iota(idx.begin(), idx.end(), Index{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m), idx.end(), [&](Index a, Index b) {
    return scores[a] < scores[b] || (scores[a] == scores[b] && a < b);
  });
  s.bottom.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m));
  for (auto i : s.top) s.top_scores.push_back(scores[i]);
  for (auto i : s.bottom) s.bottom_scores.push_back(scores[i]);
  for (auto i : s.top)
    if (std::find(s.bottom.begin(), s.bottom.end(), i) != s.bottom.end()) s.degenerate = true;
  return s;
}

inline std::vector<double> column(const RowMatrix& m, Eigen::Index c) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) out[r] = m(r, c);
  return out;
}

/// II = (1/M) sum_j sum_k sim(x_j, x_k) over the top-M images, diagonal included.
template <typename Sim>
double interpretability_index(const std::vector<Index>& top, const Sim& sim) {
  if (top.empty()) fail(ErrorCode::TooFewImages, "empty MEI set");
  double total = 0.0;
  for (auto j : top)
    for (auto k : top) total += sim(j, k);
  return total / static_cast<double>(top.size());
}

template <typename Sim>
double interpretability_index(const MeiSet& s, const Sim& sim) {
  return interpretability_index(s.top, sim);
}

/// II for every column of a D x K score matrix.
template <typename Sim>
std::vector<double> ii_per_direction(const RowMatrix& scores, const Sim& sim, Index m = kDefaultM) {
  std::vector<double> out(static_cast<std::size_t>(scores.cols()));
  parallel_for(out.size(), [&](std::size_t k) {
    const auto col = column(scores, static_cast<Eigen::Index>(k));
    out[k] = interpretability_index(mei(col, m, static_cast<int>(k)), sim);
  });
  return out;
}

// --- psychophysics ------------------------------------------------------------

struct Trial {
  int direction_id = 0;
  std::vector<Index> ref_pos;
  std::vector<Index> ref_neg;
  Index query_pos = 0;
  Index query_neg = 0;
  double band_width = 1.0;
  std::uint64_t trial_seed = 0;
};

struct PsychoResult {
  int direction_id = 0;
  Index n_trials = 0;
  double correct = 0.0;  // ties count one half
  double accuracy = 0.0;
  double mean_margin = 0.0;
};

/// Seed for one (direction, band width) trial batch.
inline std::uint64_t trial_batch_seed(std::uint64_t root, int direction_id, double w) {
  return mix_seed(mix_seed(root, static_cast<std::uint64_t>(direction_id) + 1), hash_double(w));
}

/// Trials whose references sit at the extremes of a quantile band of width w
/// around the median: positives from [0.5, 0.5 + w/2], negatives from
/// [0.5 - w/2, 0.5). Queries are drawn from what remains of each pool.
inline std::vector<Trial> build_trials(std::span<const double> scores, double w, Index n_trials, std::uint64_t seed,
                                       int direction_id = 0, int max_attempts = 100) {
  if (!(w > 0.0 && w <= 1.0)) fail(ErrorCode::ConfigInvalid, "band width must lie in (0, 1]");
  const Index d = scores.size();
  if (d < 2) fail(ErrorCode::BandTooNarrow, "too few images");
  const auto asc = order_ascending(scores);
  std::vector<Index> pos_pool, neg_pool;  // both kept in ascending score order
  const double denom = static_cast<double>(d - 1);
  const double eps = 1e-12;
  for (Index r = 0; r < d; ++r) {
    const double q = static_cast<double>(r) / denom;
    if (q >= 0.5 - eps && q <= 0.5 + w / 2 + eps)
      pos_pool.push_back(asc[r]);
    else if (q >= 0.5 - w / 2 - eps && q < 0.5 - eps)
      neg_pool.push_back(asc[r]);
  }
  if (pos_pool.size() <= kReferenceCount || neg_pool.size() <= kReferenceCount)
    fail(ErrorCode::BandTooNarrow, "band w=" + std::to_string(w) + " leaves " + std::to_string(pos_pool.size()) +
                                       " positive and " + std::to_string(neg_pool.size()) + " negative images");

  Trial base;
  base.direction_id = direction_id;
  base.band_width = w;
  base.ref_pos.assign(pos_pool.end() - kReferenceCount, pos_pool.end());
  std::reverse(base.ref_pos.begin(), base.ref_pos.end());
  base.ref_neg.assign(neg_pool.begin(), neg_pool.begin() + kReferenceCount);
  const std::vector<Index> pos_rest(pos_pool.begin(), pos_pool.end() - kReferenceCount);
  const std::vector<Index> neg_rest(neg_pool.begin() + kReferenceCount, neg_pool.end());

  std::vector<Trial> trials;
  trials.reserve(n_trials);
  for (Index t = 0; t < n_trials; ++t) {
    Trial tr = base;
    tr.trial_seed = mix_seed(seed, t);
    std::mt19937_64 rng(tr.trial_seed);
    std::uniform_int_distribution<std::size_t> pick_pos(0, pos_rest.size() - 1), pick_neg(0, neg_rest.size() - 1);
    bool ok = false;
    for (int attempt = 0; attempt < max_attempts && !ok; ++attempt) {
      tr.query_pos = pos_rest[pick_pos(rng)];
      tr.query_neg = neg_rest[pick_neg(rng)];
      ok = scores[tr.query_pos] > scores[tr.query_neg];
    }
    if (!ok) fail(ErrorCode::BandTooNarrow, "no query pair with distinct scores in band w=" + std::to_string(w));
    trials.push_back(std::move(tr));
  }
  return trials;
}

/// max over references of sim(query, ref).
template <typename Sim>
double sim_to_set(Index query, const std::vector<Index>& refs, const Sim& sim) {
  double best = -std::numeric_limits<double>::infinity();
  for (auto r : refs) best = std::max(best, sim(query, r));
  return best;
}

/// The model's evidence for `query` being the strongly activating image.
template <typename Sim>
double query_evidence(Index query, const std::vector<Index>& ref_pos, const std::vector<Index>& ref_neg, const Sim& sim,
                      bool use_negative_refs) {
  const double pos = sim_to_set(query, ref_pos, sim);
  return use_negative_refs ? pos - sim_to_set(query, ref_neg, sim) : pos;
}

template <typename Sim>
PsychoResult run_psychophysics(const std::vector<Trial>& trials, const Sim& sim, bool use_negative_refs = false) {
  if (trials.empty()) fail(ErrorCode::EmptyTrials, "no trials");
  PsychoResult r;
  r.direction_id = trials.front().direction_id;
  r.n_trials = trials.size();
  double margin_sum = 0.0;
  for (const auto& t : trials) {
    const double margin = query_evidence(t.query_pos, t.ref_pos, t.ref_neg, sim, use_negative_refs) -
                          query_evidence(t.query_neg, t.ref_pos, t.ref_neg, sim, use_negative_refs);
    r.correct += margin > 0.0 ? 1.0 : margin == 0.0 ? 0.5 : 0.0;
    margin_sum += margin;
  }
  r.accuracy = r.correct / static_cast<double>(r.n_trials);
  r.mean_margin = margin_sum / static_cast<double>(r.n_trials);
  return r;
}

// --- agreement with human choices -------------------------------------------------

struct HumanAgreement {
  double agreement_rate = 0.0;
  double auc = 0.5;
  bool auc_fallback = false;  // one human-majority class was empty
  Index used = 0;             // records with a human majority
  Index excluded = 0;         // records with an exact 50/50 split
};

/// Model margin = simToSet(query_a) - simToSet(query_b) over the positive
/// references. Agreement compares the sign with the human majority (a model
/// tie counts one half); AUC ranks margins against the majority choice.
template <typename Sim>
HumanAgreement human_agreement(const std::vector<HumanTrialRecord>& records, const Sim& sim, Index image_count,
                               bool use_negative_refs = false) {
  if (records.empty()) fail(ErrorCode::EmptyTrials, "no human trial records");
  HumanAgreement h;
  std::vector<double> margins;
  std::vector<bool> chose_a;
  double agree = 0.0;
  for (const auto& rec : records) {
    rec.validate(image_count);
    if (rec.human_choice_fraction == 0.5) {
      ++h.excluded;
      continue;
    }
    const double margin = query_evidence(rec.query_a, rec.ref_pos, rec.ref_neg, sim, use_negative_refs) -
                          query_evidence(rec.query_b, rec.ref_pos, rec.ref_neg, sim, use_negative_refs);
    const bool human_a = rec.human_choice_fraction > 0.5;
    agree += margin == 0.0 ? 0.5 : ((margin > 0.0) == human_a ? 1.0 : 0.0);
    margins.push_back(margin);
    chose_a.push_back(human_a);
  }
  h.used = margins.size();
  h.agreement_rate = h.used ? agree / static_cast<double>(h.used) : std::numeric_limits<double>::quiet_NaN();
  const double auc = stats::roc_auc(margins, chose_a);
  if (std::isnan(auc)) {
    h.auc = 0.5;
    h.auc_fallback = true;
  } else {
    h.auc = auc;
  }
  return h;
}

// --- quantile panels ------------------------------------------------------------

struct PanelRow {
  double quantile = 0.0;
  double target_ii = 0.0;
  int direction_id = 0;
  double ii = 0.0;
  std::vector<Index> top;
};

/// For each quantile of the II distribution, the direction whose II is nearest
/// (ties to the lower id) and its top-M images from `scores`.
inline std::vector<PanelRow> quantile_panel(const std::vector<double>& ii, const RowMatrix& scores, Index m = kDefaultM,
                                            const std::vector<double>& quantiles = {0.0, 0.25, 0.5, 0.75, 1.0}) {
  if (ii.size() != static_cast<std::size_t>(scores.cols())) fail(ErrorCode::LengthMismatch, "one II per direction expected");
  std::vector<PanelRow> rows;
  for (double q : quantiles) {
    PanelRow row;
    row.quantile = q;
    row.target_ii = stats::quantile(ii, q);
    std::size_t best = 0;
    for (std::size_t k = 1; k < ii.size(); ++k)
      if (std::abs(ii[k] - row.target_ii) < std::abs(ii[best] - row.target_ii)) best = k;
    row.direction_id = static_cast<int>(best);
    row.ii = ii[best];
    row.top = top_m(column(scores, static_cast<Eigen::Index>(best)), m);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace superscope
