#include "helpers.hpp"

#include <algorithm>

using namespace testing;

namespace {

/// A metric that returns the same value for every pair.
struct ConstantSim {
  double c;
  double operator()(Index, Index) const { return c; }
};

DatasetBundle coloured_bundle(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> byte(0, 255);
  std::vector<std::array<std::uint8_t, 3>> colours(n);
  for (auto& c : colours)
    for (auto& v : c) v = static_cast<std::uint8_t>(byte(rng));
  DatasetBundle b;
  b.activations.values = random_matrix(n, 2, seed + 1);
  b.images = uniform_images(colours, 2);
  EmbeddingSet e;
  e.layer_names = {"noise"};
  e.layers = {random_matrix(n, 3, seed + 2)};
  b.embeddings = e;
  return b;
}

}  // namespace

TEST_CASE("top and bottom images") {
  const std::vector<double> s{0.1, 0.9, 0.5, 0.3};
  const auto m = mei(s, 1);
  CHECK(m.top == std::vector<Index>{1});
  CHECK(m.bottom == std::vector<Index>{0});
  CHECK_FALSE(m.degenerate);
}

TEST_CASE("ties go to the lower index") {
  const std::vector<double> s(4, 2.0);
  const auto m = mei(s, 2);
  CHECK(m.top == std::vector<Index>{0, 1});
  CHECK(m.bottom == std::vector<Index>{0, 1});
  CHECK(m.degenerate);
}

TEST_CASE("too few images for the MEI sets") {
  const std::vector<double> s{1, 2, 3};
  CHECK(code_of([&] { mei(s, 2); }) == ErrorCode::TooFewImages);
}

TEST_CASE("partial selection matches a full sort") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u;
  std::vector<double> s(1000);
  for (auto& v : s) v = u(rng);
  const auto m = mei(s, 5);
  const auto desc = order_descending(s);
  const auto asc = order_ascending(s);
  CHECK(m.top == std::vector<Index>(desc.begin(), desc.begin() + 5));
  CHECK(m.bottom == std::vector<Index>(asc.begin(), asc.begin() + 5));
}

TEST_CASE("II on label sets") {
  DatasetBundle b;
  b.activations.values = RowMatrix::Zero(5, 1);
  b.labels = LabelSet{{0, 0, 0, 0, 0}, {"a", "b"}};
  const Similarity same({MetricKind::Label}, b);
  CHECK(interpretability_index(std::vector<Index>{0, 1, 2, 3, 4}, same) == 5.0);
  b.labels = LabelSet{{0, 0, 0, 1, 1}, {"a", "b"}};
  const Similarity mixed({MetricKind::Label}, b);
  CHECK(interpretability_index(std::vector<Index>{0, 1, 2, 3, 4}, mixed) == Catch::Approx(2.6));
}

TEST_CASE("identical embeddings give the maximal II") {
  DatasetBundle b;
  b.activations.values = RowMatrix::Zero(5, 1);
  EmbeddingSet e;
  e.layer_names = {"l"};
  e.layers = {RowMatrix::Ones(5, 4)};
  b.embeddings = e;
  const Similarity emb({MetricKind::Embedding}, b);
  CHECK(interpretability_index(std::vector<Index>{0, 1, 2, 3, 4}, emb) == 0.0);
}

TEST_CASE("II per direction uses each column's top images") {
  DatasetBundle b;
  b.activations.values = RowMatrix::Zero(12, 1);
  b.labels = LabelSet{{0, 0, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7}, {"0", "1", "2", "3", "4", "5", "6", "7"}};
  const Similarity lab({MetricKind::Label}, b);
  RowMatrix scores = RowMatrix::Zero(12, 2);
  for (Index i = 0; i < 5; ++i) scores(i, 0) = 10.0 - i;
  for (Index i = 5; i < 10; ++i) scores(i, 1) = 10.0 - i;
  const auto ii = ii_per_direction(scores, lab, 5);
  CHECK(ii[0] == 5.0);
  CHECK(ii[1] == 1.0);
}

TEST_CASE("full-width band uses the global top images as positives") {
  std::vector<double> s(101);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<double>((i * 37) % 101);
  const auto trials = build_trials(s, 1.0, 10, 1);
  const auto desc = order_descending(s);
  const auto asc = order_ascending(s);
  CHECK(trials.front().ref_pos == std::vector<Index>(desc.begin(), desc.begin() + 9));
  CHECK(trials.front().ref_neg == std::vector<Index>(asc.begin(), asc.begin() + 9));
}

TEST_CASE("narrow band sits around the median") {
  std::vector<double> s(1001);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<double>(i);
  const auto trials = build_trials(s, 0.1, 50, 2);
  for (const auto& t : trials) {
    for (auto r : t.ref_pos) CHECK((r >= 500 && r <= 550));
    for (auto r : t.ref_neg) CHECK((r >= 450 && r < 500));
    CHECK(s[t.query_pos] > s[t.query_neg]);
    CHECK(t.query_pos >= 500);
    CHECK(t.query_neg < 500);
  }
  CHECK(code_of([&] { build_trials(std::vector<double>(s.begin(), s.begin() + 30), 0.1, 5, 0); }) ==
        ErrorCode::BandTooNarrow);
}

TEST_CASE("every generated trial orders its queries") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  std::vector<double> s(500);
  for (auto& v : s) v = n(rng);
  for (double w : {0.1, 0.25, 0.5, 1.0})
    for (const auto& t : build_trials(s, w, 200, 4)) {
      CHECK(s[t.query_pos] > s[t.query_neg]);
      CHECK(std::find(t.ref_pos.begin(), t.ref_pos.end(), t.query_pos) == t.ref_pos.end());
      CHECK(std::find(t.ref_neg.begin(), t.ref_neg.end(), t.query_neg) == t.ref_neg.end());
    }
}

TEST_CASE("trial batches are reproducible") {
  std::vector<double> s(300);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::sin(static_cast<double>(i));
  const auto a = build_trials(s, 0.5, 20, 11), b = build_trials(s, 0.5, 20, 11);
  for (std::size_t t = 0; t < a.size(); ++t) CHECK(a[t].query_pos == b[t].query_pos);
}

TEST_CASE("query identical to a reference wins") {
  DatasetBundle b;
  b.activations.values = RowMatrix::Zero(20, 1);
  EmbeddingSet e;
  e.layer_names = {"l"};
  e.layers = {random_matrix(20, 3, 5)};
  e.layers[0].row(10) = e.layers[0].row(0);
  b.embeddings = e;
  const Similarity emb({MetricKind::Embedding}, b);
  Trial t;
  for (Index i = 0; i < 9; ++i) {
    t.ref_pos.push_back(i);
    t.ref_neg.push_back(11 + i);
  }
  t.query_pos = 10;
  t.query_neg = 9;
  CHECK(run_psychophysics(std::vector<Trial>{t}, emb).accuracy == 1.0);
}

TEST_CASE("a constant metric is at chance") {
  std::vector<double> s(400);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<double>(i);
  const auto trials = build_trials(s, 1.0, 1000, 8);
  const auto r = run_psychophysics(trials, ConstantSim{0.3});
  CHECK(r.accuracy == Catch::Approx(0.5).margin(0.05));
  CHECK(code_of([] { run_psychophysics(std::vector<Trial>{}, ConstantSim{0.0}); }) == ErrorCode::EmptyTrials);
}

TEST_CASE("agreement with simulated observers") {
  const auto b = coloured_bundle(400, 21);
  const Similarity col({MetricKind::Color}, b), emb({MetricKind::Embedding}, b);
  std::mt19937_64 rng(22);
  std::vector<HumanTrialRecord> recs;
  while (recs.size() < 2000) {
    std::vector<Index> idx(400);
    std::iota(idx.begin(), idx.end(), Index{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    HumanTrialRecord r;
    r.ref_pos.assign(idx.begin(), idx.begin() + 9);
    r.ref_neg.assign(idx.begin() + 9, idx.begin() + 18);
    r.query_a = idx[18];
    r.query_b = idx[19];
    const double margin = sim_to_set(r.query_a, r.ref_pos, col) - sim_to_set(r.query_b, r.ref_pos, col);
    if (margin == 0.0) continue;
    r.human_choice_fraction = margin > 0 ? 0.8 : 0.2;
    recs.push_back(r);
  }
  const auto self = human_agreement(recs, col, 400);
  CHECK(self.agreement_rate == 1.0);
  CHECK(self.auc == 1.0);
  const auto other = human_agreement(recs, emb, 400);
  CHECK(other.auc >= 0.45);
  CHECK(other.auc <= 0.55);
}

TEST_CASE("undecided observers give the fallback AUC") {
  const auto b = coloured_bundle(30, 4);
  const Similarity col({MetricKind::Color}, b);
  HumanTrialRecord r;
  for (Index i = 0; i < 9; ++i) {
    r.ref_pos.push_back(i);
    r.ref_neg.push_back(9 + i);
  }
  r.query_a = 20;
  r.query_b = 21;
  r.human_choice_fraction = 0.5;
  const auto h = human_agreement(std::vector<HumanTrialRecord>(5, r), col, 30);
  CHECK(h.auc == 0.5);
  CHECK(h.auc_fallback);
  CHECK(h.excluded == 5);
  CHECK(code_of([&] { human_agreement(std::vector<HumanTrialRecord>{}, col, 30); }) == ErrorCode::EmptyTrials);
}

TEST_CASE("quantile panels") {
  const RowMatrix scores = random_matrix(20, 5, 6);
  const auto rows = quantile_panel({1, 2, 3, 4, 5}, scores, 5);
  REQUIRE(rows.size() == 5);
  CHECK(rows[2].ii == 3.0);
  CHECK(rows[2].direction_id == 2);
  CHECK(rows[0].direction_id == 0);
  CHECK(rows[4].direction_id == 4);
  const auto single = quantile_panel({0.7}, random_matrix(20, 1, 7), 5);
  for (const auto& r : single) CHECK(r.direction_id == 0);
  CHECK(rows[1].top == top_m(column(scores, rows[1].direction_id), 5));
}
