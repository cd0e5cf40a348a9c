// Acceptance gate: one PASS/FAIL line per headline criterion, all driven by
// the synthetic superposition benchmark. Exit status is non-zero if any fail.

#include "superscope/evalmetrics.hpp"
#include "superscope/geometry.hpp"
#include "superscope/pipeline.hpp"
#include "superscope/synergy.hpp"
#include "superscope/synthbench.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

using namespace superscope;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& body) {
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

synth::SuperpositionSpec bench_spec(std::uint64_t seed) {
  synth::SuperpositionSpec s;
  s.n_units = 16;
  s.n_features = 32;
  s.sparsity = 1.0;
  s.noise_sd = 0.02;
  s.n_samples = 5000;
  s.seed = seed;
  return s;
}

struct Fixture {
  synth::SynthData data;
  DirectionSet kmeans;
  RowMatrix kmeans_scores;
  double fit_seconds = 0.0;
};

std::map<std::uint64_t, Fixture>& fixtures() {
  static std::map<std::uint64_t, Fixture> f;
  return f;
}

const Fixture& fixture(std::uint64_t seed) {
  auto& all = fixtures();
  if (auto it = all.find(seed); it != all.end()) return it->second;
  const auto t0 = Clock::now();
  Fixture f;
  f.data = synth::gen_superposition(bench_spec(seed));
  KMeansOptions opt;
  opt.k = 32;
  opt.seed = seed;
  f.kmeans = spherical_kmeans(f.data.bundle.activations.values, opt);
  f.fit_seconds = seconds_since(t0);
  f.kmeans_scores = project(f.data.bundle.activations.values, f.kmeans);
  return all.emplace(seed, std::move(f)).first->second;
}

// Two active features per image on average. With exactly one feature per
// image nothing lies between features and every feature's top images are the
// same saturated template, which leaves the interpolation and manifold
// patterns nothing to measure.
const Fixture& mixed_fixture() {
  static const Fixture f = [] {
    Fixture x;
    auto spec = bench_spec(0);
    spec.sparsity = 2.0;
    x.data = synth::gen_superposition(spec);
    KMeansOptions opt;
    opt.k = 32;
    opt.seed = 0;
    x.kmeans = spherical_kmeans(x.data.bundle.activations.values, opt);
    x.kmeans_scores = project(x.data.bundle.activations.values, x.kmeans);
    return x;
  }();
  return f;
}

const RowMatrix& acts_of(const Fixture& f) { return f.data.bundle.activations.values; }

MetricSpec metric(MetricKind k) {
  MetricSpec m;
  m.kind = k;
  return m;
}

double mean_of(const std::vector<double>& v) { return stats::mean(v); }

}  // namespace

int main() {
  const std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};

  report("superposition-recovery", [&] {
    int good = 0;
    double slowest = 0.0;
    std::string per_seed;
    for (auto s : seeds) {
      const auto& f = fixture(s);
      const double m = direction_mcc(f.kmeans.dirs, RowMatrix(f.data.dictionary.transpose())).mcc;
      good += m >= 0.9;
      slowest = std::max(slowest, f.fit_seconds);
      per_seed += (per_seed.empty() ? "" : ",") + fmt(m);
    }
    return Outcome{good >= 4 && slowest < 30.0,
                   "MCC per seed [" + per_seed + "], " + std::to_string(good) + "/5 >= 0.9, slowest run " + fmt(slowest) + " s"};
  });

  report("ii-gap", [&] {
    std::string detail;
    bool ok = true;
    for (auto kind : {MetricKind::Color, MetricKind::Label}) {
      std::vector<double> dirs_ii, neuron_ii;
      for (auto s : seeds) {
        const auto& f = fixture(s);
        const Similarity sim(metric(kind), f.data.bundle);
        const auto a = ii_per_direction(f.kmeans_scores, sim);
        const auto b = ii_per_direction(acts_of(f), sim);
        dirs_ii.insert(dirs_ii.end(), a.begin(), a.end());
        neuron_ii.insert(neuron_ii.end(), b.begin(), b.end());
      }
      const auto test = stats::rank_sum(dirs_ii, neuron_ii);
      const bool pass = mean_of(dirs_ii) > mean_of(neuron_ii) && test.p_greater < 0.01;
      ok = ok && pass;
      detail += metric(kind).name() + ": kmeans " + fmt(mean_of(dirs_ii)) + " vs neurons " + fmt(mean_of(neuron_ii)) +
                " (p=" + fmt(test.p_greater) + ") ";
    }
    return Outcome{ok, detail};
  });

  report("psychophysics-gap-and-difficulty", [&] {
    const auto& f = fixture(0);
    const Similarity sim(metric(MetricKind::Color), f.data.bundle);
    const CachedSimilarity cached(sim);
    const std::vector<double> widths = {0.1, 0.25, 0.5, 1.0};
    auto accuracy = [&](const RowMatrix& scores, double w) {
      std::vector<double> acc(static_cast<std::size_t>(scores.cols()));
      parallel_for(acc.size(), [&](std::size_t k) {
        const auto col = column(scores, static_cast<Eigen::Index>(k));
        const auto trials = build_trials(col, w, 200, trial_batch_seed(0, static_cast<int>(k), w), static_cast<int>(k));
        acc[k] = run_psychophysics(trials, cached).accuracy;
      });
      return mean_of(acc);
    };
    bool ok = true;
    std::string detail;
    std::map<double, std::pair<double, double>> acc;
    for (double w : widths) {
      acc[w] = {accuracy(f.kmeans_scores, w), accuracy(acts_of(f), w)};
      ok = ok && acc[w].first >= acc[w].second;
      detail += "w=" + fmt(w) + " kmeans " + fmt(acc[w].first) + " neurons " + fmt(acc[w].second) + "; ";
    }
    ok = ok && acc[1.0].first >= acc[0.1].first && acc[1.0].second >= acc[0.1].second;

    const auto constant = [](Index, Index) { return 0.25; };
    const auto trials = build_trials(column(f.kmeans_scores, 0), 1.0, 1000, 7);
    const double chance = run_psychophysics(trials, constant).accuracy;
    ok = ok && std::abs(chance - 0.5) <= 0.05;
    detail += "constant-metric accuracy " + fmt(chance);
    return Outcome{ok, detail};
  });

  report("ii-equation-exactness", [&] {
    DatasetBundle b;
    b.activations.values = RowMatrix::Zero(5, 1);
    b.labels = LabelSet{{0, 0, 0, 1, 1}, {"a", "b"}};
    const Similarity label(metric(MetricKind::Label), b);
    const double mixed = interpretability_index(std::vector<Index>{0, 1, 2, 3, 4}, label);
    const double same = interpretability_index(std::vector<Index>{0, 1, 2, 0, 1}, label);

    const auto& f = fixture(0);
    const Similarity sim(metric(MetricKind::Label), f.data.bundle);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal;
    RowMatrix dirs(10000, acts_of(f).cols());
    for (Eigen::Index i = 0; i < dirs.size(); ++i) dirs.data()[i] = normal(rng);
    const RowMatrix scores = acts_of(f) * dirs.transpose();
    const auto ii = ii_per_direction(scores, sim);
    const auto [lo, hi] = std::minmax_element(ii.begin(), ii.end());
    const bool ok = mixed == 2.6 && same == 5.0 && *lo >= 1.0 && *hi <= 5.0;
    return Outcome{ok, "[a,a,a,b,b] -> " + fmt(mixed) + ", same label -> " + fmt(same) + ", 10000 random directions in [" +
                           fmt(*lo) + ", " + fmt(*hi) + "]"};
  });

  report("synergy", [&] {
    const auto& f = fixture(0);
    const Similarity sim(metric(MetricKind::Color), f.data.bundle);
    const CachedSimilarity cached(sim);
    const RowMatrix z = zscore_columns(acts_of(f));
    double worst_self = 0.0;
    for (Index a = 0; a < static_cast<Index>(z.cols()); ++a)
      worst_self = std::max(worst_self, std::abs(pair_synergy(a, a, z, cached).synergy));
    const auto scan = synergy_scan(z, cached);
    const RowMatrix reversed = z.rowwise().reverse();
    const auto scan_rev = synergy_scan(reversed, cached);
    const auto n = static_cast<Index>(z.cols());
    bool symmetric = true;
    for (const auto& r : scan.records) {
      const Index ra = n - 1 - r.b, rb = n - 1 - r.a;  // same pair in reversed order
      for (const auto& q : scan_rev.records)
        if (q.a == ra && q.b == rb && q.synergy != r.synergy) symmetric = false;
    }
    const bool ok = worst_self <= 1e-9 && symmetric && scan.corr_vs_synergy.r > 0.0 && scan.ii_vs_max_synergy.r < 0.0;
    return Outcome{ok, "max |Synergy(a,a)| " + fmt(worst_self) + ", symmetric " + (symmetric ? "yes" : "no") +
                           ", Spearman(corr, synergy) " + fmt(scan.corr_vs_synergy.r) + ", Spearman(II, max synergy) " +
                           fmt(scan.ii_vs_max_synergy.r)};
  });

  report("sensitivity", [&] {
    struct Profile {
      double ends = 0.0, mid = 0.0;
      stats::CorrelationTest rho;
      std::size_t pairs = 0;
    };
    auto profile_for = [&](const synth::SynthData& data, const DirectionSet& clusters, MetricKind kind) {
      const Similarity sim(metric(kind), data.bundle);
      const CachedSimilarity cached(sim);
      const auto scan = sensitivity_scan(clusters, data.bundle.activations.values, cached, data.model, *data.bundle.images,
                                         default_alphas(), kDefaultM);
      std::vector<double> ends, mids, ii, grad;
      for (const auto& path : scan.paths)
        for (const auto& p : path.points) {
          if (p.degenerate) continue;
          if (p.alpha == 0.0 || p.alpha == 1.0) ends.push_back(p.ii);
          if (p.alpha == 0.5) mids.push_back(p.ii);
          if (!std::isnan(p.grad_min)) {
            ii.push_back(p.ii);
            grad.push_back(p.grad_min);
          }
        }
      return Profile{mean_of(ends), mean_of(mids), stats::spearman(ii, grad), scan.paths.size()};
    };
    auto describe = [](const std::string& tag, const Profile& p) {
      return tag + ": endpoint II " + fmt(p.ends) + " vs midpoint " + fmt(p.mid) + ", Spearman(II, min grad norm) " +
             fmt(p.rho.r) + " (p=" + fmt(p.rho.p) + ", n=" + std::to_string(p.rho.n) + ")";
    };
    const auto& mixed = mixed_fixture();
    const auto& f = fixture(0);
    const auto main_color = profile_for(mixed.data, mixed.kmeans, MetricKind::Color);
    const auto main_label = profile_for(mixed.data, mixed.kmeans, MetricKind::Label);
    const auto single_color = profile_for(f.data, f.kmeans, MetricKind::Color);

    // analytic vs central differences, on probes moved off ReLU kinks
    double worst_rel = 0.0;
    int checked = 0;
    for (Index i = 0; checked < 8 && i < 64; ++i) {
      const Index img = i * 97 % f.data.bundle.images_count();
      const auto x = off_kink_probe(f.data.model, image_vector(*f.data.bundle.images, img), 1e-3, mix_seed(5, i));
      if (!x) continue;
      const Vector v = f.kmeans.dirs.row(static_cast<Eigen::Index>(i % f.kmeans.size())).transpose();
      const Vector g = distance_gradient(f.data.model, *x, v);
      const Vector fd = finite_difference_gradient(f.data.model, *x, v);
      worst_rel = std::max(worst_rel, (g - fd).norm() / std::max(g.norm(), 1e-12));
      ++checked;
    }
    const bool ok = main_color.ends > main_color.mid && checked > 0 && worst_rel <= 1e-4 && main_color.rho.r < 0.0;
    return Outcome{ok, std::to_string(main_color.pairs) + " Hungarian pairs; " + describe("two-feature color", main_color) + "; " +
                           describe("two-feature label", main_label) + "; " + describe("one-feature color", single_color) +
                           "; gradient rel. error " + fmt(worst_rel) + " over " + std::to_string(checked) + " probes"};
  });

  report("noise-robustness", [&] {
    const auto& f = fixture(0);
    const Similarity sim(metric(MetricKind::Color), f.data.bundle);
    const CachedSimilarity cached(sim);
    const auto ii = ii_per_direction(acts_of(f), cached);
    std::vector<double> margin(ii.size());
    for (std::size_t k = 0; k < ii.size(); ++k) {
      const auto col = column(acts_of(f), static_cast<Eigen::Index>(k));
      margin[k] = run_psychophysics(build_trials(col, 1.0, 200, trial_batch_seed(0, static_cast<int>(k), 1.0)), cached).mean_margin;
    }
    const auto sens = noise_sensitivity_for_bundle(f.data.model, *f.data.bundle.images, {0.0, 0.02, 0.04, 0.06, 0.08, 0.1},
                                                   8, 64, 0);
    const auto r_ii = stats::spearman(ii, sens);
    const auto r_margin = stats::spearman(margin, sens);
    return Outcome{r_ii.r < 0.0 && r_margin.r < 0.0,
                   "Spearman(II, sensitivity) " + fmt(r_ii.r) + " (p=" + fmt(r_ii.p) + "), Spearman(margin, sensitivity) " +
                       fmt(r_margin.r) + " (p=" + fmt(r_margin.p) + ")"};
  });

  report("manifold", [&] {
    struct Summary {
      double worst = 0.0, spread_features = 0.0, spread_neurons = 0.0;
      ManifoldResult r;
    };
    auto analyse = [&](const Fixture& f) {
      const Similarity sim(metric(MetricKind::Embedding), f.data.bundle);
      const CachedSimilarity cached(sim);
      Summary s;
      s.r = manifold_analysis(acts_of(f), f.kmeans, cached, ManifoldConfig{});
      for (double p : s.r.tsne.perplexity) s.worst = std::max(s.worst, std::abs(p - 10.0));
      s.spread_features = mean_of(s.r.features.sparsity);
      s.spread_neurons = mean_of(s.r.neurons.sparsity);
      return s;
    };
    auto describe = [](const std::string& tag, const Summary& s) {
      return tag + ": perplexity error " + fmt(s.worst) + ", mean top-5 spread features " + fmt(s.spread_features) +
             " vs neurons " + fmt(s.spread_neurons) + ", Pearson(sparsity, II) features " + fmt(s.r.feature_corr.r) +
             " (p=" + fmt(s.r.feature_corr.p) + "), neurons " + fmt(s.r.neuron_corr.r) + " (p=" + fmt(s.r.neuron_corr.p) + ")";
    };
    const auto mixed = analyse(mixed_fixture());
    const auto single = analyse(fixture(0));
    const bool ok = mixed.worst <= 1e-4 && single.worst <= 1e-4 && mixed.spread_features < mixed.spread_neurons &&
                    mixed.r.feature_corr.p < 0.05;
    return Outcome{ok, describe("two-feature", mixed) + "; " + describe("one-feature", single)};
  });

  report("spectrum", [&] {
    const Eigen::Index d = 5000, n = 64;
    std::mt19937_64 rng(3);
    std::normal_distribution<double> normal;
    RowMatrix g(d, n);
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = normal(rng);
    Matrix q0(n, n);
    for (Eigen::Index i = 0; i < q0.size(); ++i) q0.data()[i] = normal(rng);
    const Matrix q = Eigen::HouseholderQR<Matrix>(q0).householderQ();
    Vector scale(n);
    for (Eigen::Index k = 0; k < n; ++k) scale(k) = std::pow(static_cast<double>(k + 1), -0.75);
    const RowMatrix planted = g * scale.asDiagonal() * q.transpose();
    const auto fit_planted = spectrum_alpha(planted);
    const auto fit_iso = spectrum_alpha(g);
    const bool ok = std::abs(fit_planted.alpha - 1.5) <= 0.1 && std::abs(fit_iso.alpha) <= 0.1;
    return Outcome{ok, "planted n^-1.5 -> alpha " + fmt(fit_planted.alpha) + "; isotropic -> alpha " + fmt(fit_iso.alpha) +
                           " (ranks " + std::to_string(fit_iso.rank_lo) + "-" + std::to_string(fit_iso.rank_hi) + ")"};
  });

  report("privileged-basis", [&] {
    const Index n = 8;
    const auto q = synth::gen_quadrant_data(n, synth::fires_alone_density(n, 0, 0.5), 4000, 0);
    DatasetBundle b;
    b.activations.values = q.relu;
    b.images = synth::quadrant_images(q.quadrant, Index{1} << n);
    const Similarity sim(metric(MetricKind::Color), b);
    const auto ii = ii_per_direction(q.relu, sim);
    const auto co = coactivation_vs_ii(q.relu, ii);
    const auto lowest = std::min_element(co.coactivation.begin(), co.coactivation.end()) - co.coactivation.begin();
    const auto highest = std::max_element(ii.begin(), ii.end()) - ii.begin();
    return Outcome{co.vs_ii.r < 0.0, "Pearson(coactivation, II) " + fmt(co.vs_ii.r) + " (p=" + fmt(co.vs_ii.p) +
                                         "); lowest coactivation unit " + std::to_string(lowest) + ", highest II unit " +
                                         std::to_string(highest)};
  });

  report("disentanglement", [&] {
    const auto& f = fixture(0);
    const RowMatrix& a = f.kmeans_scores;
    RowMatrix b(a.rows(), a.cols());
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(a.cols()));
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(2);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (Eigen::Index c = 0; c < a.cols(); ++c) b.col(c) = (c % 2 ? -1.0 : 1.0) * a.col(perm[c]);
    const double self = mcc(a, a).mcc, permuted = mcc(a, b).mcc;
    const auto ident = dci(f.data.codes, f.data.codes);
    const auto feat = dci(f.kmeans_scores, f.data.codes);
    const auto neur = dci(acts_of(f), f.data.codes);
    const bool ok = std::abs(permuted - 1.0) <= 1e-6 && permuted == self && std::abs(ident.disentanglement - 1.0) <= 1e-6 &&
                    feat.disentanglement > neur.disentanglement;
    return Outcome{ok, "MCC self " + fmt(self) + ", permuted+negated " + fmt(permuted) + "; DCI-D identity " +
                           fmt(ident.disentanglement) + "; DCI-D kmeans " + fmt(feat.disentanglement) + " vs neurons " +
                           fmt(neur.disentanglement)};
  });

  report("transfer", [&] {
    const auto& f = fixture(0);
    const auto twin = synth::gen_twin(f.data, 99);
    const auto tr = transfer_analysis(f.kmeans, acts_of(f), twin.bundle.activations.values);
    const auto test = stats::rank_sum(tr.cluster_best, tr.unit_best);
    return Outcome{test.p_greater < 0.01, "median best match clusters " + fmt(stats::quantile(tr.cluster_best, 0.5)) +
                                              " vs units " + fmt(stats::quantile(tr.unit_best, 0.5)) + " (rank-sum p=" +
                                              fmt(test.p_greater) + ")"};
  });

  report("determinism-and-runtime", [&] {
    const fs::path root = fs::temp_directory_path() / "superscope_acceptance";
    fs::remove_all(root);
    const auto t0 = Clock::now();
    const auto manifest = synth::save_synth(synth::gen_superposition(bench_spec(0)), root / "bundle");
    RunConfig cfg = RunConfig::from_json(json{{"bundle", manifest.string()},
                                              {"seed", 0},
                                              {"directions", json::array({json{{"method", "kmeans"}, {"k", 32}}})},
                                              {"metrics", json::array({"color"})},
                                              {"psychophysics", {{"w", {0.1, 1.0}}, {"trials", 200}}},
                                              {"analyses", {{"synergy", true}}}});
    cfg.output = root / "run1";
    const int rc1 = run(cfg);
    const double elapsed = seconds_since(t0);
    cfg.output = root / "run2";
    const int rc2 = run(cfg);
    const auto diff = compare_directories(root / "run1", root / "run2");
    const bool ok = rc1 == 0 && rc2 == 0 && diff.empty() && elapsed < 300.0;
    fs::remove_all(root);
    return Outcome{ok, "exit codes " + std::to_string(rc1) + "/" + std::to_string(rc2) + ", " +
                           (diff.empty() ? std::string("byte-identical") : "differs at " + diff) + ", first run " +
                           fmt(elapsed) + " s"};
  });

  std::cout << (failures ? std::to_string(failures) + " criteria failed" : std::string("all criteria passed")) << std::endl;
  return failures ? 1 : 0;
}
