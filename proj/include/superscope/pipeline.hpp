#pragma once

// Config-driven orchestration: fit directions, score them, run the enabled
// analyses, and write a report directory of CSV tables, SVG figures and
// metadata. Identical configs give byte-identical directories.

#include "superscope/directions.hpp"
#include "superscope/evalmetrics.hpp"
#include "superscope/geometry.hpp"
#include "superscope/interpret.hpp"
#include "superscope/report.hpp"
#include "superscope/svg.hpp"
#include "superscope/synergy.hpp"
#include "superscope/synthbench.hpp"

#include <deque>
#include <map>

namespace superscope {

inline constexpr const char* kVersion = "1.0.0";

// --- configuration ---------------------------------------------------------------

inline const char* to_string(ProjectionKind k) {
  switch (k) {
    case ProjectionKind::Dot: return "dot";
    case ProjectionKind::NegDistance: return "neg_distance";
    case ProjectionKind::ExpNegZDist: return "exp_neg_zdist";
  }
  return "?";
}

inline ProjectionKind projection_from_string(const std::string& s) {
  for (auto k : {ProjectionKind::Dot, ProjectionKind::NegDistance, ProjectionKind::ExpNegZDist})
    if (s == to_string(k)) return k;
  fail(ErrorCode::ConfigInvalid, "unknown projection '" + s + "'");
}

struct DirectionSpec {
  std::string name;  // file stem and table key; defaults to the method name
  Method method = Method::KMeans;
  Index k = 32;
  std::optional<std::uint64_t> seed;  // run seed when absent
  ProjectionMode projection;
  json options = json::object();  // method-specific knobs, defaults filled in
  std::string file;               // load instead of fitting

  json to_json() const {
    json j{{"name", name}, {"method", superscope::to_string(method)}, {"k", k},
           {"projection", superscope::to_string(projection.kind)}, {"tau", projection.tau}, {"options", options}};
    if (seed) j["seed"] = *seed;
    if (!file.empty()) j["file"] = file;
    return j;
  }

  static DirectionSpec from_json(const json& j) {
    DirectionSpec d;
    if (j.is_string()) {
      d.method = method_from_string(j.get<std::string>());
    } else {
      d.method = method_from_string(j.value("method", std::string("kmeans")));
      d.k = j.value("k", d.k);
      if (j.contains("seed")) d.seed = j.at("seed").get<std::uint64_t>();
      d.projection.kind = projection_from_string(j.value("projection", std::string("dot")));
      d.projection.tau = j.value("tau", d.projection.tau);
      d.options = j.value("options", json::object());
      d.file = j.value("file", std::string());
      d.name = j.value("name", std::string());
    }
    if (d.name.empty()) d.name = superscope::to_string(d.method);
    if (d.k < 1) fail(ErrorCode::ConfigInvalid, "direction set '" + d.name + "' needs k >= 1");
    auto fill = [&](const char* key, const json& value) {
      if (!d.options.contains(key)) d.options[key] = value;
    };
    switch (d.method) {
      case Method::KMeans: fill("max_iter", 300); fill("tol", 1e-10); break;
      case Method::ICA: fill("max_iter", 1000); fill("tol", 1e-6); break;
      case Method::NMF: fill("max_iter", 500); break;
      case Method::SparseAE:
        fill("l1_weight", 1e-3);
        fill("epochs", 200);
        fill("learning_rate", 1e-3);
        fill("batch_size", 256);
        break;
      default: break;
    }
    return d;
  }
};

inline DirectionSet fit_directions(const DirectionSpec& d, const RowMatrix& acts, std::uint64_t seed) {
  if (!d.file.empty()) return load_direction_set(d.file);
  const json& o = d.options;
  switch (d.method) {
    case Method::Neurons: return neuron_basis(static_cast<Index>(acts.cols()));
    case Method::PCA: return pca(acts, d.k);
    case Method::KMeans: {
      KMeansOptions opt;
      opt.k = d.k;
      opt.seed = seed;
      opt.max_iter = o.value("max_iter", opt.max_iter);
      opt.tol = o.value("tol", opt.tol);
      return spherical_kmeans(acts, opt);
    }
    case Method::ICA: {
      IcaOptions opt;
      opt.k = d.k;
      opt.seed = seed;
      opt.max_iter = o.value("max_iter", opt.max_iter);
      opt.tol = o.value("tol", opt.tol);
      return ica(acts, opt);
    }
    case Method::NMF: {
      NmfOptions opt;
      opt.k = d.k;
      opt.seed = seed;
      opt.max_iter = o.value("max_iter", opt.max_iter);
      return nmf(acts, opt);
    }
    case Method::SparseAE: {
      SparseAEConfig cfg;
      cfg.hidden = d.k;
      cfg.seed = seed;
      cfg.l1_weight = o.value("l1_weight", cfg.l1_weight);
      cfg.epochs = o.value("epochs", cfg.epochs);
      cfg.learning_rate = o.value("learning_rate", cfg.learning_rate);
      cfg.batch_size = o.value("batch_size", cfg.batch_size);
      return sparse_autoencoder(acts, cfg).directions;
    }
  }
  fail(ErrorCode::ConfigInvalid, "unhandled direction method");
}

struct PsychoConfig {
  bool enabled = false;
  std::vector<double> w = {0.1, 0.25, 0.5, 1.0};
  Index trials = 200;
  std::optional<std::uint64_t> seed;
  bool negative_refs = false;
};

struct AnalysisToggles {
  bool panels = false;
  bool synergy = false;
  bool sensitivity = false;
  bool noise = false;
  bool manifold = false;
  bool spectrum = false;
  bool coact = false;
  bool mcc = false;
  bool dci = false;
  bool match = false;
  bool human = false;

  std::vector<std::pair<std::string, bool*>> fields() {
    return {{"panels", &panels},     {"synergy", &synergy}, {"sensitivity", &sensitivity}, {"noise", &noise},
            {"manifold", &manifold}, {"spectrum", &spectrum}, {"coact", &coact},           {"mcc", &mcc},
            {"dci", &dci},           {"match", &match},     {"human", &human}};
  }
};

/// Everything a run needs. Relative paths are used as given; the CLI resolves
/// them against the config file's directory before calling run().
struct RunConfig {
  fs::path bundle;
  fs::path output;
  std::uint64_t seed = 0;
  std::vector<DirectionSpec> directions;
  std::vector<MetricSpec> metrics;
  Index m = kDefaultM;
  bool include_neurons = true;  // neuron baseline alongside the fitted sets
  PsychoConfig psychophysics;
  AnalysisToggles analyses;

  std::vector<double> alphas = default_alphas();
  std::string gradient_norms;  // image x (path point) NPY replacing oracle gradients
  std::vector<double> sigmas = {0.0, 0.02, 0.04, 0.06, 0.08, 0.1};
  Index noise_samples = 16;
  Index noise_images = 64;
  ManifoldConfig manifold;
  Index synergy_top_pairs = 2;
  std::optional<std::pair<Index, Index>> spectrum_range;
  std::string match_activations;
  std::string human_trials;

  static RunConfig from_json(const json& j) {
    RunConfig c;
    try {
      c.bundle = j.at("bundle").get<std::string>();
      if (j.contains("output")) c.output = j.at("output").get<std::string>();
      c.seed = j.value("seed", c.seed);
      for (const auto& d : j.value("directions", json::array())) c.directions.push_back(DirectionSpec::from_json(d));
      for (const auto& mj : j.value("metrics", json::array())) c.metrics.push_back(metric_from_json(mj));
      c.m = j.value("m", c.m);
      c.include_neurons = j.value("include_neurons", c.include_neurons);
      if (j.contains("psychophysics")) {
        const json& p = j.at("psychophysics");
        c.psychophysics.enabled = p.value("enabled", true);
        c.psychophysics.w = p.value("w", c.psychophysics.w);
        c.psychophysics.trials = p.value("trials", c.psychophysics.trials);
        if (p.contains("seed")) c.psychophysics.seed = p.at("seed").get<std::uint64_t>();
        c.psychophysics.negative_refs = p.value("negative_refs", false);
      }
      if (j.contains("analyses"))
        for (auto& [key, flag] : c.analyses.fields()) *flag = j.at("analyses").value(key, *flag);
      c.alphas = j.value("alphas", c.alphas);
      c.gradient_norms = j.value("gradient_norms", c.gradient_norms);
      c.sigmas = j.value("sigmas", c.sigmas);
      c.noise_samples = j.value("noise_samples", c.noise_samples);
      c.noise_images = j.value("noise_images", c.noise_images);
      if (j.contains("manifold")) {
        const json& mf = j.at("manifold");
        c.manifold.tau = mf.value("tau", c.manifold.tau);
        c.manifold.top_p = mf.value("top_p", c.manifold.top_p);
        c.manifold.tsne.perplexity = mf.value("perplexity", c.manifold.tsne.perplexity);
        c.manifold.tsne.iterations = mf.value("iterations", c.manifold.tsne.iterations);
        c.manifold.tsne.exaggeration = mf.value("exaggeration", c.manifold.tsne.exaggeration);
        c.manifold.tsne.exaggeration_iters = mf.value("exaggeration_iters", c.manifold.tsne.exaggeration_iters);
        c.manifold.tsne.learning_rate = mf.value("learning_rate", c.manifold.tsne.learning_rate);
        c.manifold.tsne.momentum = mf.value("momentum", c.manifold.tsne.momentum);
        c.manifold.tsne.final_momentum = mf.value("final_momentum", c.manifold.tsne.final_momentum);
        c.manifold.tsne.momentum_switch = mf.value("momentum_switch", c.manifold.tsne.momentum_switch);
        if (mf.contains("seed")) c.manifold.tsne.seed = mf.at("seed").get<std::uint64_t>();
        else c.manifold.tsne.seed = c.seed;
      } else {
        c.manifold.tsne.seed = c.seed;
      }
      c.synergy_top_pairs = j.value("synergy_top_pairs", c.synergy_top_pairs);
      if (j.contains("spectrum_range")) {
        const auto r = j.at("spectrum_range").get<std::vector<Index>>();
        if (r.size() != 2) fail(ErrorCode::ConfigInvalid, "spectrum_range needs [lo, hi]");
        c.spectrum_range = std::make_pair(r[0], r[1]);
      }
      c.match_activations = j.value("match_activations", c.match_activations);
      c.human_trials = j.value("human_trials", c.human_trials);
    } catch (const json::exception& e) {
      fail(ErrorCode::ConfigInvalid, e.what());
    }
    c.manifold.m = c.m;
    return c;
  }

  /// Fully resolved config. The output directory is left out so that two runs
  /// differing only in where they write produce identical files.
  json to_json() const {
    json dirs = json::array();
    for (const auto& d : directions) dirs.push_back(d.to_json());
    json metrics_j = json::array();
    for (const auto& mt : metrics) metrics_j.push_back(superscope::to_json(mt));
    json psy{{"enabled", psychophysics.enabled},
             {"w", psychophysics.w},
             {"trials", psychophysics.trials},
             {"negative_refs", psychophysics.negative_refs}};
    psy["seed"] = psychophysics.seed.value_or(seed);
    json an = json::object();
    auto toggles = analyses;
    for (auto& [key, flag] : toggles.fields()) an[key] = *flag;
    json mf = manifold.to_json();
    json j{{"bundle", bundle.generic_string()},
           {"seed", seed},
           {"directions", dirs},
           {"metrics", metrics_j},
           {"m", m},
           {"include_neurons", include_neurons},
           {"psychophysics", psy},
           {"analyses", an},
           {"alphas", alphas},
           {"gradient_norms", gradient_norms},
           {"sigmas", sigmas},
           {"noise_samples", noise_samples},
           {"noise_images", noise_images},
           {"manifold", mf},
           {"synergy_top_pairs", synergy_top_pairs},
           {"match_activations", match_activations},
           {"human_trials", human_trials}};
    if (spectrum_range) j["spectrum_range"] = {spectrum_range->first, spectrum_range->second};
    return j;
  }

  void validate() const {
    if (!fs::exists(bundle)) fail(ErrorCode::ConfigInvalid, "bundle manifest not found: " + bundle.string());
    if (output.empty()) fail(ErrorCode::ConfigInvalid, "no output directory");
    if (m < 1) fail(ErrorCode::ConfigInvalid, "m must be positive");
    std::set<std::string> names;
    for (const auto& d : directions) {
      if (!names.insert(d.name).second) fail(ErrorCode::ConfigInvalid, "duplicate direction set name '" + d.name + "'");
      if (!d.file.empty() && !fs::exists(d.file)) fail(ErrorCode::ConfigInvalid, "direction file not found: " + d.file);
    }
    for (double w : psychophysics.w)
      if (!(w > 0.0 && w <= 1.0)) fail(ErrorCode::ConfigInvalid, "band widths must lie in (0, 1]");
    if (psychophysics.enabled && psychophysics.trials < 1) fail(ErrorCode::ConfigInvalid, "trials must be positive");
    for (double s : sigmas)
      if (!(s >= 0.0)) fail(ErrorCode::ConfigInvalid, "noise levels must be non-negative");
    for (const auto* p : {&gradient_norms, &match_activations, &human_trials})
      if (!p->empty() && !fs::exists(*p)) fail(ErrorCode::ConfigInvalid, "file not found: " + *p);
    if (analyses.match && match_activations.empty()) fail(ErrorCode::ConfigInvalid, "match needs match_activations");
    if (analyses.human && human_trials.empty()) fail(ErrorCode::ConfigInvalid, "human agreement needs human_trials");
  }
};

// --- run ---------------------------------------------------------------------------

struct NamedSet {
  std::string name;
  DirectionSpec spec;
  DirectionSet set;
  RowMatrix scores;  // D x K under the configured projection
};

/// Tables and figures collected over a run before anything is written.
struct RunOutput {
  std::deque<Table> tables;  // stable references while steps append
  std::vector<std::pair<std::string, svg::Figure>> figures;
  json analyses = json::object();
  json errors = json::array();

  Table& add_table(const std::string& name, std::vector<std::string> columns) {
    Table& t = tables.emplace_back();
    t.name = name;
    t.columns = std::move(columns);
    return t;
  }

  void add_figure(const std::string& name, svg::Figure f) { figures.emplace_back(name, std::move(f)); }
};

namespace detail {

inline std::string index_list(const std::vector<Index>& v) { return join(v, ';'); }

inline svg::Series series(const std::string& name, std::vector<double> x, std::vector<double> y) {
  return svg::Series{name, std::move(x), std::move(y)};
}

inline std::vector<double> iota_values(std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i);
  return x;
}

struct Context {
  const RunConfig& cfg;
  DatasetBundle bundle;
  json manifest;
  std::vector<NamedSet> sets;
  std::vector<Similarity> sims;
  std::map<std::pair<std::string, std::string>, std::vector<double>> ii;  // (set, metric) -> per direction

  const RowMatrix& acts() const { return bundle.activations.values; }

  const NamedSet* cluster_set() const {
    for (const auto& s : sets)
      if (s.set.centroids && !s.set.assignment.empty()) return &s;
    return nullptr;
  }

  const NamedSet& neuron_set() const {
    for (const auto& s : sets)
      if (s.set.method == Method::Neurons) return s;
    fail(ErrorCode::ConfigInvalid, "no neuron baseline in this run");
  }

  std::optional<ToyModel> oracle() const { return synth::load_oracle(cfg.bundle); }

  std::optional<RowMatrix> manifest_matrix(const std::string& key) const {
    if (!manifest.contains(key)) return std::nullopt;
    return npy::load_matrix(cfg.bundle.parent_path() / manifest.at(key).get<std::string>());
  }
};

inline void ii_step(Context& ctx, RunOutput& out) {
  auto& t = out.add_table("ii", {"set", "metric", "direction_id", "ii", "top"});
  for (const auto& sim : ctx.sims) {
    svg::Figure fig;
    fig.kind = svg::Kind::Box;
    fig.title = "Interpretability index (" + sim.spec().name() + ")";
    fig.x_label = "direction set";
    fig.y_label = "II";
    for (const auto& s : ctx.sets) {
      const auto ii = ii_per_direction(s.scores, sim, ctx.cfg.m);
      for (std::size_t k = 0; k < ii.size(); ++k)
        t.add({s.name, sim.spec().name(), static_cast<std::int64_t>(k), ii[k],
               index_list(top_m(column(s.scores, static_cast<Eigen::Index>(k)), ctx.cfg.m))});
      fig.series.push_back(series(s.name, {}, ii));
      ctx.ii[{s.name, sim.spec().name()}] = ii;
    }
    out.add_figure("ii_box_" + sim.spec().name(), std::move(fig));
  }
}

inline void panel_step(Context& ctx, RunOutput& out) {
  auto& t = out.add_table("panel", {"set", "metric", "quantile", "target_ii", "direction_id", "ii", "top"});
  for (const auto& sim : ctx.sims)
    for (const auto& s : ctx.sets) {
      const auto rows = quantile_panel(ctx.ii.at({s.name, sim.spec().name()}), s.scores, ctx.cfg.m);
      svg::Figure fig;
      fig.kind = svg::Kind::Grid;
      fig.title = "Top images at II quantiles: " + s.name + " (" + sim.spec().name() + ")";
      fig.images = ctx.bundle.images ? &*ctx.bundle.images : nullptr;
      for (const auto& r : rows) {
        t.add({s.name, sim.spec().name(), r.quantile, r.target_ii, static_cast<std::int64_t>(r.direction_id), r.ii,
               index_list(r.top)});
        fig.grid.push_back({"q=" + svg::num(r.quantile) + " #" + std::to_string(r.direction_id), r.top});
      }
      out.add_figure("panel_" + s.name + "_" + sim.spec().name(), std::move(fig));
    }
}

inline void psycho_step(Context& ctx, RunOutput& out) {
  const auto& p = ctx.cfg.psychophysics;
  const std::uint64_t root = p.seed.value_or(ctx.cfg.seed);
  auto& t = out.add_table("psycho", {"set", "metric", "direction_id", "w", "accuracy", "mean_margin", "n_trials", "status"});
  auto& summary = out.add_table("psycho_summary", {"set", "metric", "w", "mean_accuracy", "directions"});
  for (const auto& sim : ctx.sims) {
    svg::Figure fig;
    fig.kind = svg::Kind::Line;
    fig.title = "Simulated psychophysics (" + sim.spec().name() + ")";
    fig.x_label = "band width w";
    fig.y_label = "mean accuracy";
    for (const auto& s : ctx.sets) {
      const auto k = static_cast<std::size_t>(s.scores.cols());
      std::vector<double> xs, ys;
      for (double w : p.w) {
        std::vector<PsychoResult> res(k);
        std::vector<int> narrow(k, 0);
        parallel_for(k, [&](std::size_t d) {
          try {
            const auto col = column(s.scores, static_cast<Eigen::Index>(d));
            const auto trials = build_trials(col, w, p.trials, trial_batch_seed(root, static_cast<int>(d), w), static_cast<int>(d));
            res[d] = run_psychophysics(trials, sim, p.negative_refs);
          } catch (const Error& e) {
            if (e.code() != ErrorCode::BandTooNarrow) throw;
            narrow[d] = 1;
          }
        });
        double sum = 0.0;
        std::int64_t used = 0;
        for (std::size_t d = 0; d < k; ++d) {
          if (narrow[d]) {
            t.add({s.name, sim.spec().name(), static_cast<std::int64_t>(d), w, std::nan(""), std::nan(""), std::int64_t{0},
                   std::string("band_too_narrow")});
            continue;
          }
          t.add({s.name, sim.spec().name(), static_cast<std::int64_t>(d), w, res[d].accuracy, res[d].mean_margin,
                 static_cast<std::int64_t>(res[d].n_trials), std::string("ok")});
          sum += res[d].accuracy;
          ++used;
        }
        const double mean = used ? sum / static_cast<double>(used) : std::nan("");
        summary.add({s.name, sim.spec().name(), w, mean, used});
        xs.push_back(w);
        ys.push_back(mean);
      }
      fig.series.push_back(series(s.name, xs, ys));
    }
    out.add_figure("psycho_" + sim.spec().name(), std::move(fig));
  }
}

inline void synergy_step(Context& ctx, RunOutput& out) {
  const RowMatrix z = zscore_columns(ctx.acts());
  auto& t = out.add_table("synergy", {"metric", "a", "b", "ii_a", "ii_b", "ii_sum", "synergy", "correlation"});
  auto& units = out.add_table("synergy_units", {"metric", "unit", "ii", "max_synergy"});
  auto& hist = out.add_table("synergy_hist", {"metric", "bin_lo", "bin_hi", "count"});
  auto& stats_t = out.add_table("synergy_stats", {"metric", "test", "spearman", "p", "n"});
  auto& top = out.add_table("synergy_top", {"metric", "rank", "a", "b", "synergy", "top_a", "top_b", "top_sum"});
  for (const auto& sim : ctx.sims) {
    const CachedSimilarity cached(sim);
    const auto scan = synergy_scan(z, cached, ctx.cfg.m);
    const std::string mn = sim.spec().name();
    std::vector<double> corr, syn;
    for (const auto& r : scan.records) {
      t.add({mn, static_cast<std::int64_t>(r.a), static_cast<std::int64_t>(r.b), r.ii_a, r.ii_b, r.ii_sum, r.synergy, r.correlation});
      corr.push_back(r.correlation);
      syn.push_back(r.synergy);
    }
    for (std::size_t u = 0; u < scan.ii.size(); ++u)
      units.add({mn, static_cast<std::int64_t>(u), scan.ii[u], scan.max_synergy[u]});
    for (std::size_t b = 0; b < scan.histogram.counts.size(); ++b) {
      const double lo = scan.histogram.lo + scan.histogram.bin_width() * static_cast<double>(b);
      hist.add({mn, lo, lo + scan.histogram.bin_width(), static_cast<std::int64_t>(scan.histogram.counts[b])});
    }
    stats_t.add({mn, std::string("correlation_vs_synergy"), scan.corr_vs_synergy.r, scan.corr_vs_synergy.p,
                 static_cast<std::int64_t>(scan.corr_vs_synergy.n)});
    stats_t.add({mn, std::string("ii_vs_max_synergy"), scan.ii_vs_max_synergy.r, scan.ii_vs_max_synergy.p,
                 static_cast<std::int64_t>(scan.ii_vs_max_synergy.n)});

    std::vector<std::size_t> order(scan.records.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return scan.records[x].synergy > scan.records[y].synergy; });
    svg::Figure grid;
    grid.kind = svg::Kind::Grid;
    grid.title = "Highest-synergy unit pairs (" + mn + ")";
    grid.images = ctx.bundle.images ? &*ctx.bundle.images : nullptr;
    for (Index r = 0; r < std::min<Index>(ctx.cfg.synergy_top_pairs, order.size()); ++r) {
      const auto& rec = scan.records[order[r]];
      const auto ta = top_m(column(z, static_cast<Eigen::Index>(rec.a)), ctx.cfg.m);
      const auto tb = top_m(column(z, static_cast<Eigen::Index>(rec.b)), ctx.cfg.m);
      const auto ts = top_m(summed_columns(z, rec.a, rec.b), ctx.cfg.m);
      top.add({mn, static_cast<std::int64_t>(r), static_cast<std::int64_t>(rec.a), static_cast<std::int64_t>(rec.b), rec.synergy,
               index_list(ta), index_list(tb), index_list(ts)});
      grid.grid.push_back({"unit " + std::to_string(rec.a), ta});
      grid.grid.push_back({"unit " + std::to_string(rec.b), tb});
      grid.grid.push_back({"sum", ts});
    }
    out.add_figure("synergy_top_" + mn, std::move(grid));

    svg::Figure h;
    h.kind = svg::Kind::Histogram;
    h.title = "Pairwise synergy (" + mn + ")";
    h.x_label = "synergy";
    h.y_label = "pairs";
    svg::Series hs;
    for (std::size_t b = 0; b <= scan.histogram.counts.size(); ++b)
      hs.x.push_back(scan.histogram.lo + scan.histogram.bin_width() * static_cast<double>(b));
    for (auto c : scan.histogram.counts) hs.y.push_back(static_cast<double>(c));
    h.series.push_back(std::move(hs));
    out.add_figure("synergy_hist_" + mn, std::move(h));

    svg::Figure sc;
    sc.kind = svg::Kind::Scatter;
    sc.title = "Synergy vs. activation correlation (" + mn + ")";
    sc.x_label = "Pearson correlation of the pair";
    sc.y_label = "synergy";
    sc.series.push_back(series("pairs", corr, syn));
    out.add_figure("synergy_corr_" + mn, std::move(sc));
  }
}

inline void sensitivity_step(Context& ctx, RunOutput& out) {
  const NamedSet* clusters = ctx.cluster_set();
  if (!clusters) fail(ErrorCode::UnavailableCentroids, "sensitivity needs a k-means direction set");
  const auto oracle = ctx.oracle();
  std::optional<RowMatrix> ingested;
  if (!ctx.cfg.gradient_norms.empty()) ingested = npy::load_matrix(ctx.cfg.gradient_norms);
  const bool use_oracle = !ingested && oracle && ctx.bundle.images;

  auto& t = out.add_table("sensitivity", {"set", "metric", "pair", "a", "b", "alpha", "degenerate", "ii", "grad_mean", "grad_min",
                                          "probes_used", "probes_skipped"});
  auto& pairs_t = out.add_table("sensitivity_pairs", {"set", "metric", "pair", "a", "b", "cross_ii", "probes"});
  auto& mean_t = out.add_table("sensitivity_mean", {"set", "metric", "alpha", "mean_ii", "paths"});
  for (const auto& sim : ctx.sims) {
    const CachedSimilarity cached(sim);
    auto scan = sensitivity_scan(clusters->set, ctx.acts(), cached, use_oracle ? &*oracle : nullptr,
                                 use_oracle ? &*ctx.bundle.images : nullptr, ctx.cfg.alphas, ctx.cfg.m);
    if (ingested)
      for (std::size_t p = 0; p < scan.paths.size(); ++p)
        gradient_norms_from_matrix(*ingested, scan.probes[p], scan.paths[p], p * ctx.cfg.alphas.size());
    const std::string mn = sim.spec().name();
    std::vector<double> sum(ctx.cfg.alphas.size(), 0.0), cnt(ctx.cfg.alphas.size(), 0.0), gx, gy;
    for (std::size_t p = 0; p < scan.paths.size(); ++p) {
      const auto& path = scan.paths[p];
      pairs_t.add({clusters->name, mn, static_cast<std::int64_t>(p), static_cast<std::int64_t>(path.a),
                   static_cast<std::int64_t>(path.b), scan.cross_ii[p], index_list(scan.probes[p])});
      for (std::size_t i = 0; i < path.points.size(); ++i) {
        const auto& pt = path.points[i];
        t.add({clusters->name, mn, static_cast<std::int64_t>(p), static_cast<std::int64_t>(path.a),
               static_cast<std::int64_t>(path.b), pt.alpha, static_cast<std::int64_t>(pt.degenerate), pt.ii, pt.grad_mean,
               pt.grad_min, static_cast<std::int64_t>(pt.probes_used), static_cast<std::int64_t>(pt.probes_skipped)});
        if (!pt.degenerate) {
          sum[i] += pt.ii;
          cnt[i] += 1.0;
        }
        if (!std::isnan(pt.grad_min) && !pt.degenerate) {
          gx.push_back(pt.ii);
          gy.push_back(pt.grad_min);
        }
      }
    }
    std::vector<double> means;
    for (std::size_t i = 0; i < sum.size(); ++i) {
      means.push_back(cnt[i] > 0 ? sum[i] / cnt[i] : std::nan(""));
      mean_t.add({clusters->name, mn, ctx.cfg.alphas[i], means.back(), static_cast<std::int64_t>(cnt[i])});
    }
    svg::Figure line;
    line.kind = svg::Kind::Line;
    line.title = "II along centroid interpolations (" + mn + ")";
    line.x_label = "alpha";
    line.y_label = "mean II over pairs";
    line.series.push_back(series(clusters->name, ctx.cfg.alphas, means));
    out.add_figure("sensitivity_" + mn, std::move(line));
    if (!gx.empty()) {
      svg::Figure sc;
      sc.kind = svg::Kind::Scatter;
      sc.title = "II vs. minimal input-gradient norm (" + mn + ")";
      sc.x_label = "II";
      sc.y_label = "min gradient norm";
      sc.series.push_back(series("path points", gx, gy));
      out.add_figure("sensitivity_grad_" + mn, std::move(sc));
    }
  }
}

inline void noise_step(Context& ctx, RunOutput& out) {
  const auto oracle = ctx.oracle();
  if (!oracle) fail(ErrorCode::OracleUnavailable, "bundle manifest names no model oracle");
  if (!ctx.bundle.images) fail(ErrorCode::MissingBundleMember, "noise sensitivity needs images");
  if (oracle->output_dim() != static_cast<Index>(ctx.acts().cols()))
    fail(ErrorCode::WidthMismatch, "oracle output width differs from activations");
  const auto sens = noise_sensitivity_for_bundle(*oracle, *ctx.bundle.images, ctx.cfg.sigmas, ctx.cfg.noise_samples,
                                                 ctx.cfg.noise_images, ctx.cfg.seed);
  const auto& neurons = ctx.neuron_set();
  const double w = ctx.cfg.psychophysics.w.empty() ? 1.0 : *std::max_element(ctx.cfg.psychophysics.w.begin(), ctx.cfg.psychophysics.w.end());
  const std::uint64_t root = ctx.cfg.psychophysics.seed.value_or(ctx.cfg.seed);
  auto& t = out.add_table("noise", {"metric", "unit", "sensitivity", "ii", "margin"});
  auto& st = out.add_table("noise_stats", {"metric", "against", "spearman", "p", "n"});
  for (const auto& sim : ctx.sims) {
    const auto& ii = ctx.ii.at({neurons.name, sim.spec().name()});
    std::vector<double> margin(ii.size(), std::nan(""));
    parallel_for(ii.size(), [&](std::size_t k) {
      const auto col = column(neurons.scores, static_cast<Eigen::Index>(k));
      try {
        const auto trials = build_trials(col, w, ctx.cfg.psychophysics.trials, trial_batch_seed(root, static_cast<int>(k), w),
                                         static_cast<int>(k));
        margin[k] = run_psychophysics(trials, sim, ctx.cfg.psychophysics.negative_refs).mean_margin;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::BandTooNarrow) throw;
      }
    });
    for (std::size_t k = 0; k < ii.size(); ++k) t.add({sim.spec().name(), static_cast<std::int64_t>(k), sens[k], ii[k], margin[k]});
    const auto a = stats::spearman(ii, sens);
    st.add({sim.spec().name(), std::string("ii"), a.r, a.p, static_cast<std::int64_t>(a.n)});
    std::vector<double> mx, sx;
    for (std::size_t k = 0; k < margin.size(); ++k)
      if (!std::isnan(margin[k])) {
        mx.push_back(margin[k]);
        sx.push_back(sens[k]);
      }
    const auto b = stats::spearman(mx, sx);
    st.add({sim.spec().name(), std::string("margin"), b.r, b.p, static_cast<std::int64_t>(b.n)});
    svg::Figure sc;
    sc.kind = svg::Kind::Scatter;
    sc.title = "Noise sensitivity vs. II (" + sim.spec().name() + ")";
    sc.x_label = "II";
    sc.y_label = "sensitivity";
    sc.series.push_back(series("units", ii, sens));
    out.add_figure("noise_" + sim.spec().name(), std::move(sc));
  }
}

inline void manifold_step(Context& ctx, RunOutput& out) {
  const NamedSet* clusters = ctx.cluster_set();
  if (!clusters) fail(ErrorCode::UnavailableCentroids, "manifold analysis needs a k-means direction set");
  auto& pts = out.add_table("manifold_tsne", {"metric", "point", "image", "x", "y", "perplexity"});
  auto& units = out.add_table("manifold_units", {"metric", "kind", "id", "sparsity", "entropy", "ii"});
  auto& st = out.add_table("manifold_stats", {"metric", "kind", "pearson", "p", "n", "final_kl"});
  for (const auto& sim : ctx.sims) {
    const CachedSimilarity cached(sim);
    const auto r = manifold_analysis(ctx.acts(), clusters->set, cached, ctx.cfg.manifold);
    const std::string mn = sim.spec().name();
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < r.union_idx.size(); ++i) {
      const double x = r.tsne.y(static_cast<Eigen::Index>(i), 0), y = r.tsne.y(static_cast<Eigen::Index>(i), 1);
      pts.add({mn, static_cast<std::int64_t>(i), static_cast<std::int64_t>(r.union_idx[i]), x, y, r.tsne.perplexity[i]});
      xs.push_back(x);
      ys.push_back(y);
    }
    auto add_units = [&](const char* kind, const ManifoldSparsity& s, const std::vector<double>& ii) {
      for (std::size_t k = 0; k < ii.size(); ++k)
        units.add({mn, std::string(kind), static_cast<std::int64_t>(k), s.sparsity[k], s.entropy[k], ii[k]});
    };
    add_units("neuron", r.neurons, r.neuron_ii);
    add_units("feature", r.features, r.feature_ii);
    st.add({mn, std::string("neuron"), r.neuron_corr.r, r.neuron_corr.p, static_cast<std::int64_t>(r.neuron_corr.n), r.tsne.kl.back()});
    st.add({mn, std::string("feature"), r.feature_corr.r, r.feature_corr.p, static_cast<std::int64_t>(r.feature_corr.n), r.tsne.kl.back()});
    svg::Figure sc;
    sc.kind = svg::Kind::Scatter;
    sc.title = "t-SNE of top images (" + mn + ")";
    sc.x_label = "t-SNE 1";
    sc.y_label = "t-SNE 2";
    sc.series.push_back(series("images", xs, ys));
    out.add_figure("manifold_" + mn, std::move(sc));

    svg::Figure box;
    box.kind = svg::Kind::Box;
    box.title = "Spread of strongest activations on the manifold (" + mn + ")";
    box.x_label = "unit kind";
    box.y_label = "mean pairwise distance";
    box.series.push_back(series("neurons", {}, r.neurons.sparsity));
    box.series.push_back(series("features", {}, r.features.sparsity));
    out.add_figure("manifold_sparsity_" + mn, std::move(box));
  }
}

inline void spectrum_step(Context& ctx, RunOutput& out) {
  const auto fit = ctx.cfg.spectrum_range ? spectrum_alpha(ctx.acts(), ctx.cfg.spectrum_range->first, ctx.cfg.spectrum_range->second)
                                          : spectrum_alpha(ctx.acts());
  auto& t = out.add_table("spectrum", {"rank", "eigenvalue", "log10_rank", "log10_eigenvalue", "in_fit"});
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < fit.eigenvalues.size(); ++i) {
    const auto rank = static_cast<Index>(i + 1);
    const double lr = std::log10(static_cast<double>(rank));
    const double le = fit.eigenvalues[i] > 0.0 ? std::log10(fit.eigenvalues[i]) : std::nan("");
    t.add({static_cast<std::int64_t>(rank), fit.eigenvalues[i], lr, le,
           static_cast<std::int64_t>(rank >= fit.rank_lo && rank <= fit.rank_hi)});
    lx.push_back(lr);
    ly.push_back(le);
  }
  auto& s = out.add_table("spectrum_fit", {"alpha", "r2", "rank_lo", "rank_hi"});
  s.add({fit.alpha, fit.r2, static_cast<std::int64_t>(fit.rank_lo), static_cast<std::int64_t>(fit.rank_hi)});
  svg::Figure f;
  f.kind = svg::Kind::Line;
  f.title = "Covariance eigenspectrum, alpha = " + svg::num(fit.alpha);
  f.x_label = "log10 rank";
  f.y_label = "log10 normalized eigenvalue";
  f.series.push_back(series("eigenvalues", lx, ly));
  out.add_figure("spectrum", std::move(f));
}

inline void coact_step(Context& ctx, RunOutput& out) {
  const auto& neurons = ctx.neuron_set();
  auto& t = out.add_table("coact", {"metric", "unit", "coactivation", "ii"});
  auto& st = out.add_table("coact_stats", {"metric", "pearson", "p", "n"});
  for (const auto& sim : ctx.sims) {
    const auto& ii = ctx.ii.at({neurons.name, sim.spec().name()});
    const auto r = coactivation_vs_ii(ctx.acts(), ii);
    for (std::size_t k = 0; k < ii.size(); ++k) t.add({sim.spec().name(), static_cast<std::int64_t>(k), r.coactivation[k], ii[k]});
    st.add({sim.spec().name(), r.vs_ii.r, r.vs_ii.p, static_cast<std::int64_t>(r.vs_ii.n)});
    svg::Figure sc;
    sc.kind = svg::Kind::Scatter;
    sc.title = "Coactivation vs. II (" + sim.spec().name() + ")";
    sc.x_label = "coactivation";
    sc.y_label = "II";
    sc.series.push_back(series("units", r.coactivation, ii));
    out.add_figure("coact_" + sim.spec().name(), std::move(sc));
  }
}

inline void mcc_step(Context& ctx, RunOutput& out) {
  const auto codes = ctx.manifest_matrix("codes");
  const auto dict = ctx.manifest_matrix("ground_truth");
  if (!codes && !dict) fail(ErrorCode::MissingBundleMember, "MCC needs ground-truth codes or dictionary in the manifest");
  auto& t = out.add_table("mcc", {"set", "against", "mcc", "pairs"});
  for (const auto& s : ctx.sets) {
    if (codes) t.add({s.name, std::string("codes"), mcc(s.scores, *codes).mcc, static_cast<std::int64_t>(std::min(s.scores.cols(), codes->cols()))});
    if (dict) {
      const auto r = direction_mcc(s.set.dirs, RowMatrix(dict->transpose()));
      t.add({s.name, std::string("dictionary"), r.mcc, static_cast<std::int64_t>(r.pairs.size())});
    }
  }
}

inline void dci_step(Context& ctx, RunOutput& out) {
  const auto codes = ctx.manifest_matrix("codes");
  if (!codes) fail(ErrorCode::MissingBundleMember, "DCI needs ground-truth codes in the manifest");
  auto& t = out.add_table("dci", {"set", "disentanglement", "completeness", "informativeness", "lasso_alpha"});
  for (const auto& s : ctx.sets) {
    const auto r = dci(s.scores, *codes);
    t.add({s.name, r.disentanglement, r.completeness, r.informativeness, r.alpha});
  }
}

inline void match_step(Context& ctx, RunOutput& out) {
  const NamedSet* clusters = ctx.cluster_set();
  if (!clusters) fail(ErrorCode::UnavailableCentroids, "matching needs a k-means direction set");
  const RowMatrix other = npy::load_matrix(ctx.cfg.match_activations);
  const auto r = transfer_analysis(clusters->set, ctx.acts(), other);
  auto& t = out.add_table("match", {"kind", "id", "best_abs_correlation"});
  for (std::size_t i = 0; i < r.unit_best.size(); ++i) t.add({std::string("unit"), static_cast<std::int64_t>(i), r.unit_best[i]});
  for (std::size_t i = 0; i < r.cluster_best.size(); ++i)
    t.add({std::string("cluster"), static_cast<std::int64_t>(i), r.cluster_best[i]});
  const auto test = stats::rank_sum(r.cluster_best, r.unit_best);
  auto& st = out.add_table("match_stats", {"test", "u", "z", "p_greater", "effect"});
  st.add({std::string("clusters_vs_units"), test.u, test.z, test.p_greater, test.effect});
  svg::Figure box;
  box.kind = svg::Kind::Box;
  box.title = "Best match in the second system";
  box.x_label = "unit kind";
  box.y_label = "max |correlation|";
  box.series.push_back(series("units", {}, r.unit_best));
  box.series.push_back(series("clusters", {}, r.cluster_best));
  out.add_figure("match", std::move(box));
}

inline void human_step(Context& ctx, RunOutput& out) {
  const auto records = read_human_trials(ctx.cfg.human_trials);
  auto& t = out.add_table("human", {"metric", "agreement_rate", "auc", "auc_fallback", "used", "excluded"});
  for (const auto& sim : ctx.sims) {
    const auto h = human_agreement(records, sim, ctx.bundle.images_count(), ctx.cfg.psychophysics.negative_refs);
    t.add({sim.spec().name(), h.agreement_rate, h.auc, static_cast<std::int64_t>(h.auc_fallback),
           static_cast<std::int64_t>(h.used), static_cast<std::int64_t>(h.excluded)});
  }
}

inline void remove_previous_outputs(const fs::path& dir) {
  for (const char* name : {"tables", "figures", "directions", "FAILED", "run_metadata.json", "resolved_config.json"})
    fs::remove_all(dir / name);
}

}  // namespace detail

/// Runs every enabled step. A failing analysis is recorded and the rest still
/// run; the return value is 0 only if nothing failed, and a FAILED file then
/// lists what went wrong.
inline int run(const RunConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.output);
  detail::remove_previous_outputs(cfg.output);
  write_text_atomic(cfg.output / "resolved_config.json", cfg.to_json().dump(2) + "\n");

  detail::Context ctx{cfg, load_bundle(cfg.bundle), read_json(cfg.bundle), {}, {}, {}};
  RunOutput out;

  // directions: fitting errors are fatal for that set only
  std::vector<DirectionSpec> specs = cfg.directions;
  if (cfg.include_neurons &&
      std::none_of(specs.begin(), specs.end(), [](const DirectionSpec& d) { return d.method == Method::Neurons && d.file.empty(); })) {
    DirectionSpec n;
    n.method = Method::Neurons;
    n.name = "neurons";
    if (std::none_of(specs.begin(), specs.end(), [](const DirectionSpec& d) { return d.name == "neurons"; }))
      specs.insert(specs.begin(), n);
  }
  json sets_meta = json::array();
  for (const auto& spec : specs) {
    try {
      const std::uint64_t seed = spec.seed.value_or(cfg.seed);
      NamedSet s{spec.name, spec, fit_directions(spec, ctx.acts(), seed), {}};
      s.set.seed = spec.file.empty() ? seed : s.set.seed;
      s.scores = project(ctx.acts(), s.set, spec.projection);
      save_direction_set(cfg.output / "directions" / spec.name, s.set);
      sets_meta.push_back(json{{"name", spec.name}, {"method", to_string(s.set.method)}, {"k", s.set.size()},
                               {"seed", s.set.seed}, {"projection", to_string(spec.projection.kind)}});
      ctx.sets.push_back(std::move(s));
    } catch (const std::exception& e) {
      out.errors.push_back(json{{"step", "directions:" + spec.name}, {"message", e.what()}});
    }
  }

  auto step = [&](const std::string& name, bool enabled, auto&& body) {
    if (!enabled) return;
    try {
      body();
      out.analyses[name] = "ok";
    } catch (const std::exception& e) {
      out.analyses[name] = "failed";
      out.errors.push_back(json{{"step", name}, {"message", e.what()}});
    }
  };

  step("metrics", !cfg.metrics.empty(), [&] {
    for (const auto& mt : cfg.metrics) ctx.sims.emplace_back(mt, ctx.bundle);
  });
  const bool scored = !ctx.sims.empty() && !ctx.sets.empty();
  step("ii", scored, [&] { detail::ii_step(ctx, out); });
  const bool have_ii = out.analyses.value("ii", std::string()) == "ok";
  const auto& an = cfg.analyses;
  step("panels", an.panels && have_ii, [&] { detail::panel_step(ctx, out); });
  step("psychophysics", cfg.psychophysics.enabled && scored, [&] { detail::psycho_step(ctx, out); });
  step("synergy", an.synergy && !ctx.sims.empty(), [&] { detail::synergy_step(ctx, out); });
  step("sensitivity", an.sensitivity && !ctx.sims.empty(), [&] { detail::sensitivity_step(ctx, out); });
  step("noise", an.noise && have_ii, [&] { detail::noise_step(ctx, out); });
  step("manifold", an.manifold && !ctx.sims.empty(), [&] { detail::manifold_step(ctx, out); });
  step("spectrum", an.spectrum, [&] { detail::spectrum_step(ctx, out); });
  step("coact", an.coact && have_ii, [&] { detail::coact_step(ctx, out); });
  step("mcc", an.mcc, [&] { detail::mcc_step(ctx, out); });
  step("dci", an.dci, [&] { detail::dci_step(ctx, out); });
  step("match", an.match, [&] { detail::match_step(ctx, out); });
  step("human", an.human && !ctx.sims.empty(), [&] { detail::human_step(ctx, out); });

  // an analysis that was asked for but had nothing to run on counts as failed
  auto requested = [&](const std::string& name, bool enabled) {
    if (enabled && !out.analyses.contains(name)) {
      out.analyses[name] = "failed";
      out.errors.push_back(json{{"step", name}, {"message", "prerequisites missing (metrics, directions or II)"}});
    }
  };
  requested("ii", !cfg.metrics.empty());
  requested("psychophysics", cfg.psychophysics.enabled && !cfg.metrics.empty());
  AnalysisToggles toggles = an;
  for (auto& [name, flag] : toggles.fields())
    if (name != "spectrum" && name != "mcc" && name != "dci" && name != "match") requested(name, *flag);

  Report report;
  report.tables.assign(out.tables.begin(), out.tables.end());
  report.summary = json{{"version", kVersion}, {"seed", cfg.seed}};
  save_report_tables(report, cfg.output / "tables");
  json figures = json::array();
  for (const auto& [name, fig] : out.figures) {
    fs::create_directories(cfg.output / "figures");
    svg::save(cfg.output / "figures" / (name + ".svg"), fig);
    figures.push_back(name + ".svg");
  }
  json tables = json::array();
  for (const auto& t : report.tables) tables.push_back(t.name + ".csv");
  json meta{{"version", kVersion},
            {"config", cfg.to_json()},
            {"direction_sets", sets_meta},
            {"analyses", out.analyses},
            {"errors", out.errors},
            {"tables", tables},
            {"figures", figures},
            {"defaults",
             {{"m", cfg.m},
              {"reference_images", kReferenceCount},
              {"gradient_probes", "top-M images of both interpolation endpoints"},
              {"noise_images", "evenly spaced subset of the bundle's images"},
              {"tsne", cfg.manifold.to_json()}}}};
  write_text_atomic(cfg.output / "run_metadata.json", meta.dump(2) + "\n");
  if (!out.errors.empty()) {
    std::string text;
    for (const auto& e : out.errors) text += e.at("step").get<std::string>() + ": " + e.at("message").get<std::string>() + "\n";
    write_text_atomic(cfg.output / "FAILED", text);
    return 1;
  }
  return 0;
}

// --- comparison ----------------------------------------------------------------------

namespace detail {

/// Mean of `value` grouped by the listed key columns, skipping NaN.
inline std::map<std::vector<std::string>, double> group_means(const Table& t, const std::vector<std::string>& keys,
                                                              const std::string& value) {
  std::map<std::vector<std::string>, std::pair<double, double>> acc;
  const auto vc = t.column(value);
  std::vector<std::size_t> kc;
  for (const auto& k : keys) kc.push_back(t.column(k));
  for (const auto& row : t.rows) {
    std::vector<std::string> key;
    for (auto c : kc) key.push_back(cell_text(row[c]));
    const double v = cell_number(row[vc]);
    auto& a = acc[key];
    if (!std::isnan(v)) {
      a.first += v;
      a.second += 1.0;
    }
  }
  std::map<std::vector<std::string>, double> out;
  for (const auto& [k, a] : acc) out[k] = a.second > 0 ? a.first / a.second : std::nan("");
  return out;
}

template <typename Map>
bool same_keys(const Map& a, const Map& b) {
  if (a.size() != b.size()) return false;
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib)
    if (ia->first != ib->first) return false;
  return true;
}

}  // namespace detail

/// Deltas (b - a) of mean II per direction set and metric, and of mean
/// psychophysics accuracy per set, metric and band width.
inline Report compare(const fs::path& report_a, const fs::path& report_b) {
  auto load = [](const fs::path& dir, const std::string& name) -> std::optional<Table> {
    const fs::path p = dir / "tables" / (name + ".csv");
    if (!fs::exists(p)) return std::nullopt;
    return read_csv_table(p);
  };
  Report r;
  const auto ii_a = load(report_a, "ii"), ii_b = load(report_b, "ii");
  if (!ii_a || !ii_b) fail(ErrorCode::IncomparableReports, "both reports need an II table");
  const auto ma = detail::group_means(*ii_a, {"set", "metric"}, "ii");
  const auto mb = detail::group_means(*ii_b, {"set", "metric"}, "ii");
  if (!detail::same_keys(ma, mb)) fail(ErrorCode::IncomparableReports, "reports differ in direction sets or metrics");
  Table ti;
  ti.name = "compare_ii";
  ti.columns = {"set", "metric", "mean_ii_a", "mean_ii_b", "delta"};
  for (const auto& [k, va] : ma) ti.add({k[0], k[1], va, mb.at(k), mb.at(k) - va});
  r.tables.push_back(std::move(ti));

  const auto pa = load(report_a, "psycho_summary"), pb = load(report_b, "psycho_summary");
  if (pa.has_value() != pb.has_value()) fail(ErrorCode::IncomparableReports, "only one report has psychophysics");
  if (pa) {
    const auto sa = detail::group_means(*pa, {"set", "metric", "w"}, "mean_accuracy");
    const auto sb = detail::group_means(*pb, {"set", "metric", "w"}, "mean_accuracy");
    if (!detail::same_keys(sa, sb)) fail(ErrorCode::IncomparableReports, "reports differ in psychophysics settings");
    Table tp;
    tp.name = "compare_psycho";
    tp.columns = {"set", "metric", "w", "accuracy_a", "accuracy_b", "delta"};
    for (const auto& [k, va] : sa) tp.add({k[0], k[1], parse_double(k[2]), va, sb.at(k), sb.at(k) - va});
    r.tables.push_back(std::move(tp));
  }
  r.summary = json{{"report_a", report_a.filename().generic_string()}, {"report_b", report_b.filename().generic_string()}};
  return r;
}

/// Relative path of the first file that differs between two directory trees
/// (by presence or content), or "" when they are identical.
inline std::string compare_directories(const fs::path& a, const fs::path& b) {
  auto listing = [](const fs::path& root) {
    std::vector<std::string> files;
    if (!fs::exists(root)) return files;
    for (const auto& e : fs::recursive_directory_iterator(root))
      if (e.is_regular_file()) files.push_back(fs::relative(e.path(), root).generic_string());
    std::sort(files.begin(), files.end());
    return files;
  };
  const auto la = listing(a), lb = listing(b);
  for (std::size_t i = 0; i < std::max(la.size(), lb.size()); ++i) {
    if (i >= la.size()) return lb[i];
    if (i >= lb.size() || la[i] != lb[i]) return la[i];
    if (read_text(a / la[i]) != read_text(b / lb[i])) return la[i];
  }
  return "";
}

}  // namespace superscope
