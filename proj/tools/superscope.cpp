// superscope command-line front end. Analysis commands build a run config
// (from --config if given, then flags on top) and hand it to the pipeline;
// the matrix utilities (mcc, dci, spectrum, match) work on NPY files directly.

#include "superscope/superscope.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <iostream>

using namespace superscope;

namespace {

/// "a:b:s" -> a, a+s, ..., b (inclusive, within rounding), or "x,y,z".
std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::vector<double> parts;
    std::size_t start = 0;
    while (true) {
      const auto end = text.find(':', start);
      parts.push_back(parse_double(text.substr(start, end - start)));
      if (end == std::string::npos) break;
      start = end + 1;
    }
    if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0])
      fail(ErrorCode::ConfigInvalid, "range must be lo:hi:step with step > 0");
    const auto steps = static_cast<long>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
    for (long i = 0; i <= steps; ++i) out.push_back(std::round((parts[0] + static_cast<double>(i) * parts[2]) * 1e12) / 1e12);
    return out;
  }
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find(',', start);
    const auto item = text.substr(start, end == std::string::npos ? std::string::npos : end - start);
    if (!item.empty()) out.push_back(parse_double(item));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  if (out.empty()) fail(ErrorCode::ConfigInvalid, "empty list '" + text + "'");
  return out;
}

std::pair<Index, Index> parse_rank_range(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) fail(ErrorCode::ConfigInvalid, "range must be lo:hi");
  return {std::stoul(text.substr(0, colon)), std::stoul(text.substr(colon + 1))};
}

/// Paths inside a config file are relative to that file.
void resolve_paths(json& cfg, const fs::path& base) {
  auto fix = [&](json& j, const char* key) {
    if (j.contains(key) && j.at(key).is_string()) {
      const fs::path p = j.at(key).get<std::string>();
      if (!p.empty() && p.is_relative()) j[key] = (base / p).lexically_normal().generic_string();
    }
  };
  fix(cfg, "bundle");
  fix(cfg, "output");
  fix(cfg, "gradient_norms");
  fix(cfg, "match_activations");
  fix(cfg, "human_trials");
  if (cfg.contains("directions"))
    for (auto& d : cfg.at("directions"))
      if (d.is_object()) fix(d, "file");
}

struct Common {
  std::string config;
  std::string bundle;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> metrics;
  std::optional<Index> m;
  std::string dirs;
  std::string method;
  std::optional<Index> k;
  std::string projection;

  void add_to(CLI::App* cmd, bool with_directions = true) {
    cmd->add_option("--config", config, "JSON run config; flags override its keys");
    cmd->add_option("--bundle", bundle, "bundle manifest.json");
    cmd->add_option("--out", out, "output report directory");
    cmd->add_option("--seed", seed, "root seed for every stochastic step");
    cmd->add_option("--metric", metrics, "color | color_grey | embedding | label (repeatable)");
    cmd->add_option("--m", m, "number of top images per direction");
    if (with_directions) {
      cmd->add_option("--dirs", dirs, "direction file (.npy with .json sidecar)");
      cmd->add_option("--method", method, "kmeans | pca | ica | nmf | sae | neurons");
      cmd->add_option("--k", k, "number of directions to fit");
      cmd->add_option("--projection", projection, "dot | neg_distance | exp_neg_zdist");
    }
  }

  json build() const {
    json cfg = json::object();
    if (!config.empty()) {
      cfg = read_json(config);
      resolve_paths(cfg, fs::path(config).parent_path());
    }
    if (!bundle.empty()) cfg["bundle"] = bundle;
    if (!out.empty()) cfg["output"] = out;
    if (seed) cfg["seed"] = *seed;
    if (!metrics.empty()) {
      cfg["metrics"] = json::array();
      for (const auto& mt : metrics) {
        if (mt == "color_grey") cfg["metrics"].push_back(json{{"metric", "color"}, {"channels", "grey"}});
        else cfg["metrics"].push_back(mt);
      }
    }
    if (m) cfg["m"] = *m;
    if (!dirs.empty() || !method.empty() || k || !projection.empty()) {
      json d = json::object();
      if (!dirs.empty()) {
        d["file"] = dirs;
        d["name"] = fs::path(dirs).stem().string();
        if (fs::exists(fs::path(dirs).replace_extension(".json")))
          d["method"] = read_json(fs::path(dirs).replace_extension(".json")).value("method", std::string("neurons"));
      }
      if (!method.empty()) d["method"] = method;
      if (k) d["k"] = *k;
      if (!projection.empty()) d["projection"] = projection;
      cfg["directions"] = json::array({d});
    }
    if (!cfg.contains("metrics")) cfg["metrics"] = json::array({"color"});
    return cfg;
  }
};

int run_config(const json& cfg) {
  RunConfig rc = RunConfig::from_json(cfg);
  if (rc.output.empty()) fail(ErrorCode::ConfigInvalid, "no output directory (--out or \"output\")");
  const int code = run(rc);
  std::cout << rc.output.string() << (code == 0 ? "" : " (FAILED, see FAILED file)") << "\n";
  return code;
}

void print_table(const Table& t) { std::cout << t.to_csv(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"superscope: interpretability of directions in activation space"};
  app.require_subcommand(1);
  std::function<int()> action;

  // synth
  synth::SuperpositionSpec spec;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic superposition bundle");
  synth_cmd->add_option("--units", spec.n_units);
  synth_cmd->add_option("--features", spec.n_features);
  synth_cmd->add_option("--sparsity", spec.sparsity, "expected active features per sample");
  synth_cmd->add_option("--samples", spec.n_samples);
  synth_cmd->add_option("--noise", spec.noise_sd);
  synth_cmd->add_option("--support", spec.support, "units per feature");
  synth_cmd->add_option("--classes", spec.n_classes);
  synth_cmd->add_option("--image-size", spec.image_size);
  synth_cmd->add_flag("--identity", spec.identity_dictionary, "one unit per feature");
  synth_cmd->add_flag("--permute-labels", spec.permute_labels, "labels unrelated to content");
  synth_cmd->add_option("--seed", spec.seed);
  synth_cmd->add_option("--out", synth_out)->required();
  synth_cmd->callback([&] {
    action = [&] {
      const auto manifest = synth::save_synth(synth::gen_superposition(spec), synth_out);
      std::cout << manifest.string() << "\n";
      return 0;
    };
  });

  // directions
  std::string dir_bundle, dir_method = "kmeans", dir_out, dir_config;
  Index dir_k = 32;
  std::uint64_t dir_seed = 0;
  auto* dir_cmd = app.add_subcommand("directions", "fit a direction set and save it");
  dir_cmd->add_option("--bundle", dir_bundle)->required();
  dir_cmd->add_option("--method", dir_method, "kmeans | pca | ica | nmf | sae | neurons");
  dir_cmd->add_option("--k", dir_k);
  dir_cmd->add_option("--seed", dir_seed);
  dir_cmd->add_option("--config", dir_config, "JSON with method options (max_iter, l1_weight, ...)");
  dir_cmd->add_option("--out", dir_out, "output stem, e.g. dirs/kmeans")->required();
  dir_cmd->callback([&] {
    action = [&] {
      json d = dir_config.empty() ? json::object() : read_json(dir_config);
      d["method"] = dir_method;
      d["k"] = dir_k;
      const auto ds = DirectionSpec::from_json(d);
      const auto bundle = load_bundle(dir_bundle);
      auto set = fit_directions(ds, bundle.activations.values, dir_seed);
      set.seed = dir_seed;
      save_direction_set(dir_out, set);
      std::cout << dir_out << ".npy (" << set.size() << " x " << set.width() << ")\n";
      return 0;
    };
  });

  // ii
  Common ii_opts;
  auto* ii_cmd = app.add_subcommand("ii", "interpretability index per direction");
  ii_opts.add_to(ii_cmd);
  ii_cmd->callback([&] {
    action = [&] {
      json cfg = ii_opts.build();
      if (!ii_opts.dirs.empty()) cfg["include_neurons"] = false;
      cfg["analyses"]["panels"] = true;
      return run_config(cfg);
    };
  });

  // psycho
  Common psy_opts;
  std::string psy_w;
  std::optional<Index> psy_trials;
  bool psy_neg = false;
  auto* psy_cmd = app.add_subcommand("psycho", "simulated 2AFC psychophysics");
  psy_opts.add_to(psy_cmd);
  psy_cmd->add_option("--w", psy_w, "band widths, e.g. 0.1,0.25,0.5,1.0");
  psy_cmd->add_option("--trials", psy_trials);
  psy_cmd->add_flag("--negative-refs", psy_neg, "score queries against negative references too");
  psy_cmd->callback([&] {
    action = [&] {
      json cfg = psy_opts.build();
      json& p = cfg["psychophysics"];
      if (!p.is_object()) p = json::object();
      p["enabled"] = true;
      if (!psy_w.empty()) p["w"] = parse_grid(psy_w);
      if (psy_trials) p["trials"] = *psy_trials;
      if (psy_neg) p["negative_refs"] = true;
      return run_config(cfg);
    };
  });

  // human-agree
  Common human_opts;
  std::string human_trials;
  auto* human_cmd = app.add_subcommand("human-agree", "agreement of the metric with recorded human choices");
  human_opts.add_to(human_cmd, false);
  human_cmd->add_option("--trials", human_trials, "JSON-lines trial records")->required();
  human_cmd->callback([&] {
    action = [&] {
      json cfg = human_opts.build();
      cfg["human_trials"] = human_trials;
      cfg["analyses"]["human"] = true;
      cfg["include_neurons"] = false;
      cfg["directions"] = json::array();
      return run_config(cfg);
    };
  });

  // synergy
  Common syn_opts;
  std::optional<Index> top_pairs;
  auto* syn_cmd = app.add_subcommand("synergy", "pairwise synergy of z-scored units");
  syn_opts.add_to(syn_cmd, false);
  syn_cmd->add_option("--top-pairs", top_pairs);
  syn_cmd->callback([&] {
    action = [&] {
      json cfg = syn_opts.build();
      cfg["analyses"]["synergy"] = true;
      if (top_pairs) cfg["synergy_top_pairs"] = *top_pairs;
      return run_config(cfg);
    };
  });

  // sensitivity
  Common sens_opts;
  std::string alphas, grad_norms, pairs = "hungarian";
  auto* sens_cmd = app.add_subcommand("sensitivity", "II and input-gradient norms along centroid interpolations");
  sens_opts.add_to(sens_cmd);
  sens_cmd->add_option("--alphas", alphas, "lo:hi:step or list");
  sens_cmd->add_option("--pairs", pairs, "pair selection; only 'hungarian' is available")->check(CLI::IsMember({"hungarian"}));
  sens_cmd->add_option("--grad-norms", grad_norms, "precomputed image x path-point gradient norms (.npy)");
  sens_cmd->callback([&] {
    action = [&] {
      json cfg = sens_opts.build();
      if (!cfg.contains("directions")) cfg["directions"] = json::array({json{{"method", "kmeans"}, {"k", 32}}});
      cfg["analyses"]["sensitivity"] = true;
      if (!alphas.empty()) cfg["alphas"] = parse_grid(alphas);
      if (!grad_norms.empty()) cfg["gradient_norms"] = grad_norms;
      return run_config(cfg);
    };
  });

  // noise
  Common noise_opts;
  std::string sigma;
  std::optional<Index> noise_samples, noise_images;
  auto* noise_cmd = app.add_subcommand("noise", "per-unit sensitivity to Gaussian input noise");
  noise_opts.add_to(noise_cmd, false);
  noise_cmd->add_option("--sigma", sigma, "lo:hi:step or list, within [0, 0.1]");
  noise_cmd->add_option("--samples", noise_samples);
  noise_cmd->add_option("--images", noise_images, "evenly spaced images to perturb");
  noise_cmd->callback([&] {
    action = [&] {
      json cfg = noise_opts.build();
      cfg["analyses"]["noise"] = true;
      if (!sigma.empty()) cfg["sigmas"] = parse_grid(sigma);
      if (noise_samples) cfg["noise_samples"] = *noise_samples;
      if (noise_images) cfg["noise_images"] = *noise_images;
      return run_config(cfg);
    };
  });

  // manifold
  Common man_opts;
  std::optional<double> perplexity, tau;
  std::optional<Index> top_p;
  auto* man_cmd = app.add_subcommand("manifold", "t-SNE of top images and sparsity on that manifold");
  man_opts.add_to(man_cmd);
  man_cmd->add_option("--perplexity", perplexity);
  man_cmd->add_option("--tau", tau);
  man_cmd->add_option("--top-p", top_p);
  man_cmd->callback([&] {
    action = [&] {
      json cfg = man_opts.build();
      if (!cfg.contains("directions")) cfg["directions"] = json::array({json{{"method", "kmeans"}, {"k", 32}}});
      cfg["analyses"]["manifold"] = true;
      json& mf = cfg["manifold"];
      if (!mf.is_object()) mf = json::object();
      if (perplexity) mf["perplexity"] = *perplexity;
      if (tau) mf["tau"] = *tau;
      if (top_p) mf["top_p"] = *top_p;
      return run_config(cfg);
    };
  });

  // coact
  Common coact_opts;
  auto* coact_cmd = app.add_subcommand("coact", "coactivation of each unit with the rest, against II");
  coact_opts.add_to(coact_cmd, false);
  coact_cmd->callback([&] {
    action = [&] {
      json cfg = coact_opts.build();
      cfg["analyses"]["coact"] = true;
      return run_config(cfg);
    };
  });

  // spectrum
  std::string spec_acts, spec_range;
  auto* spec_cmd = app.add_subcommand("spectrum", "power-law exponent of the covariance eigenspectrum");
  spec_cmd->add_option("--acts", spec_acts, "activation matrix (.npy) or bundle manifest")->required();
  spec_cmd->add_option("--range", spec_range, "1-based inclusive rank range lo:hi");
  spec_cmd->callback([&] {
    action = [&] {
      const RowMatrix acts = fs::path(spec_acts).extension() == ".json" ? load_bundle(spec_acts).activations.values
                                                                         : npy::load_matrix(spec_acts);
      SpectrumFit fit;
      if (spec_range.empty()) {
        fit = spectrum_alpha(acts);
      } else {
        const auto [lo, hi] = parse_rank_range(spec_range);
        fit = spectrum_alpha(acts, lo, hi);
      }
      std::cout << "alpha," << format_double(fit.alpha) << "\nr2," << format_double(fit.r2) << "\nrank_lo," << fit.rank_lo
                << "\nrank_hi," << fit.rank_hi << "\n";
      return 0;
    };
  });

  // mcc
  std::string mcc_a, mcc_b;
  bool mcc_dirs = false;
  auto* mcc_cmd = app.add_subcommand("mcc", "mean correlation coefficient after optimal matching");
  mcc_cmd->add_option("--a", mcc_a)->required();
  mcc_cmd->add_option("--b", mcc_b)->required();
  mcc_cmd->add_flag("--directions", mcc_dirs, "compare direction rows by |cosine| instead of score columns");
  mcc_cmd->callback([&] {
    action = [&] {
      const RowMatrix a = npy::load_matrix(mcc_a), b = npy::load_matrix(mcc_b);
      const auto r = mcc_dirs ? direction_mcc(a, b) : mcc(a, b);
      Table t;
      t.columns = {"a", "b", "correlation"};
      for (std::size_t i = 0; i < r.pairs.size(); ++i)
        t.add({static_cast<std::int64_t>(r.pairs[i].first), static_cast<std::int64_t>(r.pairs[i].second), r.correlations[i]});
      print_table(t);
      std::cout << "mcc," << format_double(r.mcc) << "\n";
      return 0;
    };
  });

  // dci
  std::string dci_codes, dci_factors;
  double dci_alpha = 0.01;
  auto* dci_cmd = app.add_subcommand("dci", "disentanglement, completeness, informativeness");
  dci_cmd->add_option("--codes", dci_codes, "learned codes (.npy, rows = stimuli)")->required();
  dci_cmd->add_option("--factors", dci_factors, "ground-truth factors (.npy)")->required();
  dci_cmd->add_option("--alpha", dci_alpha, "lasso penalty");
  dci_cmd->callback([&] {
    action = [&] {
      const auto r = dci(npy::load_matrix(dci_codes), npy::load_matrix(dci_factors), dci_alpha);
      std::cout << "disentanglement," << format_double(r.disentanglement) << "\ncompleteness,"
                << format_double(r.completeness) << "\ninformativeness," << format_double(r.informativeness) << "\n";
      return 0;
    };
  });

  // match
  std::string match_a, match_b, match_labels;
  auto* match_cmd = app.add_subcommand("match", "best-match correlations of units (and clusters) across two systems");
  match_cmd->add_option("--a", match_a, "responses of system A (.npy, stimuli x units)")->required();
  match_cmd->add_option("--b", match_b, "responses of system B, same stimuli")->required();
  match_cmd->add_option("--labels", match_labels, "direction sidecar (.json) holding A's cluster assignment");
  match_cmd->callback([&] {
    action = [&] {
      const RowMatrix a = npy::load_matrix(match_a), b = npy::load_matrix(match_b);
      Table t;
      t.columns = {"kind", "id", "best_abs_correlation"};
      if (match_labels.empty()) {
        const auto r = best_match(a, b);
        for (std::size_t i = 0; i < r.best.size(); ++i) t.add({std::string("unit"), static_cast<std::int64_t>(i), r.best[i]});
        print_table(t);
        return 0;
      }
      fs::path npy_path = match_labels;
      npy_path.replace_extension(".npy");
      const auto source = load_direction_set(npy_path);
      const auto r = transfer_analysis(source, a, b);
      for (std::size_t i = 0; i < r.unit_best.size(); ++i) t.add({std::string("unit"), static_cast<std::int64_t>(i), r.unit_best[i]});
      for (std::size_t i = 0; i < r.cluster_best.size(); ++i)
        t.add({std::string("cluster"), static_cast<std::int64_t>(i), r.cluster_best[i]});
      print_table(t);
      const auto test = stats::rank_sum(r.cluster_best, r.unit_best);
      std::cout << "rank_sum_p_greater," << format_double(test.p_greater) << "\n";
      return 0;
    };
  });

  // run
  Common run_opts;
  auto* run_cmd = app.add_subcommand("run", "full pipeline from a JSON config");
  run_opts.add_to(run_cmd);
  run_cmd->callback([&] {
    action = [&] {
      if (run_opts.config.empty()) fail(ErrorCode::ConfigInvalid, "run needs --config");
      json cfg = run_opts.build();
      return run_config(cfg);
    };
  });

  // compare
  std::string cmp_a, cmp_b, cmp_out;
  auto* cmp_cmd = app.add_subcommand("compare", "II and accuracy deltas between two report directories (b - a)");
  cmp_cmd->add_option("a", cmp_a)->required();
  cmp_cmd->add_option("b", cmp_b)->required();
  cmp_cmd->add_option("--out", cmp_out, "write tables here instead of printing");
  cmp_cmd->callback([&] {
    action = [&] {
      const auto r = compare(cmp_a, cmp_b);
      if (cmp_out.empty()) {
        for (const auto& t : r.tables) {
          std::cout << "# " << t.name << "\n";
          print_table(t);
        }
      } else {
        save_report_tables(r, cmp_out);
      }
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    return action ? action() : 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::ConfigInvalid ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
