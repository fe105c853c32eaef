#pragma once
// Experiment orchestration behind the CLI: dataset generation, cache building,
// training runs, evaluation, the six-row ablation matrix, the hold-out
// generalization test, and report/plot emission. Every run directory carries
// enough (config, manifest reference, seeds, log, checkpoint, reports) to be
// replayed exactly.

#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "hallucigrid/dataset.hpp"
#include "hallucigrid/eval.hpp"
#include "hallucigrid/supervision.hpp"

namespace hg {

struct EvalSettings {
  std::vector<int> r_sweep = {0, 1, 2, 3, 4, 5};
};
inline void to_json(nlohmann::json& j, const EvalSettings& s) {
  j = nlohmann::json{{"r_sweep", s.r_sweep}};
}
inline void from_json(const nlohmann::json& j, EvalSettings& s) {
  if (j.contains("r_sweep")) s.r_sweep = j.at("r_sweep").get<std::vector<int>>();
}

struct AblateSettings {
  std::vector<uint64_t> seeds = {1};
};
inline void to_json(nlohmann::json& j, const AblateSettings& s) {
  j = nlohmann::json{{"seeds", s.seeds}};
}
inline void from_json(const nlohmann::json& j, AblateSettings& s) {
  if (j.contains("seeds")) s.seeds = j.at("seeds").get<std::vector<uint64_t>>();
}

inline void to_json(nlohmann::json& j, const PairFlags& f) {
  j = nlohmann::json{{"pair1", f.pair1}, {"pair2", f.pair2}, {"pair3", f.pair3}};
}
inline void from_json(const nlohmann::json& j, PairFlags& f) {
  f.pair1 = j.value("pair1", true);
  f.pair2 = j.value("pair2", true);
  f.pair3 = j.value("pair3", true);
}

// The one-file experiment configuration consumed by every CLI subcommand.
struct ExperimentConfig {
  std::string run_id = "run";
  std::string data_dir = "out/data";
  std::string cache_path = "out/cache.hpsc";
  std::string runs_dir = "out/runs";
  DatasetConfig dataset;
  NetConfig net;
  TrainConfig train;
  PairFlags pairs;
  EvalSettings eval;
  AblateSettings ablate;
};

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = nlohmann::json{{"run_id", c.run_id},
                     {"paths", {{"data", c.data_dir}, {"cache", c.cache_path}, {"runs", c.runs_dir}}},
                     {"dataset", c.dataset},
                     {"net", c.net},
                     {"train", c.train},
                     {"pairs", c.pairs},
                     {"eval", c.eval},
                     {"ablate", c.ablate}};
}
inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  c.run_id = j.value("run_id", "run");
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    c.data_dir = p.value("data", c.data_dir);
    c.cache_path = p.value("cache", c.cache_path);
    c.runs_dir = p.value("runs", c.runs_dir);
  }
  c.dataset = j.at("dataset").get<DatasetConfig>();
  if (j.contains("net")) c.net = j.at("net").get<NetConfig>();
  if (j.contains("train")) c.train = j.at("train").get<TrainConfig>();
  if (j.contains("pairs")) c.pairs = j.at("pairs").get<PairFlags>();
  if (j.contains("eval")) c.eval = j.at("eval").get<EvalSettings>();
  if (j.contains("ablate")) c.ablate = j.at("ablate").get<AblateSettings>();
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  const auto bytes = detail::read_file_bytes(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  try {
    return j.get<ExperimentConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// One training + evaluation run with a unique id under out_dir.
struct ExperimentSpec {
  std::string run_id = "run";
  std::string out_dir = "out/runs";
  std::string manifest_path;  // dataset the run was trained on
  TrainConfig train;
  NetConfig net;
  PairFlags pairs;
  EvalSettings eval;
};

struct RunArtifacts {
  std::string run_dir;
  std::string checkpoint_path;
  std::string log_path;
  std::string report_path;
  EvalReport report;
};

inline RunArtifacts run_experiment(const ExperimentSpec& spec, const LoadedDataset& data,
                                   const PreselectionCache* cache) {
  namespace fs = std::filesystem;
  const fs::path run_dir = fs::path(spec.out_dir) / spec.run_id;
  if (fs::exists(run_dir / "model.hnet"))
    throw DataError("duplicate run id: " + run_dir.string() + " already holds a checkpoint");
  fs::create_directories(run_dir);

  nlohmann::json jc;
  jc["run_id"] = spec.run_id;
  jc["dataset_manifest"] = spec.manifest_path;
  jc["train"] = spec.train;
  jc["net"] = spec.net;
  jc["pairs"] = spec.pairs;
  jc["eval"] = spec.eval;
  detail::write_file_bytes((run_dir / "config.json").string(), jc.dump(2) + "\n");

  TrainResult tr = train(spec.train, spec.net, data, cache, run_dir.string(), spec.pairs);

  RunArtifacts art;
  art.run_dir = run_dir.string();
  art.checkpoint_path = tr.checkpoint_path;
  art.log_path = tr.log_path;

  if (!data.test_partial.empty()) {
    Network<float> net(spec.net);
    std::vector<ObservationMask> unobserved;
    for (const auto& p : data.test_partial)
      unobserved.push_back(complement(split_partial(p).second));
    const auto preds = predict(net, std::span<const float>(tr.checkpoint.params),
                               tr.checkpoint.state, data.test_partial, spec.train.batch_size);
    art.report =
        evaluate_predictions(data.test_ids, preds, data.test_gt, unobserved, spec.eval.r_sweep);
    fs::create_directories(run_dir / "eval");
    art.report_path = (run_dir / "eval" / "report.json").string();
    write_eval_report(art.report, art.report_path);
    detail::write_file_bytes((run_dir / "eval" / "relaxation.csv").string(),
                             relaxation_curve_csv(art.report));
  }
  return art;
}

// ---------------------------------------------------------------------------
// Ablation matrix: the six supervision configurations, each trained with the
// same seeds and tabulated by contour F (r=0) plus full/unobserved mean IoU.
// ---------------------------------------------------------------------------

struct AblationRow {
  std::string name;
  PairFlags flags;
};

inline const std::vector<AblationRow>& ablation_rows() {
  static const std::vector<AblationRow> rows = {
      {"all", {true, true, true}},
      {"wo_observation", {false, true, true}},
      {"wo_preselection", {true, false, true}},
      {"wo_masked_prior", {true, true, false}},
      {"only_preselection", {false, true, false}},
      {"only_masked_prior", {false, false, true}},
  };
  return rows;
}

struct AblationEntry {
  std::string config;
  uint64_t seed = 0;
  double f_r0 = 0.0;
  double mean_iou_full = 0.0;
  double mean_iou_unobserved = 0.0;
};

struct AblationReport {
  std::vector<AblationEntry> entries;                 // one per (config, seed)
  std::map<std::string, AblationEntry> seed_means;    // averaged over seeds

  const AblationEntry& mean_of(const std::string& config) const {
    const auto it = seed_means.find(config);
    if (it == seed_means.end()) throw DataError("ablation report has no config " + config);
    return it->second;
  }
};

inline std::string ablation_table_csv(const AblationReport& rep) {
  std::string out = "config,seed,f_measure_r0,mean_iou_full,mean_iou_unobserved\n";
  for (const auto& e : rep.entries)
    out += e.config + "," + std::to_string(e.seed) + "," + detail::format_double(e.f_r0) + "," +
           detail::format_double(e.mean_iou_full) + "," +
           detail::format_double(e.mean_iou_unobserved) + "\n";
  for (const auto& [name, e] : rep.seed_means)
    out += name + ",mean," + detail::format_double(e.f_r0) + "," +
           detail::format_double(e.mean_iou_full) + "," +
           detail::format_double(e.mean_iou_unobserved) + "\n";
  return out;
}

inline AblationReport run_ablation_matrix(const ExperimentSpec& base, const LoadedDataset& data,
                                          const PreselectionCache* cache,
                                          const std::vector<uint64_t>& seeds) {
  if (seeds.empty()) throw ConfigError("ablation: need at least one seed");
  AblationReport rep;
  for (const AblationRow& row : ablation_rows()) {
    AblationEntry mean;
    mean.config = row.name;
    mean.seed = 0;
    for (uint64_t seed : seeds) {
      ExperimentSpec spec = base;
      spec.run_id = base.run_id + "_" + row.name + "_s" + std::to_string(seed);
      spec.pairs = row.flags;
      spec.train.seed = seed;
      const RunArtifacts art = run_experiment(spec, data, cache);
      AblationEntry e;
      e.config = row.name;
      e.seed = seed;
      e.f_r0 = art.report.contour_at(0).f_measure;
      e.mean_iou_full = art.report.mean_iou_full;
      e.mean_iou_unobserved = art.report.mean_iou_unobserved;
      rep.entries.push_back(e);
      mean.f_r0 += e.f_r0;
      mean.mean_iou_full += e.mean_iou_full;
      mean.mean_iou_unobserved += e.mean_iou_unobserved;
    }
    mean.f_r0 /= seeds.size();
    mean.mean_iou_full /= seeds.size();
    mean.mean_iou_unobserved /= seeds.size();
    rep.seed_means[row.name] = mean;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Hold-out generalization: unseen prior samples masked with real observation
// patterns from the test split. Here (unlike the partially observed domain)
// the complete ground truth is the prior sample itself.
// ---------------------------------------------------------------------------

inline EvalReport run_holdout_eval(const Checkpoint<float>& ck, const DatasetManifest& manifest,
                                   const LoadedDataset& data, const std::vector<int>& r_sweep,
                                   uint64_t mask_assign_seed = 7) {
  if (data.holdout_prior.empty())
    throw DataError("holdout: the dataset has no hold-out prior samples");
  if (data.test_partial.empty()) throw DataError("holdout: no test masks available");
  // seed pools were checked at generation time; re-verify from the manifest
  detail::check_disjoint_seed_pools(manifest.config);

  std::vector<ObservationMask> masks;
  for (const auto& p : data.test_partial) masks.push_back(split_partial(p).second);

  Rng rng(Rng::derive_seed(mask_assign_seed, "holdout-masks"));
  std::vector<TernaryGrid> inputs;
  std::vector<ObservationMask> unobserved;
  std::vector<BinaryGrid> gts;
  std::vector<std::string> ids;
  for (size_t i = 0; i < data.holdout_prior.size(); ++i) {
    const ObservationMask& mask = masks[rng.below(masks.size())];
    inputs.push_back(compose_partial(data.holdout_prior[i], mask));
    unobserved.push_back(complement(mask));
    gts.push_back(data.holdout_prior[i]);
    ids.push_back("holdout_" + std::to_string(i));
  }
  Network<float> net(ck.config);
  const auto preds = predict(net, std::span<const float>(ck.params), ck.state, inputs);
  return evaluate_predictions(ids, preds, gts, unobserved, r_sweep);
}

// ---------------------------------------------------------------------------
// Report emission: relaxation-curve CSV plus a dependency-free SVG line chart
// (F-measure vs relaxation radius, one polyline per configuration).
// ---------------------------------------------------------------------------

namespace detail {

inline std::string svg_fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace detail

struct CurveSeries {
  std::string label;
  std::vector<std::pair<int, double>> points;  // (r, f)
};

inline std::string render_curve_svg(const std::vector<CurveSeries>& series,
                                    const std::string& y_label = "F-measure") {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  const double width = 640, height = 400;
  const double ml = 60, mr = 160, mt = 20, mb = 45;
  const double pw = width - ml - mr, ph = height - mt - mb;
  int r_max = 1;
  for (const auto& s : series)
    for (const auto& [r, f] : s.points) r_max = std::max(r_max, r);

  const auto sx = [&](double r) { return ml + pw * (r / static_cast<double>(r_max)); };
  const auto sy = [&](double f) { return mt + ph * (1.0 - f); };

  std::string svg =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" "
      "viewBox=\"0 0 640 400\" font-family=\"monospace\" font-size=\"12\">\n";
  svg += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  // axes
  svg += "<line x1=\"" + detail::svg_fixed(ml) + "\" y1=\"" + detail::svg_fixed(mt) +
         "\" x2=\"" + detail::svg_fixed(ml) + "\" y2=\"" + detail::svg_fixed(mt + ph) +
         "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + detail::svg_fixed(ml) + "\" y1=\"" + detail::svg_fixed(mt + ph) +
         "\" x2=\"" + detail::svg_fixed(ml + pw) + "\" y2=\"" + detail::svg_fixed(mt + ph) +
         "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double f = i / 5.0;
    svg += "<line x1=\"" + detail::svg_fixed(ml - 4) + "\" y1=\"" + detail::svg_fixed(sy(f)) +
           "\" x2=\"" + detail::svg_fixed(ml) + "\" y2=\"" + detail::svg_fixed(sy(f)) +
           "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + detail::svg_fixed(ml - 8) + "\" y=\"" + detail::svg_fixed(sy(f) + 4) +
           "\" text-anchor=\"end\">" + detail::svg_fixed(f) + "</text>\n";
  }
  for (int r = 0; r <= r_max; ++r) {
    svg += "<line x1=\"" + detail::svg_fixed(sx(r)) + "\" y1=\"" + detail::svg_fixed(mt + ph) +
           "\" x2=\"" + detail::svg_fixed(sx(r)) + "\" y2=\"" + detail::svg_fixed(mt + ph + 4) +
           "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + detail::svg_fixed(sx(r)) + "\" y=\"" +
           detail::svg_fixed(mt + ph + 18) + "\" text-anchor=\"middle\">" + std::to_string(r) +
           "</text>\n";
  }
  svg += "<text x=\"" + detail::svg_fixed(ml + pw / 2) + "\" y=\"" +
         detail::svg_fixed(height - 10) +
         "\" text-anchor=\"middle\">boundary relaxation radius r</text>\n";
  svg += "<text x=\"15\" y=\"" + detail::svg_fixed(mt + ph / 2) +
         "\" text-anchor=\"middle\" transform=\"rotate(-90 15 " +
         detail::svg_fixed(mt + ph / 2) + ")\">" + y_label + "</text>\n";

  for (size_t si = 0; si < series.size(); ++si) {
    const char* color = palette[si % 8];
    std::string pts;
    for (const auto& [r, f] : series[si].points)
      pts += detail::svg_fixed(sx(r)) + "," + detail::svg_fixed(sy(f)) + " ";
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"" +
           pts + "\"/>\n";
    const double ly = mt + 16 + 18 * static_cast<double>(si);
    svg += "<line x1=\"" + detail::svg_fixed(ml + pw + 10) + "\" y1=\"" + detail::svg_fixed(ly - 4) +
           "\" x2=\"" + detail::svg_fixed(ml + pw + 30) + "\" y2=\"" + detail::svg_fixed(ly - 4) +
           "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + detail::svg_fixed(ml + pw + 35) + "\" y=\"" + detail::svg_fixed(ly) +
           "\">" + series[si].label + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

// Reads eval/report.json under one or more run directories and emits the
// relaxation-curve CSV and SVG chart. Re-emission is byte-identical.
inline void emit_report(const std::string& run_dir) {
  namespace fs = std::filesystem;
  std::vector<std::pair<std::string, fs::path>> found;  // (label, report path)
  const fs::path root(run_dir);
  if (fs::exists(root / "eval" / "report.json"))
    found.emplace_back(root.filename().string(), root / "eval" / "report.json");
  else if (fs::is_directory(root)) {
    std::vector<fs::path> subdirs;
    for (const auto& e : fs::directory_iterator(root))
      if (e.is_directory() && fs::exists(e.path() / "eval" / "report.json"))
        subdirs.push_back(e.path());
    std::sort(subdirs.begin(), subdirs.end());
    for (const auto& p : subdirs) found.emplace_back(p.filename().string(), p / "eval" / "report.json");
  }
  if (found.empty()) throw DataError("emit_report: no eval/report.json under " + run_dir);

  std::vector<CurveSeries> series;
  std::string csv = "config,r,precision,recall,f_measure\n";
  for (const auto& [label, path] : found) {
    const auto bytes = detail::read_file_bytes(path.string());
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ": " + e.what());
    }
    CurveSeries s;
    s.label = label;
    for (const auto& c : j.at("means").at("contour")) {
      const int r = c.at("r").get<int>();
      const double p = c.at("precision").get<double>();
      const double rc = c.at("recall").get<double>();
      const double f = c.at("f_measure").get<double>();
      s.points.emplace_back(r, f);
      csv += label + "," + std::to_string(r) + "," + detail::format_double(p) + "," +
             detail::format_double(rc) + "," + detail::format_double(f) + "\n";
    }
    series.push_back(std::move(s));
  }
  detail::write_file_bytes((root / "relaxation_curves.csv").string(), csv);
  detail::write_file_bytes((root / "relaxation_curves.svg").string(), render_curve_svg(series));
}

}  // namespace hg
