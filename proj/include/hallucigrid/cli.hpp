#pragma once
// CLI front end. Subcommands: gen-data, build-cache, train, eval, ablate,
// holdout, report. Everything is driven by one JSON config file; --seed and
// --out override the training seed and the output location.
// Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric failure.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hallucigrid/harness.hpp"

namespace hg {

namespace detail {

inline PreselectionCache require_cache(const ExperimentConfig& cfg) {
  if (!std::filesystem::exists(cfg.cache_path))
    throw DataError("preselection cache not found at " + cfg.cache_path +
                    " (run build-cache first)");
  return PreselectionCache::load(cfg.cache_path);
}

inline LoadedDataset require_data(const ExperimentConfig& cfg, DatasetManifest& manifest) {
  manifest = load_manifest(cfg.data_dir);
  return load_dataset(manifest);
}

}  // namespace detail

inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"hallucigrid: grid-map completion from partial observations and unpaired priors"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  uint64_t seed_override = 0;
  bool has_seed = false;
  app.add_option("-c,--config", config_path, "experiment config (JSON)")->required();
  app.add_option("-o,--out", out_override, "override the subcommand's output path");
  app.add_flag_callback("--version", [] {});
  auto* seed_opt = app.add_option("-s,--seed", seed_override, "override the training seed");

  auto* cmd_gen = app.add_subcommand("gen-data", "generate the synthetic benchmark datasets");
  auto* cmd_cache = app.add_subcommand("build-cache", "precompute pre-selection targets");
  auto* cmd_train = app.add_subcommand("train", "run single-step training");
  auto* cmd_eval = app.add_subcommand("eval", "evaluate a trained run on the test split");
  auto* cmd_ablate = app.add_subcommand("ablate", "train and tabulate the supervision ablation matrix");
  auto* cmd_holdout = app.add_subcommand("holdout", "evaluate on unseen masked prior samples");
  auto* cmd_report = app.add_subcommand("report", "emit relaxation-curve CSV and SVG for a run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return 0;  // --help
    std::cerr << e.what() << "\n";
    return 2;
  }
  has_seed = seed_opt->count() > 0;

  try {
    ExperimentConfig cfg = load_experiment_config(config_path);
    if (has_seed) cfg.train.seed = seed_override;

    if (cmd_gen->parsed()) {
      const std::string out = out_override.empty() ? cfg.data_dir : out_override;
      const DatasetManifest m = make_dataset(cfg.dataset, out);
      std::cout << "dataset written to " << out << ": " << m.train.size() << " train, "
                << m.test.size() << " test, " << m.prior_files.size() << " prior, "
                << m.holdout_files.size() << " hold-out samples\n";
      return 0;
    }

    if (cmd_cache->parsed()) {
      DatasetManifest manifest;
      const LoadedDataset data = detail::require_data(cfg, manifest);
      const std::string out = out_override.empty() ? cfg.cache_path : out_override;
      const PackedCorpus corpus = PackedCorpus::pack(data.prior);
      const int subset = cfg.train.subset_size > 0
                             ? cfg.train.subset_size
                             : std::min<int>(1024, corpus.count);
      if (const auto parent = std::filesystem::path(out).parent_path(); !parent.empty())
        std::filesystem::create_directories(parent);
      build_preselection_cache(data.train_partial, data.train_ids, corpus, cfg.train.k, subset,
                               cfg.train.seed_preselect(), out);
      std::cout << "preselection cache written to " << out << " (" << data.train_partial.size()
                << " entries, k=" << cfg.train.k << ", subset=" << subset << ")\n";
      return 0;
    }

    if (cmd_train->parsed()) {
      DatasetManifest manifest;
      const LoadedDataset data = detail::require_data(cfg, manifest);
      PreselectionCache cache;
      const PreselectionCache* cache_ptr = nullptr;
      if (cfg.pairs.pair2) {
        cache = detail::require_cache(cfg);
        cache_ptr = &cache;
      }
      ExperimentSpec spec{cfg.run_id, out_override.empty() ? cfg.runs_dir : out_override,
                          cfg.train, cfg.net, cfg.pairs, cfg.eval};
      const RunArtifacts art = run_experiment(spec, data, cache_ptr);
      std::cout << "run " << cfg.run_id << " complete: checkpoint " << art.checkpoint_path
                << "\n";
      if (!art.report_path.empty()) {
        std::cout << "  test mean IoU (full/unobserved): "
                  << detail::format_double(art.report.mean_iou_full) << " / "
                  << detail::format_double(art.report.mean_iou_unobserved)
                  << ", F(r=0): " << detail::format_double(art.report.contour_at(0).f_measure)
                  << "\n";
      }
      return 0;
    }

    if (cmd_eval->parsed()) {
      DatasetManifest manifest;
      const LoadedDataset data = detail::require_data(cfg, manifest);
      const auto run_dir = std::filesystem::path(cfg.runs_dir) / cfg.run_id;
      const Checkpoint<float> ck = load_checkpoint<float>((run_dir / "model.hnet").string());
      Network<float> net(ck.config);
      std::vector<ObservationMask> unobserved;
      for (const auto& p : data.test_partial)
        unobserved.push_back(complement(split_partial(p).second));
      const auto preds =
          predict(net, std::span<const float>(ck.params), ck.state, data.test_partial);
      const EvalReport rep = evaluate_predictions(data.test_ids, preds, data.test_gt,
                                                  unobserved, cfg.eval.r_sweep);
      const auto out_dir = out_override.empty() ? (run_dir / "eval") : std::filesystem::path(out_override);
      std::filesystem::create_directories(out_dir);
      write_eval_report(rep, (out_dir / "report.json").string());
      detail::write_file_bytes((out_dir / "relaxation.csv").string(), relaxation_curve_csv(rep));
      std::cout << "eval: mean IoU full " << detail::format_double(rep.mean_iou_full)
                << ", unobserved " << detail::format_double(rep.mean_iou_unobserved) << ", F(r=0) "
                << detail::format_double(rep.contour_at(0).f_measure) << "\n";
      return 0;
    }

    if (cmd_ablate->parsed()) {
      DatasetManifest manifest;
      const LoadedDataset data = detail::require_data(cfg, manifest);
      PreselectionCache cache = detail::require_cache(cfg);
      ExperimentSpec base{cfg.run_id, out_override.empty() ? cfg.runs_dir : out_override,
                          cfg.train, cfg.net, cfg.pairs, cfg.eval};
      const AblationReport rep = run_ablation_matrix(base, data, &cache, cfg.ablate.seeds);
      const auto table_path =
          std::filesystem::path(base.out_dir) / (cfg.run_id + "_ablation.csv");
      detail::write_file_bytes(table_path.string(), ablation_table_csv(rep));
      std::cout << "ablation table written to " << table_path.string() << "\n";
      for (const auto& [name, e] : rep.seed_means)
        std::cout << "  " << name << ": F(r=0) " << detail::format_double(e.f_r0)
                  << ", mIoU full " << detail::format_double(e.mean_iou_full) << ", unobserved "
                  << detail::format_double(e.mean_iou_unobserved) << "\n";
      return 0;
    }

    if (cmd_holdout->parsed()) {
      DatasetManifest manifest;
      const LoadedDataset data = detail::require_data(cfg, manifest);
      const auto run_dir = std::filesystem::path(cfg.runs_dir) / cfg.run_id;
      const Checkpoint<float> ck = load_checkpoint<float>((run_dir / "model.hnet").string());
      const EvalReport rep = run_holdout_eval(ck, manifest, data, cfg.eval.r_sweep);
      const auto out_dir =
          out_override.empty() ? (run_dir / "holdout") : std::filesystem::path(out_override);
      std::filesystem::create_directories(out_dir);
      write_eval_report(rep, (out_dir / "report.json").string());
      detail::write_file_bytes((out_dir / "relaxation.csv").string(), relaxation_curve_csv(rep));
      std::cout << "holdout: mean IoU full " << detail::format_double(rep.mean_iou_full)
                << ", unobserved " << detail::format_double(rep.mean_iou_unobserved)
                << ", F(r=0) " << detail::format_double(rep.contour_at(0).f_measure) << "\n";
      return 0;
    }

    if (cmd_report->parsed()) {
      const std::string run_dir = out_override.empty()
                                      ? (std::filesystem::path(cfg.runs_dir) / cfg.run_id).string()
                                      : out_override;
      emit_report(run_dir);
      std::cout << "report written under " << run_dir << "\n";
      return 0;
    }

    std::cerr << "no subcommand given\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace hg
