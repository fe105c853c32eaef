#pragma once
// Dataset assembly: synthesizes observation worlds and prior worlds from
// disjoint seed pools, crops them, applies per-sample sensing masks, and
// writes everything as HGRD1 files plus a JSON manifest that makes the run
// replayable.

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hallucigrid/datagen.hpp"
#include "hallucigrid/grid.hpp"

namespace hg {

using json = nlohmann::json;

inline void to_json(json& j, const WorldSpec& s) {
  j = json{{"seed", s.seed},
           {"map_size", s.map_size},
           {"road_count", {s.road_count_min, s.road_count_max}},
           {"road_width", {s.road_width_min, s.road_width_max}},
           {"curvature", s.curvature}};
}
inline void from_json(const json& j, WorldSpec& s) {
  s.seed = j.at("seed").get<uint64_t>();
  s.map_size = j.at("map_size").get<int>();
  s.road_count_min = j.at("road_count").at(0).get<int>();
  s.road_count_max = j.at("road_count").at(1).get<int>();
  s.road_width_min = j.at("road_width").at(0).get<int>();
  s.road_width_max = j.at("road_width").at(1).get<int>();
  s.curvature = j.at("curvature").get<double>();
}

inline void to_json(json& j, const MaskSpec& s) {
  j = json{{"seed", s.seed},
           {"fov_half_angle", s.fov_half_angle},
           {"apex_col", s.apex_col},
           {"occluder_count", {s.occluder_count_min, s.occluder_count_max}},
           {"occluder_size", {s.occluder_size_min, s.occluder_size_max}},
           {"dropout_rate", s.dropout_rate}};
}
inline void from_json(const json& j, MaskSpec& s) {
  s.seed = j.at("seed").get<uint64_t>();
  s.fov_half_angle = j.at("fov_half_angle").get<double>();
  s.apex_col = j.at("apex_col").get<double>();
  s.occluder_count_min = j.at("occluder_count").at(0).get<int>();
  s.occluder_count_max = j.at("occluder_count").at(1).get<int>();
  s.occluder_size_min = j.at("occluder_size").at(0).get<int>();
  s.occluder_size_max = j.at("occluder_size").at(1).get<int>();
  s.dropout_rate = j.at("dropout_rate").get<double>();
}

struct DatasetConfig {
  int window = 64;
  int stride = 16;        // observation-world crops
  int prior_stride = 16;  // prior-world crops
  int train_count = 0;    // 0 = derive from train_ratio
  int test_count = 0;
  double train_ratio = 0.8;
  int holdout_count = 256;  // cap on hold-out prior crops, 0 = keep all
  uint64_t mask_seed_base = 1;
  uint64_t split_seed = 2;
  std::vector<WorldSpec> observation_worlds;
  std::vector<WorldSpec> prior_worlds;
  std::vector<WorldSpec> holdout_prior_worlds;
  MaskSpec mask;
};

inline void to_json(json& j, const DatasetConfig& c) {
  j = json{{"window", c.window},
           {"stride", c.stride},
           {"prior_stride", c.prior_stride},
           {"train_count", c.train_count},
           {"test_count", c.test_count},
           {"train_ratio", c.train_ratio},
           {"holdout_count", c.holdout_count},
           {"mask_seed_base", c.mask_seed_base},
           {"split_seed", c.split_seed},
           {"observation_worlds", c.observation_worlds},
           {"prior_worlds", c.prior_worlds},
           {"holdout_prior_worlds", c.holdout_prior_worlds},
           {"mask", c.mask}};
}
inline void from_json(const json& j, DatasetConfig& c) {
  c.window = j.at("window").get<int>();
  c.stride = j.at("stride").get<int>();
  c.prior_stride = j.value("prior_stride", c.stride);
  c.train_count = j.value("train_count", 0);
  c.test_count = j.value("test_count", 0);
  c.train_ratio = j.value("train_ratio", 0.8);
  c.holdout_count = j.value("holdout_count", 0);
  c.mask_seed_base = j.value("mask_seed_base", uint64_t(1));
  c.split_seed = j.value("split_seed", uint64_t(2));
  c.observation_worlds = j.at("observation_worlds").get<std::vector<WorldSpec>>();
  c.prior_worlds = j.at("prior_worlds").get<std::vector<WorldSpec>>();
  if (j.contains("holdout_prior_worlds"))
    c.holdout_prior_worlds = j.at("holdout_prior_worlds").get<std::vector<WorldSpec>>();
  c.mask = j.at("mask").get<MaskSpec>();
}

struct SampleRef {
  std::string id;
  std::string partial_file;
  std::string gt_file;
  uint64_t world_seed = 0;
  int crop_index = 0;
  uint64_t mask_seed = 0;
};

inline void to_json(json& j, const SampleRef& s) {
  j = json{{"id", s.id},          {"partial", s.partial_file}, {"gt", s.gt_file},
           {"world_seed", s.world_seed}, {"crop_index", s.crop_index}, {"mask_seed", s.mask_seed}};
}
inline void from_json(const json& j, SampleRef& s) {
  s.id = j.at("id").get<std::string>();
  s.partial_file = j.at("partial").get<std::string>();
  s.gt_file = j.at("gt").get<std::string>();
  s.world_seed = j.at("world_seed").get<uint64_t>();
  s.crop_index = j.at("crop_index").get<int>();
  s.mask_seed = j.at("mask_seed").get<uint64_t>();
}

struct DatasetManifest {
  DatasetConfig config;
  std::string root;  // directory the file lists are relative to
  std::vector<SampleRef> train;
  std::vector<SampleRef> test;
  std::vector<std::string> prior_files;
  std::vector<std::string> holdout_files;
};

namespace detail {

inline void check_disjoint_seed_pools(const DatasetConfig& c) {
  std::set<uint64_t> obs, prior;
  for (const auto& w : c.observation_worlds) obs.insert(w.seed);
  for (const auto& w : c.prior_worlds) prior.insert(w.seed);
  for (const auto& w : c.holdout_prior_worlds) {
    if (prior.count(w.seed))
      throw DataError("dataset: hold-out prior seed " + std::to_string(w.seed) +
                      " overlaps the prior corpus pool");
    prior.insert(w.seed);
  }
  for (uint64_t s : prior)
    if (obs.count(s))
      throw DataError("dataset: seed " + std::to_string(s) +
                      " appears in both observation and prior world pools");
}

inline std::string sample_name(const char* prefix, size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%05zu", prefix, i);
  return buf;
}

}  // namespace detail

// Generates the full benchmark into out_dir:
//   prior/*.hgrd         unpaired prior-knowledge crops (binary)
//   train/, test/        partial observations + their withheld ground truth
//   holdout/*.hgrd       unseen prior crops for the generalization test
//   manifest.json
// Partial samples and prior samples come from disjoint world seed pools.
inline DatasetManifest make_dataset(const DatasetConfig& config, const std::string& out_dir) {
  namespace fs = std::filesystem;
  if (config.observation_worlds.empty() || config.prior_worlds.empty())
    throw ConfigError("dataset: need at least one observation world and one prior world");
  if (config.window < 8) throw ConfigError("dataset: window must be >= 8");
  detail::check_disjoint_seed_pools(config);
  for (const auto& w : config.observation_worlds) w.validate();
  for (const auto& w : config.prior_worlds) w.validate();
  for (const auto& w : config.holdout_prior_worlds) w.validate();
  config.mask.validate();

  fs::create_directories(fs::path(out_dir) / "prior");
  fs::create_directories(fs::path(out_dir) / "train");
  fs::create_directories(fs::path(out_dir) / "test");
  if (!config.holdout_prior_worlds.empty()) fs::create_directories(fs::path(out_dir) / "holdout");

  DatasetManifest m;
  m.config = config;
  m.root = out_dir;

  // prior corpus
  for (const auto& w : config.prior_worlds) {
    const BinaryGrid world = synth_world(w);
    for (auto& crop : slide_crop(world, config.window, config.window, config.prior_stride)) {
      const std::string rel = "prior/" + detail::sample_name("prior", m.prior_files.size()) + ".hgrd";
      write_grid(crop, (fs::path(out_dir) / rel).string());
      m.prior_files.push_back(rel);
    }
  }

  // hold-out prior crops (unseen road layouts, §-style generalization probe)
  for (const auto& w : config.holdout_prior_worlds) {
    if (config.holdout_count > 0 &&
        m.holdout_files.size() >= static_cast<size_t>(config.holdout_count))
      break;
    const BinaryGrid world = synth_world(w);
    for (auto& crop : slide_crop(world, config.window, config.window, config.prior_stride)) {
      if (config.holdout_count > 0 &&
          m.holdout_files.size() >= static_cast<size_t>(config.holdout_count))
        break;
      const std::string rel =
          "holdout/" + detail::sample_name("holdout", m.holdout_files.size()) + ".hgrd";
      write_grid(crop, (fs::path(out_dir) / rel).string());
      m.holdout_files.push_back(rel);
    }
  }

  // partial observations: crop the observation worlds, then mask each crop
  struct PoolEntry {
    size_t world;
    int crop_index;
  };
  std::vector<PoolEntry> pool;
  std::vector<std::vector<BinaryGrid>> world_crops(config.observation_worlds.size());
  for (size_t wi = 0; wi < config.observation_worlds.size(); ++wi) {
    const BinaryGrid world = synth_world(config.observation_worlds[wi]);
    world_crops[wi] = slide_crop(world, config.window, config.window, config.stride);
    for (int ci = 0; ci < static_cast<int>(world_crops[wi].size()); ++ci)
      pool.push_back({wi, ci});
  }

  Rng split_rng(Rng::derive_seed(config.split_seed, "split"));
  split_rng.shuffle(pool);

  size_t n_train = config.train_count > 0
                       ? static_cast<size_t>(config.train_count)
                       : static_cast<size_t>(config.train_ratio * pool.size());
  size_t n_test = config.test_count > 0 ? static_cast<size_t>(config.test_count)
                                        : pool.size() - n_train;
  if (n_train + n_test > pool.size())
    throw ConfigError("dataset: requested " + std::to_string(n_train + n_test) +
                      " partial samples but only " + std::to_string(pool.size()) +
                      " crops are available");

  const auto emit_split = [&](const char* split, size_t offset, size_t count,
                              std::vector<SampleRef>& out) {
    for (size_t i = 0; i < count; ++i) {
      const PoolEntry& e = pool[offset + i];
      const BinaryGrid& truth = world_crops[e.world][e.crop_index];
      SampleRef ref;
      ref.id = detail::sample_name(split, i);
      ref.world_seed = config.observation_worlds[e.world].seed;
      ref.crop_index = e.crop_index;

      // a mask must observe at least one cell; retry with a fresh derived seed
      ObservationMask mask;
      MaskSpec ms = config.mask;
      for (uint64_t attempt = 0;; ++attempt) {
        if (attempt >= 64) throw NumericError("dataset: cannot generate a non-empty mask");
        ms.seed = Rng::derive_seed(config.mask_seed_base, "sample-mask",
                                   (offset + i) * 64 + attempt);
        mask = synth_mask(ms, truth.height, truth.width);
        if (mask.observed_count() > 0) break;
      }
      ref.mask_seed = ms.seed;

      const TernaryGrid partial = compose_partial(truth, mask);
      ref.partial_file = std::string(split) + "/" + ref.id + "_partial.hgrd";
      ref.gt_file = std::string(split) + "/" + ref.id + "_gt.hgrd";
      write_grid(partial, (fs::path(out_dir) / ref.partial_file).string());
      write_grid(truth, (fs::path(out_dir) / ref.gt_file).string());
      out.push_back(std::move(ref));
    }
  };
  emit_split("train", 0, n_train, m.train);
  emit_split("test", n_train, n_test, m.test);

  json j;
  j["format"] = "hallucigrid-dataset-v1";
  j["config"] = config;
  j["train"] = m.train;
  j["test"] = m.test;
  j["prior"] = m.prior_files;
  j["holdout_prior"] = m.holdout_files;
  detail::write_file_bytes((fs::path(out_dir) / "manifest.json").string(), j.dump(2) + "\n");
  return m;
}

inline DatasetManifest load_manifest(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  fs::path p(manifest_path);
  if (fs::is_directory(p)) p /= "manifest.json";
  const auto bytes = detail::read_file_bytes(p.string());
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw DataError(p.string() + ": " + e.what());
  }
  if (j.value("format", "") != "hallucigrid-dataset-v1")
    throw DataError(p.string() + ": not a dataset manifest");
  DatasetManifest m;
  m.config = j.at("config").get<DatasetConfig>();
  m.root = p.parent_path().string();
  m.train = j.at("train").get<std::vector<SampleRef>>();
  m.test = j.at("test").get<std::vector<SampleRef>>();
  m.prior_files = j.at("prior").get<std::vector<std::string>>();
  m.holdout_files = j.at("holdout_prior").get<std::vector<std::string>>();
  return m;
}

// Everything loaded into memory (desk-scale datasets fit easily).
struct LoadedDataset {
  std::vector<std::string> train_ids, test_ids;
  std::vector<TernaryGrid> train_partial, test_partial;
  std::vector<BinaryGrid> train_gt, test_gt;
  std::vector<BinaryGrid> prior;
  std::vector<BinaryGrid> holdout_prior;
};

inline LoadedDataset load_dataset(const DatasetManifest& m) {
  namespace fs = std::filesystem;
  LoadedDataset d;
  const auto abs = [&](const std::string& rel) { return (fs::path(m.root) / rel).string(); };
  for (const auto& s : m.train) {
    d.train_ids.push_back(s.id);
    d.train_partial.push_back(read_ternary_grid(abs(s.partial_file)));
    d.train_gt.push_back(read_binary_grid(abs(s.gt_file)));
  }
  for (const auto& s : m.test) {
    d.test_ids.push_back(s.id);
    d.test_partial.push_back(read_ternary_grid(abs(s.partial_file)));
    d.test_gt.push_back(read_binary_grid(abs(s.gt_file)));
  }
  for (const auto& f : m.prior_files) d.prior.push_back(read_binary_grid(abs(f)));
  for (const auto& f : m.holdout_files) d.holdout_prior.push_back(read_binary_grid(abs(f)));
  return d;
}

}  // namespace hg
