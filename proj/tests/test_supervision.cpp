#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "hallucigrid/supervision.hpp"

using namespace hg;

namespace {

// micro dataset for training-loop tests: tiny worlds, tiny crops
LoadedDataset micro_dataset(int train_n = 12, int test_n = 4, int window = 16) {
  namespace fs = std::filesystem;
  static int counter = 0;
  const auto dir = fs::temp_directory_path() / ("hg_micro_" + std::to_string(counter++));
  fs::remove_all(dir);

  DatasetConfig cfg;
  cfg.window = window;
  cfg.stride = 8;
  cfg.prior_stride = 8;
  cfg.train_count = train_n;
  cfg.test_count = test_n;
  cfg.holdout_count = 8;
  cfg.mask.fov_half_angle = 1.3;
  cfg.mask.dropout_rate = 0.02;
  cfg.mask.occluder_size_min = 2;
  cfg.mask.occluder_size_max = 5;
  for (uint64_t s : {1ull, 2ull}) {
    WorldSpec w;
    w.seed = s;
    w.map_size = 48;
    w.road_count_min = 2;
    w.road_count_max = 3;
    w.road_width_min = 3;
    w.road_width_max = 5;
    cfg.observation_worlds.push_back(w);
  }
  for (uint64_t s : {10ull, 11ull}) {
    WorldSpec w;
    w.seed = s;
    w.map_size = 48;
    w.road_count_min = 2;
    w.road_count_max = 3;
    w.road_width_min = 3;
    w.road_width_max = 4;
    cfg.prior_worlds.push_back(w);
  }
  {
    WorldSpec w;
    w.seed = 30;
    w.map_size = 48;
    w.road_count_min = 2;
    w.road_count_max = 3;
    w.road_width_min = 3;
    w.road_width_max = 4;
    cfg.holdout_prior_worlds.push_back(w);
  }
  const DatasetManifest m = make_dataset(cfg, dir.string());
  return load_dataset(m);
}

template <typename T>
Tensor4<T> random_preds(int n, int h, int w, Rng& rng) {
  Tensor4<T> t(n, 1, h, w);
  for (auto& v : t.v) v = static_cast<T>(rng.uniform(0.02, 0.98));
  return t;
}

}  // namespace

TEST_CASE("masked bce reproduces -log(1/2) on the all-half prediction") {
  Tensor4<double> pred(2, 1, 3, 3, 0.5);
  Tensor4<double> target(2, 1, 3, 3, 1.0);
  Tensor4<uint8_t> valid(2, 1, 3, 3, 1);
  REQUIRE(masked_bce(pred, target, valid) == Catch::Approx(std::log(2.0)).epsilon(1e-12));
  REQUIRE(masked_bce(pred, target, valid) == Catch::Approx(0.693147).epsilon(1e-5));
}

TEST_CASE("fully masked samples contribute nothing") {
  Rng rng(3);
  Tensor4<double> pred = random_preds<double>(3, 4, 4, rng);
  Tensor4<double> target(3, 1, 4, 4);
  for (auto& v : target.v) v = rng.below(2) ? 1.0 : 0.0;
  Tensor4<uint8_t> valid(3, 1, 4, 4, 1);
  for (size_t j = 0; j < 16; ++j) valid.plane(1, 0)[j] = 0;  // sample 1 fully masked

  // equals the masked bce of the remaining two samples alone
  Tensor4<double> pred2(2, 1, 4, 4), target2(2, 1, 4, 4);
  Tensor4<uint8_t> valid2(2, 1, 4, 4, 1);
  for (size_t j = 0; j < 16; ++j) {
    pred2.plane(0, 0)[j] = pred.plane(0, 0)[j];
    pred2.plane(1, 0)[j] = pred.plane(2, 0)[j];
    target2.plane(0, 0)[j] = target.plane(0, 0)[j];
    target2.plane(1, 0)[j] = target.plane(2, 0)[j];
  }
  REQUIRE(masked_bce(pred, target, valid) ==
          Catch::Approx(masked_bce(pred2, target2, valid2)).epsilon(1e-15));
}

TEST_CASE("masked bce agrees with a naive per-cell loop to 1e-12 relative") {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(3));
    Tensor4<double> pred = random_preds<double>(n, 4, 4, rng);
    Tensor4<double> target(n, 1, 4, 4);
    for (auto& v : target.v) v = rng.uniform01();  // targets may be fractional
    Tensor4<uint8_t> valid(n, 1, 4, 4);
    bool any = false;
    for (auto& v : valid.v) {
      v = rng.bernoulli(0.6);
      any |= v != 0;
    }
    if (!any) valid.v[0] = 1;

    double sum = 0.0;
    size_t cnt = 0;
    for (size_t i = 0; i < pred.size(); ++i)
      if (valid.v[i]) {
        sum += -(target.v[i] * std::log(pred.v[i]) +
                 (1.0 - target.v[i]) * std::log(1.0 - pred.v[i]));
        ++cnt;
      }
    const double naive = sum / cnt;
    const double got = masked_bce(pred, target, valid);
    REQUIRE(std::abs(got - naive) <= 1e-12 * std::max(1.0, std::abs(naive)));
  }
}

TEST_CASE("logit-form bce matches the prediction-form bce away from saturation") {
  Rng rng(5);
  Tensor4<double> logits(2, 1, 4, 4);
  for (auto& v : logits.v) v = rng.uniform(-4.0, 4.0);
  Tensor4<double> pred = logits;
  for (auto& v : pred.v) v = 1.0 / (1.0 + std::exp(-v));
  Tensor4<double> target(2, 1, 4, 4);
  for (auto& v : target.v) v = rng.below(2) ? 1.0 : 0.0;
  Tensor4<uint8_t> valid(2, 1, 4, 4, 1);
  REQUIRE(masked_bce_from_logits(logits, target, valid) ==
          Catch::Approx(masked_bce(pred, target, valid)).epsilon(1e-12));
}

TEST_CASE("masked bce rejects an all-invalid batch") {
  Tensor4<double> pred(1, 1, 2, 2, 0.5), target(1, 1, 2, 2, 1.0);
  Tensor4<uint8_t> valid(1, 1, 2, 2, 0);
  REQUIRE_THROWS_AS(masked_bce(pred, target, valid), DataError);
}

TEST_CASE("total loss is the stated weighted sum") {
  REQUIRE(total_loss(1.0, 2.0, 4.0, 0.5, 0.25, 0.25) == 2.0);
  REQUIRE(total_loss(3.0, 100.0, -5.0, 1.0, 0.0, 0.0) == 3.0);
  // permuting (l, lambda) pairs together leaves the sum unchanged
  REQUIRE(total_loss(1.0, 2.0, 4.0, 0.5, 0.25, 0.25) ==
          total_loss(4.0, 1.0, 2.0, 0.25, 0.5, 0.25));
}

TEST_CASE("augmentation flips only observed cells and is seed-pure") {
  TernaryGrid g(4, 4, CellStatus::Unobserved);
  g.at(0, 0) = CellStatus::Road;
  g.at(1, 1) = CellStatus::NonRoad;
  g.at(2, 2) = CellStatus::Road;
  const std::vector<TernaryGrid> batch{g, g};

  SECTION("p = 0 is the identity") {
    const auto out = augment_observed(batch, 0.0, uint64_t(1));
    REQUIRE(out[0] == g);
    REQUIRE(out[1] == g);
  }

  SECTION("p = 1 inverts every observed cell") {
    const auto out = augment_observed(batch, 1.0, uint64_t(1));
    for (const auto& o : out) {
      REQUIRE(o.at(0, 0) == CellStatus::NonRoad);
      REQUIRE(o.at(1, 1) == CellStatus::Road);
      REQUIRE(o.at(2, 2) == CellStatus::NonRoad);
      REQUIRE(o.at(3, 3) == CellStatus::Unobserved);
    }
  }

  SECTION("same seed, same flips") {
    const auto a = augment_observed(batch, 0.5, uint64_t(7));
    const auto b = augment_observed(batch, 0.5, uint64_t(7));
    REQUIRE(a[0] == b[0]);
    REQUIRE(a[1] == b[1]);
  }
}

TEST_CASE("the empirical flip rate at p = 0.15 lands in [0.14, 0.16]") {
  TernaryGrid g(100, 100, CellStatus::Road);  // 10^4 observed cells
  std::vector<TernaryGrid> batch(10, g);      // 10^5 draws
  const auto out = augment_observed(batch, 0.15, uint64_t(2024));
  size_t flips = 0;
  for (const auto& o : out)
    for (auto c : o.cells) flips += c == CellStatus::NonRoad;
  const double rate = static_cast<double>(flips) / (100.0 * 100.0 * 10.0);
  REQUIRE(rate >= 0.14);
  REQUIRE(rate <= 0.16);
}

TEST_CASE("triplets wire the three pairs as specified") {
  const LoadedDataset data = micro_dataset();
  const PackedCorpus corpus = PackedCorpus::pack(data.prior);
  const int k = 3, subset = std::min<int>(32, corpus.count);
  const uint64_t sel_seed = 55;

  namespace fs = std::filesystem;
  const auto cache_path = fs::temp_directory_path() / "hg_triplet_cache.hpsc";
  build_preselection_cache(data.train_partial, data.train_ids, corpus, k, subset, sel_seed,
                           cache_path.string());
  const PreselectionCache cache = PreselectionCache::load(cache_path.string());

  std::vector<ObservationMask> mask_pool;
  for (const auto& p : data.train_partial) mask_pool.push_back(split_partial(p).second);

  std::span<const TernaryGrid> batch(data.train_partial.data(), 4);
  std::span<const std::string> ids(data.train_ids.data(), 4);

  PairFlags flags;
  Rng rng_aug(1), rng_p3(2);
  const auto trip = build_triplet<float>(batch, ids, &cache, data.prior, mask_pool, flags,
                                         0.0, rng_aug, rng_p3);

  SECTION("pair 1 target and mask equal the split of the input") {
    for (int i = 0; i < 4; ++i) {
      const auto [values, mask] = split_partial(batch[i]);
      for (size_t j = 0; j < values.size(); ++j) {
        REQUIRE(trip.valid1.plane(i, 0)[j] == mask.cells[j]);
        REQUIRE(trip.target1.plane(i, 0)[j] == static_cast<float>(values.cells[j]));
      }
    }
  }

  SECTION("pair 2 equals an on-the-fly recomputation") {
    for (int i = 0; i < 4; ++i) {
      const auto selected = topk_select(batch[i], corpus, k, subset, sel_seed);
      const ConsensusTarget fresh = consensus_target(corpus, selected);
      for (size_t j = 0; j < fresh.size(); ++j) {
        REQUIRE(trip.valid2.plane(i, 0)[j] == fresh.valid[j]);
        REQUIRE(trip.target2.plane(i, 0)[j] == static_cast<float>(fresh.target_at(j)));
      }
    }
  }

  SECTION("pair 3 observed cells carry the prior sample's values") {
    // with flip_prob 0 the input is exactly compose(prior, mask)
    for (int i = 0; i < 4; ++i) {
      for (size_t j = 0; j < trip.input3.plane_size(); ++j) {
        const float in = trip.input3.plane(i, 0)[j];
        const float tgt = trip.target3.plane(i, 0)[j];
        REQUIRE(trip.valid3.plane(i, 0)[j] == 1);
        if (in != 0.5f) REQUIRE(in == tgt);  // observed cells match the target
        REQUIRE((tgt == 0.0f || tgt == 1.0f));
      }
    }
  }

  SECTION("cache misses surface as data errors") {
    const std::vector<std::string> bad_ids{"nope_0", "nope_1", "nope_2", "nope_3"};
    Rng a(1), b(2);
    REQUIRE_THROWS_AS(build_triplet<float>(batch, bad_ids, &cache, data.prior, mask_pool,
                                           flags, 0.0, a, b),
                      DataError);
  }

  fs::remove(cache_path);
}

TEST_CASE("loss gradients vanish exactly outside the valid set") {
  Rng rng(6);
  Tensor4<double> logits(2, 1, 4, 4);
  for (auto& v : logits.v) v = rng.uniform(-2.0, 2.0);
  Tensor4<double> target(2, 1, 4, 4, 1.0);
  Tensor4<uint8_t> valid(2, 1, 4, 4);
  for (auto& v : valid.v) v = rng.bernoulli(0.5);
  valid.v[0] = 1;

  Tensor4<double> dlogits(2, 1, 4, 4, 0.0);
  masked_bce_logit_grad(logits, target, valid, 0.7, dlogits);
  for (size_t i = 0; i < valid.size(); ++i)
    if (!valid.v[i]) REQUIRE(dlogits.v[i] == 0.0);

  // perturbing a non-valid prediction leaves the loss unchanged, exactly
  Tensor4<double> pred = logits;
  for (auto& v : pred.v) v = 1.0 / (1.0 + std::exp(-v));
  const double before = masked_bce(pred, target, valid);
  for (size_t i = 0; i < valid.size(); ++i)
    if (!valid.v[i]) pred.v[i] = 0.123;
  REQUIRE(masked_bce(pred, target, valid) == before);
}

TEST_CASE("with only the observation pair, unobserved cells get zero gradient") {
  // lambda = (1,0,0): the combined gradient at never-observed cells is exactly 0
  const LoadedDataset data = micro_dataset();
  std::span<const TernaryGrid> batch(data.train_partial.data(), 2);
  std::span<const std::string> ids(data.train_ids.data(), 2);
  PairFlags flags;
  flags.pair2 = flags.pair3 = false;
  Rng a(1), b(2);
  const auto trip = build_triplet<double>(batch, ids, nullptr, {}, {}, flags, 0.0, a, b);

  Rng rng(8);
  Tensor4<double> logits(2, 1, trip.input12.h, trip.input12.w);
  for (auto& v : logits.v) v = rng.uniform(-1.0, 1.0);
  Tensor4<double> dlogits(2, 1, logits.h, logits.w, 0.0);
  masked_bce_logit_grad(logits, trip.target1, trip.valid1, 1.0, dlogits);
  for (size_t i = 0; i < dlogits.size(); ++i)
    if (!trip.valid1.v[i]) REQUIRE(dlogits.v[i] == 0.0);
}

TEST_CASE("training is deterministic and writes replayable artifacts") {
  namespace fs = std::filesystem;
  const LoadedDataset data = micro_dataset(8, 2);
  const PackedCorpus corpus = PackedCorpus::pack(data.prior);

  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 4;
  tc.k = 3;
  tc.subset_size = std::min<int>(24, corpus.count);
  tc.seed = 42;
  tc.val_every = 1;

  NetConfig nc;
  nc.depth = 2;
  nc.base_channels = 2;
  nc.skip_levels = 2;

  const auto cache_path = fs::temp_directory_path() / "hg_train_cache.hpsc";
  build_preselection_cache(data.train_partial, data.train_ids, corpus, tc.k, tc.subset_size,
                           tc.seed_preselect(), cache_path.string());
  const PreselectionCache cache = PreselectionCache::load(cache_path.string());

  const auto dir1 = fs::temp_directory_path() / "hg_train_run1";
  const auto dir2 = fs::temp_directory_path() / "hg_train_run2";
  fs::remove_all(dir1);
  fs::remove_all(dir2);

  const TrainResult r1 = train(tc, nc, data, &cache, dir1.string());
  const TrainResult r2 = train(tc, nc, data, &cache, dir2.string());

  REQUIRE(hg::detail::read_file_bytes(r1.checkpoint_path) ==
          hg::detail::read_file_bytes(r2.checkpoint_path));
  REQUIRE(hg::detail::read_file_bytes(r1.log_path) ==
          hg::detail::read_file_bytes(r2.log_path));
  REQUIRE(r1.log.size() == 2);
  REQUIRE(r1.log[0].loss_observation.has_value());
  REQUIRE(r1.log[0].val_mean_iou_full.has_value());

  fs::remove_all(dir1);
  fs::remove_all(dir2);
  fs::remove(cache_path);
}

TEST_CASE("a numerically exploding run aborts with a diagnostic checkpoint") {
  namespace fs = std::filesystem;
  const LoadedDataset data = micro_dataset(8, 0);

  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 4;
  tc.lr = 1e28;  // drives the logits to inf within a couple of steps
  tc.seed = 1;
  tc.val_every = 0;

  NetConfig nc;
  nc.depth = 2;
  nc.base_channels = 2;
  nc.skip_levels = 2;
  nc.norm = false;

  PairFlags flags;
  flags.pair2 = false;  // no cache needed

  const auto dir = fs::temp_directory_path() / "hg_train_explode";
  fs::remove_all(dir);
  REQUIRE_THROWS_AS(train(tc, nc, data, nullptr, dir.string(), flags), NumericError);
  REQUIRE(fs::exists(dir / "diagnostic.hnet"));
  fs::remove_all(dir);
}

TEST_CASE("log columns disappear with their pairs") {
  std::vector<EpochLog> log(1);
  log[0].epoch = 1;
  log[0].loss_observation = 0.5;
  log[0].loss_prior = 0.25;
  log[0].loss_total = 0.75;

  PairFlags flags;
  flags.pair2 = false;
  const std::string csv = training_log_csv(log, flags);
  REQUIRE(csv.find("loss_preselection") == std::string::npos);
  REQUIRE(csv.find("loss_observation") != std::string::npos);
  REQUIRE(csv.find("loss_prior") != std::string::npos);
}
