#pragma once
// Single-step training with three simultaneous masked supervisions per
// iteration:
//   pair 1 (observation):     reconstruct the observed cells of a partial map;
//   pair 2 (pre-selection):   match the top-K prior consensus where unanimous;
//   pair 3 (masked prior):    complete a prior sample hidden behind a real mask.
// Pairs 1 and 2 share one input batch; pair 3 draws prior samples and masks
// from dedicated seed streams. The combined loss is the weighted sum of the
// three masked BCEs, optimized with Adam.

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hallucigrid/checkpoint.hpp"
#include "hallucigrid/dataset.hpp"
#include "hallucigrid/eval.hpp"
#include "hallucigrid/loss.hpp"
#include "hallucigrid/net.hpp"
#include "hallucigrid/optim.hpp"
#include "hallucigrid/preselect.hpp"

namespace hg {

struct TrainConfig {
  double lambda1 = 0.5;
  double lambda2 = 0.25;
  double lambda3 = 0.25;
  int epochs = 60;
  int batch_size = 16;
  double lr = 1e-3;
  double flip_prob = 0.15;  // observed-pixel inversion augmentation
  int k = 8;                // pre-selection count
  int subset_size = 0;      // candidate subset for pre-selection; 0 = min(1024, corpus)
  int val_every = 1;        // epochs between validation passes (0 = never)
  uint64_t seed = 1;        // master seed; substreams derive from it

  void validate() const {
    if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0)
      throw ConfigError("TrainConfig: loss weights must be >= 0");
    if (epochs < 1) throw ConfigError("TrainConfig: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
    if (!(lr > 0)) throw ConfigError("TrainConfig: lr must be > 0");
    if (flip_prob < 0.0 || flip_prob > 1.0)
      throw ConfigError("TrainConfig: flip_prob must be in [0,1]");
    if (k < 1) throw ConfigError("TrainConfig: k must be >= 1");
  }

  uint64_t seed_init() const { return Rng::derive_seed(seed, "train-init"); }
  uint64_t seed_order() const { return Rng::derive_seed(seed, "train-order"); }
  uint64_t seed_augment() const { return Rng::derive_seed(seed, "train-augment"); }
  uint64_t seed_pair3() const { return Rng::derive_seed(seed, "train-pair3"); }
  uint64_t seed_preselect() const { return Rng::derive_seed(seed, "preselect"); }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"lambda1", c.lambda1},   {"lambda2", c.lambda2},
                     {"lambda3", c.lambda3},   {"epochs", c.epochs},
                     {"batch_size", c.batch_size}, {"lr", c.lr},
                     {"flip_prob", c.flip_prob},   {"k", c.k},
                     {"subset_size", c.subset_size}, {"val_every", c.val_every},
                     {"seed", c.seed}};
}
inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.lambda1 = j.value("lambda1", d.lambda1);
  c.lambda2 = j.value("lambda2", d.lambda2);
  c.lambda3 = j.value("lambda3", d.lambda3);
  c.epochs = j.value("epochs", d.epochs);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.lr = j.value("lr", d.lr);
  c.flip_prob = j.value("flip_prob", d.flip_prob);
  c.k = j.value("k", d.k);
  c.subset_size = j.value("subset_size", d.subset_size);
  c.val_every = j.value("val_every", d.val_every);
  c.seed = j.value("seed", d.seed);
}

// Which of the three supervisions are active (ablation switch). A disabled
// pair contributes no loss, no gradient, and no log column.
struct PairFlags {
  bool pair1 = true;
  bool pair2 = true;
  bool pair3 = true;

  void validate() const {
    if (!pair1 && !pair2 && !pair3)
      throw ConfigError("at least one supervision pair must be enabled");
  }
};

// Flip observed cells road<->non-road with probability p; unobserved cells are
// untouched. One Bernoulli draw per observed cell, in sample then row-major
// order, so the result is a pure function of the stream position.
inline std::vector<TernaryGrid> augment_observed(std::span<const TernaryGrid> batch, double p,
                                                 Rng& rng) {
  std::vector<TernaryGrid> out(batch.begin(), batch.end());
  if (p <= 0.0) return out;
  for (auto& g : out)
    for (auto& cell : g.cells) {
      if (cell == CellStatus::Unobserved) continue;
      if (rng.bernoulli(p))
        cell = cell == CellStatus::Road ? CellStatus::NonRoad : CellStatus::Road;
    }
  return out;
}

inline std::vector<TernaryGrid> augment_observed(std::span<const TernaryGrid> batch, double p,
                                                 uint64_t seed) {
  Rng rng(Rng::derive_seed(seed, "augment"));
  return augment_observed(batch, p, rng);
}

template <typename T>
struct SupervisionTriplet {
  Tensor4<T> input12;  // pairs 1 and 2 share the identical input batch
  Tensor4<T> target1;
  Tensor4<uint8_t> valid1;
  Tensor4<T> target2;
  Tensor4<uint8_t> valid2;
  Tensor4<T> input3;
  Tensor4<T> target3;
  Tensor4<uint8_t> valid3;  // all cells
};

// Assembles one iteration's three input-target pairs.
//   pair1: target = observed values of the pre-augmentation partials, valid = their masks
//   pair2: target/valid from the pre-selection cache
//   pair3: input = prior sample behind a real mask, target = the full sample
// The inputs are augmented after composition; targets never are.
template <typename T>
SupervisionTriplet<T> build_triplet(std::span<const TernaryGrid> partials,
                                    std::span<const std::string> ids,
                                    const PreselectionCache* cache,
                                    std::span<const BinaryGrid> prior,
                                    std::span<const ObservationMask> mask_pool,
                                    const PairFlags& flags, double flip_prob, Rng& rng_augment,
                                    Rng& rng_pair3) {
  if (partials.empty()) throw DataError("build_triplet: empty batch");
  const int n = static_cast<int>(partials.size());
  const int h = partials[0].height, w = partials[0].width;

  SupervisionTriplet<T> t;
  t.input12 = encode_ternary_batch<T>(augment_observed(partials, flip_prob, rng_augment));

  t.target1 = Tensor4<T>(n, 1, h, w);
  t.valid1 = Tensor4<uint8_t>(n, 1, h, w, 0);
  for (int i = 0; i < n; ++i) {
    detail::check_same_dims(partials[i].height, partials[i].width, h, w, "build_triplet");
    const auto [values, mask] = split_partial(partials[i]);
    T* tp = t.target1.plane(i, 0);
    uint8_t* vp = t.valid1.plane(i, 0);
    for (size_t j = 0; j < values.size(); ++j) {
      tp[j] = static_cast<T>(values.cells[j]);
      vp[j] = mask.cells[j];
    }
  }

  if (flags.pair2) {
    if (!cache) throw DataError("build_triplet: pair 2 requires a preselection cache");
    if (ids.size() != partials.size())
      throw DataError("build_triplet: ids and partials differ in length");
    t.target2 = Tensor4<T>(n, 1, h, w);
    t.valid2 = Tensor4<uint8_t>(n, 1, h, w, 0);
    for (int i = 0; i < n; ++i) {
      const ConsensusTarget ct = cache->get(ids[i]);
      detail::check_same_dims(ct.height, ct.width, h, w, "build_triplet: cache entry");
      T* tp = t.target2.plane(i, 0);
      uint8_t* vp = t.valid2.plane(i, 0);
      for (size_t j = 0; j < ct.size(); ++j) {
        tp[j] = static_cast<T>(ct.target_at(j));
        vp[j] = ct.valid[j];
      }
    }
  }

  if (flags.pair3) {
    if (prior.empty() || mask_pool.empty())
      throw DataError("build_triplet: pair 3 requires prior samples and a mask pool");
    std::vector<TernaryGrid> masked;
    masked.reserve(n);
    t.target3 = Tensor4<T>(n, 1, h, w);
    t.valid3 = Tensor4<uint8_t>(n, 1, h, w, 1);
    for (int i = 0; i < n; ++i) {
      const BinaryGrid& sample = prior[rng_pair3.below(prior.size())];
      const ObservationMask& mask = mask_pool[rng_pair3.below(mask_pool.size())];
      masked.push_back(compose_partial(sample, mask));
      T* tp = t.target3.plane(i, 0);
      for (size_t j = 0; j < sample.size(); ++j) tp[j] = static_cast<T>(sample.cells[j]);
    }
    t.input3 = encode_ternary_batch<T>(augment_observed(masked, flip_prob, rng_augment));
  }
  return t;
}

struct EpochLog {
  int epoch = 0;
  std::optional<double> loss_observation, loss_preselection, loss_prior;
  double loss_total = 0.0;
  std::optional<double> val_mean_iou_full, val_mean_iou_unobserved, val_f_measure_r0;
};

inline std::string training_log_csv(std::span<const EpochLog> log, const PairFlags& flags) {
  std::string out = "epoch";
  if (flags.pair1) out += ",loss_observation";
  if (flags.pair2) out += ",loss_preselection";
  if (flags.pair3) out += ",loss_prior";
  out += ",loss_total,val_mean_iou_full,val_mean_iou_unobserved,val_f_measure_r0\n";
  const auto cell = [](const std::optional<double>& v) {
    return v ? detail::format_double(*v) : std::string();
  };
  for (const EpochLog& e : log) {
    out += std::to_string(e.epoch);
    if (flags.pair1) out += "," + cell(e.loss_observation);
    if (flags.pair2) out += "," + cell(e.loss_preselection);
    if (flags.pair3) out += "," + cell(e.loss_prior);
    out += "," + detail::format_double(e.loss_total);
    out += "," + cell(e.val_mean_iou_full) + "," + cell(e.val_mean_iou_unobserved) + "," +
           cell(e.val_f_measure_r0);
    out += "\n";
  }
  return out;
}

struct TrainResult {
  Checkpoint<float> checkpoint;
  std::vector<EpochLog> log;
  std::string checkpoint_path;
  std::string log_path;
};

// The single-step training loop. Per iteration: build the triplet, one forward
// per enabled pair through the shared network, the masked BCEs, their weighted
// combination, one backward over the combined loss, one Adam step. Fully
// reproducible from the config seeds.
inline TrainResult train(const TrainConfig& tc, const NetConfig& nc, const LoadedDataset& data,
                         const PreselectionCache* cache, const std::string& out_dir,
                         const PairFlags& flags = {}) {
  namespace fs = std::filesystem;
  tc.validate();
  nc.validate();
  flags.validate();
  if (data.train_partial.empty()) throw DataError("train: no training samples");
  if (flags.pair2 && !cache) throw DataError("train: pair 2 enabled but no cache given");
  fs::create_directories(out_dir);

  using T = float;
  Network<T> net(nc);
  std::vector<T> params = net.init_params(tc.seed_init());
  std::vector<T> state = net.init_state();
  AdamState<T> adam(net.param_count());
  AdamConfig adam_cfg;
  adam_cfg.lr = tc.lr;

  // pair-3 pools: prior samples plus the unobservation patterns of the real
  // training inputs
  std::vector<ObservationMask> mask_pool;
  mask_pool.reserve(data.train_partial.size());
  for (const auto& p : data.train_partial) mask_pool.push_back(split_partial(p).second);

  // unobserved regions of the evaluation split, for validation metrics
  std::vector<ObservationMask> test_unobserved;
  for (const auto& p : data.test_partial)
    test_unobserved.push_back(complement(split_partial(p).second));

  Rng rng_order(tc.seed_order());
  Rng rng_augment(tc.seed_augment());
  Rng rng_pair3(tc.seed_pair3());

  const double lam1 = flags.pair1 ? tc.lambda1 : 0.0;
  const double lam2 = flags.pair2 ? tc.lambda2 : 0.0;
  const double lam3 = flags.pair3 ? tc.lambda3 : 0.0;

  std::vector<size_t> order(data.train_partial.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  const std::string diag_path = (fs::path(out_dir) / "diagnostic.hnet").string();
  const auto diagnostic = [&](int64_t step, const std::string& why) {
    Checkpoint<T> ck{nc, tc.seed, step, params, state, adam};
    save_checkpoint(ck, diag_path);
    throw NumericError("train: " + why + " at step " + std::to_string(step) +
                       "; diagnostic checkpoint written to " + diag_path);
  };

  std::vector<T> grads(net.param_count());
  std::vector<EpochLog> log;
  int64_t step = 0;

  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    rng_order.shuffle(order);
    double sum1 = 0.0, sum2 = 0.0, sum3 = 0.0, sum_total = 0.0;
    size_t n1 = 0, n2 = 0, n3 = 0, iters = 0;

    for (size_t off = 0; off + tc.batch_size <= order.size(); off += tc.batch_size) {
      std::vector<TernaryGrid> batch;
      std::vector<std::string> ids;
      batch.reserve(tc.batch_size);
      for (int b = 0; b < tc.batch_size; ++b) {
        batch.push_back(data.train_partial[order[off + b]]);
        ids.push_back(data.train_ids[order[off + b]]);
      }
      SupervisionTriplet<T> trip =
          build_triplet<T>(batch, ids, cache, data.prior, mask_pool, flags, tc.flip_prob,
                           rng_augment, rng_pair3);

      std::fill(grads.begin(), grads.end(), T(0));
      double l1 = 0.0, l2 = 0.0, l3 = 0.0;

      const auto supervise = [&](const Tensor4<T>& input, const Tensor4<T>& target,
                                 const Tensor4<uint8_t>& valid, double lambda,
                                 const char* pair_name, double& loss_out) -> bool {
        Tape<T> tape;
        net.forward(params, state, input, Mode::Train, tape);
        size_t n_valid = 0;
        for (uint8_t v : valid.v) n_valid += v != 0;
        if (n_valid == 0) {
          std::cerr << "[warn] train: " << pair_name << " has zero valid cells at step "
                    << step << "; pair skipped this iteration\n";
          return false;
        }
        loss_out = masked_bce_from_logits(tape.logits(), target, valid);
        Tensor4<T> dlogits(input.n, 1, input.h, input.w, T(0));
        masked_bce_logit_grad(tape.logits(), target, valid, lambda, dlogits);
        net.backward_from_logits(tape, params, dlogits, grads);
        return true;
      };

      double total = 0.0;
      if (flags.pair1 && supervise(trip.input12, trip.target1, trip.valid1, lam1,
                                   "observation pair", l1)) {
        total += lam1 * l1;
        sum1 += l1;
        ++n1;
      }
      if (flags.pair2 && supervise(trip.input12, trip.target2, trip.valid2, lam2,
                                   "pre-selection pair", l2)) {
        total += lam2 * l2;
        sum2 += l2;
        ++n2;
      }
      if (flags.pair3 && supervise(trip.input3, trip.target3, trip.valid3, lam3,
                                   "masked prior pair", l3)) {
        total += lam3 * l3;
        sum3 += l3;
        ++n3;
      }
      if (!std::isfinite(total)) diagnostic(step, "non-finite loss");

      const auto res = adam_step<T>(params, grads, adam, adam_cfg);
      if (!res.applied)
        diagnostic(step, "non-finite gradient in " + net.param_name(res.bad_index));
      sum_total += total;
      ++iters;
      ++step;
    }
    if (iters == 0) throw DataError("train: batch size exceeds the training set");

    EpochLog e;
    e.epoch = epoch;
    if (flags.pair1 && n1) e.loss_observation = sum1 / n1;
    if (flags.pair2 && n2) e.loss_preselection = sum2 / n2;
    if (flags.pair3 && n3) e.loss_prior = sum3 / n3;
    e.loss_total = sum_total / iters;

    const bool validate_now =
        !data.test_partial.empty() && tc.val_every > 0 &&
        (epoch % tc.val_every == 0 || epoch == tc.epochs);
    if (validate_now) {
      const auto preds = predict(net, std::span<const T>(params), state, data.test_partial,
                                 tc.batch_size);
      const EvalReport rep = evaluate_predictions(data.test_ids, preds, data.test_gt,
                                                  test_unobserved, {0});
      e.val_mean_iou_full = rep.mean_iou_full;
      e.val_mean_iou_unobserved = rep.mean_iou_unobserved;
      e.val_f_measure_r0 = rep.contour_at(0).f_measure;
    } else if (!log.empty()) {
      e.val_mean_iou_full = log.back().val_mean_iou_full;
      e.val_mean_iou_unobserved = log.back().val_mean_iou_unobserved;
      e.val_f_measure_r0 = log.back().val_f_measure_r0;
    }
    log.push_back(e);
  }

  TrainResult result;
  result.checkpoint = Checkpoint<T>{nc, tc.seed, step, std::move(params), std::move(state),
                                    std::move(adam)};
  result.log = std::move(log);
  result.checkpoint_path = (fs::path(out_dir) / "model.hnet").string();
  result.log_path = (fs::path(out_dir) / "train_log.csv").string();
  save_checkpoint(result.checkpoint, result.checkpoint_path);
  detail::write_file_bytes(result.log_path, training_log_csv(result.log, flags));
  return result;
}

}  // namespace hg
