#pragma once
// Dataset-level evaluation: runs the network over samples, scores predictions
// against ground truth on the full and unobserved regions, and sweeps the
// contour relaxation radius. Per-sample work fans out across threads (capped
// by HALLUCIGRID_THREADS); reduction follows stable sample order.

#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "hallucigrid/checkpoint.hpp"
#include "hallucigrid/metrics.hpp"
#include "hallucigrid/net.hpp"
#include "hallucigrid/tensor.hpp"

namespace hg {

namespace detail {

inline int eval_thread_cap() {
  if (const char* env = std::getenv("HALLUCIGRID_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

template <typename Fn>
void parallel_for(size_t count, Fn&& fn) {
  const int threads = std::min<int>(eval_thread_cap(), static_cast<int>(count));
  if (threads <= 1) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      for (size_t i = t; i < count; i += threads) fn(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace detail

// Eval-mode predictions for a list of ternary inputs, binarized at 0.5.
template <typename T>
std::vector<BinaryGrid> predict(const Network<T>& net, std::span<const T> params,
                                const std::vector<T>& state,
                                std::span<const TernaryGrid> inputs, int batch_size = 16) {
  std::vector<BinaryGrid> preds;
  preds.reserve(inputs.size());
  std::vector<T> st = state;  // eval mode leaves running stats untouched
  for (size_t off = 0; off < inputs.size(); off += batch_size) {
    const size_t n = std::min<size_t>(batch_size, inputs.size() - off);
    const Tensor4<T> in = encode_ternary_batch<T>(inputs.subspan(off, n));
    Tape<T> tape;
    const Tensor4<T>& out = net.forward(params, st, in, Mode::Eval, tape);
    for (size_t i = 0; i < n; ++i) preds.push_back(binarize_plane(out, static_cast<int>(i)));
  }
  return preds;
}

struct SampleScores {
  std::string id;
  double pixel_acc_full = 0.0;
  double mean_iou_full = 0.0;
  double pixel_acc_unobserved = 0.0;  // NaN-free: -1 when the region is empty
  double mean_iou_unobserved = 0.0;
  std::vector<ContourScores> contour;  // one per sweep radius
};

struct EvalReport {
  std::vector<int> r_sweep;
  std::vector<SampleScores> samples;
  // dataset means (per-sample values averaged, not pooled)
  double pixel_acc_full = 0.0;
  double mean_iou_full = 0.0;
  double pixel_acc_unobserved = 0.0;
  double mean_iou_unobserved = 0.0;
  std::vector<ContourScores> contour;

  const ContourScores& contour_at(int radius) const {
    for (const auto& c : contour)
      if (c.relaxation == radius) return c;
    throw DataError("evaluation report has no radius " + std::to_string(radius));
  }
};

// Scores a set of predictions. `unobserved[i]` is the region that was hidden
// from the network (the complement of the sample's observation mask).
inline EvalReport evaluate_predictions(std::span<const std::string> ids,
                                       std::span<const BinaryGrid> preds,
                                       std::span<const BinaryGrid> gts,
                                       std::span<const ObservationMask> unobserved,
                                       const std::vector<int>& r_sweep) {
  if (preds.size() != gts.size() || preds.size() != unobserved.size() ||
      (ids.size() != 0 && ids.size() != preds.size()))
    throw DataError("evaluate_predictions: input lists differ in length");
  if (preds.empty()) throw DataError("evaluate_predictions: nothing to evaluate");

  EvalReport rep;
  rep.r_sweep = r_sweep;
  rep.samples.resize(preds.size());
  detail::parallel_for(preds.size(), [&](size_t i) {
    SampleScores s;
    s.id = ids.empty() ? "sample_" + std::to_string(i) : ids[i];
    const ObservationMask full = full_region(preds[i].height, preds[i].width);
    s.pixel_acc_full = pixel_accuracy(preds[i], gts[i], full);
    s.mean_iou_full = mean_iou(preds[i], gts[i], full);
    if (unobserved[i].observed_count() > 0) {
      s.pixel_acc_unobserved = pixel_accuracy(preds[i], gts[i], unobserved[i]);
      s.mean_iou_unobserved = mean_iou(preds[i], gts[i], unobserved[i]);
    } else {
      s.pixel_acc_unobserved = -1.0;
      s.mean_iou_unobserved = -1.0;
    }
    for (int r : r_sweep) s.contour.push_back(contour_prf(preds[i], gts[i], r));
    rep.samples[i] = std::move(s);
  });

  size_t unobs_n = 0;
  for (const auto& s : rep.samples) {
    rep.pixel_acc_full += s.pixel_acc_full;
    rep.mean_iou_full += s.mean_iou_full;
    if (s.mean_iou_unobserved >= 0.0) {
      rep.pixel_acc_unobserved += s.pixel_acc_unobserved;
      rep.mean_iou_unobserved += s.mean_iou_unobserved;
      ++unobs_n;
    }
  }
  const double n = static_cast<double>(rep.samples.size());
  rep.pixel_acc_full /= n;
  rep.mean_iou_full /= n;
  if (unobs_n > 0) {
    rep.pixel_acc_unobserved /= static_cast<double>(unobs_n);
    rep.mean_iou_unobserved /= static_cast<double>(unobs_n);
  }
  for (size_t ri = 0; ri < r_sweep.size(); ++ri) {
    ContourScores c;
    c.relaxation = r_sweep[ri];
    for (const auto& s : rep.samples) {
      c.precision += s.contour[ri].precision;
      c.recall += s.contour[ri].recall;
      c.f_measure += s.contour[ri].f_measure;
    }
    c.precision /= n;
    c.recall /= n;
    c.f_measure /= n;
    rep.contour.push_back(c);
  }
  return rep;
}

inline void to_json(nlohmann::json& j, const ContourScores& c) {
  j = nlohmann::json{{"r", c.relaxation},
                     {"precision", c.precision},
                     {"recall", c.recall},
                     {"f_measure", c.f_measure}};
}

inline nlohmann::json eval_report_json(const EvalReport& rep) {
  nlohmann::json j;
  j["means"] = {{"pixel_acc_full", rep.pixel_acc_full},
                {"mean_iou_full", rep.mean_iou_full},
                {"pixel_acc_unobserved", rep.pixel_acc_unobserved},
                {"mean_iou_unobserved", rep.mean_iou_unobserved},
                {"contour", rep.contour}};
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : rep.samples) {
    nlohmann::json js;
    js["id"] = s.id;
    js["pixel_acc_full"] = s.pixel_acc_full;
    js["mean_iou_full"] = s.mean_iou_full;
    js["pixel_acc_unobserved"] = s.pixel_acc_unobserved;
    js["mean_iou_unobserved"] = s.mean_iou_unobserved;
    js["contour"] = s.contour;
    samples.push_back(std::move(js));
  }
  j["samples"] = std::move(samples);
  return j;
}

inline void write_eval_report(const EvalReport& rep, const std::string& path) {
  detail::write_file_bytes(path, eval_report_json(rep).dump(2) + "\n");
}

// relaxation-curve CSV: r, precision, recall, f_measure
inline std::string relaxation_curve_csv(const EvalReport& rep) {
  std::string out = "r,precision,recall,f_measure\n";
  for (const auto& c : rep.contour)
    out += std::to_string(c.relaxation) + "," + detail::format_double(c.precision) + "," +
           detail::format_double(c.recall) + "," + detail::format_double(c.f_measure) + "\n";
  return out;
}

}  // namespace hg
