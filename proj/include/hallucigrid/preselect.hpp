#pragma once
// Pre-selection: for a partial observation, rank prior-knowledge samples by
// mean IoU on the observed pixels and average the top K into a consensus
// target that is valid only where all K agree.
//
// Scoring runs on packed bitsets with population counts; scores are exact
// rationals compared by cross-multiplication, so packed and naive scoring
// agree bit-for-bit and ties are broken identically everywhere.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hallucigrid/common.hpp"
#include "hallucigrid/grid.hpp"
#include "hallucigrid/rng.hpp"

namespace hg {

// Exact IoU score: value() = num/den. Comparison never touches floating point.
struct IouScore {
  uint64_t num = 0;
  uint64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  // cross-multiplication; counts are <= cells^2 so this stays well inside u64
  bool operator<(const IouScore& o) const { return num * o.den < o.num * den; }
  bool operator==(const IouScore& o) const { return num * o.den == o.num * den; }
};

namespace detail {

// Mean IoU over the two classes from raw set counts, excluding classes with an
// empty union. Shared by the packed and naive paths.
inline IouScore mean_iou_from_counts(uint64_t road_inter, uint64_t road_union,
                                     uint64_t nonroad_inter, uint64_t nonroad_union) {
  if (road_union > 0 && nonroad_union > 0)
    return {road_inter * nonroad_union + nonroad_inter * road_union, 2 * road_union * nonroad_union};
  if (road_union > 0) return {road_inter, road_union};
  if (nonroad_union > 0) return {nonroad_inter, nonroad_union};
  throw DataError("mean IoU: both class unions are empty");
}

}  // namespace detail

struct PackedCorpus {
  int height = 0;
  int width = 0;
  int count = 0;
  int words_per_sample = 0;
  std::vector<uint64_t> bits;      // road bit per cell, row-major, per sample
  std::vector<uint32_t> indices;   // stable corpus indices

  static PackedCorpus pack(std::span<const BinaryGrid> samples) {
    if (samples.empty()) throw DataError("PackedCorpus: empty corpus");
    PackedCorpus c;
    c.height = samples[0].height;
    c.width = samples[0].width;
    c.count = static_cast<int>(samples.size());
    const size_t n_cells = samples[0].size();
    c.words_per_sample = static_cast<int>((n_cells + 63) / 64);
    c.bits.assign(static_cast<size_t>(c.count) * c.words_per_sample, 0);
    c.indices.resize(c.count);
    for (int s = 0; s < c.count; ++s) {
      detail::check_same_dims(samples[s].height, samples[s].width, c.height, c.width,
                              "PackedCorpus");
      c.indices[s] = static_cast<uint32_t>(s);
      uint64_t* w = &c.bits[static_cast<size_t>(s) * c.words_per_sample];
      for (size_t i = 0; i < n_cells; ++i)
        if (samples[s].cells[i]) w[i >> 6] |= uint64_t(1) << (i & 63);
    }
    return c;
  }

  const uint64_t* sample_bits(int s) const {
    return &bits[static_cast<size_t>(s) * words_per_sample];
  }

  BinaryGrid unpack(int s) const {
    BinaryGrid g(height, width);
    const uint64_t* w = sample_bits(s);
    for (size_t i = 0; i < g.size(); ++i) g.cells[i] = (w[i >> 6] >> (i & 63)) & 1;
    return g;
  }
};

// Observed-region bitset view of a partial observation.
struct PackedQuery {
  int words = 0;
  std::vector<uint64_t> observed;       // mask bit
  std::vector<uint64_t> observed_road;  // mask & road
  uint64_t n_observed = 0;
  uint64_t n_observed_road = 0;

  static PackedQuery from_partial(const TernaryGrid& partial) {
    PackedQuery q;
    const size_t n_cells = partial.size();
    q.words = static_cast<int>((n_cells + 63) / 64);
    q.observed.assign(q.words, 0);
    q.observed_road.assign(q.words, 0);
    for (size_t i = 0; i < n_cells; ++i) {
      const CellStatus s = partial.cells[i];
      if (s == CellStatus::Unobserved) continue;
      q.observed[i >> 6] |= uint64_t(1) << (i & 63);
      if (s == CellStatus::Road) q.observed_road[i >> 6] |= uint64_t(1) << (i & 63);
    }
    for (uint64_t w : q.observed) q.n_observed += std::popcount(w);
    for (uint64_t w : q.observed_road) q.n_observed_road += std::popcount(w);
    return q;
  }
};

namespace detail {

inline IouScore observed_mean_iou_packed(const PackedQuery& q, const uint64_t* cand) {
  // Only two popcount streams are needed; the remaining set sizes follow from
  // |observed| and |observed & road|.
  uint64_t cand_obs = 0, road_inter = 0;
  for (int i = 0; i < q.words; ++i) {
    cand_obs += std::popcount(cand[i] & q.observed[i]);
    road_inter += std::popcount(cand[i] & q.observed_road[i]);
  }
  const uint64_t road_union = cand_obs + q.n_observed_road - road_inter;
  const uint64_t nonroad_inter = q.n_observed - q.n_observed_road - cand_obs + road_inter;
  const uint64_t nonroad_union = q.n_observed - road_inter;
  return mean_iou_from_counts(road_inter, road_union, nonroad_inter, nonroad_union);
}

}  // namespace detail

// Mean IoU between a candidate layout and the observed region of a partial
// observation; classes with an empty union are excluded from the mean.
inline double observed_mean_iou(const TernaryGrid& partial, const BinaryGrid& candidate) {
  detail::check_same_dims(partial.height, partial.width, candidate.height, candidate.width,
                          "observed_mean_iou");
  uint64_t road_inter = 0, road_union = 0, nonroad_inter = 0, nonroad_union = 0, observed = 0;
  for (size_t i = 0; i < partial.size(); ++i) {
    const CellStatus s = partial.cells[i];
    if (s == CellStatus::Unobserved) continue;
    ++observed;
    const bool p_road = s == CellStatus::Road;
    const bool c_road = candidate.cells[i] != 0;
    road_inter += p_road && c_road;
    road_union += p_road || c_road;
    nonroad_inter += !p_road && !c_road;
    nonroad_union += !p_road || !c_road;
  }
  if (observed == 0) throw DataError("observed_mean_iou: partial has no observed cells");
  return detail::mean_iou_from_counts(road_inter, road_union, nonroad_inter, nonroad_union)
      .value();
}

// The deterministic candidate subset used for pre-selection: a function of the
// seed and corpus size only, so every query in a run scans the same subset.
inline std::vector<uint32_t> preselection_subset(int corpus_size, int subset_size,
                                                 uint64_t seed) {
  if (corpus_size < 1) throw DataError("preselection: empty corpus");
  if (subset_size < 1 || subset_size > corpus_size)
    throw ConfigError("preselection: subset_size must be in [1, corpus size]");
  Rng rng(Rng::derive_seed(seed, "preselect-subset"));
  return rng.sample_indices(static_cast<uint32_t>(corpus_size),
                            static_cast<uint32_t>(subset_size));
}

// Top-k corpus indices by observed mean IoU over a seeded subset. Ties break
// toward the lower corpus index; the result is sorted by (score desc, index asc).
inline std::vector<uint32_t> topk_select(const TernaryGrid& partial, const PackedCorpus& corpus,
                                         int k, int subset_size, uint64_t seed) {
  if (k < 1) throw ConfigError("topk_select: k must be >= 1");
  if (k > subset_size) throw ConfigError("topk_select: k must be <= subset_size");
  detail::check_same_dims(partial.height, partial.width, corpus.height, corpus.width,
                          "topk_select");
  const PackedQuery q = PackedQuery::from_partial(partial);
  if (q.n_observed == 0) throw DataError("topk_select: partial has no observed cells");

  std::vector<uint32_t> subset = preselection_subset(corpus.count, subset_size, seed);
  std::sort(subset.begin(), subset.end());  // scan order = index order; stable tie handling

  struct Scored {
    IouScore score;
    uint32_t index;
  };
  std::vector<Scored> scored;
  scored.reserve(subset.size());
  for (uint32_t idx : subset)
    scored.push_back({detail::observed_mean_iou_packed(q, corpus.sample_bits(idx)), idx});
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.score == b.score) return a.index < b.index;
    return b.score < a.score;
  });
  std::vector<uint32_t> out(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) out[i] = scored[i].index;
  return out;
}

// Average of the selected samples with the unanimity mask. Vote counts are kept
// as integers, so validity is exact: a cell is valid iff count == 0 or count == k.
struct ConsensusTarget {
  int height = 0;
  int width = 0;
  int k = 0;
  std::vector<uint16_t> road_votes;      // per cell, 0..k
  std::vector<uint8_t> valid;            // 1 where all k samples agree
  std::vector<uint32_t> selected;        // corpus indices

  double target_at(size_t i) const {
    return static_cast<double>(road_votes[i]) / static_cast<double>(k);
  }
  size_t size() const { return road_votes.size(); }
};

inline ConsensusTarget consensus_target(const PackedCorpus& corpus,
                                        std::span<const uint32_t> selected) {
  if (selected.empty()) throw DataError("consensus_target: empty selection");
  if (selected.size() > 65535) throw ConfigError("consensus_target: k too large");
  ConsensusTarget t;
  t.height = corpus.height;
  t.width = corpus.width;
  t.k = static_cast<int>(selected.size());
  t.selected.assign(selected.begin(), selected.end());
  const size_t n_cells = static_cast<size_t>(corpus.height) * corpus.width;
  t.road_votes.assign(n_cells, 0);
  for (uint32_t idx : selected) {
    if (idx >= static_cast<uint32_t>(corpus.count))
      throw DataError("consensus_target: index out of range");
    const uint64_t* w = corpus.sample_bits(static_cast<int>(idx));
    for (size_t i = 0; i < n_cells; ++i) t.road_votes[i] += (w[i >> 6] >> (i & 63)) & 1;
  }
  t.valid.resize(n_cells);
  for (size_t i = 0; i < n_cells; ++i)
    t.valid[i] = t.road_votes[i] == 0 || t.road_votes[i] == t.k;
  return t;
}

// ---------------------------------------------------------------------------
// Pre-selection cache. Masks are static, so the consensus pair can be built
// once and replayed. File layout:
//   magic "HPSC1" | u64 json_len | json index | payload blobs
// payload per entry: u32 selected count, selected u32le..., votes u16le...,
//                    valid bytes (height*width of each).
// ---------------------------------------------------------------------------

class PreselectionCache {
 public:
  struct Meta {
    int height = 0, width = 0, k = 0, subset_size = 0;
    uint64_t seed = 0;
  };

  static void build(std::span<const TernaryGrid> partials, std::span<const std::string> ids,
                    const PackedCorpus& corpus, int k, int subset_size, uint64_t seed,
                    const std::string& path) {
    if (partials.size() != ids.size())
      throw ConfigError("preselection cache: ids and partials differ in length");
    nlohmann::json index;
    index["height"] = corpus.height;
    index["width"] = corpus.width;
    index["k"] = k;
    index["subset_size"] = subset_size;
    index["seed"] = seed;

    std::string payload;
    nlohmann::json entries = nlohmann::json::object();
    for (size_t i = 0; i < partials.size(); ++i) {
      const auto selected = topk_select(partials[i], corpus, k, subset_size, seed);
      const ConsensusTarget t = consensus_target(corpus, selected);
      entries[ids[i]] = payload.size();
      detail::put_u32le(payload, static_cast<uint32_t>(t.selected.size()));
      for (uint32_t s : t.selected) detail::put_u32le(payload, s);
      for (uint16_t v : t.road_votes) {
        payload.push_back(static_cast<char>(v & 0xff));
        payload.push_back(static_cast<char>(v >> 8));
      }
      payload.append(reinterpret_cast<const char*>(t.valid.data()), t.valid.size());
    }
    index["entries"] = entries;

    std::string out;
    out.append("HPSC1", 5);
    const std::string idx = index.dump();
    detail::put_u64le(out, idx.size());
    out += idx;
    out += payload;
    detail::write_file_bytes(path, out);
  }

  static PreselectionCache load(const std::string& path) {
    PreselectionCache c;
    c.bytes_ = detail::read_file_bytes(path);
    if (c.bytes_.size() < 13 || std::memcmp(c.bytes_.data(), "HPSC1", 5) != 0)
      throw DataError(path + ": not a preselection cache");
    const uint64_t json_len = detail::get_u64le(c.bytes_.data() + 5);
    if (c.bytes_.size() < 13 + json_len) throw DataError(path + ": truncated cache index");
    nlohmann::json index;
    try {
      index = nlohmann::json::parse(c.bytes_.begin() + 13, c.bytes_.begin() + 13 + json_len);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ": " + e.what());
    }
    c.meta_.height = index.at("height").get<int>();
    c.meta_.width = index.at("width").get<int>();
    c.meta_.k = index.at("k").get<int>();
    c.meta_.subset_size = index.at("subset_size").get<int>();
    c.meta_.seed = index.at("seed").get<uint64_t>();
    c.payload_offset_ = 13 + json_len;
    for (const auto& [id, off] : index.at("entries").items())
      c.offsets_[id] = off.get<uint64_t>();
    return c;
  }

  const Meta& meta() const { return meta_; }
  size_t size() const { return offsets_.size(); }
  bool contains(const std::string& id) const { return offsets_.count(id) != 0; }

  ConsensusTarget get(const std::string& id) const {
    const auto it = offsets_.find(id);
    if (it == offsets_.end()) throw DataError("preselection cache miss: " + id);
    const size_t n_cells = static_cast<size_t>(meta_.height) * meta_.width;
    size_t p = payload_offset_ + it->second;
    const auto need = [&](size_t n) {
      if (p + n > bytes_.size()) throw DataError("preselection cache: truncated entry " + id);
    };
    ConsensusTarget t;
    t.height = meta_.height;
    t.width = meta_.width;
    need(4);
    const uint32_t sel_n = detail::get_u32le(&bytes_[p]);
    p += 4;
    t.k = static_cast<int>(sel_n);
    need(sel_n * 4 + n_cells * 3);
    t.selected.resize(sel_n);
    for (uint32_t i = 0; i < sel_n; ++i, p += 4) t.selected[i] = detail::get_u32le(&bytes_[p]);
    t.road_votes.resize(n_cells);
    for (size_t i = 0; i < n_cells; ++i, p += 2)
      t.road_votes[i] = static_cast<uint16_t>(bytes_[p] | (bytes_[p + 1] << 8));
    t.valid.assign(bytes_.begin() + p, bytes_.begin() + p + n_cells);
    return t;
  }

 private:
  std::vector<uint8_t> bytes_;
  size_t payload_offset_ = 0;
  Meta meta_;
  std::map<std::string, uint64_t> offsets_;
};

inline void build_preselection_cache(std::span<const TernaryGrid> partials,
                                     std::span<const std::string> ids,
                                     const PackedCorpus& corpus, int k, int subset_size,
                                     uint64_t seed, const std::string& path) {
  PreselectionCache::build(partials, ids, corpus, k, subset_size, seed, path);
}

}  // namespace hg
