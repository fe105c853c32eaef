#pragma once
// Evaluation suite: pixel accuracy, two-class mean IoU on a selectable region,
// contour precision/recall/F with morphological boundary relaxation, and
// Hamming distance for voxel grids. All values lie in [0,1].

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "hallucigrid/common.hpp"
#include "hallucigrid/grid.hpp"

namespace hg {

struct SegScores {
  double pixel_accuracy = 0.0;
  double mean_iou = 0.0;
  std::string region = "full";  // "full" | "unobserved"
};

struct ContourScores {
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;
  int relaxation = 0;
};

struct VoxelGrid {
  int d = 0, h = 0, w = 0;
  std::vector<uint8_t> cells;

  VoxelGrid() = default;
  VoxelGrid(int d_, int h_, int w_, bool fill = false)
      : d(d_), h(h_), w(w_), cells(static_cast<size_t>(d_) * h_ * w_, fill ? 1 : 0) {
    if (d_ < 1 || h_ < 1 || w_ < 1) throw DataError("VoxelGrid: dims must be >= 1");
  }
  size_t size() const { return cells.size(); }
  uint8_t& at(int z, int y, int x) {
    return cells[(static_cast<size_t>(z) * h + y) * w + x];
  }
};

inline double pixel_accuracy(const BinaryGrid& pred, const BinaryGrid& gt,
                             const ObservationMask& region) {
  detail::check_same_dims(pred.height, pred.width, gt.height, gt.width, "pixel_accuracy");
  detail::check_same_dims(pred.height, pred.width, region.height, region.width,
                          "pixel_accuracy");
  size_t total = 0, correct = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (!region.cells[i]) continue;
    ++total;
    correct += (pred.cells[i] != 0) == (gt.cells[i] != 0);
  }
  if (total == 0) throw DataError("pixel_accuracy: empty region");
  return static_cast<double>(correct) / static_cast<double>(total);
}

// Two-class mean IoU inside the region; classes with an empty union are
// excluded from the mean. Dataset-level numbers average per-sample values.
inline double mean_iou(const BinaryGrid& pred, const BinaryGrid& gt,
                       const ObservationMask& region) {
  detail::check_same_dims(pred.height, pred.width, gt.height, gt.width, "mean_iou");
  detail::check_same_dims(pred.height, pred.width, region.height, region.width, "mean_iou");
  size_t inter_r = 0, union_r = 0, inter_n = 0, union_n = 0, total = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (!region.cells[i]) continue;
    ++total;
    const bool p = pred.cells[i] != 0, g = gt.cells[i] != 0;
    inter_r += p && g;
    union_r += p || g;
    inter_n += !p && !g;
    union_n += !p || !g;
  }
  if (total == 0) throw DataError("mean_iou: empty region");
  double sum = 0.0;
  int classes = 0;
  if (union_r > 0) {
    sum += static_cast<double>(inter_r) / static_cast<double>(union_r);
    ++classes;
  }
  if (union_n > 0) {
    sum += static_cast<double>(inter_n) / static_cast<double>(union_n);
    ++classes;
  }
  return sum / classes;  // region non-empty implies classes >= 1
}

inline ObservationMask full_region(int height, int width) {
  return ObservationMask(height, width, true);
}

inline ObservationMask complement(const ObservationMask& m) {
  ObservationMask out(m.height, m.width);
  for (size_t i = 0; i < m.size(); ++i) out.cells[i] = m.cells[i] ? 0 : 1;
  return out;
}

// Road cells with at least one non-road 4-neighbour. Neighbours beyond the
// image border do not count, so the border alone creates no boundary.
inline BinaryGrid extract_boundary(const BinaryGrid& grid) {
  BinaryGrid out(grid.height, grid.width);
  for (int r = 0; r < grid.height; ++r)
    for (int c = 0; c < grid.width; ++c) {
      if (!grid.at(r, c)) continue;
      const bool edge = (r > 0 && !grid.at(r - 1, c)) || (r + 1 < grid.height && !grid.at(r + 1, c)) ||
                        (c > 0 && !grid.at(r, c - 1)) || (c + 1 < grid.width && !grid.at(r, c + 1));
      out.at(r, c) = edge;
    }
  return out;
}

// Morphological dilation with a Euclidean disk of radius r (r=0: identity).
inline BinaryGrid dilate_disk(const BinaryGrid& map, int radius) {
  if (radius < 0) throw ConfigError("dilate_disk: radius must be >= 0");
  if (radius == 0) return map;
  std::vector<std::pair<int, int>> offsets;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (dy * dy + dx * dx <= radius * radius) offsets.emplace_back(dy, dx);
  BinaryGrid out(map.height, map.width);
  for (int r = 0; r < map.height; ++r)
    for (int c = 0; c < map.width; ++c) {
      if (!map.at(r, c)) continue;
      for (const auto& [dy, dx] : offsets) {
        const int nr = r + dy, nc = c + dx;
        if (nr >= 0 && nr < map.height && nc >= 0 && nc < map.width) out.at(nr, nc) = 1;
      }
    }
  return out;
}

// Boundary precision/recall/F with relaxation radius r, following the DAVIS
// convention: a predicted boundary cell counts as correct if it falls inside
// the dilated ground-truth boundary, and vice versa.
inline ContourScores contour_prf(const BinaryGrid& pred, const BinaryGrid& gt, int radius) {
  detail::check_same_dims(pred.height, pred.width, gt.height, gt.width, "contour_prf");
  const BinaryGrid bp = extract_boundary(pred);
  const BinaryGrid bg = extract_boundary(gt);
  const BinaryGrid bp_dil = dilate_disk(bp, radius);
  const BinaryGrid bg_dil = dilate_disk(bg, radius);

  size_t np = 0, ng = 0, p_hit = 0, g_hit = 0;
  for (size_t i = 0; i < bp.size(); ++i) {
    if (bp.cells[i]) {
      ++np;
      p_hit += bg_dil.cells[i] != 0;
    }
    if (bg.cells[i]) {
      ++ng;
      g_hit += bp_dil.cells[i] != 0;
    }
  }
  ContourScores s;
  s.relaxation = radius;
  s.precision = np > 0 ? static_cast<double>(p_hit) / np : (ng == 0 ? 1.0 : 0.0);
  s.recall = ng > 0 ? static_cast<double>(g_hit) / ng : (np == 0 ? 1.0 : 0.0);
  s.f_measure =
      s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

// Fraction of differing cells, normalized by the total voxel count.
inline double hamming_distance(const VoxelGrid& pred, const VoxelGrid& gt) {
  if (pred.d != gt.d || pred.h != gt.h || pred.w != gt.w)
    throw DataError("hamming_distance: dimension mismatch");
  size_t diff = 0;
  for (size_t i = 0; i < pred.size(); ++i) diff += (pred.cells[i] != 0) != (gt.cells[i] != 0);
  return static_cast<double>(diff) / static_cast<double>(pred.size());
}

}  // namespace hg
