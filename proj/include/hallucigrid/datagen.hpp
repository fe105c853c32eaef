#pragma once
// Generators for partially observed datasets and prior-knowledge corpora:
// labeled-point-cloud projection (the real-data path), plus procedural worlds
// and sensing masks (the synthetic desk-scale path).

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hallucigrid/common.hpp"
#include "hallucigrid/grid.hpp"
#include "hallucigrid/rng.hpp"

namespace hg {

enum class PointClass : uint8_t { RoadClass = 0, StaticNonRoad = 1, MovableOrUnknown = 2 };

struct LabeledPoint {
  double x = 0.0;
  double y = 0.0;
  PointClass label = PointClass::MovableOrUnknown;
};

// Ground-plane frame: x grows with columns, y grows away from the ego vehicle.
// Row 0 is the farthest row, so row = height-1 - floor((y - origin_y)/cell_size).
struct GridSpec {
  int height = 64;
  int width = 64;
  double cell_size = 1.0;
  double origin_x = 0.0;
  double origin_y = 0.0;

  void validate() const {
    detail::check_dims(height, width);
    if (!(cell_size > 0.0)) throw ConfigError("GridSpec: cell_size must be > 0");
  }
};

// Majority vote per cell over the contained points. Strict plurality wins;
// ties fall to the more conservative status (movable/unknown > static > road).
// Empty cells and majority-movable cells are unobserved.
inline TernaryGrid project_points_to_grid(std::span<const LabeledPoint> points,
                                          const GridSpec& spec) {
  spec.validate();
  const size_t n_cells = static_cast<size_t>(spec.height) * spec.width;
  std::vector<uint32_t> counts(n_cells * 3, 0);
  for (const LabeledPoint& p : points) {
    const double fx = (p.x - spec.origin_x) / spec.cell_size;
    const double fy = (p.y - spec.origin_y) / spec.cell_size;
    const int col = static_cast<int>(std::floor(fx));
    const int fwd = static_cast<int>(std::floor(fy));
    if (col < 0 || col >= spec.width || fwd < 0 || fwd >= spec.height) continue;
    const int row = spec.height - 1 - fwd;
    counts[(static_cast<size_t>(row) * spec.width + col) * 3 + static_cast<int>(p.label)]++;
  }
  TernaryGrid out(spec.height, spec.width);
  for (size_t i = 0; i < n_cells; ++i) {
    const uint32_t road = counts[i * 3 + 0];
    const uint32_t stat = counts[i * 3 + 1];
    const uint32_t mov = counts[i * 3 + 2];
    CellStatus s;
    if (road + stat + mov == 0) {
      s = CellStatus::Unobserved;
    } else if (mov >= stat && mov >= road) {
      s = CellStatus::Unobserved;
    } else if (stat >= road) {
      s = CellStatus::NonRoad;
    } else {
      s = CellStatus::Road;
    }
    out.cells[i] = s;
  }
  return out;
}

// CSV lines "x,y,class" with class in {road, static, movable}. '#' starts a comment.
inline std::vector<LabeledPoint> read_points_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open point file: " + path);
  std::vector<LabeledPoint> points;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string fx, fy, fc;
    if (!std::getline(ss, fx, ',') || !std::getline(ss, fy, ',') || !std::getline(ss, fc))
      throw DataError(path + ":" + std::to_string(line_no) + ": expected x,y,class");
    LabeledPoint p;
    try {
      p.x = std::stod(fx);
      p.y = std::stod(fy);
    } catch (const std::exception&) {
      throw DataError(path + ":" + std::to_string(line_no) + ": bad coordinate");
    }
    // trim whitespace around the class token
    const auto b = fc.find_first_not_of(" \t\r");
    const auto e = fc.find_last_not_of(" \t\r");
    const std::string cls = b == std::string::npos ? "" : fc.substr(b, e - b + 1);
    if (cls == "road") p.label = PointClass::RoadClass;
    else if (cls == "static") p.label = PointClass::StaticNonRoad;
    else if (cls == "movable") p.label = PointClass::MovableOrUnknown;
    else throw DataError(path + ":" + std::to_string(line_no) + ": unknown class '" + cls + "'");
    points.push_back(p);
  }
  return points;
}

// All window_h x window_w crops at stride offsets, row-major over offsets.
inline std::vector<BinaryGrid> slide_crop(const BinaryGrid& map, int window_h, int window_w,
                                          int stride) {
  if (window_h < 1 || window_w < 1 || stride < 1)
    throw ConfigError("slide_crop: window and stride must be >= 1");
  if (window_h > map.height || window_w > map.width)
    throw DataError("slide_crop: window larger than map");
  const int ny = (map.height - window_h) / stride + 1;
  const int nx = (map.width - window_w) / stride + 1;
  std::vector<BinaryGrid> crops;
  crops.reserve(static_cast<size_t>(ny) * nx);
  for (int oy = 0; oy < ny; ++oy)
    for (int ox = 0; ox < nx; ++ox) {
      BinaryGrid c(window_h, window_w);
      for (int r = 0; r < window_h; ++r) {
        const uint8_t* src = &map.cells[static_cast<size_t>(oy * stride + r) * map.width +
                                        static_cast<size_t>(ox) * stride];
        std::copy(src, src + window_w, &c.cells[static_cast<size_t>(r) * window_w]);
      }
      crops.push_back(std::move(c));
    }
  return crops;
}

inline int slide_crop_count(int map_h, int map_w, int window_h, int window_w, int stride) {
  return ((map_h - window_h) / stride + 1) * ((map_w - window_w) / stride + 1);
}

// ---------------------------------------------------------------------------
// Procedural worlds: N smooth constant-width polyline roads on a non-road
// background. Deterministic in the seed.
// ---------------------------------------------------------------------------

struct WorldSpec {
  uint64_t seed = 0;
  int map_size = 256;
  int road_count_min = 3;
  int road_count_max = 6;
  int road_width_min = 5;
  int road_width_max = 9;
  double curvature = 0.15;  // radians of heading drift per step

  void validate() const {
    if (map_size < 8) throw ConfigError("WorldSpec: map_size must be >= 8");
    if (road_count_min < 1 || road_count_max < road_count_min)
      throw ConfigError("WorldSpec: road count range must satisfy 1 <= min <= max");
    if (road_width_min < 1 || road_width_max < road_width_min || road_width_max >= map_size)
      throw ConfigError("WorldSpec: road width range must satisfy 1 <= min <= max < map_size");
    if (curvature < 0.0) throw ConfigError("WorldSpec: curvature must be >= 0");
  }
};

namespace detail {

// Stamp all cells within distance w/2 of segment (x0,y0)-(x1,y1).
inline void stamp_segment(BinaryGrid& map, double x0, double y0, double x1, double y1,
                          double radius) {
  const double lo_x = std::min(x0, x1) - radius - 1.0, hi_x = std::max(x0, x1) + radius + 1.0;
  const double lo_y = std::min(y0, y1) - radius - 1.0, hi_y = std::max(y0, y1) + radius + 1.0;
  const int c0 = std::max(0, static_cast<int>(std::floor(lo_x)));
  const int c1 = std::min(map.width - 1, static_cast<int>(std::ceil(hi_x)));
  const int r0 = std::max(0, static_cast<int>(std::floor(lo_y)));
  const int r1 = std::min(map.height - 1, static_cast<int>(std::ceil(hi_y)));
  const double dx = x1 - x0, dy = y1 - y0;
  const double len2 = dx * dx + dy * dy;
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c) {
      const double px = c + 0.5, py = r + 0.5;
      double t = len2 > 0.0 ? ((px - x0) * dx + (py - y0) * dy) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const double qx = x0 + t * dx, qy = y0 + t * dy;
      const double d2 = (px - qx) * (px - qx) + (py - qy) * (py - qy);
      if (d2 <= radius * radius) map.at(r, c) = 1;
    }
}

}  // namespace detail

inline BinaryGrid synth_world(const WorldSpec& spec) {
  spec.validate();
  Rng rng(Rng::derive_seed(spec.seed, "world"));
  Rng rng_counts = rng.child("counts");
  const int n_roads =
      static_cast<int>(rng_counts.uniform_int(spec.road_count_min, spec.road_count_max));
  const int n = spec.map_size;
  BinaryGrid map(n, n);

  for (int i = 0; i < n_roads; ++i) {
    Rng r = rng.child("road" + std::to_string(i));
    const int width = static_cast<int>(r.uniform_int(spec.road_width_min, spec.road_width_max));
    const double radius = width / 2.0;
    // start on a random edge, heading inward
    const int edge = static_cast<int>(r.below(4));  // 0=top 1=bottom 2=left 3=right
    double x, y, heading;
    const double pos = r.uniform(0.0, n);
    switch (edge) {
      case 0: x = pos; y = 0.0; heading = r.uniform(0.25 * M_PI, 0.75 * M_PI); break;
      case 1: x = pos; y = n; heading = r.uniform(-0.75 * M_PI, -0.25 * M_PI); break;
      case 2: x = 0.0; y = pos; heading = r.uniform(-0.25 * M_PI, 0.25 * M_PI); break;
      default: x = n; y = pos; heading = r.uniform(0.75 * M_PI, 1.25 * M_PI); break;
    }
    // extend the first point backwards so the stamped road is full width at the border
    const double margin = radius + 2.0;
    double px = x - std::cos(heading) * margin;
    double py = y - std::sin(heading) * margin;
    const double step = 3.0;
    for (int s = 0; s < 4 * n; ++s) {
      const double nx = x + std::cos(heading) * step;
      const double ny = y + std::sin(heading) * step;
      detail::stamp_segment(map, px, py, nx, ny, radius);
      px = x = nx;
      py = y = ny;
      if (x < -margin || x > n + margin || y < -margin || y > n + margin) break;
      if (spec.curvature > 0.0) heading += r.uniform(-spec.curvature, spec.curvature);
    }
  }

  bool any_road = false;
  for (uint8_t v : map.cells) any_road |= v != 0;
  if (!any_road) throw NumericError("synth_world: generated map has no road cells");
  return map;
}

// ---------------------------------------------------------------------------
// Sensing masks: a field-of-view wedge from an apex on the bottom edge, minus
// ray-cast occluder shadows, minus i.i.d. dropout. Deterministic in the seed;
// occluder and dropout draws use independent substreams, so changing the
// occluder count cannot shift the dropout pattern.
// ---------------------------------------------------------------------------

struct MaskSpec {
  uint64_t seed = 0;
  double fov_half_angle = 1.0;  // radians, (0, pi/2]
  double apex_col = -1.0;        // column coordinate on the bottom edge; <0 = centre
  int occluder_count_min = 1;
  int occluder_count_max = 4;
  int occluder_size_min = 3;
  int occluder_size_max = 10;
  double dropout_rate = 0.02;

  void validate() const {
    if (!(fov_half_angle > 0.0 && fov_half_angle <= M_PI / 2.0 + 1e-12))
      throw ConfigError("MaskSpec: fov_half_angle must be in (0, pi/2]");
    if (occluder_count_min < 0 || occluder_count_max < occluder_count_min)
      throw ConfigError("MaskSpec: occluder count range must satisfy 0 <= min <= max");
    if (occluder_size_min < 1 || occluder_size_max < occluder_size_min)
      throw ConfigError("MaskSpec: occluder size range must satisfy 1 <= min <= max");
    if (!(dropout_rate >= 0.0 && dropout_rate <= 1.0))
      throw ConfigError("MaskSpec: dropout_rate must be in [0,1]");
  }
};

namespace detail {

struct OccluderRect {
  double x0, y0, x1, y1;  // half-open cell-coordinate box
};

// Does the segment apex->p enter the box before reaching p? Slab test on the
// parameter interval; entry at t < 1 shadows the cell (the box shadows itself).
inline bool segment_hits_box(double ax, double ay, double px, double py,
                             const OccluderRect& b) {
  const double dx = px - ax, dy = py - ay;
  double t0 = 0.0, t1 = 1.0;
  const double lo[2] = {b.x0, b.y0}, hi[2] = {b.x1, b.y1};
  const double o[2] = {ax, ay}, d[2] = {dx, dy};
  for (int axis = 0; axis < 2; ++axis) {
    if (d[axis] == 0.0) {
      if (o[axis] < lo[axis] || o[axis] > hi[axis]) return false;
    } else {
      double ta = (lo[axis] - o[axis]) / d[axis];
      double tb = (hi[axis] - o[axis]) / d[axis];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      if (t0 > t1) return false;
    }
  }
  return t0 < 1.0;
}

}  // namespace detail

inline ObservationMask synth_mask(const MaskSpec& spec, int height, int width) {
  spec.validate();
  detail::check_dims(height, width);
  Rng rng(Rng::derive_seed(spec.seed, "mask"));
  Rng rng_occ = rng.child("occluders");
  Rng rng_drop = rng.child("dropout");

  const double apex_x = spec.apex_col >= 0.0 ? spec.apex_col : width / 2.0;
  const double apex_y = static_cast<double>(height);  // bottom edge, just below row h-1

  const int n_occ =
      static_cast<int>(rng_occ.uniform_int(spec.occluder_count_min, spec.occluder_count_max));
  std::vector<detail::OccluderRect> occluders;
  occluders.reserve(n_occ);
  for (int i = 0; i < n_occ; ++i) {
    const int sw = static_cast<int>(rng_occ.uniform_int(spec.occluder_size_min, spec.occluder_size_max));
    const int sh = static_cast<int>(rng_occ.uniform_int(spec.occluder_size_min, spec.occluder_size_max));
    const double x0 = rng_occ.uniform(0.0, std::max(1.0, double(width - sw)));
    const double y0 = rng_occ.uniform(0.0, std::max(1.0, double(height - sh)));
    occluders.push_back({x0, y0, x0 + sw, y0 + sh});
  }

  ObservationMask mask(height, width);
  const double cos_half = std::cos(spec.fov_half_angle);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      const double px = c + 0.5, py = r + 0.5;
      const double dx = px - apex_x, dy = py - apex_y;  // dy < 0: forward
      const double norm = std::sqrt(dx * dx + dy * dy);
      // angle between (dx,dy) and straight ahead (0,-1)
      bool observed = norm > 0.0 && (-dy) / norm >= cos_half - 1e-12;
      if (observed)
        for (const auto& b : occluders)
          if (detail::segment_hits_box(apex_x, apex_y, px, py, b)) {
            observed = false;
            break;
          }
      const bool dropped = rng_drop.bernoulli(spec.dropout_rate);
      mask.at(r, c) = observed && !dropped;
    }
  return mask;
}

}  // namespace hg
