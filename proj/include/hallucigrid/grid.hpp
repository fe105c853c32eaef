#pragma once
// Grid value types shared by every other module: ternary occupancy status,
// binary road layouts, observation masks, their conversions, and the HGRD1
// file format (bit-exact round trip).
//
// Conventions: row-major storage, origin at top-left, row 0 is the row
// farthest from the ego vehicle.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "hallucigrid/common.hpp"

namespace hg {

// Cell status; numeric codes double as the HGRD1 byte encoding.
enum class CellStatus : uint8_t { NonRoad = 0, Road = 1, Unobserved = 2 };

// Real-valued encoding used as network input: road=1, non-road=0, unobserved=0.5.
inline double status_value(CellStatus s) {
  switch (s) {
    case CellStatus::NonRoad: return 0.0;
    case CellStatus::Road: return 1.0;
    case CellStatus::Unobserved: return 0.5;
  }
  throw DataError("invalid cell status");
}

inline CellStatus status_from_value(double v) {
  if (v == 0.0) return CellStatus::NonRoad;
  if (v == 1.0) return CellStatus::Road;
  if (v == 0.5) return CellStatus::Unobserved;
  throw DataError("invalid status value " + detail::format_double(v) +
                  " (must be exactly 0, 0.5 or 1)");
}

namespace detail {
inline void check_dims(int height, int width) {
  if (height < 1 || width < 1)
    throw DataError("grid dimensions must be >= 1, got " + std::to_string(height) + "x" +
                    std::to_string(width));
}
}  // namespace detail

struct TernaryGrid {
  int height = 0;
  int width = 0;
  std::vector<CellStatus> cells;

  TernaryGrid() = default;
  TernaryGrid(int h, int w, CellStatus fill = CellStatus::Unobserved)
      : height(h), width(w), cells(static_cast<size_t>(h) * w, fill) {
    detail::check_dims(h, w);
  }

  size_t size() const { return cells.size(); }
  CellStatus& at(int r, int c) { return cells[static_cast<size_t>(r) * width + c]; }
  CellStatus at(int r, int c) const { return cells[static_cast<size_t>(r) * width + c]; }
  bool operator==(const TernaryGrid&) const = default;
};

struct BinaryGrid {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> cells;  // 1 = road

  BinaryGrid() = default;
  BinaryGrid(int h, int w, bool fill = false)
      : height(h), width(w), cells(static_cast<size_t>(h) * w, fill ? 1 : 0) {
    detail::check_dims(h, w);
  }

  size_t size() const { return cells.size(); }
  uint8_t& at(int r, int c) { return cells[static_cast<size_t>(r) * width + c]; }
  uint8_t at(int r, int c) const { return cells[static_cast<size_t>(r) * width + c]; }
  bool road(int r, int c) const { return at(r, c) != 0; }
  bool operator==(const BinaryGrid&) const = default;
};

struct ObservationMask {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> cells;  // 1 = observed

  ObservationMask() = default;
  ObservationMask(int h, int w, bool fill = false)
      : height(h), width(w), cells(static_cast<size_t>(h) * w, fill ? 1 : 0) {
    detail::check_dims(h, w);
  }

  size_t size() const { return cells.size(); }
  uint8_t& at(int r, int c) { return cells[static_cast<size_t>(r) * width + c]; }
  uint8_t at(int r, int c) const { return cells[static_cast<size_t>(r) * width + c]; }
  bool observed(int r, int c) const { return at(r, c) != 0; }
  size_t observed_count() const {
    size_t n = 0;
    for (uint8_t v : cells) n += v != 0;
    return n;
  }
  bool operator==(const ObservationMask&) const = default;
};

namespace detail {
inline void check_same_dims(int h1, int w1, int h2, int w2, const char* what) {
  if (h1 != h2 || w1 != w2)
    throw DataError(std::string(what) + ": dimension mismatch " + std::to_string(h1) + "x" +
                    std::to_string(w1) + " vs " + std::to_string(h2) + "x" + std::to_string(w2));
}
}  // namespace detail

// Overlay an observation mask on a complete map: unobserved where the mask is
// false, the map's value elsewhere.
inline TernaryGrid compose_partial(const BinaryGrid& truth, const ObservationMask& mask) {
  detail::check_same_dims(truth.height, truth.width, mask.height, mask.width, "compose_partial");
  TernaryGrid out(truth.height, truth.width);
  for (size_t i = 0; i < truth.size(); ++i)
    out.cells[i] = mask.cells[i] ? (truth.cells[i] ? CellStatus::Road : CellStatus::NonRoad)
                                 : CellStatus::Unobserved;
  return out;
}

// Inverse of compose_partial. Unobserved cells get a NonRoad placeholder in the
// binary grid; consumers must consult the mask, never the placeholder.
inline std::pair<BinaryGrid, ObservationMask> split_partial(const TernaryGrid& partial) {
  BinaryGrid values(partial.height, partial.width);
  ObservationMask mask(partial.height, partial.width);
  for (size_t i = 0; i < partial.size(); ++i) {
    const CellStatus s = partial.cells[i];
    mask.cells[i] = s != CellStatus::Unobserved;
    values.cells[i] = s == CellStatus::Road;
  }
  return {std::move(values), std::move(mask)};
}

// Threshold a real-valued prediction in [0,1]. Ties at exactly the threshold
// resolve to Road.
template <typename T>
BinaryGrid binarize(std::span<const T> values, int height, int width, double threshold = 0.5) {
  detail::check_dims(height, width);
  if (values.size() != static_cast<size_t>(height) * width)
    throw DataError("binarize: value count does not match dimensions");
  if (!(threshold > 0.0 && threshold < 1.0))
    throw DataError("binarize: threshold must be in (0,1)");
  BinaryGrid out(height, width);
  for (size_t i = 0; i < values.size(); ++i) {
    const double v = static_cast<double>(values[i]);
    if (!(v >= 0.0 && v <= 1.0))
      throw DataError("binarize: value " + detail::format_double(v) + " outside [0,1]");
    out.cells[i] = v >= threshold;
  }
  return out;
}

inline BinaryGrid binarize(const std::vector<double>& values, int height, int width,
                           double threshold = 0.5) {
  return binarize(std::span<const double>(values), height, width, threshold);
}

// ---------------------------------------------------------------------------
// HGRD1 file format
//   magic "HGRD1" | kind u8 (0=ternary, 1=binary, 2=mask) | height u32le |
//   width u32le | height*width cell bytes
// ---------------------------------------------------------------------------

using GridFile = std::variant<TernaryGrid, BinaryGrid, ObservationMask>;

namespace detail {
constexpr char kGridMagic[5] = {'H', 'G', 'R', 'D', '1'};
constexpr uint8_t kKindTernary = 0;
constexpr uint8_t kKindBinary = 1;
constexpr uint8_t kKindMask = 2;

inline std::string encode_grid(uint8_t kind, int height, int width, const uint8_t* cells) {
  std::string out;
  out.reserve(10 + static_cast<size_t>(height) * width);
  out.append(kGridMagic, 5);
  out.push_back(static_cast<char>(kind));
  put_u32le(out, static_cast<uint32_t>(height));
  put_u32le(out, static_cast<uint32_t>(width));
  out.append(reinterpret_cast<const char*>(cells), static_cast<size_t>(height) * width);
  return out;
}
}  // namespace detail

inline std::string encode_grid(const TernaryGrid& g) {
  return detail::encode_grid(detail::kKindTernary, g.height, g.width,
                             reinterpret_cast<const uint8_t*>(g.cells.data()));
}
inline std::string encode_grid(const BinaryGrid& g) {
  return detail::encode_grid(detail::kKindBinary, g.height, g.width, g.cells.data());
}
inline std::string encode_grid(const ObservationMask& g) {
  return detail::encode_grid(detail::kKindMask, g.height, g.width, g.cells.data());
}

inline void write_grid(const TernaryGrid& g, const std::string& path) {
  detail::write_file_bytes(path, encode_grid(g));
}
inline void write_grid(const BinaryGrid& g, const std::string& path) {
  detail::write_file_bytes(path, encode_grid(g));
}
inline void write_grid(const ObservationMask& g, const std::string& path) {
  detail::write_file_bytes(path, encode_grid(g));
}

inline GridFile decode_grid(std::span<const uint8_t> bytes, const std::string& origin = "<mem>") {
  if (bytes.size() < 14) throw DataError(origin + ": truncated header");
  if (std::memcmp(bytes.data(), detail::kGridMagic, 5) != 0)
    throw DataError(origin + ": bad magic (not an HGRD1 file)");
  const uint8_t kind = bytes[5];
  const uint32_t height = detail::get_u32le(bytes.data() + 6);
  const uint32_t width = detail::get_u32le(bytes.data() + 10);
  if (height < 1 || width < 1)
    throw DataError(origin + ": invalid dimensions " + std::to_string(height) + "x" +
                    std::to_string(width));
  const uint64_t count = static_cast<uint64_t>(height) * width;
  if (bytes.size() != 14 + count) throw DataError(origin + ": truncated payload");
  const uint8_t* cells = bytes.data() + 14;

  switch (kind) {
    case detail::kKindTernary: {
      TernaryGrid g(static_cast<int>(height), static_cast<int>(width));
      for (uint64_t i = 0; i < count; ++i) {
        if (cells[i] > 2)
          throw DataError(origin + ": invalid cell code " + std::to_string(cells[i]));
        g.cells[i] = static_cast<CellStatus>(cells[i]);
      }
      return g;
    }
    case detail::kKindBinary:
    case detail::kKindMask: {
      std::vector<uint8_t> v(count);
      for (uint64_t i = 0; i < count; ++i) {
        if (cells[i] > 1)
          throw DataError(origin + ": invalid cell code " + std::to_string(cells[i]));
        v[i] = cells[i];
      }
      if (kind == detail::kKindBinary) {
        BinaryGrid g(static_cast<int>(height), static_cast<int>(width));
        g.cells = std::move(v);
        return g;
      }
      ObservationMask g(static_cast<int>(height), static_cast<int>(width));
      g.cells = std::move(v);
      return g;
    }
    default:
      throw DataError(origin + ": unknown grid kind " + std::to_string(kind));
  }
}

inline GridFile read_grid(const std::string& path) {
  const auto bytes = detail::read_file_bytes(path);
  return decode_grid(std::span<const uint8_t>(bytes.data(), bytes.size()), path);
}

inline TernaryGrid read_ternary_grid(const std::string& path) {
  GridFile f = read_grid(path);
  if (auto* g = std::get_if<TernaryGrid>(&f)) return std::move(*g);
  throw DataError(path + ": expected a ternary grid");
}
inline BinaryGrid read_binary_grid(const std::string& path) {
  GridFile f = read_grid(path);
  if (auto* g = std::get_if<BinaryGrid>(&f)) return std::move(*g);
  throw DataError(path + ": expected a binary grid");
}
inline ObservationMask read_observation_mask(const std::string& path) {
  GridFile f = read_grid(path);
  if (auto* g = std::get_if<ObservationMask>(&f)) return std::move(*g);
  throw DataError(path + ": expected an observation mask");
}

// PGM export for visual inspection (P5, maxval 255): non-road=0, unobserved=128, road=255.
inline void write_pgm(const TernaryGrid& g, const std::string& path) {
  std::string out = "P5\n" + std::to_string(g.width) + " " + std::to_string(g.height) + "\n255\n";
  out.reserve(out.size() + g.size());
  for (CellStatus s : g.cells)
    out.push_back(s == CellStatus::Road ? char(255) : (s == CellStatus::Unobserved ? char(128) : char(0)));
  detail::write_file_bytes(path, out);
}

inline void write_pgm(const BinaryGrid& g, const std::string& path) {
  std::string out = "P5\n" + std::to_string(g.width) + " " + std::to_string(g.height) + "\n255\n";
  out.reserve(out.size() + g.size());
  for (uint8_t v : g.cells) out.push_back(v ? char(255) : char(0));
  detail::write_file_bytes(path, out);
}

}  // namespace hg
