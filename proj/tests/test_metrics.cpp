#include <catch2/catch_amalgamated.hpp>

#include "hallucigrid/metrics.hpp"
#include "hallucigrid/rng.hpp"

using namespace hg;

namespace {

BinaryGrid random_layout(int h, int w, Rng& rng, double p = 0.5) {
  BinaryGrid g(h, w);
  for (auto& c : g.cells) c = rng.bernoulli(p);
  return g;
}

// stripe of road rows [r0, r1] across the full width
BinaryGrid stripe(int h, int w, int r0, int r1) {
  BinaryGrid g(h, w);
  for (int r = r0; r <= r1; ++r)
    for (int c = 0; c < w; ++c) g.at(r, c) = 1;
  return g;
}

}  // namespace

TEST_CASE("pixel accuracy counts region cells only") {
  Rng rng(1);
  const BinaryGrid gt = random_layout(4, 4, rng);
  BinaryGrid pred = gt;
  const ObservationMask full = full_region(4, 4);

  REQUIRE(pixel_accuracy(pred, gt, full) == 1.0);

  BinaryGrid comp = gt;
  for (auto& c : comp.cells) c = c ? 0 : 1;
  REQUIRE(pixel_accuracy(comp, gt, full) == 0.0);

  pred.cells[5] = pred.cells[5] ? 0 : 1;  // one wrong cell of 16
  REQUIRE(pixel_accuracy(pred, gt, full) == 0.9375);

  ObservationMask empty(4, 4, false);
  REQUIRE_THROWS_AS(pixel_accuracy(pred, gt, empty), DataError);
}

TEST_CASE("mean IoU follows the two-class exclusion rule") {
  const ObservationMask full = full_region(3, 3);
  Rng rng(2);
  const BinaryGrid mixed = random_layout(3, 3, rng);
  REQUIRE(mean_iou(mixed, mixed, full) == 1.0);

  // single-class case: union of the other class is empty, so it drops out
  const BinaryGrid all_road(3, 3, true);
  REQUIRE(mean_iou(all_road, all_road, full) == 1.0);
}

TEST_CASE("mean IoU matches brute-force set arithmetic on random pairs") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const BinaryGrid pred = random_layout(8, 8, rng, 0.4);
    const BinaryGrid gt = random_layout(8, 8, rng, 0.4);
    ObservationMask region(8, 8);
    bool any = false;
    for (auto& c : region.cells) {
      c = rng.bernoulli(0.7);
      any |= c != 0;
    }
    if (!any) region.cells[0] = 1;

    long ir = 0, ur = 0, in_ = 0, un = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
      if (!region.cells[i]) continue;
      const bool p = pred.cells[i], g = gt.cells[i];
      ir += p && g;
      ur += p || g;
      in_ += !p && !g;
      un += !p || !g;
    }
    double expect = 0.0;
    int classes = 0;
    if (ur) { expect += double(ir) / ur; ++classes; }
    if (un) { expect += double(in_) / un; ++classes; }
    expect /= classes;
    REQUIRE(mean_iou(pred, gt, region) == expect);
  }
}

TEST_CASE("metrics are invariant under simultaneous permutations") {
  Rng rng(4);
  const BinaryGrid pred = random_layout(6, 6, rng);
  const BinaryGrid gt = random_layout(6, 6, rng);
  ObservationMask region(6, 6, true);
  region.cells[7] = 0;

  // permute rows and columns the same way in all three grids
  std::vector<int> rows{3, 1, 5, 0, 4, 2}, cols{2, 0, 1, 5, 3, 4};
  BinaryGrid pred2(6, 6), gt2(6, 6);
  ObservationMask region2(6, 6);
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c) {
      pred2.at(r, c) = pred.at(rows[r], cols[c]);
      gt2.at(r, c) = gt.at(rows[r], cols[c]);
      region2.at(r, c) = region.at(rows[r], cols[c]);
    }
  REQUIRE(mean_iou(pred2, gt2, region2) == mean_iou(pred, gt, region));
  REQUIRE(pixel_accuracy(pred2, gt2, region2) == pixel_accuracy(pred, gt, region));
}

TEST_CASE("boundary extraction ignores the image border") {
  const BinaryGrid all_road(4, 4, true);
  const BinaryGrid none = extract_boundary(all_road);
  for (auto c : none.cells) REQUIRE(c == 0);

  BinaryGrid single(5, 5);
  single.at(2, 2) = 1;
  const BinaryGrid one = extract_boundary(single);
  REQUIRE(one.at(2, 2) == 1);
  size_t count = 0;
  for (auto c : one.cells) count += c;
  REQUIRE(count == 1);
}

TEST_CASE("a 3-wide stripe has exactly its two edge rows as boundary") {
  const BinaryGrid s = stripe(9, 6, 3, 5);
  const BinaryGrid b = extract_boundary(s);
  for (int c = 0; c < 6; ++c) {
    REQUIRE(b.at(3, c) == 1);
    REQUIRE(b.at(4, c) == 0);
    REQUIRE(b.at(5, c) == 1);
  }
  size_t count = 0;
  for (auto v : b.cells) count += v;
  REQUIRE(count == 12);
}

TEST_CASE("contour scores are perfect on identical grids at every radius") {
  Rng rng(5);
  const BinaryGrid g = random_layout(12, 12, rng, 0.3);
  for (int r = 0; r <= 5; ++r) {
    const ContourScores s = contour_prf(g, g, r);
    REQUIRE(s.precision == 1.0);
    REQUIRE(s.recall == 1.0);
    REQUIRE(s.f_measure == 1.0);
  }
}

TEST_CASE("a one-cell shift scores zero unrelaxed and one at radius 1") {
  // ground truth stripe rows 4..7, prediction shifted down by one row
  const BinaryGrid gt = stripe(16, 8, 4, 7);
  const BinaryGrid pred = stripe(16, 8, 5, 8);
  const ContourScores s0 = contour_prf(pred, gt, 0);
  REQUIRE(s0.precision == 0.0);
  REQUIRE(s0.recall == 0.0);
  REQUIRE(s0.f_measure == 0.0);
  const ContourScores s1 = contour_prf(pred, gt, 1);
  REQUIRE(s1.precision == 1.0);
  REQUIRE(s1.recall == 1.0);
  REQUIRE(s1.f_measure == 1.0);
}

TEST_CASE("precision and recall never decrease as the relaxation grows") {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const BinaryGrid pred = random_layout(16, 16, rng, 0.35);
    const BinaryGrid gt = random_layout(16, 16, rng, 0.35);
    double prev_p = -1.0, prev_r = -1.0;
    for (int r = 0; r <= 5; ++r) {
      const ContourScores s = contour_prf(pred, gt, r);
      REQUIRE(s.precision >= prev_p);
      REQUIRE(s.recall >= prev_r);
      prev_p = s.precision;
      prev_r = s.recall;
    }
  }
}

TEST_CASE("empty boundaries follow the stated conventions") {
  const BinaryGrid empty(4, 4);          // no road at all -> no boundary
  const BinaryGrid full4(4, 4, true);    // all road -> no boundary either
  BinaryGrid some(4, 4);
  some.at(1, 1) = 1;

  // both boundaries empty -> perfect
  const ContourScores both = contour_prf(empty, full4, 0);
  REQUIRE(both.precision == 1.0);
  REQUIRE(both.recall == 1.0);
  REQUIRE(both.f_measure == 1.0);

  // one empty, one not -> F = 0
  const ContourScores p_empty = contour_prf(empty, some, 0);
  REQUIRE(p_empty.precision == 0.0);
  REQUIRE(p_empty.f_measure == 0.0);
  const ContourScores g_empty = contour_prf(some, empty, 0);
  REQUIRE(g_empty.recall == 0.0);
  REQUIRE(g_empty.f_measure == 0.0);
}

TEST_CASE("swapping prediction and truth exchanges precision and recall") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const BinaryGrid a = random_layout(10, 10, rng, 0.4);
    const BinaryGrid b = random_layout(10, 10, rng, 0.4);
    for (int r = 0; r <= 2; ++r) {
      const ContourScores ab = contour_prf(a, b, r);
      const ContourScores ba = contour_prf(b, a, r);
      REQUIRE(ab.precision == ba.recall);
      REQUIRE(ab.recall == ba.precision);
      REQUIRE(ab.f_measure == Catch::Approx(ba.f_measure).epsilon(1e-15));
    }
  }
}

TEST_CASE("dilation by a larger disk is a superset") {
  Rng rng(8);
  const BinaryGrid g = random_layout(12, 12, rng, 0.2);
  BinaryGrid prev = g;
  for (int r = 1; r <= 5; ++r) {
    const BinaryGrid cur = dilate_disk(g, r);
    for (size_t i = 0; i < cur.size(); ++i)
      if (prev.cells[i]) REQUIRE(cur.cells[i] == 1);
    prev = cur;
  }
}

TEST_CASE("hamming distance is the normalized count of differing voxels") {
  VoxelGrid a(2, 2, 2), b(2, 2, 2);
  REQUIRE(hamming_distance(a, b) == 0.0);

  VoxelGrid c = a;
  for (auto& v : c.cells) v = 1;
  REQUIRE(hamming_distance(a, c) == 1.0);

  VoxelGrid d = a;
  d.at(1, 0, 1) = 1;
  REQUIRE(hamming_distance(a, d) == 0.125);

  VoxelGrid e(2, 2, 3);
  REQUIRE_THROWS_AS(hamming_distance(a, e), DataError);
}
