// Acceptance gate: one pass/fail line per criterion, non-zero exit on any
// failure. Criteria 5-7 train real models and dominate the runtime; artifacts
// land under ./hg_acceptance_out for inspection.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "hallucigrid/cli.hpp"
#include "hallucigrid/gradcheck.hpp"
#include "hallucigrid/harness.hpp"

using namespace hg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string fmt(double v) { return hg::detail::format_double(v); }

// ---------------------------------------------------------------- criterion 1

Outcome criterion_gradient_exactness() {
  const double t0 = now_seconds();
  NetConfig cfg;
  cfg.depth = 2;
  cfg.base_channels = 2;
  cfg.skip_levels = 2;
  cfg.norm = false;
  const GradCheckReport rep = grad_check(cfg, /*seed=*/424242, /*batch=*/2, 8, 8);
  const double elapsed = now_seconds() - t0;
  Outcome out;
  out.pass = rep.passed && rep.max_relative_error < 1e-4 && elapsed < 60.0;
  out.detail = "max rel err " + fmt(rep.max_relative_error) + " (worst " +
               rep.worst_param_name + "), " + fmt(elapsed) + " s over " +
               std::to_string(rep.param_count) + " params";
  return out;
}

// ---------------------------------------------------------------- criterion 2

Outcome criterion_loss_oracle() {
  Rng rng(777);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(4));
    const int h = 2 + static_cast<int>(rng.below(7));
    const int w = 2 + static_cast<int>(rng.below(7));
    Tensor4<double> pred(n, 1, h, w), target(n, 1, h, w);
    Tensor4<uint8_t> valid(n, 1, h, w);
    for (auto& v : pred.v) v = rng.uniform(0.01, 0.99);
    for (auto& v : target.v) v = rng.uniform01();
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
    const double naive = sum / static_cast<double>(cnt);
    const double got = masked_bce(pred, target, valid);
    worst = std::max(worst, std::abs(got - naive) / std::max(1.0, std::abs(naive)));
  }

  // combined Eq.2-style gradient at non-valid cells is exactly zero
  bool zero_ok = true;
  for (int trial = 0; trial < 10; ++trial) {
    Tensor4<double> logits(2, 1, 6, 6), t1(2, 1, 6, 6), t2(2, 1, 6, 6), t3(2, 1, 6, 6);
    Tensor4<uint8_t> v1(2, 1, 6, 6), v2(2, 1, 6, 6), v3(2, 1, 6, 6);
    for (auto& v : logits.v) v = rng.uniform(-3, 3);
    for (auto& v : t1.v) v = rng.below(2);
    for (auto& v : t2.v) v = rng.below(2);
    for (auto& v : t3.v) v = rng.below(2);
    for (auto& v : v1.v) v = rng.bernoulli(0.4);
    for (auto& v : v2.v) v = rng.bernoulli(0.4);
    for (auto& v : v3.v) v = rng.bernoulli(0.4);
    v1.v[0] = v2.v[1] = v3.v[2] = 1;
    Tensor4<double> dlogits(2, 1, 6, 6, 0.0);
    masked_bce_logit_grad(logits, t1, v1, 0.5, dlogits);
    masked_bce_logit_grad(logits, t2, v2, 0.25, dlogits);
    masked_bce_logit_grad(logits, t3, v3, 0.25, dlogits);
    for (size_t i = 0; i < dlogits.size(); ++i)
      if (!v1.v[i] && !v2.v[i] && !v3.v[i] && dlogits.v[i] != 0.0) zero_ok = false;
  }

  Outcome out;
  out.pass = worst <= 1e-12 && zero_ok;
  out.detail = "worst rel dev " + fmt(worst) +
               std::string(zero_ok ? ", non-valid gradients exactly 0" : ", NON-ZERO gradient leak");
  return out;
}

// ---------------------------------------------------------------- criterion 3

// per-cell counting oracle; scores kept as exact rationals for tie-safe ranking
struct NaiveScore {
  long long num = 0, den = 1;
  bool less_than(const NaiveScore& o) const { return num * o.den < o.num * den; }
  bool equals(const NaiveScore& o) const { return num * o.den == o.num * den; }
};

NaiveScore naive_score(const TernaryGrid& partial, const BinaryGrid& cand) {
  long long ir = 0, ur = 0, in_ = 0, un = 0;
  for (size_t i = 0; i < partial.size(); ++i) {
    const CellStatus s = partial.cells[i];
    if (s == CellStatus::Unobserved) continue;
    const bool p = s == CellStatus::Road, q = cand.cells[i] != 0;
    ir += p && q;
    ur += p || q;
    in_ += !p && !q;
    un += !p || !q;
  }
  if (ur && un) return {ir * un + in_ * ur, 2 * ur * un};
  if (ur) return {ir, ur};
  return {in_, un};
}

Outcome criterion_preselection_oracle() {
  Rng rng(31337);
  std::vector<BinaryGrid> corpus;
  for (int i = 0; i < 100; ++i) {
    BinaryGrid g(16, 16);
    for (auto& c : g.cells) c = rng.bernoulli(0.4);
    corpus.push_back(g);
  }
  corpus[40] = corpus[7];  // forced ties
  corpus[41] = corpus[7];
  corpus[90] = corpus[25];
  const PackedCorpus packed = PackedCorpus::pack(corpus);

  bool topk_ok = true, unanimity_ok = true;
  for (int query = 0; query < 20; ++query) {
    TernaryGrid partial(16, 16);
    for (auto& c : partial.cells)
      c = rng.uniform01() < 0.35
              ? CellStatus::Unobserved
              : (rng.bernoulli(0.5) ? CellStatus::Road : CellStatus::NonRoad);
    partial.cells[0] = CellStatus::Road;
    partial.cells[1] = CellStatus::NonRoad;

    const auto got = topk_select(partial, packed, 8, 100, 4242);
    std::vector<std::pair<NaiveScore, uint32_t>> scored;
    for (uint32_t i = 0; i < 100; ++i) scored.push_back({naive_score(partial, corpus[i]), i});
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      if (!a.first.equals(b.first)) return b.first.less_than(a.first);
      return a.second < b.second;
    });
    for (int i = 0; i < 8; ++i)
      if (got[i] != scored[i].second) topk_ok = false;

    const ConsensusTarget t = consensus_target(packed, got);
    for (size_t cell = 0; cell < t.size(); ++cell) {
      int votes = 0;
      for (uint32_t s : got) votes += corpus[s].cells[cell] != 0;
      if (t.valid[cell] != (votes == 0 || votes == 8)) unanimity_ok = false;
      if (t.road_votes[cell] != votes) unanimity_ok = false;
    }
  }
  Outcome out;
  out.pass = topk_ok && unanimity_ok;
  out.detail = std::string("packed top-k ") + (topk_ok ? "== " : "!= ") +
               "naive over 20 queries incl. ties; unanimity " +
               (unanimity_ok ? "exact" : "BROKEN");
  return out;
}

// ---------------------------------------------------------------- criterion 4

Outcome criterion_metric_oracles() {
  Rng rng(2718);
  bool ok = true;
  std::string note;

  // identity at every radius
  for (int trial = 0; trial < 5 && ok; ++trial) {
    BinaryGrid g(12, 12);
    for (auto& c : g.cells) c = rng.bernoulli(0.3);
    for (int r = 0; r <= 5; ++r) {
      const ContourScores s = contour_prf(g, g, r);
      if (s.f_measure != 1.0) { ok = false; note = "identity F != 1"; }
    }
  }

  // one-cell stripe shift: F 0 -> 1 between r=0 and r=1
  {
    BinaryGrid gt(16, 8), pred(16, 8);
    for (int r = 4; r <= 7; ++r)
      for (int c = 0; c < 8; ++c) gt.at(r, c) = 1;
    for (int r = 5; r <= 8; ++r)
      for (int c = 0; c < 8; ++c) pred.at(r, c) = 1;
    if (contour_prf(pred, gt, 0).f_measure != 0.0) { ok = false; note = "shifted stripe F(0) != 0"; }
    if (contour_prf(pred, gt, 1).f_measure != 1.0) { ok = false; note = "shifted stripe F(1) != 1"; }
  }

  // monotone P and R over r = 0..5 on 50 random pairs
  for (int trial = 0; trial < 50 && ok; ++trial) {
    BinaryGrid a(16, 16), b(16, 16);
    for (auto& c : a.cells) c = rng.bernoulli(0.35);
    for (auto& c : b.cells) c = rng.bernoulli(0.35);
    double pp = -1, pr = -1;
    for (int r = 0; r <= 5; ++r) {
      const ContourScores s = contour_prf(a, b, r);
      if (s.precision < pp || s.recall < pr) { ok = false; note = "P/R not monotone in r"; }
      pp = s.precision;
      pr = s.recall;
    }
  }

  // mean IoU equals exact set arithmetic
  for (int trial = 0; trial < 50 && ok; ++trial) {
    BinaryGrid p(8, 8), g(8, 8);
    ObservationMask reg(8, 8);
    for (auto& c : p.cells) c = rng.bernoulli(0.4);
    for (auto& c : g.cells) c = rng.bernoulli(0.4);
    bool any = false;
    for (auto& c : reg.cells) { c = rng.bernoulli(0.8); any |= c != 0; }
    if (!any) reg.cells[0] = 1;
    long ir = 0, ur = 0, in_ = 0, un = 0;
    for (size_t i = 0; i < p.size(); ++i) {
      if (!reg.cells[i]) continue;
      const bool a = p.cells[i], b = g.cells[i];
      ir += a && b; ur += a || b; in_ += !a && !b; un += !a || !b;
    }
    double expect = 0.0;
    int cls = 0;
    if (ur) { expect += double(ir) / ur; ++cls; }
    if (un) { expect += double(in_) / un; ++cls; }
    expect /= cls;
    if (mean_iou(p, g, reg) != expect) { ok = false; note = "mean IoU != set arithmetic"; }
  }

  // hamming equals count arithmetic
  {
    VoxelGrid a(3, 4, 5), b(3, 4, 5);
    int flips = 0;
    for (size_t i = 0; i < b.cells.size(); ++i)
      if (rng.bernoulli(0.2)) { b.cells[i] = 1; ++flips; }
    if (hamming_distance(a, b) != double(flips) / 60.0) { ok = false; note = "hamming mismatch"; }
  }

  Outcome out;
  out.pass = ok;
  out.detail = ok ? "identity, stripe shift, monotonicity, exact IoU and hamming all hold"
                  : note;
  return out;
}

// --------------------------------------------------------- criteria 5, 6 and 7

WorldSpec benchmark_world(uint64_t seed, int wmin, int wmax) {
  WorldSpec w;
  w.seed = seed;
  w.map_size = 256;
  w.road_count_min = 3;
  w.road_count_max = 6;
  w.road_width_min = wmin;
  w.road_width_max = wmax;
  w.curvature = 0.15;
  return w;
}

DatasetConfig benchmark_dataset() {
  DatasetConfig cfg;
  cfg.window = 64;
  cfg.stride = 16;       // 4 observation worlds -> 676 crops
  cfg.prior_stride = 12; // 8 prior worlds -> 2312 crops (>= 2048)
  cfg.train_count = 512;
  cfg.test_count = 128;
  cfg.holdout_count = 256;
  cfg.mask_seed_base = 11;
  cfg.split_seed = 12;
  // width-distribution domain gap between observation and prior worlds
  for (uint64_t s : {101ull, 102ull, 103ull, 104ull})
    cfg.observation_worlds.push_back(benchmark_world(s, 6, 9));
  for (uint64_t s : {201ull, 202ull, 203ull, 204ull, 205ull, 206ull, 207ull, 208ull})
    cfg.prior_worlds.push_back(benchmark_world(s, 4, 7));
  cfg.holdout_prior_worlds.push_back(benchmark_world(301, 4, 7));
  cfg.mask.fov_half_angle = 1.1;
  cfg.mask.apex_col = -1.0;
  cfg.mask.occluder_count_min = 2;
  cfg.mask.occluder_count_max = 5;
  cfg.mask.occluder_size_min = 4;
  cfg.mask.occluder_size_max = 12;
  cfg.mask.dropout_rate = 0.02;
  return cfg;
}

NetConfig benchmark_net() {
  NetConfig nc;
  nc.depth = 4;  // bottleneck 4x4 on 64x64 crops
  nc.base_channels = 8;
  nc.skip_levels = 3;
  nc.norm = true;
  return nc;
}

TrainConfig benchmark_train() {
  TrainConfig tc;
  tc.epochs = 60;
  tc.batch_size = 16;
  tc.lr = 1e-3;
  tc.flip_prob = 0.15;
  tc.k = 8;
  tc.subset_size = 1024;
  tc.val_every = 10;
  tc.seed = 1;
  return tc;
}

struct BenchmarkArtifacts {
  LoadedDataset data;
  DatasetManifest manifest;
  PreselectionCache cache;
  EvalReport full_report;
  Checkpoint<float> full_checkpoint;
  bool ready = false;
};

BenchmarkArtifacts g_bench;

Outcome criterion_learning_effect(const fs::path& root) {
  const double t0 = now_seconds();
  const DatasetConfig dc = benchmark_dataset();
  const fs::path data_dir = root / "data";
  g_bench.manifest = make_dataset(dc, data_dir.string());
  g_bench.data = load_dataset(g_bench.manifest);

  const TrainConfig tc = benchmark_train();
  const NetConfig nc = benchmark_net();

  const PackedCorpus corpus = PackedCorpus::pack(g_bench.data.prior);
  const fs::path cache_path = root / "cache.hpsc";
  build_preselection_cache(g_bench.data.train_partial, g_bench.data.train_ids, corpus, tc.k,
                           tc.subset_size, tc.seed_preselect(), cache_path.string());
  g_bench.cache = PreselectionCache::load(cache_path.string());
  const double t_data = now_seconds() - t0;

  ExperimentSpec base;
  base.out_dir = (root / "runs").string();
  base.train = tc;
  base.net = nc;

  // full three-pair training
  ExperimentSpec full = base;
  full.run_id = "benchmark_all";
  const double t1 = now_seconds();
  const RunArtifacts art_full = run_experiment(full, g_bench.data, &g_bench.cache);
  const double full_minutes = (now_seconds() - t1) / 60.0;
  g_bench.full_report = art_full.report;
  g_bench.full_checkpoint = load_checkpoint<float>(art_full.checkpoint_path);
  g_bench.ready = true;

  // ablation leg A: only the pre-selection pair
  ExperimentSpec only_pre = base;
  only_pre.run_id = "benchmark_only_preselection";
  only_pre.pairs = {false, true, false};
  const RunArtifacts art_pre = run_experiment(only_pre, g_bench.data, &g_bench.cache);

  const double miou_full = art_full.report.mean_iou_unobserved;
  const double miou_pre = art_pre.report.mean_iou_unobserved;
  const double margin_a = miou_full - miou_pre;

  std::string detail = "unobs mIoU all=" + fmt(miou_full) + " vs only-preselection=" +
                       fmt(miou_pre) + " (margin " + fmt(margin_a) + ", need >= 0.05)";
  bool pass = margin_a >= 0.05;

  if (!pass) {
    // ablation leg B: drop the observation pair, compare contour F at r=0
    ExperimentSpec wo_obs = base;
    wo_obs.run_id = "benchmark_wo_observation";
    wo_obs.pairs = {false, true, true};
    const RunArtifacts art_wo = run_experiment(wo_obs, g_bench.data, &g_bench.cache);
    const double f_full = art_full.report.contour_at(0).f_measure;
    const double f_wo = art_wo.report.contour_at(0).f_measure;
    const double margin_b = f_full - f_wo;
    detail += "; F(r=0) all=" + fmt(f_full) + " vs wo-observation=" + fmt(f_wo) +
              " (margin " + fmt(margin_b) + ", need >= 0.02)";
    pass = margin_b >= 0.02;
  }

  detail += "; data+cache " + fmt(t_data) + " s, full run " + fmt(full_minutes) +
            " min (target < 30)";
  Outcome out;
  out.pass = pass && full_minutes < 30.0;
  out.detail = detail;
  return out;
}

Outcome criterion_holdout(const fs::path& root) {
  if (!g_bench.ready) return {false, "skipped: benchmark training unavailable"};
  const EvalReport rep =
      run_holdout_eval(g_bench.full_checkpoint, g_bench.manifest, g_bench.data, {0});
  write_eval_report(rep, (root / "holdout_report.json").string());
  // regression floor established by the first measured run (protocol: pin the
  // observed value rounded down); 0.60 is the spec-stated minimum
  const double floor = 0.60;
  Outcome out;
  out.pass = rep.mean_iou_unobserved >= floor && rep.samples.size() == 256;
  out.detail = "unobserved mIoU " + fmt(rep.mean_iou_unobserved) + " on " +
               std::to_string(rep.samples.size()) + " unseen masked priors (floor " +
               fmt(floor) + ")";
  return out;
}

Outcome criterion_determinism(const fs::path& root) {
  // a reduced but complete pipeline, executed twice with identical seeds
  DatasetConfig dc = benchmark_dataset();
  dc.window = 32;
  dc.stride = 16;
  dc.prior_stride = 16;
  dc.train_count = 64;
  dc.test_count = 16;
  dc.holdout_count = 8;
  dc.observation_worlds = {benchmark_world(401, 6, 9), benchmark_world(402, 6, 9)};
  dc.prior_worlds = {benchmark_world(501, 4, 7), benchmark_world(502, 4, 7)};
  dc.holdout_prior_worlds = {benchmark_world(601, 4, 7)};

  TrainConfig tc = benchmark_train();
  tc.epochs = 6;
  tc.batch_size = 8;
  tc.val_every = 2;
  NetConfig nc = benchmark_net();
  nc.depth = 3;
  nc.base_channels = 4;

  const auto run_once = [&](const fs::path& dir) {
    make_dataset(dc, (dir / "data").string());
    const DatasetManifest manifest = load_manifest((dir / "data").string());
    const LoadedDataset data = load_dataset(manifest);
    const PackedCorpus corpus = PackedCorpus::pack(data.prior);
    build_preselection_cache(data.train_partial, data.train_ids, corpus, tc.k,
                             std::min<int>(128, corpus.count), tc.seed_preselect(),
                             (dir / "cache.hpsc").string());
    const PreselectionCache cache = PreselectionCache::load((dir / "cache.hpsc").string());
    ExperimentSpec spec;
    spec.run_id = "det";
    spec.out_dir = (dir / "runs").string();
    spec.train = tc;
    spec.net = nc;
    return run_experiment(spec, data, &cache);
  };

  const RunArtifacts a = run_once(root / "det1");
  const RunArtifacts b = run_once(root / "det2");

  const auto same = [](const std::string& p1, const std::string& p2) {
    return hg::detail::read_file_bytes(p1) == hg::detail::read_file_bytes(p2);
  };
  const bool ck_same = same(a.checkpoint_path, b.checkpoint_path);
  const bool log_same = same(a.log_path, b.log_path);
  const bool rep_same = same(a.report_path, b.report_path);

  Outcome out;
  out.pass = ck_same && log_same && rep_same;
  out.detail = std::string("checkpoint ") + (ck_same ? "identical" : "DIFFERS") + ", log " +
               (log_same ? "identical" : "DIFFERS") + ", report " +
               (rep_same ? "identical" : "DIFFERS");
  return out;
}

// ---------------------------------------------------------------- criterion 8

Outcome criterion_vote_oracle() {
  GridSpec spec;
  spec.height = 1;
  spec.width = 1;
  bool ok = true;
  int cases = 0;
  for (int road = 0; road <= 4; ++road)
    for (int stat = 0; road + stat <= 4; ++stat)
      for (int mov = 0; road + stat + mov <= 4; ++mov) {
        std::vector<LabeledPoint> pts;
        for (int i = 0; i < road; ++i) pts.push_back({0.5, 0.5, PointClass::RoadClass});
        for (int i = 0; i < stat; ++i) pts.push_back({0.5, 0.5, PointClass::StaticNonRoad});
        for (int i = 0; i < mov; ++i) pts.push_back({0.5, 0.5, PointClass::MovableOrUnknown});

        // brute-force oracle straight from the stated rules
        CellStatus expect;
        if (road + stat + mov == 0) expect = CellStatus::Unobserved;
        else {
          const int top = std::max({road, stat, mov});
          if (mov == top) expect = CellStatus::Unobserved;       // conservative priority
          else if (stat == top) expect = CellStatus::NonRoad;
          else expect = CellStatus::Road;
        }
        if (project_points_to_grid(pts, spec).cells[0] != expect) ok = false;
        ++cases;
      }
  Outcome out;
  out.pass = ok;
  out.detail = std::to_string(cases) + " class-count combinations checked exhaustively";
  return out;
}

}  // namespace

int main() {
  const fs::path root = "hg_acceptance_out";
  fs::remove_all(root);
  fs::create_directories(root);

  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "gradient exactness", [] { return criterion_gradient_exactness(); }},
      {2, "loss oracle", [] { return criterion_loss_oracle(); }},
      {3, "pre-selection oracle", [] { return criterion_preselection_oracle(); }},
      {4, "metric oracles", [] { return criterion_metric_oracles(); }},
      {5, "desk-scale learning effect", [&] { return criterion_learning_effect(root); }},
      {6, "hold-out generalization", [&] { return criterion_holdout(root); }},
      {7, "determinism", [&] { return criterion_determinism(root); }},
      {8, "majority-vote projection", [] { return criterion_vote_oracle(); }},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    std::printf("[%s] criterion %d: %s — %s\n", out.pass ? "PASS" : "FAIL", c.id, c.name,
                out.detail.c_str());
    std::fflush(stdout);
    failures += !out.pass;
  }
  if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
  else std::printf("all acceptance criteria passed\n");
  return failures == 0 ? 0 : 1;
}
