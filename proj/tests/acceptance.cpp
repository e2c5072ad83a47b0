// Acceptance suite: one pass/fail line per criterion, exit code = failures.

#include <Eigen/Eigenvalues>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <thread>

#include "cadenet/cape.hpp"
#include "cadenet/detectors.hpp"
#include "cadenet/egnms.hpp"
#include "cadenet/eval.hpp"
#include "cadenet/imaging.hpp"
#include "cadenet/ktt.hpp"
#include "cadenet/pee.hpp"
#include "cadenet/pipeline.hpp"
#include "cadenet/sed.hpp"
#include "cadenet/slot.hpp"
#include "cadenet/wem.hpp"
#include "test_util.hpp"

using namespace cadenet;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void require(bool cond, const std::string& detail) {
  if (!cond) throw std::runtime_error(detail);
}

void criterion(int id, const std::string& label, const std::function<void()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body();
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    std::printf("C%02d PASS  %-58s (%.0f ms)\n", id, label.c_str(), ms);
  } catch (const std::exception& e) {
    ++g_failures;
    std::printf("C%02d FAIL  %s: %s\n", id, label.c_str(), e.what());
  }
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// -- C1 ----------------------------------------------------------------------

void c01_equation_arithmetic() {
  require(std::abs(cape::alpha_for_severity(0.5) - 0.7) < 1e-12,
          "alpha(0.5) = " + fmt(cape::alpha_for_severity(0.5)));
  require(std::abs(cape::gamma_for_brightness(100.0) - 1.3) < 1e-12,
          "gamma(100) = " + fmt(cape::gamma_for_brightness(100.0)));
  require(std::abs(cape::gamma_for_brightness(20.0) - 1.40) < 1e-12,
          "gamma(20) = " + fmt(cape::gamma_for_brightness(20.0)));
  require(std::abs(ktt::smooth_confidence(0.5, 1.0) - 0.85) < 1e-12,
          "smooth(0.5,1.0) = " + fmt(ktt::smooth_confidence(0.5, 1.0)));
  require(static_cast<int>(std::ceil(160.0 / 33.0)) == 5, "k(160ms, 33ms) != 5");
  require(std::abs(sed::neighbour_score(0.8, 0.1) - 0.8 * std::exp(0.2)) < 1e-12,
          "Eq.5 score(0.8, 0.1) = " + fmt(sed::neighbour_score(0.8, 0.1)));
}

// -- C2 ----------------------------------------------------------------------

void c02_entropy_map() {
  Raster constant(16, 16, 1, 77);
  require(std::abs(pee::entropy_map(constant).grid(0, 0) - 1.0) <= 1e-9, "constant patch R != 1");

  Raster uniform(16, 16, 1);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) uniform.at(x, y) = static_cast<std::uint8_t>(y * 16);
  require(std::abs(pee::entropy_map(uniform).grid(0, 0) - 0.0) <= 1e-9, "16-bin patch R != 0");

  Raster two(16, 16, 1);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) two.at(x, y) = y < 8 ? 0 : 255;
  require(std::abs(pee::entropy_map(two).grid(0, 0) - 0.75) <= 1e-9, "two-bin patch R != 0.75");

  auto g = testutil::rng(2024);
  for (int it = 0; it < 1000; ++it) {
    Raster r = testutil::random_raster(48, 33, 1, g);
    const auto m = pee::entropy_map(r);
    for (int j = 0; j < m.grid.rows(); ++j)
      for (int i = 0; i < m.grid.cols(); ++i)
        require(m.grid(j, i) >= -1e-9 && m.grid(j, i) <= 1.0 + 1e-9, "R out of [0,1]");
  }
}

// -- C3 ----------------------------------------------------------------------

geometry::Box random_box(std::mt19937& g, double extent) {
  std::uniform_real_distribution<double> u(0.0, extent);
  std::uniform_real_distribution<double> s(2.0, extent / 2);
  const double x = u(g), y = u(g);
  return {x, y, x + s(g), y + s(g)};
}

void c03_oracle_equivalence() {
  auto g = testutil::rng(31337);
  std::uniform_real_distribution<double> conf(0.0, 1.0);
  std::uniform_int_distribution<int> cls(0, 1);

  // NMS vs exhaustive reference, 500 random 6-box sets
  for (int it = 0; it < 500; ++it) {
    std::vector<geometry::Detection> dets;
    for (int i = 0; i < 6; ++i) {
      geometry::Detection d;
      d.box = random_box(g, 40.0);
      d.class_id = cls(g);
      d.conf = d.score = conf(g);
      dets.push_back(d);
    }
    auto want = testutil::reference_nms(dets, 0.45);
    auto got = geometry::nms(dets, 0.45);
    require(got.size() == want.size(), "nms size mismatch at case " + std::to_string(it));
    for (std::size_t i = 0; i < got.size(); ++i)
      require(got[i].score == want[i].score && got[i].box.x1 == want[i].box.x1,
              "nms order mismatch at case " + std::to_string(it));
  }

  // Hungarian vs factorial enumeration, 200 matrices with n <= 6
  std::uniform_int_distribution<int> dim(1, 6);
  std::uniform_real_distribution<double> cost_u(0.0, 10.0);
  for (int it = 0; it < 200; ++it) {
    const int n = dim(g), m = dim(g);
    Eigen::MatrixXd cost(n, m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) cost(i, j) = cost_u(g);
    auto pairs = geometry::hungarian(cost);
    double total = 0.0;
    for (auto [i, j] : pairs) total += cost(i, j);

    const Eigen::MatrixXd a = n <= m ? cost : Eigen::MatrixXd(cost.transpose());
    std::vector<int> cols(a.cols());
    std::iota(cols.begin(), cols.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
      double t = 0.0;
      for (int i = 0; i < a.rows(); ++i) t += a(i, cols[i]);
      best = std::min(best, t);
    } while (std::next_permutation(cols.begin(), cols.end()));
    require(std::abs(total - best) < 1e-9,
            "hungarian cost " + fmt(total) + " != brute force " + fmt(best));
  }

  // k-NN vs full-scan sort at D=8, 100 queries
  std::normal_distribution<float> nrm(0.0f, 1.0f);
  auto runit = [&] {
    Eigen::VectorXf v(8);
    for (int i = 0; i < 8; ++i) v(i) = nrm(g);
    return Eigen::VectorXf(v / v.norm());
  };
  sed::SedDatabase db(8);
  std::vector<Eigen::VectorXf> embs;
  for (int i = 0; i < 60; ++i) {
    sed::SedEntry e;
    e.embedding = runit();
    e.delta_f1 = 0.01f * static_cast<float>(i % 7);
    embs.push_back(e.embedding);
    db.append(e);
  }
  for (int it = 0; it < 100; ++it) {
    auto q = runit();
    auto got = db.knn(q, 5);
    std::vector<std::pair<float, int>> sims;
    for (int i = 0; i < 60; ++i) sims.emplace_back(embs[i].dot(q), i);
    std::stable_sort(sims.begin(), sims.end(), [](auto& a, auto& b) { return a.first > b.first; });
    for (int i = 0; i < 5; ++i)
      require(got[i].second == sims[i].first, "knn mismatch at query " + std::to_string(it));
  }

  // EG-NMS fuse vs brute-force pooled reference, 200 cases
  std::uniform_real_distribution<float> rel(0.0f, 1.0f);
  std::uniform_real_distribution<double> pos(0.0, 44.0), sz(4.0, 18.0);
  for (int it = 0; it < 200; ++it) {
    pee::ReliabilityMap m;
    m.patch_size = 16;
    m.source_width = 64;
    m.source_height = 64;
    m.grid.resize(4, 4);
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 4; ++i) m.grid(j, i) = rel(g);
    std::vector<geometry::Detection> ds, dq;
    for (int i = 0; i < 5; ++i) {
      geometry::Detection a;
      const double x = pos(g), y = pos(g);
      a.box = {x, y, x + sz(g), y + sz(g)};
      a.class_id = cls(g);
      a.conf = a.score = conf(g);
      ds.push_back(a);
      geometry::Detection b;
      const double x2 = pos(g), y2 = pos(g);
      b.box = {x2, y2, x2 + sz(g), y2 + sz(g)};
      b.class_id = cls(g);
      b.conf = b.score = conf(g);
      dq.push_back(b);
    }
    std::vector<geometry::Detection> pool;
    for (auto d : ds) {
      if (d.conf < 0.25) continue;
      d.source = geometry::Stream::S;
      d.score = pee::reliability_at(m, d.box.cx(), d.box.cy()) * d.conf;
      pool.push_back(d);
    }
    for (auto d : dq) {
      if (d.conf < 0.25) continue;
      d.source = geometry::Stream::Q;
      d.score = (1.0 - pee::reliability_at(m, d.box.cx(), d.box.cy())) * d.conf;
      pool.push_back(d);
    }
    auto want = testutil::reference_nms(pool, 0.45);
    auto got = egnms::fuse(ds, dq, m, 0.25, 0.45);
    require(got.size() == want.size(), "fuse size mismatch at case " + std::to_string(it));
    for (std::size_t i = 0; i < got.size(); ++i)
      require(got[i].score == want[i].score && got[i].source == want[i].source,
              "fuse order mismatch at case " + std::to_string(it));
  }
}

// -- C4 ----------------------------------------------------------------------

struct HazeFixture {
  Raster clean;
  int rx0, ry0, rw, rh;  // zero-dark rectangle
  std::vector<geometry::Box> object_boxes;
};

HazeFixture make_haze_fixture() {
  HazeFixture f;
  f.clean = Raster(192, 144, 3);
  for (int y = 0; y < f.clean.height; ++y)
    for (int x = 0; x < f.clean.width; ++x) {
      std::uint8_t v;
      if (y < 28) {
        v = 235;  // sky at exactly A
      } else {
        v = static_cast<std::uint8_t>(118 + ((x * 7 + y * 13) % 11) - 5);
      }
      f.clean.at(x, y, 0) = f.clean.at(x, y, 1) = f.clean.at(x, y, 2) = v;
    }
  auto paint = [&](int x0, int y0, int w, int h, std::array<int, 3> outer,
                   std::array<int, 3> inner, bool track_contrast) {
    for (int y = y0; y < y0 + h; ++y)
      for (int x = x0; x < x0 + w; ++x) {
        const bool in_core = x >= x0 + w / 4 && x < x0 + w - w / 4 && y >= y0 + h / 4 &&
                             y < y0 + h - h / 4;
        const auto& c = in_core ? inner : outer;
        for (int ch = 0; ch < 3; ++ch)
          f.clean.at(x, y, ch) = static_cast<std::uint8_t>(c[ch]);
      }
    if (track_contrast)
      f.object_boxes.push_back({static_cast<double>(x0), static_cast<double>(y0),
                                static_cast<double>(x0 + w), static_cast<double>(y0 + h)});
  };
  // Solid zero-dark rectangle: the transmission probe region.
  f.rx0 = 20;
  f.ry0 = 50;
  f.rw = 48;
  f.rh = 44;
  paint(f.rx0, f.ry0, f.rw, f.rh, {200, 0, 0}, {200, 0, 0}, false);
  // Two-tone objects for the recovered-contrast check.
  paint(90, 60, 40, 40, {0, 170, 40}, {96, 255, 128}, true);
  paint(140, 90, 40, 40, {0, 60, 200}, {120, 160, 255}, true);
  return f;
}

double boxes_rms(const Raster& r, const std::vector<geometry::Box>& boxes) {
  double acc = 0.0;
  for (const auto& b : boxes) acc += pipeline::box_rms_contrast(r, b);
  return acc / static_cast<double>(boxes.size());
}

void c04_dcp_inversion() {
  HazeFixture f = make_haze_fixture();
  for (double t0 : {0.3, 0.5, 0.8}) {
    Raster hazy = eval::apply_fog(f.clean, t0);

    // transmission accuracy with alpha forced to 1
    auto res = cape::dcp_core(hazy, 1.0, 15, 0.001);
    require(std::abs(res.atmo[0] - 235.0) < 1.0, "atmospheric light off at t0=" + fmt(t0));
    const int m = 8;  // min-filter radius + margin
    for (int y = f.ry0 + m; y < f.ry0 + f.rh - m; ++y)
      for (int x = f.rx0 + m; x < f.rx0 + f.rw - m; ++x)
        require(std::abs(res.transmission(y, x) - t0) <= 0.05,
                "T(" + std::to_string(x) + "," + std::to_string(y) + ") = " +
                    fmt(res.transmission(y, x)) + " vs t0 = " + fmt(t0));
  }

  // Recovery strength at alpha = 0.9 (s = 1) on the heavy-haze case. With
  // alpha = 0.9 the recovery factor in a zero-dark region is bounded by
  // 1/(0.1 + 0.9 t0): a 2x gain is reachable only for t0 < ~0.43, so the
  // >= 2x assertion is checked where it is attainable (t0 = 0.3); perfect
  // inversion itself is capped at 1/t0.
  {
    const double t0 = 0.3;
    Raster hazy = eval::apply_fog(f.clean, t0);
    cape::FogParams p;
    auto [recovered, rep] = cape::dehaze_dcp(hazy, 1.0, p);
    const double degraded_contrast = boxes_rms(hazy, f.object_boxes);
    const double recovered_contrast = boxes_rms(recovered, f.object_boxes);
    require(recovered_contrast >= 2.0 * degraded_contrast,
            "contrast " + fmt(recovered_contrast) + " < 2x degraded " + fmt(degraded_contrast) +
                " at t0=" + fmt(t0));
  }
}

// -- C5 ----------------------------------------------------------------------

void c05_derain_roundtrip() {
  const int w = 192, h = 144;
  Raster clean(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::uint8_t v = static_cast<std::uint8_t>(55 + (130.0 * x) / w);
      clean.at(x, y, 0) = clean.at(x, y, 1) = clean.at(x, y, 2) = v;
    }
  Raster streaked = clean;
  std::vector<std::pair<int, int>> streak_pixels;
  auto g = testutil::rng(20240815);
  std::uniform_int_distribution<int> jitter(0, 3), sy(0, h / 3), slen(24, h / 2), sw(1, 2),
      lift(60, 90);
  for (int i = 0; i < (w - 8) / 10; ++i) {
    const int x0 = 4 + i * 10 + jitter(g), y0 = sy(g), len = slen(g), wid = sw(g), up = lift(g);
    for (int y = y0; y < std::min(h, y0 + len); ++y)
      for (int dx = 0; dx < wid; ++dx) {
        for (int c = 0; c < 3; ++c)
          streaked.at(x0 + dx, y, c) = static_cast<std::uint8_t>(
              std::min(255, streaked.at(x0 + dx, y, c) + up));
        streak_pixels.emplace_back(x0 + dx, y);
      }
  }

  cape::RainParams params;
  auto [mask, rho] = cape::rain_streak_mask(streaked, params);
  std::size_t covered = 0;
  std::vector<char> is_streak(static_cast<std::size_t>(w) * h, 0);
  for (auto [x, y] : streak_pixels) {
    if (mask.at(x, y)) ++covered;
    is_streak[static_cast<std::size_t>(y) * w + x] = 1;
  }
  const double coverage = static_cast<double>(covered) / streak_pixels.size();
  require(coverage >= 0.90, "stage-1 coverage " + fmt(coverage) + " < 0.90");
  std::size_t false_on = 0;
  for (std::size_t i = 0; i < mask.data.size(); ++i)
    if (mask.data[i] && !is_streak[i]) ++false_on;
  const double false_cov = static_cast<double>(false_on) / (static_cast<double>(w) * h);
  require(false_cov <= 0.01, "stage-1 false coverage " + fmt(false_cov) + " > 0.01");

  // Stage 2: inpaint the detected mask, measure L1 on the masked region.
  Raster inpainted = imaging::telea_inpaint(streaked, mask, params.inpaint_radius);
  double err_before = 0.0, err_after = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!mask.at(x, y)) continue;
      ++n;
      err_before += std::abs(static_cast<int>(streaked.at(x, y, 0)) - clean.at(x, y, 0));
      err_after += std::abs(static_cast<int>(inpainted.at(x, y, 0)) - clean.at(x, y, 0));
    }
  require(n > 0, "empty stage-1 mask");
  require(err_after * 5.0 <= err_before, "stage-2 error reduction " +
                                             fmt(err_before / std::max(err_after, 1e-9)) +
                                             "x < 5x");
}

// -- C6 ----------------------------------------------------------------------

void c06_table_arithmetic() {
  const std::vector<std::pair<int, double>> c1 = {
      {204, 0.750}, {200, 0.732}, {323, 0.716}, {600, 0.699}};
  const std::vector<std::pair<int, double>> c2 = {
      {204, 0.773}, {200, 0.736}, {323, 0.716}, {600, 0.692}};
  const double m1 = eval::weighted_macro(c1);
  const double m2 = eval::weighted_macro(c2);
  require(std::abs(m1 - 0.716) <= 0.001, "macro C1 " + fmt(m1) + " != 0.716 +- 0.001");
  require(std::abs(m2 - 0.717) <= 0.001, "macro C2 " + fmt(m2) + " != 0.717 +- 0.001");
  require(std::abs((m2 - m1) - 0.001) <= 0.001, "dF1 " + fmt(m2 - m1) + " != +0.001 +- 0.001");
  require(645 + 334 + 348 == 1327, "flag totals do not sum to 1327");
}

// -- C7 ----------------------------------------------------------------------

void c07_annotation_gap() {
  using geometry::Detection;
  std::vector<geometry::LabeledBox> gt = {{0, {10, 10, 30, 30}}};
  Detection annotated;
  annotated.box = {10, 10, 30, 30};
  annotated.conf = 0.9;
  Detection extra;  // a real object the annotators could not see
  extra.box = {50, 50, 70, 80};
  extra.conf = 0.8;

  auto without = eval::match_image({annotated}, gt);
  auto with = eval::match_image({annotated, extra}, gt);
  require(without.recall == with.recall, "recall changed by an unannotated detection");
  require(with.precision < without.precision, "precision did not absorb the penalty");
  require(with.f1 < without.f1, "reported F1 is not a lower bound");
}

// -- C8 ----------------------------------------------------------------------

void c08_end_to_end_delta_recall() {
  const std::string dir = "/tmp/cadenet_acceptance_fog";
  fs::remove_all(dir);
  eval::generate_corpus(dir, 50, {Condition::Fog}, 0.55, 0.95, 20240810);
  eval::ClassRegistry reg;
  auto corpus = eval::load_corpus(dir, reg);
  require(corpus.images.size() == 50, "corpus generation failed");
  pipeline::ContrastDetector detector;

  auto rep = eval::run_benchmark(corpus, detector, {}, eval::Routing::GtLabel);
  require(rep.delta_recall_micro() >= 0.05,
          "dRecall " + fmt(rep.delta_recall_micro()) + " < +0.05");

  pipeline::AblationFlags a4;
  a4.cape_passthrough = true;
  auto rep_a4 = eval::run_benchmark(corpus, detector, {}, eval::Routing::GtLabel, a4);
  require(rep_a4.delta_recall_micro() == 0.0, "A4 dRecall != 0");
  require(rep_a4.micro_c1.tp == rep_a4.micro_c2.tp && rep_a4.micro_c1.fp == rep_a4.micro_c2.fp,
          "A4 counts differ between C1 and C2");
  fs::remove_all(dir);
}

// -- C9 ----------------------------------------------------------------------

void c09_safety_path() {
  const int n = 1000;
  auto frames = [&] {
    std::vector<Raster> out;
    for (auto& s : eval::make_sequence(9, n, Condition::Clear, 0.0, 64, 48))
      out.push_back(s.degraded);
    return out;
  };
  std::map<std::int64_t, std::vector<geometry::LabeledBox>> side;
  {
    auto seq = eval::make_sequence(9, n, Condition::Clear, 0.0, 64, 48);
    for (int i = 0; i < n; ++i) side[i] = seq[i].boxes;
  }
  pipeline::OracleDetector fast(side), strong(side);

  pipeline::PipelineConfig cfg;  // t_cam 33 ms
  pipeline::SimDurations dur;
  dur.q_stub = 500.0;

  pipeline::VectorSource src(frames());
  auto res = pipeline::run_simulated(src, fast, strong, cfg, dur);
  require(res.frames == n, "frame count mismatch");
  require(res.p99_s_period() <= 38.0,
          "S p99 period " + fmt(res.p99_s_period()) + " ms > 38 ms");

  cfg.ablation.blocking_single_thread = true;
  pipeline::VectorSource src2(frames());
  auto blocked = pipeline::run_simulated(src2, fast, strong, cfg, dur);
  require(blocked.mean_s_period() >= 500.0,
          "A1 mean period " + fmt(blocked.mean_s_period()) + " ms < 500 ms");
}

// -- C10 ---------------------------------------------------------------------

void c10_slot_contract() {
  AtomicSlot<SlotRecord> slot;
  std::atomic<bool> stop{false};
  std::atomic<long> torn{0}, regress{0}, reads{0};
  std::thread reader([&] {
    std::uint64_t last = 0;
    while (!stop.load(std::memory_order_relaxed)) {
      auto r = slot.load();
      if (!r) continue;
      ++reads;
      if (r->version < last) ++regress;
      last = r->version;
      for (int i = 0; i < 8; ++i)
        if (r->clip_scores[i] != static_cast<float>(r->version * (i + 1))) ++torn;
    }
  });
  for (std::uint64_t v = 1; v <= 100000; ++v) {
    SlotRecord r;
    r.version = v;
    r.n_scores = 8;
    for (int i = 0; i < 8; ++i) r.clip_scores[i] = static_cast<float>(v * (i + 1));
    slot.store(r);
  }
  stop = true;
  reader.join();
  require(torn.load() == 0, std::to_string(torn.load()) + " torn reads");
  require(regress.load() == 0, std::to_string(regress.load()) + " version regressions");
  require(reads.load() > 0, "reader never observed a record");
}

// -- C11 ---------------------------------------------------------------------

void c11_ktt_lifecycle() {
  using geometry::Detection;
  auto det = [](double x, double y, double w, double h, double conf = 0.9) {
    Detection d;
    d.box = {x, y, x + w, y + h};
    d.conf = d.score = conf;
    return d;
  };

  // birth after 1 hit
  ktt::Tracker t1;
  t1.update_frame({det(0, 0, 20, 20)});
  require(t1.size() == 1 && t1.snapshot()[0].hits == 1, "birth-after-1-hit violated");

  // death after exactly 3 missed frames
  t1.update_frame({});
  require(t1.size() == 1, "track died after 1 miss");
  t1.update_frame({});
  require(t1.size() == 1, "track died after 2 misses");
  t1.update_frame({});
  require(t1.size() == 0, "track survived 3 misses");

  // inject(k=0) equals a non-killing update
  auto seed = [&](ktt::Tracker& tr) {
    tr.update_frame({det(0, 0, 20, 20), det(40, 0, 20, 20), det(100, 100, 30, 40)});
    tr.update_frame({det(1, 0, 20, 20), det(41, 0, 20, 20)});
  };
  ktt::Tracker a, b;
  seed(a);
  seed(b);
  std::vector<Detection> fused = {det(2, 0, 20, 20, 0.8), det(200, 0, 30, 40, 0.6)};
  a.inject_async(fused, 0);
  b.update_frame(fused);
  auto ta = a.snapshot(), tb = b.snapshot();
  for (const auto& x : tb) {
    bool found = false;
    for (const auto& y : ta) {
      if (y.id != x.id) continue;
      found = true;
      require((y.state.x - x.state.x).norm() < 1e-12, "inject(k=0) state differs");
      require(std::abs(y.conf_smooth - x.conf_smooth) < 1e-12, "inject(k=0) confidence differs");
      require(y.hits == x.hits, "inject(k=0) hit count differs");
    }
    require(found, "inject(k=0) lost a track the update kept");
  }

  // P stays PSD over 1e4 random steps
  std::mt19937 g(42);
  std::uniform_real_distribution<double> pos(0.0, 300.0), sz(5.0, 80.0);
  auto s = ktt::make_state({10, 10, 40, 50});
  for (int it = 0; it < 10000; ++it) {
    ktt::predict_step(s);
    if (it % 3 == 0) {
      const double x = pos(g), y = pos(g), w = sz(g), h = sz(g);
      ktt::measurement_update(s, {x, y, x + w, y + h});
    }
    Eigen::SelfAdjointEigenSolver<ktt::Mat7> es(s.p);
    require(es.eigenvalues().minCoeff() >= -1e-9,
            "min eigenvalue " + fmt(es.eigenvalues().minCoeff()) + " < -1e-9 at step " +
                std::to_string(it));
  }
}

// -- C12 ---------------------------------------------------------------------

void c12_determinism() {
  const int n = 60;
  auto frames = [&] {
    std::vector<Raster> out;
    for (auto& s : eval::make_sequence(11, n, Condition::Fog, 0.7, 128, 96))
      out.push_back(s.degraded);
    return out;
  };
  std::map<std::int64_t, std::vector<geometry::LabeledBox>> side;
  {
    auto seq = eval::make_sequence(11, n, Condition::Fog, 0.7, 128, 96);
    for (int i = 0; i < n; ++i) side[i] = seq[i].boxes;
  }
  pipeline::OracleDetector fast(side), strong(side);
  pipeline::PipelineConfig cfg;
  cfg.sed_dim = 16;

  pipeline::VectorSource s1(frames());
  auto r1 = pipeline::run_simulated(s1, fast, strong, cfg);
  pipeline::VectorSource s2(frames());
  auto r2 = pipeline::run_simulated(s2, fast, strong, cfg);
  require(!r1.track_log.empty(), "empty track log");
  require(r1.track_log == r2.track_log, "track logs differ between identical runs");

  const std::string dir = "/tmp/cadenet_acceptance_det";
  fs::remove_all(dir);
  eval::generate_corpus(dir, 8, {Condition::Fog, Condition::Rain}, 0.6, 0.9, 77);
  eval::ClassRegistry reg;
  auto corpus = eval::load_corpus(dir, reg);
  pipeline::ContrastDetector detector;
  auto b1 = eval::run_benchmark(corpus, detector, {}, eval::Routing::GtLabel);
  auto b2 = eval::run_benchmark(corpus, detector, {}, eval::Routing::GtLabel);
  require(b1.jsonl() == b2.jsonl(), "benchmark JSONL differs between identical runs");
  fs::remove_all(dir);
}

}  // namespace

int main() {
  std::printf("CADENet acceptance suite\n");
  criterion(1, "Eq-level arithmetic (alpha, gamma, smoothing, k, Eq.5)", c01_equation_arithmetic);
  criterion(2, "Entropy map values and [0,1] fuzz", c02_entropy_map);
  criterion(3, "Oracle equivalence (NMS, Hungarian, k-NN, EG-NMS)", c03_oracle_equivalence);
  criterion(4, "DCP inversion on synthetic haze", c04_dcp_inversion);
  criterion(5, "Derain round-trip (mask quality, inpaint error)", c05_derain_roundtrip);
  criterion(6, "Per-weather macro arithmetic reproduction", c06_table_arithmetic);
  criterion(7, "Annotation-gap immunity of recall", c07_annotation_gap);
  criterion(8, "Synthetic end-to-end delta recall (fog corpus)", c08_end_to_end_delta_recall);
  criterion(9, "Safety-path independence (sim, 1000 frames)", c09_safety_path);
  criterion(10, "Slot contract under 1e5-write stress", c10_slot_contract);
  criterion(11, "KTT lifecycle, injection equivalence, PSD", c11_ktt_lifecycle);
  criterion(12, "Byte-identical replay (track log + JSONL)", c12_determinism);
  if (g_failures == 0)
    std::printf("all 12 criteria passed\n");
  else
    std::printf("%d criteria FAILED\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
