#include "cadenet/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <queue>
#include <sstream>
#include <thread>

#include <filesystem>

#include "cadenet/egnms.hpp"
#include "cadenet/imaging.hpp"
#include "cadenet/pee.hpp"
#include "cadenet/raster_io.hpp"
#include "cadenet/slot.hpp"
#include "cadenet/wem.hpp"

namespace cadenet::pipeline {

DirectorySource::DirectorySource(const std::string& dir) {
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto ext = e.path().extension();
    if (ext == ".ppm" || ext == ".png" || ext == ".pgm") paths_.push_back(e.path().string());
  }
  std::sort(paths_.begin(), paths_.end());
  if (paths_.empty())
    throw std::invalid_argument("pipeline source: no images under " + dir);
}

std::optional<Frame> DirectorySource::next() {
  if (pos_ >= paths_.size()) return std::nullopt;
  Frame f{io::read_image(paths_[pos_]), static_cast<std::int64_t>(pos_), 0.0};
  ++pos_;
  return f;
}

namespace {

using steady = std::chrono::steady_clock;

double to_ms(steady::duration d) {
  return std::chrono::duration<double, std::milli>(d).count();
}

// Single-slot overwrite mailbox: the writer always replaces, the reader
// takes the newest item or nothing. SPSC, no blocking on either side.
template <typename T>
class OverwriteMailbox {
 public:
  ~OverwriteMailbox() { delete slot_.exchange(nullptr); }
  void put(T v) {
    T* old = slot_.exchange(new T(std::move(v)), std::memory_order_acq_rel);
    delete old;
  }
  std::optional<T> take() {
    T* p = slot_.exchange(nullptr, std::memory_order_acq_rel);
    if (!p) return std::nullopt;
    std::optional<T> out(std::move(*p));
    delete p;
    return out;
  }
  bool has() const { return slot_.load(std::memory_order_acquire) != nullptr; }

 private:
  std::atomic<T*> slot_{nullptr};
};

struct QInput {
  Frame frame;
  std::vector<geometry::Detection> s_dets;  // fast-detector output on this frame
};

struct EInput {
  Raster enhanced;
  Condition condition = Condition::Clear;
  double severity = 0.0;
  FilterOverride params{};
  double conf_delta = 0.0;
};

double mean_conf(const std::vector<geometry::Detection>& dets) {
  if (dets.empty()) return 0.0;
  double s = 0.0;
  for (const auto& d : dets) s += d.conf;
  return s / static_cast<double>(dets.size());
}

// The per-thread work, shared verbatim by the simulated and the real-thread
// runtimes; only scheduling differs.
struct Engine {
  const Detector& fast;
  const Detector& strong;
  PipelineConfig cfg;

  ktt::Tracker tracker;
  AtomicSlot<SlotRecord> slot;
  sed::SedDatabase db;
  sed::HashEmbedder embedder;
  sed::StatsZeroShot zeroshot;
  std::uint64_t slot_version = 0;

  // written by exactly one thread each
  std::string track_log;                            // S
  std::vector<std::uint64_t> slot_versions_read;    // Q
  std::vector<int> k_values;                        // Q
  std::atomic<std::int64_t> detector_errors{0};
  std::map<std::string, std::vector<double>> stage_ms;

  Engine(const Detector& f, const Detector& s, PipelineConfig c)
      : fast(f), strong(s), cfg(std::move(c)), tracker(cfg.tracker), db(cfg.sed_dim),
        embedder(cfg.sed_dim) {
    for (const char* k : {"detect_fast", "ktt_update", "wem", "pee", "cape", "detect_strong",
                          "egnms", "inject", "clip", "embed", "knn"})
      stage_ms[k] = {};
    if (!cfg.sed_path.empty()) db.attach_file(cfg.sed_path);
  }

  void sample(const char* stage, double ms) { stage_ms.find(stage)->second.push_back(ms); }

  void s_step(const Frame& f, std::vector<geometry::Detection>& out_dets) {
    std::vector<geometry::Detection> dets;
    auto t0 = steady::now();
    try {
      dets = fast.detect(f);
    } catch (const std::exception&) {
      detector_errors.fetch_add(1, std::memory_order_relaxed);
      dets.clear();
    }
    sample("detect_fast", to_ms(steady::now() - t0));
    for (auto& d : dets) d.source = geometry::Stream::S;

    t0 = steady::now();
    if (cfg.ablation.ktt_raw_detections) {
      // A6: the output stream is the raw detections, no temporal state.
      for (const auto& d : dets) {
        ktt::Track t;
        t.id = 0;
        t.class_id = d.class_id;
        t.state = ktt::make_state(d.box, cfg.tracker);
        t.conf_smooth = d.conf;
        track_log += ktt::Tracker::log_line(f.t_index, t);
        track_log += '\n';
      }
    } else {
      tracker.update_frame(dets);
      for (const auto& t : tracker.snapshot()) {
        track_log += ktt::Tracker::log_line(f.t_index, t);
        track_log += '\n';
      }
    }
    sample("ktt_update", to_ms(steady::now() - t0));
    out_dets = std::move(dets);
  }

  // elapsed_ms() reports the Q-cycle latency observed at injection time
  // (virtual in the simulator, wall clock in the threaded runtime).
  bool q_work(const QInput& in, const std::function<double()>& elapsed_ms, EInput& out) {
    const Raster& raster = in.frame.raster;

    auto t0 = steady::now();
    const imaging::LabStats stats = imaging::lab_stats(raster);
    wem::WeatherEstimate est = wem::classify(stats);
    std::optional<SlotRecord> rec;
    if (!cfg.ablation.thread_e_disabled) rec = slot.load();
    if (rec) slot_versions_read.push_back(rec->version);
    est = wem::resolve(est, rec, cfg.spread_thresh);
    if (cfg.ablation.fixed_severity_0_6) est.severity = 0.6;
    sample("wem", to_ms(steady::now() - t0));

    t0 = steady::now();
    pee::ReliabilityMap rmap;
    if (cfg.ablation.pee_uniform_half) {
      rmap.patch_size = 16;
      rmap.source_width = raster.width;
      rmap.source_height = raster.height;
      rmap.grid = Eigen::MatrixXf::Constant((raster.height + 15) / 16, (raster.width + 15) / 16,
                                            0.5f);
    } else {
      rmap = pee::entropy_map(imaging::lab_l(raster));
    }
    sample("pee", to_ms(steady::now() - t0));

    cape::FilterConfig filters = cfg.filters;
    if (rec && rec->has_rec) filters = cape::apply_override(filters, rec->rec);

    t0 = steady::now();
    Raster enhanced;
    if (cfg.ablation.cape_passthrough) {
      enhanced = raster;
    } else {
      enhanced = cape::enhance(raster, est, filters).first;
    }
    sample("cape", to_ms(steady::now() - t0));

    std::vector<geometry::Detection> dq;
    t0 = steady::now();
    if (!cfg.ablation.egnms_s_only) {
      try {
        dq = strong.detect({enhanced, in.frame.t_index, in.frame.t_capture_ms});
      } catch (const std::exception&) {
        detector_errors.fetch_add(1, std::memory_order_relaxed);
        dq.clear();
      }
      for (auto& d : dq) d.source = geometry::Stream::Q;
    }
    sample("detect_strong", to_ms(steady::now() - t0));

    t0 = steady::now();
    std::vector<geometry::Detection> fused =
        egnms::fuse(in.s_dets, dq, rmap, cfg.conf_thresh, cfg.nms_iou);
    sample("egnms", to_ms(steady::now() - t0));

    t0 = steady::now();
    const int k = static_cast<int>(std::ceil(elapsed_ms() / cfg.t_cam_ms));
    k_values.push_back(k);
    if (!cfg.ablation.ktt_raw_detections) tracker.inject_async(fused, k);
    sample("inject", to_ms(steady::now() - t0));

    if (cfg.ablation.thread_e_disabled) {
      // A7: the embedding runs inline, after CAPE already committed, so it
      // can no longer guide anything this cycle.
      t0 = steady::now();
      (void)embedder.embed(enhanced);
      sample("embed", to_ms(steady::now() - t0));
      return false;
    }

    out.enhanced = std::move(enhanced);
    out.condition = est.condition;
    out.severity = est.severity;
    out.params = cape::override_from_config(filters, est.condition);
    out.conf_delta = mean_conf(dq) - mean_conf(in.s_dets);
    return true;
  }

  void e_work(const EInput& in) {
    auto t0 = steady::now();
    const std::vector<float> scores = zeroshot.classify(in.enhanced, cfg.prompts);
    sample("clip", to_ms(steady::now() - t0));

    t0 = steady::now();
    const Eigen::VectorXf emb = embedder.embed(in.enhanced);
    sample("embed", to_ms(steady::now() - t0));

    t0 = steady::now();
    const auto rec = db.recommend(emb, 5);
    sample("knn", to_ms(steady::now() - t0));

    SlotRecord r;
    r.version = ++slot_version;
    int best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
      if (scores[i] > scores[best]) best = static_cast<int>(i);
    r.clip_label = best < 5 ? static_cast<Condition>(best) : Condition::Clear;
    r.n_scores = static_cast<std::int32_t>(std::min<std::size_t>(scores.size(), 8));
    for (int i = 0; i < r.n_scores; ++i) r.clip_scores[i] = scores[i];
    if (rec) {
      r.has_rec = 1;
      r.rec = *rec;
    }
    slot.store(r);

    sed::SedEntry entry;
    entry.embedding = emb;
    entry.condition = in.condition;
    entry.params = in.params;
    entry.delta_f1 = static_cast<float>(in.conf_delta);
    db.append(entry);
  }

  LatencyReport latency_report(int warmup, int timed) const {
    LatencyReport rep;
    rep.warmup = warmup;
    rep.timed = timed;
    for (const auto& [stage, samples] : stage_ms) {
      if (samples.empty()) continue;
      double mean = 0.0;
      for (double v : samples) mean += v;
      mean /= static_cast<double>(samples.size());
      double var = 0.0;
      for (double v : samples) var += (v - mean) * (v - mean);
      var /= static_cast<double>(samples.size());
      rep.stages.push_back({stage, mean, std::sqrt(var), static_cast<int>(samples.size())});
    }
    return rep;
  }
};

}  // namespace

// ---------------------------------------------------------------------------

std::string LatencyReport::table() const {
  char buf[160];
  std::string out;
  std::snprintf(buf, sizeof(buf), "stage            mean ms    std ms   calls   (%d warmup + %d timed)\n",
                warmup, timed);
  out += buf;
  for (const auto& s : stages) {
    std::snprintf(buf, sizeof(buf), "%-14s %9.3f %9.3f %7d\n", s.stage.c_str(), s.mean_ms,
                  s.std_ms, s.count);
    out += buf;
  }
  return out;
}

LatencyStat measure_latency(const std::string& name, const std::function<void()>& op, int warmup,
                            int timed) {
  if (timed < 1) throw std::invalid_argument("measure_latency: timed count must be >= 1");
  for (int i = 0; i < warmup; ++i) op();
  std::vector<double> samples;
  samples.reserve(timed);
  for (int i = 0; i < timed; ++i) {
    const auto t0 = steady::now();
    op();
    samples.push_back(to_ms(steady::now() - t0));
  }
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= static_cast<double>(samples.size());
  double var = 0.0;
  for (double v : samples) var += (v - mean) * (v - mean);
  var /= static_cast<double>(samples.size());
  return {name, mean, std::sqrt(var), timed};
}

AblationFlags AblationFlags::parse(const std::string& ids) {
  AblationFlags f;
  std::string token;
  std::stringstream ss(ids);
  while (std::getline(ss, token, ',')) {
    std::string t;
    for (char c : token)
      if (!std::isspace(static_cast<unsigned char>(c))) t += static_cast<char>(std::toupper(c));
    if (t.empty()) continue;
    if (t == "A1") f.blocking_single_thread = true;
    else if (t == "A2") f.pee_uniform_half = true;
    else if (t == "A3") f.fixed_severity_0_6 = true;
    else if (t == "A4") f.cape_passthrough = true;
    else if (t == "A5") f.egnms_s_only = true;
    else if (t == "A6") f.ktt_raw_detections = true;
    else if (t == "A7") f.thread_e_disabled = true;
    else throw std::invalid_argument("unknown ablation id: " + token);
  }
  return f;
}

bool AblationFlags::any() const {
  return blocking_single_thread || pee_uniform_half || fixed_severity_0_6 || cape_passthrough ||
         egnms_s_only || ktt_raw_detections || thread_e_disabled;
}

std::string AblationFlags::summary() const {
  std::string out;
  auto add = [&](bool on, const char* id) {
    if (on) {
      if (!out.empty()) out += ',';
      out += id;
    }
  };
  add(blocking_single_thread, "A1");
  add(pee_uniform_half, "A2");
  add(fixed_severity_0_6, "A3");
  add(cape_passthrough, "A4");
  add(egnms_s_only, "A5");
  add(ktt_raw_detections, "A6");
  add(thread_e_disabled, "A7");
  return out.empty() ? "none" : out;
}

double RunResult::mean_s_period() const {
  if (s_period_ms.empty()) return 0.0;
  double s = 0.0;
  for (double v : s_period_ms) s += v;
  return s / static_cast<double>(s_period_ms.size());
}

double RunResult::p99_s_period() const {
  if (s_period_ms.empty()) return 0.0;
  std::vector<double> sorted = s_period_ms;
  std::sort(sorted.begin(), sorted.end());
  const auto rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(sorted.size())));
  return sorted[std::min(rank > 0 ? rank - 1 : 0, sorted.size() - 1)];
}

std::string RunResult::summary() const {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof(buf),
                "frames=%lld q_cycles=%lld e_cycles=%lld detector_errors=%lld\n",
                static_cast<long long>(frames), static_cast<long long>(q_cycles),
                static_cast<long long>(e_cycles), static_cast<long long>(detector_errors));
  out += buf;
  std::snprintf(buf, sizeof(buf), "thread S period: mean %.3f ms, p99 %.3f ms over %zu intervals\n",
                mean_s_period(), p99_s_period(), s_period_ms.size());
  out += buf;
  if (!k_values.empty()) {
    std::snprintf(buf, sizeof(buf), "injection k: first %d, last %d, injections %zu\n",
                  k_values.front(), k_values.back(), k_values.size());
    out += buf;
  }
  out += latency.table();
  return out;
}

// ---------------------------------------------------------------------------
// Simulated runtime: a deterministic virtual-time event loop. Work
// materializes at stage completion times, so state mutations happen in
// virtual-time order and two runs are byte-identical.

namespace {

struct SimEvent {
  double t = 0.0;
  int pri = 0;
  std::uint64_t seq = 0;
  std::function<void()> fn;
};

struct SimEventAfter {
  bool operator()(const SimEvent& a, const SimEvent& b) const {
    if (a.t != b.t) return a.t > b.t;
    if (a.pri != b.pri) return a.pri > b.pri;
    return a.seq > b.seq;
  }
};

}  // namespace

RunResult run_simulated(FrameSource& source, const Detector& fast, const Detector& strong,
                        const PipelineConfig& cfg, const SimDurations& dur) {
  Engine eng(fast, strong, cfg);
  RunResult res;

  const double dt_s = dur.detect_fast;
  const bool q_stubbed = dur.q_stub >= 0.0;
  const double dt_q = q_stubbed ? dur.q_stub
                                : dur.wem + dur.pee + dur.cape + dur.detect_strong + dur.egnms +
                                      (cfg.ablation.thread_e_disabled ? dur.embed : 0.0);
  const double dt_e = dur.clip + dur.embed + dur.knn;

  std::vector<double> s_out;

  if (cfg.ablation.blocking_single_thread) {
    // A1: one worker runs S, Q, and E back to back, always taking the
    // newest available frame.
    double t = 0.0;
    std::optional<Frame> pending = source.next();
    while (pending) {
      double arrival = pending->t_index * cfg.t_cam_ms;
      if (arrival > t) t = arrival;
      Frame f = *pending;
      f.t_capture_ms = arrival;
      pending = source.next();
      while (pending && pending->t_index * cfg.t_cam_ms <= t) {
        f = *pending;
        f.t_capture_ms = pending->t_index * cfg.t_cam_ms;
        pending = source.next();
      }
      std::vector<geometry::Detection> sdets;
      eng.s_step(f, sdets);
      ++res.frames;
      s_out.push_back(t + dt_s);
      EInput einput;
      bool has_e = false;
      if (!q_stubbed) has_e = eng.q_work({f, sdets}, [&] { return dt_q; }, einput);
      ++res.q_cycles;
      if (has_e) {
        eng.e_work(einput);
        ++res.e_cycles;
      }
      t += dt_s + dt_q + (has_e ? dt_e : 0.0);
    }
  } else {
    std::priority_queue<SimEvent, std::vector<SimEvent>, SimEventAfter> queue;
    std::uint64_t seq = 0;
    auto push = [&](double t, int pri, std::function<void()> fn) {
      queue.push({t, pri, seq++, std::move(fn)});
    };

    std::optional<QInput> q_mailbox;
    std::optional<EInput> e_mailbox;
    bool q_busy = false, e_busy = false;
    double s_free = 0.0;

    std::function<void(double)> try_start_e = [&](double now) {
      if (e_busy || !e_mailbox || cfg.ablation.thread_e_disabled) return;
      EInput in = std::move(*e_mailbox);
      e_mailbox.reset();
      e_busy = true;
      push(now + dt_e, 2, [&, in = std::move(in), done = now + dt_e]() {
        eng.e_work(in);
        ++res.e_cycles;
        e_busy = false;
        try_start_e(done);
      });
    };

    std::function<void(double)> try_start_q = [&](double now) {
      if (q_busy || !q_mailbox) return;
      QInput in = std::move(*q_mailbox);
      q_mailbox.reset();
      q_busy = true;
      push(now + dt_q, 1, [&, in = std::move(in), done = now + dt_q]() {
        if (!q_stubbed) {
          EInput einput;
          if (eng.q_work(in, [&] { return dt_q; }, einput)) {
            e_mailbox = std::move(einput);
            try_start_e(done);
          }
        }
        ++res.q_cycles;
        q_busy = false;
        try_start_q(done);
      });
    };

    std::function<void()> pump = [&]() {
      std::optional<Frame> f = source.next();
      if (!f) return;
      const double arrival = f->t_index * cfg.t_cam_ms;
      push(arrival, 0, [&, fr = std::move(*f), arrival]() mutable {
        const double start = std::max(arrival, s_free);
        const double done = start + dt_s;
        s_free = done;
        fr.t_capture_ms = arrival;
        push(done, 0, [&, fr = std::move(fr), done]() {
          std::vector<geometry::Detection> sdets;
          eng.s_step(fr, sdets);
          ++res.frames;
          s_out.push_back(done);
          q_mailbox = QInput{fr, std::move(sdets)};
          try_start_q(done);
        });
        pump();
      });
    };
    pump();

    while (!queue.empty()) {
      auto ev = queue.top();
      queue.pop();
      ev.fn();
    }
  }

  for (std::size_t i = 1; i < s_out.size(); ++i) res.s_period_ms.push_back(s_out[i] - s_out[i - 1]);
  res.track_log = std::move(eng.track_log);
  res.slot_versions_read = std::move(eng.slot_versions_read);
  res.k_values = std::move(eng.k_values);
  res.detector_errors = eng.detector_errors.load();

  // Virtual-time latency: the configured stage constants.
  res.latency.warmup = 0;
  res.latency.timed = static_cast<int>(res.frames);
  res.latency.stages = {
      {"detect_fast", dur.detect_fast, 0.0, static_cast<int>(res.frames)},
      {"q_stage", dt_q, 0.0, static_cast<int>(res.q_cycles)},
      {"e_stage", dt_e, 0.0, static_cast<int>(res.e_cycles)},
  };
  return res;
}

// ---------------------------------------------------------------------------
// Threaded runtime: real OS threads on the monotonic clock.

RunResult run_threaded(FrameSource& source, const Detector& fast, const Detector& strong,
                       const PipelineConfig& cfg) {
  Engine eng(fast, strong, cfg);
  RunResult res;
  std::vector<double> s_out;

  const auto t0 = steady::now();
  auto now_ms = [&] { return to_ms(steady::now() - t0); };

  if (cfg.ablation.blocking_single_thread) {
    std::optional<Frame> pending = source.next();
    while (pending) {
      const double arrival = pending->t_index * cfg.t_cam_ms;
      if (now_ms() < arrival)
        std::this_thread::sleep_until(t0 + std::chrono::duration_cast<steady::duration>(
                                               std::chrono::duration<double, std::milli>(arrival)));
      Frame f = *pending;
      f.t_capture_ms = arrival;
      pending = source.next();
      while (pending && pending->t_index * cfg.t_cam_ms <= now_ms()) {
        f = *pending;
        f.t_capture_ms = pending->t_index * cfg.t_cam_ms;
        pending = source.next();
      }
      std::vector<geometry::Detection> sdets;
      eng.s_step(f, sdets);
      ++res.frames;
      s_out.push_back(now_ms());
      const double q_start = now_ms();
      EInput einput;
      ++res.q_cycles;
      if (eng.q_work({std::move(f), std::move(sdets)}, [&] { return now_ms() - q_start; },
                     einput)) {
        eng.e_work(einput);
        ++res.e_cycles;
      }
    }
  } else {
    OverwriteMailbox<QInput> qbox;
    OverwriteMailbox<EInput> ebox;
    std::atomic<bool> s_finished{false}, q_finished{false};

    std::thread thread_q([&] {
      for (;;) {
        auto in = qbox.take();
        if (!in) {
          if (s_finished.load(std::memory_order_acquire) && !qbox.has()) break;
          std::this_thread::sleep_for(std::chrono::microseconds(200));
          continue;
        }
        const double q_start = now_ms();
        EInput einput;
        ++res.q_cycles;
        if (eng.q_work(*in, [&] { return now_ms() - q_start; }, einput))
          ebox.put(std::move(einput));
      }
      q_finished.store(true, std::memory_order_release);
    });

    std::thread thread_e([&] {
      for (;;) {
        auto in = ebox.take();
        if (!in) {
          if (q_finished.load(std::memory_order_acquire) && !ebox.has()) break;
          std::this_thread::sleep_for(std::chrono::microseconds(500));
          continue;
        }
        eng.e_work(*in);
        ++res.e_cycles;
      }
    });

    // The calling thread is Thread S: it paces the camera period and never
    // waits for Q or E.
    for (;;) {
      std::optional<Frame> f = source.next();
      if (!f) break;
      const double arrival = f->t_index * cfg.t_cam_ms;
      const auto deadline =
          t0 + std::chrono::duration_cast<steady::duration>(
                   std::chrono::duration<double, std::milli>(arrival));
      std::this_thread::sleep_until(deadline);
      f->t_capture_ms = arrival;
      std::vector<geometry::Detection> sdets;
      eng.s_step(*f, sdets);
      ++res.frames;
      s_out.push_back(now_ms());
      qbox.put(QInput{std::move(*f), std::move(sdets)});
    }
    s_finished.store(true, std::memory_order_release);
    thread_q.join();
    thread_e.join();
  }

  for (std::size_t i = 1; i < s_out.size(); ++i) res.s_period_ms.push_back(s_out[i] - s_out[i - 1]);
  res.track_log = std::move(eng.track_log);
  res.slot_versions_read = std::move(eng.slot_versions_read);
  res.k_values = std::move(eng.k_values);
  res.detector_errors = eng.detector_errors.load();
  res.latency = eng.latency_report(0, static_cast<int>(res.frames));
  return res;
}

}  // namespace cadenet::pipeline
