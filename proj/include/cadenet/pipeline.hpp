#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cadenet/cape.hpp"
#include "cadenet/geometry.hpp"
#include "cadenet/ktt.hpp"
#include "cadenet/raster.hpp"
#include "cadenet/sed.hpp"

namespace cadenet::pipeline {

struct Frame {
  Raster raster;
  std::int64_t t_index = 0;
  double t_capture_ms = 0.0;
};

// Detector contract. Stands in for the fast (safety) and strong (quality)
// networks; implementations must be deterministic for a fixed input.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::vector<geometry::Detection> detect(const Frame& frame) const = 0;
  virtual std::string name() const { return "detector"; }
};

struct LatencyStat {
  std::string stage;
  double mean_ms = 0.0;
  double std_ms = 0.0;
  int count = 0;
};

struct LatencyReport {
  int warmup = 10;
  int timed = 50;
  std::vector<LatencyStat> stages;
  std::string table() const;
};

// Timing discipline: run `op` warmup times untimed, then `timed` times on the
// monotonic clock and report mean +- std. (CPU-bound callers use 5 + 100.)
LatencyStat measure_latency(const std::string& name, const std::function<void()>& op,
                            int warmup = 10, int timed = 50);

// Appendix-A ablation switches, one per configuration.
struct AblationFlags {
  bool blocking_single_thread = false;  // A1
  bool pee_uniform_half = false;        // A2: R(j) == 0.5
  bool fixed_severity_0_6 = false;      // A3
  bool cape_passthrough = false;        // A4
  bool egnms_s_only = false;            // A5
  bool ktt_raw_detections = false;      // A6
  bool thread_e_disabled = false;       // A7: embedder runs inline in Q

  static AblationFlags parse(const std::string& ids);  // "A1,A4", case-insensitive
  std::string summary() const;
  bool any() const;
};

struct PipelineConfig {
  double t_cam_ms = 33.0;
  double conf_thresh = 0.25;
  double nms_iou = 0.45;
  double spread_thresh = 0.15;
  cape::FilterConfig filters;
  ktt::KttParams tracker;
  AblationFlags ablation;
  int sed_dim = 2048;    // production embedding width; tests shrink it
  std::string sed_path;  // optional persistent database
  std::vector<std::string> prompts = sed::default_prompts();
};

// Virtual per-stage costs for the simulated clock, in milliseconds.
struct SimDurations {
  double detect_fast = 23.0;
  double detect_strong = 35.0;
  double wem = 1.0;
  double pee = 2.0;
  double cape = 40.0;
  double egnms = 0.3;
  double clip = 39.0;
  double embed = 50.0;
  double knn = 1.0;
  // >= 0 replaces the whole Q stage with an idle stub of this duration.
  double q_stub = -1.0;
};

class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::optional<Frame> next() = 0;  // strictly increasing t_index
};

// In-memory source over a fixed list of rasters.
class VectorSource : public FrameSource {
 public:
  explicit VectorSource(std::vector<Raster> frames) : frames_(std::move(frames)) {}
  std::optional<Frame> next() override {
    if (pos_ >= frames_.size()) return std::nullopt;
    Frame f{std::move(frames_[pos_]), static_cast<std::int64_t>(pos_), 0.0};
    ++pos_;
    return f;
  }

 private:
  std::vector<Raster> frames_;
  std::size_t pos_ = 0;
};

// Frames from a directory of images (sorted by filename).
class DirectorySource : public FrameSource {
 public:
  explicit DirectorySource(const std::string& dir);
  std::optional<Frame> next() override;

 private:
  std::vector<std::string> paths_;
  std::size_t pos_ = 0;
};

struct RunResult {
  std::string track_log;
  LatencyReport latency;
  std::vector<double> s_period_ms;  // Thread-S inter-output periods
  std::int64_t frames = 0;
  std::int64_t q_cycles = 0;
  std::int64_t e_cycles = 0;
  std::int64_t detector_errors = 0;
  std::vector<std::uint64_t> slot_versions_read;  // observed by Q, in order
  std::vector<int> k_values;                      // k used at each injection

  double mean_s_period() const;
  double p99_s_period() const;
  std::string summary() const;
};

// Deterministic virtual-time run: the three workers are scheduled by a
// single-threaded event loop, stage costs come from `durations`. Two runs
// with the same inputs produce byte-identical track logs.
RunResult run_simulated(FrameSource& source, const Detector& fast, const Detector& strong,
                        const PipelineConfig& cfg, const SimDurations& durations = {});

// Real three-thread run on the monotonic clock (S paces the camera period,
// Q and E consume overwrite mailboxes). Used for latency reporting.
RunResult run_threaded(FrameSource& source, const Detector& fast, const Detector& strong,
                       const PipelineConfig& cfg);

}  // namespace cadenet::pipeline
