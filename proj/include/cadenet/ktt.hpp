#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <mutex>
#include <string>
#include <vector>

#include "cadenet/geometry.hpp"

namespace cadenet::ktt {

using Vec7 = Eigen::Matrix<double, 7, 1>;
using Mat7 = Eigen::Matrix<double, 7, 7>;
using Vec4 = Eigen::Matrix<double, 4, 1>;

// State layout: [c_x, c_y, a, h, c_x', c_y', a'] — box center, aspect ratio
// (w/h), height, and the velocities of the first three. h carries no
// velocity term.
struct KalmanState {
  Vec7 x = Vec7::Zero();
  Mat7 p = Mat7::Zero();
};

struct KttParams {
  double q_pos = 1.0, q_shape = 1e-2, q_vel = 1e-2;  // process noise diagonal
  double r_pos = 1.0, r_shape = 1e-1;                 // measurement noise diagonal
  double p0_pos = 10.0, p0_shape = 1.0, p0_vel = 1e3; // initial covariance
  double iou_gate = 0.3;
  int max_misses = 3;
};

KalmanState make_state(const geometry::Box& b, const KttParams& p = {});
geometry::Box state_box(const KalmanState& s);

// Constant-velocity predict: x <- F x, P <- F P F^T + Q.
void predict_step(KalmanState& s, const KttParams& p = {});

// Linear measurement update with z = (c_x, c_y, a, h) from a box.
// Joseph form keeps P symmetric PSD.
void measurement_update(KalmanState& s, const geometry::Box& z, const KttParams& p = {});

// sigma_bar = 0.7 * next + 0.3 * prev.
double smooth_confidence(double prev, double next);

struct Track {
  std::uint64_t id = 0;
  int class_id = 0;
  KalmanState state;
  double conf_smooth = 0.0;
  int hits = 0;
  int misses = 0;
  int age = 0;

  geometry::Box box() const { return state_box(state); }
};

// SORT-style track set. Thread S drives update_frame at camera rate;
// Thread Q injects k-step-projected quality detections. The mutex guards
// only the list splicing; Kalman math runs on copies outside the lock.
class Tracker {
 public:
  explicit Tracker(KttParams params = {}) : params_(params) {}

  // Predict, Hungarian-assign on 1-IoU (gated), update matched tracks,
  // spawn tracks for unmatched detections (born after 1 hit), and drop
  // tracks that reach max_misses consecutive misses.
  void update_frame(const std::vector<geometry::Detection>& dets);

  // Same association flow, but each detection is first projected k predict
  // steps from a zero-velocity tentative state, and unmatched tracks keep
  // their miss counters: injection refines, never kills.
  void inject_async(const std::vector<geometry::Detection>& fused, int k);

  std::vector<Track> snapshot() const;
  std::size_t size() const;
  void clear();

  const KttParams& params() const { return params_; }

  // frame_idx, track_id, class, x1, y1, x2, y2, conf_smooth
  static std::string log_line(std::int64_t frame_idx, const Track& t);

 private:
  void associate(const std::vector<geometry::Detection>& dets, bool kill_unmatched,
                 const std::vector<KalmanState>* birth_seeds);

  mutable std::mutex mu_;
  std::vector<Track> tracks_;
  std::uint64_t next_id_ = 1;
  KttParams params_;
};

}  // namespace cadenet::ktt
