#include "cadenet/ktt.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <unordered_map>

namespace cadenet::ktt {

namespace {

Mat7 transition() {
  Mat7 f = Mat7::Identity();
  f(0, 4) = 1.0;  // c_x += c_x'
  f(1, 5) = 1.0;  // c_y += c_y'
  f(2, 6) = 1.0;  // a   += a'
  return f;
}

Mat7 process_noise(const KttParams& p) {
  Mat7 q = Mat7::Zero();
  q.diagonal() << p.q_pos, p.q_pos, p.q_shape, p.q_shape, p.q_vel, p.q_vel, p.q_vel;
  return q;
}

Eigen::Matrix<double, 4, 7> observation() {
  Eigen::Matrix<double, 4, 7> h = Eigen::Matrix<double, 4, 7>::Zero();
  h(0, 0) = h(1, 1) = h(2, 2) = h(3, 3) = 1.0;
  return h;
}

Vec4 box_measurement(const geometry::Box& b) {
  Vec4 z;
  const double h = std::max(b.height(), 1e-6);
  z << b.cx(), b.cy(), std::max(b.width(), 1e-6) / h, h;
  return z;
}

}  // namespace

KalmanState make_state(const geometry::Box& b, const KttParams& p) {
  KalmanState s;
  s.x.head<4>() = box_measurement(b);
  s.p.diagonal() << p.p0_pos, p.p0_pos, p.p0_shape, p.p0_shape, p.p0_vel, p.p0_vel, p.p0_vel;
  return s;
}

geometry::Box state_box(const KalmanState& s) {
  const double a = std::max(s.x(2), 1e-6);
  const double h = std::max(s.x(3), 1e-6);
  const double w = a * h;
  geometry::Box b;
  b.x1 = s.x(0) - 0.5 * w;
  b.x2 = s.x(0) + 0.5 * w;
  b.y1 = s.x(1) - 0.5 * h;
  b.y2 = s.x(1) + 0.5 * h;
  return b;
}

void predict_step(KalmanState& s, const KttParams& p) {
  static const Mat7 f = transition();
  s.x = f * s.x;
  s.p = f * s.p * f.transpose() + process_noise(p);
  s.p = 0.5 * (s.p + s.p.transpose().eval());
}

void measurement_update(KalmanState& s, const geometry::Box& box, const KttParams& p) {
  static const Eigen::Matrix<double, 4, 7> h = observation();
  Eigen::Matrix4d r = Eigen::Matrix4d::Zero();
  r.diagonal() << p.r_pos, p.r_pos, p.r_shape, p.r_shape;

  const Vec4 z = box_measurement(box);
  const Vec4 innov = z - h * s.x;
  const Eigen::Matrix4d sigma = h * s.p * h.transpose() + r;
  const Eigen::Matrix<double, 7, 4> k = s.p * h.transpose() * sigma.llt().solve(Eigen::Matrix4d::Identity());
  s.x += k * innov;
  const Mat7 ikh = Mat7::Identity() - k * h;
  s.p = ikh * s.p * ikh.transpose() + k * r * k.transpose();  // Joseph form
  s.p = 0.5 * (s.p + s.p.transpose().eval());
  s.x(2) = std::max(s.x(2), 1e-6);
  s.x(3) = std::max(s.x(3), 1e-6);
}

double smooth_confidence(double prev, double next) { return 0.7 * next + 0.3 * prev; }

std::vector<Track> Tracker::snapshot() const {
  std::lock_guard lk(mu_);
  return tracks_;
}

std::size_t Tracker::size() const {
  std::lock_guard lk(mu_);
  return tracks_.size();
}

void Tracker::clear() {
  std::lock_guard lk(mu_);
  tracks_.clear();
}

void Tracker::update_frame(const std::vector<geometry::Detection>& dets) {
  associate(dets, /*kill_unmatched=*/true, nullptr);
}

void Tracker::inject_async(const std::vector<geometry::Detection>& fused, int k) {
  if (k < 0) throw std::invalid_argument("inject_async: k must be >= 0");
  std::vector<geometry::Detection> projected = fused;
  std::vector<KalmanState> tentative;
  tentative.reserve(fused.size());
  for (auto& d : projected) {
    KalmanState s = make_state(d.box, params_);
    for (int i = 0; i < k; ++i) predict_step(s, params_);  // zero velocity: box stays put
    d.box = state_box(s);
    tentative.push_back(s);
  }
  associate(projected, /*kill_unmatched=*/false, &tentative);
}

void Tracker::associate(const std::vector<geometry::Detection>& dets, bool kill_unmatched,
                        const std::vector<KalmanState>* birth_seeds) {
  // Phase 1: snapshot under the lock.
  std::vector<Track> local;
  {
    std::lock_guard lk(mu_);
    local = tracks_;
  }

  // Phase 2: all Kalman math on the copies.
  for (Track& t : local) {
    predict_step(t.state, params_);
    ++t.age;
  }

  const int nt = static_cast<int>(local.size());
  const int nd = static_cast<int>(dets.size());
  std::vector<int> match_of_track(nt, -1);
  std::vector<char> det_matched(nd, 0);
  if (nt > 0 && nd > 0) {
    Eigen::MatrixXd cost(nt, nd);
    for (int i = 0; i < nt; ++i) {
      const geometry::Box tb = local[i].box();
      for (int j = 0; j < nd; ++j) cost(i, j) = 1.0 - geometry::iou(tb, dets[j].box);
    }
    for (auto [i, j] : geometry::hungarian(cost)) {
      if (1.0 - cost(i, j) < params_.iou_gate) continue;  // gated out
      match_of_track[i] = j;
      det_matched[j] = 1;
    }
  }

  std::vector<std::uint64_t> dead;
  for (int i = 0; i < nt; ++i) {
    Track& t = local[i];
    if (match_of_track[i] >= 0) {
      const geometry::Detection& d = dets[match_of_track[i]];
      measurement_update(t.state, d.box, params_);
      t.conf_smooth = std::clamp(smooth_confidence(t.conf_smooth, d.conf), 0.0, 1.0);
      ++t.hits;
      t.misses = 0;
    } else if (kill_unmatched) {
      ++t.misses;
      if (t.misses >= params_.max_misses) dead.push_back(t.id);
    }
  }

  std::vector<Track> births;
  for (int j = 0; j < nd; ++j) {
    if (det_matched[j]) continue;
    Track t;
    t.class_id = dets[j].class_id;
    t.state = birth_seeds ? (*birth_seeds)[j] : make_state(dets[j].box, params_);
    t.conf_smooth = std::clamp(dets[j].conf, 0.0, 1.0);
    t.hits = 1;
    births.push_back(std::move(t));
  }

  // Phase 3: splice results back by id.
  std::unordered_map<std::uint64_t, const Track*> updated;
  for (const Track& t : local) updated[t.id] = &t;

  std::lock_guard lk(mu_);
  std::erase_if(tracks_, [&](const Track& t) {
    return std::find(dead.begin(), dead.end(), t.id) != dead.end();
  });
  for (Track& t : tracks_) {
    auto it = updated.find(t.id);
    if (it != updated.end()) t = *it->second;
  }
  for (Track& b : births) {
    b.id = next_id_++;
    tracks_.push_back(std::move(b));
  }
}

std::string Tracker::log_line(std::int64_t frame_idx, const Track& t) {
  const geometry::Box b = t.box();
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%lld,%llu,%d,%.2f,%.2f,%.2f,%.2f,%.4f",
                static_cast<long long>(frame_idx), static_cast<unsigned long long>(t.id),
                t.class_id, b.x1, b.y1, b.x2, b.y2, t.conf_smooth);
  return buf;
}

}  // namespace cadenet::ktt
