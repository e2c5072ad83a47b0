#include "cadenet/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

namespace cadenet::pipeline {

double box_rms_contrast(const Raster& frame, const geometry::Box& box) {
  const int x0 = std::clamp(static_cast<int>(std::floor(box.x1)), 0, frame.width - 1);
  const int y0 = std::clamp(static_cast<int>(std::floor(box.y1)), 0, frame.height - 1);
  const int x1 = std::clamp(static_cast<int>(std::ceil(box.x2)), x0 + 1, frame.width);
  const int y1 = std::clamp(static_cast<int>(std::ceil(box.y2)), y0 + 1, frame.height);
  const double n = static_cast<double>(x1 - x0) * (y1 - y0);
  double best = 0.0;
  for (int c = 0; c < frame.channels; ++c) {
    double sum = 0.0, sum2 = 0.0;
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) {
        const double v = frame.at(x, y, c);
        sum += v;
        sum2 += v * v;
      }
    const double mu = sum / n;
    best = std::max(best, std::sqrt(std::max(0.0, sum2 / n - mu * mu)));
  }
  return best;
}

std::vector<geometry::Detection> OracleDetector::detect(const Frame& frame) const {
  auto it = sidecar_.find(frame.t_index);
  if (it == sidecar_.end())
    throw std::runtime_error("oracle detector: no sidecar ground truth for frame " +
                             std::to_string(frame.t_index));
  std::vector<geometry::Detection> out;
  out.reserve(it->second.size());
  for (const auto& gt : it->second) {
    geometry::Detection d;
    d.box = gt.box;
    d.class_id = gt.class_id;
    d.conf = std::clamp(box_rms_contrast(frame.raster, gt.box) / ref_contrast_, 0.0, 1.0);
    d.score = d.conf;
    out.push_back(d);
  }
  return out;
}

namespace {

// Per-channel Sobel, max over channels, scaled to the 8-bit range.
std::vector<std::uint8_t> channel_max_gradient(const Raster& r) {
  std::vector<std::uint8_t> mag(r.pixel_count(), 0);
  for (int c = 0; c < r.channels; ++c) {
    for (int y = 0; y < r.height; ++y) {
      for (int x = 0; x < r.width; ++x) {
        const int p00 = r.at_clamped(x - 1, y - 1, c), p01 = r.at_clamped(x, y - 1, c),
                  p02 = r.at_clamped(x + 1, y - 1, c);
        const int p10 = r.at_clamped(x - 1, y, c), p12 = r.at_clamped(x + 1, y, c);
        const int p20 = r.at_clamped(x - 1, y + 1, c), p21 = r.at_clamped(x, y + 1, c),
                  p22 = r.at_clamped(x + 1, y + 1, c);
        const int gx = (p02 + 2 * p12 + p22) - (p00 + 2 * p10 + p20);
        const int gy = (p20 + 2 * p21 + p22) - (p00 + 2 * p01 + p02);
        const double m = std::hypot(static_cast<double>(gx), static_cast<double>(gy)) / 4.0;
        const std::size_t i = static_cast<std::size_t>(y) * r.width + x;
        mag[i] = std::max<std::uint8_t>(mag[i],
                                        static_cast<std::uint8_t>(std::min(255.0, m + 0.5)));
      }
    }
  }
  return mag;
}

}  // namespace

std::vector<geometry::Detection> ContrastDetector::detect(const Frame& frame) const {
  const Raster& r = frame.raster;
  const int w = r.width, h = r.height;
  const auto mag = channel_max_gradient(r);

  std::vector<std::uint8_t> on(r.pixel_count(), 0);
  for (std::size_t i = 0; i < on.size(); ++i) on[i] = mag[i] >= grad_thresh_ ? 1 : 0;
  // One dilation closes the thin edge ring around an object.
  std::vector<std::uint8_t> closed(r.pixel_count(), 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      bool any = false;
      for (int dy = -1; dy <= 1 && !any; ++dy)
        for (int dx = -1; dx <= 1 && !any; ++dx) {
          const int nx = std::clamp(x + dx, 0, w - 1), ny = std::clamp(y + dy, 0, h - 1);
          any = on[static_cast<std::size_t>(ny) * w + nx] != 0;
        }
      closed[static_cast<std::size_t>(y) * w + x] = any ? 1 : 0;
    }

  std::vector<std::int32_t> comp(r.pixel_count(), -1);
  std::vector<geometry::Detection> out;
  std::int32_t next = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i0 = static_cast<std::size_t>(y) * w + x;
      if (!closed[i0] || comp[i0] >= 0) continue;
      int minx = x, maxx = x, miny = y, maxy = y, area = 0;
      std::queue<std::pair<int, int>> q;
      q.emplace(x, y);
      comp[i0] = next;
      while (!q.empty()) {
        auto [cx, cy] = q.front();
        q.pop();
        ++area;
        minx = std::min(minx, cx);
        maxx = std::max(maxx, cx);
        miny = std::min(miny, cy);
        maxy = std::max(maxy, cy);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const std::size_t ni = static_cast<std::size_t>(ny) * w + nx;
            if (!closed[ni] || comp[ni] >= 0) continue;
            comp[ni] = next;
            q.emplace(nx, ny);
          }
      }
      ++next;
      if (area < min_area_) continue;
      if (maxx - minx + 1 < min_side_ || maxy - miny + 1 < min_side_) continue;
      geometry::Detection d;
      d.box = {static_cast<double>(minx), static_cast<double>(miny),
               static_cast<double>(maxx + 1), static_cast<double>(maxy + 1)};
      d.class_id = 0;
      d.conf = std::clamp(box_rms_contrast(r, d.box) / ref_contrast_, 0.0, 1.0);
      d.score = d.conf;
      out.push_back(d);
    }
  }
  return geometry::nms(std::move(out), 0.45);
}

}  // namespace cadenet::pipeline
