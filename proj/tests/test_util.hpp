#pragma once

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "cadenet/geometry.hpp"
#include "cadenet/raster.hpp"

namespace testutil {

inline std::mt19937 rng(std::uint32_t seed) { return std::mt19937(seed); }

inline cadenet::Raster random_raster(int w, int h, int ch, std::mt19937& g) {
  cadenet::Raster r(w, h, ch);
  std::uniform_int_distribution<int> d(0, 255);
  for (auto& v : r.data) v = static_cast<std::uint8_t>(d(g));
  return r;
}

// O(n^2) reference NMS shared by the geometry and fusion oracles; written
// against the spec text, independently of the library implementation.
inline std::vector<cadenet::geometry::Detection> reference_nms(
    std::vector<cadenet::geometry::Detection> dets, double thresh) {
  using cadenet::geometry::Detection;
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    if (dets[a].class_id != dets[b].class_id) return dets[a].class_id < dets[b].class_id;
    if (dets[a].box.x1 != dets[b].box.x1) return dets[a].box.x1 < dets[b].box.x1;
    return dets[a].box.y1 < dets[b].box.y1;
  });
  std::vector<char> dead(dets.size(), 0);
  std::vector<Detection> out;
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t i = order[oi];
    if (dead[i]) continue;
    out.push_back(dets[i]);
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const std::size_t j = order[oj];
      if (dead[j] || dets[j].class_id != dets[i].class_id) continue;
      if (cadenet::geometry::iou(dets[i].box, dets[j].box) > thresh) dead[j] = 1;
    }
  }
  return out;
}

}  // namespace testutil
