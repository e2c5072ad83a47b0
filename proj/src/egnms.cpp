#include "cadenet/egnms.hpp"

namespace cadenet::egnms {

std::vector<geometry::Detection> fuse(const std::vector<geometry::Detection>& ds,
                                      const std::vector<geometry::Detection>& dq,
                                      const pee::ReliabilityMap& rmap, double conf_thresh,
                                      double iou_thresh) {
  std::vector<geometry::Detection> pooled;
  pooled.reserve(ds.size() + dq.size());
  for (const auto& d : ds) {
    if (d.conf < conf_thresh) continue;
    geometry::Detection w = d;
    w.source = geometry::Stream::S;
    w.score = pee::box_reliability(rmap, d.box) * d.conf;
    pooled.push_back(w);
  }
  for (const auto& d : dq) {
    if (d.conf < conf_thresh) continue;
    geometry::Detection w = d;
    w.source = geometry::Stream::Q;
    w.score = (1.0 - pee::box_reliability(rmap, d.box)) * d.conf;
    pooled.push_back(w);
  }
  return geometry::nms(std::move(pooled), iou_thresh);
}

}  // namespace cadenet::egnms
