#pragma once

#include <vector>

#include "cadenet/geometry.hpp"
#include "cadenet/pee.hpp"

namespace cadenet::egnms {

// Entropy-guided fusion of the safety and quality detection streams:
//   d_S.score = R(j_d)       * d_S.conf
//   d_Q.score = (1 - R(j_d)) * d_Q.conf
// with R sampled at each box center, followed by class-aware NMS on the
// pooled set. Detections below conf_thresh (raw confidence) are dropped
// before weighting; zero-score survivors are kept — downstream confidence
// smoothing decides their fate. A box center outside the reliability map is
// a stream/frame mismatch and raises std::out_of_range.
std::vector<geometry::Detection> fuse(const std::vector<geometry::Detection>& ds,
                                      const std::vector<geometry::Detection>& dq,
                                      const pee::ReliabilityMap& rmap,
                                      double conf_thresh = 0.25, double iou_thresh = 0.45);

}  // namespace cadenet::egnms
