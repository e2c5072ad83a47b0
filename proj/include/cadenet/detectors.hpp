#pragma once

#include <map>
#include <vector>

#include "cadenet/pipeline.hpp"

namespace cadenet::pipeline {

// RMS contrast of a box region: the largest per-channel standard deviation
// inside the (frame-clipped) box. The quantity both synthetic detectors
// turn into a confidence.
double box_rms_contrast(const Raster& frame, const geometry::Box& box);

// Returns the sidecar ground-truth boxes for its frame with
// conf = clamp(box RMS contrast / ref_contrast, 0, 1). Frames without a
// sidecar entry are an error.
class OracleDetector : public Detector {
 public:
  OracleDetector(std::map<std::int64_t, std::vector<geometry::LabeledBox>> sidecar,
                 double ref_contrast = 30.0)
      : sidecar_(std::move(sidecar)), ref_contrast_(ref_contrast) {}

  std::vector<geometry::Detection> detect(const Frame& frame) const override;
  std::string name() const override { return "oracle"; }

 private:
  std::map<std::int64_t, std::vector<geometry::LabeledBox>> sidecar_;
  double ref_contrast_;
};

// Proposes boxes from connected high-gradient components: per-channel Sobel
// magnitude thresholded, dilated once, 8-connected components turned into
// bounding boxes with contrast-derived confidence. Fully deterministic.
class ContrastDetector : public Detector {
 public:
  explicit ContrastDetector(double grad_thresh = 60.0, int min_area = 40,
                            double ref_contrast = 30.0, int min_side = 8)
      : grad_thresh_(grad_thresh), min_area_(min_area), ref_contrast_(ref_contrast),
        min_side_(min_side) {}

  std::vector<geometry::Detection> detect(const Frame& frame) const override;
  std::string name() const override { return "contrast"; }

 private:
  double grad_thresh_;
  int min_area_;
  double ref_contrast_;
  int min_side_;
};

}  // namespace cadenet::pipeline
