#pragma once

#include <Eigen/Core>

#include "cadenet/geometry.hpp"
#include "cadenet/raster.hpp"

namespace cadenet::pee {

// Per-patch reliability R(j) = 1 - H(j)/log2(16), H from the 16-bin
// normalized histogram of each patch (bin = sample >> 4). Edge patches use
// their actual pixel count.
struct ReliabilityMap {
  Eigen::MatrixXf grid;  // rows x cols of patch reliabilities, each in [0,1]
  int patch_size = 16;
  int source_width = 0;
  int source_height = 0;
};

ReliabilityMap entropy_map(const Raster& gray, int patch_size = 16);

// Bilinear interpolation between patch centers, clamped to [0,1]; constant
// extrapolation beyond the outermost centers. (x,y) must lie inside the
// source dimensions.
double reliability_at(const ReliabilityMap& m, double x, double y);

// Reliability at a detection's box center (the patch containing d).
double box_reliability(const ReliabilityMap& m, const geometry::Box& b);

}  // namespace cadenet::pee
