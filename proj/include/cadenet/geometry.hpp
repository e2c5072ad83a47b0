#pragma once

#include <Eigen/Core>
#include <utility>
#include <vector>

namespace cadenet::geometry {

// Axis-aligned box in continuous pixel coordinates; exact areas, no +1.
struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double cx() const { return 0.5 * (x1 + x2); }
  double cy() const { return 0.5 * (y1 + y2); }
  bool valid() const { return x2 > x1 && y2 > y1; }
};

// Which stream produced a detection: S = safety (fast detector on the raw
// frame), Q = quality (strong detector on the enhanced frame).
enum class Stream : std::uint8_t { S, Q };

struct Detection {
  Box box;
  int class_id = 0;
  double conf = 0.0;    // raw detector confidence
  Stream source = Stream::S;
  double score = 0.0;   // post reliability weighting
};

// Ground-truth-style annotated box, shared by the oracle detector sidecars
// and the evaluation harness.
struct LabeledBox {
  int class_id = 0;
  Box box;
};

double iou(const Box& a, const Box& b);

// Greedy class-aware non-maximum suppression on `score`, descending.
// Ties are broken by (class_id, x1, y1) so the result is deterministic.
// Survivor pairs of the same class never exceed `iou_thresh`.
std::vector<Detection> nms(std::vector<Detection> dets, double iou_thresh);

// Minimum-total-cost assignment on a rectangular matrix; every index of the
// shorter side is assigned, the longer side may keep unassigned entries.
// Returns (row, col) pairs. Costs must be finite.
std::vector<std::pair<int, int>> hungarian(const Eigen::MatrixXd& cost);

}  // namespace cadenet::geometry
