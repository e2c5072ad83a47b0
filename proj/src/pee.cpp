#include "cadenet/pee.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace cadenet::pee {

ReliabilityMap entropy_map(const Raster& gray, int patch_size) {
  gray.validate();
  if (gray.channels != 1) throw std::invalid_argument("entropy_map: single-channel input required");
  if (patch_size < 1) throw std::invalid_argument("entropy_map: patch_size must be >= 1");

  const int rows = (gray.height + patch_size - 1) / patch_size;
  const int cols = (gray.width + patch_size - 1) / patch_size;
  ReliabilityMap m;
  m.grid.resize(rows, cols);
  m.patch_size = patch_size;
  m.source_width = gray.width;
  m.source_height = gray.height;

  for (int pj = 0; pj < rows; ++pj) {
    for (int pi = 0; pi < cols; ++pi) {
      const int x0 = pi * patch_size, y0 = pj * patch_size;
      const int x1 = std::min(x0 + patch_size, gray.width);
      const int y1 = std::min(y0 + patch_size, gray.height);
      std::array<int, 16> hist{};
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) ++hist[gray.at(x, y) >> 4];
      const double n = static_cast<double>((x1 - x0) * (y1 - y0));
      double entropy = 0.0;
      for (int b = 0; b < 16; ++b) {
        if (hist[b] == 0) continue;  // 0*log(0) = 0
        const double p = hist[b] / n;
        entropy -= p * std::log2(p);
      }
      m.grid(pj, pi) = static_cast<float>(std::clamp(1.0 - entropy / 4.0, 0.0, 1.0));
    }
  }
  return m;
}

double reliability_at(const ReliabilityMap& m, double x, double y) {
  if (x < 0.0 || y < 0.0 || x >= m.source_width || y >= m.source_height)
    throw std::out_of_range("reliability_at: coordinates outside the source frame");

  const int rows = static_cast<int>(m.grid.rows());
  const int cols = static_cast<int>(m.grid.cols());
  auto center = [&](int idx, int limit, int extent) {
    const double lo = static_cast<double>(idx) * m.patch_size;
    const double hi = std::min(lo + m.patch_size, static_cast<double>(extent));
    (void)limit;
    return 0.5 * (lo + hi) - 0.5;
  };

  auto locate = [&](double v, int count, int extent) {
    // Index pair (i, i+1) of centers bracketing v, plus the blend weight.
    int i0 = 0;
    while (i0 + 1 < count && center(i0 + 1, count, extent) <= v) ++i0;
    int i1 = std::min(i0 + 1, count - 1);
    const double c0 = center(i0, count, extent), c1 = center(i1, count, extent);
    double w = 0.0;
    if (i1 != i0 && v > c0) w = std::clamp((v - c0) / (c1 - c0), 0.0, 1.0);
    return std::tuple<int, int, double>(i0, i1, w);
  };

  auto [ix0, ix1, wx] = locate(x, cols, m.source_width);
  auto [iy0, iy1, wy] = locate(y, rows, m.source_height);
  const double top = m.grid(iy0, ix0) * (1.0 - wx) + m.grid(iy0, ix1) * wx;
  const double bot = m.grid(iy1, ix0) * (1.0 - wx) + m.grid(iy1, ix1) * wx;
  return std::clamp(top * (1.0 - wy) + bot * wy, 0.0, 1.0);
}

double box_reliability(const ReliabilityMap& m, const geometry::Box& b) {
  return reliability_at(m, b.cx(), b.cy());
}

}  // namespace cadenet::pee
