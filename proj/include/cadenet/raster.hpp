#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace cadenet {

// 8-bit raster, row-major, interleaved channels (1 = gray, 3 = RGB).
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> data;

  Raster() = default;
  Raster(int w, int h, int c, std::uint8_t fill = 0);

  std::uint8_t& at(int x, int y, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  // Sample with edge replication; the border policy shared by all filters.
  std::uint8_t at_clamped(int x, int y, int c = 0) const;

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  bool empty() const { return data.empty(); }
  bool same_shape(const Raster& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }

  // Throws std::invalid_argument if the geometry/data-length contract is broken.
  void validate() const;
};

}  // namespace cadenet
