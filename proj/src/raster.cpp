#include "cadenet/raster.hpp"

#include <algorithm>
#include <stdexcept>

namespace cadenet {

Raster::Raster(int w, int h, int c, std::uint8_t fill)
    : width(w), height(h), channels(c),
      data(static_cast<std::size_t>(w) * h * c, fill) {
  validate();
}

std::uint8_t Raster::at_clamped(int x, int y, int c) const {
  x = std::clamp(x, 0, width - 1);
  y = std::clamp(y, 0, height - 1);
  return at(x, y, c);
}

void Raster::validate() const {
  if (width <= 0 || height <= 0)
    throw std::invalid_argument("raster: non-positive dimensions");
  if (channels != 1 && channels != 3)
    throw std::invalid_argument("raster: channels must be 1 or 3");
  if (data.size() != static_cast<std::size_t>(width) * height * channels)
    throw std::invalid_argument("raster: data length != width*height*channels");
}

}  // namespace cadenet
