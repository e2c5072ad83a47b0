#pragma once

#include <string>

#include "cadenet/raster.hpp"

namespace cadenet::io {

// Dispatch on file magic (PNG signature, P6/P5 PPM/PGM).
Raster read_image(const std::string& path);
// Dispatch on extension: .png, .ppm, .pgm.
void write_image(const std::string& path, const Raster& r);

Raster read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Raster& r);  // P6 for RGB, P5 for gray

Raster read_png(const std::string& path);
void write_png(const std::string& path, const Raster& r);

}  // namespace cadenet::io
