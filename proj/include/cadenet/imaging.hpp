#pragma once

#include <utility>

#include "cadenet/raster.hpp"

namespace cadenet::imaging {

// Frame statistics feeding the weather heuristics: LAB L mean/std, HSV S
// mean (all on the 0..255 scale), edge density and vertical-edge ratio.
struct LabStats {
  double mu_l = 0.0;
  double sigma_l = 0.0;
  double mu_s = 0.0;
  double rho_e = 0.0;
  double r_v = 0.0;
};

// sRGB (D65) <-> CIELAB with all three channels rescaled to 0..255
// (L* * 255/100, a*+128, b*+128). Rejects single-channel input.
Raster to_lab(const Raster& rgb);
Raster from_lab(const Raster& lab);

// L plane of to_lab(rgb) as a single-channel raster.
Raster lab_l(const Raster& rgb);
// Recompose: replace the L plane of `rgb` and convert back to RGB.
Raster with_lab_l(const Raster& rgb, const Raster& l);

// HSV saturation plane, 0..255 (S = 255*(max-min)/max, 0 for black).
Raster hsv_saturation(const Raster& rgb);

// Contrast-limited adaptive histogram equalization on a single-channel
// raster. `clip` is the usual multiple of the uniform bin height
// (pass +inf to disable clipping); rasters smaller than the tile grid fall
// back to a single tile. Constant tiles map to themselves.
Raster clahe(const Raster& gray, double clip, int tiles_x = 8, int tiles_y = 8);

// Edge-preserving smoothing, window d x d, one sigma for both the spatial
// and range Gaussians. d must be odd and >= 1.
Raster bilateral(const Raster& r, int d, double sigma);

// out = 255*(in/255)^(1/g), per channel. Brightening form; g < 1 rejected.
Raster gamma_correct(const Raster& r, double g);

// Per-channel median over a ksize x ksize window (ksize odd).
Raster median_filter(const Raster& r, int ksize);

// Morphological opening of a {0,255} mask with a 1-wide, kernel_h-tall
// vertical structuring element.
Raster morph_open_vertical(const Raster& mask, int kernel_h = 7);

// Fast-marching inpainting after Telea. Nonzero mask pixels are filled from
// the surrounding known region; unmasked pixels are returned bit-identical.
// Throws if every pixel is masked.
Raster telea_inpaint(const Raster& r, const Raster& mask, int radius);

// Hysteresis edge mask (0/255) from Sobel gradient magnitude,
// thresholds low=50 / high=150 on the 8-bit magnitude.
Raster edge_map(const Raster& gray);

// {rho_e, r_v}: edge-pixel fraction and vertical/horizontal structure ratio
// (gradient orientation within +-22.5 deg of horizontal counts as vertical
// structure). 3-channel input is reduced to the LAB L plane first.
std::pair<double, double> edge_features(const Raster& r);

LabStats lab_stats(const Raster& rgb);

// Mean of the LAB L plane; the brightness trigger used by the rain branch.
double mean_l(const Raster& rgb);

}  // namespace cadenet::imaging
