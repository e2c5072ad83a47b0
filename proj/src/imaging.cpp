#include "cadenet/imaging.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <limits>
#include <queue>
#include <stdexcept>
#include <vector>

namespace cadenet::imaging {

namespace {

inline std::uint8_t clamp_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0) + 0.5);
}

inline double srgb_to_linear(double u) {
  u /= 255.0;
  return u <= 0.04045 ? u / 12.92 : std::pow((u + 0.055) / 1.055, 2.4);
}

inline double linear_to_srgb(double u) {
  double v = u <= 0.0031308 ? 12.92 * u : 1.055 * std::pow(u, 1.0 / 2.4) - 0.055;
  return v * 255.0;
}

constexpr double kXn = 0.95047, kYn = 1.0, kZn = 1.08883;  // D65 white

inline double lab_f(double t) {
  constexpr double d = 6.0 / 29.0;
  return t > d * d * d ? std::cbrt(t) : t / (3.0 * d * d) + 4.0 / 29.0;
}

inline double lab_f_inv(double t) {
  constexpr double d = 6.0 / 29.0;
  return t > d ? t * t * t : 3.0 * d * d * (t - 4.0 / 29.0);
}

void require_rgb(const Raster& r, const char* op) {
  r.validate();
  if (r.channels != 3)
    throw std::invalid_argument(std::string(op) + ": 3-channel input required");
}

void require_gray(const Raster& r, const char* op) {
  r.validate();
  if (r.channels != 1)
    throw std::invalid_argument(std::string(op) + ": single-channel input required");
}

}  // namespace

Raster to_lab(const Raster& rgb) {
  require_rgb(rgb, "to_lab");
  Raster out(rgb.width, rgb.height, 3);
  const std::size_t n = rgb.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    const double r = srgb_to_linear(rgb.data[3 * i + 0]);
    const double g = srgb_to_linear(rgb.data[3 * i + 1]);
    const double b = srgb_to_linear(rgb.data[3 * i + 2]);
    const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
    const double fx = lab_f(x / kXn), fy = lab_f(y / kYn), fz = lab_f(z / kZn);
    const double lstar = 116.0 * fy - 16.0;
    const double astar = 500.0 * (fx - fy);
    const double bstar = 200.0 * (fy - fz);
    out.data[3 * i + 0] = clamp_u8(lstar * 255.0 / 100.0);
    out.data[3 * i + 1] = clamp_u8(astar + 128.0);
    out.data[3 * i + 2] = clamp_u8(bstar + 128.0);
  }
  return out;
}

Raster from_lab(const Raster& lab) {
  require_rgb(lab, "from_lab");
  Raster out(lab.width, lab.height, 3);
  const std::size_t n = lab.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    const double lstar = lab.data[3 * i + 0] * 100.0 / 255.0;
    const double astar = lab.data[3 * i + 1] - 128.0;
    const double bstar = lab.data[3 * i + 2] - 128.0;
    const double fy = (lstar + 16.0) / 116.0;
    const double fx = fy + astar / 500.0;
    const double fz = fy - bstar / 200.0;
    const double x = kXn * lab_f_inv(fx);
    const double y = kYn * lab_f_inv(fy);
    const double z = kZn * lab_f_inv(fz);
    const double r = 3.2404542 * x - 1.5371385 * y - 0.4985314 * z;
    const double g = -0.9692660 * x + 1.8760108 * y + 0.0415560 * z;
    const double b = 0.0556434 * x - 0.2040259 * y + 1.0572252 * z;
    out.data[3 * i + 0] = clamp_u8(linear_to_srgb(std::clamp(r, 0.0, 1.0)));
    out.data[3 * i + 1] = clamp_u8(linear_to_srgb(std::clamp(g, 0.0, 1.0)));
    out.data[3 * i + 2] = clamp_u8(linear_to_srgb(std::clamp(b, 0.0, 1.0)));
  }
  return out;
}

Raster lab_l(const Raster& rgb) {
  Raster lab = to_lab(rgb);
  Raster out(lab.width, lab.height, 1);
  for (std::size_t i = 0; i < lab.pixel_count(); ++i) out.data[i] = lab.data[3 * i];
  return out;
}

Raster with_lab_l(const Raster& rgb, const Raster& l) {
  require_gray(l, "with_lab_l");
  Raster lab = to_lab(rgb);
  if (l.width != lab.width || l.height != lab.height)
    throw std::invalid_argument("with_lab_l: plane size mismatch");
  for (std::size_t i = 0; i < lab.pixel_count(); ++i) lab.data[3 * i] = l.data[i];
  return from_lab(lab);
}

Raster hsv_saturation(const Raster& rgb) {
  require_rgb(rgb, "hsv_saturation");
  Raster out(rgb.width, rgb.height, 1);
  for (std::size_t i = 0; i < rgb.pixel_count(); ++i) {
    const int r = rgb.data[3 * i], g = rgb.data[3 * i + 1], b = rgb.data[3 * i + 2];
    const int v = std::max({r, g, b});
    const int m = std::min({r, g, b});
    out.data[i] = v == 0 ? 0 : clamp_u8(255.0 * (v - m) / v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CLAHE

namespace {

// Equalization mapping for one (possibly clipped) 256-bin histogram.
// Classic cdf form: map(v) = 255*(cdf(v)-cdf_min)/(area-cdf_min), identity
// when the tile is a single level.
void histogram_mapping(const std::array<std::uint32_t, 256>& hist_in, double clip,
                       std::uint32_t area, std::array<std::uint8_t, 256>& map) {
  std::array<std::uint64_t, 256> hist;
  for (int i = 0; i < 256; ++i) hist[i] = hist_in[i];

  if (std::isfinite(clip)) {
    const std::uint64_t limit =
        std::max<std::uint64_t>(1, static_cast<std::uint64_t>(clip * area / 256.0));
    std::uint64_t excess = 0;
    for (auto& h : hist)
      if (h > limit) {
        excess += h - limit;
        h = limit;
      }
    // One-pass uniform redistribution of the clipped mass.
    const std::uint64_t per_bin = excess / 256;
    std::uint64_t rem = excess % 256;
    for (auto& h : hist) {
      h += per_bin;
      if (rem > 0) {
        ++h;
        --rem;
      }
    }
  }

  std::uint64_t cdf = 0, cdf_min = 0;
  bool seen = false;
  std::array<std::uint64_t, 256> cum{};
  for (int i = 0; i < 256; ++i) {
    cdf += hist[i];
    cum[i] = cdf;
    if (!seen && hist[i] > 0) {
      cdf_min = cdf;
      seen = true;
    }
  }
  const std::uint64_t total = cdf;
  if (!seen || total == cdf_min) {
    for (int i = 0; i < 256; ++i) map[i] = static_cast<std::uint8_t>(i);
    return;
  }
  const double scale = 255.0 / static_cast<double>(total - cdf_min);
  for (int i = 0; i < 256; ++i) {
    const double v = cum[i] <= cdf_min ? 0.0 : (cum[i] - cdf_min) * scale;
    map[i] = clamp_u8(v);
  }
}

}  // namespace

Raster clahe(const Raster& gray, double clip, int tiles_x, int tiles_y) {
  require_gray(gray, "clahe");
  if (!(clip > 0)) throw std::invalid_argument("clahe: clip must be > 0");
  if (tiles_x < 1 || tiles_y < 1) throw std::invalid_argument("clahe: tiles must be >= 1");
  if (gray.width < tiles_x || gray.height < tiles_y) tiles_x = tiles_y = 1;

  const int tx = tiles_x, ty = tiles_y;
  std::vector<int> x0(tx + 1), y0(ty + 1);
  for (int i = 0; i <= tx; ++i) x0[i] = static_cast<int>(static_cast<std::int64_t>(i) * gray.width / tx);
  for (int j = 0; j <= ty; ++j) y0[j] = static_cast<int>(static_cast<std::int64_t>(j) * gray.height / ty);

  std::vector<std::array<std::uint8_t, 256>> maps(static_cast<std::size_t>(tx) * ty);
  std::vector<double> cx(tx), cy(ty);
  for (int j = 0; j < ty; ++j) {
    for (int i = 0; i < tx; ++i) {
      std::array<std::uint32_t, 256> hist{};
      for (int y = y0[j]; y < y0[j + 1]; ++y)
        for (int x = x0[i]; x < x0[i + 1]; ++x) ++hist[gray.at(x, y)];
      const std::uint32_t area =
          static_cast<std::uint32_t>((x0[i + 1] - x0[i]) * (y0[j + 1] - y0[j]));
      histogram_mapping(hist, clip, area, maps[static_cast<std::size_t>(j) * tx + i]);
    }
  }
  for (int i = 0; i < tx; ++i) cx[i] = 0.5 * (x0[i] + x0[i + 1]) - 0.5;
  for (int j = 0; j < ty; ++j) cy[j] = 0.5 * (y0[j] + y0[j + 1]) - 0.5;

  Raster out(gray.width, gray.height, 1);
  for (int y = 0; y < gray.height; ++y) {
    // Vertical tile pair and weight for this row.
    int j0 = 0;
    while (j0 + 1 < ty && cy[j0 + 1] < y) ++j0;
    int j1 = std::min(j0 + 1, ty - 1);
    double wy = 0.0;
    if (j1 != j0 && y > cy[j0]) wy = std::clamp((y - cy[j0]) / (cy[j1] - cy[j0]), 0.0, 1.0);
    for (int x = 0; x < gray.width; ++x) {
      int i0 = 0;
      while (i0 + 1 < tx && cx[i0 + 1] < x) ++i0;
      int i1 = std::min(i0 + 1, tx - 1);
      double wx = 0.0;
      if (i1 != i0 && x > cx[i0]) wx = std::clamp((x - cx[i0]) / (cx[i1] - cx[i0]), 0.0, 1.0);
      const std::uint8_t v = gray.at(x, y);
      const double m00 = maps[static_cast<std::size_t>(j0) * tx + i0][v];
      const double m01 = maps[static_cast<std::size_t>(j0) * tx + i1][v];
      const double m10 = maps[static_cast<std::size_t>(j1) * tx + i0][v];
      const double m11 = maps[static_cast<std::size_t>(j1) * tx + i1][v];
      const double top = m00 * (1.0 - wx) + m01 * wx;
      const double bot = m10 * (1.0 - wx) + m11 * wx;
      out.at(x, y) = clamp_u8(top * (1.0 - wy) + bot * wy);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

Raster bilateral(const Raster& r, int d, double sigma) {
  r.validate();
  if (d < 1 || d % 2 == 0) throw std::invalid_argument("bilateral: d must be odd and >= 1");
  if (!(sigma > 0)) throw std::invalid_argument("bilateral: sigma must be > 0");
  if (d == 1) return r;

  const int rad = d / 2;
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  std::vector<double> spatial(static_cast<std::size_t>(d) * d);
  for (int dy = -rad; dy <= rad; ++dy)
    for (int dx = -rad; dx <= rad; ++dx)
      spatial[static_cast<std::size_t>(dy + rad) * d + (dx + rad)] =
          std::exp(-(dx * dx + dy * dy) * inv2s2);
  std::array<double, 256> range;
  for (int i = 0; i < 256; ++i) range[i] = std::exp(-(i * i) * inv2s2);

  Raster out(r.width, r.height, r.channels);
  for (int y = 0; y < r.height; ++y) {
    for (int x = 0; x < r.width; ++x) {
      for (int c = 0; c < r.channels; ++c) {
        const int center = r.at(x, y, c);
        double num = 0.0, den = 0.0;
        for (int dy = -rad; dy <= rad; ++dy) {
          for (int dx = -rad; dx <= rad; ++dx) {
            const int v = r.at_clamped(x + dx, y + dy, c);
            const double w = spatial[static_cast<std::size_t>(dy + rad) * d + (dx + rad)] *
                             range[std::abs(v - center)];
            num += w * v;
            den += w;
          }
        }
        out.at(x, y, c) = clamp_u8(num / den);
      }
    }
  }
  return out;
}

Raster gamma_correct(const Raster& r, double g) {
  r.validate();
  if (g < 1.0) throw std::invalid_argument("gamma_correct: g must be >= 1");
  if (g == 1.0) return r;
  std::array<std::uint8_t, 256> lut;
  const double e = 1.0 / g;
  for (int i = 0; i < 256; ++i) lut[i] = clamp_u8(255.0 * std::pow(i / 255.0, e));
  Raster out = r;
  for (auto& v : out.data) v = lut[v];
  return out;
}

Raster median_filter(const Raster& r, int ksize) {
  r.validate();
  if (ksize < 1 || ksize % 2 == 0)
    throw std::invalid_argument("median_filter: ksize must be odd and >= 1");
  if (ksize == 1) return r;
  const int rad = ksize / 2;
  Raster out(r.width, r.height, r.channels);
  std::vector<std::uint8_t> window(static_cast<std::size_t>(ksize) * ksize);
  for (int y = 0; y < r.height; ++y) {
    for (int x = 0; x < r.width; ++x) {
      for (int c = 0; c < r.channels; ++c) {
        std::size_t n = 0;
        for (int dy = -rad; dy <= rad; ++dy)
          for (int dx = -rad; dx <= rad; ++dx) window[n++] = r.at_clamped(x + dx, y + dy, c);
        auto mid = window.begin() + n / 2;
        std::nth_element(window.begin(), mid, window.begin() + n);
        out.at(x, y, c) = *mid;
      }
    }
  }
  return out;
}

Raster morph_open_vertical(const Raster& mask, int kernel_h) {
  require_gray(mask, "morph_open_vertical");
  if (kernel_h < 1) throw std::invalid_argument("morph_open_vertical: kernel height >= 1");
  for (auto v : mask.data)
    if (v != 0 && v != 255)
      throw std::invalid_argument("morph_open_vertical: mask must be binary {0,255}");

  const int rad = kernel_h / 2;
  Raster eroded(mask.width, mask.height, 1);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) {
      std::uint8_t v = 255;
      for (int dy = -rad; dy <= rad; ++dy)
        if (mask.at_clamped(x, y + dy) == 0) {
          v = 0;
          break;
        }
      eroded.at(x, y) = v;
    }
  Raster opened(mask.width, mask.height, 1);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) {
      std::uint8_t v = 0;
      for (int dy = -rad; dy <= rad; ++dy)
        if (eroded.at_clamped(x, y + dy) != 0) {
          v = 255;
          break;
        }
      opened.at(x, y) = v;
    }
  return opened;
}

// ---------------------------------------------------------------------------
// Telea fast-marching inpainting.

namespace {

constexpr std::uint8_t kKnown = 0, kBand = 1, kInside = 2;
constexpr double kInf = 1e6;

struct BandEntry {
  double t;
  int x, y;
  bool operator>(const BandEntry& o) const { return t > o.t; }
};

// Eikonal update from the already-frozen neighbours.
double solve_t(const std::vector<double>& t, const std::vector<std::uint8_t>& frozen, int w,
               int h, int x, int y) {
  auto value = [&](int xx, int yy) -> double {
    if (xx < 0 || yy < 0 || xx >= w || yy >= h) return kInf;
    const std::size_t i = static_cast<std::size_t>(yy) * w + xx;
    return frozen[i] ? t[i] : kInf;
  };
  const double a = std::min(value(x - 1, y), value(x + 1, y));
  const double b = std::min(value(x, y - 1), value(x, y + 1));
  if (a >= kInf && b >= kInf) return kInf;
  if (a >= kInf) return b + 1.0;
  if (b >= kInf) return a + 1.0;
  if (std::abs(a - b) >= 1.0) return std::min(a, b) + 1.0;
  return 0.5 * (a + b + std::sqrt(2.0 - (a - b) * (a - b)));
}

}  // namespace

Raster telea_inpaint(const Raster& r, const Raster& mask, int radius) {
  r.validate();
  require_gray(mask, "telea_inpaint");
  if (mask.width != r.width || mask.height != r.height)
    throw std::invalid_argument("telea_inpaint: mask size mismatch");
  if (radius < 1) throw std::invalid_argument("telea_inpaint: radius must be >= 1");

  const int w = r.width, h = r.height, ch = r.channels;
  const std::size_t n = r.pixel_count();
  std::size_t masked = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (mask.data[i]) ++masked;
  if (masked == 0) return r;
  if (masked == n) throw std::runtime_error("telea_inpaint: fully masked raster");

  std::vector<std::uint8_t> flag(n, kKnown);
  std::vector<std::uint8_t> frozen(n, 0);  // value usable as boundary data
  std::vector<std::uint8_t> done(n, 0);    // popped from the band, final
  std::vector<double> t(n, 0.0);
  Raster out = r;

  for (std::size_t i = 0; i < n; ++i)
    if (mask.data[i]) {
      flag[i] = kInside;
      t[i] = kInf;
    } else {
      frozen[i] = 1;
    }

  std::priority_queue<BandEntry, std::vector<BandEntry>, std::greater<BandEntry>> band;
  const int dx4[] = {-1, 1, 0, 0}, dy4[] = {0, 0, -1, 1};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (flag[i] != kInside) continue;
      for (int d = 0; d < 4; ++d) {
        const int nx = x + dx4[d], ny = y + dy4[d];
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
        if (flag[j] == kKnown) {
          flag[j] = kBand;
          band.push({0.0, nx, ny});
        }
      }
    }

  auto grad_t = [&](int x, int y, double& gx, double& gy) {
    auto tv = [&](int xx, int yy) -> double {
      if (xx < 0 || yy < 0 || xx >= w || yy >= h) return kInf;
      const std::size_t i = static_cast<std::size_t>(yy) * w + xx;
      return frozen[i] ? t[i] : kInf;
    };
    const double c = t[static_cast<std::size_t>(y) * w + x];
    const double l = tv(x - 1, y), rr = tv(x + 1, y), u = tv(x, y - 1), dn = tv(x, y + 1);
    gx = (l < kInf && rr < kInf) ? 0.5 * (rr - l) : (rr < kInf ? rr - c : (l < kInf ? c - l : 0.0));
    gy = (u < kInf && dn < kInf) ? 0.5 * (dn - u) : (dn < kInf ? dn - c : (u < kInf ? c - u : 0.0));
  };

  auto inpaint_pixel = [&](int x, int y) {
    double gtx, gty;
    grad_t(x, y, gtx, gty);
    std::array<double, 3> num{};
    double den = 0.0;
    const double tp = t[static_cast<std::size_t>(y) * w + x];
    for (int dy = -radius; dy <= radius; ++dy) {
      for (int dx = -radius; dx <= radius; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const int qx = x + dx, qy = y + dy;
        if (qx < 0 || qy < 0 || qx >= w || qy >= h) continue;
        const double dist2 = dx * dx + dy * dy;
        if (dist2 > static_cast<double>(radius) * radius) continue;
        const std::size_t qi = static_cast<std::size_t>(qy) * w + qx;
        if (!frozen[qi]) continue;
        const double dist = std::sqrt(dist2);
        double dir = std::abs((gtx * -dx + gty * -dy) / dist);
        if (dir < 1e-6) dir = 1e-6;
        const double dst = 1.0 / dist2;
        const double lev = 1.0 / (1.0 + std::abs(t[qi] - tp));
        const double wgt = dir * dst * lev;
        // First-order term from the image gradient at q, central differences
        // restricted to usable (frozen) pixels.
        for (int c = 0; c < ch; ++c) {
          auto iv = [&](int xx, int yy) -> int {
            if (xx < 0 || yy < 0 || xx >= w || yy >= h) return -1;
            const std::size_t ii = static_cast<std::size_t>(yy) * w + xx;
            return frozen[ii] ? out.at(xx, yy, c) : -1;
          };
          const int il = iv(qx - 1, qy), ir = iv(qx + 1, qy);
          const int iu = iv(qx, qy - 1), id = iv(qx, qy + 1);
          double gix = (il >= 0 && ir >= 0) ? 0.5 * (ir - il) : 0.0;
          double giy = (iu >= 0 && id >= 0) ? 0.5 * (id - iu) : 0.0;
          num[c] += wgt * (out.at(qx, qy, c) + gix * -dx + giy * -dy);
        }
        den += wgt;
      }
    }
    if (den > 0.0)
      for (int c = 0; c < ch; ++c) out.at(x, y, c) = clamp_u8(num[c] / den);
  };

  while (!band.empty()) {
    const BandEntry e = band.top();
    band.pop();
    const std::size_t i = static_cast<std::size_t>(e.y) * w + e.x;
    if (done[i]) continue;  // stale duplicate
    done[i] = 1;
    flag[i] = kKnown;
    frozen[i] = 1;
    for (int d = 0; d < 4; ++d) {
      const int nx = e.x + dx4[d], ny = e.y + dy4[d];
      if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
      const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
      if (frozen[j]) continue;
      const double tn = solve_t(t, frozen, w, h, nx, ny);
      if (tn < t[j]) t[j] = tn;
      if (flag[j] == kInside) {
        inpaint_pixel(nx, ny);
        flag[j] = kBand;
        band.push({t[j], nx, ny});
      } else if (flag[j] == kBand) {
        band.push({t[j], nx, ny});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Edges

namespace {

void sobel(const Raster& g, std::vector<int>& gx, std::vector<int>& gy) {
  const int w = g.width, h = g.height;
  gx.assign(g.pixel_count(), 0);
  gy.assign(g.pixel_count(), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int p00 = g.at_clamped(x - 1, y - 1), p01 = g.at_clamped(x, y - 1),
                p02 = g.at_clamped(x + 1, y - 1);
      const int p10 = g.at_clamped(x - 1, y), p12 = g.at_clamped(x + 1, y);
      const int p20 = g.at_clamped(x - 1, y + 1), p21 = g.at_clamped(x, y + 1),
                p22 = g.at_clamped(x + 1, y + 1);
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      gx[i] = (p02 + 2 * p12 + p22) - (p00 + 2 * p10 + p20);
      gy[i] = (p20 + 2 * p21 + p22) - (p00 + 2 * p01 + p02);
    }
  }
}

}  // namespace

Raster edge_map(const Raster& gray) {
  Raster g = gray.channels == 3 ? lab_l(gray) : gray;
  require_gray(g, "edge_map");
  constexpr int kLow = 50, kHigh = 150;
  const int w = g.width, h = g.height;
  std::vector<int> gx, gy;
  sobel(g, gx, gy);
  std::vector<std::uint8_t> mag(g.pixel_count());
  for (std::size_t i = 0; i < mag.size(); ++i)
    mag[i] = static_cast<std::uint8_t>(
        std::min(255.0, std::hypot(static_cast<double>(gx[i]), static_cast<double>(gy[i])) / 4.0 + 0.5));

  Raster edges(w, h, 1);
  std::queue<std::pair<int, int>> q;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (mag[static_cast<std::size_t>(y) * w + x] >= kHigh) {
        edges.at(x, y) = 255;
        q.emplace(x, y);
      }
  while (!q.empty()) {
    auto [x, y] = q.front();
    q.pop();
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx, ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        if (edges.at(nx, ny)) continue;
        if (mag[static_cast<std::size_t>(ny) * w + nx] >= kLow) {
          edges.at(nx, ny) = 255;
          q.emplace(nx, ny);
        }
      }
  }
  return edges;
}

std::pair<double, double> edge_features(const Raster& r) {
  Raster g = r.channels == 3 ? lab_l(r) : r;
  Raster edges = edge_map(g);
  std::vector<int> gx, gy;
  sobel(g, gx, gy);

  std::size_t edge_count = 0, vertical = 0, horizontal = 0;
  constexpr double kDiag = 22.5 * 3.14159265358979323846 / 180.0;
  for (std::size_t i = 0; i < edges.data.size(); ++i) {
    if (!edges.data[i]) continue;
    ++edge_count;
    const double ax = std::abs(static_cast<double>(gx[i]));
    const double ay = std::abs(static_cast<double>(gy[i]));
    if (ax == 0.0 && ay == 0.0) continue;
    const double theta = std::atan2(ay, ax);  // 0 = horizontal gradient
    if (theta < kDiag)
      ++vertical;  // horizontal gradient => vertical structure
    else if (theta > 3.14159265358979323846 / 2.0 - kDiag)
      ++horizontal;
  }
  const double rho_e = edges.pixel_count() ? static_cast<double>(edge_count) / edges.pixel_count() : 0.0;
  double r_v = 0.0;
  if (horizontal > 0)
    r_v = static_cast<double>(vertical) / static_cast<double>(horizontal);
  else if (vertical > 0)
    r_v = static_cast<double>(vertical);
  return {rho_e, r_v};
}

LabStats lab_stats(const Raster& rgb) {
  Raster l = lab_l(rgb);
  Raster s = hsv_saturation(rgb);
  LabStats st;
  double sum = 0.0, sum2 = 0.0, ssum = 0.0;
  for (std::size_t i = 0; i < l.data.size(); ++i) {
    sum += l.data[i];
    sum2 += static_cast<double>(l.data[i]) * l.data[i];
    ssum += s.data[i];
  }
  const double n = static_cast<double>(l.data.size());
  st.mu_l = sum / n;
  st.sigma_l = std::sqrt(std::max(0.0, sum2 / n - st.mu_l * st.mu_l));
  st.mu_s = ssum / n;
  auto [rho_e, r_v] = edge_features(l);
  st.rho_e = rho_e;
  st.r_v = r_v;
  return st;
}

double mean_l(const Raster& rgb) {
  Raster l = rgb.channels == 3 ? lab_l(rgb) : rgb;
  double sum = 0.0;
  for (auto v : l.data) sum += v;
  return l.data.empty() ? 0.0 : sum / static_cast<double>(l.data.size());
}

}  // namespace cadenet::imaging
