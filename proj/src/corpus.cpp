#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "cadenet/eval.hpp"
#include "cadenet/raster_io.hpp"

namespace fs = std::filesystem;

namespace cadenet::eval {

namespace {

struct Palette {
  std::array<int, 3> outer;
  std::array<int, 3> inner;
};

// Outer rings carry a (near-)zero colour channel so the scenes exercise the
// dark-channel prior; inner rectangles give each box internal contrast.
constexpr std::array<Palette, 4> kPalettes = {{
    {{200, 0, 0}, {255, 96, 32}},
    {{0, 170, 40}, {96, 255, 128}},
    {{0, 60, 200}, {120, 160, 255}},
    {{30, 30, 30}, {210, 210, 210}},
}};

struct ObjState {
  double x, y;
  int w, h;
  double vx, vy;
  int palette;
};

struct SceneState {
  int width, height, sky_h;
  std::uint64_t noise_seed;
  std::vector<ObjState> objects;
};

inline std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint8_t clamp8(double v) {
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0) + 0.5);
}

SceneState make_state(std::uint64_t seed, int w, int h) {
  SceneState st;
  st.width = w;
  st.height = h;
  st.sky_h = h / 8;
  st.noise_seed = mix(seed ^ 0xabcdef12345ull);
  std::mt19937_64 g(seed);
  std::uniform_int_distribution<int> count(3, 5);
  std::uniform_int_distribution<int> size(24, 46);
  std::uniform_real_distribution<double> vel(-2.0, 2.0);
  const int n = count(g);
  std::uniform_int_distribution<int> px(4, std::max(5, w - 52));
  std::uniform_int_distribution<int> py(st.sky_h + 8, std::max(st.sky_h + 9, h - 52));
  std::uniform_int_distribution<int> pal(0, 3);
  for (int i = 0; i < n && static_cast<int>(st.objects.size()) < n;) {
    ObjState o;
    o.w = size(g);
    o.h = size(g);
    o.x = px(g);
    o.y = py(g);
    o.vx = vel(g);
    o.vy = vel(g);
    o.palette = pal(g);
    bool overlaps = false;
    for (const auto& e : st.objects)
      if (o.x < e.x + e.w + 6 && e.x < o.x + o.w + 6 && o.y < e.y + e.h + 6 &&
          e.y < o.y + o.h + 6) {
        overlaps = true;
        break;
      }
    ++i;  // bounded retries: a failed placement still consumes an attempt
    if (!overlaps) st.objects.push_back(o);
  }
  if (st.objects.empty()) {
    st.objects.push_back({static_cast<double>(w / 3), static_cast<double>(h / 2), 32, 32, 1.0,
                          0.5, 0});
  }
  return st;
}

Raster render(const SceneState& st) {
  Raster r(st.width, st.height, 3);
  for (int y = 0; y < st.height; ++y) {
    for (int x = 0; x < st.width; ++x) {
      if (y < st.sky_h) {
        for (int c = 0; c < 3; ++c)
          r.at(x, y, c) = static_cast<std::uint8_t>(kAtmosphere[c]);
      } else {
        const int noise =
            static_cast<int>(mix(st.noise_seed ^ (static_cast<std::uint64_t>(y) * 8191 + x)) % 13) -
            6;
        const std::uint8_t v = clamp8(118 + noise);
        r.at(x, y, 0) = r.at(x, y, 1) = r.at(x, y, 2) = v;
      }
    }
  }
  for (const auto& o : st.objects) {
    const int x0 = static_cast<int>(o.x), y0 = static_cast<int>(o.y);
    const Palette& p = kPalettes[o.palette];
    for (int y = y0; y < std::min(st.height, y0 + o.h); ++y)
      for (int x = x0; x < std::min(st.width, x0 + o.w); ++x) {
        const bool inner = x >= x0 + o.w / 4 && x < x0 + o.w - o.w / 4 && y >= y0 + o.h / 4 &&
                           y < y0 + o.h - o.h / 4;
        const auto& col = inner ? p.inner : p.outer;
        for (int c = 0; c < 3; ++c) r.at(x, y, c) = static_cast<std::uint8_t>(col[c]);
      }
  }
  return r;
}

std::vector<geometry::LabeledBox> boxes_of(const SceneState& st) {
  std::vector<geometry::LabeledBox> out;
  for (const auto& o : st.objects) {
    geometry::LabeledBox b;
    b.class_id = 0;
    b.box = {o.x, o.y, std::min<double>(st.width, o.x + o.w), std::min<double>(st.height, o.y + o.h)};
    out.push_back(b);
  }
  return out;
}

Raster degrade(const Raster& clean, Condition cond, double severity, std::uint64_t seed,
               double* t0_out) {
  if (t0_out) *t0_out = 1.0;
  switch (cond) {
    case Condition::Fog: {
      const double t0 = 1.0 - 0.7 * severity;
      if (t0_out) *t0_out = t0;
      return apply_fog(clean, t0);
    }
    case Condition::Rain: {
      Raster out = clean;
      std::mt19937_64 g(mix(seed ^ 0x5a5a5aull));
      const int n = static_cast<int>(12 + 70 * severity);
      std::uniform_int_distribution<int> sx(0, clean.width - 3), sy(0, clean.height / 2);
      std::uniform_int_distribution<int> len(18, std::max(20, clean.height / 2));
      std::uniform_int_distribution<int> wid(1, 2), lift(55, 95);
      for (int i = 0; i < n; ++i) {
        const int x0 = sx(g), y0 = sy(g), l = len(g), wd = wid(g), up = lift(g);
        for (int y = y0; y < std::min(clean.height, y0 + l); ++y)
          for (int dx = 0; dx < wd; ++dx)
            for (int c = 0; c < 3; ++c)
              out.at(x0 + dx, y, c) =
                  clamp8(static_cast<double>(out.at(x0 + dx, y, c)) + up);
      }
      return out;
    }
    case Condition::Sand: {
      Raster out = clean;
      const std::array<double, 3> mean = {150.0, 135.0, 110.0};
      const double keep = 1.0 - 0.7 * severity;
      for (std::size_t i = 0; i < out.pixel_count(); ++i)
        for (int c = 0; c < 3; ++c)
          out.data[3 * i + c] = clamp8(mean[c] + (out.data[3 * i + c] - mean[c]) * keep);
      return out;
    }
    case Condition::Snow: {
      Raster out = clean;
      const double lift = 0.6 * severity;
      for (auto& v : out.data) v = clamp8(v + (235.0 - v) * lift);
      return out;
    }
    case Condition::Clear:
      return clean;
  }
  return clean;
}

}  // namespace

Raster apply_fog(const Raster& clean, double t0, std::array<int, 3> atmo) {
  Raster out = clean;
  for (std::size_t i = 0; i < out.pixel_count(); ++i)
    for (int c = 0; c < out.channels; ++c)
      out.data[out.channels * i + c] =
          clamp8(clean.data[out.channels * i + c] * t0 + atmo[c] * (1.0 - t0));
  return out;
}

SyntheticScene make_scene(std::uint64_t seed, Condition condition, double severity, int width,
                          int height) {
  SceneState st = make_state(seed, width, height);
  SyntheticScene scene;
  scene.clean = render(st);
  scene.boxes = boxes_of(st);
  scene.condition = condition;
  scene.severity = severity;
  scene.degraded = degrade(scene.clean, condition, severity, seed, &scene.t0);
  return scene;
}

std::vector<SyntheticScene> make_sequence(std::uint64_t seed, int frames, Condition condition,
                                          double severity, int width, int height) {
  SceneState st = make_state(seed, width, height);
  std::vector<SyntheticScene> out;
  out.reserve(frames);
  for (int f = 0; f < frames; ++f) {
    SyntheticScene scene;
    scene.clean = render(st);
    scene.boxes = boxes_of(st);
    scene.condition = condition;
    scene.severity = severity;
    scene.degraded = degrade(scene.clean, condition, severity, seed + 977 * f, &scene.t0);
    out.push_back(std::move(scene));
    for (auto& o : st.objects) {
      o.x += o.vx;
      o.y += o.vy;
      if (o.x < 2 || o.x + o.w > width - 2) o.vx = -o.vx;
      if (o.y < st.sky_h + 2 || o.y + o.h > height - 2) o.vy = -o.vy;
      o.x = std::clamp(o.x, 2.0, static_cast<double>(width - o.w - 2));
      o.y = std::clamp(o.y, static_cast<double>(st.sky_h + 2),
                       static_cast<double>(height - o.h - 2));
    }
  }
  return out;
}

void generate_corpus(const std::string& dir, int n, const std::vector<Condition>& conditions,
                     double severity_lo, double severity_hi, std::uint64_t seed) {
  if (conditions.empty()) throw std::invalid_argument("generate_corpus: no conditions");
  fs::create_directories(dir);
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> sev(severity_lo, severity_hi);
  std::ofstream labels(fs::path(dir) / "labels.txt");

  for (int i = 0; i < n; ++i) {
    const Condition cond = conditions[static_cast<std::size_t>(i) % conditions.size()];
    const double severity = sev(g);
    SyntheticScene scene = make_scene(seed * 1000003ull + i, cond, severity);

    char stem[32];
    std::snprintf(stem, sizeof(stem), "img_%04d", i);
    const std::string image_name = std::string(stem) + ".ppm";
    io::write_ppm((fs::path(dir) / image_name).string(), scene.degraded);

    std::ofstream xml(fs::path(dir) / (std::string(stem) + ".xml"));
    xml << "<annotation>\n  <filename>" << image_name << "</filename>\n  <size><width>"
        << scene.degraded.width << "</width><height>" << scene.degraded.height
        << "</height><depth>3</depth></size>\n";
    for (const auto& b : scene.boxes) {
      xml << "  <object>\n    <name>object</name>\n    <bndbox>"
          << "<xmin>" << static_cast<int>(b.box.x1) << "</xmin>"
          << "<ymin>" << static_cast<int>(b.box.y1) << "</ymin>"
          << "<xmax>" << static_cast<int>(b.box.x2) << "</xmax>"
          << "<ymax>" << static_cast<int>(b.box.y2) << "</ymax>"
          << "</bndbox>\n  </object>\n";
    }
    xml << "</annotation>\n";

    char sevbuf[16];
    std::snprintf(sevbuf, sizeof(sevbuf), "%.3f", severity);
    labels << stem << " " << to_string(cond) << " " << sevbuf << "\n";
  }
}

}  // namespace cadenet::eval
