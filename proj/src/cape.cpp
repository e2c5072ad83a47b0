#include "cadenet/cape.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "cadenet/imaging.hpp"
#include "json.hpp"

namespace cadenet::cape {

using json = nlohmann::json;

namespace {

using clock = std::chrono::steady_clock;

double ms_since(clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
}

inline std::uint8_t clamp_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0) + 0.5);
}

// Sliding-window minimum (monotonic deque), one axis at a time.
void min_filter_1d(const std::vector<float>& in, std::vector<float>& out, int n, int stride,
                   int count, int radius) {
  std::deque<int> q;
  for (int c = 0; c < count; ++c) {
    q.clear();
    const int base = c * (stride == 1 ? n : 1);
    auto idx = [&](int i) { return stride == 1 ? base + i : base + i * stride; };
    for (int i = 0; i < n + radius; ++i) {
      if (i < n) {
        while (!q.empty() && in[idx(q.back())] >= in[idx(i)]) q.pop_back();
        q.push_back(i);
      }
      const int o = i - radius;
      if (o >= 0) {
        while (q.front() < o - radius) q.pop_front();
        out[idx(o)] = in[idx(q.front())];
      }
    }
  }
}

void min_filter_2d(std::vector<float>& buf, int w, int h, int radius) {
  std::vector<float> tmp(buf.size());
  min_filter_1d(buf, tmp, w, 1, h, radius);   // rows
  min_filter_1d(tmp, buf, h, w, w, radius);   // columns
}

double require_positive(const json& j, const char* group, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number())
    throw std::invalid_argument(std::string("config: ") + group + "." + key + " must be a number");
  const double v = j.at(key).get<double>();
  if (v <= 0)
    throw std::invalid_argument(std::string("config: ") + group + "." + key + " must be positive");
  return v;
}

std::string string_or(const json& j, const char* group, const char* key, std::string fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string())
    throw std::invalid_argument(std::string("config: ") + group + "." + key + " must be a string");
  return j.at(key).get<std::string>();
}

}  // namespace

void FilterConfig::validate() const {
  if (rain.inpaint_radius <= 0) throw std::invalid_argument("config: rain.inpaint_radius must be positive");
  if (rain.clahe_clip <= 0) throw std::invalid_argument("config: rain.clahe_clip must be positive");
  if (rain.bilateral_d <= 0 || rain.bilateral_d % 2 == 0)
    throw std::invalid_argument("config: rain.bilateral_d must be odd and positive");
  if (rain.bilateral_sigma <= 0) throw std::invalid_argument("config: rain.bilateral_sigma must be positive");
  if (rain.streak_thresh <= 0) throw std::invalid_argument("config: rain.streak_thresh must be positive");
  if (rain.median_kernel <= 0 || rain.median_kernel % 2 == 0)
    throw std::invalid_argument("config: rain.median_kernel must be odd and positive");
  if (fog.dcp_kernel <= 0) throw std::invalid_argument("config: fog.dcp_kernel must be positive");
  if (!(fog.atm_pct > 0.0 && fog.atm_pct < 1.0))
    throw std::invalid_argument("config: fog.atm_pct must be in (0,1)");
  if (fog.post_clahe_clip <= 0) throw std::invalid_argument("config: fog.post_clahe_clip must be positive");
  if (sand.clahe_clip <= 0) throw std::invalid_argument("config: sand.clahe_clip must be positive");
  if (snow.clahe_clip <= 0) throw std::invalid_argument("config: snow.clahe_clip must be positive");
}

FilterConfig config_from_json_text(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(origin + ": " + e.what());
  }
  FilterConfig cfg;
  if (j.contains("rain")) {
    const json& r = j.at("rain");
    cfg.rain.inpaint_method = string_or(r, "rain", "inpaint_method", cfg.rain.inpaint_method);
    cfg.rain.inpaint_radius =
        static_cast<int>(require_positive(r, "rain", "inpaint_radius", cfg.rain.inpaint_radius));
    cfg.rain.clahe_clip = require_positive(r, "rain", "clahe_clip", cfg.rain.clahe_clip);
    cfg.rain.bilateral_d =
        static_cast<int>(require_positive(r, "rain", "bilateral_d", cfg.rain.bilateral_d));
    cfg.rain.bilateral_sigma = require_positive(r, "rain", "bilateral_sigma", cfg.rain.bilateral_sigma);
    cfg.rain.streak_thresh =
        static_cast<int>(require_positive(r, "rain", "streak_thresh", cfg.rain.streak_thresh));
    cfg.rain.median_kernel =
        static_cast<int>(require_positive(r, "rain", "median_kernel", cfg.rain.median_kernel));
  }
  if (j.contains("fog")) {
    const json& f = j.at("fog");
    cfg.fog.method = string_or(f, "fog", "method", cfg.fog.method);
    cfg.fog.dcp_kernel = static_cast<int>(require_positive(f, "fog", "dcp_kernel", cfg.fog.dcp_kernel));
    cfg.fog.atm_pct = require_positive(f, "fog", "atm_pct", cfg.fog.atm_pct);
    cfg.fog.post_clahe_clip = require_positive(f, "fog", "post_clahe_clip", cfg.fog.post_clahe_clip);
  }
  if (j.contains("sand"))
    cfg.sand.clahe_clip = require_positive(j.at("sand"), "sand", "clahe_clip", cfg.sand.clahe_clip);
  if (j.contains("snow"))
    cfg.snow.clahe_clip = require_positive(j.at("snow"), "snow", "clahe_clip", cfg.snow.clahe_clip);
  if (j.contains("night_theta")) cfg.night_theta = j.at("night_theta").get<double>();
  cfg.validate();
  return cfg;
}

FilterConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json_text(ss.str(), path);
}

std::string config_to_json_text(const FilterConfig& cfg) {
  json j;
  j["rain"] = {{"inpaint_method", cfg.rain.inpaint_method},
               {"inpaint_radius", cfg.rain.inpaint_radius},
               {"clahe_clip", cfg.rain.clahe_clip},
               {"bilateral_d", cfg.rain.bilateral_d},
               {"bilateral_sigma", cfg.rain.bilateral_sigma},
               {"streak_thresh", cfg.rain.streak_thresh},
               {"median_kernel", cfg.rain.median_kernel}};
  j["fog"] = {{"method", cfg.fog.method},
              {"dcp_kernel", cfg.fog.dcp_kernel},
              {"atm_pct", cfg.fog.atm_pct},
              {"post_clahe_clip", cfg.fog.post_clahe_clip}};
  j["sand"] = {{"clahe_clip", cfg.sand.clahe_clip}};
  j["snow"] = {{"clahe_clip", cfg.snow.clahe_clip}};
  if (cfg.night_theta >= 0) j["night_theta"] = cfg.night_theta;
  return j.dump(2) + "\n";
}

FilterConfig apply_override(FilterConfig cfg, const FilterOverride& rec) {
  switch (rec.condition) {
    case Condition::Rain:
      if (rec.clahe_clip > 0) cfg.rain.clahe_clip = rec.clahe_clip;
      if (rec.inpaint_radius > 0) cfg.rain.inpaint_radius = static_cast<int>(std::lround(rec.inpaint_radius));
      if (rec.bilateral_sigma > 0) cfg.rain.bilateral_sigma = rec.bilateral_sigma;
      break;
    case Condition::Fog:
      if (rec.dcp_kernel > 0) cfg.fog.dcp_kernel = static_cast<int>(std::lround(rec.dcp_kernel));
      if (rec.atm_pct > 0) cfg.fog.atm_pct = rec.atm_pct;
      break;
    case Condition::Sand:
      if (rec.clahe_clip > 0) cfg.sand.clahe_clip = rec.clahe_clip;
      break;
    case Condition::Snow:
      if (rec.clahe_clip > 0) cfg.snow.clahe_clip = rec.clahe_clip;
      break;
    case Condition::Clear:
      break;
  }
  return cfg;
}

FilterOverride override_from_config(const FilterConfig& cfg, Condition c) {
  FilterOverride o;
  o.condition = c;
  switch (c) {
    case Condition::Rain:
      o.clahe_clip = static_cast<float>(cfg.rain.clahe_clip);
      o.inpaint_radius = static_cast<float>(cfg.rain.inpaint_radius);
      o.bilateral_sigma = static_cast<float>(cfg.rain.bilateral_sigma);
      break;
    case Condition::Fog:
      o.dcp_kernel = static_cast<float>(cfg.fog.dcp_kernel);
      o.atm_pct = static_cast<float>(cfg.fog.atm_pct);
      break;
    case Condition::Sand:
      o.clahe_clip = static_cast<float>(cfg.sand.clahe_clip);
      break;
    case Condition::Snow:
      o.clahe_clip = static_cast<float>(cfg.snow.clahe_clip);
      break;
    case Condition::Clear:
      break;
  }
  return o;
}

double alpha_for_severity(double s) { return 0.5 + 0.4 * s; }

double gamma_for_brightness(double mu_l) {
  return std::clamp(130.0 / std::max(mu_l, 30.0), 1.05, 1.40);
}

std::pair<Raster, double> rain_streak_mask(const Raster& frame, const RainParams& p) {
  Raster l = frame.channels == 3 ? imaging::lab_l(frame) : frame;
  Raster med = imaging::median_filter(l, p.median_kernel);
  Raster mask(l.width, l.height, 1);
  for (std::size_t i = 0; i < l.data.size(); ++i)
    mask.data[i] = (static_cast<int>(l.data[i]) - static_cast<int>(med.data[i]) > p.streak_thresh)
                       ? 255
                       : 0;
  Raster opened = imaging::morph_open_vertical(mask, 7);
  std::size_t on = 0;
  for (auto v : opened.data)
    if (v) ++on;
  const double rho = static_cast<double>(on) / static_cast<double>(opened.pixel_count());
  return {std::move(opened), rho};
}

std::pair<Raster, EnhanceReport> derain(const Raster& frame, double s, const RainParams& p) {
  frame.validate();
  EnhanceReport rep;
  rep.condition = Condition::Rain;
  rep.severity = s;

  auto t0 = clock::now();
  auto [mask, rho] = rain_streak_mask(frame, p);
  rep.rho_rain = rho;
  rep.stage_ms.emplace_back("streak_mask", ms_since(t0));

  t0 = clock::now();
  Raster cur = frame;
  if (rho > 0.001 && rho < 0.30) {
    cur = imaging::telea_inpaint(frame, mask, p.inpaint_radius);
  } else if (rho >= 0.30) {
    // Heavy rain: median blend on masked pixels only.
    Raster med = imaging::median_filter(frame, p.median_kernel);
    for (int y = 0; y < cur.height; ++y)
      for (int x = 0; x < cur.width; ++x)
        if (mask.at(x, y))
          for (int c = 0; c < cur.channels; ++c)
            cur.at(x, y, c) = clamp_u8(0.5 * frame.at(x, y, c) + 0.5 * med.at(x, y, c));
  }
  rep.stage_ms.emplace_back("inpaint", ms_since(t0));

  t0 = clock::now();
  Raster l = frame.channels == 3 ? imaging::lab_l(cur) : cur;
  double mu = 0.0;
  for (auto v : l.data) mu += v;
  mu /= static_cast<double>(l.data.size());
  if (mu < 130.0) l = imaging::gamma_correct(l, gamma_for_brightness(mu));
  rep.stage_ms.emplace_back("gamma", ms_since(t0));

  t0 = clock::now();
  l = imaging::clahe(l, p.clahe_clip);
  rep.stage_ms.emplace_back("clahe", ms_since(t0));

  t0 = clock::now();
  Raster out = frame.channels == 3 ? imaging::with_lab_l(cur, l) : l;
  out = imaging::bilateral(out, p.bilateral_d, p.bilateral_sigma);
  rep.stage_ms.emplace_back("bilateral", ms_since(t0));
  return {std::move(out), std::move(rep)};
}

DcpResult dcp_core(const Raster& frame, double alpha, int kernel, double atm_pct) {
  frame.validate();
  if (frame.channels != 3) throw std::invalid_argument("dcp: 3-channel input required");
  if (kernel < 1) throw std::invalid_argument("dcp: kernel must be >= 1");
  if (!(atm_pct > 0.0 && atm_pct < 1.0)) throw std::invalid_argument("dcp: atm_pct must be in (0,1)");

  const int w = frame.width, h = frame.height;
  const std::size_t n = frame.pixel_count();
  const int radius = kernel / 2;

  // Dark channel: per-pixel channel minimum, then patch minimum.
  std::vector<float> dark(n);
  for (std::size_t i = 0; i < n; ++i)
    dark[i] = static_cast<float>(
        std::min({frame.data[3 * i], frame.data[3 * i + 1], frame.data[3 * i + 2]}));
  min_filter_2d(dark, w, h, radius);

  // Atmospheric light: mean intensity of the top atm_pct pixels by dark value.
  const std::size_t take = std::max<std::size_t>(1, static_cast<std::size_t>(
      std::ceil(atm_pct * static_cast<double>(n))));
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::nth_element(order.begin(), order.begin() + take - 1, order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return dark[a] > dark[b]; });
  std::array<double, 3> atmo{};
  for (std::size_t k = 0; k < take; ++k)
    for (int c = 0; c < 3; ++c) atmo[c] += frame.data[3 * order[k] + c];
  for (int c = 0; c < 3; ++c) {
    atmo[c] /= static_cast<double>(take);
    if (atmo[c] <= 0.0) throw std::runtime_error("dcp: degenerate black frame (A^c = 0)");
  }

  // Transmission: T = 1 - alpha * min-filtered min_c(I^c/A^c), clamped.
  std::vector<float> normdark(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = frame.data[3 * i] / atmo[0];
    const double g = frame.data[3 * i + 1] / atmo[1];
    const double b = frame.data[3 * i + 2] / atmo[2];
    normdark[i] = static_cast<float>(std::min({r, g, b}));
  }
  min_filter_2d(normdark, w, h, radius);

  DcpResult res;
  res.atmo = atmo;
  res.transmission.resize(h, w);
  res.recovered = Raster(w, h, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double t = std::clamp(1.0 - alpha * normdark[i], 0.1, 1.0);
      res.transmission(y, x) = static_cast<float>(t);
      for (int c = 0; c < 3; ++c) {
        const double j = (frame.data[3 * i + c] - atmo[c]) / t + atmo[c];
        res.recovered.data[3 * i + c] = clamp_u8(j);
      }
    }
  }
  return res;
}

std::pair<Raster, EnhanceReport> dehaze_dcp(const Raster& frame, double s, const FogParams& p) {
  EnhanceReport rep;
  rep.condition = Condition::Fog;
  rep.severity = s;
  rep.alpha = alpha_for_severity(s);

  auto t0 = clock::now();
  DcpResult res = dcp_core(frame, rep.alpha, p.dcp_kernel, p.atm_pct);
  rep.stage_ms.emplace_back("dcp", ms_since(t0));

  t0 = clock::now();
  Raster l = imaging::lab_l(res.recovered);
  l = imaging::clahe(l, p.post_clahe_clip);
  Raster out = imaging::with_lab_l(res.recovered, l);
  rep.stage_ms.emplace_back("post_clahe", ms_since(t0));
  return {std::move(out), std::move(rep)};
}

namespace {

std::pair<Raster, EnhanceReport> clahe_branch(const Raster& frame, Condition cond, double s,
                                              double clip) {
  EnhanceReport rep;
  rep.condition = cond;
  rep.severity = s;
  auto t0 = clock::now();
  Raster out;
  if (frame.channels == 3) {
    Raster l = imaging::lab_l(frame);
    l = imaging::clahe(l, clip);
    out = imaging::with_lab_l(frame, l);
  } else {
    out = imaging::clahe(frame, clip);
  }
  rep.stage_ms.emplace_back("clahe", ms_since(t0));
  return {std::move(out), std::move(rep)};
}

}  // namespace

std::pair<Raster, EnhanceReport> enhance(const Raster& frame, const wem::WeatherEstimate& est,
                                         const FilterConfig& cfg) {
  frame.validate();
  switch (est.condition) {
    case Condition::Rain:
      return derain(frame, est.severity, cfg.rain);
    case Condition::Fog:
      if (cfg.night_theta >= 0.0 && imaging::mean_l(frame) < cfg.night_theta)
        return clahe_branch(frame, Condition::Fog, est.severity, cfg.fog.post_clahe_clip);
      return dehaze_dcp(frame, est.severity, cfg.fog);
    case Condition::Sand:
      return clahe_branch(frame, Condition::Sand, est.severity, cfg.sand.clahe_clip);
    case Condition::Snow:
      return clahe_branch(frame, Condition::Snow, est.severity, cfg.snow.clahe_clip);
    case Condition::Clear:
      break;
  }
  EnhanceReport rep;
  rep.condition = Condition::Clear;
  rep.severity = est.severity;
  rep.stage_ms.emplace_back("identity", 0.0);
  return {frame, std::move(rep)};
}

}  // namespace cadenet::cape
