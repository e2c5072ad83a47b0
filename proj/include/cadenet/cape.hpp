#pragma once

#include <Eigen/Core>
#include <array>
#include <string>
#include <utility>
#include <vector>

#include "cadenet/raster.hpp"
#include "cadenet/types.hpp"
#include "cadenet/wem.hpp"

namespace cadenet::cape {

struct RainParams {
  std::string inpaint_method = "TELEA";
  int inpaint_radius = 3;
  double clahe_clip = 1.5;
  int bilateral_d = 5;
  double bilateral_sigma = 40.0;
  int streak_thresh = 8;   // Stage-1 threshold on the median residual
  int median_kernel = 5;   // Stage-1 median window
};

struct FogParams {
  std::string method = "DCP";
  int dcp_kernel = 15;
  double atm_pct = 0.001;
  double post_clahe_clip = 2.0;
};

struct ClaheParams {
  double clahe_clip = 2.0;
};

struct FilterConfig {
  RainParams rain;
  FogParams fog;
  ClaheParams sand;
  ClaheParams snow;
  // Nighttime brightness gate (off by default): route fog to CLAHE when
  // mu_L < night_theta. Negative disables.
  double night_theta = -1.0;

  void validate() const;  // throws std::invalid_argument naming the bad key
};

// Parse a config file; missing keys fall back to the defaults above.
// Malformed values raise an error naming the offending key.
FilterConfig load_config(const std::string& path);
FilterConfig config_from_json_text(const std::string& text, const std::string& origin = "config");
std::string config_to_json_text(const FilterConfig& cfg);

// Apply a recommendation fragment on top of a config (negative fields are
// left alone). Only the group matching the fragment's condition changes.
FilterConfig apply_override(FilterConfig cfg, const FilterOverride& rec);

// The inverse view: the parameters a config would apply for a condition,
// packed as an override fragment (for slot records and SED entries).
FilterOverride override_from_config(const FilterConfig& cfg, Condition c);

struct EnhanceReport {
  Condition condition = Condition::Clear;
  double severity = 0.0;
  double rho_rain = 0.0;  // rain only
  double alpha = 0.0;     // fog only
  std::vector<std::pair<std::string, double>> stage_ms;
};

// alpha(s) = 0.5 + 0.4 s.
double alpha_for_severity(double s);
// gamma(mu_L) = clamp(130 / max(mu_L, 30), 1.05, 1.40).
double gamma_for_brightness(double mu_l);

// Condition dispatch: rain -> derain, fog -> dehaze_dcp, sand/snow -> CLAHE
// on the L plane, clear -> identity copy.
std::pair<Raster, EnhanceReport> enhance(const Raster& frame, const wem::WeatherEstimate& est,
                                         const FilterConfig& cfg);

// 5-stage morphological derain: streak mask (median residual, vertical
// opening), selective TELEA inpaint / median blend, conditional gamma,
// L-channel CLAHE, bilateral smoothing.
std::pair<Raster, EnhanceReport> derain(const Raster& frame, double s, const RainParams& p);

// Dark-channel-prior dehaze with severity-continuous strength followed by
// L-channel CLAHE. Throws on a degenerate black frame (A^c = 0).
std::pair<Raster, EnhanceReport> dehaze_dcp(const Raster& frame, double s, const FogParams& p);

// DCP internals exposed for verification: transmission estimate (before and
// after the [0.1, 1] clamp regime is applied it is already clamped here),
// per-channel atmospheric light, and the recovered frame without post-CLAHE.
struct DcpResult {
  Raster recovered;
  Eigen::MatrixXf transmission;      // clamped to [0.1, 1]
  std::array<double, 3> atmo{};      // 0..255 scale
};
DcpResult dcp_core(const Raster& frame, double alpha, int kernel, double atm_pct);

// Stage-1 of the derain branch in isolation: the opened streak mask and the
// rain pixel fraction.
std::pair<Raster, double> rain_streak_mask(const Raster& frame, const RainParams& p);

}  // namespace cadenet::cape
