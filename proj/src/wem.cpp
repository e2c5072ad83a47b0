#include "cadenet/wem.hpp"

#include <algorithm>
#include <array>

namespace cadenet::wem {

namespace {

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Margin of a "value < threshold" conjunct, normalized by the threshold.
inline double below(double value, double threshold) {
  return clamp01((threshold - value) / threshold);
}

// Margin of a "value > threshold" conjunct, normalized by `scale`.
inline double above(double value, double threshold, double scale) {
  return clamp01((value - threshold) / scale);
}

}  // namespace

double severity_for(Condition c, const imaging::LabStats& s) {
  switch (c) {
    case Condition::Fog: return clamp01(1.0 - s.sigma_l / 35.0);
    case Condition::Rain: return clamp01((s.r_v - 3.0) / 3.0);
    case Condition::Sand: return clamp01(1.0 - s.mu_s / 40.0);
    case Condition::Snow: return clamp01(1.0 - s.sigma_l / 35.0);
    case Condition::Clear: return 0.0;
  }
  return 0.0;
}

WeatherEstimate classify(const imaging::LabStats& s) {
  std::array<double, 5> score{};  // indexed by Condition
  score[static_cast<int>(Condition::Fog)] =
      std::min(below(s.sigma_l, 35.0), below(s.rho_e, 0.1));
  score[static_cast<int>(Condition::Rain)] =
      std::min(above(s.r_v, 3.0, 3.0), below(s.mu_s, 60.0));
  score[static_cast<int>(Condition::Sand)] =
      std::min(below(s.mu_s, 40.0), below(s.sigma_l, 45.0));

  int best = 0;
  for (int i = 1; i < 5; ++i)
    if (score[i] > score[best]) best = i;

  WeatherEstimate est;
  if (score[best] <= 0.0) {
    est.condition = Condition::Clear;
    est.severity = 0.0;
    est.spread = 0.0;
    return est;
  }
  double second = 0.0;
  for (int i = 0; i < 5; ++i)
    if (i != best) second = std::max(second, score[i]);
  est.condition = static_cast<Condition>(best);
  est.severity = severity_for(est.condition, s);
  est.spread = score[best] - second;
  return est;
}

WeatherEstimate resolve(const WeatherEstimate& est, const std::optional<SlotRecord>& slot,
                        double spread_thresh) {
  if (est.spread >= spread_thresh || !slot.has_value()) return est;
  WeatherEstimate out = est;
  out.condition = slot->clip_label;
  out.source = EstimateSource::Slot;
  return out;
}

}  // namespace cadenet::wem
