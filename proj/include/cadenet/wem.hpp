#pragma once

#include <optional>

#include "cadenet/imaging.hpp"
#include "cadenet/slot.hpp"
#include "cadenet/types.hpp"

namespace cadenet::wem {

enum class EstimateSource : std::uint8_t { Heuristic, Slot };

struct WeatherEstimate {
  Condition condition = Condition::Clear;
  double severity = 0.0;  // in [0,1]
  double spread = 0.0;    // top-2 score spread, >= 0
  EstimateSource source = EstimateSource::Heuristic;
};

// Threshold rules on the five frame features:
//   fog:  sigma_L < 35 and rho_e < 0.1
//   rain: r_v > 3.0 and mu_S < 60
//   sand: mu_S < 40 and sigma_L < 45   (the haze rule; routed to CLAHE)
// Each rule scores as the clamped minimum margin of its conjuncts, the
// condition is the argmax and the spread is top1 - top2. No rule firing
// means clear with severity 0. There is no snow heuristic; snow is reachable
// only through the slot label.
WeatherEstimate classify(const imaging::LabStats& stats);

// Leading-feature severity for a given condition (clamped to [0,1]):
// fog 1 - sigma_L/35, rain (r_v - 3)/3, sand 1 - mu_S/40. Snow borrows the
// contrast-loss recipe (1 - sigma_L/35); clear is 0.
double severity_for(Condition c, const imaging::LabStats& stats);

// Slot disambiguation: when the heuristic spread is below `spread_thresh`
// and the slot holds a record, take its condition label (severity is kept).
WeatherEstimate resolve(const WeatherEstimate& est, const std::optional<SlotRecord>& slot,
                        double spread_thresh = 0.15);

}  // namespace cadenet::wem
