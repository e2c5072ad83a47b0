#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cadenet {

// Weather conditions the system distinguishes. Order is the canonical wire
// order: prompt files and slot records index conditions by this enum value.
enum class Condition : std::uint8_t { Rain = 0, Fog = 1, Sand = 2, Snow = 3, Clear = 4 };

inline constexpr std::array<Condition, 5> kAllConditions = {
    Condition::Rain, Condition::Fog, Condition::Sand, Condition::Snow, Condition::Clear};

inline constexpr std::string_view to_string(Condition c) {
  switch (c) {
    case Condition::Rain: return "rain";
    case Condition::Fog: return "fog";
    case Condition::Sand: return "sand";
    case Condition::Snow: return "snow";
    case Condition::Clear: return "clear";
  }
  return "clear";
}

inline Condition condition_from_string(std::string_view s) {
  for (Condition c : kAllConditions)
    if (s == to_string(c)) return c;
  throw std::invalid_argument("unknown weather condition: " + std::string(s));
}

// Filter-parameter fragment recommended by the embedding database (rec*).
// Negative values mean "leave the configured default alone". Trivially
// copyable so it can travel through the cross-thread slot.
struct FilterOverride {
  Condition condition = Condition::Clear;
  float clahe_clip = -1.0f;
  float inpaint_radius = -1.0f;
  float bilateral_sigma = -1.0f;
  float dcp_kernel = -1.0f;
  float atm_pct = -1.0f;
};

static_assert(std::is_trivially_copyable_v<FilterOverride>);

}  // namespace cadenet
