#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <type_traits>

#include "cadenet/types.hpp"

namespace cadenet {

// Single-writer single-reader seqlock slot. The writer publishes a complete
// record with release ordering; the reader either observes the latest
// complete record or "empty", and never a torn one. The reader retries only
// while a write is in flight.
template <typename T>
  requires std::is_trivially_copyable_v<T>
class AtomicSlot {
 public:
  void store(const T& v) noexcept {
    const std::uint64_t s = seq_.load(std::memory_order_relaxed);
    seq_.store(s + 1, std::memory_order_relaxed);  // odd: write in progress
    std::atomic_thread_fence(std::memory_order_release);
    value_ = v;
    std::atomic_thread_fence(std::memory_order_release);
    seq_.store(s + 2, std::memory_order_release);
  }

  std::optional<T> load() const noexcept {
    for (;;) {
      const std::uint64_t s0 = seq_.load(std::memory_order_acquire);
      if (s0 == 0) return std::nullopt;  // never written
      if (s0 & 1) continue;
      T out = value_;
      std::atomic_thread_fence(std::memory_order_acquire);
      const std::uint64_t s1 = seq_.load(std::memory_order_relaxed);
      if (s0 == s1) return out;
    }
  }

  bool written() const noexcept { return seq_.load(std::memory_order_acquire) != 0; }

 private:
  std::atomic<std::uint64_t> seq_{0};
  T value_{};
};

// The record Thread E publishes for Thread Q: zero-shot weather label,
// per-prompt scores, and an optional filter recommendation (rec*).
struct SlotRecord {
  std::uint64_t version = 0;  // strictly increases per write
  Condition clip_label = Condition::Clear;
  std::int32_t n_scores = 0;
  float clip_scores[8] = {};
  std::uint8_t has_rec = 0;
  FilterOverride rec{};
};

static_assert(std::is_trivially_copyable_v<SlotRecord>);

}  // namespace cadenet
