#pragma once

#include <array>
#include <cstdint>

namespace spad {

/// Philox4x32-10 counter-based generator (Salmon et al., "Parallel random
/// numbers: as easy as 1, 2, 3", SC'11).
///
/// This is the fixed generator for stream format version SBS1. Changing it
/// changes every simulated stream, so it must not change within a format
/// version.
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key);

/// Independent draw streams sharing one (seed, frame, pixel) address.
enum class DrawStream : std::uint32_t {
  spad_detection = 1,
  conventional_shot = 2,
  conventional_read = 3,
  scene_texture = 4,
};

/// Sequential uniform/normal/Poisson draws addressed by (seed, frame, pixel).
///
/// Every address yields its own reproducible sequence, so the result never
/// depends on the order in which pixels or frames are evaluated.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, DrawStream stream, std::uint64_t frame, std::uint64_t pixel);

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller.
  double normal();
  /// Poisson variate: inversion for small means, PTRS (Hormann 1993) otherwise.
  std::uint64_t poisson(double mean);

 private:
  void refill();

  PhiloxKey key_;
  PhiloxCounter base_;
  std::uint32_t block_ = 0;
  PhiloxCounter out_{};
  int used_ = 4;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

/// Single uniform in [0, 1) for one address; the fast path used per bit.
double uniform_at(std::uint64_t seed, DrawStream stream, std::uint64_t frame,
                  std::uint64_t pixel);

}  // namespace spad
