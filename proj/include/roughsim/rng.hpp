#pragma once

// Philox4x64-10 counter-based generator and seed lineage.

#include <array>
#include <cstdint>

namespace roughsim {

using PhiloxCounter = std::array<std::uint64_t, 4>;
using PhiloxKey = std::array<std::uint64_t, 2>;

/// One Philox4x64 block with 10 rounds.
PhiloxCounter philox4x64_10(PhiloxCounter ctr, PhiloxKey key) noexcept;

/// Stream of draws for the lineage (master_seed, path_id, stream_id).
///
/// Block b of the stream is philox(counter = {b, stream_id, 0, 0},
/// key = {master_seed, path_id}), so any draw is a pure function of the
/// lineage tuple and its index.
class SeedLineage {
 public:
  SeedLineage(std::uint64_t master_seed, std::uint64_t path_id, std::uint64_t stream_id = 0) noexcept;

  std::uint64_t master_seed() const noexcept { return key_[0]; }
  std::uint64_t path_id() const noexcept { return key_[1]; }
  std::uint64_t stream_id() const noexcept { return stream_; }

  std::uint64_t next_u64() noexcept {
    if (pos_ == 4) refill();
    return buf_[pos_++];
  }
  /// Uniform on [0, 1).
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  /// Uniform on (0, 1).
  double uniform_open() noexcept { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }
  /// Standard normal via Box-Muller; pairs are cached.
  double normal() noexcept;
  /// +1 or -1 with equal probability.
  double rademacher() noexcept { return (next_u64() >> 63) ? 1.0 : -1.0; }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;

  /// Total 64-bit words consumed.
  std::uint64_t words_used() const noexcept { return 4 * block_ - (4 - pos_); }

 private:
  void refill() noexcept;

  PhiloxKey key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  PhiloxCounter buf_{};
  unsigned pos_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace roughsim
