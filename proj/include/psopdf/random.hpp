#pragma once

#include <array>
#include <cstdint>
#include <optional>

namespace psopdf {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// The full state is the 64-bit key and a 128-bit counter; the top counter
/// word is reserved for the stream id so that split() yields streams that can
/// never overlap. Output is identical on every platform.
class Philox4x32 {
public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Block encrypt(Block counter, Key key);
};

class RandomStream {
public:
  explicit RandomStream(std::uint64_t seed, std::uint32_t stream_id = 0);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double low, double high) { return low + (high - low) * uniform(); }
  /// Standard normal via Box-Muller.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  bool bernoulli(double p) { return uniform() < p; }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  /// Independent child stream; this stream is left untouched.
  RandomStream split(std::uint32_t stream_id) const;

  std::uint64_t seed() const { return seed_; }
  std::uint32_t stream_id() const { return stream_id_; }
  /// Number of 128-bit blocks consumed so far.
  std::uint64_t blocks_used() const { return counter_; }

private:
  void refill();

  std::uint64_t seed_;
  std::uint32_t stream_id_;
  std::uint64_t counter_ = 0;
  Philox4x32::Block buffer_{};
  int buffered_ = 0;
  std::optional<double> spare_normal_;
};

}  // namespace psopdf
