#pragma once

#include <cstdint>

namespace snspec {

/// Role tag used to derive disjoint substreams from one master seed, so a
/// replication's noise draws never depend on how many k-means restarts or
/// reference draws another component consumed.
enum class StreamRole : std::uint64_t {
  Noise = 1,
  Signal = 2,
  Kmeans = 3,
  Reference = 4,
  Shuffle = 5,
};

/// Deterministic stream keyed by (master seed, replication index, role).
/// xoshiro256++ state seeded through splitmix64; all derived draws
/// (uniforms, normals) are computed from the raw 64-bit output, so a
/// stream's sequence is identical across platforms and thread schedules.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);
  static RngStream keyed(std::uint64_t master, std::uint64_t rep, StreamRole role);

  std::uint64_t next_u64();
  /// Uniform in (0, 1].
  double uniform01();
  /// Standard normal (Box-Muller).
  double normal();
  /// +1 or -1 with equal probability.
  double sign();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  /// Derive an independent child stream; does not disturb this stream's
  /// future 64-bit outputs beyond consuming one draw.
  RngStream split();

 private:
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace snspec
