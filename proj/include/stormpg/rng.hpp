#pragma once

#include <cstdint>

namespace stormpg {

/// Counter-based random stream. Draw k of a stream with key K is a pure
/// function of (K, k), so streams can be split by index and consumed on any
/// thread without changing results.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : key_(mix(key)) {}

  /// Child stream for `index` under `master`; independent of draw order.
  static RngStream derive(std::uint64_t master, std::uint64_t index);
  static std::uint64_t derive_key(std::uint64_t master, std::uint64_t index);

  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  /// Standard normal via Box-Muller; consumes exactly two draws.
  double normal();

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  static std::uint64_t mix(std::uint64_t z);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace stormpg
