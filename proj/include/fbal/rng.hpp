#pragma once

#include <cstdint>
#include <string_view>

namespace fbal {

/// Counter-based 64-bit generator. Output k of stream (seed, stream) is a
/// pure function of (seed, stream, k), so sequences do not depend on the
/// standard library's distribution implementations or on execution order.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1); never returns 0.
  double uniform_open();
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  /// Child generator for a named consumer; independent of this generator's
  /// position in its own sequence.
  Rng split(std::string_view tag) const;
  Rng split(std::uint64_t tag) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

std::uint64_t mix64(std::uint64_t x);
/// FNV-1a; stable across platforms, used for role tags and content hashes.
std::uint64_t hash_string(std::string_view s);

}  // namespace fbal
