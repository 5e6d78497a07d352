#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

namespace citebias {

// Raised when an input document violates its schema or a cross-record
// invariant. The message names the offending record and field.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised for environment and transport failures (I/O, network, credentials).
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace util {

// 64-bit FNV-1a. Stable across platforms and runs; used only to derive
// RNG streams, never as a content digest.
constexpr std::uint64_t Fnv1a(std::string_view bytes,
                              std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t Mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// SplitMix64 generator with portable bounded/real draws. The standard
// library distributions are implementation-defined, which would break
// cross-platform reproducibility of seeded runs.
class StableRng {
 public:
  explicit StableRng(std::uint64_t seed) : state_(seed) {}

  // Stream keyed by a seed and an arbitrary label, e.g. a ref_id.
  StableRng(std::uint64_t seed, std::string_view label)
      : state_(Mix64(seed ^ Fnv1a(label))) {}

  std::uint64_t Next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, bound). Rejection sampling, no modulo bias.
  std::uint64_t Bounded(std::uint64_t bound);

  // Uniform in [0, 1) with 53 bits of precision.
  double Uniform01() { return static_cast<double>(Next() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller.
  double Normal();

 private:
  std::uint64_t state_;
};

// Lowercase hex SHA-256 of the given bytes.
std::string Sha256Hex(std::string_view bytes);

std::string ReadFile(const std::filesystem::path& path);

// Writes via a sibling temp file and rename, so readers never observe a
// partially written file.
void WriteFileAtomic(const std::filesystem::path& path, std::string_view data);

// Formats a double with the shortest round-trippable representation.
std::string FormatDouble(double v);

}  // namespace util
}  // namespace citebias
