#pragma once

// Seeded randomness. Every stream is derived from a user seed and a tuple of
// integer coordinates (replicate, level, box anchor, ...), so results never
// depend on traversal order or thread count.

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <random>

namespace sidgff {

std::uint64_t splitmix64(std::uint64_t x);

/// Hash of a seed and a coordinate tuple.
std::uint64_t derive_key(std::uint64_t seed, std::initializer_list<std::uint64_t> parts);

/// Standard normal draw that is a pure function of its key.
double keyed_normal(std::uint64_t key);
/// Uniform draw in (0, 1) that is a pure function of its key.
double keyed_uniform(std::uint64_t key);

/// Sequential stream of standard normals (ziggurat on a 64-bit Mersenne
/// twister) seeded from a derived key.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t key);
  ~NormalStream();
  NormalStream(NormalStream&&) noexcept;
  NormalStream& operator=(NormalStream&&) noexcept;

  double operator()();
  void fill(double* out, std::size_t count);
  std::mt19937_64& engine() { return engine_; }

 private:
  struct Ziggurat;
  std::mt19937_64 engine_;
  std::unique_ptr<Ziggurat> normal_;
};

}  // namespace sidgff
