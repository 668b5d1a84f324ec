#include "sidgff/rng.hpp"

#include <boost/random/normal_distribution.hpp>
#include <cmath>
#include <numbers>

namespace sidgff {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_key(std::uint64_t seed, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = splitmix64(seed ^ 0x5DF1A3C7E2B94D01ULL);
  for (std::uint64_t p : parts) {
    h = splitmix64(h ^ splitmix64(p + 0x632BE59BD9B4E019ULL));
  }
  return h;
}

double keyed_uniform(std::uint64_t key) {
  // 53 random bits mapped into the open unit interval.
  return (static_cast<double>(splitmix64(key) >> 11) + 0.5) * 0x1.0p-53;
}

double keyed_normal(std::uint64_t key) {
  const double u1 = keyed_uniform(key);
  const double u2 = keyed_uniform(key ^ 0xA5A5A5A5A5A5A5A5ULL);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

struct NormalStream::Ziggurat {
  boost::random::normal_distribution<double> dist;
};

NormalStream::NormalStream(std::uint64_t key)
    : engine_(key), normal_(std::make_unique<Ziggurat>()) {}

NormalStream::~NormalStream() = default;
NormalStream::NormalStream(NormalStream&&) noexcept = default;
NormalStream& NormalStream::operator=(NormalStream&&) noexcept = default;

double NormalStream::operator()() { return normal_->dist(engine_); }

void NormalStream::fill(double* out, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = normal_->dist(engine_);
  }
}

}  // namespace sidgff
