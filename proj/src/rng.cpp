#include "rep/rng.hpp"

#include <cmath>

namespace rep {

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_(stream_id) {
  key_ = mix64(seed + 0x9e3779b97f4a7c15ULL) ^
         mix64(stream_id + 0xd1b54a32d192ed03ULL);
}

std::uint64_t RngStream::next_u64() {
  counter_ += 0x9e3779b97f4a7c15ULL;
  return mix64(counter_ ^ key_);
}

double RngStream::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  double u, v, s;
  do {
    u = 2.0 * next_double() - 1.0;
    v = 2.0 * next_double() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  double f = std::sqrt(-2.0 * std::log(s) / s);
  cached_normal_ = v * f;
  has_cached_normal_ = true;
  return u * f;
}

std::uint64_t RngStream::next_below(std::uint64_t n) {
  if (n <= 1) return 0;
  // Rejection to avoid modulo bias.
  std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t r;
  do {
    r = next_u64();
  } while (r >= limit);
  return r % n;
}

RngStream RngStream::substream(std::uint64_t k) const {
  return RngStream(seed_, mix64(stream_ + 0x9e3779b97f4a7c15ULL) + k);
}

}  // namespace rep
