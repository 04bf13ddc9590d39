#pragma once

#include <cstdint>
#include <vector>

namespace rep {

// Counter-based splittable generator. The draw sequence is a pure function
// of (seed, stream_id), so replication r can use stream_id = r and workers
// never share state. The output function is the SplitMix64 finalizer over
// a keyed counter, which is well distributed for Monte Carlo use.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }

  std::uint64_t next_u64();
  double next_double();              // uniform on [0, 1)
  double next_normal();              // standard normal (Marsaglia polar)
  std::uint64_t next_below(std::uint64_t n);  // uniform on {0, ..., n-1}

  // Derived stream for a sub-task; independent of draws made so far.
  RngStream substream(std::uint64_t k) const;

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

}  // namespace rep
