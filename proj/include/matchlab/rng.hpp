#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace matchlab {

/// Random stream keyed by (seed, path). The engine state is a pure function of
/// the key, so the same key always replays the same sequence and child streams
/// can be created without touching the parent.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::vector<std::uint64_t> path = {});

  RngStream fork(std::uint64_t tag) const;

  std::uint64_t seed() const { return seed_; }
  const std::vector<std::uint64_t>& path() const { return path_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0,1) with 53 random bits.
  double uniform();
  /// Uniform on the open interval (0,1).
  double uniform_open();
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::uint64_t seed_;
  std::vector<std::uint64_t> path_;
  std::mt19937_64 engine_;
};

double gumbel_from_uniform(double u);
double gumbel_draw(RngStream& stream);

}  // namespace matchlab
