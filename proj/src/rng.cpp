#include "matchlab/rng.hpp"

#include <cmath>
#include <numbers>

namespace matchlab {

namespace {

std::mt19937_64 keyed_engine(std::uint64_t seed, const std::vector<std::uint64_t>& path) {
  // seed_seq output is fully specified by the standard, so the key -> state map
  // is portable. Path length is mixed in to keep (s,[a]) and (s,[a,0]) apart.
  std::vector<std::uint32_t> words;
  words.reserve(2 * path.size() + 3);
  words.push_back(static_cast<std::uint32_t>(seed));
  words.push_back(static_cast<std::uint32_t>(seed >> 32));
  words.push_back(static_cast<std::uint32_t>(path.size()));
  for (auto p : path) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::vector<std::uint64_t> path)
    : seed_(seed), path_(std::move(path)), engine_(keyed_engine(seed_, path_)) {}

RngStream RngStream::fork(std::uint64_t tag) const {
  auto p = path_;
  p.push_back(tag);
  return RngStream(seed_, std::move(p));
}

double RngStream::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double RngStream::uniform_open() {
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
  // Box-Muller, one variate per call
  double u1 = uniform_open();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double gumbel_from_uniform(double u) { return -std::log(-std::log(u)); }

double gumbel_draw(RngStream& stream) { return gumbel_from_uniform(stream.uniform_open()); }

}  // namespace matchlab
