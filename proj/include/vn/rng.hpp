#pragma once

// Counter-based deterministic RNG. One manifest seed; every stochastic site
// derives its own stream by hashing (seed, purpose label, index), so adding
// or reordering sites never perturbs the draws of existing ones. Sampling is
// implemented here rather than via <random> distributions because their
// output is not pinned across standard library versions.

#include "vn/common.hpp"

#include <cmath>
#include <string_view>

namespace vn {

namespace detail {

inline constexpr std::uint64_t kSplitmixGamma = 0x9e3779b97f4a7c15ULL;

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

class Rng {
 public:
  explicit Rng(std::uint64_t seed)
      : root_(detail::mix64(seed + detail::kSplitmixGamma)), state_(root_) {}

  // Independent substream for a named purpose; `index` distinguishes
  // per-sample or per-column streams under the same label. Derivation hashes
  // the stream's origin, not its consumed position, so a site's draws never
  // depend on how much the parent has been used.
  Rng derive(std::string_view label, std::uint64_t index = 0) const {
    std::uint64_t s = root_;
    s = detail::mix64(s ^ detail::fnv1a(label));
    s = detail::mix64(s ^ (index + detail::kSplitmixGamma));
    return Rng(FromState{}, s);
  }

  std::uint64_t next_u64() {
    state_ += detail::kSplitmixGamma;
    return detail::mix64(state_);
  }

  // [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive range, unbiased enough for dataset sizes (Lemire reduction)
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    require(lo <= hi, "uniform_int: empty range [", lo, ", ", hi, "]");
    const auto range = static_cast<std::uint64_t>(hi - lo) + 1;
    const auto r = static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * range) >> 64);
    return lo + static_cast<std::int64_t>(r);
  }

  // Box-Muller; the spare value is cached so draws come in deterministic pairs.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  Vec normal_vec(Index n, double stddev = 1.0) {
    Vec v(n);
    for (Index i = 0; i < n; ++i) v[i] = stddev * normal();
    return v;
  }

  Mat normal_mat(Index rows, Index cols, double stddev = 1.0) {
    Mat m(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) m(i, j) = stddev * normal();
    return m;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::int64_t i = static_cast<std::int64_t>(v.size()) - 1; i > 0; --i)
      std::swap(v[static_cast<std::size_t>(i)],
                v[static_cast<std::size_t>(uniform_int(0, i))]);
  }

 private:
  struct FromState {};
  Rng(FromState, std::uint64_t state) : root_(state), state_(state) {}
  std::uint64_t root_;
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace vn
