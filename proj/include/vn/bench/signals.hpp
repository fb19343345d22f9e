#pragma once

// 1D function-composition benchmark: four primitive families sampled on
// [0, 2pi], cross-family sums for the easy split, and nested templates for
// the hard one. Every sample carries a descriptor that re-evaluates to the
// stored values, so generators can be checked against themselves.

#include "vn/common.hpp"
#include "vn/rng.hpp"

#include <cmath>
#include <vector>

namespace vn::bench {

enum class SignalFamily { Sin, Cos, Poly, Bump };
enum class Difficulty { ID, EasyOOD, HardOOD };

struct Primitive {
  SignalFamily family = SignalFamily::Sin;
  double a = 1.0;    // amplitude, [0.5, 2]
  double f = 1.0;    // integer frequency / exponent, {1..5}
  double phi = 0.0;  // phase, [0, 2pi); unused by Poly and Bump
};

inline double eval_primitive(const Primitive& p, double t) {
  switch (p.family) {
    case SignalFamily::Sin:
      return p.a * std::sin(p.f * t + p.phi);
    case SignalFamily::Cos:
      return p.a * std::cos(p.f * t + p.phi);
    case SignalFamily::Poly:
      return p.a * std::pow(t / (2.0 * kPi), p.f);
    case SignalFamily::Bump:
      return p.a * std::exp(-0.3 * p.f * (t - kPi) * (t - kPi));
  }
  fail("eval_primitive: invalid family tag");
}

// Hard-split templates, selected by index:
//   0: sin(cos(f1 t) + f2 t/(2pi)) + a cos(f3 (t/(2pi))^2)
//   1: a cos(f1 sin(f2 t) + phi)
//   2: a exp(-0.3 f1 (t-pi)^2) sin(f2 t + phi)
inline constexpr int kHardTemplateCount = 3;

struct SignalDescriptor {
  Difficulty difficulty = Difficulty::ID;
  std::vector<Primitive> parts;  // 1 part for ID, 2 for EasyOOD, empty for HardOOD
  int hard_template = -1;
  double a = 0.0, f1 = 0.0, f2 = 0.0, f3 = 0.0, phi = 0.0;
};

inline double eval_descriptor(const SignalDescriptor& d, double t) {
  if (d.difficulty != Difficulty::HardOOD) {
    double v = 0.0;
    for (const auto& p : d.parts) v += eval_primitive(p, t);
    return v;
  }
  const double u = t / (2.0 * kPi);
  switch (d.hard_template) {
    case 0:
      return std::sin(std::cos(d.f1 * t) + d.f2 * u) + d.a * std::cos(d.f3 * u * u);
    case 1:
      return d.a * std::cos(d.f1 * std::sin(d.f2 * t) + d.phi);
    case 2:
      return d.a * std::exp(-0.3 * d.f1 * (t - kPi) * (t - kPi)) * std::sin(d.f2 * t + d.phi);
  }
  fail("eval_descriptor: invalid hard template index ", d.hard_template);
}

struct SignalSample {
  Vec t;
  Vec values;
  SignalDescriptor desc;
};

inline Vec time_grid(Index d = 512) {
  require(d >= 2, "time_grid: need at least 2 points, got ", d);
  return Vec::LinSpaced(d, 0.0, 2.0 * kPi);
}

namespace detail {

inline Primitive random_primitive(Rng& rng) {
  Primitive p;
  p.family = static_cast<SignalFamily>(rng.uniform_int(0, 3));
  p.a = rng.uniform(0.5, 2.0);
  p.f = static_cast<double>(rng.uniform_int(1, 5));
  p.phi = rng.uniform(0.0, 2.0 * kPi);
  return p;
}

}  // namespace detail

inline SignalSample sample_signal(std::uint64_t seed, Difficulty diff, Index d = 512) {
  Rng rng = Rng(seed).derive("signal");
  SignalSample s;
  s.t = time_grid(d);
  s.desc.difficulty = diff;
  switch (diff) {
    case Difficulty::ID:
      s.desc.parts.push_back(detail::random_primitive(rng));
      break;
    case Difficulty::EasyOOD: {
      const Primitive first = detail::random_primitive(rng);
      Primitive second = detail::random_primitive(rng);
      while (second.family == first.family) second = detail::random_primitive(rng);
      s.desc.parts = {first, second};
      break;
    }
    case Difficulty::HardOOD:
      s.desc.hard_template = static_cast<int>(rng.uniform_int(0, kHardTemplateCount - 1));
      s.desc.a = rng.uniform(0.5, 2.0);
      s.desc.f1 = static_cast<double>(rng.uniform_int(1, 5));
      s.desc.f2 = static_cast<double>(rng.uniform_int(1, 5));
      s.desc.f3 = static_cast<double>(rng.uniform_int(1, 5));
      s.desc.phi = rng.uniform(0.0, 2.0 * kPi);
      break;
  }
  s.values.resize(d);
  for (Index i = 0; i < d; ++i) s.values[i] = eval_descriptor(s.desc, s.t[i]);
  require(s.values.allFinite(), "sample_signal: generated non-finite values (seed ", seed, ")");
  return s;
}

}  // namespace vn::bench
