#include "vn/bench/signals.hpp"

#include <catch2/catch_amalgamated.hpp>

using vn::Index;
using vn::Vec;
namespace vb = vn::bench;

TEST_CASE("primitive families evaluate to hand values") {
  CHECK(vb::eval_primitive({vb::SignalFamily::Sin, 1.0, 1.0, 0.0}, vn::kPi / 2.0) ==
        Catch::Approx(1.0).margin(1e-12));
  CHECK(vb::eval_primitive({vb::SignalFamily::Cos, 2.0, 1.0, 0.0}, 0.0) == 2.0);
  // Gaussian-bump family peaks at t = pi with value a.
  CHECK(vb::eval_primitive({vb::SignalFamily::Bump, 1.7, 4.0, 0.0}, vn::kPi) == 1.7);
  // Polynomial at t = 2pi: a * 1^f = a.
  CHECK(vb::eval_primitive({vb::SignalFamily::Poly, 0.9, 3.0, 0.0}, 2.0 * vn::kPi) ==
        Catch::Approx(0.9).margin(1e-15));
}

TEST_CASE("time grid spans [0, 2pi] inclusively") {
  const Vec t = vb::time_grid(512);
  REQUIRE(t.size() == 512);
  CHECK(t[0] == 0.0);
  CHECK(t[511] == Catch::Approx(2.0 * vn::kPi).margin(1e-15));
  CHECK((t.tail(511) - t.head(511)).minCoeff() > 0.0);
  CHECK_THROWS_AS(vb::time_grid(1), vn::Error);
}

TEST_CASE("samples are reproducible from their seed and vary across seeds") {
  const auto a = vb::sample_signal(42, vb::Difficulty::ID);
  const auto b = vb::sample_signal(42, vb::Difficulty::ID);
  REQUIRE(a.values.size() == 512);
  CHECK((a.values.array() == b.values.array()).all());

  const auto c = vb::sample_signal(43, vb::Difficulty::ID);
  CHECK((a.values - c.values).lpNorm<Eigen::Infinity>() > 0.0);
}

TEST_CASE("ID samples carry one primitive whose re-evaluation matches the stored values") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = vb::sample_signal(seed, vb::Difficulty::ID);
    REQUIRE(s.desc.parts.size() == 1);
    const auto& p = s.desc.parts[0];
    CHECK(p.a >= 0.5);
    CHECK(p.a <= 2.0);
    CHECK(p.f >= 1.0);
    CHECK(p.f <= 5.0);
    CHECK(p.f == std::floor(p.f));
    for (Index i = 0; i < s.t.size(); i += 37)
      CHECK(s.values[i] == vb::eval_primitive(p, s.t[i]));
  }
}

TEST_CASE("easy-OOD samples are sums of two primitives from distinct families") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = vb::sample_signal(seed, vb::Difficulty::EasyOOD);
    REQUIRE(s.desc.parts.size() == 2);
    CHECK(s.desc.parts[0].family != s.desc.parts[1].family);
    double max_dev = 0.0;
    for (Index i = 0; i < s.t.size(); ++i) {
      const double manual =
          vb::eval_primitive(s.desc.parts[0], s.t[i]) + vb::eval_primitive(s.desc.parts[1], s.t[i]);
      max_dev = std::max(max_dev, std::abs(s.values[i] - manual));
    }
    CHECK(max_dev <= 1e-12);
  }
}

TEST_CASE("hard-OOD samples follow their template formula") {
  bool saw_template0 = false;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto s = vb::sample_signal(seed, vb::Difficulty::HardOOD);
    REQUIRE(s.desc.hard_template >= 0);
    REQUIRE(s.desc.hard_template < vb::kHardTemplateCount);
    saw_template0 = saw_template0 || s.desc.hard_template == 0;
    CHECK(s.values.allFinite());

    if (s.desc.hard_template == 0) {
      // Independent transcription of the nested template.
      const auto& d = s.desc;
      for (Index i = 0; i < s.t.size(); i += 53) {
        const double t = s.t[i];
        const double u = t / (2.0 * vn::kPi);
        const double manual =
            std::sin(std::cos(d.f1 * t) + d.f2 * u) + d.a * std::cos(d.f3 * u * u);
        CHECK(s.values[i] == Catch::Approx(manual).margin(1e-14));
      }
    }
  }
  CHECK(saw_template0);
}

TEST_CASE("polynomial family stays bounded by its amplitude on the domain") {
  vn::Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    vb::Primitive p{vb::SignalFamily::Poly, rng.uniform(0.5, 2.0),
                    static_cast<double>(rng.uniform_int(1, 5)), 0.0};
    const Vec t = vb::time_grid(256);
    for (Index i = 0; i < t.size(); ++i) {
      const double v = vb::eval_primitive(p, t[i]);
      CHECK(v >= 0.0);
      CHECK(v <= p.a + 1e-12);
    }
  }
}
