#include "vn/inference.hpp"

#include "test_util.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace vn;

namespace {

// Small dense chain: dims like 10 -> 8 -> 6 with given atom counts.
NetworkParams make_chain(Rng rng, const std::vector<Index>& widths, const std::vector<Index>& atoms,
                         double lambda = 0.08) {
  NetworkParams net;
  const auto L = atoms.size();
  for (std::size_t l = 0; l < L; ++l) {
    const Index d = widths[l];
    const Index m = l + 1 < L ? widths[l + 1] : 0;
    auto p = vnt::random_layer(rng.derive("chain-layer", l), d, m, atoms[l], lambda);
    net.layers.push_back(std::move(p));
  }
  return net;
}

SettleConfig tight() {
  SettleConfig cfg;
  cfg.max_sweeps = 20000;
  cfg.tol = 1e-15;
  return cfg;
}

}  // namespace

TEST_CASE("single-layer settle reproduces manual prox iteration") {
  Rng rng(31);
  auto p = vnt::random_layer(rng, 12, 0, 20, 0.1);
  p.eta_bottom = 0.04;  // fixed so the manual loop uses the identical step
  NetworkParams net{{p}};
  const Vec x = rng.normal_vec(12);

  SettleConfig cfg;
  cfg.max_sweeps = 25;
  cfg.tol = 1e-300;
  cfg.accelerate = false;
  cfg.reject_increasing = false;
  const auto res = settle(net, x, cfg);

  Vec g = Vec::Zero(20);
  LayerInput in{x, std::nullopt};
  for (int i = 0; i < 25; ++i) g = layer_step(p, in, g, 0.04);
  REQUIRE((res.codes[0] - g).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("zero input settles to zero codes in one sweep") {
  Rng rng(32);
  auto net = make_chain(rng, {10, 8, 6}, {14, 11, 9});
  const auto res = settle(net, Vec::Zero(10), SettleConfig{});
  REQUIRE(res.sweeps_used == 1);
  REQUIRE(res.converged);
  REQUIRE(res.energy_trace.size() == 1);
  REQUIRE(res.energy_trace[0] == 0.0);
  for (const auto& g : res.codes) REQUIRE(g.isZero(0.0));
}

TEST_CASE("one-atom layer settles to the closed form") {
  Rng rng(33);
  for (int trial = 0; trial < 10; ++trial) {
    auto p = vnt::random_layer(rng.derive("one-atom", trial), 5, 0, 1, 0.3);
    NetworkParams net{{p}};
    const Vec x = rng.normal_vec(5);
    const auto res = settle(net, x, tight());
    const double expect = [&] {
      const double corr = p.S.col(0).dot(x);
      const double mag = std::abs(corr) - 0.3;
      return mag > 0.0 ? (corr < 0.0 ? -mag : mag) : 0.0;
    }();
    REQUIRE(res.codes[0][0] == Catch::Approx(expect).margin(1e-10));
  }
}

TEST_CASE("orthonormal dictionary settles to elementwise soft threshold") {
  Rng rng(34);
  const Mat base = rng.normal_mat(8, 8);
  const Mat q = Eigen::HouseholderQR<Mat>(base).householderQ();
  LayerParams p;
  p.dims = {8, 0, 8};
  p.S = q;
  p.lambda = 0.2;
  NetworkParams net{{p}};
  const Vec x = rng.normal_vec(8);
  const auto res = settle(net, x, tight());
  const Vec expect = soft_threshold(q.transpose() * x, 0.2);
  // energy-based stopping leaves code error around sqrt(tol)
  REQUIRE((res.codes[0] - expect).lpNorm<Eigen::Infinity>() < 1e-7);
}

TEST_CASE("vanishing l1 weight recovers the least-squares reconstruction") {
  Rng rng(35);
  auto p = vnt::random_layer(rng, 12, 0, 6, 1e-9);
  NetworkParams net{{p}};
  const Vec x = rng.normal_vec(12);
  const auto res = settle(net, x, tight());
  const Vec proj = p.S * (p.S.transpose() * p.S).ldlt().solve(p.S.transpose() * x);
  REQUIRE((p.S * res.codes[0] - proj).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("accepted energy trace never increases") {
  Rng rng(36);
  for (const bool accel : {false, true}) {
    for (int trial = 0; trial < 8; ++trial) {
      auto net = make_chain(rng.derive("trace", trial * 2 + accel), {10, 8, 6}, {16, 12, 9});
      SettleConfig cfg;
      cfg.max_sweeps = 60;
      cfg.tol = 1e-10;
      cfg.accelerate = accel;
      const Vec x = rng.normal_vec(10);
      const auto res = settle(net, x, cfg);
      REQUIRE(!res.energy_trace.empty());
      for (std::size_t i = 1; i < res.energy_trace.size(); ++i)
        REQUIRE(res.energy_trace[i] <= res.energy_trace[i - 1]);
      REQUIRE(res.sweeps_used <= 60);
      for (std::size_t l = 0; l < 3; ++l)
        REQUIRE(res.codes[l].size() == net.layers[l].dims.K);
    }
  }
}

TEST_CASE("reported energy matches the per-layer definition") {
  Rng rng(37);
  auto net = make_chain(rng, {10, 8, 6}, {16, 12, 9});
  net.layers[2].U = random_unit_columns(rng, 4, 9);  // supervised head on top
  net.layers[2].dims.m = 4;
  const Vec x = rng.normal_vec(10);
  const Vec label = rng.normal_vec(4);

  for (const bool clamp : {false, true}) {
    const auto res = settle(net, x, SettleConfig{},
                            clamp ? std::optional<Vec>(label) : std::nullopt);
    double total = 0.0;
    for (std::size_t l = 0; l < 3; ++l)
      total += layer_energy(net.layers[l], res.layer_inputs[l], res.codes[l]);
    REQUIRE(total == Catch::Approx(res.energy_trace.back()).epsilon(1e-9).margin(1e-12));
    REQUIRE(res.layer_inputs[2].h_target.has_value() == clamp);
    if (clamp) REQUIRE((*res.layer_inputs[2].h_target - label).isZero(0.0));
    // every non-top layer got a top-down target during the sweep
    REQUIRE(res.layer_inputs[0].h_target.has_value());
    REQUIRE(res.layer_inputs[1].h_target.has_value());
  }
}

TEST_CASE("acceleration reaches a no-worse energy than plain iteration") {
  Rng rng(38);
  auto p = vnt::random_layer(rng, 40, 0, 80, 0.08);
  NetworkParams net{{p}};
  const Vec x = rng.normal_vec(40);

  SettleConfig run;
  run.max_sweeps = 100;
  run.tol = 1e-300;
  run.reject_increasing = false;
  run.accelerate = false;
  const double e_ista = settle(net, x, run).energy_trace.back();
  run.accelerate = true;
  const double e_fista = settle(net, x, run).energy_trace.back();

  const double e_star = settle(net, x, tight()).energy_trace.back();
  REQUIRE(e_fista - e_star <= (e_ista - e_star) + 1e-12);
}

TEST_CASE("warm start resumes at the settled energy") {
  Rng rng(39);
  auto net = make_chain(rng, {10, 8, 6}, {16, 12, 9});
  const Vec x = rng.normal_vec(10);
  const auto first = settle(net, x, SettleConfig{});

  SettleConfig cfg;
  cfg.warm_start = first.codes;
  const auto second = settle(net, x, cfg);
  REQUIRE(second.energy_trace.back() <= first.energy_trace.back() + 1e-12);
  // targets still rebuild over sweeps, but a warm start should not be slower
  REQUIRE(second.sweeps_used <= first.sweeps_used);
}

TEST_CASE("hard cap bounds the active set") {
  Rng rng(40);
  auto p = vnt::random_layer(rng, 16, 0, 48, 0.01);
  p.k_top = 3;
  NetworkParams net{{p}};
  const auto res = settle(net, rng.normal_vec(16), tight());
  REQUIRE((res.codes[0].array() != 0.0).count() <= 3);
}

TEST_CASE("cache reuse is bit-identical to fresh settles") {
  Rng rng(41);
  auto net = make_chain(rng, {10, 8, 6}, {16, 12, 9});
  NetCache cache(net);
  const Vec x = rng.normal_vec(10);
  const auto a = settle(cache, x, SettleConfig{});
  const auto b = settle(cache, x, SettleConfig{});
  const auto c = settle(net, x, SettleConfig{});
  for (std::size_t l = 0; l < 3; ++l) {
    REQUIRE((a.codes[l].array() == b.codes[l].array()).all());
    REQUIRE((a.codes[l].array() == c.codes[l].array()).all());
  }
}

TEST_CASE("network validation reports the broken coupling") {
  Rng rng(42);
  auto net = make_chain(rng, {10, 8, 6}, {16, 12, 9});
  net.layers[0].dims.m = 7;
  net.layers[0].U = random_unit_columns(rng, 7, 16);
  REQUIRE_THROWS_WITH(net.validate(), Catch::Matchers::ContainsSubstring("layer 0") &&
                                          Catch::Matchers::ContainsSubstring("layer 1"));
  NetworkParams empty;
  REQUIRE_THROWS_AS(empty.validate(), Error);
}

TEST_CASE("masks have the documented shape") {
  Rng rng(43);
  SECTION("forecast hides the exact trailing fraction") {
    Rng r = rng.derive("m1");
    const Vec m = make_mask(512, MaskSpec::from_name("forecast_25"), r);
    REQUIRE(m.size() == 512);
    REQUIRE(m.head(384).minCoeff() == 1.0);
    REQUIRE(m.tail(128).maxCoeff() == 0.0);
  }
  SECTION("rounding on odd lengths") {
    Rng r = rng.derive("m2");
    const Vec m = make_mask(511, MaskSpec::forecast(0.5), r);
    REQUIRE(static_cast<Index>((m.array() == 0.0).count()) == 256);  // llround(255.5)
  }
  SECTION("random hides an exact count") {
    Rng r = rng.derive("m3");
    const Vec m = make_mask(512, MaskSpec::from_name("random_30"), r);
    REQUIRE(static_cast<Index>((m.array() == 0.0).count()) == 154);  // llround(153.6)
  }
  SECTION("block is contiguous with exact length") {
    Rng r = rng.derive("m4");
    const Vec m = make_mask(512, MaskSpec::from_name("block_128"), r);
    REQUIRE(static_cast<Index>((m.array() == 0.0).count()) == 128);
    Index first = -1, last = -1;
    for (Index i = 0; i < 512; ++i)
      if (m[i] == 0.0) {
        if (first < 0) first = i;
        last = i;
      }
    REQUIRE(last - first + 1 == 128);
  }
  SECTION("same stream gives the same mask") {
    Rng r1 = rng.derive("m5"), r2 = rng.derive("m5");
    const Vec a = make_mask(64, MaskSpec::random(0.3), r1);
    const Vec b = make_mask(64, MaskSpec::random(0.3), r2);
    REQUIRE((a.array() == b.array()).all());
  }
  Rng r = rng.derive("m6");
  REQUIRE_THROWS_AS(make_mask(64, MaskSpec::block(65), r), Error);
  REQUIRE_THROWS_AS(make_mask(64, MaskSpec::forecast(1.5), r), Error);
}

TEST_CASE("fully observed mask reproduces the plain settle exactly") {
  Rng rng(44);
  auto net = make_chain(rng, {10, 8, 6}, {16, 12, 9});
  const Vec x = rng.normal_vec(10);
  const auto plain = settle(net, x, SettleConfig{});
  const auto masked = masked_settle(net, x, Vec::Ones(10), SettleConfig{}, 5);
  const Vec synth = net.layers[0].S * plain.codes[0];
  REQUIRE((masked.x_hat.array() == synth.array()).all());
  for (std::size_t l = 0; l < 3; ++l)
    REQUIRE((masked.settle.codes[l].array() == plain.codes[l].array()).all());
}

TEST_CASE("fill-in iterations do not increase the masked objective") {
  Rng rng(45);
  for (int trial = 0; trial < 5; ++trial) {
    Rng tr = rng.derive("masked", trial);
    auto p = vnt::random_layer(tr, 48, 0, 64, 0.05);
    NetworkParams net{{p}};
    // sparse ground truth so imputation has structure to latch onto
    Vec g_true = Vec::Zero(64);
    for (int i = 0; i < 5; ++i) g_true[tr.uniform_int(0, 63)] = tr.normal(0.0, 2.0);
    const Vec x = p.S * g_true;
    Rng mr = tr.derive("mask");
    const Vec mask = make_mask(48, MaskSpec::random(0.3), mr);

    NetCache cache(net);
    double prev = std::numeric_limits<double>::infinity();
    for (int outer = 0; outer <= 5; ++outer) {
      const auto res = masked_settle(cache, x, mask, tight(), outer);
      const double obj = masked_objective(net, x, mask, res.settle.codes[0]);
      REQUIRE(obj <= prev + 1e-12);
      prev = obj;
    }
  }
}
