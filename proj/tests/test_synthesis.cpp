#include "vn/synthesis.hpp"

#include "test_util.hpp"

#include <catch2/catch_amalgamated.hpp>

using vn::Index;
using vn::Mat;
using vn::Vec;

namespace {

// Independent route: accumulate the rank-1 pieces one atom at a time.
Mat sum_of_atoms(const Mat& u, const Mat& s, const Vec& g) {
  Mat w = Mat::Zero(u.rows(), s.rows());
  for (Index i = 0; i < g.size(); ++i) w += g[i] * u.col(i) * s.col(i).transpose();
  return w;
}

vn::LayerParams layer_with_interface(vn::Rng rng, Index d, Index m, Index K) {
  vn::LayerParams p;
  p.dims = {d, m, K};
  p.S = vn::random_unit_columns(rng, d, K);
  p.U = vn::random_unit_columns(rng, m, K);
  return p;
}

}  // namespace

TEST_CASE("synthesized operator is the code-weighted sum of atom outer products") {
  vn::Rng rng(701);
  const auto p = layer_with_interface(rng.derive("layer"), 6, 5, 10);
  const Vec g = rng.derive("code").normal_vec(10);

  const auto op = vn::synthesize(p, g);
  const Mat w = op.materialize();
  CHECK((w - sum_of_atoms(*p.U, p.S, g)).lpNorm<Eigen::Infinity>() < 1e-12);

  const Vec x = rng.derive("input").normal_vec(6);
  CHECK((op.apply(x) - w * x).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("single-atom synthesis reproduces the outer product by hand") {
  vn::LayerParams p;
  p.dims = {2, 2, 1};
  p.S.resize(2, 1);
  p.S << 0.0, 1.0;
  p.U.emplace(2, 1);
  *p.U << 1.0, 0.0;

  Vec g(1);
  g << 2.0;
  const Mat w = vn::synthesize(p, g).materialize();
  Mat expected(2, 2);
  expected << 0.0, 2.0, 0.0, 0.0;
  CHECK((w - expected).lpNorm<Eigen::Infinity>() == 0.0);

  CHECK(vn::synthesize(p, Vec::Zero(1)).materialize().isZero(0.0));
}

TEST_CASE("synthesize rejects layers without an interface dictionary") {
  vn::LayerParams p;
  p.dims = {4, 0, 3};
  vn::Rng rng(3);
  p.S = vn::random_unit_columns(rng, 4, 3);
  CHECK_THROWS_AS(vn::synthesize(p, Vec::Zero(3)), vn::Error);
  const auto q = layer_with_interface(vn::Rng(4), 4, 4, 3);
  CHECK_THROWS_AS(vn::synthesize(q, Vec::Zero(5)), vn::Error);
}

TEST_CASE("factored and materialized forms agree for large-magnitude codes") {
  vn::Rng rng(702);
  const auto p = layer_with_interface(rng.derive("layer"), 8, 7, 12);
  Vec g = rng.derive("code").normal_vec(12) * 1e3;
  const auto op = vn::synthesize(p, g);
  const Vec x = rng.derive("input").normal_vec(8);
  // Relative agreement: the sum couples terms of magnitude ~1e3.
  const double scale = op.apply(x).lpNorm<Eigen::Infinity>();
  CHECK((op.apply(x) - op.materialize() * x).lpNorm<Eigen::Infinity>() < 1e-12 * std::max(scale, 1.0));
}

TEST_CASE("numerical rank counts active atoms in general position") {
  vn::Rng rng(703);
  const auto p = layer_with_interface(rng.derive("layer"), 9, 8, 14);

  Vec g = Vec::Zero(14);
  g[3] = 1.25;
  CHECK(vn::numerical_rank(vn::synthesize(p, g)) == 1);

  CHECK(vn::numerical_rank(vn::synthesize(p, Vec::Zero(14))) == 0);

  // Two atoms sharing one u direction still give rank 1.
  vn::LayerParams tied = p;
  tied.U->col(5) = tied.U->col(3);
  Vec g2 = Vec::Zero(14);
  g2[3] = 1.0;
  g2[5] = -0.5;
  CHECK(vn::numerical_rank(vn::synthesize(tied, g2)) == 1);

  CHECK_THROWS_AS(vn::numerical_rank(vn::synthesize(p, g), 0.0), vn::Error);
}

TEST_CASE("settled codes under a top-k cap synthesize operators within the rank bound") {
  vn::Rng rng(704);
  vn::LayerParams p = layer_with_interface(rng.derive("layer"), 10, 8, 24);
  p.k_top = 4;
  p.lambda = 0.05;
  const vn::NetworkParams net{{p}};
  const vn::NetCache cache(net);

  for (int trial = 0; trial < 100; ++trial) {
    const Vec x = rng.derive("x", trial).normal_vec(10);
    const auto res = vn::settle(cache, x, {});
    const Vec& g = res.codes[0];
    const Index l0 = (g.array() != 0.0).count();
    REQUIRE(l0 <= 4);
    REQUIRE(vn::numerical_rank(vn::synthesize(p, g)) <= l0);
  }
}

TEST_CASE("mutual coherence matches the pairwise definition") {
  vn::Rng rng = vn::Rng(705).derive("dict");
  const Mat d = vn::random_unit_columns(rng, 16, 32);

  double expected = 0.0;
  for (Index i = 0; i < 32; ++i)
    for (Index j = 0; j < 32; ++j)
      if (i != j)
        expected = std::max(
            expected, std::abs(d.col(i).dot(d.col(j))) / (d.col(i).norm() * d.col(j).norm()));

  const double mu = vn::mutual_coherence(d);
  CHECK(std::abs(mu - expected) < 1e-12);
  CHECK(mu >= 0.0);
  CHECK(mu <= 1.0);
}

TEST_CASE("mutual coherence hits the extremes on orthonormal and duplicated columns") {
  const Mat q = Mat::Identity(6, 6);
  CHECK(vn::mutual_coherence(q) < 1e-15);

  Mat dup(4, 3);
  dup.col(0) = Vec::Unit(4, 0);
  dup.col(1) = Vec::Unit(4, 0);
  dup.col(2) = Vec::Unit(4, 2);
  CHECK(vn::mutual_coherence(dup) == Catch::Approx(1.0).margin(1e-15));

  CHECK_THROWS_AS(vn::mutual_coherence(Mat::Ones(4, 1)), vn::Error);
  Mat z = Mat::Identity(4, 3);
  z.col(1).setZero();
  CHECK_THROWS_AS(vn::mutual_coherence(z), vn::Error);
}

TEST_CASE("input-conditioned atom responses inherit the coherence of the synthesis dictionary") {
  // The per-input maps x -> (s_i^T x) u_i differ from u_i only by scale, so
  // their pairwise coherence collapses to mu(U) whenever every response is
  // nonzero.
  vn::Rng rng(706);
  const auto p = layer_with_interface(rng.derive("layer"), 12, 9, 20);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec x = rng.derive("x", trial).normal_vec(12);
    const Vec resp = p.S.transpose() * x;
    REQUIRE(resp.array().abs().minCoeff() > 0.0);
    const Mat phi = (*p.U) * resp.asDiagonal();
    CHECK(std::abs(vn::mutual_coherence(phi) - vn::mutual_coherence(*p.U)) < 1e-10);
  }
}

TEST_CASE("synthesis is additive over codes") {
  vn::Rng rng(707);
  const auto p = layer_with_interface(rng.derive("layer"), 10, 6, 15);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec g1 = rng.derive("g1", trial).normal_vec(15);
    const Vec g2 = rng.derive("g2", trial).normal_vec(15);
    CHECK(vn::superposition_check(p, g1, g2) <= 1e-12);
  }
  CHECK(vn::superposition_check(p, rng.derive("g").normal_vec(15), Vec::Zero(15)) == 0.0);

  // At entries around 1e6 cancellation costs ~1e-10 of absolute accuracy;
  // the guarantee degrades gracefully rather than exactly.
  const Vec big1 = rng.derive("big1").normal_vec(15) * 1e6;
  const Vec big2 = rng.derive("big2").normal_vec(15) * 1e6;
  CHECK(vn::superposition_check(p, big1, big2) <= 1e-6);
}

TEST_CASE("recovery succeeds for orthonormal dictionaries and 1-sparse codes") {
  // Square orthonormal case: coherence ~0 within float error, every k passes.
  // recovery_trial draws its own dictionary, so exercise k=1 noiseless where
  // the coherence bound holds for any drawn dictionary with mu < 1.
  int successes = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto r = vn::recovery_trial(16, 24, 1, 0.0, seed);
    REQUIRE(r.bound_satisfied);
    successes += r.success ? 1 : 0;
  }
  CHECK(successes == 200);
}

TEST_CASE("recovery reports coherence and the support-size bound") {
  const auto r = vn::recovery_trial(24, 48, 3, 0.0, 12345);
  CHECK(r.mu > 0.0);
  CHECK(r.mu < 1.0);
  CHECK(r.bound_satisfied == (3.0 < 0.5 * (1.0 + 1.0 / r.mu)));
  CHECK(r.lambda > 0.0);

  CHECK_THROWS_AS(vn::recovery_trial(8, 12, -1, 0.0, 1), vn::Error);
  CHECK_THROWS_AS(vn::recovery_trial(8, 12, 13, 0.0, 1), vn::Error);

  // k = 0 picks the largest support size inside the bound.
  for (std::uint64_t seed = 100; seed < 110; ++seed)
    CHECK(vn::recovery_trial(48, 64, 0, 0.0, seed).bound_satisfied);
}

TEST_CASE("noisy recovery uses the universal threshold and still finds well-separated supports") {
  // sigma=0.02 against coefficients >= 0.5 in a mildly coherent dictionary.
  int successes = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed)
    successes += vn::recovery_trial(32, 40, 2, 0.02, seed).success ? 1 : 0;
  CHECK(successes >= 38);
}

TEST_CASE("near-duplicate atoms inside the support defeat recovery") {
  // Direct adversarial construction: two almost-identical columns both carry
  // weight, so the settle can answer with either one. Support equality fails.
  vn::Rng rng(708);
  const Index d = 12, K = 8;
  vn::Rng dict_rng = rng.derive("dict");
  Mat phi = vn::random_unit_columns(dict_rng, d, K);
  Vec bump = rng.derive("bump").normal_vec(d);
  phi.col(1) = (phi.col(0) + 1e-3 * bump).normalized();

  Vec g_true = Vec::Zero(K);
  g_true[0] = 1.0;
  g_true[1] = -0.8;
  const Vec y = phi * g_true;

  vn::LayerParams p;
  p.dims = {d, 0, K};
  p.S = phi;
  p.lambda = 1e-6 * (phi.transpose() * y).lpNorm<Eigen::Infinity>();
  vn::SettleConfig cfg;
  cfg.max_sweeps = 20000;
  cfg.tol = 1e-14;
  const auto res = vn::settle(vn::NetworkParams{{p}}, y, cfg);

  // The near-cancelling pair looks like a single small atom; the settled
  // support differs from the planted one.
  bool match = true;
  for (Index i = 0; i < K && match; ++i)
    match = (std::abs(res.codes[0][i]) > 1e-4) == (g_true[i] != 0.0);
  CHECK_FALSE(match);
  CHECK(vn::mutual_coherence(phi) > 0.99);
}
