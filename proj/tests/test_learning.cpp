#include "vn/learning.hpp"

#include "test_util.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace vn;

namespace {

// triple-loop matvec, the independent oracle for residual algebra
Vec naive_matvec(const Mat& m, const Vec& v) {
  Vec out = Vec::Zero(m.rows());
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) out[i] += m(i, j) * v[j];
  return out;
}

TrainerConfig plain_trainer() {
  TrainerConfig cfg;
  cfg.use_adaptive_moments = false;
  cfg.rho_s = 1.0;
  cfg.rho_u = 1.0;
  return cfg;
}

}  // namespace

TEST_CASE("residuals match the naive oracle") {
  Rng rng(51);
  auto p = vnt::random_layer(rng, 9, 5, 14);
  LayerInput in{rng.normal_vec(9), rng.normal_vec(5)};
  const Vec g = rng.normal_vec(14);
  const auto [r_x, r_h] = residuals(p, in, g);
  REQUIRE((r_x - (in.x - naive_matvec(p.S, g))).lpNorm<Eigen::Infinity>() < 1e-12);
  REQUIRE(r_h.has_value());
  REQUIRE((*r_h - (*in.h_target - naive_matvec(*p.U, g))).lpNorm<Eigen::Infinity>() < 1e-12);

  // perfect reconstruction and zero code
  const auto [r0, rh0] = residuals(p, {p.S * g, std::nullopt}, g);
  REQUIRE(r0.lpNorm<Eigen::Infinity>() < 1e-12);
  REQUIRE(!rh0.has_value());
  const auto [rz, rhz] = residuals(p, {in.x, std::nullopt}, Vec::Zero(14));
  REQUIRE(rz == in.x);
  REQUIRE(!rhz.has_value());
}

TEST_CASE("hebb gradient of a single outer product by hand") {
  Rng rng(52);
  auto p = vnt::random_layer(rng, 2, 0, 3);
  Vec g(3);
  g << 0.0, 2.0, 0.0;
  Vec r(2);
  r << 1.0, 0.0;
  const Vec x = p.S * g + r;  // residual is exactly [1, 0]
  const auto grads = atomic_hebb_gradients(p, {{LayerInput{x, std::nullopt}, g}});
  Mat expect = Mat::Zero(2, 3);
  expect(0, 1) = 2.0;
  REQUIRE((grads.g_s - expect).lpNorm<Eigen::Infinity>() < 1e-12);
  REQUIRE(!grads.g_u.has_value());
}

TEST_CASE("batch duplication leaves the mean gradient unchanged") {
  Rng rng(53);
  auto p = vnt::random_layer(rng, 6, 4, 8);
  std::vector<std::pair<LayerInput, Vec>> batch;
  for (int s = 0; s < 5; ++s)
    batch.emplace_back(LayerInput{rng.normal_vec(6), rng.normal_vec(4)}, rng.normal_vec(8));
  auto doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());
  const auto a = atomic_hebb_gradients(p, batch);
  const auto b = atomic_hebb_gradients(p, doubled);
  REQUIRE((a.g_s - b.g_s).lpNorm<Eigen::Infinity>() < 1e-12);
  REQUIRE((*a.g_u - *b.g_u).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("atoms inactive across the batch are exactly zero in the gradient") {
  Rng rng(54);
  auto p = vnt::random_layer(rng, 6, 0, 10);
  std::vector<std::pair<LayerInput, Vec>> batch;
  for (int s = 0; s < 4; ++s) {
    Vec g = Vec::Zero(10);
    g[1] = rng.normal();
    g[7] = rng.normal();
    batch.emplace_back(LayerInput{rng.normal_vec(6), std::nullopt}, g);
  }
  const auto grads = atomic_hebb_gradients(p, batch);
  for (Index j : {0, 2, 3, 4, 5, 6, 8, 9})
    REQUIRE((grads.g_s.col(j).array() == 0.0).all());
}

TEST_CASE("inactive atoms are bit-identical after the update") {
  Rng rng(55);
  for (const bool adaptive : {false, true}) {
    auto p = vnt::random_layer(rng.derive("loc", adaptive), 6, 4, 10);
    NetworkParams net{{p}};
    auto states = make_optimizer_states(net, rng.derive("st", adaptive));
    TrainerConfig cfg;
    cfg.use_adaptive_moments = adaptive;

    std::vector<std::pair<LayerInput, Vec>> batch;
    for (int s = 0; s < 4; ++s) {
      Vec g = Vec::Zero(10);
      g[2] = 1.0 + rng.uniform();
      g[5] = rng.normal();
      batch.emplace_back(LayerInput{rng.normal_vec(6), rng.normal_vec(4)}, g);
    }
    const Mat s_before = net.layers[0].S;
    const Mat u_before = *net.layers[0].U;
    const auto grads = atomic_hebb_gradients(net.layers[0], batch);
    apply_update(net.layers[0], grads, cfg, states[0]);
    for (Index j = 0; j < 10; ++j) {
      if (j == 2 || j == 5) continue;
      REQUIRE((net.layers[0].S.col(j).array() == s_before.col(j).array()).all());
      REQUIRE((net.layers[0].U->col(j).array() == u_before.col(j).array()).all());
      REQUIRE((states[0].m_s.col(j).array() == 0.0).all());
      REQUIRE((states[0].v_s.col(j).array() == 0.0).all());
    }
    REQUIRE(max_unit_column_error(net.layers[0].S) <= 1e-9);
    REQUIRE(max_unit_column_error(*net.layers[0].U) <= 1e-9);
  }
}

TEST_CASE("zero gradient without moments is a no-op") {
  Rng rng(56);
  auto p = vnt::random_layer(rng, 5, 0, 7);
  NetworkParams net{{p}};
  auto states = make_optimizer_states(net, rng);
  HebbGradients zero;
  zero.g_s = Mat::Zero(5, 7);
  const Mat before = net.layers[0].S;
  apply_update(net.layers[0], zero, plain_trainer(), states[0]);
  REQUIRE((net.layers[0].S.array() == before.array()).all());
}

TEST_CASE("plain update lands on the renormalized column") {
  LayerParams p;
  p.dims = {2, 0, 1};
  p.S = Mat(2, 1);
  p.S << 1.0, 0.0;
  p.lambda = 0.1;
  NetworkParams net{{p}};
  auto states = make_optimizer_states(net, Rng(1));
  HebbGradients g;
  g.g_s = Mat(2, 1);
  g.g_s << 2.0, 4.0;  // column becomes [3, 4], then unit-norm [0.6, 0.8]
  apply_update(net.layers[0], g, plain_trainer(), states[0]);
  REQUIRE(net.layers[0].S(0, 0) == Catch::Approx(0.6).epsilon(1e-12));
  REQUIRE(net.layers[0].S(1, 0) == Catch::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("first adaptive step follows the bias-corrected direction") {
  Rng rng(57);
  auto p = vnt::random_layer(rng, 4, 0, 2);
  const Mat s0 = p.S;
  NetworkParams net{{p}};
  auto states = make_optimizer_states(net, rng);
  TrainerConfig cfg;  // adaptive on by default
  HebbGradients g;
  g.g_s = rng.normal_mat(4, 2);

  apply_update(net.layers[0], g, cfg, states[0]);
  // at t=1 the bias corrections cancel the decays exactly
  for (Index j = 0; j < 2; ++j) {
    Vec raw = s0.col(j) +
              cfg.rho_s * g.g_s.col(j).cwiseQuotient(
                              (g.g_s.col(j).cwiseAbs().array() + cfg.epsilon).matrix());
    raw /= raw.norm();
    REQUIRE((net.layers[0].S.col(j) - raw).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("dc removal zeroes a constant column and triggers re-seeding") {
  LayerParams p;
  p.dims = {2, 0, 1};
  p.S = Mat(2, 1);
  p.S << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  p.lambda = 0.1;
  NetworkParams net{{p}};
  auto states = make_optimizer_states(net, Rng(3));
  auto cfg = plain_trainer();
  cfg.dc_removal = true;
  HebbGradients g;
  g.g_s = Mat(2, 1);
  const double bump = 1.0 - 1.0 / std::sqrt(2.0);
  g.g_s << bump, bump;  // column becomes [1, 1]; dc removal sends it to zero
  apply_update(net.layers[0], g, cfg, states[0]);
  const Vec col = net.layers[0].S.col(0);
  REQUIRE(col.norm() == Catch::Approx(1.0).epsilon(1e-12));
  REQUIRE(std::abs(col[0] - col[1]) > 1e-6);  // re-seeded, not the constant direction
}

TEST_CASE("non-finite gradients throw and leave parameters untouched") {
  Rng rng(58);
  auto p = vnt::random_layer(rng, 4, 0, 6);
  NetworkParams net{{p}};
  auto states = make_optimizer_states(net, rng);
  const Mat before = net.layers[0].S;
  HebbGradients g;
  g.g_s = Mat::Zero(4, 6);
  g.g_s(2, 3) = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_AS(apply_update(net.layers[0], g, plain_trainer(), states[0]), Error);
  REQUIRE((net.layers[0].S.array() == before.array()).all());
  REQUIRE(states[0].step == 0);
}

TEST_CASE("settled-energy dictionary derivative matches finite differences") {
  Rng rng(59);
  int ok = 0;
  for (int trial = 0; trial < 3; ++trial) {
    auto p = vnt::random_layer(rng.derive("danskin", trial), 8, 0, 12, 0.3);
    LayerInput in{rng.normal_vec(8), std::nullopt};
    if (danskin_check(p, in, 1e-5, 24) <= 1e-3) ++ok;
  }
  REQUIRE(ok == 3);
}

TEST_CASE("near-smooth orthonormal case agrees to five decimals") {
  // well-conditioned dictionary and a small l1 weight: all atoms active, the
  // kink far away, so the comparison is limited only by FD truncation
  Rng rng(60);
  const Mat q = Eigen::HouseholderQR<Mat>(rng.normal_mat(6, 6)).householderQ();
  LayerParams p;
  p.dims = {6, 0, 6};
  p.S = q;
  p.lambda = 1e-4;
  LayerInput in{rng.normal_vec(6), std::nullopt};
  REQUIRE(danskin_check(p, in, 1e-5, 36) <= 1e-5);
}

TEST_CASE("training recovers a hidden dictionary on 1-sparse data") {
  Rng rng(61);
  const Index d = 16, k_true = 16, k_model = 32;
  const Mat hidden = random_unit_columns(rng, d, k_true);

  std::vector<TrainSample> data;
  for (int s = 0; s < 240; ++s) {
    Rng sr = rng.derive("sample", s);
    const Index atom = sr.uniform_int(0, k_true - 1);
    data.push_back({hidden.col(atom) * sr.uniform(0.8, 1.2), std::nullopt});
  }

  auto p = vnt::random_layer(rng.derive("init"), d, 0, k_model, 0.05);
  p.k_top = 2;  // strict winner-take-all lets duplicate atoms fight over data
  NetworkParams net{{p}};
  auto states = make_optimizer_states(net, rng.derive("opt"));
  TrainerConfig tcfg;
  tcfg.rho_s = 3e-3;
  tcfg.batch_size = 16;
  SettleConfig scfg;
  scfg.max_sweeps = 50;

  Rng shuffler = rng.derive("shuffle");
  double first = 0.0, last = 0.0;
  for (int epoch = 0; epoch < 50; ++epoch) {
    shuffler.shuffle(data);
    const auto stats = train_epoch(net, data, scfg, tcfg, states);
    REQUIRE(stats.batches_skipped == 0);
    if (epoch == 0) first = stats.mean_recon_mse;
    last = stats.mean_recon_mse;
  }
  REQUIRE(last * 10.0 <= first);
  REQUIRE(max_unit_column_error(net.layers[0].S) <= 1e-9);
}

TEST_CASE("an epoch on one repeated sample does not raise its energy") {
  Rng rng(62);
  auto p = vnt::random_layer(rng, 10, 0, 16, 0.1);
  NetworkParams net{{p}};
  auto states = make_optimizer_states(net, rng);
  const Vec x = rng.normal_vec(10);
  std::vector<TrainSample> data(8, TrainSample{x, std::nullopt});

  TrainerConfig tcfg = plain_trainer();
  tcfg.rho_s = 1e-3;
  SettleConfig scfg;
  const double before = settle(net, x, scfg).energy_trace.back();
  train_epoch(net, data, scfg, tcfg, states);
  const double after = settle(net, x, scfg).energy_trace.back();
  REQUIRE(after <= before + 1e-12);
}

TEST_CASE("a prohibitive l1 weight freezes the dictionaries") {
  Rng rng(63);
  auto p = vnt::random_layer(rng, 8, 0, 12, 1e3);
  NetworkParams net{{p}};
  auto states = make_optimizer_states(net, rng);
  std::vector<TrainSample> data;
  for (int s = 0; s < 20; ++s) data.push_back({rng.normal_vec(8), std::nullopt});
  const Mat before = net.layers[0].S;
  const auto stats = train_epoch(net, data, SettleConfig{}, TrainerConfig{}, states);
  REQUIRE((net.layers[0].S.array() == before.array()).all());
  for (double l0 : stats.mean_l0) REQUIRE(l0 == 0.0);
}

TEST_CASE("atoms idle for a full window are re-seeded") {
  Rng rng(64);
  LayerParams p;
  p.dims = {4, 0, 3};
  p.S = random_unit_columns(rng, 4, 3);
  p.lambda = 0.05;
  p.k_top = 1;
  NetworkParams net{{p}};
  auto states = make_optimizer_states(net, rng);

  // every sample is a positive multiple of atom 0: atoms 1 and 2 never fire
  std::vector<TrainSample> data;
  for (int s = 0; s < 12; ++s) data.push_back({net.layers[0].S.col(0) * (1.0 + 0.1 * s), std::nullopt});

  TrainerConfig tcfg;
  tcfg.dead_atoms = DeadAtomRule{0.5, 2};
  const Mat before = net.layers[0].S;
  train_epoch(net, data, SettleConfig{}, tcfg, states);
  REQUIRE((net.layers[0].S.col(1).array() == before.col(1).array()).all());  // window not full yet
  train_epoch(net, data, SettleConfig{}, tcfg, states);
  REQUIRE(!(net.layers[0].S.col(1).array() == before.col(1).array()).all());
  REQUIRE(!(net.layers[0].S.col(2).array() == before.col(2).array()).all());
  REQUIRE(states[0].usage.empty());  // history dropped after the re-seed
  REQUIRE(max_unit_column_error(net.layers[0].S) <= 1e-9);
}
