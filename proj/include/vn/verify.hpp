#pragma once

// Brute-force verification suites for the library's formal claims, shared by
// the command-line `verify` subcommand and the acceptance tests. Every suite
// is deterministic in its seed and returns machine-readable stats alongside
// the pass flag.

#include "vn/bench/nbody.hpp"
#include "vn/io/reports.hpp"
#include "vn/learning.hpp"
#include "vn/synthesis.hpp"

#include <array>
#include <string>
#include <vector>

namespace vn::verify {

struct SuiteResult {
  std::string name;
  bool passed = false;
  io::Json stats;
};

namespace detail {

inline Vec random_vec(Rng& rng, Index n, double scale = 1.0) {
  Vec v(n);
  for (Index i = 0; i < n; ++i) v[i] = scale * rng.normal();
  return v;
}

inline LayerParams random_layer(Rng& rng, Index d, Index m, Index K, double lambda,
                                std::optional<Index> k_top = std::nullopt,
                                double beta_td = 0.7) {
  LayerParams p;
  p.dims = {d, m, K};
  p.S = random_unit_columns(rng, d, K);
  if (m > 0) p.U = random_unit_columns(rng, m, K);
  p.lambda = lambda;
  p.beta_td = beta_td;
  p.k_top = k_top;
  return p;
}

}  // namespace detail

// Proximal-gradient sweeps at the 1/L step size never increase the energy:
// the un-accelerated trace must be non-increasing from the zero-code start,
// within a relative slack for accumulated rounding.
inline SuiteResult check_descent(std::uint64_t seed) {
  constexpr int kInstances = 1000;
  constexpr double kSlack = 1e-10;
  Rng root(seed);
  int violations = 0;
  double worst_excess = 0.0;
  long total_sweeps = 0;

  for (int t = 0; t < kInstances; ++t) {
    Rng r = root.derive("descent", t);
    const Index d = r.uniform_int(2, 32);
    const Index K = r.uniform_int(2, 64);
    const bool supervised = t % 2 == 1;
    const Index m = supervised ? r.uniform_int(1, 16) : 0;
    const double lambda = r.uniform(0.01, 0.3);
    Rng dict_rng = r.derive("dict");
    NetworkParams net{{detail::random_layer(dict_rng, d, m, K, lambda)}};
    Rng x_rng = r.derive("x");
    const Vec x = detail::random_vec(x_rng, d, r.uniform(0.5, 2.0));
    std::optional<Vec> clamp;
    if (supervised) {
      Rng h_rng = r.derive("h");
      clamp = detail::random_vec(h_rng, m);
    }

    SettleConfig cfg;
    cfg.accelerate = false;
    cfg.reject_increasing = false;
    cfg.max_sweeps = 60;
    cfg.tol = 1e-14;
    const auto res = settle(net, x, cfg, clamp);
    total_sweeps += res.sweeps_used;

    double e_prev = 0.5 * x.squaredNorm();  // zero-code start
    if (clamp) e_prev += 0.5 * net.layers[0].beta_td * clamp->squaredNorm();
    for (const double e : res.energy_trace) {
      const double excess = e - e_prev - kSlack * std::max(1.0, std::abs(e_prev));
      if (excess > 0.0) {
        ++violations;
        worst_excess = std::max(worst_excess, excess);
      }
      e_prev = e;
    }
  }

  SuiteResult out;
  out.name = "descent";
  out.passed = violations == 0;
  out.stats = {{"instances", kInstances},
               {"violations", violations},
               {"worst_excess", worst_excess},
               {"total_sweeps", total_sweeps},
               {"relative_slack", kSlack}};
  return out;
}

// Accelerated settling should reach an energy no worse than the plain sweeps
// in the same budget on nearly every instance.
inline SuiteResult check_fista(std::uint64_t seed) {
  constexpr int kInstances = 100;
  constexpr int kNeeded = 95;
  Rng root(seed);
  int wins = 0;
  double worst_gap = 0.0;

  for (int t = 0; t < kInstances; ++t) {
    Rng r = root.derive("fista", t);
    const double lambda = r.uniform(0.05, 0.2);
    Rng dict_rng = r.derive("dict");
    NetworkParams net{{detail::random_layer(dict_rng, 24, 0, 48, lambda)}};
    Rng x_rng = r.derive("x");
    const Vec x = detail::random_vec(x_rng, 24, 1.0);

    SettleConfig plain;
    plain.accelerate = false;
    plain.max_sweeps = 100;
    plain.tol = 1e-16;
    SettleConfig accel = plain;
    accel.accelerate = true;

    const double e_plain = settle(net, x, plain).energy_trace.back();
    const double e_accel = settle(net, x, accel).energy_trace.back();
    const double gap = e_accel - e_plain;
    if (gap <= 1e-12 * std::max(1.0, std::abs(e_plain)))
      ++wins;
    else
      worst_gap = std::max(worst_gap, gap);
  }

  SuiteResult out;
  out.name = "fista";
  out.passed = wins >= kNeeded;
  out.stats = {{"instances", kInstances},
               {"accelerated_no_worse", wins},
               {"needed", kNeeded},
               {"worst_gap", worst_gap}};
  return out;
}

// The settled energy's dictionary derivative is the residual-times-code outer
// product; central differences must agree entry-wise on almost all instances.
inline SuiteResult check_danskin(std::uint64_t seed) {
  constexpr int kInstances = 100;
  constexpr int kNeeded = 95;
  constexpr double kTol = 1e-3;
  Rng root(seed);
  int matches = 0;
  double worst = 0.0;

  for (int t = 0; t < kInstances; ++t) {
    Rng r = root.derive("danskin", t);
    const double lambda = r.uniform(0.05, 0.3);
    const bool supervised = t % 2 == 1;
    Rng dict_rng = r.derive("dict");
    const LayerParams p =
        detail::random_layer(dict_rng, 8, supervised ? 4 : 0, 12, lambda);
    Rng x_rng = r.derive("x");
    LayerInput in{detail::random_vec(x_rng, 8, 1.0), std::nullopt};
    if (supervised) {
      Rng h_rng = r.derive("h");
      in.h_target = detail::random_vec(h_rng, 4);
    }
    const double rel = danskin_check(p, in);
    worst = std::max(worst, rel);
    if (rel <= kTol) ++matches;
  }

  SuiteResult out;
  out.name = "danskin";
  out.passed = matches >= kNeeded;
  out.stats = {{"instances", kInstances},
               {"matches", matches},
               {"needed", kNeeded},
               {"tolerance", kTol},
               {"worst_rel_error", worst}};
  return out;
}

// The synthesis is linear in the code: reconstructions and materialized
// operators of summed codes equal the sums, to floating-point accuracy.
inline SuiteResult check_superposition(std::uint64_t seed) {
  constexpr int kPairs = 10000;
  constexpr double kTol = 1e-12;
  Rng root(seed);
  double worst = 0.0;
  int violations = 0;

  for (int t = 0; t < kPairs; ++t) {
    Rng r = root.derive("superposition", t);
    const Index d = r.uniform_int(4, 16);
    const Index m = r.uniform_int(2, 12);
    const Index K = r.uniform_int(4, 24);
    Rng dict_rng = r.derive("dict");
    const LayerParams p = detail::random_layer(dict_rng, d, m, K, 0.1);
    Rng g_rng = r.derive("codes");
    Vec g1(K), g2(K);
    for (Index i = 0; i < K; ++i) g1[i] = g_rng.uniform(-3.0, 3.0);
    for (Index i = 0; i < K; ++i) g2[i] = g_rng.uniform(-3.0, 3.0);

    double err = superposition_check(p, g1, g2);
    const Mat w_sum = synthesize(p, g1 + g2).materialize();
    const Mat w_parts = synthesize(p, g1).materialize() + synthesize(p, g2).materialize();
    err = std::max(err, (w_sum - w_parts).lpNorm<Eigen::Infinity>());
    worst = std::max(worst, err);
    if (err > kTol) ++violations;
  }

  SuiteResult out;
  out.name = "superposition";
  out.passed = violations == 0;
  out.stats = {{"pairs", kPairs}, {"violations", violations}, {"worst_error", worst},
               {"tolerance", kTol}};
  return out;
}

// A settled code with a hard support cap synthesizes an operator whose
// numerical rank never exceeds the support size, which never exceeds the cap.
inline SuiteResult check_rank(std::uint64_t seed) {
  constexpr int kInstances = 100;
  constexpr Index kCap = 4;
  Rng root(seed);
  int violations = 0;
  Index max_rank = 0;

  for (int t = 0; t < kInstances; ++t) {
    Rng r = root.derive("rank", t);
    const Index d = r.uniform_int(6, 16);
    const Index m = r.uniform_int(4, 12);
    const Index K = r.uniform_int(8, 24);
    Rng dict_rng = r.derive("dict");
    const LayerParams p = detail::random_layer(dict_rng, d, m, K, 0.05, kCap);
    NetworkParams net{{p}};
    Rng x_rng = r.derive("x");
    const Vec x = detail::random_vec(x_rng, d, 1.0);
    const auto res = settle(net, x, SettleConfig{});
    const auto support = (res.codes[0].array() != 0.0).count();
    const Index rank = numerical_rank(synthesize(p, res.codes[0]));
    max_rank = std::max(max_rank, rank);
    if (rank > support || support > kCap) ++violations;
  }

  SuiteResult out;
  out.name = "rank";
  out.passed = violations == 0;
  out.stats = {{"instances", kInstances}, {"violations", violations},
               {"support_cap", kCap}, {"max_rank_seen", max_rank}};
  return out;
}

// Sparse recovery in the coherence regime: with the l1 weight swept over a
// small grid, the best setting recovers the exact support on at least 99% of
// noiseless draws whose sparsity satisfies the coherence bound.
inline SuiteResult check_recovery(std::uint64_t seed) {
  constexpr int kTrials = 200;
  const std::array<double, 4> scales = {1e-6, 1e-5, 1e-4, 1e-3};
  Rng root(seed);
  Rng stream = root.derive("recovery-seeds");
  std::vector<std::uint64_t> trial_seeds;
  trial_seeds.reserve(kTrials);
  for (int t = 0; t < kTrials; ++t) trial_seeds.push_back(stream.next_u64());

  io::Json per_scale = io::Json::array();
  int best = 0;
  double best_scale = scales[0];
  for (const double scale : scales) {
    int successes = 0;
    int bound_ok = 0;
    for (int t = 0; t < kTrials; ++t) {
      const auto res = recovery_trial(16, 24, 0, 0.0, trial_seeds[static_cast<std::size_t>(t)],
                                      scale);
      if (res.success) ++successes;
      if (res.bound_satisfied) ++bound_ok;
    }
    per_scale.push_back({{"lambda_scale", scale}, {"successes", successes},
                         {"bound_satisfied", bound_ok}});
    if (successes > best) {
      best = successes;
      best_scale = scale;
    }
  }

  const int needed = (kTrials * 99 + 99) / 100;
  SuiteResult out;
  out.name = "recovery";
  out.passed = best >= needed;
  out.stats = {{"trials_per_scale", kTrials}, {"needed", needed}, {"best_successes", best},
               {"best_lambda_scale", best_scale}, {"per_scale", per_scale}};
  return out;
}

// Fill-in imputation: observed entries of the completion match the input
// bit-for-bit, and the masked objective never increases over outer rounds.
inline SuiteResult check_masked(std::uint64_t seed) {
  constexpr int kInstances = 50;
  constexpr int kOuter = 5;
  Rng root(seed);
  int exact_violations = 0;
  int monotone_violations = 0;
  double mean_final_over_first = 0.0;

  SettleConfig inner;
  inner.max_sweeps = 5000;
  inner.tol = 1e-12;

  for (int t = 0; t < kInstances; ++t) {
    Rng r = root.derive("masked", t);
    Rng dict_rng = r.derive("dict");
    const LayerParams p = detail::random_layer(dict_rng, 24, 0, 16, 0.02);
    NetworkParams net{{p}};
    Rng truth_rng = r.derive("truth");
    Vec g_true = Vec::Zero(16);
    for (int k = 0; k < 3; ++k) {
      const Index i = truth_rng.uniform_int(0, 15);
      const double mag = truth_rng.uniform(0.5, 2.0);
      g_true[i] = truth_rng.uniform() < 0.5 ? -mag : mag;
    }
    const Vec x = p.S * g_true;
    Rng mask_rng = r.derive("mask");
    const Vec mask = make_mask(24, MaskSpec::random(0.3), mask_rng);

    double prev_obj = std::numeric_limits<double>::infinity();
    double first_obj = 0.0, final_obj = 0.0;
    for (int k = 0; k <= kOuter; ++k) {
      const auto res = masked_settle(net, x, mask, inner, k);
      const double obj = masked_objective(net, x, mask, res.settle.codes[0]);
      if (k == 0) first_obj = obj;
      final_obj = obj;
      if (obj > prev_obj + 1e-8 * std::max(1.0, prev_obj)) ++monotone_violations;
      prev_obj = obj;
      for (Index i = 0; i < mask.size(); ++i)
        if (mask[i] == 1.0 && res.x_completed[i] != x[i]) ++exact_violations;
    }
    mean_final_over_first += (first_obj > 0.0 ? final_obj / first_obj : 1.0) / kInstances;
  }

  SuiteResult out;
  out.name = "masked";
  out.passed = exact_violations == 0 && monotone_violations == 0;
  out.stats = {{"instances", kInstances}, {"outer_rounds", kOuter},
               {"observed_mismatches", exact_violations},
               {"objective_increases", monotone_violations},
               {"mean_final_over_first_objective", mean_final_over_first}};
  return out;
}

// Integrator order and conservation: halving the step shrinks the endpoint
// error of an eccentric two-body orbit by roughly 2^4, and a magnetic-style
// velocity-orthogonal force conserves kinetic energy to rounding over a long
// run.
inline SuiteResult check_rk4(std::uint64_t) {
  bench::SimConfig sim;
  sim.forces = {bench::ForceKind::Gravity};

  bench::BodyState start;
  start.pos.resize(2, 2);
  start.vel.resize(2, 2);
  start.pos << -1.0, 0.0, 1.0, 0.0;
  start.vel << 0.0, -0.25, 0.0, 0.25;

  const double horizon = 2.0;
  auto endpoint = [&](double dt) {
    bench::SimConfig c = sim;
    c.dt = dt;
    bench::BodyState s = start;
    const auto steps = static_cast<long>(std::llround(horizon / dt));
    for (long i = 0; i < steps; ++i) s = bench::rk4_step(c, s);
    return s;
  };
  const bench::BodyState ref = endpoint(1e-6);
  auto err = [&ref](const bench::BodyState& s) {
    return std::sqrt((s.pos - ref.pos).squaredNorm() + (s.vel - ref.vel).squaredNorm());
  };
  const double e_coarse = err(endpoint(0.01));
  const double e_fine = err(endpoint(0.005));
  const double ratio = e_coarse / e_fine;
  const bool order_ok = ratio >= 10.0 && ratio <= 22.0;

  bench::SimConfig lor;
  lor.forces = {bench::ForceKind::Lorentz};
  bench::BodyState b;
  b.pos.resize(1, 2);
  b.vel.resize(1, 2);
  b.pos << 0.0, 0.0;
  b.vel << 1.0, 0.0;
  const double ke0 = bench::kinetic_energy(b);
  double drift = 0.0;
  for (int i = 0; i < 1000; ++i) {
    b = bench::rk4_step(lor, b);
    drift = std::max(drift, std::abs(bench::kinetic_energy(b) - ke0));
  }
  const bool conserve_ok = drift <= 1e-6;

  SuiteResult out;
  out.name = "rk4";
  out.passed = order_ok && conserve_ok;
  out.stats = {{"error_dt_0p01", e_coarse}, {"error_dt_0p005", e_fine},
               {"halving_ratio", ratio}, {"ratio_window", {10.0, 22.0}},
               {"kinetic_drift", drift}, {"drift_bound", 1e-6}};
  return out;
}

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"descent", "fista", "danskin", "superposition",
                                                 "rank", "recovery", "masked", "rk4"};
  return names;
}

inline SuiteResult run_suite(const std::string& name, std::uint64_t seed) {
  if (name == "descent") return check_descent(seed);
  if (name == "fista") return check_fista(seed);
  if (name == "danskin") return check_danskin(seed);
  if (name == "superposition") return check_superposition(seed);
  if (name == "rank") return check_rank(seed);
  if (name == "recovery") return check_recovery(seed);
  if (name == "masked") return check_masked(seed);
  if (name == "rk4") return check_rk4(seed);
  fail("unknown verification suite \"", name, "\" (want one of descent, fista, danskin, ",
       "superposition, rank, recovery, masked, rk4, or all)");
}

inline std::vector<SuiteResult> run_suites(const std::vector<std::string>& names,
                                           std::uint64_t seed) {
  std::vector<std::string> expanded;
  for (const auto& n : names) {
    if (n == "all") {
      expanded.insert(expanded.end(), suite_names().begin(), suite_names().end());
    } else {
      expanded.push_back(n);
    }
  }
  std::vector<SuiteResult> out;
  out.reserve(expanded.size());
  for (const auto& n : expanded) out.push_back(run_suite(n, seed));
  return out;
}

inline io::Json suites_to_json(const std::vector<SuiteResult>& results) {
  io::Json j = io::Json::array();
  for (const auto& r : results)
    j.push_back({{"suite", r.name}, {"passed", r.passed}, {"stats", r.stats}});
  return j;
}

}  // namespace vn::verify
