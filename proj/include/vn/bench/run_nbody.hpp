#pragma once

// Planar n-body benchmark: supervised single-layer models map per-body state
// features to instantaneous accelerations. Three models are trained per seed:
// a pooled model over the four single-force regimes, a dedicated drag model,
// and a force-free control whose l1 weight is set high enough that every code
// settles to exactly zero. Generalization is scored on unseen two-force
// combinations at several body counts against a mean-predictor baseline, and
// learned models drive closed-loop rollouts through the true integrator.

#include "vn/bench/harness.hpp"
#include "vn/bench/nbody.hpp"
#include "vn/io/checkpoint.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace vn::bench {

struct NBodyRunConfig {
  Index bodies = 5;
  std::vector<Index> ood_bodies = {5, 4, 3};
  Index atoms = 64;
  Index k_top = 8;
  double lambda = 1e-3;
  double beta_td = 0.7;
  double control_lambda = 100.0;
  SimConfig sim;  // forces filled per regime
  int train_clips = 8;
  int clip_steps = 100;
  int epochs = 8;
  int drag_epochs = 32;
  int eval_clips = 2;
  int eval_steps = 60;
  int rollout_ics = 4;
  int rollout_steps = 999;
  int n_seeds = 3;
  std::uint64_t seed = 1;
  SettleConfig settle;
  TrainerConfig trainer;
};

inline NBodyRunConfig nbody_config_from(const Config& cfg) {
  NBodyRunConfig r;
  r.bodies = static_cast<Index>(cfg.get_int("nbody.bodies", r.bodies));
  r.ood_bodies = parse_index_list(cfg.get_string("nbody.ood_bodies", "5,4,3"), "nbody.ood_bodies");
  r.atoms = static_cast<Index>(cfg.get_int("nbody.atoms", r.atoms));
  r.k_top = static_cast<Index>(cfg.get_int("nbody.k_top", r.k_top));
  r.lambda = cfg.get_double("nbody.lambda", r.lambda);
  r.beta_td = cfg.get_double("nbody.beta_td", r.beta_td);
  r.control_lambda = cfg.get_double("nbody.control_lambda", r.control_lambda);
  r.sim.dt = cfg.get_double("nbody.dt", r.sim.dt);
  r.train_clips = static_cast<int>(cfg.get_int("nbody.train_clips", r.train_clips));
  r.clip_steps = static_cast<int>(cfg.get_int("nbody.clip_steps", r.clip_steps));
  r.epochs = static_cast<int>(cfg.get_int("nbody.epochs", r.epochs));
  r.drag_epochs = static_cast<int>(cfg.get_int("nbody.drag_epochs", r.drag_epochs));
  r.eval_clips = static_cast<int>(cfg.get_int("nbody.eval_clips", r.eval_clips));
  r.eval_steps = static_cast<int>(cfg.get_int("nbody.eval_steps", r.eval_steps));
  r.rollout_ics = static_cast<int>(cfg.get_int("nbody.rollout_ics", r.rollout_ics));
  r.rollout_steps = static_cast<int>(cfg.get_int("nbody.rollout_steps", r.rollout_steps));
  r.n_seeds = static_cast<int>(cfg.get_int("seeds", r.n_seeds));
  r.seed = static_cast<std::uint64_t>(cfg.get_int("seed", static_cast<long long>(r.seed)));
  r.settle = settle_from(cfg);
  r.trainer = trainer_from(cfg);
  require(r.bodies >= 3 && r.bodies <= kMaxBodies,
          "config: key \"nbody.bodies\" must be in [3, ", kMaxBodies, "], got ", r.bodies);
  require(!r.ood_bodies.empty() && r.ood_bodies.size() <= 8,
          "config: key \"nbody.ood_bodies\" must name 1 to 8 counts");
  for (Index n : r.ood_bodies)
    require(n >= 3 && n <= kMaxBodies, "config: key \"nbody.ood_bodies\" entry ", n,
            " outside [3, ", kMaxBodies, "]");
  require(r.control_lambda > 0.0, "config: key \"nbody.control_lambda\" must be > 0");
  require(r.rollout_ics >= 1 && r.rollout_steps >= 1,
          "config: nbody rollout counts must be >= 1");
  require(r.n_seeds >= 1, "config: key \"seeds\" must be >= 1, got ", r.n_seeds);
  return r;
}

inline const std::vector<ForceKind>& single_forces() {
  static const std::vector<ForceKind> all = {ForceKind::Gravity, ForceKind::Spring,
                                             ForceKind::Drag, ForceKind::Lorentz};
  return all;
}

inline std::string force_name(ForceKind k) {
  switch (k) {
    case ForceKind::Gravity: return "gravity";
    case ForceKind::Spring: return "spring";
    case ForceKind::Drag: return "drag";
    case ForceKind::Lorentz: return "lorentz";
  }
  fail("force kind has an invalid tag");
}

inline std::string force_set_name(const std::vector<ForceKind>& forces) {
  if (forces.empty()) return "free";
  std::string name = force_name(forces[0]);
  for (std::size_t i = 1; i < forces.size(); ++i) name += "_" + force_name(forces[i]);
  return name;
}

inline std::vector<std::vector<ForceKind>> force_pairs() {
  std::vector<std::vector<ForceKind>> pairs;
  const auto& all = single_forces();
  for (std::size_t a = 0; a < all.size(); ++a)
    for (std::size_t b = a + 1; b < all.size(); ++b) pairs.push_back({all[a], all[b]});
  return pairs;
}

// The generalization claim needs genuinely unseen force sets; refuse any
// configuration where an out-of-distribution set equals a training set.
inline void require_distinct_force_sets(std::vector<std::vector<ForceKind>> id_sets,
                                        std::vector<std::vector<ForceKind>> ood_sets) {
  for (auto& s : id_sets) std::sort(s.begin(), s.end());
  for (auto& s : ood_sets) std::sort(s.begin(), s.end());
  for (const auto& ood : ood_sets)
    for (const auto& id : id_sets)
      require(ood != id, "nbody: out-of-distribution force set \"",
              force_set_name(ood), "\" also appears in the training distribution");
}

inline std::vector<TrainSample> to_train_samples(const std::vector<NBodySample>& raw) {
  std::vector<TrainSample> data;
  data.reserve(raw.size());
  for (const auto& s : raw) data.push_back({s.features, Vec(s.accel)});
  return data;
}

inline NetworkParams make_nbody_network(const NBodyRunConfig& cfg, double lambda, Rng rng) {
  NetworkParams net;
  net.layers.push_back(
      init_layer(kBodyFeatureDim, 2, cfg.atoms, lambda, cfg.k_top, cfg.beta_td,
                 rng.derive("layer", 0)));
  net.validate();
  return net;
}

inline SimConfig sim_with(const NBodyRunConfig& cfg, std::vector<ForceKind> forces) {
  SimConfig s = cfg.sim;
  s.forces = std::move(forces);
  return s;
}

// Pooled-per-entry acceleration MSE of a trained model on freshly simulated
// clips, plus the matching targets for baseline computation.
inline double model_force_mse(const NBodyRunConfig& cfg, const NetCache& cache,
                              const SimConfig& sim, Index n_bodies, Rng rng,
                              std::vector<Vec>* targets_out = nullptr) {
  auto eval_set = generate_nbody_dataset(sim, n_bodies, cfg.eval_clips, cfg.eval_steps,
                                         rng.derive("eval-data"));
  MseAccumulator acc;
  for (const auto& s : eval_set) {
    acc.add(predict_top(cache, s.features, cfg.settle), Vec(s.accel));
    if (targets_out) targets_out->push_back(Vec(s.accel));
  }
  return acc.value();
}

struct DriftCurve {
  std::string name;
  std::vector<double> mse;  // per step, pooled over positions and velocities
};

// Closed-loop rollout: the learned model supplies accelerations to the same
// integrator that drives the reference trajectory.
inline DriftCurve rollout_drift(const NBodyRunConfig& cfg, const NetCache& cache,
                                const SimConfig& sim, Index n_bodies, std::string name,
                                Rng& ic_rng) {
  DriftCurve curve;
  curve.name = std::move(name);
  BodyState truth = random_state(ic_rng, n_bodies, cfg.sim.box_half);
  BodyState model = truth;
  auto model_accel = [&](const BodyState& y) {
    Mat a(y.n(), 2);
    for (Index i = 0; i < y.n(); ++i)
      a.row(i) = predict_top(cache, body_features(y, i), cfg.settle).transpose();
    return a;
  };
  const double denom = static_cast<double>(4 * n_bodies);
  for (int step = 0; step < cfg.rollout_steps; ++step) {
    truth = rk4_step(sim, truth);
    model = rk4_step(sim, model, model_accel);
    curve.mse.push_back(((truth.pos - model.pos).squaredNorm() +
                         (truth.vel - model.vel).squaredNorm()) /
                        denom);
  }
  return curve;
}

inline DriftSummary summarize_drift(const DriftCurve& c) {
  DriftSummary s;
  s.name = c.name;
  s.steps = static_cast<int>(c.mse.size());
  s.final_mse = c.mse.back();
  s.peak_mse = *std::max_element(c.mse.begin(), c.mse.end());
  return s;
}

inline MetricsReport run_nbody(const NBodyRunConfig& cfg, const std::string& out_dir = "") {
  const auto pairs = force_pairs();
  {
    std::vector<std::vector<ForceKind>> id_sets;
    for (ForceKind f : single_forces()) id_sets.push_back({f});
    require_distinct_force_sets(id_sets, pairs);
  }

  Rng root(cfg.seed);
  std::vector<std::vector<double>> id_mse(single_forces().size());
  std::vector<double> drag_dedicated;
  std::vector<std::vector<double>> ood_mse(pairs.size() * cfg.ood_bodies.size());
  std::vector<std::vector<double>> base_mse(ood_mse.size());
  std::vector<double> control_peak;
  std::vector<LayerSparsity> sparsity_sum;
  std::vector<DriftCurve> drift_curves;

  for (int s = 0; s < cfg.n_seeds; ++s) {
    Rng seed_rng = root.derive("nbody-seed", s);

    std::vector<TrainSample> pooled_data;
    std::vector<TrainSample> drag_data;
    for (std::size_t fi = 0; fi < single_forces().size(); ++fi) {
      const SimConfig sim = sim_with(cfg, {single_forces()[fi]});
      Rng data_rng = seed_rng.derive("data", static_cast<Index>(fi));
      auto set = to_train_samples(
          generate_nbody_dataset(sim, cfg.bodies, cfg.train_clips, cfg.clip_steps, data_rng));
      if (single_forces()[fi] == ForceKind::Drag) drag_data = set;
      pooled_data.insert(pooled_data.end(), set.begin(), set.end());
    }

    auto pooled = fit(make_nbody_network(cfg, cfg.lambda, seed_rng.derive("net-pooled")),
                      std::move(pooled_data), cfg.settle, cfg.trainer, cfg.epochs,
                      seed_rng.derive("fit-pooled"));
    auto drag = fit(make_nbody_network(cfg, cfg.lambda, seed_rng.derive("net-drag")),
                    std::move(drag_data), cfg.settle, cfg.trainer, cfg.drag_epochs,
                    seed_rng.derive("fit-drag"));
    Rng control_data_rng = seed_rng.derive("data-free");
    auto control = fit(make_nbody_network(cfg, cfg.control_lambda, seed_rng.derive("net-control")),
                       to_train_samples(generate_nbody_dataset(sim_with(cfg, {}), cfg.bodies, 1,
                                                               cfg.clip_steps, control_data_rng)),
                       cfg.settle, cfg.trainer, 1, seed_rng.derive("fit-control"));

    const NetCache pooled_cache(pooled.net);
    const NetCache drag_cache(drag.net);
    const NetCache control_cache(control.net);
    Rng eval_rng = seed_rng.derive("eval");

    std::vector<SettleResult> id_settles;
    for (std::size_t fi = 0; fi < single_forces().size(); ++fi) {
      const SimConfig sim = sim_with(cfg, {single_forces()[fi]});
      Rng fr = eval_rng.derive("id", static_cast<Index>(fi));
      auto eval_set = generate_nbody_dataset(sim, cfg.bodies, cfg.eval_clips, cfg.eval_steps, fr);
      MseAccumulator acc;
      for (const auto& e : eval_set) {
        auto res = settle(pooled_cache, e.features, cfg.settle);
        acc.add(*pooled.net.layers.back().U * res.codes.back(), Vec(e.accel));
        if (id_settles.size() < 200) id_settles.push_back(std::move(res));
      }
      id_mse[fi].push_back(acc.value());
      if (single_forces()[fi] == ForceKind::Drag) {
        MseAccumulator dacc;
        for (const auto& e : eval_set)
          dacc.add(predict_top(drag_cache, e.features, cfg.settle), Vec(e.accel));
        drag_dedicated.push_back(dacc.value());
      }
    }

    for (std::size_t pi = 0; pi < pairs.size(); ++pi)
      for (std::size_t ni = 0; ni < cfg.ood_bodies.size(); ++ni) {
        const SimConfig sim = sim_with(cfg, pairs[pi]);
        Rng pr = eval_rng.derive("ood", static_cast<Index>(pi * 8 + ni));
        std::vector<Vec> targets;
        const double mse =
            model_force_mse(cfg, pooled_cache, sim, cfg.ood_bodies[ni], pr, &targets);
        const std::size_t cell = pi * cfg.ood_bodies.size() + ni;
        ood_mse[cell].push_back(mse);
        base_mse[cell].push_back(mean_predictor_mse(targets));
      }

    {
      Rng cr = eval_rng.derive("control");
      BodyState probe = random_state(cr, cfg.bodies, cfg.sim.box_half);
      double peak = 0.0;
      for (Index i = 0; i < probe.n(); ++i)
        peak = std::max(peak, predict_top(control_cache, body_features(probe, i), cfg.settle)
                                  .lpNorm<Eigen::Infinity>());
      control_peak.push_back(peak);
    }

    const auto sp = sparsity_stats(pooled.net, id_settles);
    if (sparsity_sum.empty()) sparsity_sum.resize(sp.size());
    for (std::size_t l = 0; l < sp.size(); ++l) {
      sparsity_sum[l].k_eff += sp[l].k_eff / cfg.n_seeds;
      sparsity_sum[l].k_95 += sp[l].k_95 / cfg.n_seeds;
    }

    if (s == 0) {
      Rng roll_rng = seed_rng.derive("rollout");
      for (int ic = 0; ic < cfg.rollout_ics; ++ic) {
        drift_curves.push_back(rollout_drift(cfg, control_cache, sim_with(cfg, {}), cfg.bodies,
                                             "control_free_ic" + std::to_string(ic), roll_rng));
        drift_curves.push_back(rollout_drift(cfg, pooled_cache, sim_with(cfg, pairs[0]),
                                             cfg.bodies,
                                             force_set_name(pairs[0]) + "_ic" + std::to_string(ic),
                                             roll_rng));
      }
    }

    if (!out_dir.empty()) {
      io::save_checkpoint(out_dir + "/nbody_pooled_seed" + std::to_string(s) + ".vnck",
                          pooled.net, &pooled.states);
      io::save_checkpoint(out_dir + "/nbody_drag_seed" + std::to_string(s) + ".vnck", drag.net,
                          &drag.states);
    }
  }

  MetricsReport r;
  r.benchmark = "nbody";
  r.n_seeds = cfg.n_seeds;
  for (std::size_t fi = 0; fi < single_forces().size(); ++fi)
    r.splits.emplace_back("id_" + force_name(single_forces()[fi]), ci_over_seeds(id_mse[fi]));
  r.splits.emplace_back("drag_dedicated", ci_over_seeds(drag_dedicated));
  for (std::size_t pi = 0; pi < pairs.size(); ++pi)
    for (std::size_t ni = 0; ni < cfg.ood_bodies.size(); ++ni) {
      const std::size_t cell = pi * cfg.ood_bodies.size() + ni;
      const std::string tag =
          force_set_name(pairs[pi]) + "_n" + std::to_string(cfg.ood_bodies[ni]);
      r.splits.emplace_back("ood_" + tag, ci_over_seeds(ood_mse[cell]));
      r.splits.emplace_back("base_" + tag, ci_over_seeds(base_mse[cell]));
      r.ratios.emplace_back("rel_" + tag,
                            ci_over_seeds(ood_mse[cell]).mean / ci_over_seeds(base_mse[cell]).mean);
    }
  r.scalars.emplace_back("control_pred_peak", ci_over_seeds(control_peak).mean);
  for (std::size_t l = 0; l < sparsity_sum.size(); ++l)
    r.sparsity.emplace_back("layer" + std::to_string(l), sparsity_sum[l]);
  for (const auto& c : drift_curves) r.drift.push_back(summarize_drift(c));

  if (!out_dir.empty()) {
    io::CsvTable t{{"curve", "step", "mse"}, {}};
    for (const auto& c : drift_curves)
      for (std::size_t i = 0; i < c.mse.size(); ++i)
        t.add_row({c.name, std::to_string(i + 1), io::csv_num(c.mse[i])});
    io::write_csv(out_dir + "/nbody_drift.csv", t);
    io::write_json(out_dir + "/nbody_report.json", report_to_json(r));
  }
  return r;
}

}  // namespace vn::bench
