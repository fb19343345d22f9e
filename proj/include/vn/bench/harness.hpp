#pragma once

// Shared experiment plumbing: run configs assembled from dotted-key Config
// files, the seed loop, and the deterministic MetricsReport document. The
// per-benchmark runners live in run_bump.hpp / run_funcs.hpp / run_nbody.hpp.

#include "vn/bench/stats.hpp"
#include "vn/config.hpp"
#include "vn/io/reports.hpp"
#include "vn/learning.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace vn::bench {

struct MaskedCellReport {
  std::string regime;
  std::string difficulty;
  std::string model;  // "vn", "zero_fill", "dataset_mean"
  CiStat hidden;
  CiStat observed;
  bool applicable = true;
};

struct DriftSummary {
  std::string name;
  int steps = 0;
  double final_mse = 0.0;
  double peak_mse = 0.0;
};

struct MetricsReport {
  std::string benchmark;
  int n_seeds = 0;
  std::vector<std::pair<std::string, CiStat>> splits;
  std::vector<std::pair<std::string, std::optional<double>>> ratios;
  std::vector<MaskedCellReport> masked;
  std::vector<std::pair<std::string, LayerSparsity>> sparsity;
  std::vector<DriftSummary> drift;
  std::vector<std::pair<std::string, double>> scalars;
};

inline io::Json ci_to_json(const CiStat& s) {
  io::Json j;
  j["mean"] = s.mean;
  j["ci_lo"] = s.lo;
  j["ci_hi"] = s.hi;
  j["per_seed"] = s.per_seed;
  return j;
}

inline io::Json report_to_json(const MetricsReport& r) {
  io::Json j;
  j["benchmark"] = r.benchmark;
  j["n_seeds"] = r.n_seeds;
  j["splits"] = io::Json::object();
  for (const auto& [name, stat] : r.splits) j["splits"][name] = ci_to_json(stat);
  j["ratios"] = io::Json::object();
  for (const auto& [name, value] : r.ratios) {
    if (value)
      j["ratios"][name] = *value;
    else
      j["ratios"][name] = nullptr;
  }
  if (!r.masked.empty()) {
    j["masked"] = io::Json::array();
    for (const auto& cell : r.masked) {
      io::Json c;
      c["regime"] = cell.regime;
      c["difficulty"] = cell.difficulty;
      c["model"] = cell.model;
      c["applicable"] = cell.applicable;
      if (cell.applicable) {
        c["hidden"] = ci_to_json(cell.hidden);
        c["observed"] = ci_to_json(cell.observed);
      }
      j["masked"].push_back(c);
    }
  }
  j["sparsity"] = io::Json::object();
  for (const auto& [name, s] : r.sparsity) {
    j["sparsity"][name] = {{"k_eff", s.k_eff}, {"k_95", s.k_95}};
  }
  if (!r.drift.empty()) {
    j["drift"] = io::Json::object();
    for (const auto& d : r.drift)
      j["drift"][d.name] = {{"steps", d.steps}, {"final_mse", d.final_mse},
                            {"peak_mse", d.peak_mse}};
  }
  if (!r.scalars.empty()) {
    j["scalars"] = io::Json::object();
    for (const auto& [name, v] : r.scalars) j["scalars"][name] = v;
  }
  return j;
}

// Settle/trainer blocks shared by every benchmark config.
inline SettleConfig settle_from(const Config& cfg) {
  SettleConfig s;
  s.max_sweeps = static_cast<int>(cfg.get_int("settle.max_sweeps", s.max_sweeps));
  s.tol = cfg.get_double("settle.tol", s.tol);
  s.accelerate = cfg.get_bool("settle.accelerate", s.accelerate);
  require(s.max_sweeps >= 1, "config: key \"settle.max_sweeps\" must be >= 1, got ",
          s.max_sweeps);
  require(s.tol > 0.0, "config: key \"settle.tol\" must be > 0, got ", s.tol);
  return s;
}

inline TrainerConfig trainer_from(const Config& cfg) {
  TrainerConfig t;
  t.rho_s = cfg.get_double("trainer.rho_s", t.rho_s);
  t.rho_u = cfg.get_double("trainer.rho_u", t.rho_u);
  t.use_adaptive_moments = cfg.get_bool("trainer.adaptive", t.use_adaptive_moments);
  t.batch_size = static_cast<Index>(cfg.get_int("trainer.batch_size", t.batch_size));
  t.dc_removal = cfg.get_bool("trainer.dc_removal", t.dc_removal);
  require(t.rho_s > 0.0, "config: key \"trainer.rho_s\" must be > 0, got ", t.rho_s);
  require(t.rho_u > 0.0, "config: key \"trainer.rho_u\" must be > 0, got ", t.rho_u);
  require(t.batch_size >= 1, "config: key \"trainer.batch_size\" must be >= 1, got ",
          t.batch_size);
  return t;
}

struct FitResult {
  NetworkParams net;
  std::vector<OptimizerState> states;
  std::vector<EpochStats> history;
};

inline FitResult fit(NetworkParams net, std::vector<TrainSample> data, const SettleConfig& scfg,
                     const TrainerConfig& tcfg, int epochs, Rng rng) {
  require(epochs >= 1, "fit: epochs must be >= 1, got ", epochs);
  FitResult out;
  out.states = make_optimizer_states(net, rng.derive("opt"));
  Rng shuffle_rng = rng.derive("shuffle");
  for (int e = 0; e < epochs; ++e) {
    shuffle_rng.shuffle(data);
    out.history.push_back(train_epoch(net, data, scfg, tcfg, out.states));
  }
  out.net = std::move(net);
  return out;
}

// Column-initialized dictionaries for a fresh layer.
inline LayerParams init_layer(Index d, Index m, Index K, double lambda,
                              std::optional<Index> k_top, double beta_td, Rng rng) {
  LayerParams p;
  p.dims = {d, m, K};
  Rng s_rng = rng.derive("init-s");
  p.S = random_unit_columns(s_rng, d, K);
  if (m > 0) {
    Rng u_rng = rng.derive("init-u");
    p.U = random_unit_columns(u_rng, m, K);
  }
  p.lambda = lambda;
  p.k_top = k_top;
  p.beta_td = beta_td;
  return p;
}

}  // namespace vn::bench
