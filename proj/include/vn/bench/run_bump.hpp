#pragma once

// Spatial bump benchmark: a single supervised layer decodes a population code
// of one or more bump centers into the rendered grid image. Generalization is
// probed on centers from a held-out spatial region and on additive multi-bump
// encodings never seen in training.

#include "vn/bench/bump.hpp"
#include "vn/bench/harness.hpp"
#include "vn/io/checkpoint.hpp"

#include <string>
#include <vector>

namespace vn::bench {

struct BumpRunConfig {
  BumpTaskConfig task;
  Index atoms = 256;
  Index k_top = 16;
  double lambda = 0.05;
  double beta_td = 0.7;
  int train_samples = 2000;
  int eval_samples = 300;
  int pair_samples = 150;
  int epochs = 30;
  int n_seeds = 3;
  std::uint64_t seed = 1;
  SettleConfig settle;
  TrainerConfig trainer;
};

inline BumpEncoding bump_encoding_from(const std::string& name) {
  if (name == "bump") return BumpEncoding::BumpCode;
  if (name == "onehot") return BumpEncoding::OneHot;
  if (name == "fourier14") return BumpEncoding::Fourier14;
  if (name == "fourier7") return BumpEncoding::Fourier7;
  if (name == "scalar") return BumpEncoding::Scalar;
  fail("config: key \"bump.encoding\" has unknown value \"", name,
       "\" (want bump, onehot, fourier14, fourier7, or scalar)");
}

inline HoldoutRegion::Kind holdout_kind_from(const std::string& name) {
  if (name == "central_square") return HoldoutRegion::Kind::CentralSquare;
  if (name == "annulus") return HoldoutRegion::Kind::Annulus;
  if (name == "none") return HoldoutRegion::Kind::None;
  fail("config: key \"bump.holdout\" has unknown value \"", name,
       "\" (want central_square, annulus, or none)");
}

inline BumpRunConfig bump_config_from(const Config& cfg) {
  BumpRunConfig r;
  r.task.grid_n = static_cast<Index>(cfg.get_int("bump.grid_n", r.task.grid_n));
  r.task.sigma = cfg.get_double("bump.sigma", r.task.sigma);
  r.task.encoding = bump_encoding_from(cfg.get_string("bump.encoding", "bump"));
  r.task.holdout.kind = holdout_kind_from(cfg.get_string("bump.holdout", "central_square"));
  r.task.holdout.side = cfg.get_double("bump.holdout_side", r.task.holdout.side);
  r.task.holdout.r_inner = cfg.get_double("bump.annulus_inner", r.task.holdout.r_inner);
  r.task.holdout.r_outer = cfg.get_double("bump.annulus_outer", r.task.holdout.r_outer);
  r.atoms = static_cast<Index>(cfg.get_int("bump.atoms", r.atoms));
  r.k_top = static_cast<Index>(cfg.get_int("bump.k_top", r.k_top));
  r.lambda = cfg.get_double("bump.lambda", r.lambda);
  r.beta_td = cfg.get_double("bump.beta_td", r.beta_td);
  r.train_samples = static_cast<int>(cfg.get_int("bump.train_samples", r.train_samples));
  r.eval_samples = static_cast<int>(cfg.get_int("bump.eval_samples", r.eval_samples));
  r.pair_samples = static_cast<int>(cfg.get_int("bump.pair_samples", r.pair_samples));
  r.epochs = static_cast<int>(cfg.get_int("bump.epochs", r.epochs));
  r.n_seeds = static_cast<int>(cfg.get_int("seeds", r.n_seeds));
  r.seed = static_cast<std::uint64_t>(cfg.get_int("seed", static_cast<long long>(r.seed)));
  r.settle = settle_from(cfg);
  r.trainer = trainer_from(cfg);
  validate_bump_config(r.task);
  require(r.n_seeds >= 1, "config: key \"seeds\" must be >= 1, got ", r.n_seeds);
  require(r.train_samples >= 1 && r.eval_samples >= 1 && r.pair_samples >= 1,
          "config: bump sample counts must be >= 1");
  return r;
}

inline NetworkParams make_bump_network(const BumpRunConfig& cfg, Rng rng) {
  const Index d = encoding_dim(cfg.task.encoding, cfg.task.grid_n);
  const Index m = cfg.task.grid_n * cfg.task.grid_n;
  NetworkParams net;
  net.layers.push_back(
      init_layer(d, m, cfg.atoms, cfg.lambda, cfg.k_top, cfg.beta_td, rng.derive("layer", 0)));
  net.validate();
  return net;
}

inline std::vector<TrainSample> bump_training_set(const BumpRunConfig& cfg, Rng rng) {
  std::vector<TrainSample> data;
  data.reserve(static_cast<std::size_t>(cfg.train_samples));
  for (int i = 0; i < cfg.train_samples; ++i) {
    std::vector<Center> centers;
    for (int b = 0; b < cfg.task.n_bumps; ++b) centers.push_back(sample_center(cfg.task, rng, false));
    data.push_back({encode_centers(cfg.task, centers), bump_image(cfg.task, centers)});
  }
  return data;
}

struct BumpEval {
  double id_mse = 0.0;
  std::optional<double> ood_mse;
  double pair_mse = 0.0;
  double triple_mse = 0.0;
  double zero_baseline = 0.0;  // MSE of predicting an all-zero image on the id split
  std::vector<SettleResult> id_settles;
};

inline BumpEval eval_bump(const BumpRunConfig& cfg, const NetworkParams& net, Rng rng) {
  const NetCache cache(net);
  BumpEval out;

  Rng id_rng = rng.derive("id");
  MseAccumulator id_acc, zero_acc;
  for (int i = 0; i < cfg.eval_samples; ++i) {
    const Center c = sample_center(cfg.task, id_rng, false);
    const Vec truth = bump_image(cfg.task, {c});
    const Vec x = encode_centers(cfg.task, {c});
    auto res = settle(cache, x, cfg.settle);
    id_acc.add(*net.layers.back().U * res.codes.back(), truth);
    zero_acc.add(Vec::Zero(truth.size()), truth);
    out.id_settles.push_back(std::move(res));
  }
  out.id_mse = id_acc.value();
  out.zero_baseline = zero_acc.value();

  if (cfg.task.holdout.kind != HoldoutRegion::Kind::None) {
    Rng ood_rng = rng.derive("ood");
    MseAccumulator acc;
    for (int i = 0; i < cfg.eval_samples; ++i) {
      const Center c = sample_center(cfg.task, ood_rng, true);
      acc.add(predict_top(cache, encode_centers(cfg.task, {c}), cfg.settle),
              bump_image(cfg.task, {c}));
    }
    out.ood_mse = acc.value();
  }

  for (int n : {2, 3}) {
    Rng multi_rng = rng.derive("multi", n);
    MseAccumulator acc;
    for (int i = 0; i < cfg.pair_samples; ++i) {
      std::vector<Center> centers;
      for (int b = 0; b < n; ++b) centers.push_back(sample_center(cfg.task, multi_rng, false));
      acc.add(predict_top(cache, encode_centers(cfg.task, centers), cfg.settle),
              bump_image(cfg.task, centers));
    }
    (n == 2 ? out.pair_mse : out.triple_mse) = acc.value();
  }
  return out;
}

// Per-integer-center squared error over the whole grid, for one trained net.
inline io::CsvTable bump_error_map(const BumpRunConfig& cfg, const NetworkParams& net) {
  const NetCache cache(net);
  io::CsvTable t{{"cx", "cy", "mse", "holdout"}, {}};
  for (Index cy = 0; cy < cfg.task.grid_n; ++cy) {
    for (Index cx = 0; cx < cfg.task.grid_n; ++cx) {
      const Center c = {static_cast<double>(cx), static_cast<double>(cy)};
      const Vec truth = bump_image(cfg.task, {c});
      const Vec pred = predict_top(cache, encode_centers(cfg.task, {c}), cfg.settle);
      MseAccumulator acc;
      acc.add(pred, truth);
      t.add_row({io::csv_num(static_cast<double>(cx)), io::csv_num(static_cast<double>(cy)),
                 io::csv_num(acc.value()),
                 cfg.task.holdout.contains(c[0], c[1], cfg.task.grid_n) ? "1" : "0"});
    }
  }
  return t;
}

inline MetricsReport run_bump(const BumpRunConfig& cfg, const std::string& out_dir = "") {
  Rng root(cfg.seed);
  std::vector<double> id, ood, pair2, pair3, zero;
  std::vector<LayerSparsity> sparsity_sum;
  std::optional<NetworkParams> first_net;

  for (int s = 0; s < cfg.n_seeds; ++s) {
    Rng seed_rng = root.derive("bump-seed", s);
    NetworkParams net = make_bump_network(cfg, seed_rng.derive("net"));
    Rng data_rng = seed_rng.derive("data");
    auto fitres = fit(std::move(net), bump_training_set(cfg, data_rng), cfg.settle, cfg.trainer,
                      cfg.epochs, seed_rng.derive("fit"));
    BumpEval ev = eval_bump(cfg, fitres.net, seed_rng.derive("eval"));

    id.push_back(ev.id_mse);
    if (ev.ood_mse) ood.push_back(*ev.ood_mse);
    pair2.push_back(ev.pair_mse);
    pair3.push_back(ev.triple_mse);
    zero.push_back(ev.zero_baseline);
    const auto sp = sparsity_stats(fitres.net, ev.id_settles);
    if (sparsity_sum.empty()) sparsity_sum.resize(sp.size());
    for (std::size_t l = 0; l < sp.size(); ++l) {
      sparsity_sum[l].k_eff += sp[l].k_eff / cfg.n_seeds;
      sparsity_sum[l].k_95 += sp[l].k_95 / cfg.n_seeds;
    }
    if (!out_dir.empty())
      io::save_checkpoint(out_dir + "/bump_seed" + std::to_string(s) + ".vnck", fitres.net,
                          &fitres.states);
    if (s == 0) first_net = std::move(fitres.net);
  }

  MetricsReport r;
  r.benchmark = "bump";
  r.n_seeds = cfg.n_seeds;
  r.splits.emplace_back("id_mse", ci_over_seeds(id));
  if (!ood.empty()) r.splits.emplace_back("ood_mse", ci_over_seeds(ood));
  r.splits.emplace_back("pair_mse", ci_over_seeds(pair2));
  r.splits.emplace_back("triple_mse", ci_over_seeds(pair3));
  r.splits.emplace_back("id_zero_baseline", ci_over_seeds(zero));
  const double id_mean = r.splits.front().second.mean;
  r.ratios.emplace_back("ood_over_id", ood.empty() ? std::optional<double>{}
                                                   : ci_over_seeds(ood).mean / id_mean);
  r.ratios.emplace_back("pair_over_id", ci_over_seeds(pair2).mean / id_mean);
  for (std::size_t l = 0; l < sparsity_sum.size(); ++l)
    r.sparsity.emplace_back("layer" + std::to_string(l), sparsity_sum[l]);

  if (!out_dir.empty() && first_net) {
    io::write_csv(out_dir + "/bump_error_map.csv", bump_error_map(cfg, *first_net));
    io::write_json(out_dir + "/bump_report.json", report_to_json(r));
  }
  return r;
}

}  // namespace vn::bench
