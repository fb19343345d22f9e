#pragma once

// Sampled-function benchmark: a deep unsupervised stack codes 512-point
// signals built from a small primitive family. Reconstruction is scored on
// in-distribution draws and two out-of-distribution composition regimes, and
// masked completion is scored against fill-in baselines on four mask shapes.

#include "vn/bench/harness.hpp"
#include "vn/bench/signals.hpp"
#include "vn/io/checkpoint.hpp"

#include <array>
#include <string>
#include <vector>

namespace vn::bench {

struct FuncsRunConfig {
  Index d = 512;
  std::vector<Index> atoms = {256, 128, 64};
  std::vector<Index> k_top = {16, 12, 8};
  std::vector<Index> interfaces = {128, 64};  // one fewer than atoms
  double lambda1 = 0.02;
  double lambda_ratio = 1.5;  // per-layer multiplier going up
  double beta_td = 1.0;
  int train_samples = 3000;
  int eval_samples = 200;
  int masked_samples = 100;
  int epochs = 30;
  int n_outer = 5;
  int n_seeds = 3;
  std::uint64_t seed = 1;
  SettleConfig settle;
  TrainerConfig trainer;
};

inline std::vector<Index> parse_index_list(const std::string& text, const std::string& key) {
  std::vector<Index> out;
  std::size_t at = 0;
  while (at <= text.size()) {
    const auto comma = text.find(',', at);
    const auto part = text.substr(at, comma == std::string::npos ? comma : comma - at);
    try {
      std::size_t used = 0;
      out.push_back(static_cast<Index>(std::stoll(part, &used)));
      require(used == part.size(), "trailing characters");
    } catch (const std::exception&) {
      fail("config: key \"", key, "\" has non-integer element \"", part, "\" in \"", text, "\"");
    }
    if (comma == std::string::npos) break;
    at = comma + 1;
  }
  return out;
}

inline FuncsRunConfig funcs_config_from(const Config& cfg) {
  FuncsRunConfig r;
  r.d = static_cast<Index>(cfg.get_int("funcs.d", r.d));
  r.atoms = parse_index_list(cfg.get_string("funcs.atoms", "256,128,64"), "funcs.atoms");
  r.k_top = parse_index_list(cfg.get_string("funcs.k_top", "16,12,8"), "funcs.k_top");
  r.interfaces = parse_index_list(cfg.get_string("funcs.interfaces", "128,64"), "funcs.interfaces");
  r.lambda1 = cfg.get_double("funcs.lambda1", r.lambda1);
  r.lambda_ratio = cfg.get_double("funcs.lambda_ratio", r.lambda_ratio);
  r.beta_td = cfg.get_double("funcs.beta_td", r.beta_td);
  r.train_samples = static_cast<int>(cfg.get_int("funcs.train_samples", r.train_samples));
  r.eval_samples = static_cast<int>(cfg.get_int("funcs.eval_samples", r.eval_samples));
  r.masked_samples = static_cast<int>(cfg.get_int("funcs.masked_samples", r.masked_samples));
  r.epochs = static_cast<int>(cfg.get_int("funcs.epochs", r.epochs));
  r.n_outer = static_cast<int>(cfg.get_int("funcs.n_outer", r.n_outer));
  r.n_seeds = static_cast<int>(cfg.get_int("seeds", r.n_seeds));
  r.seed = static_cast<std::uint64_t>(cfg.get_int("seed", static_cast<long long>(r.seed)));
  r.settle = settle_from(cfg);
  r.trainer = trainer_from(cfg);
  require(!r.atoms.empty(), "config: key \"funcs.atoms\" must name at least one layer");
  require(r.k_top.size() == r.atoms.size(), "config: key \"funcs.k_top\" has ", r.k_top.size(),
          " entries, \"funcs.atoms\" has ", r.atoms.size());
  require(r.interfaces.size() + 1 == r.atoms.size(), "config: key \"funcs.interfaces\" has ",
          r.interfaces.size(), " entries, want one fewer than \"funcs.atoms\" (",
          r.atoms.size(), ")");
  require(r.d >= 2, "config: key \"funcs.d\" must be >= 2, got ", r.d);
  require(r.lambda1 > 0.0 && r.lambda_ratio > 0.0,
          "config: funcs.lambda1 and funcs.lambda_ratio must be > 0");
  require(r.n_seeds >= 1, "config: key \"seeds\" must be >= 1, got ", r.n_seeds);
  require(r.n_outer >= 0, "config: key \"funcs.n_outer\" must be >= 0, got ", r.n_outer);
  require(r.train_samples >= 1 && r.eval_samples >= 1 && r.masked_samples >= 1,
          "config: funcs sample counts must be >= 1");
  return r;
}

inline NetworkParams make_funcs_network(const FuncsRunConfig& cfg, Rng rng) {
  NetworkParams net;
  double lambda = cfg.lambda1;
  for (std::size_t l = 0; l < cfg.atoms.size(); ++l) {
    const Index d = l == 0 ? cfg.d : cfg.interfaces[l - 1];
    const Index m = l + 1 < cfg.atoms.size() ? cfg.interfaces[l] : 0;
    net.layers.push_back(init_layer(d, m, cfg.atoms[l], lambda, cfg.k_top[l], cfg.beta_td,
                                    rng.derive("layer", static_cast<Index>(l))));
    lambda *= cfg.lambda_ratio;
  }
  net.validate();
  return net;
}

inline std::vector<TrainSample> funcs_training_set(const FuncsRunConfig& cfg, Rng rng) {
  std::vector<TrainSample> data;
  data.reserve(static_cast<std::size_t>(cfg.train_samples));
  for (int i = 0; i < cfg.train_samples; ++i)
    data.push_back({sample_signal(rng.next_u64(), Difficulty::ID, cfg.d).values, std::nullopt});
  return data;
}

inline const std::array<Difficulty, 3>& funcs_difficulties() {
  static const std::array<Difficulty, 3> all = {Difficulty::ID, Difficulty::EasyOOD,
                                                Difficulty::HardOOD};
  return all;
}

inline std::string difficulty_name(Difficulty d) {
  switch (d) {
    case Difficulty::ID: return "id";
    case Difficulty::EasyOOD: return "easy";
    case Difficulty::HardOOD: return "hard";
  }
  fail("difficulty has an invalid tag");
}

inline const std::vector<std::string>& mask_regimes() {
  static const std::vector<std::string> all = {"forecast_25", "forecast_50", "random_30",
                                               "block_128"};
  return all;
}

struct FuncsEval {
  std::array<double, 3> recon{};        // per difficulty, first-layer synthesis MSE
  std::array<double, 3> signal_power{}; // mean squared signal value, same draws
  // hidden/observed MSE per [regime][difficulty][model 0=vn 1=zero 2=mean]
  std::vector<std::array<std::array<MaskedScore, 3>, 3>> masked;
  std::vector<SettleResult> id_settles;
};

inline FuncsEval eval_funcs(const FuncsRunConfig& cfg, const NetworkParams& net,
                            const Vec& train_mean, Rng rng) {
  const NetCache cache(net);
  FuncsEval out;

  for (std::size_t di = 0; di < funcs_difficulties().size(); ++di) {
    const Difficulty diff = funcs_difficulties()[di];
    Rng stream = rng.derive("recon", static_cast<Index>(di));
    MseAccumulator recon_acc, power_acc;
    for (int i = 0; i < cfg.eval_samples; ++i) {
      const Vec x = sample_signal(stream.next_u64(), diff, cfg.d).values;
      auto res = settle(cache, x, cfg.settle);
      recon_acc.add(net.layers.front().S * res.codes.front(), x);
      power_acc.add(Vec::Zero(x.size()), x);
      if (diff == Difficulty::ID) out.id_settles.push_back(std::move(res));
    }
    out.recon[di] = recon_acc.value();
    out.signal_power[di] = power_acc.value();
  }

  out.masked.resize(mask_regimes().size());
  for (std::size_t ri = 0; ri < mask_regimes().size(); ++ri) {
    const MaskSpec spec = MaskSpec::from_name(mask_regimes()[ri]);
    for (std::size_t di = 0; di < funcs_difficulties().size(); ++di) {
      const Difficulty diff = funcs_difficulties()[di];
      Rng stream = rng.derive("masked", static_cast<Index>(ri * 8 + di));
      std::array<double, 3> hidden_sum{}, observed_sum{};
      std::array<int, 3> hidden_n{};
      for (int i = 0; i < cfg.masked_samples; ++i) {
        const Vec x = sample_signal(stream.next_u64(), diff, cfg.d).values;
        const Vec mask = make_mask(cfg.d, spec, stream);
        const Vec x_obs = mask.cwiseProduct(x);
        const std::array<Vec, 3> preds = {
            masked_settle(cache, x_obs, mask, cfg.settle, cfg.n_outer).x_hat,
            baseline_fill(x_obs, mask, Vec::Zero(cfg.d)),
            baseline_fill(x_obs, mask, train_mean)};
        for (std::size_t m = 0; m < preds.size(); ++m) {
          const MaskedScore s = score_masked_prediction(preds[m], x, mask);
          if (s.applicable) {
            hidden_sum[m] += s.hidden_mse;
            ++hidden_n[m];
          }
          observed_sum[m] += s.observed_mse;
        }
      }
      for (std::size_t m = 0; m < 3; ++m) {
        MaskedScore cell;
        cell.applicable = hidden_n[m] > 0;
        cell.hidden_mse = cell.applicable ? hidden_sum[m] / hidden_n[m] : 0.0;
        cell.observed_mse = observed_sum[m] / cfg.masked_samples;
        out.masked[ri][di][m] = cell;
      }
    }
  }
  return out;
}

inline MetricsReport run_funcs(const FuncsRunConfig& cfg, const std::string& out_dir = "") {
  Rng root(cfg.seed);
  std::array<std::vector<double>, 3> recon, power;
  // masked[regime][difficulty][model] -> per-seed hidden / observed values
  const std::size_t nr = mask_regimes().size();
  std::vector<std::array<std::array<std::pair<std::vector<double>, std::vector<double>>, 3>, 3>>
      masked(nr);
  std::vector<LayerSparsity> sparsity_sum;

  for (int s = 0; s < cfg.n_seeds; ++s) {
    Rng seed_rng = root.derive("funcs-seed", s);
    NetworkParams net = make_funcs_network(cfg, seed_rng.derive("net"));
    Rng data_rng = seed_rng.derive("data");
    auto data = funcs_training_set(cfg, data_rng);
    std::vector<Vec> inputs;
    inputs.reserve(data.size());
    for (const auto& d : data) inputs.push_back(d.x);
    const Vec train_mean = dataset_mean(inputs);
    auto fitres =
        fit(std::move(net), std::move(data), cfg.settle, cfg.trainer, cfg.epochs,
            seed_rng.derive("fit"));
    FuncsEval ev = eval_funcs(cfg, fitres.net, train_mean, seed_rng.derive("eval"));

    for (std::size_t di = 0; di < 3; ++di) {
      recon[di].push_back(ev.recon[di]);
      power[di].push_back(ev.signal_power[di]);
    }
    for (std::size_t ri = 0; ri < nr; ++ri)
      for (std::size_t di = 0; di < 3; ++di)
        for (std::size_t m = 0; m < 3; ++m) {
          if (!ev.masked[ri][di][m].applicable) continue;
          masked[ri][di][m].first.push_back(ev.masked[ri][di][m].hidden_mse);
          masked[ri][di][m].second.push_back(ev.masked[ri][di][m].observed_mse);
        }
    const auto sp = sparsity_stats(fitres.net, ev.id_settles);
    if (sparsity_sum.empty()) sparsity_sum.resize(sp.size());
    for (std::size_t l = 0; l < sp.size(); ++l) {
      sparsity_sum[l].k_eff += sp[l].k_eff / cfg.n_seeds;
      sparsity_sum[l].k_95 += sp[l].k_95 / cfg.n_seeds;
    }
    if (!out_dir.empty())
      io::save_checkpoint(out_dir + "/funcs_seed" + std::to_string(s) + ".vnck", fitres.net,
                          &fitres.states);
  }

  MetricsReport r;
  r.benchmark = "funcs";
  r.n_seeds = cfg.n_seeds;
  static const char* model_names[3] = {"vn", "zero_fill", "dataset_mean"};
  for (std::size_t di = 0; di < 3; ++di) {
    const auto name = difficulty_name(funcs_difficulties()[di]);
    r.splits.emplace_back(name + "_recon", ci_over_seeds(recon[di]));
    r.scalars.emplace_back(name + "_signal_power", ci_over_seeds(power[di]).mean);
  }
  const double id_mean = r.splits[0].second.mean;
  r.ratios.emplace_back("easy_over_id", r.splits[1].second.mean / id_mean);
  r.ratios.emplace_back("hard_over_id", r.splits[2].second.mean / id_mean);
  for (std::size_t ri = 0; ri < nr; ++ri)
    for (std::size_t di = 0; di < 3; ++di)
      for (std::size_t m = 0; m < 3; ++m) {
        MaskedCellReport cell;
        cell.regime = mask_regimes()[ri];
        cell.difficulty = difficulty_name(funcs_difficulties()[di]);
        cell.model = model_names[m];
        cell.applicable = !masked[ri][di][m].first.empty();
        if (cell.applicable) {
          cell.hidden = ci_over_seeds(masked[ri][di][m].first);
          cell.observed = ci_over_seeds(masked[ri][di][m].second);
        }
        r.masked.push_back(std::move(cell));
      }
  for (std::size_t l = 0; l < sparsity_sum.size(); ++l)
    r.sparsity.emplace_back("layer" + std::to_string(l), sparsity_sum[l]);

  if (!out_dir.empty()) {
    io::CsvTable t{{"regime", "difficulty", "model", "hidden_mse", "observed_mse"}, {}};
    for (const auto& cell : r.masked) {
      if (!cell.applicable) continue;
      t.add_row({cell.regime, cell.difficulty, cell.model, io::csv_num(cell.hidden.mean),
                 io::csv_num(cell.observed.mean)});
    }
    io::write_csv(out_dir + "/funcs_mask_grid.csv", t);
    io::write_json(out_dir + "/funcs_report.json", report_to_json(r));
  }
  return r;
}

}  // namespace vn::bench
