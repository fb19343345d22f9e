// Command-line front end: training, evaluation, full benchmarks, and the
// verification suites, all driven by dotted-key config files with VN_*
// environment overrides. Reports are deterministic JSON and CSV; only
// manifest.json carries wall-clock timestamps.
//
// Exit codes: 0 success, 2 configuration or usage error (the message names
// the offending key), 3 runtime or verification failure, 4 unreadable
// checkpoint (bad magic, version, or framing).

#include "vn/bench/run_bump.hpp"
#include "vn/bench/run_funcs.hpp"
#include "vn/bench/run_nbody.hpp"
#include "vn/verify.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <string>
#include <vector>

namespace {

enum class Phase { Config, Checkpoint, Run };

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  long long seed = -1;  // -1 = not given on the command line
  int threads = 0;      // 0 = leave Eigen's default
};

void add_common(CLI::App* sub, CommonArgs* args) {
  sub->add_option("--config", args->config_path, "dotted-key config file");
  sub->add_option("--out", args->out_dir, "output directory for reports and checkpoints");
  sub->add_option("--seed", args->seed, "root seed, overrides the config");
  sub->add_option("--threads", args->threads, "Eigen thread count, 0 keeps the default");
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Config precedence: file, then VN_* environment, then command-line flags.
vn::Config assemble_config(const CommonArgs& args) {
  vn::Config cfg = args.config_path.empty() ? vn::Config()
                                            : vn::Config::parse_file(args.config_path);
  cfg.apply_env("VN_");
  if (args.seed >= 0) cfg.set("seed", std::to_string(args.seed));
  return cfg;
}

int resolve_threads(const vn::Config& cfg, const CommonArgs& args) {
  const int threads = args.threads > 0
                          ? args.threads
                          : static_cast<int>(cfg.get_int("threads", 0));
  if (threads > 0) Eigen::setNbThreads(threads);
  return threads;
}

void require_out_dir(const CommonArgs& args, const char* sub) {
  vn::require(!args.out_dir.empty(), "config: subcommand \"", sub,
              "\" needs --out to know where to write");
  std::filesystem::create_directories(args.out_dir);
}

std::string bench_name(const vn::Config& cfg, const std::string& from_cli) {
  const std::string from_cfg = cfg.get_string("bench", "");
  std::string which = from_cli;
  if (which.empty()) {
    vn::require(!from_cfg.empty(),
                "config: key \"bench\" must name bump, funcs, or nbody (or pass it on the "
                "command line)");
    which = from_cfg;
  } else {
    vn::require(from_cfg.empty() || from_cfg == which, "config: key \"bench\" says \"",
                from_cfg, "\" but the command line says \"", which, "\"");
  }
  vn::require(which == "bump" || which == "funcs" || which == "nbody",
              "config: unknown benchmark \"", which, "\" (want bump, funcs, or nbody)");
  return which;
}

void write_manifest(const CommonArgs& args, const vn::Config& cfg, const std::string& sub,
                    const std::string& started, int threads) {
  vn::io::Json m;
  m["tool_version"] = vn::kLibraryVersion;
  m["subcommand"] = sub;
  m["config_path"] = args.config_path;
  m["out_dir"] = args.out_dir;
  m["threads"] = threads;
  m["started_utc"] = started;
  m["finished_utc"] = utc_now();
  m["config"] = vn::io::Json::object();
  for (const auto& [k, v] : cfg.entries()) m["config"][k] = v;
  vn::io::write_json(args.out_dir + "/manifest.json", m);
}

vn::io::CsvTable history_table(const std::vector<vn::EpochStats>& history) {
  vn::io::CsvTable t{{"epoch", "mean_energy", "mean_recon_mse", "mean_l0", "mean_label_mse",
                      "samples", "batches", "batches_skipped"},
                     {}};
  for (std::size_t e = 0; e < history.size(); ++e) {
    const auto& h = history[e];
    std::string l0;  // per-layer mean support, semicolon-joined
    for (std::size_t l = 0; l < h.mean_l0.size(); ++l)
      l0 += (l ? ";" : "") + vn::io::csv_num(h.mean_l0[l]);
    t.add_row({std::to_string(e + 1), vn::io::csv_num(h.mean_energy),
               vn::io::csv_num(h.mean_recon_mse), l0,
               h.mean_label_mse ? vn::io::csv_num(*h.mean_label_mse) : "",
               std::to_string(h.samples_used), std::to_string(h.batches),
               std::to_string(h.batches_skipped)});
  }
  return t;
}

// ---- train -----------------------------------------------------------------
//
// One seed, no evaluation: the checkpoint written here is bit-identical to
// the first seed of the matching `bench` run because both derive the same
// random streams.

void train_bump(const vn::bench::BumpRunConfig& cfg, const std::string& out) {
  vn::Rng seed_rng = vn::Rng(cfg.seed).derive("bump-seed", 0);
  auto net = vn::bench::make_bump_network(cfg, seed_rng.derive("net"));
  vn::Rng data_rng = seed_rng.derive("data");
  auto fitres = vn::bench::fit(std::move(net), vn::bench::bump_training_set(cfg, data_rng),
                               cfg.settle, cfg.trainer, cfg.epochs, seed_rng.derive("fit"));
  vn::io::save_checkpoint(out + "/bump_seed0.vnck", fitres.net, &fitres.states);
  vn::io::write_csv(out + "/train_history.csv", history_table(fitres.history));
  std::printf("trained bump model: %d epochs, final energy %.6g\n", cfg.epochs,
              fitres.history.back().mean_energy);
}

void train_funcs(const vn::bench::FuncsRunConfig& cfg, const std::string& out) {
  vn::Rng seed_rng = vn::Rng(cfg.seed).derive("funcs-seed", 0);
  auto net = vn::bench::make_funcs_network(cfg, seed_rng.derive("net"));
  vn::Rng data_rng = seed_rng.derive("data");
  auto fitres = vn::bench::fit(std::move(net), vn::bench::funcs_training_set(cfg, data_rng),
                               cfg.settle, cfg.trainer, cfg.epochs, seed_rng.derive("fit"));
  vn::io::save_checkpoint(out + "/funcs_seed0.vnck", fitres.net, &fitres.states);
  vn::io::write_csv(out + "/train_history.csv", history_table(fitres.history));
  std::printf("trained funcs model: %d epochs, final energy %.6g\n", cfg.epochs,
              fitres.history.back().mean_energy);
}

void train_nbody(const vn::bench::NBodyRunConfig& cfg, const std::string& out) {
  using namespace vn::bench;
  vn::Rng seed_rng = vn::Rng(cfg.seed).derive("nbody-seed", 0);

  std::vector<vn::TrainSample> pooled_data, drag_data;
  for (std::size_t fi = 0; fi < single_forces().size(); ++fi) {
    const SimConfig sim = sim_with(cfg, {single_forces()[fi]});
    vn::Rng data_rng = seed_rng.derive("data", static_cast<vn::Index>(fi));
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
  vn::io::save_checkpoint(out + "/nbody_pooled_seed0.vnck", pooled.net, &pooled.states);
  vn::io::save_checkpoint(out + "/nbody_drag_seed0.vnck", drag.net, &drag.states);
  vn::io::write_csv(out + "/train_history.csv", history_table(pooled.history));
  std::printf("trained nbody models: pooled %d epochs, drag %d epochs\n", cfg.epochs,
              cfg.drag_epochs);
}

// ---- eval ------------------------------------------------------------------

// Masked completion of the benchmark's own eval inputs: hide 30% of entries
// at random, settle on the rest, score the synthesis against the full input.
vn::io::Json masked_input_eval(const vn::NetCache& cache, const std::vector<vn::Vec>& inputs,
                               const vn::SettleConfig& scfg, int n_outer, vn::Rng rng) {
  double vn_hidden = 0.0, zero_hidden = 0.0, vn_observed = 0.0;
  int counted = 0;
  const vn::Index d = cache.net().layers.front().dims.d;
  for (const auto& x : inputs) {
    const vn::Vec mask = vn::make_mask(d, vn::MaskSpec::random(0.3), rng);
    const auto res = vn::masked_settle(cache, x, mask, scfg, n_outer);
    const auto score = vn::bench::score_masked_prediction(res.x_hat, x, mask);
    const auto zero =
        vn::bench::score_masked_prediction(vn::bench::baseline_fill(x, mask, vn::Vec::Zero(d)),
                                           x, mask);
    if (!score.applicable) continue;
    vn_hidden += score.hidden_mse;
    vn_observed += score.observed_mse;
    zero_hidden += zero.hidden_mse;
    ++counted;
  }
  vn::require(counted > 0, "masked evaluation: every mask came back empty");
  return {{"regime", "random_30"},
          {"samples", counted},
          {"hidden_mse", vn_hidden / counted},
          {"observed_mse", vn_observed / counted},
          {"zero_fill_hidden_mse", zero_hidden / counted}};
}

void eval_bump(const vn::Config& raw, const vn::NetworkParams& net, const std::string& out,
               bool masked) {
  const auto cfg = vn::bench::bump_config_from(raw);
  const auto ev = vn::bench::eval_bump(cfg, net, vn::Rng(cfg.seed).derive("cli-eval"));
  vn::io::Json j;
  j["benchmark"] = "bump";
  j["id_mse"] = ev.id_mse;
  j["ood_mse"] = ev.ood_mse ? vn::io::Json(*ev.ood_mse) : vn::io::Json(nullptr);
  j["pair_mse"] = ev.pair_mse;
  j["triple_mse"] = ev.triple_mse;
  j["id_zero_baseline"] = ev.zero_baseline;
  const auto sp = vn::bench::sparsity_stats(net, ev.id_settles);
  j["sparsity"] = vn::io::Json::object();
  for (std::size_t l = 0; l < sp.size(); ++l)
    j["sparsity"]["layer" + std::to_string(l)] = {{"k_eff", sp[l].k_eff},
                                                  {"k_95", sp[l].k_95}};
  if (masked) {
    std::vector<vn::Vec> inputs;
    vn::Rng in_rng = vn::Rng(cfg.seed).derive("cli-masked-inputs");
    for (int i = 0; i < cfg.eval_samples; ++i) {
      const auto c = vn::bench::sample_center(cfg.task, in_rng, false);
      inputs.push_back(vn::bench::encode_centers(cfg.task, {c}));
    }
    vn::Rng mask_rng = vn::Rng(cfg.seed).derive("cli-masked");
    j["masked"] = masked_input_eval(vn::NetCache(net), inputs, cfg.settle, 5, mask_rng);
  }
  vn::io::write_json(out + "/eval_report.json", j);
  std::printf("bump eval: id %.6g, pair %.6g\n", ev.id_mse, ev.pair_mse);
}

void eval_funcs(const vn::Config& raw, const vn::NetworkParams& net, const std::string& out,
                bool masked) {
  const auto cfg = vn::bench::funcs_config_from(raw);
  const vn::NetCache cache(net);
  vn::Rng rng = vn::Rng(cfg.seed).derive("cli-eval");

  vn::io::Json j;
  j["benchmark"] = "funcs";
  for (std::size_t di = 0; di < vn::bench::funcs_difficulties().size(); ++di) {
    const auto diff = vn::bench::funcs_difficulties()[di];
    vn::Rng stream = rng.derive("recon", static_cast<vn::Index>(di));
    vn::bench::MseAccumulator acc;
    for (int i = 0; i < cfg.eval_samples; ++i) {
      const vn::Vec x = vn::bench::sample_signal(stream.next_u64(), diff, cfg.d).values;
      const auto res = vn::settle(cache, x, cfg.settle);
      acc.add(net.layers.front().S * res.codes.front(), x);
    }
    j[vn::bench::difficulty_name(diff) + "_recon"] = acc.value();
  }
  if (masked) {
    std::vector<vn::Vec> inputs;
    vn::Rng in_rng = vn::Rng(cfg.seed).derive("cli-masked-inputs");
    for (int i = 0; i < cfg.masked_samples; ++i)
      inputs.push_back(
          vn::bench::sample_signal(in_rng.next_u64(), vn::bench::Difficulty::ID, cfg.d).values);
    vn::Rng mask_rng = vn::Rng(cfg.seed).derive("cli-masked");
    j["masked"] = masked_input_eval(cache, inputs, cfg.settle, cfg.n_outer, mask_rng);
  }
  vn::io::write_json(out + "/eval_report.json", j);
  std::printf("funcs eval written to %s/eval_report.json\n", out.c_str());
}

void eval_nbody(const vn::Config& raw, const vn::NetworkParams& net, const std::string& out,
                bool masked, bool rollout) {
  using namespace vn::bench;
  const auto cfg = nbody_config_from(raw);
  const vn::NetCache cache(net);
  vn::Rng rng = vn::Rng(cfg.seed).derive("cli-eval");

  vn::io::Json j;
  j["benchmark"] = "nbody";
  for (std::size_t fi = 0; fi < single_forces().size(); ++fi) {
    vn::Rng fr = rng.derive("id", static_cast<vn::Index>(fi));
    const double mse =
        model_force_mse(cfg, cache, sim_with(cfg, {single_forces()[fi]}), cfg.bodies, fr);
    j["id_" + force_name(single_forces()[fi])] = mse;
  }
  const auto pairs = force_pairs();
  for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
    vn::Rng pr = rng.derive("ood", static_cast<vn::Index>(pi));
    std::vector<vn::Vec> targets;
    const double mse = model_force_mse(cfg, cache, sim_with(cfg, pairs[pi]), cfg.bodies, pr,
                                       &targets);
    j["ood_" + force_set_name(pairs[pi])] = mse;
    j["base_" + force_set_name(pairs[pi])] = mean_predictor_mse(targets);
  }
  if (masked) {
    std::vector<vn::Vec> inputs;
    vn::Rng in_rng = rng.derive("masked-inputs");
    auto set = generate_nbody_dataset(sim_with(cfg, {single_forces()[0]}), cfg.bodies, 1,
                                      cfg.eval_steps, in_rng);
    for (const auto& s : set) inputs.push_back(s.features);
    vn::Rng mask_rng = rng.derive("masked");
    j["masked"] = masked_input_eval(cache, inputs, cfg.settle, 5, mask_rng);
  }
  if (rollout) {
    vn::Rng ic_rng = rng.derive("rollout");
    vn::io::CsvTable t{{"curve", "step", "mse"}, {}};
    j["rollout"] = vn::io::Json::object();
    for (int ic = 0; ic < cfg.rollout_ics; ++ic) {
      const auto curve = rollout_drift(cfg, cache, sim_with(cfg, pairs[0]), cfg.bodies,
                                       force_set_name(pairs[0]) + "_ic" + std::to_string(ic),
                                       ic_rng);
      for (std::size_t i = 0; i < curve.mse.size(); ++i)
        t.add_row({curve.name, std::to_string(i + 1), vn::io::csv_num(curve.mse[i])});
      const auto s = summarize_drift(curve);
      j["rollout"][s.name] = {{"steps", s.steps}, {"final_mse", s.final_mse},
                              {"peak_mse", s.peak_mse}};
    }
    vn::io::write_csv(out + "/eval_drift.csv", t);
  }
  vn::io::write_json(out + "/eval_report.json", j);
  std::printf("nbody eval written to %s/eval_report.json\n", out.c_str());
}

// ---- export-config -----------------------------------------------------------

std::string common_reference() {
  vn::SettleConfig s;
  vn::TrainerConfig t;
  std::string txt;
  txt += "# Root seed and number of training seeds per benchmark.\n";
  txt += "seed = 1\n";
  txt += "seeds = 3\n\n";
  txt += "# Settling (sparse inference).\n";
  txt += "settle.max_sweeps = " + std::to_string(s.max_sweeps) + "\n";
  txt += "settle.tol = " + vn::io::format_double(s.tol) + "\n";
  txt += std::string("settle.accelerate = ") + (s.accelerate ? "true" : "false") + "\n\n";
  txt += "# Local learning.\n";
  txt += "trainer.rho_s = " + vn::io::format_double(t.rho_s) + "\n";
  txt += "trainer.rho_u = " + vn::io::format_double(t.rho_u) + "\n";
  txt += std::string("trainer.adaptive = ") + (t.use_adaptive_moments ? "true" : "false") + "\n";
  txt += "trainer.batch_size = " + std::to_string(t.batch_size) + "\n";
  txt += std::string("trainer.dc_removal = ") + (t.dc_removal ? "true" : "false") + "\n";
  return txt;
}

std::string bump_reference() {
  vn::bench::BumpRunConfig c;
  std::string txt = "bench = bump\n\n" + common_reference() + "\n";
  txt += "# Spatial bump decoding.\n";
  txt += "bump.grid_n = " + std::to_string(c.task.grid_n) + "\n";
  txt += "bump.sigma = " + vn::io::format_double(c.task.sigma) + "\n";
  txt += "# bump | onehot | fourier14 | fourier7 | scalar\n";
  txt += "bump.encoding = bump\n";
  txt += "# central_square | annulus | none\n";
  txt += "bump.holdout = central_square\n";
  txt += "bump.holdout_side = " + vn::io::format_double(c.task.holdout.side) + "\n";
  txt += "bump.annulus_inner = " + vn::io::format_double(c.task.holdout.r_inner) + "\n";
  txt += "bump.annulus_outer = " + vn::io::format_double(c.task.holdout.r_outer) + "\n";
  txt += "bump.atoms = " + std::to_string(c.atoms) + "\n";
  txt += "bump.k_top = " + std::to_string(c.k_top) + "\n";
  txt += "bump.lambda = " + vn::io::format_double(c.lambda) + "\n";
  txt += "bump.beta_td = " + vn::io::format_double(c.beta_td) + "\n";
  txt += "bump.train_samples = " + std::to_string(c.train_samples) + "\n";
  txt += "bump.eval_samples = " + std::to_string(c.eval_samples) + "\n";
  txt += "bump.pair_samples = " + std::to_string(c.pair_samples) + "\n";
  txt += "bump.epochs = " + std::to_string(c.epochs) + "\n";
  return txt;
}

std::string funcs_reference() {
  vn::bench::FuncsRunConfig c;
  auto list = [](const std::vector<vn::Index>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i)
      s += (i ? "," : "") + std::to_string(v[i]);
    return s;
  };
  std::string txt = "bench = funcs\n\n" + common_reference() + "\n";
  txt += "# Sampled function composition.\n";
  txt += "funcs.d = " + std::to_string(c.d) + "\n";
  txt += "funcs.atoms = " + list(c.atoms) + "\n";
  txt += "funcs.k_top = " + list(c.k_top) + "\n";
  txt += "funcs.interfaces = " + list(c.interfaces) + "\n";
  txt += "funcs.lambda1 = " + vn::io::format_double(c.lambda1) + "\n";
  txt += "funcs.lambda_ratio = " + vn::io::format_double(c.lambda_ratio) + "\n";
  txt += "funcs.beta_td = " + vn::io::format_double(c.beta_td) + "\n";
  txt += "funcs.train_samples = " + std::to_string(c.train_samples) + "\n";
  txt += "funcs.eval_samples = " + std::to_string(c.eval_samples) + "\n";
  txt += "funcs.masked_samples = " + std::to_string(c.masked_samples) + "\n";
  txt += "funcs.epochs = " + std::to_string(c.epochs) + "\n";
  txt += "funcs.n_outer = " + std::to_string(c.n_outer) + "\n";
  return txt;
}

std::string nbody_reference() {
  vn::bench::NBodyRunConfig c;
  std::string txt = "bench = nbody\n\n" + common_reference() + "\n";
  txt += "# Planar n-body force fields.\n";
  txt += "nbody.bodies = " + std::to_string(c.bodies) + "\n";
  txt += "nbody.ood_bodies = 5,4,3\n";
  txt += "nbody.atoms = " + std::to_string(c.atoms) + "\n";
  txt += "nbody.k_top = " + std::to_string(c.k_top) + "\n";
  txt += "nbody.lambda = " + vn::io::format_double(c.lambda) + "\n";
  txt += "nbody.beta_td = " + vn::io::format_double(c.beta_td) + "\n";
  txt += "nbody.control_lambda = " + vn::io::format_double(c.control_lambda) + "\n";
  txt += "nbody.dt = " + vn::io::format_double(c.sim.dt) + "\n";
  txt += "nbody.train_clips = " + std::to_string(c.train_clips) + "\n";
  txt += "nbody.clip_steps = " + std::to_string(c.clip_steps) + "\n";
  txt += "nbody.epochs = " + std::to_string(c.epochs) + "\n";
  txt += "nbody.drag_epochs = " + std::to_string(c.drag_epochs) + "\n";
  txt += "nbody.eval_clips = " + std::to_string(c.eval_clips) + "\n";
  txt += "nbody.eval_steps = " + std::to_string(c.eval_steps) + "\n";
  txt += "nbody.rollout_ics = " + std::to_string(c.rollout_ics) + "\n";
  txt += "nbody.rollout_steps = " + std::to_string(c.rollout_steps) + "\n";
  return txt;
}

std::string reference_config(const std::string& which) {
  if (which == "bump") return bump_reference();
  if (which == "funcs") return funcs_reference();
  if (which == "nbody") return nbody_reference();
  vn::fail("config: unknown benchmark \"", which, "\" (want bump, funcs, or nbody)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rank-one dictionary networks: train, evaluate, benchmark, verify"};
  app.set_version_flag("--version", vn::kLibraryVersion);
  app.require_subcommand(1);

  CommonArgs args;

  auto* train = app.add_subcommand("train", "train one seed and write checkpoints");
  add_common(train, &args);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on its benchmark");
  add_common(eval, &args);
  std::string checkpoint_path;
  bool eval_masked_flag = false, eval_rollout_flag = false;
  eval->add_option("--checkpoint", checkpoint_path, "trained model to load")->required();
  eval->add_flag("--masked", eval_masked_flag, "also score masked input completion");
  eval->add_flag("--rollout", eval_rollout_flag, "also run closed-loop rollouts (nbody)");

  auto* bench = app.add_subcommand("bench", "run a full multi-seed benchmark");
  add_common(bench, &args);
  std::string bench_positional;
  bench->add_option("benchmark", bench_positional, "bump | funcs | nbody")->required();

  auto* verify = app.add_subcommand("verify", "run brute-force verification suites");
  add_common(verify, &args);
  std::vector<std::string> suites;
  verify->add_option("--suite", suites,
                     "suites to run (descent fista danskin superposition rank recovery "
                     "masked rk4 all)");

  auto* exportc = app.add_subcommand("export-config", "write reference configs with defaults");
  add_common(exportc, &args);
  std::string export_bench = "bump";
  exportc->add_option("--bench", export_bench, "bump | funcs | nbody");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  Phase phase = Phase::Config;
  try {
    const std::string started = utc_now();
    vn::Config cfg = assemble_config(args);
    const int threads = resolve_threads(cfg, args);

    if (exportc->parsed()) {
      const std::string text = reference_config(export_bench);
      if (args.out_dir.empty()) {
        std::fputs(text.c_str(), stdout);
      } else {
        std::filesystem::create_directories(args.out_dir);
        const std::string path = args.out_dir + "/" + export_bench + ".cfg";
        vn::io::write_text_file(path, text);
        std::printf("wrote %s\n", path.c_str());
      }
      return 0;
    }

    if (verify->parsed()) {
      if (suites.empty()) suites = {"all"};
      const auto seed = static_cast<std::uint64_t>(cfg.get_int("seed", 1));
      cfg.reject_unread();
      phase = Phase::Run;
      const auto results = vn::verify::run_suites(suites, seed);
      bool all_passed = true;
      for (const auto& r : results) {
        std::printf("%-14s %s\n", r.name.c_str(), r.passed ? "PASS" : "FAIL");
        all_passed = all_passed && r.passed;
      }
      if (!args.out_dir.empty()) {
        std::filesystem::create_directories(args.out_dir);
        vn::io::write_json(args.out_dir + "/verify_report.json",
                           vn::verify::suites_to_json(results));
        write_manifest(args, cfg, "verify", started, threads);
      }
      vn::require(all_passed, "verification failed");
      return 0;
    }

    if (train->parsed()) {
      require_out_dir(args, "train");
      const std::string which = bench_name(cfg, "");
      if (which == "bump") {
        const auto rcfg = vn::bench::bump_config_from(cfg);
        cfg.reject_unread();
        phase = Phase::Run;
        train_bump(rcfg, args.out_dir);
      } else if (which == "funcs") {
        const auto rcfg = vn::bench::funcs_config_from(cfg);
        cfg.reject_unread();
        phase = Phase::Run;
        train_funcs(rcfg, args.out_dir);
      } else {
        const auto rcfg = vn::bench::nbody_config_from(cfg);
        cfg.reject_unread();
        phase = Phase::Run;
        train_nbody(rcfg, args.out_dir);
      }
      write_manifest(args, cfg, "train", started, threads);
      return 0;
    }

    if (eval->parsed()) {
      require_out_dir(args, "eval");
      const std::string which = bench_name(cfg, "");
      phase = Phase::Checkpoint;
      const auto ck = vn::io::load_checkpoint(checkpoint_path);
      phase = Phase::Config;
      if (which == "bump") {
        const auto probe = vn::bench::bump_config_from(cfg);  // validates keys
        cfg.reject_unread();
        phase = Phase::Run;
        eval_bump(cfg, ck.net, args.out_dir, eval_masked_flag);
      } else if (which == "funcs") {
        const auto probe = vn::bench::funcs_config_from(cfg);
        cfg.reject_unread();
        phase = Phase::Run;
        eval_funcs(cfg, ck.net, args.out_dir, eval_masked_flag);
      } else {
        const auto probe = vn::bench::nbody_config_from(cfg);
        cfg.reject_unread();
        phase = Phase::Run;
        eval_nbody(cfg, ck.net, args.out_dir, eval_masked_flag, eval_rollout_flag);
      }
      write_manifest(args, cfg, "eval", started, threads);
      return 0;
    }

    // bench
    const std::string which = bench_name(cfg, bench_positional);
    if (!args.out_dir.empty()) std::filesystem::create_directories(args.out_dir);
    vn::bench::MetricsReport report;
    if (which == "bump") {
      const auto rcfg = vn::bench::bump_config_from(cfg);
      cfg.reject_unread();
      phase = Phase::Run;
      report = vn::bench::run_bump(rcfg, args.out_dir);
    } else if (which == "funcs") {
      const auto rcfg = vn::bench::funcs_config_from(cfg);
      cfg.reject_unread();
      phase = Phase::Run;
      report = vn::bench::run_funcs(rcfg, args.out_dir);
    } else {
      const auto rcfg = vn::bench::nbody_config_from(cfg);
      cfg.reject_unread();
      phase = Phase::Run;
      report = vn::bench::run_nbody(rcfg, args.out_dir);
    }
    std::printf("%s\n", vn::bench::report_to_json(report).dump(2).c_str());
    if (!args.out_dir.empty()) write_manifest(args, cfg, "bench", started, threads);
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    if (phase == Phase::Config) return 2;
    if (phase == Phase::Checkpoint) {
      const std::string msg = e.what();
      const bool framing = msg.find("magic") != std::string::npos ||
                           msg.find("version") != std::string::npos ||
                           msg.find("truncated") != std::string::npos ||
                           msg.find("trailing") != std::string::npos;
      return framing ? 4 : 3;
    }
    return 3;
  }
}
