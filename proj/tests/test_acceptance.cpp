// Acceptance gate: one pass/fail line per criterion, written to stdout and
// to acceptance_report.txt in the working directory. Criteria 1-8 run the
// brute-force verification suites at their stated sizes; 9-11 run the three
// benchmarks at full scale; 12 reruns a small training config twice and
// byte-compares every artifact. Exit code is the number of failed criteria.

#include "vn/bench/run_bump.hpp"
#include "vn/bench/run_funcs.hpp"
#include "vn/bench/run_nbody.hpp"
#include "vn/verify.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr std::uint64_t kSuiteSeed = 2026;

struct Line {
  int id;
  std::string name;
  bool passed;
  double seconds;
  std::string detail;
};

std::string render(const Line& l) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "criterion %02d %-28s %s %8.1fs   %s", l.id, l.name.c_str(),
                l.passed ? "PASS" : "FAIL", l.seconds, l.detail.c_str());
  return buf;
}

class Gate {
 public:
  void run(int id, const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    bool passed = false;
    std::string detail;
    try {
      std::tie(passed, detail) = body();
    } catch (const std::exception& e) {
      passed = false;
      detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    lines_.push_back({id, name, passed, secs, detail});
    std::printf("%s\n", render(lines_.back()).c_str());
    std::fflush(stdout);
  }

  int finish(const std::string& path) {
    std::ofstream out(path);
    int failed = 0;
    for (const auto& l : lines_) {
      out << render(l) << "\n";
      if (!l.passed) ++failed;
    }
    out << (failed == 0 ? "all criteria passed\n"
                        : std::to_string(failed) + " criteria failed\n");
    std::printf("%s: %s\n", path.c_str(),
                failed == 0 ? "all criteria passed"
                            : (std::to_string(failed) + " criteria failed").c_str());
    return failed;
  }

 private:
  std::vector<Line> lines_;
};

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Suite adapter: pass/fail from the suite, detail from selected stat keys.
std::pair<bool, std::string> suite(const std::string& name,
                                   const std::vector<std::string>& keys) {
  const auto r = vn::verify::run_suite(name, kSuiteSeed);
  std::string detail;
  for (const auto& k : keys) {
    if (!r.stats.contains(k)) continue;
    if (!detail.empty()) detail += ", ";
    const auto& v = r.stats[k];
    detail += k + " " + (v.is_number_float() ? short_num(v.get<double>()) : v.dump());
  }
  return {r.passed, detail};
}

const vn::bench::CiStat* find_split(const vn::bench::MetricsReport& r, const std::string& name) {
  for (const auto& [k, v] : r.splits)
    if (k == name) return &v;
  return nullptr;
}

std::optional<double> find_ratio(const vn::bench::MetricsReport& r, const std::string& name) {
  for (const auto& [k, v] : r.ratios)
    if (k == name) return v;
  return std::nullopt;
}

const vn::bench::MaskedCellReport* find_masked(const vn::bench::MetricsReport& r,
                                               const std::string& regime,
                                               const std::string& difficulty,
                                               const std::string& model) {
  for (const auto& c : r.masked)
    if (c.regime == regime && c.difficulty == difficulty && c.model == model) return &c;
  return nullptr;
}

std::pair<bool, std::string> bump_criterion() {
  vn::bench::BumpRunConfig cfg;
  const auto report = vn::bench::run_bump(cfg, "acceptance_artifacts/bump");
  const auto ratio = find_ratio(report, "ood_over_id");
  const auto* pair = find_split(report, "pair_mse");
  const auto* id = find_split(report, "id_mse");
  if (!ratio || !pair || !id) return {false, "report is missing ood_over_id or pair_mse"};
  const bool ok = *ratio <= 1.5 && pair->mean <= 1e-2;
  return {ok, "ood/id " + short_num(*ratio) + " (need <= 1.5), pair mse " +
                  short_num(pair->mean) + " (need <= 1e-2), id mse " + short_num(id->mean)};
}

std::pair<bool, std::string> funcs_criterion() {
  vn::bench::FuncsRunConfig cfg;
  const auto report = vn::bench::run_funcs(cfg, "acceptance_artifacts/funcs");
  const auto* id = find_split(report, "id_recon");
  const auto* model = find_masked(report, "forecast_25", "hard", "vn");
  const auto* base = find_masked(report, "forecast_25", "hard", "dataset_mean");
  if (!id || !model || !base || !model->applicable || !base->applicable)
    return {false, "report is missing id_recon or the forecast_25/hard masked cells"};
  const bool ok = id->mean <= 1e-3 && model->hidden.mean < base->hidden.mean;
  return {ok, "id recon " + short_num(id->mean) + " (need <= 1e-3), masked hard forecast " +
                  short_num(model->hidden.mean) + " vs mean baseline " +
                  short_num(base->hidden.mean)};
}

std::pair<bool, std::string> nbody_criterion() {
  vn::bench::NBodyRunConfig cfg;
  const auto report = vn::bench::run_nbody(cfg, "acceptance_artifacts/nbody");
  const auto* drag = find_split(report, "drag_dedicated");
  if (!drag) return {false, "report is missing drag_dedicated"};

  int rel_total = 0, rel_won = 0;
  double worst = 0.0;
  std::string worst_name;
  for (const auto& [k, v] : report.ratios) {
    const bool at_n5 = k.size() > 7 && k.compare(k.size() - 3, 3, "_n5") == 0;
    if (k.rfind("rel_", 0) != 0 || !at_n5) continue;
    ++rel_total;
    if (v && *v < 1.0) ++rel_won;
    if (v && *v > worst) {
      worst = *v;
      worst_name = k;
    }
  }

  int long_curves = 0;
  for (const auto& d : report.drift)
    if (d.name.rfind("control_free", 0) != 0 && d.steps >= cfg.rollout_steps) ++long_curves;
  const bool drift_csv =
      std::filesystem::exists("acceptance_artifacts/nbody/nbody_drift.csv");

  const bool ok = drag->mean <= 1e-4 && rel_total == 6 && rel_won == rel_total &&
                  long_curves >= 4 && drift_csv;
  return {ok, "drag mse " + short_num(drag->mean) + " (need <= 1e-4), ood beats baseline " +
                  std::to_string(rel_won) + "/" + std::to_string(rel_total) + " (worst " +
                  worst_name + " " + short_num(worst) + "), rollout curves " +
                  std::to_string(long_curves) + " of " + std::to_string(cfg.rollout_steps) +
                  " steps"};
}

// Small config, full code path: train + eval + artifact writing twice over,
// then byte-compare everything both runs produced.
std::pair<bool, std::string> determinism_criterion() {
  vn::bench::BumpRunConfig cfg;
  cfg.task.grid_n = 8;
  cfg.task.holdout.side = 3;
  cfg.atoms = 24;
  cfg.k_top = 4;
  cfg.train_samples = 40;
  cfg.eval_samples = 10;
  cfg.pair_samples = 5;
  cfg.epochs = 2;
  cfg.n_seeds = 2;
  cfg.settle.max_sweeps = 30;

  namespace fs = std::filesystem;
  const fs::path base = fs::temp_directory_path() / "vn_acceptance_det";
  const fs::path a = base / "a", b = base / "b";
  fs::remove_all(base);
  fs::create_directories(a);
  fs::create_directories(b);

  const auto ra = vn::bench::run_bump(cfg, a.string());
  const auto rb = vn::bench::run_bump(cfg, b.string());
  if (vn::bench::report_to_json(ra).dump() != vn::bench::report_to_json(rb).dump())
    return {false, "in-memory reports differ between reruns"};

  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  int compared = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    const auto name = entry.path().filename();
    if (!fs::exists(b / name)) return {false, "rerun did not write " + name.string()};
    if (slurp(entry.path()) != slurp(b / name))
      return {false, name.string() + " differs between reruns"};
    ++compared;
  }
  return {compared >= 4, std::to_string(compared) + " artifacts byte-identical across reruns"};
}

}  // namespace

int main() {
  std::filesystem::create_directories("acceptance_artifacts");
  Gate gate;

  gate.run(1, "energy descent", [] {
    return suite("descent", {"instances", "violations", "worst_excess"});
  });
  gate.run(2, "settled-gradient match", [] {
    return suite("danskin", {"instances", "matches", "worst_rel_error"});
  });
  gate.run(3, "code superposition", [] {
    return suite("superposition", {"pairs", "violations", "worst_error"});
  });
  gate.run(4, "synthesized-rank bound", [] {
    return suite("rank", {"instances", "violations", "max_rank_seen"});
  });
  gate.run(5, "exact support recovery", [] {
    return suite("recovery", {"trials_per_scale", "best_successes", "needed"});
  });
  gate.run(6, "masked completion fixed point", [] {
    return suite("masked", {"instances", "observed_mismatches", "objective_increases"});
  });
  gate.run(7, "accelerated settling", [] {
    return suite("fista", {"instances", "accelerated_no_worse"});
  });
  gate.run(8, "integrator order", [] {
    return suite("rk4", {"halving_ratio", "kinetic_drift"});
  });
  gate.run(9, "bump generalization", bump_criterion);
  gate.run(10, "function composition", funcs_criterion);
  gate.run(11, "n-body force fields", nbody_criterion);
  gate.run(12, "training determinism", determinism_criterion);

  const int failed = gate.finish("acceptance_report.txt");
  return failed > 125 ? 125 : failed;
}
