#pragma once

// Metric plumbing shared by the benchmark runners: seed-wise confidence
// intervals, code-sparsity summaries, masked-prediction scoring, and the
// trivial baselines the learned models are compared against.

#include "vn/inference.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace vn::bench {

// Two-sided 95% Student-t multipliers by degrees of freedom; beyond the table
// the last entry is reused, which is conservative.
inline double t_multiplier_95(int dof) {
  static constexpr double table[] = {12.706205, 4.302653, 3.182446, 2.776445, 2.570582,
                                     2.446912,  2.364624, 2.306004, 2.262157, 2.228139};
  require(dof >= 1, "t_multiplier_95: dof must be >= 1, got ", dof);
  return table[std::min(dof, 10) - 1];
}

struct CiStat {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> per_seed;
};

inline CiStat ci_over_seeds(const std::vector<double>& values) {
  require(!values.empty(), "ci_over_seeds: no values");
  CiStat s;
  s.per_seed = values;
  const auto n = static_cast<double>(values.size());
  for (double v : values) s.mean += v;
  s.mean /= n;
  if (values.size() == 1) {
    s.lo = s.hi = s.mean;
    return s;
  }
  double ssq = 0.0;
  for (double v : values) ssq += (v - s.mean) * (v - s.mean);
  const double sem = std::sqrt(ssq / (n - 1.0)) / std::sqrt(n);
  const double half = t_multiplier_95(static_cast<int>(values.size()) - 1) * sem;
  s.lo = s.mean - half;
  s.hi = s.mean + half;
  return s;
}

struct LayerSparsity {
  double k_eff = 0.0;  // mean settled support size
  double k_95 = 0.0;   // mean magnitude-ordered prefix reaching 95% of the
                       // full code's explained variance of the layer input
};

// k_95 of a single settled layer: atoms sorted by |g| descending; smallest
// prefix whose partial reconstruction explains 95% of what the full code
// explains. Zero codes have nothing to explain and score 0.
inline Index k95_of(const LayerParams& p, const Vec& x, const Vec& g) {
  std::vector<Index> active;
  for (Index i = 0; i < g.size(); ++i)
    if (g[i] != 0.0) active.push_back(i);
  if (active.empty()) return 0;
  std::sort(active.begin(), active.end(),
            [&g](Index a, Index b) { return std::abs(g[a]) != std::abs(g[b])
                                                ? std::abs(g[a]) > std::abs(g[b])
                                                : a < b; });
  const double xsq = x.squaredNorm();
  if (xsq == 0.0) return static_cast<Index>(active.size());
  const double ev_full = 1.0 - (x - p.S * g).squaredNorm() / xsq;
  if (ev_full <= 0.0) return static_cast<Index>(active.size());

  Vec partial = Vec::Zero(x.size());
  for (std::size_t k = 0; k < active.size(); ++k) {
    partial += g[active[k]] * p.S.col(active[k]);
    const double ev = 1.0 - (x - partial).squaredNorm() / xsq;
    if (ev >= 0.95 * ev_full) return static_cast<Index>(k) + 1;
  }
  return static_cast<Index>(active.size());
}

inline std::vector<LayerSparsity> sparsity_stats(const NetworkParams& net,
                                                 const std::vector<SettleResult>& results) {
  require(!results.empty(), "sparsity_stats: no settles");
  std::vector<LayerSparsity> out(static_cast<std::size_t>(net.depth()));
  for (const auto& res : results) {
    require(static_cast<Index>(res.codes.size()) == net.depth(),
            "sparsity_stats: settle has ", res.codes.size(), " layers, network has ",
            net.depth());
    for (Index l = 0; l < net.depth(); ++l) {
      const auto& p = net.layers[static_cast<std::size_t>(l)];
      const Vec& g = res.codes[static_cast<std::size_t>(l)];
      const Vec& x = res.layer_inputs[static_cast<std::size_t>(l)].x;
      out[static_cast<std::size_t>(l)].k_eff += static_cast<double>((g.array() != 0.0).count());
      out[static_cast<std::size_t>(l)].k_95 += static_cast<double>(k95_of(p, x, g));
    }
  }
  for (auto& s : out) {
    s.k_eff /= static_cast<double>(results.size());
    s.k_95 /= static_cast<double>(results.size());
  }
  return out;
}

// Mean squared error per entry, pooled over a set of (prediction, truth)
// pairs of equal length.
struct MseAccumulator {
  double sum = 0.0;
  std::int64_t count = 0;

  void add(const Vec& pred, const Vec& truth) {
    require(pred.size() == truth.size(), "mse: prediction has length ", pred.size(),
            ", truth has ", truth.size());
    sum += (pred - truth).squaredNorm();
    count += truth.size();
  }

  double value() const {
    require(count > 0, "mse: nothing accumulated");
    return sum / static_cast<double>(count);
  }
};

// Settle without any label and read the top interface synthesis.
inline Vec predict_top(const NetCache& cache, const Vec& x, const SettleConfig& cfg) {
  const auto& top = cache.net().layers.back();
  require(top.U.has_value(), "predict_top: top layer has no interface dictionary");
  const auto res = settle(cache, x, cfg);
  return *top.U * res.codes.back();
}

struct MaskedScore {
  double hidden_mse = 0.0;
  double observed_mse = 0.0;
  bool applicable = true;  // false when the regime hides nothing
};

inline MaskedScore score_masked_prediction(const Vec& x_hat, const Vec& x_true, const Vec& mask) {
  MaskedScore s;
  double h = 0.0, o = 0.0;
  Index nh = 0, no = 0;
  for (Index i = 0; i < x_true.size(); ++i) {
    const double err = x_hat[i] - x_true[i];
    if (mask[i] == 0.0) {
      h += err * err;
      ++nh;
    } else {
      o += err * err;
      ++no;
    }
  }
  if (nh == 0) {
    s.applicable = false;
  } else {
    s.hidden_mse = h / static_cast<double>(nh);
  }
  s.observed_mse = no > 0 ? o / static_cast<double>(no) : 0.0;
  return s;
}

// Imputation baselines: fill hidden entries with zero, or with a per-position
// mean taken from training data.
inline Vec baseline_fill(const Vec& x_obs, const Vec& mask, const Vec& fill) {
  return mask.cwiseProduct(x_obs) + (Vec::Ones(mask.size()) - mask).cwiseProduct(fill);
}

inline Vec dataset_mean(const std::vector<Vec>& xs) {
  require(!xs.empty(), "dataset_mean: no samples");
  Vec m = Vec::Zero(xs[0].size());
  for (const auto& x : xs) m += x;
  return m / static_cast<double>(xs.size());
}

// Mean-predictor ceiling for regression targets: predict the per-component
// mean of the set; its MSE is the pooled target variance.
inline double mean_predictor_mse(const std::vector<Vec>& targets) {
  const Vec mean = dataset_mean(targets);
  MseAccumulator acc;
  for (const auto& y : targets) acc.add(mean, y);
  return acc.value();
}

}  // namespace vn::bench
