#pragma once

// Per-sample synthesized operators and the diagnostics behind the sparse
// recovery story. A settled code turns the layer's atom pairs into one linear
// map W = U diag(g) S^T, applied in factored form and materialized only for
// rank analysis.

#include "vn/core.hpp"

#include <Eigen/SVD>

#include <numeric>

namespace vn {

// Non-owning views into the layer's dictionaries; keep the layer alive.
struct SynthOperator {
  const Mat* u_ref = nullptr;
  const Mat* s_ref = nullptr;
  Vec g;

  Vec apply(const Vec& x) const { return (*u_ref) * g.cwiseProduct(s_ref->transpose() * x); }

  Mat materialize() const { return (*u_ref) * g.asDiagonal() * s_ref->transpose(); }
};

inline SynthOperator synthesize(const LayerParams& p, const Vec& g) {
  require(p.U.has_value(), "synthesize: layer has no interface dictionary");
  require(g.size() == p.dims.K, "synthesize: code has length ", g.size(), ", expected K=",
          p.dims.K);
  return {&*p.U, &p.S, g};
}

// Rank by singular-value cutoff relative to the largest.
inline Index numerical_rank(const SynthOperator& op, double tol = 1e-8) {
  require(tol > 0.0, "numerical_rank: tol must be > 0, got ", tol);
  const Mat w = op.materialize();
  const Vec sv = Eigen::BDCSVD<Mat>(w).singularValues();
  if (sv.size() == 0 || sv[0] == 0.0) return 0;
  return (sv.array() > tol * sv[0]).count();
}

// max_{i != j} |<D_i, D_j>| / (||D_i|| ||D_j||)
inline double mutual_coherence(const Mat& dict) {
  require(dict.cols() >= 2, "mutual_coherence: need at least 2 columns, got ", dict.cols());
  const Mat gram = dict.transpose() * dict;
  double mu = 0.0;
  for (Index i = 0; i < dict.cols(); ++i) {
    require(gram(i, i) > 0.0, "mutual_coherence: column ", i, " is zero");
    for (Index j = i + 1; j < dict.cols(); ++j)
      mu = std::max(mu, std::abs(gram(i, j)) / std::sqrt(gram(i, i) * gram(j, j)));
  }
  return mu;
}

inline double superposition_check(const LayerParams& p, const Vec& g1, const Vec& g2) {
  require(g1.size() == p.dims.K && g2.size() == p.dims.K, "superposition_check: codes have lengths ",
          g1.size(), ", ", g2.size(), ", expected K=", p.dims.K);
  return (p.S * (g1 + g2) - (p.S * g1 + p.S * g2)).lpNorm<Eigen::Infinity>();
}

}  // namespace vn

// The recovery trial needs a settle, which lives above core in the stack.
#include "vn/inference.hpp"

namespace vn {

struct RecoveryResult {
  bool success = false;         // exact support match
  double mu = 0.0;              // coherence of the drawn dictionary
  bool bound_satisfied = false; // k < (1 + 1/mu) / 2
  double lambda = 0.0;          // l1 weight the trial ran with
};

// One sparse-recovery trial: draw a unit-column dictionary and a k-sparse
// code with coefficient magnitudes >= 0.5, synthesize the measurement, settle,
// and compare supports. k = 0 picks the largest support size satisfying the
// coherence bound of the drawn dictionary. lambda_scale overrides the
// noiseless default of 1e-6 * ||Phi^T y||_inf; with noise > 0 the
// universal-threshold rule 2 sigma sqrt(2 ln K) applies instead.
inline RecoveryResult recovery_trial(Index d, Index K, Index k, double noise, std::uint64_t seed,
                                     std::optional<double> lambda_scale = std::nullopt,
                                     double support_tol = 1e-4) {
  require(k >= 0, "recovery_trial: k must be >= 0, got ", k);
  require(k <= K, "recovery_trial: k=", k, " exceeds K=", K);
  require(noise >= 0.0, "recovery_trial: noise must be >= 0, got ", noise);

  Rng rng = Rng(seed).derive("recovery-trial");
  const Mat phi = random_unit_columns(rng, d, K);
  if (k == 0) {
    const double bound = 0.5 * (1.0 + 1.0 / mutual_coherence(phi));
    k = std::max<Index>(1, static_cast<Index>(std::ceil(bound)) - 1);
    k = std::min(k, K);
  }

  std::vector<Index> idx(static_cast<std::size_t>(K));
  std::iota(idx.begin(), idx.end(), Index{0});
  rng.shuffle(idx);
  Vec g_true = Vec::Zero(K);
  for (Index i = 0; i < k; ++i) {
    const double mag = rng.uniform(0.5, 2.0);
    g_true[idx[static_cast<std::size_t>(i)]] = rng.uniform() < 0.5 ? -mag : mag;
  }

  Vec y = phi * g_true;
  if (noise > 0.0) y += noise * rng.normal_vec(d);

  RecoveryResult out;
  out.mu = mutual_coherence(phi);
  out.bound_satisfied = static_cast<double>(k) < 0.5 * (1.0 + 1.0 / out.mu);
  out.lambda = noise > 0.0
                   ? 2.0 * noise * std::sqrt(2.0 * std::log(static_cast<double>(K)))
                   : lambda_scale.value_or(1e-6) * (phi.transpose() * y).lpNorm<Eigen::Infinity>();
  require(out.lambda > 0.0, "recovery_trial: degenerate measurement, lambda came out 0");

  LayerParams p;
  p.dims = {d, 0, K};
  p.S = phi;
  p.lambda = out.lambda;
  NetworkParams net{{p}};
  SettleConfig cfg;
  cfg.max_sweeps = 20000;
  cfg.tol = 1e-14;
  const auto res = settle(net, y, cfg);

  bool match = true;
  for (Index i = 0; i < K && match; ++i)
    match = (std::abs(res.codes[0][i]) > support_tol) == (g_true[i] != 0.0);
  out.success = match;
  return out;
}

}  // namespace vn
