#pragma once

// Layer-level primitives: the per-layer energy, its smooth gradient, the
// proximal operators, and the step-size (Lipschitz) machinery.
//
// A layer holds two dictionaries over one code vector g (length K):
//   S (d x K)  reconstructs the layer input,   x ~= S g
//   U (m x K)  writes the layer's interface,   h ~= U g
// Both are kept column-unit-norm by the learning rules. The layer energy is
//
//   E(g) = 1/2 ||x - S g||^2 + lambda ||g||_1 + beta/2 ||h_target - U g||^2
//
// with the last term present only when a top-down target h_target is defined.

#include "vn/common.hpp"
#include "vn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vn {

struct LayerDims {
  Index d = 0;  // input size
  Index m = 0;  // interface size, 0 when the layer has no U
  Index K = 0;  // number of atoms
};

enum class Activation { Identity, Relu };

inline Vec apply_activation(Activation act, Vec v) {
  if (act == Activation::Relu) v = v.cwiseMax(0.0);
  return v;
}

// Step sizes are either fixed positive reals or resolved to 1/L per settle.
using StepSize = std::optional<double>;  // nullopt = auto

struct LayerParams {
  LayerDims dims;
  Mat S;                         // d x K, unit columns
  std::optional<Mat> U;          // m x K, unit columns
  double lambda = 0.1;           // l1 weight, > 0
  double beta_td = 1.0;          // weight on the top-down consistency term
  std::optional<Index> k_top;    // hard sparsity cap, nullopt = soft-only
  Activation activation = Activation::Identity;
  StepSize eta;                  // step size with the U term active
  StepSize eta_bottom;           // step size before a target exists
};

struct LayerInput {
  Vec x;
  std::optional<Vec> h_target;
};

inline void validate_layer(const LayerParams& p, Index layer = -1) {
  const auto where = (layer >= 0) ? detail::cat("layer ", layer, ": ") : std::string();
  require(p.dims.d > 0 && p.dims.K > 0, where, "dims must be positive, got d=", p.dims.d,
          " K=", p.dims.K);
  require(p.S.rows() == p.dims.d && p.S.cols() == p.dims.K, where, "S is ", p.S.rows(), "x",
          p.S.cols(), ", expected ", p.dims.d, "x", p.dims.K);
  if (p.U) {
    require(p.dims.m > 0, where, "U present but dims.m=", p.dims.m);
    require(p.U->rows() == p.dims.m && p.U->cols() == p.dims.K, where, "U is ", p.U->rows(), "x",
            p.U->cols(), ", expected ", p.dims.m, "x", p.dims.K);
  } else {
    require(p.dims.m == 0, where, "dims.m=", p.dims.m, " but no U");
  }
  require(p.lambda > 0.0, where, "lambda must be > 0, got ", p.lambda);
  require(p.beta_td >= 0.0, where, "beta_td must be >= 0, got ", p.beta_td);
  if (p.k_top) require(*p.k_top >= 1 && *p.k_top <= p.dims.K, where, "k_top=", *p.k_top,
                       " outside [1, K=", p.dims.K, "]");
  if (p.eta) require(*p.eta > 0.0, where, "eta must be > 0, got ", *p.eta);
  if (p.eta_bottom) require(*p.eta_bottom > 0.0, where, "eta_bottom must be > 0, got ", *p.eta_bottom);
}

inline void check_layer_input(const LayerParams& p, const LayerInput& in, Index layer = -1) {
  const auto where = (layer >= 0) ? detail::cat("layer ", layer, ": ") : std::string();
  require(in.x.size() == p.dims.d, where, "input has length ", in.x.size(), ", expected d=",
          p.dims.d);
  if (in.h_target) {
    require(p.U.has_value(), where, "h_target given but layer has no U");
    require(in.h_target->size() == p.dims.m, where, "h_target has length ", in.h_target->size(),
            ", expected m=", p.dims.m);
  }
}

inline double layer_energy(const LayerParams& p, const LayerInput& in, const Vec& g) {
  double e = 0.5 * (in.x - p.S * g).squaredNorm() + p.lambda * g.lpNorm<1>();
  if (in.h_target) e += 0.5 * p.beta_td * (*in.h_target - *p.U * g).squaredNorm();
  return e;
}

// Gradient of the smooth part (everything except the l1 term).
inline Vec smooth_gradient(const LayerParams& p, const LayerInput& in, const Vec& g) {
  Vec grad = p.S.transpose() * (p.S * g - in.x);
  if (in.h_target) grad.noalias() += p.beta_td * (p.U->transpose() * (*p.U * g - *in.h_target));
  return grad;
}

inline Vec soft_threshold(const Vec& z, double tau) {
  require(tau >= 0.0, "soft_threshold: tau must be >= 0, got ", tau);
  return z.unaryExpr([tau](double v) {
    const double mag = std::abs(v) - tau;
    return mag > 0.0 ? (v < 0.0 ? -mag : mag) : 0.0;
  });
}

// Keep the k largest-magnitude entries, zero the rest. Ties resolve to the
// lower index so the projection is deterministic.
inline Vec topk_project(const Vec& v, Index k) {
  require(k >= 0, "topk_project: k must be >= 0, got ", k);
  if (k >= v.size()) return v;
  std::vector<Index> idx(static_cast<std::size_t>(v.size()));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::nth_element(idx.begin(), idx.begin() + k, idx.end(), [&v](Index a, Index b) {
    const double fa = std::abs(v[a]), fb = std::abs(v[b]);
    return fa != fb ? fa > fb : a < b;
  });
  Vec out = Vec::Zero(v.size());
  for (Index i = 0; i < k; ++i) out[idx[static_cast<std::size_t>(i)]] = v[idx[static_cast<std::size_t>(i)]];
  return out;
}

namespace detail {

// Largest eigenvalue of a PSD operator given as a matvec, by power iteration
// with Rayleigh-quotient stopping. Throws if the estimate has not stabilized
// to rel_tol within max_iter; the message carries the last estimate. The
// change-based stop lags the true error when the spectral gap is thin, so
// the default tolerance sits well below what callers need.
template <class MatVec>
double power_iteration_top(MatVec&& apply, Index n, double rel_tol = 1e-8, int max_iter = 10000) {
  require(n > 0, "power_iteration_top: empty operator");
  Rng rng = Rng(0x1b57a11).derive("power-iteration");
  Vec v = rng.normal_vec(n);
  v.normalize();
  double est = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vec w = apply(v);
    const double rayleigh = v.dot(w);
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;  // operator is zero on all iterates
    v = w / wn;
    if (it > 0 && std::abs(rayleigh - est) <= rel_tol * std::max(std::abs(rayleigh), 1e-300)) {
      return rayleigh;
    }
    est = rayleigh;
  }
  fail("power_iteration_top: no convergence after ", max_iter, " iterations, last estimate ", est);
}

}  // namespace detail

// Curvature bound of the smooth part: ||S^T S + beta U^T U||_2, or ||S^T S||_2
// when with_target is false (no top-down term active yet).
inline double lipschitz_constant(const LayerParams& p, bool with_target) {
  const bool use_u = with_target && p.U.has_value() && p.beta_td > 0.0;
  auto apply = [&](const Vec& v) {
    Vec w = p.S.transpose() * (p.S * v);
    if (use_u) w.noalias() += p.beta_td * (p.U->transpose() * (*p.U * v));
    return w;
  };
  return detail::power_iteration_top(apply, p.dims.K);
}

// Gaussian matrix with exactly unit-norm columns; the standard dictionary init.
inline Mat random_unit_columns(Rng& rng, Index rows, Index cols) {
  Mat m = rng.normal_mat(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    double n = m.col(j).norm();
    while (n < 1e-12) {  // vanishingly unlikely, but keep the invariant exact
      m.col(j) = rng.normal_vec(rows);
      n = m.col(j).norm();
    }
    m.col(j) /= n;
  }
  return m;
}

inline double max_unit_column_error(const Mat& m) {
  double worst = 0.0;
  for (Index j = 0; j < m.cols(); ++j) worst = std::max(worst, std::abs(m.col(j).norm() - 1.0));
  return worst;
}

}  // namespace vn
