#pragma once

// Network assembly and fast sparse inference by proximal-gradient settling.
//
// A network is a stack of layers coupled densely: layer l+1 consumes the
// activated interface of layer l, so dims chain as m_l == d_{l+1}. A settle
// alternates upward sweeps (each layer prox-steps its code, then emits
// x_{l+1} = phi(U_l g_l)) and downward sweeps (layer l receives the target
// h_l = S_{l+1} g_{l+1}, then prox-steps again), tracking total energy per
// sweep. Acceleration is FISTA-style extrapolation with function-value
// restart; with reject_increasing an energy-increasing sweep is rolled back.
//
// The Gram matrices S^T S and S^T S + beta U^T U are precomputed per layer in
// a NetCache so the per-step cost is one K x K matvec instead of dictionary
// products; build the cache once and reuse it while parameters are frozen.

#include "vn/core.hpp"

#include <cmath>
#include <limits>

namespace vn {

struct NetworkParams {
  std::vector<LayerParams> layers;

  Index depth() const { return static_cast<Index>(layers.size()); }

  void validate() const {
    require(!layers.empty(), "network has no layers");
    const Index L = depth();
    for (Index l = 0; l < L; ++l) {
      validate_layer(layers[static_cast<std::size_t>(l)], l);
      if (l + 1 < L) {
        const auto& lo = layers[static_cast<std::size_t>(l)];
        const auto& hi = layers[static_cast<std::size_t>(l + 1)];
        require(lo.U.has_value(), "layer ", l, " needs U to feed layer ", l + 1);
        require(lo.dims.m == hi.dims.d, "layer ", l, " interface m=", lo.dims.m,
                " does not match layer ", l + 1, " input d=", hi.dims.d);
      }
    }
  }
};

struct SettleConfig {
  int max_sweeps = 50;
  double tol = 1e-6;  // relative per-sweep energy improvement, > 0
  bool accelerate = true;
  bool reject_increasing = true;
  std::optional<std::vector<Vec>> warm_start;  // per-layer initial codes
};

struct SettleResult {
  std::vector<Vec> codes;               // settled g per layer
  std::vector<LayerInput> layer_inputs; // x and h_target each layer saw last
  std::vector<double> energy_trace;     // accepted per-sweep totals
  int sweeps_used = 0;
  bool converged = false;
};

// One proximal-gradient step at step size eta:
//   g+ = topk(soft(g - eta * grad_f(g), eta * lambda))
// The reference implementation; settle uses a Gram-cached equivalent.
inline Vec layer_step(const LayerParams& p, const LayerInput& in, const Vec& g, double eta) {
  check_layer_input(p, in);
  require(g.size() == p.dims.K, "layer_step: code has length ", g.size(), ", expected K=", p.dims.K);
  require(eta > 0.0, "layer_step: eta must be > 0, got ", eta);
  Vec out = soft_threshold(g - eta * smooth_gradient(p, in, g), eta * p.lambda);
  if (p.k_top) out = topk_project(out, *p.k_top);
  return out;
}

namespace detail {

struct LayerCache {
  Mat gram_s;     // S^T S
  Mat gram_full;  // S^T S + beta U^T U, empty when no U
  double eta_bottom = 0.0;  // step size while no target is defined
  double eta_full = 0.0;    // step size once the U term is active
};

// Auto step sizes take 1/L with a hair of headroom, since power iteration
// approaches the top eigenvalue from below.
inline double auto_eta(double lipschitz) {
  require(lipschitz > 0.0, "auto step size: Lipschitz estimate is ", lipschitz);
  return 1.0 / (lipschitz * (1.0 + 1e-4));
}

}  // namespace detail

class NetCache {
 public:
  explicit NetCache(const NetworkParams& net) : net_(&net) {
    net.validate();
    layers_.reserve(net.layers.size());
    for (const auto& p : net.layers) {
      detail::LayerCache c;
      c.gram_s.noalias() = p.S.transpose() * p.S;
      auto top_eig = [](const Mat& m) {
        return detail::power_iteration_top([&m](const Vec& v) -> Vec { return m * v; }, m.cols());
      };
      c.eta_bottom = p.eta_bottom ? *p.eta_bottom : detail::auto_eta(top_eig(c.gram_s));
      if (p.U && p.beta_td > 0.0) {
        c.gram_full.noalias() = c.gram_s + p.beta_td * (p.U->transpose() * *p.U);
        c.eta_full = p.eta ? *p.eta : detail::auto_eta(top_eig(c.gram_full));
      } else {
        c.gram_full = c.gram_s;
        c.eta_full = p.eta ? *p.eta : c.eta_bottom;
      }
      layers_.push_back(std::move(c));
    }
  }

  const NetworkParams& net() const { return *net_; }
  const detail::LayerCache& layer(Index l) const { return layers_[static_cast<std::size_t>(l)]; }

 private:
  const NetworkParams* net_;
  std::vector<detail::LayerCache> layers_;
};

namespace detail {

// Everything a settle mutates, copyable so a sweep can be rolled back.
struct SettleState {
  std::vector<Vec> g, g_prev;
  std::vector<double> t_prev, t_cur;  // FISTA momentum sequence, per layer
  std::vector<Vec> x, bx;   // layer inputs and S^T x
  std::vector<Vec> h, bh;   // targets and beta U^T h
  std::vector<char> has_h;
  std::vector<double> xsq, hsq;  // ||x||^2 and beta ||h||^2
};

inline double state_energy(const NetCache& cache, const SettleState& st) {
  double total = 0.0;
  const Index L = cache.net().depth();
  for (Index l = 0; l < L; ++l) {
    const auto li = static_cast<std::size_t>(l);
    const auto& p = cache.net().layers[li];
    const auto& c = cache.layer(l);
    const Vec& g = st.g[li];
    const Vec qs = c.gram_s * g;
    double e = 0.5 * st.xsq[li] - g.dot(st.bx[li]) + 0.5 * g.dot(qs) + p.lambda * g.lpNorm<1>();
    if (st.has_h[li]) {
      const Vec qf = c.gram_full * g;
      e += 0.5 * st.hsq[li] - g.dot(st.bh[li]) + 0.5 * (g.dot(qf) - g.dot(qs));
    }
    total += e;
  }
  return total;
}

}  // namespace detail

// Settle the whole stack on one input. `clamp_top` pins the top layer's
// interface target for the entire settle (supervised training); the top
// layer must have a U of matching size.
inline SettleResult settle(const NetCache& cache, const Vec& x, const SettleConfig& cfg,
                           const std::optional<Vec>& clamp_top = std::nullopt) {
  const NetworkParams& net = cache.net();
  const Index L = net.depth();
  require(cfg.max_sweeps >= 1, "settle: max_sweeps must be >= 1, got ", cfg.max_sweeps);
  require(cfg.tol > 0.0, "settle: tol must be > 0, got ", cfg.tol);
  require(x.size() == net.layers.front().dims.d, "settle: input has length ", x.size(),
          ", expected d=", net.layers.front().dims.d);
  require(x.allFinite(), "settle: input has non-finite entries");

  detail::SettleState st;
  st.g.resize(static_cast<std::size_t>(L));
  st.g_prev.resize(static_cast<std::size_t>(L));
  st.t_prev.assign(static_cast<std::size_t>(L), 1.0);
  st.t_cur.assign(static_cast<std::size_t>(L), 1.0);
  st.x.resize(static_cast<std::size_t>(L));
  st.bx.resize(static_cast<std::size_t>(L));
  st.h.resize(static_cast<std::size_t>(L));
  st.bh.resize(static_cast<std::size_t>(L));
  st.has_h.assign(static_cast<std::size_t>(L), 0);
  st.xsq.assign(static_cast<std::size_t>(L), 0.0);
  st.hsq.assign(static_cast<std::size_t>(L), 0.0);

  for (Index l = 0; l < L; ++l) {
    const auto li = static_cast<std::size_t>(l);
    const auto& p = net.layers[li];
    if (cfg.warm_start) {
      require(static_cast<Index>(cfg.warm_start->size()) == L,
              "settle: warm_start has ", cfg.warm_start->size(), " codes for ", L, " layers");
      const Vec& w = (*cfg.warm_start)[li];
      require(w.size() == p.dims.K, "settle: warm_start code ", l, " has length ", w.size(),
              ", expected K=", p.dims.K);
      st.g[li] = w;
    } else {
      st.g[li] = Vec::Zero(p.dims.K);
    }
    st.g_prev[li] = st.g[li];
  }
  st.x[0] = x;
  st.bx[0].noalias() = net.layers[0].S.transpose() * x;
  st.xsq[0] = x.squaredNorm();

  if (clamp_top) {
    const auto Li = static_cast<std::size_t>(L - 1);
    const auto& top = net.layers[Li];
    require(top.U.has_value(), "settle: clamp_top given but top layer has no U");
    require(clamp_top->size() == top.dims.m, "settle: clamp_top has length ", clamp_top->size(),
            ", expected m=", top.dims.m);
    st.has_h[Li] = 1;
    st.h[Li] = *clamp_top;
    st.bh[Li].noalias() = top.beta_td * (top.U->transpose() * *clamp_top);
    st.hsq[Li] = top.beta_td * clamp_top->squaredNorm();
  }

  // One prox step on layer l from the cached Grams; returns the sup-norm
  // change of the code. Extrapolation coefficient is (t_{k-1} - 1) / t_k,
  // so the first two steps of a layer run momentum-free.
  auto step_layer = [&](Index l) -> double {
    const auto li = static_cast<std::size_t>(l);
    const auto& p = net.layers[li];
    const auto& c = cache.layer(l);
    const bool tgt = st.has_h[li] != 0;
    const double eta = tgt ? c.eta_full : c.eta_bottom;
    Vec y;
    if (cfg.accelerate) {
      const double coeff = (st.t_prev[li] - 1.0) / st.t_cur[li];
      y = coeff > 0.0 ? Vec(st.g[li] + coeff * (st.g[li] - st.g_prev[li])) : st.g[li];
      st.t_prev[li] = st.t_cur[li];
      st.t_cur[li] = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * st.t_cur[li] * st.t_cur[li]));
    } else {
      y = st.g[li];
    }
    Vec grad = (tgt ? c.gram_full : c.gram_s) * y;
    grad.noalias() -= st.bx[li];
    if (tgt) grad.noalias() -= st.bh[li];
    Vec gn = soft_threshold(y - eta * grad, eta * p.lambda);
    if (p.k_top) gn = topk_project(gn, *p.k_top);
    const double delta = (gn - st.g[li]).lpNorm<Eigen::Infinity>();
    st.g_prev[li] = st.g[li];
    st.g[li] = std::move(gn);
    return delta;
  };

  auto refresh_input = [&](Index l) {  // x_{l+1} = phi(U_l g_l)
    const auto li = static_cast<std::size_t>(l);
    const auto& p = net.layers[li];
    Vec up = apply_activation(p.activation, *p.U * st.g[li]);
    const auto ni = li + 1;
    st.bx[ni].noalias() = net.layers[ni].S.transpose() * up;
    st.xsq[ni] = up.squaredNorm();
    st.x[ni] = std::move(up);
  };

  auto refresh_target = [&](Index l) {  // h_l = S_{l+1} g_{l+1}
    const auto li = static_cast<std::size_t>(l);
    const auto& p = net.layers[li];
    Vec down = net.layers[li + 1].S * st.g[li + 1];
    st.bh[li].noalias() = p.beta_td * (p.U->transpose() * down);
    st.hsq[li] = p.beta_td * down.squaredNorm();
    st.h[li] = std::move(down);
    st.has_h[li] = 1;
  };

  SettleResult res;
  double e_prev = std::numeric_limits<double>::infinity();
  bool just_restarted = false;
  detail::SettleState snapshot;

  while (res.sweeps_used < cfg.max_sweeps) {
    if (cfg.reject_increasing) snapshot = st;
    double delta = 0.0;
    for (Index l = 0; l < L; ++l) {  // upward
      delta = std::max(delta, step_layer(l));
      if (l + 1 < L) refresh_input(l);
    }
    for (Index l = L - 2; l >= 0; --l) {  // downward
      refresh_target(l);
      delta = std::max(delta, step_layer(l));
    }
    ++res.sweeps_used;
    const double e = detail::state_energy(cache, st);

    if (delta == 0.0) {  // exact fixed point, nothing further can change
      res.energy_trace.push_back(e);
      res.converged = true;
      break;
    }
    if (e <= e_prev) {
      const bool had_prev = std::isfinite(e_prev);
      const double rel = had_prev ? (e_prev - e) / std::max(e_prev, 1e-12) : 0.0;
      res.energy_trace.push_back(e);
      e_prev = e;
      just_restarted = false;
      if (had_prev && rel < cfg.tol) {
        res.converged = true;
        break;
      }
    } else if (cfg.reject_increasing) {
      st = snapshot;
      if (cfg.accelerate && !just_restarted) {
        // function-value restart: drop momentum and retry from the same point
        std::fill(st.t_prev.begin(), st.t_prev.end(), 1.0);
        std::fill(st.t_cur.begin(), st.t_cur.end(), 1.0);
        for (std::size_t li = 0; li < st.g.size(); ++li) st.g_prev[li] = st.g[li];
        just_restarted = true;
      } else {
        res.converged = true;
        break;
      }
    } else {
      res.energy_trace.push_back(e);  // plain accelerated run may overshoot
      e_prev = e;
    }
  }

  res.codes = std::move(st.g);
  res.layer_inputs.resize(static_cast<std::size_t>(L));
  for (Index l = 0; l < L; ++l) {
    const auto li = static_cast<std::size_t>(l);
    res.layer_inputs[li].x = std::move(st.x[li]);
    if (st.has_h[li]) res.layer_inputs[li].h_target = std::move(st.h[li]);
  }
  return res;
}

inline SettleResult settle(const NetworkParams& net, const Vec& x, const SettleConfig& cfg,
                           const std::optional<Vec>& clamp_top = std::nullopt) {
  return settle(NetCache(net), x, cfg, clamp_top);
}

// ---- masked inference -----------------------------------------------------

struct MaskSpec {
  enum class Kind { Forecast, Random, Block };
  Kind kind = Kind::Forecast;
  double hidden_frac = 0.25;  // Forecast / Random
  Index block_len = 128;      // Block

  static MaskSpec forecast(double frac) { return {Kind::Forecast, frac, 0}; }
  static MaskSpec random(double frac) { return {Kind::Random, frac, 0}; }
  static MaskSpec block(Index len) { return {Kind::Block, 0.0, len}; }

  // Named regimes: forecast_25, forecast_50, random_30, block_128.
  static MaskSpec from_name(const std::string& name) {
    if (name == "forecast_25") return forecast(0.25);
    if (name == "forecast_50") return forecast(0.50);
    if (name == "random_30") return random(0.30);
    if (name == "block_128") return block(128);
    fail("unknown mask regime '", name, "'");
  }
};

// 1 = observed, 0 = hidden.
inline Vec make_mask(Index d, const MaskSpec& spec, Rng& rng) {
  require(d > 0, "make_mask: d must be > 0, got ", d);
  Vec mask = Vec::Ones(d);
  switch (spec.kind) {
    case MaskSpec::Kind::Forecast: {
      require(spec.hidden_frac >= 0.0 && spec.hidden_frac <= 1.0, "make_mask: hidden_frac=",
              spec.hidden_frac, " outside [0, 1]");
      const Index n_hidden = static_cast<Index>(std::llround(spec.hidden_frac * static_cast<double>(d)));
      for (Index i = d - n_hidden; i < d; ++i) mask[i] = 0.0;
      break;
    }
    case MaskSpec::Kind::Random: {
      require(spec.hidden_frac >= 0.0 && spec.hidden_frac <= 1.0, "make_mask: hidden_frac=",
              spec.hidden_frac, " outside [0, 1]");
      const Index n_hidden = static_cast<Index>(std::llround(spec.hidden_frac * static_cast<double>(d)));
      std::vector<Index> idx(static_cast<std::size_t>(d));
      std::iota(idx.begin(), idx.end(), Index{0});
      for (Index i = 0; i < n_hidden; ++i) {  // partial Fisher-Yates, exactly n_hidden picks
        const auto j = rng.uniform_int(i, d - 1);
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
        mask[idx[static_cast<std::size_t>(i)]] = 0.0;
      }
      break;
    }
    case MaskSpec::Kind::Block: {
      require(spec.block_len >= 0 && spec.block_len <= d, "make_mask: block_len=", spec.block_len,
              " outside [0, d=", d, "]");
      const Index start = spec.block_len == d ? 0 : rng.uniform_int(0, d - spec.block_len);
      mask.segment(start, spec.block_len).setZero();
      break;
    }
  }
  return mask;
}

struct MaskedResult {
  SettleResult settle;  // final inner settle
  Vec x_hat;            // S_1 g_1 from the final settle
  Vec x_completed;      // observed entries clamped to x_obs, hidden from x_hat
};

// Fill-in imputation: alternate (settle on current fill) and (replace hidden
// entries with the synthesis). Each inner settle is cold-started; a caller
// warm start applies to the first settle only. Majorization-minimization on
// the masked objective, so with tight inner solves the masked data-fit plus
// l1 total is non-increasing across outer iterations.
inline MaskedResult masked_settle(const NetCache& cache, const Vec& x_obs, const Vec& mask,
                                  const SettleConfig& cfg, int n_outer = 5) {
  const auto& first = cache.net().layers.front();
  require(n_outer >= 0, "masked_settle: n_outer must be >= 0, got ", n_outer);
  require(mask.size() == first.dims.d, "masked_settle: mask has length ", mask.size(),
          ", expected d=", first.dims.d);
  for (Index i = 0; i < mask.size(); ++i)
    require(mask[i] == 0.0 || mask[i] == 1.0, "masked_settle: mask[", i, "]=", mask[i],
            " is not 0 or 1");
  require(x_obs.size() == mask.size(), "masked_settle: x_obs has length ", x_obs.size(),
          ", expected ", mask.size());

  SettleConfig inner = cfg;
  SettleResult res = settle(cache, mask.cwiseProduct(x_obs), inner);
  inner.warm_start.reset();
  for (int k = 0; k < n_outer; ++k) {
    const Vec synth = first.S * res.codes[0];
    const Vec filled = mask.cwiseProduct(x_obs) + (Vec::Ones(mask.size()) - mask).cwiseProduct(synth);
    res = settle(cache, filled, inner);
  }
  MaskedResult out;
  out.x_hat = first.S * res.codes[0];
  out.x_completed =
      mask.cwiseProduct(x_obs) + (Vec::Ones(mask.size()) - mask).cwiseProduct(out.x_hat);
  out.settle = std::move(res);
  return out;
}

inline MaskedResult masked_settle(const NetworkParams& net, const Vec& x_obs, const Vec& mask,
                                  const SettleConfig& cfg, int n_outer = 5) {
  return masked_settle(NetCache(net), x_obs, mask, cfg, n_outer);
}

// The objective the fill-in loop descends, in its first-layer form.
inline double masked_objective(const NetworkParams& net, const Vec& x_obs, const Vec& mask,
                               const Vec& g1) {
  const auto& p = net.layers.front();
  return 0.5 * mask.cwiseProduct(x_obs - p.S * g1).squaredNorm() + p.lambda * g1.lpNorm<1>();
}

}  // namespace vn
