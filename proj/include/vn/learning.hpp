#pragma once

// Slow learning: Hebbian residual-times-code updates on the active atoms,
// optionally routed through adaptive moments, then per-column renormalization.
//
//   G_s = mean_batch r_x g*^T,   G_u = mean_batch r_h g*^T
//   S  += rho * step(G_s)        (ascent: G is the negative loss gradient)
//
// Locality is structural: an atom whose coefficient is zero across the batch
// has a zero gradient column, accumulates zero moments, and is left
// bit-identical by apply_update.

#include "vn/inference.hpp"

#include <deque>

namespace vn {

struct DeadAtomRule {
  double usage_frac = 0.001;  // re-init atoms active in fewer than this fraction
  int window_epochs = 5;      // of samples across this many trailing epochs
};

struct TrainerConfig {
  double rho_s = 1e-3;
  double rho_u = 1e-3;
  bool use_adaptive_moments = true;
  std::pair<double, double> moment_decays = {0.9, 0.999};
  double epsilon = 1e-8;
  Index batch_size = 32;
  bool dc_removal = false;  // subtract the column mean of S updates pre-norm
  std::optional<DeadAtomRule> dead_atoms;

  void validate() const {
    require(rho_s > 0.0 && rho_u > 0.0, "trainer: learning rates must be > 0, got rho_s=", rho_s,
            " rho_u=", rho_u);
    require(moment_decays.first > 0.0 && moment_decays.first < 1.0 && moment_decays.second > 0.0 &&
                moment_decays.second < 1.0,
            "trainer: moment decays must lie in (0,1), got ", moment_decays.first, ", ",
            moment_decays.second);
    require(epsilon > 0.0, "trainer: epsilon must be > 0, got ", epsilon);
    require(batch_size >= 1, "trainer: batch_size must be >= 1, got ", batch_size);
  }
};

struct UsageEpoch {
  std::int64_t samples = 0;
  std::vector<std::int64_t> active;  // per-atom count of samples with g_i != 0
};

struct OptimizerState {
  Mat m_s, v_s;                  // first/second moments for S
  std::optional<Mat> m_u, v_u;   // for U when present
  std::int64_t step = 0;
  Rng reinit_rng{0};             // stream for degenerate/dead column re-init
  std::deque<UsageEpoch> usage;  // trailing per-epoch activation counts
};

inline std::vector<OptimizerState> make_optimizer_states(const NetworkParams& net, const Rng& rng) {
  std::vector<OptimizerState> states;
  for (Index l = 0; l < net.depth(); ++l) {
    const auto& p = net.layers[static_cast<std::size_t>(l)];
    OptimizerState st;
    st.m_s = Mat::Zero(p.dims.d, p.dims.K);
    st.v_s = Mat::Zero(p.dims.d, p.dims.K);
    if (p.U) {
      st.m_u = Mat::Zero(p.dims.m, p.dims.K);
      st.v_u = Mat::Zero(p.dims.m, p.dims.K);
    }
    st.reinit_rng = rng.derive("column-reinit", static_cast<std::uint64_t>(l));
    states.push_back(std::move(st));
  }
  return states;
}

inline std::pair<Vec, std::optional<Vec>> residuals(const LayerParams& p, const LayerInput& in,
                                                    const Vec& g_star) {
  check_layer_input(p, in);
  require(g_star.size() == p.dims.K, "residuals: code has length ", g_star.size(), ", expected K=",
          p.dims.K);
  Vec r_x = in.x - p.S * g_star;
  std::optional<Vec> r_h;
  if (in.h_target) r_h = *in.h_target - *p.U * g_star;
  return {std::move(r_x), std::move(r_h)};
}

struct HebbGradients {
  Mat g_s;
  std::optional<Mat> g_u;
};

// Batch-mean outer products of residuals with settled codes. The mean runs
// over the full batch; samples without a target contribute zero to G_u.
inline HebbGradients atomic_hebb_gradients(const LayerParams& p,
                                           const std::vector<std::pair<LayerInput, Vec>>& batch) {
  require(!batch.empty(), "atomic_hebb_gradients: empty batch");
  HebbGradients out;
  out.g_s = Mat::Zero(p.dims.d, p.dims.K);
  bool any_target = false;
  for (const auto& [in, g] : batch) {
    auto [r_x, r_h] = residuals(p, in, g);
    out.g_s.noalias() += r_x * g.transpose();
    if (r_h) {
      if (!any_target) {
        out.g_u = Mat::Zero(p.dims.m, p.dims.K);
        any_target = true;
      }
      out.g_u->noalias() += *r_h * g.transpose();
    }
  }
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  out.g_s *= inv_b;
  if (out.g_u) *out.g_u *= inv_b;
  return out;
}

namespace detail {

// Column-local optimizer step + renormalization for one dictionary. Columns
// with zero gradient and zero moments are skipped outright so inactive atoms
// stay bit-identical. Returns the number of degenerate columns re-initialized.
inline int update_dictionary(Mat& dict, const Mat& grad, double rho, const TrainerConfig& cfg,
                             Mat& m, Mat& v, std::int64_t step, bool dc_removal, Rng& reinit_rng) {
  const auto [d1, d2] = cfg.moment_decays;
  const double bc1 = 1.0 - std::pow(d1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(d2, static_cast<double>(step));
  int reinits = 0;
  for (Index j = 0; j < dict.cols(); ++j) {
    const bool grad_zero = (grad.col(j).array() == 0.0).all();
    if (cfg.use_adaptive_moments) {
      const bool moments_zero = (m.col(j).array() == 0.0).all() && (v.col(j).array() == 0.0).all();
      if (grad_zero && moments_zero) continue;
      m.col(j) = d1 * m.col(j) + (1.0 - d1) * grad.col(j);
      v.col(j) = d2 * v.col(j) + (1.0 - d2) * grad.col(j).cwiseAbs2();
      dict.col(j) += rho * (m.col(j) / bc1).cwiseQuotient(((v.col(j) / bc2).cwiseSqrt().array() + cfg.epsilon).matrix());
    } else {
      if (grad_zero) continue;
      dict.col(j) += rho * grad.col(j);
    }
    if (dc_removal) dict.col(j).array() -= dict.col(j).mean();
    const double n = dict.col(j).norm();
    if (n < 1e-12) {  // renormalizing a zero column is undefined: re-seed it
      Vec fresh = reinit_rng.normal_vec(dict.rows());
      double fn = fresh.norm();
      while (fn < 1e-12) {
        fresh = reinit_rng.normal_vec(dict.rows());
        fn = fresh.norm();
      }
      dict.col(j) = fresh / fn;
      m.col(j).setZero();
      v.col(j).setZero();
      ++reinits;
    } else {
      dict.col(j) /= n;
    }
  }
  return reinits;
}

}  // namespace detail

// Hebbian ascent step, DC removal (S only), unit-norm projection. Throws on
// non-finite inputs or results, leaving the parameters untouched.
inline void apply_update(LayerParams& p, const HebbGradients& grads, const TrainerConfig& cfg,
                         OptimizerState& st) {
  cfg.validate();
  require(grads.g_s.rows() == p.dims.d && grads.g_s.cols() == p.dims.K,
          "apply_update: G_s is ", grads.g_s.rows(), "x", grads.g_s.cols(), ", expected ",
          p.dims.d, "x", p.dims.K);
  require(grads.g_s.allFinite(), "apply_update: non-finite G_s");
  if (grads.g_u) {
    require(p.U.has_value(), "apply_update: G_u given but layer has no U");
    require(grads.g_u->rows() == p.dims.m && grads.g_u->cols() == p.dims.K,
            "apply_update: G_u is ", grads.g_u->rows(), "x", grads.g_u->cols(), ", expected ",
            p.dims.m, "x", p.dims.K);
    require(grads.g_u->allFinite(), "apply_update: non-finite G_u");
  }

  Mat s_new = p.S;
  std::optional<Mat> u_new = p.U;
  Mat m_s = st.m_s, v_s = st.v_s;
  std::optional<Mat> m_u = st.m_u, v_u = st.v_u;
  Rng rng = st.reinit_rng;
  const std::int64_t step = st.step + 1;

  detail::update_dictionary(s_new, grads.g_s, cfg.rho_s, cfg, m_s, v_s, step, cfg.dc_removal, rng);
  if (grads.g_u)
    detail::update_dictionary(*u_new, *grads.g_u, cfg.rho_u, cfg, *m_u, *v_u, step, false, rng);

  require(s_new.allFinite() && (!u_new || u_new->allFinite()), "apply_update: non-finite result");

  p.S = std::move(s_new);
  p.U = std::move(u_new);
  st.m_s = std::move(m_s);
  st.v_s = std::move(v_s);
  st.m_u = std::move(m_u);
  st.v_u = std::move(v_u);
  st.step = step;
  st.reinit_rng = rng;
}

// ---- Danskin check ---------------------------------------------------------
//
// The settled energy L(S) = E(g*(S), S) has dictionary derivative exactly
// -r_x g*^T (the code's own optimality zeroes out the indirect terms), so a
// central difference of L around S must match that outer product entry-wise.

inline double danskin_check(const LayerParams& p, const LayerInput& in, double perturb_scale = 1e-5,
                            Index max_entries = 64) {
  validate_layer(p);
  check_layer_input(p, in);
  require(perturb_scale > 0.0, "danskin_check: perturb_scale must be > 0, got ", perturb_scale);

  SettleConfig tight;
  tight.max_sweeps = 50000;
  tight.tol = 1e-14;

  auto settled_energy = [&](const LayerParams& layer, Vec* g_out) {
    NetworkParams net{{layer}};
    const auto res = settle(net, in.x, tight, in.h_target);
    require(res.converged, "danskin_check: inner settle did not converge in ", tight.max_sweeps,
            " sweeps");
    if (g_out) *g_out = res.codes[0];
    // evaluate through the explicit definition, not the settle's fast path
    LayerInput li{in.x, in.h_target};
    return layer_energy(layer, li, res.codes[0]);
  };

  Vec g_star;
  settled_energy(p, &g_star);
  const Vec r_x = in.x - p.S * g_star;

  // entry sample: everything for small layers, a fixed pseudo-random subset otherwise
  std::vector<std::pair<Index, Index>> entries;
  const Index total = p.dims.d * p.dims.K;
  if (total <= max_entries) {
    for (Index j = 0; j < p.dims.d; ++j)
      for (Index i = 0; i < p.dims.K; ++i) entries.emplace_back(j, i);
  } else {
    Rng rng = Rng(0xda9c).derive("danskin-entries");
    for (Index n = 0; n < max_entries; ++n)
      entries.emplace_back(rng.uniform_int(0, p.dims.d - 1), rng.uniform_int(0, p.dims.K - 1));
  }

  double worst = 0.0;
  for (const auto& [j, i] : entries) {
    const double analytic = -r_x[j] * g_star[i];
    LayerParams lo = p, hi = p;
    hi.S(j, i) += perturb_scale;
    lo.S(j, i) -= perturb_scale;
    const double fd = (settled_energy(hi, nullptr) - settled_energy(lo, nullptr)) / (2.0 * perturb_scale);
    const double rel = std::abs(fd - analytic) / std::max({std::abs(analytic), std::abs(fd), 1e-4});
    worst = std::max(worst, rel);
  }
  return worst;
}

// ---- epoch driver ----------------------------------------------------------

struct TrainSample {
  Vec x;
  std::optional<Vec> label;  // clamps the top interface target when present
};

struct EpochStats {
  double mean_energy = 0.0;
  double mean_recon_mse = 0.0;
  std::vector<double> mean_l0;
  std::optional<double> mean_label_mse;  // settled-prediction error under clamp
  Index samples_used = 0;
  int batches = 0;
  int batches_skipped = 0;
};

namespace detail {

inline void reinit_dead_atoms(NetworkParams& net, std::vector<OptimizerState>& states,
                              const DeadAtomRule& rule) {
  for (Index l = 0; l < net.depth(); ++l) {
    auto& st = states[static_cast<std::size_t>(l)];
    while (static_cast<int>(st.usage.size()) > rule.window_epochs) st.usage.pop_front();
    if (static_cast<int>(st.usage.size()) < rule.window_epochs) continue;
    auto& p = net.layers[static_cast<std::size_t>(l)];
    std::int64_t total = 0;
    std::vector<std::int64_t> active(static_cast<std::size_t>(p.dims.K), 0);
    for (const auto& ep : st.usage) {
      total += ep.samples;
      for (std::size_t i = 0; i < active.size(); ++i) active[i] += ep.active[i];
    }
    if (total == 0) continue;
    bool any = false;
    for (Index j = 0; j < p.dims.K; ++j) {
      const double frac = static_cast<double>(active[static_cast<std::size_t>(j)]) /
                          static_cast<double>(total);
      if (frac >= rule.usage_frac) continue;
      Vec fresh = st.reinit_rng.normal_vec(p.dims.d);
      p.S.col(j) = fresh / fresh.norm();
      st.m_s.col(j).setZero();
      st.v_s.col(j).setZero();
      if (p.U) {
        Vec fresh_u = st.reinit_rng.normal_vec(p.dims.m);
        p.U->col(j) = fresh_u / fresh_u.norm();
        st.m_u->col(j).setZero();
        st.v_u->col(j).setZero();
      }
      any = true;
    }
    // a re-seeded atom needs a full window of fresh evidence before it can
    // be judged again, so the trailing history is dropped wholesale
    if (any) st.usage.clear();
  }
}

}  // namespace detail

// One pass over the stream in order (shuffling is the caller's job): settle
// each minibatch under frozen parameters, then apply the Hebbian update per
// layer. A batch containing a non-finite settle is skipped and counted.
inline EpochStats train_epoch(NetworkParams& net, const std::vector<TrainSample>& data,
                              const SettleConfig& scfg, const TrainerConfig& tcfg,
                              std::vector<OptimizerState>& states) {
  net.validate();
  tcfg.validate();
  require(!data.empty(), "train_epoch: empty data");
  require(static_cast<Index>(states.size()) == net.depth(), "train_epoch: ", states.size(),
          " optimizer states for ", net.depth(), " layers");
  require(!scfg.warm_start, "train_epoch: per-sample settles cannot share a warm start");

  const Index L = net.depth();
  EpochStats stats;
  stats.mean_l0.assign(static_cast<std::size_t>(L), 0.0);
  double label_sq = 0.0;
  Index label_n = 0;

  std::vector<UsageEpoch> usage(static_cast<std::size_t>(L));
  for (Index l = 0; l < L; ++l)
    usage[static_cast<std::size_t>(l)].active.assign(
        static_cast<std::size_t>(net.layers[static_cast<std::size_t>(l)].dims.K), 0);

  for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(tcfg.batch_size)) {
    const std::size_t stop = std::min(data.size(), start + static_cast<std::size_t>(tcfg.batch_size));
    NetCache cache(net);

    std::vector<SettleResult> settles;
    settles.reserve(stop - start);
    bool finite = true;
    for (std::size_t s = start; s < stop && finite; ++s) {
      auto res = settle(cache, data[s].x, scfg, data[s].label);
      for (const auto& g : res.codes) finite = finite && g.allFinite();
      finite = finite && std::isfinite(res.energy_trace.back());
      settles.push_back(std::move(res));
    }
    ++stats.batches;
    if (!finite) {
      ++stats.batches_skipped;
      continue;
    }

    for (Index l = 0; l < L; ++l) {
      const auto li = static_cast<std::size_t>(l);
      std::vector<std::pair<LayerInput, Vec>> batch;
      batch.reserve(settles.size());
      for (const auto& res : settles) batch.emplace_back(res.layer_inputs[li], res.codes[li]);
      const auto grads = atomic_hebb_gradients(net.layers[li], batch);
      apply_update(net.layers[li], grads, tcfg, states[li]);
    }

    for (std::size_t s = start; s < stop; ++s) {
      const auto& res = settles[s - start];
      const auto& x = data[s].x;
      stats.mean_energy += res.energy_trace.back();
      stats.mean_recon_mse += (x - net.layers[0].S * res.codes[0]).squaredNorm() /
                              static_cast<double>(x.size());
      for (Index l = 0; l < L; ++l) {
        const auto li = static_cast<std::size_t>(l);
        const auto& g = res.codes[li];
        Index nnz = 0;
        for (Index i = 0; i < g.size(); ++i)
          if (g[i] != 0.0) {
            ++nnz;
            ++usage[li].active[static_cast<std::size_t>(i)];
          }
        stats.mean_l0[li] += static_cast<double>(nnz);
        ++usage[li].samples;
      }
      if (data[s].label) {
        const auto& top = net.layers[static_cast<std::size_t>(L - 1)];
        label_sq += (*data[s].label - *top.U * res.codes[static_cast<std::size_t>(L - 1)]).squaredNorm() /
                    static_cast<double>(data[s].label->size());
        ++label_n;
      }
      ++stats.samples_used;
    }
  }

  if (stats.samples_used > 0) {
    const double inv = 1.0 / static_cast<double>(stats.samples_used);
    stats.mean_energy *= inv;
    stats.mean_recon_mse *= inv;
    for (auto& v : stats.mean_l0) v *= inv;
    if (label_n > 0) stats.mean_label_mse = label_sq / static_cast<double>(label_n);
  }

  for (Index l = 0; l < L; ++l)
    states[static_cast<std::size_t>(l)].usage.push_back(std::move(usage[static_cast<std::size_t>(l)]));
  if (tcfg.dead_atoms) detail::reinit_dead_atoms(net, states, *tcfg.dead_atoms);

  return stats;
}

}  // namespace vn
