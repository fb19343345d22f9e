#pragma once

// Planar n-body dynamics: four force laws, classic RK4 with a soft box
// boundary, per-body feature vectors, and transition dataset generation.
// Unit masses throughout, so forces and accelerations coincide.

#include "vn/common.hpp"
#include "vn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace vn::bench {

using Vec2 = Eigen::Vector2d;

enum class ForceKind { Gravity, Spring, Drag, Lorentz };

// Rows are bodies, columns are (x, y).
struct BodyState {
  Mat pos;
  Mat vel;

  Index n() const { return pos.rows(); }
};

inline void check_state(const BodyState& s) {
  require(s.pos.cols() == 2 && s.vel.cols() == 2 && s.pos.rows() == s.vel.rows() &&
              s.pos.rows() >= 1,
          "body state: expected matching n x 2 position/velocity, got ", s.pos.rows(), "x",
          s.pos.cols(), " and ", s.vel.rows(), "x", s.vel.cols());
  require(s.pos.allFinite() && s.vel.allFinite(), "body state: non-finite entries");
}

struct SimConfig {
  std::vector<ForceKind> forces;  // empty = force-free control runs
  double dt = 0.005;
  double box_half = 2.5;
  double pos_damp = 0.98;
  double vel_damp = 0.9;
  bool soft_boundary = true;
  // Force-law constants.
  double grav_g = 1.0;
  double grav_eps = 0.1;
  double spring_k = 0.5;
  double spring_r0 = 1.0;
  double drag_gamma = 0.3;
  double lorentz_omega = 2.0;
};

inline bool is_pairwise(ForceKind kind) {
  return kind == ForceKind::Gravity || kind == ForceKind::Spring;
}

// Force on body i; pairwise kinds need the partner j, per-body kinds ignore it.
inline Vec2 force(const SimConfig& cfg, ForceKind kind, const BodyState& s, Index i,
                  std::optional<Index> j = std::nullopt) {
  switch (kind) {
    case ForceKind::Gravity:
    case ForceKind::Spring: {
      require(j.has_value(), "force: pairwise kind needs a partner index");
      require(*j != i, "force: pairwise kind called with i == j == ", i);
      const Vec2 rel = (s.pos.row(i) - s.pos.row(*j)).transpose();
      const double r = rel.norm();
      require(r > 0.0, "force: bodies ", i, " and ", *j, " coincide");
      if (kind == ForceKind::Gravity)
        return -cfg.grav_g / (r * (r * r + cfg.grav_eps * cfg.grav_eps)) * rel;
      return -cfg.spring_k * (r - cfg.spring_r0) / r * rel;
    }
    case ForceKind::Drag:
      return -cfg.drag_gamma * s.vel.row(i).transpose();
    case ForceKind::Lorentz:
      return cfg.lorentz_omega * Vec2(-s.vel(i, 1), s.vel(i, 0));
  }
  fail("force: invalid kind tag");
}

inline Mat accelerations(const SimConfig& cfg, const BodyState& s) {
  const Index n = s.n();
  Mat acc = Mat::Zero(n, 2);
  for (ForceKind kind : cfg.forces) {
    if (is_pairwise(kind)) {
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
          if (j != i) acc.row(i) += force(cfg, kind, s, i, j).transpose();
    } else {
      for (Index i = 0; i < n; ++i) acc.row(i) += force(cfg, kind, s, i).transpose();
    }
  }
  return acc;
}

// Classic RK4 on (pos, vel) with a caller-supplied acceleration field, so
// learned models can drive rollouts through the same integrator. The soft
// boundary damps any body outside the box after the step.
template <class AccelFn>
BodyState rk4_step(const SimConfig& cfg, const BodyState& s, AccelFn&& accel) {
  check_state(s);
  const double dt = cfg.dt;

  const Mat a1 = accel(s);
  const BodyState s2{s.pos + 0.5 * dt * s.vel, s.vel + 0.5 * dt * a1};
  const Mat a2 = accel(s2);
  const BodyState s3{s.pos + 0.5 * dt * s2.vel, s.vel + 0.5 * dt * a2};
  const Mat a3 = accel(s3);
  const BodyState s4{s.pos + dt * s3.vel, s.vel + dt * a3};
  const Mat a4 = accel(s4);

  BodyState out;
  out.pos = s.pos + dt / 6.0 * (s.vel + 2.0 * s2.vel + 2.0 * s3.vel + s4.vel);
  out.vel = s.vel + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
  require(out.pos.allFinite() && out.vel.allFinite(), "rk4_step: non-finite state after step");

  if (cfg.soft_boundary)
    for (Index i = 0; i < out.n(); ++i)
      if (out.pos.row(i).lpNorm<Eigen::Infinity>() > cfg.box_half) {
        out.pos.row(i) *= cfg.pos_damp;
        out.vel.row(i) *= cfg.vel_damp;
      }
  return out;
}

inline BodyState rk4_step(const SimConfig& cfg, const BodyState& s) {
  return rk4_step(cfg, s, [&cfg](const BodyState& y) { return accelerations(cfg, y); });
}

inline double kinetic_energy(const BodyState& s) { return 0.5 * s.vel.squaredNorm(); }

inline constexpr Index kBodyFeatureDim = 22;
inline constexpr Index kMaxBodies = 5;

// Per-body features: own position (2), own velocity (2), then for up to four
// neighbors sorted by distance (ties broken by body index): relative position
// and relative velocity (4 each), zero-padded below five bodies; finally
// speed (1) and distance to the origin (1).
inline Vec body_features(const BodyState& s, Index i) {
  check_state(s);
  require(s.n() <= kMaxBodies, "body_features: layout supports at most ", kMaxBodies,
          " bodies, got ", s.n());
  require(i >= 0 && i < s.n(), "body_features: body index ", i, " out of range");

  Vec feat = Vec::Zero(kBodyFeatureDim);
  feat.segment<2>(0) = s.pos.row(i).transpose();
  feat.segment<2>(2) = s.vel.row(i).transpose();

  std::vector<Index> others;
  for (Index j = 0; j < s.n(); ++j)
    if (j != i) others.push_back(j);
  std::sort(others.begin(), others.end(), [&](Index a, Index b) {
    const double da = (s.pos.row(a) - s.pos.row(i)).norm();
    const double db = (s.pos.row(b) - s.pos.row(i)).norm();
    return da != db ? da < db : a < b;
  });

  for (std::size_t k = 0; k < others.size(); ++k) {
    const Index j = others[k];
    const Index at = 4 + 4 * static_cast<Index>(k);
    feat.segment<2>(at) = (s.pos.row(j) - s.pos.row(i)).transpose();
    feat.segment<2>(at + 2) = (s.vel.row(j) - s.vel.row(i)).transpose();
  }
  feat[20] = s.vel.row(i).norm();
  feat[21] = s.pos.row(i).norm();
  return feat;
}

inline BodyState random_state(Rng& rng, Index n, double box_half = 2.5, double vel_sigma = 0.5) {
  require(n >= 1, "random_state: need at least one body, got ", n);
  BodyState s;
  s.pos.resize(n, 2);
  s.vel.resize(n, 2);
  for (Index i = 0; i < n; ++i)
    for (Index c = 0; c < 2; ++c) {
      s.pos(i, c) = rng.uniform(-box_half, box_half);
      s.vel(i, c) = vel_sigma * rng.normal();
    }
  return s;
}

struct NBodySample {
  Vec features;  // 22 per body
  Vec2 accel;    // instantaneous ground-truth acceleration of that body
};

// Simulates n_clips short trajectories and emits (features, acceleration)
// for every body at every visited state. Targets are instantaneous, taken
// before the step that leaves the state.
inline std::vector<NBodySample> generate_nbody_dataset(const SimConfig& cfg, Index n_bodies,
                                                       int n_clips, int clip_steps, Rng rng) {
  require(n_bodies >= 1 && n_bodies <= kMaxBodies, "generate_nbody_dataset: n_bodies must be in [1, ",
          kMaxBodies, "], got ", n_bodies);
  require(n_clips >= 1 && clip_steps >= 1, "generate_nbody_dataset: need n_clips, clip_steps >= 1");

  std::vector<NBodySample> out;
  out.reserve(static_cast<std::size_t>(n_clips) * static_cast<std::size_t>(clip_steps) *
              static_cast<std::size_t>(n_bodies));
  for (int clip = 0; clip < n_clips; ++clip) {
    Rng clip_rng = rng.derive("clip", clip);
    BodyState s = random_state(clip_rng, n_bodies, cfg.box_half);
    for (int step = 0; step < clip_steps; ++step) {
      const Mat acc = accelerations(cfg, s);
      for (Index i = 0; i < n_bodies; ++i)
        out.push_back({body_features(s, i), acc.row(i).transpose()});
      s = rk4_step(cfg, s);
    }
  }
  return out;
}

}  // namespace vn::bench
