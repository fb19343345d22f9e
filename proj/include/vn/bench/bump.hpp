#pragma once

// Spatial bump decoding: Gaussian bumps on a square grid, five position
// encodings, and holdout regions that carve out the extrapolation split.

#include "vn/common.hpp"
#include "vn/rng.hpp"

#include <array>
#include <cmath>
#include <vector>

namespace vn::bench {

using Center = std::array<double, 2>;  // (cx, cy) in grid coordinates

enum class BumpEncoding { BumpCode, OneHot, Fourier14, Fourier7, Scalar };

struct HoldoutRegion {
  enum class Kind { None, CentralSquare, Annulus };
  Kind kind = Kind::CentralSquare;
  double side = 8.0;     // CentralSquare, in grid cells
  double r_inner = 7.0;  // Annulus radius band, from the grid center
  double r_outer = 10.0;

  bool contains(double cx, double cy, Index grid_n) const {
    const double c = static_cast<double>(grid_n - 1) / 2.0;
    switch (kind) {
      case Kind::None:
        return false;
      case Kind::CentralSquare:
        return std::max(std::abs(cx - c), std::abs(cy - c)) <= side / 2.0;
      case Kind::Annulus: {
        const double r = std::hypot(cx - c, cy - c);
        return r >= r_inner && r <= r_outer;
      }
    }
    fail("holdout region has an invalid kind tag");
  }
};

struct BumpTaskConfig {
  Index grid_n = 28;
  double sigma = 1.0;
  BumpEncoding encoding = BumpEncoding::BumpCode;
  HoldoutRegion holdout;
  int n_bumps = 1;
};

inline void validate_bump_config(const BumpTaskConfig& cfg) {
  require(cfg.grid_n >= 2, "bump config: grid_n must be >= 2, got ", cfg.grid_n);
  require(cfg.sigma > 0.0, "bump config: sigma must be > 0, got ", cfg.sigma);
  require(cfg.n_bumps >= 1, "bump config: n_bumps must be >= 1, got ", cfg.n_bumps);
  const double half_span = static_cast<double>(cfg.grid_n - 1) / 2.0;
  if (cfg.holdout.kind == HoldoutRegion::Kind::CentralSquare)
    require(cfg.holdout.side > 0.0 && cfg.holdout.side / 2.0 < half_span,
            "bump config: holdout side ", cfg.holdout.side, " does not fit a ", cfg.grid_n,
            "-cell grid");
  if (cfg.holdout.kind == HoldoutRegion::Kind::Annulus)
    require(cfg.holdout.r_inner >= 0.0 && cfg.holdout.r_inner < cfg.holdout.r_outer &&
                cfg.holdout.r_outer < half_span * std::sqrt(2.0),
            "bump config: annulus band [", cfg.holdout.r_inner, ", ", cfg.holdout.r_outer,
            "] does not fit a ", cfg.grid_n, "-cell grid");
}

inline void check_center(const BumpTaskConfig& cfg, const Center& c) {
  const double hi = static_cast<double>(cfg.grid_n - 1);
  require(c[0] >= 0.0 && c[0] <= hi && c[1] >= 0.0 && c[1] <= hi, "bump center (", c[0], ", ",
          c[1], ") lies outside the [0, ", hi, "] grid");
}

// Row-major grid_n x grid_n image, pixel (row y, col x) at index y*grid_n + x.
// Unnormalized Gaussians (peak 1.0), summed over centers.
inline Vec bump_image(const BumpTaskConfig& cfg, const std::vector<Center>& centers) {
  require(!centers.empty(), "bump_image: needs at least one center");
  for (const auto& c : centers) check_center(cfg, c);
  const Index n = cfg.grid_n;
  const double inv = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
  Vec img = Vec::Zero(n * n);
  for (Index y = 0; y < n; ++y)
    for (Index x = 0; x < n; ++x) {
      double v = 0.0;
      for (const auto& c : centers) {
        const double dx = static_cast<double>(x) - c[0];
        const double dy = static_cast<double>(y) - c[1];
        v += std::exp(-(dx * dx + dy * dy) * inv);
      }
      img[y * n + x] = v;
    }
  return img;
}

inline Index encoding_dim(BumpEncoding enc, Index grid_n) {
  switch (enc) {
    case BumpEncoding::BumpCode:
    case BumpEncoding::OneHot:
      return 2 * grid_n;
    case BumpEncoding::Fourier14:
      return 56;  // 2 axes * (sin, cos) * 14 frequencies
    case BumpEncoding::Fourier7:
      return 28;
    case BumpEncoding::Scalar:
      return 2;
  }
  fail("encoding_dim: invalid encoding tag");
}

inline Vec encode_position(const BumpTaskConfig& cfg, double cx, double cy) {
  check_center(cfg, {cx, cy});
  const Index n = cfg.grid_n;
  switch (cfg.encoding) {
    case BumpEncoding::BumpCode: {
      Vec e(2 * n);
      const double inv = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
      for (Index i = 0; i < n; ++i) {
        const double di = static_cast<double>(i);
        e[i] = std::exp(-(di - cx) * (di - cx) * inv);
        e[n + i] = std::exp(-(di - cy) * (di - cy) * inv);
      }
      return e;
    }
    case BumpEncoding::OneHot: {
      Vec e = Vec::Zero(2 * n);
      e[static_cast<Index>(std::llround(cx))] = 1.0;
      e[n + static_cast<Index>(std::llround(cy))] = 1.0;
      return e;
    }
    case BumpEncoding::Fourier14:
    case BumpEncoding::Fourier7: {
      const Index m = cfg.encoding == BumpEncoding::Fourier14 ? 14 : 7;
      Vec e(4 * m);
      Index at = 0;
      for (double c : {cx, cy})
        for (Index j = 1; j <= m; ++j) {
          const double arg = 2.0 * kPi * static_cast<double>(j) * c / static_cast<double>(n);
          e[at++] = std::sin(arg);
          e[at++] = std::cos(arg);
        }
      return e;
    }
    case BumpEncoding::Scalar: {
      Vec e(2);
      e << cx / static_cast<double>(n), cy / static_cast<double>(n);
      return e;
    }
  }
  fail("encode_position: invalid encoding tag");
}

// Superposed stimuli encode as the sum of the single-center encodings.
inline Vec encode_centers(const BumpTaskConfig& cfg, const std::vector<Center>& centers) {
  require(!centers.empty(), "encode_centers: needs at least one center");
  Vec e = encode_position(cfg, centers[0][0], centers[0][1]);
  for (std::size_t i = 1; i < centers.size(); ++i)
    e += encode_position(cfg, centers[i][0], centers[i][1]);
  return e;
}

// Uniform center over the grid, rejected into (or out of) the holdout region.
inline Center sample_center(const BumpTaskConfig& cfg, Rng& rng, bool in_holdout) {
  const double hi = static_cast<double>(cfg.grid_n - 1);
  for (int tries = 0; tries < 100000; ++tries) {
    const double cx = rng.uniform(0.0, hi);
    const double cy = rng.uniform(0.0, hi);
    if (cfg.holdout.contains(cx, cy, cfg.grid_n) == in_holdout) return {cx, cy};
  }
  fail("sample_center: rejection sampling failed; holdout region covers ",
       in_holdout ? "none" : "all", " of the grid");
}

}  // namespace vn::bench
