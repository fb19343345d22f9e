#pragma once

// Shared fixtures and oracles for the test suite.

#include "vn/core.hpp"

#include <functional>

namespace vnt {

// Central finite difference; the independent oracle for every analytic
// derivative in the suite.
inline double central_fd(const std::function<double(double)>& f, double x0, double h) {
  return (f(x0 + h) - f(x0 - h)) / (2.0 * h);
}

inline vn::LayerParams random_layer(vn::Rng rng, vn::Index d, vn::Index m, vn::Index K,
                                    double lambda = 0.1) {
  vn::LayerParams p;
  p.dims = {d, m, K};
  p.S = vn::random_unit_columns(rng, d, K);
  if (m > 0) p.U = vn::random_unit_columns(rng, m, K);
  p.lambda = lambda;
  return p;
}

}  // namespace vnt
