#include "vn/inference.hpp"

#include <cstdio>

int main() {
  vn::Rng rng(1);
  vn::LayerParams p;
  p.dims = {32, 0, 64};
  p.S = vn::random_unit_columns(rng, 32, 64);
  p.lambda = 0.1;
  vn::NetworkParams net{{p}};
  const vn::Vec x = rng.normal_vec(32);
  const auto res = vn::settle(net, x, vn::SettleConfig{});
  std::printf("sweeps=%d converged=%d energy=%.6f nnz=%td\n", res.sweeps_used,
              res.converged ? 1 : 0, res.energy_trace.back(),
              static_cast<std::ptrdiff_t>((res.codes[0].array() != 0.0).count()));
  return 0;
}
