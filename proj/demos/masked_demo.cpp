#include "vn/inference.hpp"

#include <cstdio>

// Hide a random 30% of a synthetic sparse signal, then compare completion
// through the settled synthesis against leaving the hidden entries at zero.
int main() {
  vn::Rng rng(7);
  const vn::Index d = 64, K = 96;

  vn::LayerParams p;
  p.dims = {d, 0, K};
  p.S = vn::random_unit_columns(rng, d, K);
  p.lambda = 0.02;
  vn::NetworkParams net{{p}};

  vn::Vec g_true = vn::Vec::Zero(K);
  for (int i = 0; i < 4; ++i) g_true[rng.uniform_int(0, K - 1)] = rng.normal(0.0, 1.0);
  const vn::Vec x_true = p.S * g_true;

  const vn::Vec mask = vn::make_mask(d, vn::MaskSpec::random(0.3), rng);
  const vn::Vec x_obs = mask.cwiseProduct(x_true);

  const auto res = vn::masked_settle(vn::NetCache(net), x_obs, mask, vn::SettleConfig{}, 5);
  const vn::Vec hidden = vn::Vec::Ones(d) - mask;
  const double n_hidden = hidden.sum();
  const double filled = (hidden.cwiseProduct(res.x_hat - x_true)).squaredNorm() / n_hidden;
  const double zeroed = (hidden.cwiseProduct(x_true)).squaredNorm() / n_hidden;
  std::printf("hidden=%d of %d  completion mse=%.3e  zero-fill mse=%.3e\n",
              static_cast<int>(n_hidden), static_cast<int>(d), filled, zeroed);
  return 0;
}
