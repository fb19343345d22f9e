#include "vn/learning.hpp"

#include <cstdio>

// Train a dictionary on data drawn from a planted one, then report how many
// planted atoms the learned columns align with.
int main() {
  vn::Rng rng(11);
  const vn::Index d = 16, K = 24;
  const vn::Mat planted = vn::random_unit_columns(rng, d, K);

  std::vector<vn::TrainSample> data;
  for (int n = 0; n < 600; ++n) {
    vn::Vec g = vn::Vec::Zero(K);
    for (int i = 0; i < 3; ++i) g[rng.uniform_int(0, K - 1)] = rng.uniform(0.5, 1.5);
    data.push_back({planted * g, std::nullopt});
  }

  vn::LayerParams p;
  p.dims = {d, 0, K};
  p.S = vn::random_unit_columns(rng, d, K);
  p.lambda = 0.1;
  vn::NetworkParams net{{p}};
  auto states = vn::make_optimizer_states(net, rng);

  vn::SettleConfig settle;
  vn::TrainerConfig trainer;
  trainer.rho_s = 0.003;
  for (int epoch = 0; epoch < 150; ++epoch) {
    rng.shuffle(data);
    const auto stats = vn::train_epoch(net, data, settle, trainer, states);
    if (epoch % 50 == 49)
      std::printf("epoch %3d  energy=%.4f  recon=%.5f\n", epoch + 1, stats.mean_energy,
                  stats.mean_recon_mse);
  }

  // Each planted atom, best alignment among learned columns.
  int recovered = 0;
  double worst = 1.0;
  for (vn::Index j = 0; j < K; ++j) {
    const double best = (net.layers[0].S.transpose() * planted.col(j)).cwiseAbs().maxCoeff();
    worst = std::min(worst, best);
    if (best > 0.9) ++recovered;
  }
  std::printf("recovered %d of %td planted atoms (worst alignment %.3f)\n", recovered,
              static_cast<std::ptrdiff_t>(K), worst);
  return 0;
}
