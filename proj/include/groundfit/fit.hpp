#pragma once

#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "groundfit/detail/denormals.hpp"
#include "groundfit/detail/sample.hpp"
#include "groundfit/elevation.hpp"
#include "groundfit/loss.hpp"
#include "groundfit/optim.hpp"

namespace groundfit {

inline constexpr std::size_t kMinFitPoints = 100;

struct FitStats {
  int iterations = 0;
  double final_loss = 0.0;
  double final_lr = 0.0;
  bool stopped_early = false;
};

/// Fits the elevation surface to a scan by full-batch gradient descent:
/// loss_and_grad -> adamw_step -> plateau scheduler -> EMA early stop, until
/// Stop or max_iters. Everything is deterministic given (seed, inputs,
/// config).
template <typename Scalar>
std::pair<ElevationModelT<Scalar>, FitStats> fit_elevation(
    const PointCloud& cloud, ElevationModelT<Scalar> model,
    const LossConfig& loss_cfg, const OptimConfig& cfg) {
  loss_cfg.validate();
  cfg.validate();
  model.validate();
  if (cloud.size() < kMinFitPoints) {
    throw TooFewPoints("fit_elevation needs >= " +
                       std::to_string(kMinFitPoints) + " points, got " +
                       std::to_string(cloud.size()));
  }

  using Mat = typename ElevationModelT<Scalar>::Mat;
  using Vec = typename ElevationModelT<Scalar>::Vec;

  Mat xy;
  Vec z;
  const std::size_t cap = static_cast<std::size_t>(cfg.max_fit_points);
  if (cap > 0 && cloud.size() > cap) {
    std::mt19937 rng(
        static_cast<std::uint32_t>(static_cast<std::uint64_t>(cfg.seed) ^
                                   0x9e3779b9u));
    const auto idx = detail::subsample_indices(cloud.size(), cap, rng);
    xy.resize(static_cast<Eigen::Index>(cap), 2);
    z.resize(static_cast<Eigen::Index>(cap));
    for (std::size_t i = 0; i < cap; ++i) {
      const auto& p = cloud.points[idx[i]];
      xy(static_cast<Eigen::Index>(i), 0) = static_cast<Scalar>(p.x);
      xy(static_cast<Eigen::Index>(i), 1) = static_cast<Scalar>(p.y);
      z(static_cast<Eigen::Index>(i)) = static_cast<Scalar>(p.z);
    }
  } else {
    xy = xy_matrix<Scalar>(cloud);
    z = z_vector<Scalar>(cloud);
  }

  Vec params = model.parameters();
  AdamWState<Scalar> state(params.size());
  PlateauScheduler scheduler(cfg);
  EmaEarlyStop stopper(cfg);
  detail::ScopedFlushDenormals ftz;

  FitStats stats;
  detail::FitWorkspace<Scalar> ws;
  double lr = cfg.learning_rate;
  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    const double loss = detail::loss_and_grad_into(model, xy, z, loss_cfg, ws);
    adamw_step<Scalar>(params, ws.grad, state, cfg, lr);
    model.set_parameters(params);
    lr = scheduler.observe(loss);
    stats.iterations = iter;
    stats.final_loss = loss;
    stats.final_lr = lr;
    if (stopper.observe(loss) == EmaEarlyStop::Decision::Stop) {
      stats.stopped_early = true;
      break;
    }
  }
  return {std::move(model), stats};
}

}  // namespace groundfit
