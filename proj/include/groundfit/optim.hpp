#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>

#include "groundfit/error.hpp"

namespace groundfit {

struct OptimConfig {
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-4;
  int max_iters = 2000;
  double plateau_factor = 0.5;
  int plateau_patience = 50;
  double min_lr = 1e-4;
  double ema_decay = 0.9;
  int early_stop_patience = 150;
  std::int64_t seed = 0;
  // Fit-time cap on the number of points optimized over (seed-deterministic
  // uniform subsample, full batch every iteration). 0 disables the cap.
  int max_fit_points = 2500;

  void validate() const {
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
    if (!(beta1 > 0 && beta1 < 1)) throw ConfigError("beta1 must be in (0,1)");
    if (!(beta2 > 0 && beta2 < 1)) throw ConfigError("beta2 must be in (0,1)");
    if (!(epsilon > 0)) throw ConfigError("epsilon must be > 0");
    if (!(weight_decay >= 0)) throw ConfigError("weight_decay must be >= 0");
    if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
    if (!(plateau_factor > 0 && plateau_factor < 1)) {
      throw ConfigError("plateau_factor must be in (0,1)");
    }
    if (plateau_patience < 1) throw ConfigError("plateau_patience must be >= 1");
    if (!(min_lr >= 0)) throw ConfigError("min_lr must be >= 0");
    if (!(ema_decay > 0 && ema_decay < 1)) {
      throw ConfigError("ema_decay must be in (0,1)");
    }
    if (early_stop_patience < 1) {
      throw ConfigError("early_stop_patience must be >= 1");
    }
    if (max_fit_points < 0) throw ConfigError("max_fit_points must be >= 0");
  }
};

/// First/second moment estimates for AdamW.
template <typename Scalar>
struct AdamWState {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Vec m;
  Vec v;
  long step = 0;

  explicit AdamWState(Eigen::Index n) : m(Vec::Zero(n)), v(Vec::Zero(n)) {}
};

/// One decoupled-weight-decay Adam update with bias correction, in place.
/// `lr` is the current learning rate (the plateau scheduler owns it).
template <typename Scalar>
void adamw_step(typename AdamWState<Scalar>::Vec& params,
                const typename AdamWState<Scalar>::Vec& grad,
                AdamWState<Scalar>& state, const OptimConfig& cfg, double lr) {
  if (grad.size() != params.size() || state.m.size() != params.size()) {
    throw ShapeMismatch("gradient/state shape does not match parameters");
  }
  state.step += 1;
  const Scalar b1 = static_cast<Scalar>(cfg.beta1);
  const Scalar b2 = static_cast<Scalar>(cfg.beta2);
  state.m = b1 * state.m + (Scalar(1) - b1) * grad;
  state.v = b2 * state.v.array() + (Scalar(1) - b2) * grad.array().square();
  const Scalar bc1 =
      Scalar(1) - static_cast<Scalar>(std::pow(cfg.beta1, state.step));
  const Scalar bc2 =
      Scalar(1) - static_cast<Scalar>(std::pow(cfg.beta2, state.step));
  const Scalar slr = static_cast<Scalar>(lr);
  const Scalar eps = static_cast<Scalar>(cfg.epsilon);
  const Scalar wd = static_cast<Scalar>(cfg.weight_decay);
  params.array() -= slr * ((state.m.array() / bc1) /
                               ((state.v.array() / bc2).sqrt() + eps) +
                           wd * params.array());
}

/// ReduceLROnPlateau: halve (by plateau_factor) when the loss has not beaten
/// its best for plateau_patience consecutive observations, never below
/// min_lr.
class PlateauScheduler {
 public:
  explicit PlateauScheduler(const OptimConfig& cfg)
      : lr_(cfg.learning_rate),
        factor_(cfg.plateau_factor),
        patience_(cfg.plateau_patience),
        min_lr_(cfg.min_lr) {}

  double observe(double loss) {
    if (loss < best_) {
      best_ = loss;
      bad_ = 0;
    } else if (++bad_ >= patience_) {
      lr_ = std::max(lr_ * factor_, min_lr_);
      bad_ = 0;
    }
    return lr_;
  }

  double lr() const { return lr_; }

 private:
  double lr_;
  double factor_;
  int patience_;
  double min_lr_;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_ = 0;
};

/// Early stopping on the exponential moving average of the loss: stop once
/// the EMA has not strictly improved on its best for early_stop_patience
/// consecutive updates. The EMA is initialized to the first loss.
class EmaEarlyStop {
 public:
  explicit EmaEarlyStop(const OptimConfig& cfg)
      : decay_(cfg.ema_decay), patience_(cfg.early_stop_patience) {}

  enum class Decision { Continue, Stop };

  Decision observe(double loss) {
    if (!initialized_) {
      ema_ = loss;
      best_ = loss;
      initialized_ = true;
      return Decision::Continue;
    }
    ema_ = decay_ * ema_ + (1.0 - decay_) * loss;
    if (ema_ < best_) {
      best_ = ema_;
      bad_ = 0;
    } else {
      ++bad_;
    }
    return bad_ >= patience_ ? Decision::Stop : Decision::Continue;
  }

  double ema() const { return ema_; }

 private:
  double decay_;
  int patience_;
  double ema_ = 0.0;
  double best_ = 0.0;
  int bad_ = 0;
  bool initialized_ = false;
};

}  // namespace groundfit
