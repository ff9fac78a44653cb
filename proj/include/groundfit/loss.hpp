#pragma once

#include <Eigen/Dense>

#include <utility>

#include "groundfit/elevation.hpp"
#include "groundfit/error.hpp"
#include "groundfit/pointcloud.hpp"

namespace groundfit {

struct LossConfig {
  double delta = 0.05;  // meters, quadratic-to-linear Huber transition

  void validate() const {
    if (!(delta > 0.0)) throw ConfigError("delta must be > 0");
  }
};

/// Asymmetric surface-fit penalty: quadratic below the surface (dd < 0),
/// Huber above. Below-surface points always cost at least as much as points
/// the same distance above, so the fit hugs the lowest continuous surface.
inline double asymmetric_loss(double dd, const LossConfig& cfg) {
  if (dd < 0.0) return dd * dd;
  if (dd <= cfg.delta) return 0.5 * dd * dd;
  return cfg.delta * (dd - 0.5 * cfg.delta);
}

/// d/d(dd) of asymmetric_loss; continuous at 0 and at delta.
inline double asymmetric_loss_deriv(double dd, const LossConfig& cfg) {
  if (dd < 0.0) return 2.0 * dd;
  if (dd <= cfg.delta) return dd;
  return cfg.delta;
}

namespace detail {

/// Scratch space for repeated loss/gradient evaluations over the same batch
/// shape; every Eigen buffer is allocated on the first call and reused.
template <typename Scalar>
struct FitWorkspace {
  using Mat = typename ElevationModelT<Scalar>::Mat;
  using Vec = typename ElevationModelT<Scalar>::Vec;
  ForwardTrace<Scalar> trace;
  Vec dout;
  std::vector<Mat> dW;
  std::vector<Vec> db;
  Mat delta_a;
  Mat dz;
  Vec grad;
};

/// Mean loss + reverse-mode gradient given prepared (x,y) and z columns.
/// The loss sum is accumulated in double regardless of Scalar.
template <typename Scalar>
double loss_and_grad_into(const ElevationModelT<Scalar>& model,
                          const typename ElevationModelT<Scalar>::Mat& xy,
                          const typename ElevationModelT<Scalar>::Vec& z,
                          const LossConfig& cfg, FitWorkspace<Scalar>& ws) {
  using Mat = typename ElevationModelT<Scalar>::Mat;
  using Vec = typename ElevationModelT<Scalar>::Vec;

  const Eigen::Index n = xy.rows();
  forward_into(model, xy, ws.trace);

  double loss_sum = 0.0;
  ws.dout.resize(n);  // dL/d(output_i); note dd_i = z_i - out_i
  const Scalar delta = static_cast<Scalar>(cfg.delta);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar dd = z(i) - ws.trace.output(i);
    Scalar deriv;
    if (dd < Scalar(0)) {
      loss_sum += static_cast<double>(dd) * static_cast<double>(dd);
      deriv = Scalar(2) * dd;
    } else if (dd <= delta) {
      loss_sum += 0.5 * static_cast<double>(dd) * static_cast<double>(dd);
      deriv = dd;
    } else {
      loss_sum += cfg.delta * (static_cast<double>(dd) - 0.5 * cfg.delta);
      deriv = delta;
    }
    ws.dout(i) = -deriv / static_cast<Scalar>(n);
  }

  const std::size_t layers = model.layer_count();
  const std::size_t hidden = layers - 1;
  ws.dW.resize(layers);
  ws.db.resize(layers);

  // output layer
  const Mat& last_act = hidden == 0 ? ws.trace.input : ws.trace.act[hidden - 1];
  ws.dW[hidden].noalias() = ws.dout.transpose() * last_act;  // 1 x in
  ws.db[hidden] = Vec::Constant(1, ws.dout.sum());
  ws.delta_a.noalias() = ws.dout * model.weights[hidden];  // N x in

  // hidden layers, back to front; silu'(x) = s(x) * (1 + x * (1 - s(x)))
  for (std::size_t k = hidden; k-- > 0;) {
    const auto& s = ws.trace.sig[k].array();
    const auto& pre = ws.trace.pre[k].array();
    ws.dz = ws.delta_a.array() * (s * (Scalar(1) + pre * (Scalar(1) - s)));
    const Mat& a_in = k == 0 ? ws.trace.input : ws.trace.act[k - 1];
    ws.dW[k].noalias() = ws.dz.transpose() * a_in;
    ws.db[k] = ws.dz.colwise().sum().transpose();
    if (k > 0) ws.delta_a.noalias() = ws.dz * model.weights[k];
  }
  // no chain rule through the input normalization: inputs are constants,
  // only parameters carry gradient

  ws.grad.resize(model.parameter_count());
  Eigen::Index at = 0;
  for (std::size_t k = 0; k < layers; ++k) {
    ws.grad.segment(at, ws.dW[k].size()) =
        Eigen::Map<const Vec>(ws.dW[k].data(), ws.dW[k].size());
    at += ws.dW[k].size();
    ws.grad.segment(at, ws.db[k].size()) = ws.db[k];
    at += ws.db[k].size();
  }
  return loss_sum / static_cast<double>(n);
}

}  // namespace detail

/// Mean asymmetric loss over the cloud and its exact gradient w.r.t. all
/// model parameters, flattened in the model's parameter order.
template <typename Scalar>
std::pair<double, typename ElevationModelT<Scalar>::Vec> loss_and_grad(
    const ElevationModelT<Scalar>& model, const PointCloud& cloud,
    const LossConfig& cfg) {
  if (cloud.empty()) throw EmptyInput("loss_and_grad on empty cloud");
  cfg.validate();
  detail::FitWorkspace<Scalar> ws;
  const double loss = detail::loss_and_grad_into(
      model, xy_matrix<Scalar>(cloud), z_vector<Scalar>(cloud), cfg, ws);
  return {loss, std::move(ws.grad)};
}

}  // namespace groundfit
