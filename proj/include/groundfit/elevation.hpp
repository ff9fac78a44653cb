#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "groundfit/error.hpp"
#include "groundfit/pointcloud.hpp"

namespace groundfit {

/// x * sigmoid(x)
inline double silu(double x) { return x / (1.0 + std::exp(-x)); }

/// Bird's-eye-view elevation surface g(x, y) -> z: a small MLP with SiLU
/// hidden activations and a linear output. Inputs are divided by input_scale
/// before the first layer. The layer stack is fixed at construction.
///
/// Scalar is float for the production pipeline and double where full
/// precision matters (gradient verification).
template <typename Scalar>
struct ElevationModelT {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  // weights[k] is (out x in); the last layer has a single output row.
  std::vector<Mat> weights;
  std::vector<Vec> biases;
  Scalar input_scale = Scalar(50);

  static ElevationModelT zeros(const std::vector<int>& hidden,
                               Scalar input_scale) {
    ElevationModelT m;
    m.input_scale = input_scale;
    int in = 2;
    for (const int h : hidden) {
      m.weights.push_back(Mat::Zero(h, in));
      m.biases.push_back(Vec::Zero(h));
      in = h;
    }
    m.weights.push_back(Mat::Zero(1, in));
    m.biases.push_back(Vec::Zero(1));
    m.validate();
    return m;
  }

  /// Glorot-uniform weights from a seeded PRNG; biases zero, so the initial
  /// surface sits near z = 0 in the standardized frame.
  static ElevationModelT random_init(const std::vector<int>& hidden,
                                     Scalar input_scale, std::uint64_t seed) {
    ElevationModelT m = zeros(hidden, input_scale);
    std::mt19937 rng(static_cast<std::uint32_t>(seed ^ (seed >> 32)));
    for (auto& w : m.weights) {
      const double bound =
          std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        for (Eigen::Index c = 0; c < w.cols(); ++c) {
          w(r, c) = static_cast<Scalar>(dist(rng));
        }
      }
    }
    return m;
  }

  void validate() const {
    if (weights.empty() || weights.size() != biases.size()) {
      throw ShapeMismatch("inconsistent layer stack");
    }
    if (!(input_scale > Scalar(0))) throw ConfigError("input_scale must be > 0");
    Eigen::Index in = 2;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      if (weights[k].cols() != in || biases[k].size() != weights[k].rows()) {
        throw ShapeMismatch("layer " + std::to_string(k) + " shape mismatch");
      }
      in = weights[k].rows();
    }
    if (in != 1) throw ShapeMismatch("final layer must have one output");
  }

  std::size_t layer_count() const { return weights.size(); }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      n += weights[k].size() + biases[k].size();
    }
    return n;
  }

  Vec parameters() const {
    Vec theta(parameter_count());
    Eigen::Index at = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      theta.segment(at, weights[k].size()) =
          Eigen::Map<const Vec>(weights[k].data(), weights[k].size());
      at += weights[k].size();
      theta.segment(at, biases[k].size()) = biases[k];
      at += biases[k].size();
    }
    return theta;
  }

  void set_parameters(const Vec& theta) {
    if (theta.size() != parameter_count()) {
      throw ShapeMismatch("parameter vector has wrong length");
    }
    Eigen::Index at = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      Eigen::Map<Vec>(weights[k].data(), weights[k].size()) =
          theta.segment(at, weights[k].size());
      at += weights[k].size();
      biases[k] = theta.segment(at, biases[k].size());
      at += biases[k].size();
    }
  }
};

using ElevationModel = ElevationModelT<float>;
using ElevationModelD = ElevationModelT<double>;

namespace detail {

/// Activations kept from a forward pass for the backward pass. Reusing one
/// trace across iterations keeps the fit loop free of per-iteration heap
/// traffic (the matrices are megabytes at scan sizes).
template <typename Scalar>
struct ForwardTrace {
  using Mat = typename ElevationModelT<Scalar>::Mat;
  using Vec = typename ElevationModelT<Scalar>::Vec;
  Mat input;               // N x 2, already divided by input_scale
  std::vector<Mat> pre;    // pre-activations per hidden layer
  std::vector<Mat> sig;    // sigmoid(pre) per hidden layer
  std::vector<Mat> act;    // silu(pre) per hidden layer
  Vec output;              // N
};

template <typename Scalar>
void forward_into(const ElevationModelT<Scalar>& model,
                  const typename ElevationModelT<Scalar>::Mat& xy,
                  ForwardTrace<Scalar>& t) {
  using Mat = typename ElevationModelT<Scalar>::Mat;
  t.input = xy / model.input_scale;
  const std::size_t hidden = model.layer_count() - 1;
  t.pre.resize(hidden);
  t.sig.resize(hidden);
  t.act.resize(hidden);
  const Mat* a = &t.input;
  for (std::size_t k = 0; k < hidden; ++k) {
    t.pre[k].noalias() = (*a) * model.weights[k].transpose();
    t.pre[k].rowwise() += model.biases[k].transpose();
    t.sig[k] = ((-t.pre[k].array()).exp() + Scalar(1)).inverse();
    t.act[k] = t.pre[k].array() * t.sig[k].array();
    a = &t.act[k];
  }
  t.output.noalias() = (*a) * model.weights[hidden].transpose();
  t.output.array() += model.biases[hidden](0);
}

template <typename Scalar>
ForwardTrace<Scalar> forward(const ElevationModelT<Scalar>& model,
                             const typename ElevationModelT<Scalar>::Mat& xy) {
  ForwardTrace<Scalar> t;
  forward_into(model, xy, t);
  return t;
}

}  // namespace detail

/// Deterministic forward pass on a batch of (x, y) in meters.
template <typename Scalar>
typename ElevationModelT<Scalar>::Vec predict(
    const ElevationModelT<Scalar>& model,
    const typename ElevationModelT<Scalar>::Mat& xy) {
  if (xy.cols() != 2) throw ShapeMismatch("query batch must be N x 2");
  return detail::forward(model, xy).output;
}

template <typename Scalar>
Scalar predict_one(const ElevationModelT<Scalar>& model, double x, double y) {
  typename ElevationModelT<Scalar>::Mat xy(1, 2);
  xy(0, 0) = static_cast<Scalar>(x);
  xy(0, 1) = static_cast<Scalar>(y);
  return predict(model, xy)(0);
}

template <typename Scalar>
typename ElevationModelT<Scalar>::Mat xy_matrix(const PointCloud& cloud) {
  typename ElevationModelT<Scalar>::Mat xy(cloud.size(), 2);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    xy(static_cast<Eigen::Index>(i), 0) = static_cast<Scalar>(cloud.points[i].x);
    xy(static_cast<Eigen::Index>(i), 1) = static_cast<Scalar>(cloud.points[i].y);
  }
  return xy;
}

template <typename Scalar>
typename ElevationModelT<Scalar>::Vec z_vector(const PointCloud& cloud) {
  typename ElevationModelT<Scalar>::Vec z(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    z(static_cast<Eigen::Index>(i)) = static_cast<Scalar>(cloud.points[i].z);
  }
  return z;
}

/// Vertical residuals dd_i = z_i - g(x_i, y_i).
template <typename Scalar>
typename ElevationModelT<Scalar>::Vec residuals(
    const ElevationModelT<Scalar>& model, const PointCloud& cloud) {
  if (cloud.empty()) throw EmptyInput("residuals on empty cloud");
  return z_vector<Scalar>(cloud) - predict(model, xy_matrix<Scalar>(cloud));
}

}  // namespace groundfit
