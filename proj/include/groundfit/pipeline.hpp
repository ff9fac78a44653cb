#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <utility>
#include <vector>

#include "groundfit/elevation.hpp"
#include "groundfit/error.hpp"
#include "groundfit/fit.hpp"
#include "groundfit/loss.hpp"
#include "groundfit/optim.hpp"
#include "groundfit/pointcloud.hpp"

namespace groundfit {

/// Every tunable of the scan labeler. Defaults follow the reference
/// configuration: q = 0.5%, D = 0.40 m, 0.50 m pillars, tau = 0.05 m,
/// +-1.5 m window, both stages enabled.
struct PipelineConfig {
  double noise_quantile = 0.005;     // q, lower height quantile
  double distance_threshold = 0.40;  // D, meters
  double pillar_size = 0.50;         // v_xy, meters
  double recovery_margin = 0.05;     // tau, meters
  double window_below = 1.5;         // H_p1, meters
  double window_above = 1.5;         // H_p2, meters
  bool enable_prefilter = true;
  bool enable_refine = true;
  LossConfig loss;
  OptimConfig optim;
  std::vector<int> hidden = {64, 64, 64};
  double input_scale = 50.0;

  void validate() const {
    if (!(noise_quantile >= 0.0 && noise_quantile < 1.0)) {
      throw ConfigError("q must be in [0,1)");
    }
    if (!(distance_threshold > 0.0)) throw ConfigError("D must be > 0");
    if (!(pillar_size > 0.0)) throw ConfigError("v_xy must be > 0");
    if (!(recovery_margin >= 0.0)) throw ConfigError("tau must be >= 0");
    if (!(window_below >= 0.0 && window_above >= 0.0)) {
      throw ConfigError("H_p1/H_p2 must be >= 0");
    }
    if (!(input_scale > 0.0)) throw ConfigError("input_scale must be > 0");
    loss.validate();
    optim.validate();
  }
};

struct PrefilterResult {
  std::vector<std::size_t> kept;
  std::vector<std::size_t> removed;
  double threshold = 0.0;  // meters, z at the quantile rank
};

/// Global height denoising: the threshold is the z-value at rank
/// floor(q * L) in ascending order (lower nearest-rank quantile); points
/// strictly below it are removed. q = 0 removes nothing.
inline PrefilterResult quantile_prefilter(const PointCloud& cloud, double q) {
  if (cloud.empty()) throw EmptyInput("quantile_prefilter on empty cloud");
  if (!(q >= 0.0 && q < 1.0)) throw ConfigError("q must be in [0,1)");

  std::vector<double> zs(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) zs[i] = cloud.points[i].z;
  const auto rank = static_cast<std::size_t>(
      std::floor(q * static_cast<double>(cloud.size())));
  auto nth = zs.begin() + static_cast<std::ptrdiff_t>(rank);
  std::nth_element(zs.begin(), nth, zs.end());

  PrefilterResult result;
  result.threshold = *nth;
  result.kept.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (cloud.points[i].z < result.threshold) {
      result.removed.push_back(i);
    } else {
      result.kept.push_back(i);
    }
  }
  return result;
}

/// Label Ground iff dd_i <= D; residuals are kept as soft scores.
template <typename Derived>
SegmentationMask classify_by_threshold(const Eigen::MatrixBase<Derived>& dd,
                                       double threshold) {
  SegmentationMask mask;
  mask.labels.resize(static_cast<std::size_t>(dd.size()));
  mask.scores.emplace(static_cast<std::size_t>(dd.size()));
  for (Eigen::Index i = 0; i < dd.size(); ++i) {
    const double r = static_cast<double>(dd(i));
    mask.labels[static_cast<std::size_t>(i)] =
        r <= threshold ? Label::Ground : Label::NonGround;
    (*mask.scores)[static_cast<std::size_t>(i)] = static_cast<float>(r);
  }
  return mask;
}

namespace detail {

inline std::uint64_t pillar_key(double x, double y, double cell) {
  const auto ix = static_cast<std::int32_t>(std::floor(x / cell));
  const auto iy = static_cast<std::int32_t>(std::floor(y / cell));
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(ix)) << 32) |
         static_cast<std::uint64_t>(static_cast<std::uint32_t>(iy));
}

}  // namespace detail

/// Pillar-based label refinement. The scan is cut into pillar_size x
/// pillar_size columns anchored at the origin. Within the vertical window
/// [h - H_p1, h + H_p2] around the surface height h at the pillar center, a
/// pillar holding both classes has every point above its windowed minimum
/// elevation plus recovery_margin reclassified as non-ground. Labels only
/// ever move toward NonGround.
template <typename Scalar>
SegmentationMask pillar_refine(const PointCloud& cloud,
                               const SegmentationMask& mask,
                               const ElevationModelT<Scalar>& model,
                               const PipelineConfig& cfg) {
  if (mask.size() != cloud.size()) {
    throw LengthMismatch("mask/cloud length mismatch in pillar_refine");
  }

  std::unordered_map<std::uint64_t, std::vector<std::size_t>> pillars;
  pillars.reserve(cloud.size() / 4 + 1);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    pillars[detail::pillar_key(cloud.points[i].x, cloud.points[i].y,
                               cfg.pillar_size)]
        .push_back(i);
  }

  SegmentationMask out = mask;
  std::vector<std::size_t> windowed;
  for (const auto& [key, members] : pillars) {
    const auto ix = static_cast<std::int32_t>(key >> 32);
    const auto iy = static_cast<std::int32_t>(key & 0xFFFFFFFFu);
    const double cx = (static_cast<double>(ix) + 0.5) * cfg.pillar_size;
    const double cy = (static_cast<double>(iy) + 0.5) * cfg.pillar_size;
    const double h = static_cast<double>(predict_one(model, cx, cy));
    const double lo = h - cfg.window_below;
    const double hi = h + cfg.window_above;

    windowed.clear();
    bool has_ground = false, has_nonground = false;
    double min_z = std::numeric_limits<double>::infinity();
    for (const std::size_t i : members) {
      const double z = cloud.points[i].z;
      if (z < lo || z > hi) continue;
      windowed.push_back(i);
      min_z = std::min(min_z, z);
      if (out.labels[i] == Label::Ground) has_ground = true;
      else has_nonground = true;
    }
    if (!has_ground || !has_nonground) continue;

    const double cutoff = min_z + cfg.recovery_margin;
    for (const std::size_t i : windowed) {
      if (cloud.points[i].z > cutoff) out.labels[i] = Label::NonGround;
    }
  }
  return out;
}

/// The full three-stage scan labeler: quantile prefilter, elevation-surface
/// fit on the kept points, residual thresholding over all points (prefiltered
/// points forced to NonGround), then pillar refinement. The output covers
/// every input point.
template <typename Scalar = float>
std::pair<SegmentationMask, FitStats> label_scan(const PointCloud& cloud,
                                                 const PipelineConfig& cfg) {
  cfg.validate();
  if (cloud.empty()) throw EmptyInput("label_scan on empty cloud");

  PrefilterResult pre;
  if (cfg.enable_prefilter) {
    pre = quantile_prefilter(cloud, cfg.noise_quantile);
  } else {
    pre.kept.resize(cloud.size());
    std::iota(pre.kept.begin(), pre.kept.end(), std::size_t{0});
  }

  PointCloud kept;
  kept.meta = cloud.meta;
  kept.points.reserve(pre.kept.size());
  for (const std::size_t i : pre.kept) kept.points.push_back(cloud.points[i]);

  auto model = ElevationModelT<Scalar>::random_init(
      cfg.hidden, static_cast<Scalar>(cfg.input_scale),
      static_cast<std::uint64_t>(cfg.optim.seed));
  auto [fitted, stats] = fit_elevation(kept, std::move(model), cfg.loss, cfg.optim);

  const auto dd = residuals(fitted, cloud);
  SegmentationMask mask = classify_by_threshold(dd, cfg.distance_threshold);
  for (const std::size_t i : pre.removed) mask.labels[i] = Label::NonGround;

  if (cfg.enable_refine) {
    mask = pillar_refine(cloud, mask, fitted, cfg);
  }
  return {std::move(mask), stats};
}

}  // namespace groundfit
