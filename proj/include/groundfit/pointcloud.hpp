#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "groundfit/error.hpp"

namespace groundfit {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }
  double planar_range() const { return std::hypot(x, y); }
};

/// Per-scan set of 3D points (meters) with optional intensities.
struct PointCloud {
  std::vector<Point3> points;
  std::optional<std::vector<float>> intensity;  // same length as points when present
  std::string meta;                             // free-form scan identifier

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  void check_invariants() const {
    if (intensity && intensity->size() != points.size()) {
      throw LengthMismatch("intensity length does not match point count");
    }
    for (const auto& p : points) {
      if (!p.finite()) throw DataError("non-finite coordinate in point cloud");
    }
  }
};

enum class Label : std::uint8_t { Ground = 0, NonGround = 1 };

/// Per-point binary ground/non-ground labels, optionally with soft scores
/// (the labeler stores the vertical residuals here).
struct SegmentationMask {
  std::vector<Label> labels;
  std::optional<std::vector<float>> scores;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }

  void check_against(const PointCloud& cloud) const {
    if (labels.size() != cloud.size()) {
      throw LengthMismatch("mask length does not match point count");
    }
    if (scores && scores->size() != labels.size()) {
      throw LengthMismatch("score length does not match label count");
    }
  }
};

/// Rigid motion into the standardized vehicle frame (ground ~ z=0, forward
/// x-axis) plus the sensor-specific ego-vehicle crop radius.
struct StandardizationTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double ego_radius = 0.0;  // meters, >= 0

  void validate() const {
    const double orth_err =
        (rotation.transpose() * rotation - Eigen::Matrix3d::Identity())
            .cwiseAbs()
            .maxCoeff();
    if (!(orth_err <= 1e-9)) {
      throw DataError("rotation matrix is not orthonormal (err " +
                      std::to_string(orth_err) + ")");
    }
    if (!(ego_radius >= 0.0)) throw DataError("ego_radius must be >= 0");
  }
};

/// Maps every point p' = R*p + t, then drops points whose planar (x,y) range
/// in the new frame is strictly below ego_radius. Intensities follow their
/// points.
inline PointCloud standardize(const PointCloud& cloud,
                              const StandardizationTransform& t) {
  t.validate();
  PointCloud out;
  out.meta = cloud.meta;
  out.points.reserve(cloud.size());
  if (cloud.intensity) {
    out.intensity.emplace();
    out.intensity->reserve(cloud.size());
  }
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    const Eigen::Vector3d q =
        t.rotation * Eigen::Vector3d(p.x, p.y, p.z) + t.translation;
    if (std::hypot(q.x(), q.y()) < t.ego_radius) continue;
    out.points.push_back({q.x(), q.y(), q.z()});
    if (cloud.intensity) out.intensity->push_back((*cloud.intensity)[i]);
  }
  return out;
}

}  // namespace groundfit
