#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "groundfit/error.hpp"
#include "groundfit/pointcloud.hpp"

namespace groundfit {

struct RansacConfig {
  int iterations = 200;
  double inlier_threshold = 0.15;  // meters
  std::int64_t seed = 0;
  double min_inlier_fraction = 0.1;

  void validate() const {
    if (iterations < 1) throw ConfigError("iterations must be >= 1");
    if (!(inlier_threshold > 0)) throw ConfigError("inlier_threshold must be > 0");
    if (!(min_inlier_fraction > 0 && min_inlier_fraction <= 1)) {
      throw ConfigError("min_inlier_fraction must be in (0,1]");
    }
  }
};

struct Plane {
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();  // unit length
  double offset = 0.0;  // plane: normal . p + offset = 0

  double signed_distance(const Point3& p) const {
    return normal.x() * p.x + normal.y() * p.y + normal.z() * p.z + offset;
  }
};

namespace detail {

inline bool all_collinear(const PointCloud& cloud) {
  if (cloud.size() < 3) return true;
  const Eigen::Vector3d a(cloud.points[0].x, cloud.points[0].y, cloud.points[0].z);
  Eigen::Vector3d dir = Eigen::Vector3d::Zero();
  std::size_t pivot = 0;
  for (std::size_t i = 1; i < cloud.size(); ++i) {
    const Eigen::Vector3d b(cloud.points[i].x, cloud.points[i].y, cloud.points[i].z);
    if ((b - a).norm() > 1e-12) {
      dir = (b - a).normalized();
      pivot = i;
      break;
    }
  }
  if (pivot == 0) return true;  // all points coincide
  for (std::size_t i = 1; i < cloud.size(); ++i) {
    const Eigen::Vector3d b(cloud.points[i].x, cloud.points[i].y, cloud.points[i].z);
    const Eigen::Vector3d d = b - a;
    if (d.cross(dir).norm() > 1e-9 * std::max(1.0, d.norm())) return false;
  }
  return true;
}

inline std::size_t count_inliers(const PointCloud& cloud, const Plane& plane,
                                 double threshold) {
  std::size_t n = 0;
  for (const auto& p : cloud.points) {
    if (std::abs(plane.signed_distance(p)) <= threshold) ++n;
  }
  return n;
}

/// Least-squares plane through a point subset: centroid + smallest principal
/// direction of the scatter matrix.
inline Plane fit_plane_lsq(const PointCloud& cloud,
                           const std::vector<std::size_t>& idx) {
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const std::size_t i : idx) {
    centroid += Eigen::Vector3d(cloud.points[i].x, cloud.points[i].y,
                                cloud.points[i].z);
  }
  centroid /= static_cast<double>(idx.size());
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (const std::size_t i : idx) {
    const Eigen::Vector3d d =
        Eigen::Vector3d(cloud.points[i].x, cloud.points[i].y, cloud.points[i].z) -
        centroid;
    scatter += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
  Plane plane;
  plane.normal = eig.eigenvectors().col(0).normalized();
  plane.offset = -plane.normal.dot(centroid);
  return plane;
}

}  // namespace detail

/// Classic RANSAC ground-plane baseline: the best of `iterations` random
/// 3-point plane hypotheses by inlier count (ties keep the earlier
/// hypothesis), refit to its inliers by least squares. The mask labels
/// Ground iff |signed distance| <= inlier_threshold; signed distances are
/// kept as scores.
inline std::pair<Plane, SegmentationMask> ransac_plane(const PointCloud& cloud,
                                                       const RansacConfig& cfg) {
  cfg.validate();
  if (cloud.size() < 3 || detail::all_collinear(cloud)) {
    throw DegenerateInput("ransac_plane needs >= 3 non-collinear points");
  }

  std::mt19937 rng(static_cast<std::uint32_t>(
      static_cast<std::uint64_t>(cfg.seed) ^ 0x51ab5e15u));
  std::uniform_int_distribution<std::size_t> pick(0, cloud.size() - 1);

  Plane best;
  std::size_t best_inliers = 0;
  bool found = false;
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    Plane hyp;
    bool ok = false;
    // degenerate (collinear) samples are redrawn; the cloud is known to
    // contain a non-collinear triple
    for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
      const std::size_t i1 = pick(rng);
      std::size_t i2 = pick(rng);
      while (i2 == i1) i2 = pick(rng);
      std::size_t i3 = pick(rng);
      while (i3 == i1 || i3 == i2) i3 = pick(rng);
      const Eigen::Vector3d a(cloud.points[i1].x, cloud.points[i1].y, cloud.points[i1].z);
      const Eigen::Vector3d b(cloud.points[i2].x, cloud.points[i2].y, cloud.points[i2].z);
      const Eigen::Vector3d c(cloud.points[i3].x, cloud.points[i3].y, cloud.points[i3].z);
      const Eigen::Vector3d n = (b - a).cross(c - a);
      const double nn = n.norm();
      if (nn <= 1e-12 * std::max(1.0, (b - a).norm() * (c - a).norm())) continue;
      hyp.normal = n / nn;
      hyp.offset = -hyp.normal.dot(a);
      ok = true;
    }
    if (!ok) continue;
    const std::size_t inliers =
        detail::count_inliers(cloud, hyp, cfg.inlier_threshold);
    if (!found || inliers > best_inliers) {
      best = hyp;
      best_inliers = inliers;
      found = true;
    }
  }
  if (!found ||
      static_cast<double>(best_inliers) <
          cfg.min_inlier_fraction * static_cast<double>(cloud.size())) {
    throw NoPlaneFound("best inlier fraction below min_inlier_fraction");
  }

  std::vector<std::size_t> inlier_idx;
  inlier_idx.reserve(best_inliers);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (std::abs(best.signed_distance(cloud.points[i])) <= cfg.inlier_threshold) {
      inlier_idx.push_back(i);
    }
  }
  const Plane refined = detail::fit_plane_lsq(cloud, inlier_idx);
  // keep the refit only if it does not lose inliers, so the returned plane
  // never scores below any sampled hypothesis
  if (detail::count_inliers(cloud, refined, cfg.inlier_threshold) >= best_inliers) {
    best = refined;
  }

  SegmentationMask mask;
  mask.labels.resize(cloud.size());
  mask.scores.emplace(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double d = best.signed_distance(cloud.points[i]);
    mask.labels[i] = std::abs(d) <= cfg.inlier_threshold ? Label::Ground
                                                         : Label::NonGround;
    (*mask.scores)[i] = static_cast<float>(d);
  }
  return {best, std::move(mask)};
}

}  // namespace groundfit
