#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "groundfit/error.hpp"
#include "groundfit/pointcloud.hpp"

namespace groundfit {

/// Per-scan ground flatness boundary (meters): sigma <= 0.40 is "flat".
inline constexpr double kFlatSigmaMax = 0.40;

/// Binary confusion counts with Ground as the positive class. Merging is a
/// plain sum, so per-scan counts can be reduced in any order.
struct ConfusionCounts {
  std::uint64_t tp = 0;  // pred Ground, truth Ground
  std::uint64_t fp = 0;  // pred Ground, truth NonGround
  std::uint64_t fn = 0;  // pred NonGround, truth Ground
  std::uint64_t tn = 0;  // pred NonGround, truth NonGround

  std::uint64_t total() const { return tp + fp + fn + tn; }

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend ConfusionCounts operator+(ConfusionCounts a, const ConfusionCounts& b) {
    return a += b;
  }
};

inline void accumulate(const SegmentationMask& pred,
                       const SegmentationMask& truth, ConfusionCounts& counts) {
  if (pred.size() != truth.size()) {
    throw LengthMismatch("pred/truth length mismatch: " +
                         std::to_string(pred.size()) + " vs " +
                         std::to_string(truth.size()));
  }
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool pg = pred.labels[i] == Label::Ground;
    const bool tg = truth.labels[i] == Label::Ground;
    if (pg && tg) ++counts.tp;
    else if (pg && !tg) ++counts.fp;
    else if (!pg && tg) ++counts.fn;
    else ++counts.tn;
  }
}

/// Per-class recall/precision/IoU and their mean IoU, all in percent.
struct EvalReport {
  double ground_recall = 0.0;
  double ground_precision = 0.0;
  double ground_iou = 0.0;
  double nonground_recall = 0.0;
  double nonground_precision = 0.0;
  double nonground_iou = 0.0;
  double miou = 0.0;
  std::uint64_t scans = 0;
  std::optional<double> flatness_sigma;
};

namespace detail {

/// Ratio as a percentage; a 0/0 class is vacuously perfect (100).
inline double pct(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return 100.0;
  return 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace detail

inline EvalReport report(const ConfusionCounts& c, std::uint64_t scans = 1) {
  if (c.total() == 0) throw EmptyEval("no evaluated points");
  EvalReport r;
  r.ground_recall = detail::pct(c.tp, c.tp + c.fn);
  r.ground_precision = detail::pct(c.tp, c.tp + c.fp);
  r.ground_iou = detail::pct(c.tp, c.tp + c.fp + c.fn);
  // NonGround treats tn as its true positives
  r.nonground_recall = detail::pct(c.tn, c.tn + c.fp);
  r.nonground_precision = detail::pct(c.tn, c.tn + c.fn);
  r.nonground_iou = detail::pct(c.tn, c.tn + c.fn + c.fp);
  r.miou = 0.5 * (r.ground_iou + r.nonground_iou);
  r.scans = scans;
  return r;
}

/// Population standard deviation of z over truth-ground points.
inline double flatness_sigma(const SegmentationMask& truth,
                             const PointCloud& cloud) {
  if (truth.size() != cloud.size()) {
    throw LengthMismatch("truth/cloud length mismatch in flatness_sigma");
  }
  double sum = 0.0;
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (truth.labels[i] == Label::Ground) {
      sum += cloud.points[i].z;
      ++n;
    }
  }
  if (n < 2) throw TooFewGroundPoints("flatness_sigma needs >= 2 ground points");
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (truth.labels[i] == Label::Ground) {
      const double d = cloud.points[i].z - mean;
      ss += d * d;
    }
  }
  return std::sqrt(ss / static_cast<double>(n));
}

inline bool is_flat(double sigma) { return sigma <= kFlatSigmaMax; }

enum class ThroughputBand { Offline, NearRealTime, RealTime };

/// Paper-style throughput bands: <5 Hz offline, 5-15 Hz near-real-time,
/// >15 Hz real-time.
inline ThroughputBand throughput_band(double hz) {
  if (hz < 5.0) return ThroughputBand::Offline;
  if (hz <= 15.0) return ThroughputBand::NearRealTime;
  return ThroughputBand::RealTime;
}

inline const char* to_string(ThroughputBand b) {
  switch (b) {
    case ThroughputBand::Offline: return "offline";
    case ThroughputBand::NearRealTime: return "near-real-time";
    case ThroughputBand::RealTime: return "real-time";
  }
  return "?";
}

inline double throughput_hz(std::size_t scans, double seconds) {
  if (scans == 0) throw EmptyInput("throughput needs >= 1 scan");
  if (!(seconds > 0.0)) throw DataError("non-positive elapsed time");
  return static_cast<double>(scans) / seconds;
}

/// Wall-clock scans-per-second of `process` over `scans`; the first scan is
/// run once untimed as warm-up, then all scans are timed.
template <typename Process, typename Scans>
double measure_throughput(Process&& process, const Scans& scans) {
  if (scans.empty()) throw EmptyInput("throughput needs >= 1 scan");
  process(scans.front());
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& s : scans) process(s);
  const auto t1 = std::chrono::steady_clock::now();
  return throughput_hz(scans.size(),
                       std::chrono::duration<double>(t1 - t0).count());
}

}  // namespace groundfit
