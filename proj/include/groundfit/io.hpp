#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "groundfit/error.hpp"
#include "groundfit/pointcloud.hpp"

namespace groundfit {

static_assert(std::endian::native == std::endian::little,
              "scan/mask binary formats are little-endian");

enum class ScanFormat {
  XyzF32,   // 12-byte records: x, y, z as little-endian f32
  XyziF32,  // 16-byte records: x, y, z, intensity
  AsciiXyz  // whitespace-separated floats, one point per line, '#' comments
};

inline ScanFormat scan_format_from_string(const std::string& s) {
  if (s == "xyz_f32") return ScanFormat::XyzF32;
  if (s == "xyzi_f32") return ScanFormat::XyziF32;
  if (s == "ascii_xyz") return ScanFormat::AsciiXyz;
  throw ConfigError("unknown scan format: " + s);
}

inline std::string to_string(ScanFormat f) {
  switch (f) {
    case ScanFormat::XyzF32: return "xyz_f32";
    case ScanFormat::XyziF32: return "xyzi_f32";
    case ScanFormat::AsciiXyz: return "ascii_xyz";
  }
  return "?";
}

namespace detail {

inline std::vector<char> read_all_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed on " + path.string());
  return bytes;
}

inline void write_all_bytes(const std::filesystem::path& path,
                            const void* data, std::size_t n) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw IoError("write failed on " + path.string());
}

}  // namespace detail

inline PointCloud load_scan(const std::filesystem::path& path, ScanFormat format) {
  PointCloud cloud;
  cloud.meta = path.stem().string();

  if (format == ScanFormat::AsciiXyz) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) {
        line.erase(hash);
      }
      std::istringstream ls(line);
      double x, y, z;
      if (!(ls >> x)) continue;  // blank or comment-only line
      if (!(ls >> y >> z)) {
        throw FormatError(path.string() + ":" + std::to_string(lineno) +
                          ": expected three floats per line");
      }
      std::string extra;
      if (ls >> extra) {
        throw FormatError(path.string() + ":" + std::to_string(lineno) +
                          ": trailing token '" + extra + "'");
      }
      if (!Point3{x, y, z}.finite()) {
        throw DataError(path.string() + ":" + std::to_string(lineno) +
                        ": non-finite coordinate");
      }
      cloud.points.push_back({x, y, z});
    }
    return cloud;
  }

  const std::size_t record =
      format == ScanFormat::XyzF32 ? 12 : 16;
  const auto bytes = detail::read_all_bytes(path);
  if (bytes.size() % record != 0) {
    throw FormatError(path.string() + ": size " + std::to_string(bytes.size()) +
                      " not divisible by record size " + std::to_string(record));
  }
  const std::size_t n = bytes.size() / record;
  cloud.points.reserve(n);
  if (format == ScanFormat::XyziF32) cloud.intensity.emplace();
  for (std::size_t i = 0; i < n; ++i) {
    float v[4] = {0, 0, 0, 0};
    std::memcpy(v, bytes.data() + i * record, record);
    const Point3 p{static_cast<double>(v[0]), static_cast<double>(v[1]),
                   static_cast<double>(v[2])};
    if (!p.finite()) {
      throw DataError(path.string() + ": non-finite coordinate in record " +
                      std::to_string(i));
    }
    cloud.points.push_back(p);
    if (format == ScanFormat::XyziF32) cloud.intensity->push_back(v[3]);
  }
  return cloud;
}

inline void save_scan(const PointCloud& cloud, const std::filesystem::path& path,
                      ScanFormat format) {
  if (format == ScanFormat::AsciiXyz) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.precision(9);
    for (const auto& p : cloud.points) {
      out << p.x << ' ' << p.y << ' ' << p.z << '\n';
    }
    if (!out) throw IoError("write failed on " + path.string());
    return;
  }
  const bool with_intensity = format == ScanFormat::XyziF32;
  std::vector<float> buf;
  buf.reserve(cloud.size() * (with_intensity ? 4 : 3));
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    buf.push_back(static_cast<float>(p.x));
    buf.push_back(static_cast<float>(p.y));
    buf.push_back(static_cast<float>(p.z));
    if (with_intensity) {
      buf.push_back(cloud.intensity ? (*cloud.intensity)[i] : 0.0f);
    }
  }
  detail::write_all_bytes(path, buf.data(), buf.size() * sizeof(float));
}

inline std::filesystem::path scores_sidecar_path(const std::filesystem::path& mask_path) {
  return std::filesystem::path(mask_path.string() + ".scores");
}

/// One byte per point (0 = ground, 1 = non-ground); scores, when present, go
/// to a "<path>.scores" sidecar of little-endian f32.
inline void save_mask(const SegmentationMask& mask, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    bytes[i] = static_cast<std::uint8_t>(mask.labels[i]);
  }
  detail::write_all_bytes(path, bytes.data(), bytes.size());
  if (mask.scores) {
    detail::write_all_bytes(scores_sidecar_path(path), mask.scores->data(),
                            mask.scores->size() * sizeof(float));
  }
}

inline SegmentationMask load_mask(const std::filesystem::path& path) {
  SegmentationMask mask;
  const auto bytes = detail::read_all_bytes(path);
  mask.labels.reserve(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const auto b = static_cast<std::uint8_t>(bytes[i]);
    if (b > 1) {
      throw FormatError(path.string() + ": label byte " + std::to_string(b) +
                        " at index " + std::to_string(i));
    }
    mask.labels.push_back(static_cast<Label>(b));
  }
  const auto sidecar = scores_sidecar_path(path);
  if (std::filesystem::exists(sidecar)) {
    const auto sbytes = detail::read_all_bytes(sidecar);
    if (sbytes.size() != mask.size() * sizeof(float)) {
      throw FormatError(sidecar.string() + ": expected " +
                        std::to_string(mask.size()) + " f32 scores");
    }
    mask.scores.emplace(mask.size());
    std::memcpy(mask.scores->data(), sbytes.data(), sbytes.size());
  }
  return mask;
}

/// SemanticKITTI-style .label file: one u32 per point, semantic class id in
/// the lower 16 bits.
inline std::vector<std::uint16_t> load_semantic_labels(const std::filesystem::path& path) {
  const auto bytes = detail::read_all_bytes(path);
  if (bytes.size() % 4 != 0) {
    throw FormatError(path.string() + ": size not divisible by 4");
  }
  std::vector<std::uint16_t> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t v;
    std::memcpy(&v, bytes.data() + i * 4, 4);
    out[i] = static_cast<std::uint16_t>(v & 0xFFFFu);
  }
  return out;
}

/// Ground-class mapping file: whitespace-separated semantic class ids that
/// count as ground, '#' comments.
inline std::unordered_set<std::uint16_t> load_ground_class_map(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::unordered_set<std::uint16_t> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    long v;
    while (ls >> v) {
      if (v < 0 || v > 0xFFFF) throw FormatError(path.string() + ": class id out of range");
      ids.insert(static_cast<std::uint16_t>(v));
    }
  }
  if (ids.empty()) throw FormatError(path.string() + ": no ground class ids");
  return ids;
}

inline SegmentationMask mask_from_semantic_labels(
    const std::vector<std::uint16_t>& labels,
    const std::unordered_set<std::uint16_t>& ground_ids) {
  SegmentationMask mask;
  mask.labels.reserve(labels.size());
  for (const auto id : labels) {
    mask.labels.push_back(ground_ids.count(id) ? Label::Ground : Label::NonGround);
  }
  return mask;
}

}  // namespace groundfit
