#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "groundfit/error.hpp"
#include "groundfit/pipeline.hpp"
#include "groundfit/ransac.hpp"
#include "groundfit/synth.hpp"

namespace groundfit {

/// Minimal INI-style config: [section] headers, key = value lines, '#'
/// comments. Keys may repeat (scene object lists). Lookups are strict:
/// consumers reject keys they do not know.
class ConfigFile {
 public:
  struct Entry {
    std::string key;
    std::string value;
  };

  static ConfigFile parse(std::istream& in, const std::string& origin) {
    ConfigFile cfg;
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) {
        line.erase(hash);
      }
      const auto text = trim(line);
      if (text.empty()) continue;
      if (text.front() == '[') {
        if (text.back() != ']') {
          throw ConfigError(origin + ":" + std::to_string(lineno) +
                            ": unterminated section header");
        }
        section = std::string(trim(text.substr(1, text.size() - 2)));
        continue;
      }
      const auto eq = text.find('=');
      if (eq == std::string_view::npos) {
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": expected key = value");
      }
      Entry e{std::string(trim(text.substr(0, eq))),
              std::string(trim(text.substr(eq + 1)))};
      if (e.key.empty()) {
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
      }
      cfg.sections_[section].push_back(std::move(e));
    }
    return cfg;
  }

  static ConfigFile parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    return parse(in, path.string());
  }

  static ConfigFile parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in, "<string>");
  }

  bool has_section(const std::string& name) const {
    return sections_.count(name) > 0;
  }

  const std::vector<Entry>& entries(const std::string& section) const {
    static const std::vector<Entry> empty;
    const auto it = sections_.find(section);
    return it == sections_.end() ? empty : it->second;
  }

 private:
  static std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
      s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
      s.remove_suffix(1);
    }
    return s;
  }

  std::map<std::string, std::vector<Entry>> sections_;
};

namespace detail {

inline double parse_double(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': not a number: '" + v + "'");
  }
}

inline long parse_int(const std::string& v, const std::string& key) {
  long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) {
    throw ConfigError("key '" + key + "': not an integer: '" + v + "'");
  }
  return out;
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("key '" + key + "': not a boolean: '" + v + "'");
}

inline std::vector<double> parse_numbers(const std::string& v,
                                         const std::string& key) {
  std::istringstream in(v);
  std::vector<double> out;
  double d;
  while (in >> d) out.push_back(d);
  if (!in.eof()) throw ConfigError("key '" + key + "': bad number list: '" + v + "'");
  return out;
}

}  // namespace detail

/// [pipeline] and [fit] sections onto a PipelineConfig; unknown keys are
/// errors.
inline PipelineConfig pipeline_config_from(const ConfigFile& cfg) {
  PipelineConfig pc;
  for (const auto& e : cfg.entries("pipeline")) {
    if (e.key == "q") pc.noise_quantile = detail::parse_double(e.value, e.key);
    else if (e.key == "D") pc.distance_threshold = detail::parse_double(e.value, e.key);
    else if (e.key == "v_xy") pc.pillar_size = detail::parse_double(e.value, e.key);
    else if (e.key == "tau") pc.recovery_margin = detail::parse_double(e.value, e.key);
    else if (e.key == "H_p1") pc.window_below = detail::parse_double(e.value, e.key);
    else if (e.key == "H_p2") pc.window_above = detail::parse_double(e.value, e.key);
    else if (e.key == "enable_prefilter") pc.enable_prefilter = detail::parse_bool(e.value, e.key);
    else if (e.key == "enable_refine") pc.enable_refine = detail::parse_bool(e.value, e.key);
    else throw ConfigError("[pipeline]: unknown key '" + e.key + "'");
  }
  for (const auto& e : cfg.entries("fit")) {
    auto& oc = pc.optim;
    if (e.key == "delta") pc.loss.delta = detail::parse_double(e.value, e.key);
    else if (e.key == "learning_rate") oc.learning_rate = detail::parse_double(e.value, e.key);
    else if (e.key == "beta1") oc.beta1 = detail::parse_double(e.value, e.key);
    else if (e.key == "beta2") oc.beta2 = detail::parse_double(e.value, e.key);
    else if (e.key == "epsilon") oc.epsilon = detail::parse_double(e.value, e.key);
    else if (e.key == "weight_decay") oc.weight_decay = detail::parse_double(e.value, e.key);
    else if (e.key == "max_iters") oc.max_iters = static_cast<int>(detail::parse_int(e.value, e.key));
    else if (e.key == "plateau_factor") oc.plateau_factor = detail::parse_double(e.value, e.key);
    else if (e.key == "plateau_patience") oc.plateau_patience = static_cast<int>(detail::parse_int(e.value, e.key));
    else if (e.key == "min_lr") oc.min_lr = detail::parse_double(e.value, e.key);
    else if (e.key == "ema_decay") oc.ema_decay = detail::parse_double(e.value, e.key);
    else if (e.key == "early_stop_patience") oc.early_stop_patience = static_cast<int>(detail::parse_int(e.value, e.key));
    else if (e.key == "seed") oc.seed = detail::parse_int(e.value, e.key);
    else if (e.key == "max_fit_points") oc.max_fit_points = static_cast<int>(detail::parse_int(e.value, e.key));
    else if (e.key == "input_scale") pc.input_scale = detail::parse_double(e.value, e.key);
    else if (e.key == "hidden") {
      pc.hidden.clear();
      for (const double h : detail::parse_numbers(e.value, e.key)) {
        pc.hidden.push_back(static_cast<int>(h));
      }
      if (pc.hidden.empty()) throw ConfigError("[fit] hidden: empty layer list");
    } else {
      throw ConfigError("[fit]: unknown key '" + e.key + "'");
    }
  }
  pc.validate();
  return pc;
}

inline RansacConfig ransac_config_from(const ConfigFile& cfg) {
  RansacConfig rc;
  for (const auto& e : cfg.entries("ransac")) {
    if (e.key == "iterations") rc.iterations = static_cast<int>(detail::parse_int(e.value, e.key));
    else if (e.key == "inlier_threshold") rc.inlier_threshold = detail::parse_double(e.value, e.key);
    else if (e.key == "seed") rc.seed = detail::parse_int(e.value, e.key);
    else if (e.key == "min_inlier_fraction") rc.min_inlier_fraction = detail::parse_double(e.value, e.key);
    else throw ConfigError("[ransac]: unknown key '" + e.key + "'");
  }
  rc.validate();
  return rc;
}

/// [scene] section onto a SceneSpec. Terrain forms: "flat H",
/// "ramp SX SY", "sine A LAMBDA". Objects (repeatable): "box CX CY SX SY SZ",
/// "pole CX CY R H", "wall X1 Y1 X2 Y2 H". Ring pattern: "N MAX_RANGE".
inline SceneSpec scene_spec_from(const ConfigFile& cfg) {
  SceneSpec spec;
  const auto expect = [](const std::vector<double>& v, std::size_t n,
                         const std::string& what) {
    if (v.size() != n) {
      throw ConfigError(what + ": expected " + std::to_string(n) + " numbers");
    }
  };
  for (const auto& e : cfg.entries("scene")) {
    if (e.key == "terrain" || e.key == "object" || e.key == "ring_pattern") {
      std::istringstream in(e.value);
      std::string kind;
      in >> kind;
      std::vector<double> args;
      double d;
      while (in >> d) args.push_back(d);
      if (e.key == "terrain") {
        if (kind == "flat") {
          expect(args, 1, "terrain flat");
          spec.terrain = FlatTerrain{args[0]};
        } else if (kind == "ramp") {
          expect(args, 2, "terrain ramp");
          spec.terrain = RampTerrain{args[0], args[1]};
        } else if (kind == "sine") {
          expect(args, 2, "terrain sine");
          spec.terrain = SineTerrain{args[0], args[1]};
        } else {
          throw ConfigError("unknown terrain '" + kind + "'");
        }
      } else if (e.key == "object") {
        if (kind == "box") {
          expect(args, 5, "object box");
          spec.objects.push_back(BoxObject{args[0], args[1], args[2], args[3], args[4]});
        } else if (kind == "pole") {
          expect(args, 4, "object pole");
          spec.objects.push_back(PoleObject{args[0], args[1], args[2], args[3]});
        } else if (kind == "wall") {
          expect(args, 5, "object wall");
          spec.objects.push_back(WallObject{args[0], args[1], args[2], args[3], args[4]});
        } else {
          throw ConfigError("unknown object '" + kind + "'");
        }
      } else {  // ring_pattern
        const auto nums = detail::parse_numbers(e.value, e.key);
        expect(nums, 2, "ring_pattern");
        spec.ring_pattern = RingPattern{static_cast<int>(nums[0]), nums[1]};
      }
    }
    else if (e.key == "extent") spec.extent = detail::parse_double(e.value, e.key);
    else if (e.key == "density") spec.density = detail::parse_double(e.value, e.key);
    else if (e.key == "z_noise_sigma") spec.z_noise_sigma = detail::parse_double(e.value, e.key);
    else if (e.key == "multipath_fraction") spec.multipath_fraction = detail::parse_double(e.value, e.key);
    else if (e.key == "multipath_depth") spec.multipath_depth = detail::parse_double(e.value, e.key);
    else if (e.key == "seed") spec.seed = static_cast<std::uint64_t>(detail::parse_int(e.value, e.key));
    else if (e.key == "name") spec.name = e.value;
    else throw ConfigError("[scene]: unknown key '" + e.key + "'");
  }
  spec.validate();
  return spec;
}

}  // namespace groundfit
