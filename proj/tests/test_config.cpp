#include <catch2/catch_amalgamated.hpp>

#include "groundfit/config.hpp"

using namespace groundfit;

TEST_CASE("defaults match the reference configuration", "[config]") {
  const auto cfg = pipeline_config_from(ConfigFile::parse_string(""));
  CHECK(cfg.noise_quantile == 0.005);
  CHECK(cfg.distance_threshold == 0.40);
  CHECK(cfg.pillar_size == 0.50);
  CHECK(cfg.recovery_margin == 0.05);
  CHECK(cfg.window_below == 1.5);
  CHECK(cfg.window_above == 1.5);
  CHECK(cfg.enable_prefilter);
  CHECK(cfg.enable_refine);
  CHECK(cfg.loss.delta == 0.05);
  CHECK(cfg.optim.early_stop_patience == 150);
  CHECK(cfg.hidden == std::vector<int>{64, 64, 64});
}

TEST_CASE("pipeline and fit sections parse", "[config]") {
  const auto cfg = pipeline_config_from(ConfigFile::parse_string(R"(
# tuned run
[pipeline]
q = 0.01
D = 0.30
v_xy = 0.25
tau = 0.10
H_p1 = 1.0
H_p2 = 2.0
enable_prefilter = false
enable_refine = true

[fit]
delta = 0.02
learning_rate = 0.005
max_iters = 500
seed = 21
hidden = 32 16
)"));
  CHECK(cfg.noise_quantile == 0.01);
  CHECK(cfg.distance_threshold == 0.30);
  CHECK(cfg.pillar_size == 0.25);
  CHECK(cfg.recovery_margin == 0.10);
  CHECK(cfg.window_below == 1.0);
  CHECK(cfg.window_above == 2.0);
  CHECK_FALSE(cfg.enable_prefilter);
  CHECK(cfg.enable_refine);
  CHECK(cfg.loss.delta == 0.02);
  CHECK(cfg.optim.learning_rate == 0.005);
  CHECK(cfg.optim.max_iters == 500);
  CHECK(cfg.optim.seed == 21);
  CHECK(cfg.hidden == std::vector<int>{32, 16});
}

TEST_CASE("unknown keys and malformed values are config errors", "[config]") {
  CHECK_THROWS_AS(
      pipeline_config_from(ConfigFile::parse_string("[pipeline]\nqq = 1\n")),
      ConfigError);
  CHECK_THROWS_AS(
      pipeline_config_from(ConfigFile::parse_string("[pipeline]\nq = abc\n")),
      ConfigError);
  CHECK_THROWS_AS(
      pipeline_config_from(ConfigFile::parse_string("[fit]\nmax_iters = 1.5\n")),
      ConfigError);
  CHECK_THROWS_AS(ConfigFile::parse_string("[pipeline\nq = 1\n"), ConfigError);
  CHECK_THROWS_AS(ConfigFile::parse_string("[pipeline]\nno equals sign\n"),
                  ConfigError);
}

TEST_CASE("out-of-range values fail validation", "[config]") {
  CHECK_THROWS_AS(
      pipeline_config_from(ConfigFile::parse_string("[pipeline]\nq = 1.0\n")),
      ConfigError);
  CHECK_THROWS_AS(
      pipeline_config_from(ConfigFile::parse_string("[pipeline]\nD = 0\n")),
      ConfigError);
  CHECK_THROWS_AS(
      pipeline_config_from(ConfigFile::parse_string("[fit]\nbeta1 = 1.5\n")),
      ConfigError);
}

TEST_CASE("ransac section parses with defaults", "[config]") {
  const auto defaults = ransac_config_from(ConfigFile::parse_string(""));
  CHECK(defaults.iterations == 200);
  CHECK(defaults.inlier_threshold == 0.15);
  CHECK(defaults.min_inlier_fraction == 0.1);

  const auto cfg = ransac_config_from(ConfigFile::parse_string(
      "[ransac]\niterations = 50\ninlier_threshold = 0.2\nseed = 4\n"));
  CHECK(cfg.iterations == 50);
  CHECK(cfg.inlier_threshold == 0.2);
  CHECK(cfg.seed == 4);
}

TEST_CASE("scene specs parse terrain, objects, and ring pattern", "[config]") {
  const auto spec = scene_spec_from(ConfigFile::parse_string(R"(
[scene]
terrain = sine 0.3 20
extent = 25
density = 4
z_noise_sigma = 0.02
multipath_fraction = 0.004
multipath_depth = 2.5
ring_pattern = 32 40
seed = 13
name = demo
object = box 5 0 2 2 1.5
object = pole -3 4 0.2 3
object = wall 0 0 4 4 1.2
)"));
  CHECK(std::holds_alternative<SineTerrain>(spec.terrain));
  CHECK(spec.extent == 25.0);
  CHECK(spec.density == 4.0);
  CHECK(spec.z_noise_sigma == 0.02);
  CHECK(spec.multipath_depth == 2.5);
  REQUIRE(spec.ring_pattern.has_value());
  CHECK(spec.ring_pattern->num_rings == 32);
  CHECK(spec.seed == 13);
  CHECK(spec.name == "demo");
  REQUIRE(spec.objects.size() == 3);
  CHECK(std::holds_alternative<BoxObject>(spec.objects[0]));
  CHECK(std::holds_alternative<PoleObject>(spec.objects[1]));
  CHECK(std::holds_alternative<WallObject>(spec.objects[2]));
}

TEST_CASE("scene spec argument counts are enforced", "[config]") {
  CHECK_THROWS_AS(
      scene_spec_from(ConfigFile::parse_string("[scene]\nterrain = flat\n")),
      ConfigError);
  CHECK_THROWS_AS(
      scene_spec_from(ConfigFile::parse_string("[scene]\nobject = box 1 2\n")),
      ConfigError);
  CHECK_THROWS_AS(
      scene_spec_from(ConfigFile::parse_string("[scene]\nterrain = hills 1\n")),
      ConfigError);
}
