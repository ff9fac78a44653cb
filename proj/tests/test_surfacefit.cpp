#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "groundfit/elevation.hpp"
#include "groundfit/fit.hpp"
#include "groundfit/loss.hpp"
#include "groundfit/optim.hpp"

using namespace groundfit;

namespace {

PointCloud random_cloud(std::size_t n, std::mt19937& rng, double z_scale = 1.0) {
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  std::normal_distribution<double> g(0.0, z_scale);
  PointCloud cloud;
  for (std::size_t i = 0; i < n; ++i) cloud.points.push_back({u(rng), u(rng), g(rng)});
  return cloud;
}

/// Independent gradient oracle: central finite differences over every
/// parameter, evaluating only the (loss) forward path.
Eigen::VectorXd fd_gradient(const ElevationModelD& model, const PointCloud& cloud,
                            const LossConfig& cfg, double h = 1e-5) {
  ElevationModelD probe = model;
  Eigen::VectorXd theta = model.parameters();
  Eigen::VectorXd grad(theta.size());
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    Eigen::VectorXd tp = theta, tm = theta;
    tp(k) += h;
    tm(k) -= h;
    probe.set_parameters(tp);
    const double lp = loss_and_grad(probe, cloud, cfg).first;
    probe.set_parameters(tm);
    const double lm = loss_and_grad(probe, cloud, cfg).first;
    grad(k) = (lp - lm) / (2.0 * h);
  }
  return grad;
}

}  // namespace

TEST_CASE("silu at reference points", "[elevation]") {
  CHECK(silu(0.0) == 0.0);
  CHECK(std::abs(silu(-100.0)) < 1e-40);
  CHECK(silu(1.0) == Catch::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-12));
}

TEST_CASE("predict on degenerate weight settings", "[elevation]") {
  auto zero = ElevationModelD::zeros({8, 8}, 50.0);
  ElevationModelD::Mat xy(3, 2);
  xy << 0, 0, 10, -5, -40, 40;

  SECTION("all-zero weights give the zero surface") {
    const auto out = predict(zero, xy);
    for (Eigen::Index i = 0; i < out.size(); ++i) CHECK(out(i) == 0.0);
  }

  SECTION("zero hidden weights with final bias b give a constant surface") {
    zero.biases.back()(0) = 0.5;
    const auto out = predict(zero, xy);
    for (Eigen::Index i = 0; i < out.size(); ++i) CHECK(out(i) == 0.5);
  }
}

TEST_CASE("predict is deterministic on duplicated query rows", "[elevation]") {
  const auto model = ElevationModelD::random_init({16, 16}, 50.0, 123);
  ElevationModelD::Mat xy(4, 2);
  xy << 3.5, -2.0, 1.0, 1.0, 3.5, -2.0, 3.5, -2.0;
  const auto out = predict(model, xy);
  CHECK(out(0) == out(2));
  CHECK(out(0) == out(3));
}

TEST_CASE("residuals follow dd = z - g(x, y)", "[elevation]") {
  PointCloud cloud;
  cloud.points = {{0, 0, 1}, {3, 4, 0}, {1, 1, 0.2}};

  const auto zero = ElevationModelD::zeros({4}, 50.0);
  auto dd = residuals(zero, cloud);
  CHECK(dd(0) == 1.0);
  CHECK(dd(1) == 0.0);

  auto constant = ElevationModelD::zeros({4}, 50.0);
  constant.biases.back()(0) = 0.5;
  dd = residuals(constant, cloud);
  CHECK(dd(2) == Catch::Approx(-0.3).margin(1e-15));

  CHECK_THROWS_AS(residuals(zero, PointCloud{}), EmptyInput);
}

TEST_CASE("asymmetric loss branch values", "[loss]") {
  const LossConfig cfg{0.05};
  CHECK(asymmetric_loss(-2.0, cfg) == 4.0);
  CHECK(asymmetric_loss(0.0, cfg) == 0.0);
  CHECK(asymmetric_loss(0.05, cfg) == Catch::Approx(0.00125).margin(1e-15));
  CHECK(asymmetric_loss(1.0, cfg) == Catch::Approx(0.04875).margin(1e-15));
}

TEST_CASE("asymmetric loss is C1 at the Huber transition", "[loss]") {
  const LossConfig cfg{0.05};
  const double d = cfg.delta;
  // value continuity at delta and at 0
  CHECK(std::abs(asymmetric_loss(std::nextafter(d, 0.0), cfg) -
                 asymmetric_loss(std::nextafter(d, 1.0), cfg)) < 1e-15);
  CHECK(std::abs(asymmetric_loss(-1e-12, cfg) - asymmetric_loss(1e-12, cfg)) < 1e-15);
  // one-sided difference quotients straddling delta
  const double h = 1e-9;
  const double left = (asymmetric_loss(d, cfg) - asymmetric_loss(d - h, cfg)) / h;
  const double right = (asymmetric_loss(d + h, cfg) - asymmetric_loss(d, cfg)) / h;
  CHECK(std::abs(left - right) < 1e-9);
  // analytic derivative agrees with both branches
  CHECK(asymmetric_loss_deriv(d, cfg) == Catch::Approx(d));
  CHECK(asymmetric_loss_deriv(d + 1e-12, cfg) == Catch::Approx(d));
}

TEST_CASE("below-surface penalty dominates above-surface", "[loss]") {
  const LossConfig cfg{0.05};
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.0500001, 25.0);
  for (int i = 0; i < 200; ++i) {
    const double d = u(rng);
    CHECK(asymmetric_loss(-d, cfg) >= asymmetric_loss(d, cfg));
  }
}

TEST_CASE("loss and gradient vanish when all points lie on the surface", "[loss]") {
  auto model = ElevationModelD::zeros({8, 8}, 50.0);
  model.biases.back()(0) = 0.75;
  PointCloud cloud;
  for (int i = 0; i < 10; ++i) cloud.points.push_back({i * 2.0, -i * 1.5, 0.75});
  const auto [loss, grad] = loss_and_grad(model, cloud, LossConfig{});
  CHECK(loss == 0.0);
  CHECK(grad.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gradient matches central finite differences", "[loss][oracle]") {
  std::mt19937 rng(2024);
  for (int rep = 0; rep < 10; ++rep) {
    const auto model = ElevationModelD::random_init({6, 5}, 20.0, 1000 + rep);
    const auto cloud = random_cloud(10, rng);
    const LossConfig cfg{0.05};
    const auto [loss, grad] = loss_and_grad(model, cloud, cfg);
    const auto fd = fd_gradient(model, cloud, cfg);
    const double scale = std::max(fd.cwiseAbs().maxCoeff(), 1e-12);
    const double rel = (grad - fd).cwiseAbs().maxCoeff() / scale;
    CHECK(rel < 1e-5);
  }
}

TEST_CASE("mean loss is invariant under point duplication", "[loss]") {
  std::mt19937 rng(11);
  const auto model = ElevationModelD::random_init({6}, 20.0, 5);
  const auto cloud = random_cloud(25, rng);
  PointCloud doubled = cloud;
  doubled.points.insert(doubled.points.end(), cloud.points.begin(),
                        cloud.points.end());
  const auto a = loss_and_grad(model, cloud, LossConfig{});
  const auto b = loss_and_grad(model, doubled, LossConfig{});
  CHECK(a.first == Catch::Approx(b.first).epsilon(1e-12));
  CHECK((a.second - b.second).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("adamw first step with unit gradient", "[optim]") {
  OptimConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.weight_decay = 0.0;
  Eigen::VectorXd params(1), grad(1);
  params << 1.0;
  grad << 1.0;
  AdamWState<double> state(1);
  adamw_step<double>(params, grad, state, cfg, cfg.learning_rate);
  // bias correction makes m_hat = v_hat = 1 on the first step
  CHECK(params(0) == Catch::Approx(0.99).margin(1e-6));
  CHECK(state.step == 1);
}

TEST_CASE("adamw leaves parameters alone on zero gradient", "[optim]") {
  OptimConfig cfg;
  cfg.weight_decay = 0.0;
  Eigen::VectorXd params(3), grad = Eigen::VectorXd::Zero(3);
  params << 1.0, -2.0, 0.5;
  AdamWState<double> state(3);
  adamw_step<double>(params, grad, state, cfg, cfg.learning_rate);
  CHECK(params(0) == 1.0);
  CHECK(params(1) == -2.0);
  CHECK(params(2) == 0.5);
}

TEST_CASE("adamw decoupled weight decay", "[optim]") {
  OptimConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.weight_decay = 0.1;
  Eigen::VectorXd params(1), grad = Eigen::VectorXd::Zero(1);
  params << 1.0;
  AdamWState<double> state(1);
  adamw_step<double>(params, grad, state, cfg, cfg.learning_rate);
  CHECK(params(0) == Catch::Approx(0.999).margin(1e-12));
}

TEST_CASE("adamw rejects mismatched shapes", "[optim]") {
  Eigen::VectorXd params(2), grad(3);
  params.setZero();
  grad.setZero();
  AdamWState<double> state(2);
  CHECK_THROWS_AS(adamw_step<double>(params, grad, state, OptimConfig{}, 0.01),
                  ShapeMismatch);
}

TEST_CASE("plateau scheduler keeps lr while improving", "[optim]") {
  OptimConfig cfg;
  cfg.learning_rate = 0.01;
  PlateauScheduler sched(cfg);
  double loss = 1.0;
  for (int i = 0; i < 500; ++i) {
    sched.observe(loss);
    loss *= 0.999;
  }
  CHECK(sched.lr() == 0.01);
}

TEST_CASE("plateau scheduler halves after patience non-improvements", "[optim]") {
  OptimConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.plateau_factor = 0.5;
  cfg.plateau_patience = 50;
  cfg.min_lr = 1e-4;
  PlateauScheduler sched(cfg);
  for (int call = 1; call <= 50; ++call) {
    sched.observe(1.0);
    CHECK(sched.lr() == 0.01);
  }
  sched.observe(1.0);  // 51st call
  CHECK(sched.lr() == 0.005);
}

TEST_CASE("plateau scheduler respects the min_lr floor", "[optim]") {
  OptimConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.min_lr = 0.01;
  cfg.plateau_patience = 2;
  PlateauScheduler sched(cfg);
  for (int i = 0; i < 20; ++i) sched.observe(5.0);
  CHECK(sched.lr() == 0.01);
}

TEST_CASE("ema early stop fires on the 151st constant update", "[optim]") {
  OptimConfig cfg;
  cfg.early_stop_patience = 150;
  EmaEarlyStop stop(cfg);
  int update = 0;
  for (; update < 1000; ) {
    ++update;
    if (stop.observe(2.5) == EmaEarlyStop::Decision::Stop) break;
  }
  CHECK(update == 151);
}

TEST_CASE("ema early stop never fires on strictly decreasing losses", "[optim]") {
  OptimConfig cfg;
  cfg.early_stop_patience = 150;
  EmaEarlyStop stop(cfg);
  double loss = 10.0;
  for (int i = 0; i < 5000; ++i) {
    REQUIRE(stop.observe(loss) == EmaEarlyStop::Decision::Continue);
    loss *= 0.9999;
  }
}

TEST_CASE("ema early stop with patience one", "[optim]") {
  OptimConfig cfg;
  cfg.early_stop_patience = 1;
  EmaEarlyStop stop(cfg);
  CHECK(stop.observe(1.0) == EmaEarlyStop::Decision::Continue);
  CHECK(stop.observe(2.0) == EmaEarlyStop::Decision::Stop);
}

TEST_CASE("fit_elevation rejects tiny clouds", "[fit]") {
  PointCloud cloud;
  for (int i = 0; i < 50; ++i) cloud.points.push_back({i * 1.0, 0.0, 0.0});
  const auto model = ElevationModel::random_init({8}, 50.0, 1);
  CHECK_THROWS_AS(fit_elevation(cloud, model, LossConfig{}, OptimConfig{}),
                  TooFewPoints);
}

TEST_CASE("fit_elevation recovers a small flat patch", "[fit]") {
  PointCloud cloud;
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int i = 0; i < 400; ++i) cloud.points.push_back({u(rng), u(rng), 0.2});

  OptimConfig cfg;
  cfg.seed = 9;
  auto [fitted, stats] = fit_elevation(
      cloud, ElevationModel::random_init({32, 32}, 50.0, 9), LossConfig{}, cfg);
  ElevationModel::Mat grid(25, 2);
  int at = 0;
  for (int gx = -2; gx <= 2; ++gx) {
    for (int gy = -2; gy <= 2; ++gy) {
      grid(at, 0) = gx * 4.0f;
      grid(at, 1) = gy * 4.0f;
      ++at;
    }
  }
  const auto h = predict(fitted, grid);
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    CHECK(std::abs(h(i) - 0.2) < 0.02);
  }
  CHECK(stats.iterations >= 1);
  CHECK(stats.final_loss < 1e-4);
}

TEST_CASE("fit_elevation is bit-deterministic given the seed", "[fit]") {
  PointCloud cloud;
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  for (int i = 0; i < 300; ++i) {
    const double x = u(rng), y = u(rng);
    cloud.points.push_back({x, y, 0.01 * x});
  }

  OptimConfig cfg;
  cfg.seed = 77;
  cfg.max_iters = 200;
  const auto init = ElevationModel::random_init({16, 16}, 50.0, 77);
  const auto a = fit_elevation(cloud, init, LossConfig{}, cfg);
  const auto b = fit_elevation(cloud, init, LossConfig{}, cfg);
  CHECK(a.second.iterations == b.second.iterations);
  CHECK(a.second.final_loss == b.second.final_loss);
  const auto pa = a.first.parameters();
  const auto pb = b.first.parameters();
  REQUIRE(pa.size() == pb.size());
  for (Eigen::Index i = 0; i < pa.size(); ++i) REQUIRE(pa(i) == pb(i));
}

TEST_CASE("fit subsampling cap keeps the fit deterministic", "[fit]") {
  PointCloud cloud;
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  for (int i = 0; i < 2000; ++i) cloud.points.push_back({u(rng), u(rng), 0.0});

  OptimConfig cfg;
  cfg.max_fit_points = 500;
  cfg.max_iters = 100;
  const auto init = ElevationModel::random_init({16}, 50.0, 3);
  const auto a = fit_elevation(cloud, init, LossConfig{}, cfg);
  const auto b = fit_elevation(cloud, init, LossConfig{}, cfg);
  const auto pa = a.first.parameters();
  const auto pb = b.first.parameters();
  for (Eigen::Index i = 0; i < pa.size(); ++i) REQUIRE(pa(i) == pb(i));
}
