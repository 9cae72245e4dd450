#include <doctest.h>

#include <chrono>
#include <random>

#include "dctstab/error.hpp"
#include "dctstab/robust_fit.hpp"
#include "oracles.hpp"

using namespace dctstab;

namespace {

/// Background translation (bg, 0) with a contiguous rows x cols block offset by `jump`.
FlowField block_outlier_flow(double bg, double jump, int rows, int cols) {
  FlowField f(64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) f.u(y, x) = (y >= 10 && y < 10 + rows && x >= 12 && x < 12 + cols) ? bg + jump : bg;
  return f;
}

}  // namespace

TEST_CASE("loss reduces to known closed forms") {
  for (double x : {0.0, 0.3, 1.0, 2.5, 17.0}) {
    const double c = 0.7;
    const double z = x / c;
    // shape 1: pseudo-Huber
    CHECK(barron_loss(x, {1.0, c, false}) == doctest::Approx(std::sqrt(z * z + 1.0) - 1.0).epsilon(1e-12));
    // shape -2: Geman-McClure
    CHECK(barron_loss(x, {-2.0, c, false}) == doctest::Approx(2.0 * z * z / (z * z + 4.0)).epsilon(1e-12));
    CHECK(barron_loss(x, {1.0, c, true}) == doctest::Approx(0.5 * z * z));
  }
}

TEST_CASE("loss is bounded for negative shape") {
  const RobustLossParams p = RobustLossParams::flow_default();
  const double bound = std::abs(p.shape - 2.0) / -p.shape;
  CHECK(barron_loss(1e6, p) < bound);
  CHECK(barron_loss(1e6, p) > barron_loss(1e3, p));
}

TEST_CASE("weight is the loss derivative over x") {
  const RobustLossParams p = RobustLossParams::flow_default();
  for (double x : {0.05, 0.4, 1.3, 9.0}) {
    const double h = 1e-6;
    const double d = (barron_loss(x + h, p) - barron_loss(x - h, p)) / (2 * h);
    CHECK(barron_weight(x, p) == doctest::Approx(d / x).epsilon(1e-6));
    const auto [l, w] = barron_loss_and_weight(x, p);
    CHECK(l == doctest::Approx(barron_loss(x, p)).epsilon(1e-14));
    CHECK(w == doctest::Approx(barron_weight(x, p)).epsilon(1e-14));
  }
  CHECK(barron_weight(0.0, p) == doctest::Approx(1.0 / (p.scale * p.scale)));
}

TEST_CASE("invalid loss parameters are rejected") {
  CHECK_THROWS_AS(RobustLossParams({2.0, 0.5, false}).validate(), InputError);
  CHECK_THROWS_AS(RobustLossParams({-0.1, 0.0, false}).validate(), InputError);
  CHECK_THROWS_AS(RobustLossParams({0.0, 1.0, false}).validate(), InputError);
}

TEST_CASE("robust projection ignores a contiguous outlier block") {
  // 10% contiguous block: 10 x 41 = 410 of 4096 grid samples.
  const FlowField f = block_outlier_flow(2.0, 28.0, 10, 41);
  const GridSpec grid = GridSpec::for_image(64, 64);
  const DctCoeffs plain = project(f, 8, grid);
  const double expected_plain = 2.0 + 28.0 * 410.0 / 4096.0;
  CHECK(plain.mean_translation().x() == doctest::Approx(expected_plain).epsilon(1e-9));
  CHECK(plain.mean_translation().x() - 2.0 > 2.8);

  const auto [robust, report] = project_robust(f, 8, grid, RobustLossParams::flow_default());
  CHECK(std::abs(robust.mean_translation().x() - 2.0) < 0.1);
  CHECK(std::abs(robust.mean_translation().y()) < 0.1);
  CHECK(report.converged);
  for (size_t i = 1; i < report.objective_trace.size(); ++i)
    CHECK(report.objective_trace[i] <= report.objective_trace[i - 1] * (1 + 1e-12));
}

TEST_CASE("robust projection with the outlier block runs fast") {
  const FlowField f = block_outlier_flow(2.0, 28.0, 10, 41);
  const auto t0 = std::chrono::steady_clock::now();
  project_robust(f, 8, GridSpec::for_image(64, 64), RobustLossParams::flow_default());
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(s < 0.1);
}

TEST_CASE("scattered 10% outliers leave the translation within 0.1 px") {
  FlowField f(64, 64);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) f.u(y, x) = uni(rng) < 0.1 ? 30.0 : 2.0;
  const DctCoeffs plain = project(f, 8, GridSpec::for_image(64, 64));
  CHECK(plain.mean_translation().x() > 4.0);
  const auto [robust, report] = project_robust(f, 8, GridSpec::for_image(64, 64), RobustLossParams::flow_default());
  CHECK(std::abs(robust.mean_translation().x() - 2.0) < 0.1);
}

TEST_CASE("DC-only robust fit equals scalar IRLS location") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n(0.0, 0.3);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  FlowField f(16, 16);
  std::vector<double> xs;
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      f.u(y, x) = 1.0 + n(rng) + (uni(rng) < 0.15 ? 12.0 : 0.0);
      xs.push_back(f.u(y, x));
    }
  const RobustLossParams p = RobustLossParams::flow_default();
  const auto [c, report] = project_robust(f, 0, GridSpec{16, 16, 16, 16}, p);
  CHECK(c.mean_translation().x() == doctest::Approx(oracle::robust_mean(xs, p.shape, p.scale)).epsilon(1e-5));
}

TEST_CASE("quadratic loss reproduces the plain projection") {
  const FlowField f = block_outlier_flow(-1.0, 5.0, 20, 20);
  const GridSpec grid = GridSpec::for_image(64, 64);
  RobustLossParams p = RobustLossParams::flow_default();
  p.quadratic = true;
  const auto [c, report] = project_robust(f, 6, grid, p);
  const DctCoeffs plain = project(f, 6, grid);
  CHECK((c.coeff_x - plain.coeff_x).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("outlier weights are small") {
  const FlowField f = block_outlier_flow(2.0, 28.0, 10, 41);
  const auto [c, report] = project_robust(f, 8, GridSpec::for_image(64, 64), RobustLossParams::flow_default());
  double in = 0.0, out = 0.0;
  int n_in = 0, n_out = 0;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      const bool block = y >= 10 && y < 20 && x >= 12 && x < 53;
      (block ? in : out) += report.weights(y, x);
      ++(block ? n_in : n_out);
    }
  CHECK(in / n_in < 0.01 * (out / n_out));
}
