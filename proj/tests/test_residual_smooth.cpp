#include <doctest.h>

#include <limits>

#include "dctstab/error.hpp"
#include "dctstab/metrics.hpp"
#include "dctstab/residual_smooth.hpp"
#include "dctstab/synth.hpp"

using namespace dctstab;

namespace {

const GridSpec kGrid = GridSpec::for_image(64, 64);

GridLuma flat_grid(float value) {
  return {Image(64, 64, value), Mask(64, 64, 1)};
}

DctCoeffs single(int fy, int fx, double value) {
  DctCoeffs c(8, kGrid);
  c.coeff_x(fy, fx) = value;
  return c;
}

}  // namespace

TEST_CASE("radius zero returns the center entry") {
  BilateralConfig cfg;
  cfg.window_radius = 0;
  const std::map<int, DctCoeffs> win = {{0, single(1, 2, 3.0)}};
  const DctCoeffs out = bilateral_smooth_center(win, {flat_grid(0.5f)}, 0, cfg);
  CHECK(out.coeff_x(1, 2) == 3.0);
}

TEST_CASE("equal window entries are a fixpoint") {
  BilateralConfig cfg;
  cfg.window_radius = 2;
  cfg.skip_dc = false;
  const DctCoeffs c = single(2, 1, 0.7) + single(0, 0, 4.0);
  std::map<int, DctCoeffs> win;
  std::vector<GridLuma> frames;
  for (int j = 0; j < 5; ++j) {
    win[j] = c;
    frames.push_back(flat_grid(0.3f));
  }
  const DctCoeffs out = bilateral_smooth_center(win, frames, 2, cfg);
  CHECK((out.coeff_x - c.coeff_x).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("hand-computed weights on constant frames") {
  BilateralConfig cfg;
  cfg.window_radius = 1;
  const std::map<int, DctCoeffs> win = {{0, single(1, 1, 1.0)}, {1, DctCoeffs(8, kGrid)}, {2, single(1, 1, -1.0)}};
  const std::vector<GridLuma> frames = {flat_grid(0.4f), flat_grid(0.4f), flat_grid(0.4f)};
  std::map<int, double> w;
  const DctCoeffs out = bilateral_smooth_center(win, frames, 1, cfg, &w);
  CHECK(w.at(1) == 1.0);
  CHECK(w.at(0) == doctest::Approx(std::exp(-4.5)).epsilon(1e-12));
  CHECK(w.at(0) == doctest::Approx(0.011109).epsilon(1e-4));
  CHECK(w.at(2) == doctest::Approx(w.at(0)).epsilon(1e-12));
  CHECK(std::abs(out.coeff_x(1, 1)) < 1e-15);
}

TEST_CASE("range term penalises mismatched intensities") {
  BilateralConfig cfg;
  cfg.window_radius = 3;
  cfg.sigma_p = 0.1;
  const double same = bilateral_weight(flat_grid(0.5f), flat_grid(0.5f), DctCoeffs(8, kGrid), 1, cfg);
  const double diff = bilateral_weight(flat_grid(0.5f), flat_grid(0.6f), DctCoeffs(8, kGrid), 1, cfg);
  CHECK(diff == doctest::Approx(same * std::exp(-0.01 / (2 * 0.01))).epsilon(1e-5));
}

TEST_CASE("infinite range scale reduces to a temporal Gaussian average") {
  BilateralConfig cfg;
  cfg.window_radius = 4;
  cfg.sigma_p = std::numeric_limits<double>::infinity();
  cfg.skip_dc = false;
  std::map<int, DctCoeffs> win;
  std::vector<GridLuma> frames;
  const std::vector<double> values = {0.3, -1.0, 2.0, 0.5, 0.0, 1.5, -0.7, 0.2, 0.9};
  for (int j = 0; j < 9; ++j) {
    win[j] = j == 4 ? DctCoeffs(8, kGrid) : single(3, 2, values[j]);
    frames.push_back(flat_grid(0.1f * j));
  }
  double num = 0.0, den = 0.0;
  const double st = 4.0 / 3.0;
  for (int j = 0; j < 9; ++j) {
    const double w = std::exp(-(j - 4) * (j - 4) / (2 * st * st));
    num += w * (j == 4 ? 0.0 : values[j]);
    den += w;
  }
  const DctCoeffs out = bilateral_smooth_center(win, frames, 4, cfg);
  CHECK(out.coeff_x(3, 2) == doctest::Approx(num / den).epsilon(1e-9));
}

TEST_CASE("skip_dc keeps the center DC") {
  BilateralConfig cfg;
  cfg.window_radius = 1;
  const std::map<int, DctCoeffs> win = {{0, single(0, 0, 10.0)}, {1, DctCoeffs(8, kGrid)}, {2, single(0, 0, 10.0)}};
  const std::vector<GridLuma> frames = {flat_grid(0.4f), flat_grid(0.4f), flat_grid(0.4f)};
  CHECK(bilateral_smooth_center(win, frames, 1, cfg).coeff_x(0, 0) == 0.0);
  cfg.skip_dc = false;
  CHECK(bilateral_smooth_center(win, frames, 1, cfg).coeff_x(0, 0) > 0.1);
}

TEST_CASE("window must contain the center") {
  BilateralConfig cfg;
  CHECK_THROWS_AS(bilateral_smooth_center({{1, DctCoeffs(8, kGrid)}}, {flat_grid(0.f), flat_grid(0.f)}, 0, cfg), InputError);
}

TEST_CASE("residual application") {
  const int h = 40, w = 60;
  Frame f(h, w, 1, 0.5f);
  for (int x = 0; x < w; ++x)
    for (int y = 0; y < h; ++y) f.channels[0](y, x) = 0.01f * x;
  const GridSpec grid = GridSpec::for_image(h, w);
  const FrameSequence frames = {f, f, f};

  const UniformCropResult same = apply_residual(frames, {DctCoeffs(8, grid), DctCoeffs(8, grid), DctCoeffs(8, grid)});
  CHECK(same.ratio == 1.0);
  CHECK(same.frames[1].channels[0] == f.channels[0]);

  DctCoeffs shift(8, grid);
  shift.coeff_x(0, 0) = 5.0 * std::sqrt(double(grid.grid_h) * grid.grid_w);
  const UniformCropResult moved = apply_residual(frames, {shift, shift, shift});
  CHECK(moved.rect.width == doctest::Approx(w - 5.0).epsilon(1e-9));
  CHECK(moved.rect.left == 0.0);

  const UniformCropResult one = apply_residual(frames, {DctCoeffs(8, grid), shift, DctCoeffs(8, grid)});
  CHECK(one.rect.width == doctest::Approx(w - 5.0).epsilon(1e-9));
  CHECK_THROWS_AS(apply_residual(frames, {shift}), InputError);
}

TEST_CASE("static video gives zero residuals") {
  SceneSpec scene;
  scene.height = 128;
  scene.width = 160;
  scene.frames = 4;
  const SyntheticVideo v = generate(scene, CameraPath::from_poses(std::vector<SimilarityParams>(4)));
  BilateralConfig cfg;
  cfg.window_radius = 2;
  const SmoothedSequence s = smooth_sequence(v.frames, PyramidSpec{}, RobustLossParams::photometric_default(), cfg);
  for (const auto& t : s.thetas) CHECK(std::sqrt(t.squared_norm()) < 1e-6);
  CHECK(s.failed_pairs.empty());
  CHECK_THROWS_AS(smooth_sequence({v.frames[0]}, PyramidSpec{}, RobustLossParams::photometric_default(), cfg), InputError);
}

TEST_CASE("residual smoothing reduces rotational jitter") {
  SceneSpec scene;
  scene.height = 128;
  scene.width = 160;
  scene.frames = 9;
  scene.margin = 40;
  const CameraPath path = make_jitter_path(9, 0.0, {}, {0.02, 0.0, 0.0, 0.0}, 7);
  const SyntheticVideo v = generate(scene, path);
  BilateralConfig cfg;
  cfg.window_radius = 4;
  const PyramidSpec spec;
  const SmoothedSequence s = smooth_sequence(v.frames, spec, RobustLossParams::photometric_default(), cfg);
  const UniformCropResult out = apply_residual(v.frames, s.thetas);
  MetricsConfig mc;
  const double improvement = agmdr(v.frames, out.frames, mc);
  MESSAGE("rotational jitter AGMDR " << improvement);
  CHECK(improvement > 0.2);
}
