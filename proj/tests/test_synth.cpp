#include <doctest.h>

#include "dctstab/error.hpp"
#include "dctstab/path_smooth.hpp"
#include "dctstab/synth.hpp"
#include "oracles.hpp"

using namespace dctstab;

namespace {

SceneSpec small_scene(int frames) {
  SceneSpec s;
  s.height = 64;
  s.width = 80;
  s.frames = frames;
  s.margin = 24;
  return s;
}

}  // namespace

TEST_CASE("same seed gives identical paths and frames") {
  const CameraPath a = make_jitter_path(20, 1.0, default_smooth_amplitude(), {0.01, 0.01, 3, 3}, 7);
  const CameraPath b = make_jitter_path(20, 1.0, default_smooth_amplitude(), {0.01, 0.01, 3, 3}, 7);
  const CameraPath c = make_jitter_path(20, 1.0, default_smooth_amplitude(), {0.01, 0.01, 3, 3}, 8);
  CHECK(a.poses == b.poses);
  CHECK(a.poses != c.poses);
  SceneSpec s = small_scene(20);
  s.margin = 40;
  const SyntheticVideo va = generate(s, a), vb = generate(s, b);
  for (size_t i = 0; i < va.frames.size(); ++i) CHECK(va.frames[i].channels[0] == vb.frames[i].channels[0]);
}

TEST_CASE("smooth path starts at the origin and jitter scales linearly") {
  const CameraPath a = make_jitter_path(30, 1.0, default_smooth_amplitude(), {0.01, 0.02, 3, 4}, 5);
  const CameraPath b = make_jitter_path(30, 1.0, default_smooth_amplitude(), {0.02, 0.04, 6, 8}, 5);
  for (int k = 0; k < 4; ++k) CHECK(a.smooth[0][k] == doctest::Approx(0.0).scale(1));
  for (int i = 0; i < 30; ++i)
    for (int k = 0; k < 4; ++k) {
      CHECK(b.jitter[i][k] == doctest::Approx(2.0 * a.jitter[i][k]).epsilon(1e-12));
      CHECK(std::abs(a.jitter[i][k]) <= a.jitter_amplitude[k]);
      CHECK(a.poses[i][k] == doctest::Approx(a.smooth[i][k] + a.jitter[i][k]).epsilon(1e-12));
    }
}

TEST_CASE("zero path gives identical frames and zero flows") {
  const SyntheticVideo v = generate(small_scene(4), CameraPath::from_poses(std::vector<SimilarityParams>(4)));
  for (const Frame& f : v.frames) CHECK(f.channels[0] == v.frames[0].channels[0]);
  for (const FlowField& f : v.flows)
    for (double u : f.u.data()) CHECK(u == 0.0);
}

TEST_CASE("translating camera: flow sign follows the backward-warp convention") {
  const SyntheticVideo v = generate(small_scene(3), CameraPath::from_poses({{0, 0, 0, 0}, {0, 0, 1, 0}, {0, 0, 2, 0}}));
  for (const FlowField& f : v.flows) {
    CHECK(f.u(10, 10) == doctest::Approx(1.0));
    CHECK(f.v(10, 10) == doctest::Approx(0.0).scale(1));
  }
  // frame_1(p) = frame_0(p + flow(p)) exactly for integer shifts.
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x + 1 < 80; ++x) CHECK(v.frames[1].channels[0](y, x) == v.frames[0].channels[0](y, x + 1));
  CHECK(v.alphas[0].tx == doctest::Approx(1.0));
}

TEST_CASE("rendered frames follow the analytic warp") {
  const SceneSpec s = small_scene(2);
  const SimilarityParams alpha{0.03, 0.02, 2.5, -1.5};
  const SyntheticVideo v = generate(s, CameraPath::from_poses({{}, alpha}));
  const FlowField& f = v.flows[0];
  double se = 0.0;
  long n = 0;
  for (int y = 8; y < 56; ++y)
    for (int x = 8; x < 72; ++x) {
      const double d = sample_bilinear(v.frames[0].channels[0], x + f.u(y, x), y + f.v(y, x)) - v.frames[1].channels[0](y, x);
      se += d * d;
      ++n;
    }
  CHECK(std::sqrt(se / n) < 1e-2);
}

TEST_CASE("alternating jitter is recovered and flattened") {
  std::vector<SimilarityParams> poses;
  for (int i = 0; i < 20; ++i) poses.push_back({0, 0, i % 2 ? 2.0 : -2.0, 0});
  SceneSpec s = small_scene(20);
  const SyntheticVideo v = generate(s, CameraPath::from_poses(poses), false);
  for (size_t i = 0; i < v.alphas.size(); ++i) CHECK(v.alphas[i].tx == doctest::Approx(i % 2 ? -4.0 : 4.0));
  const std::vector<double> a = component(v.alphas, 2);
  const std::vector<double> b = solve_box_qp(a, 4.5, {});
  const std::vector<double> line = oracle::ls_line(a);
  for (size_t i = 0; i < b.size(); ++i) CHECK(b[i] == doctest::Approx(line[i]).epsilon(1e-3).scale(1));
  CHECK(std::abs(line.back() - line.front()) < 0.5);
}

TEST_CASE("canvas overflow names the required margin") {
  SceneSpec s = small_scene(2);
  s.margin = 4;
  try {
    generate(s, CameraPath::from_poses({{}, {0, 0, 10.0, 0}}));
    FAIL("expected an exception");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("need at least 10") != std::string::npos);
  }
}

TEST_CASE("foreground moves at its velocity with matching flow") {
  SceneSpec s = small_scene(3);
  s.foreground = ForegroundSpec{};
  const SyntheticVideo v = generate(s, CameraPath::from_poses(std::vector<SimilarityParams>(3)));
  REQUIRE(v.foreground.size() == 3);
  CHECK(v.foreground[0].area() == doctest::Approx(0.25 * 64 * 80));
  CHECK(v.foreground[1].left - v.foreground[0].left == doctest::Approx(1.5));
  CHECK(v.foreground[1].top - v.foreground[0].top == doctest::Approx(-1.0));
  CHECK(v.flows[0].u(32, 40) == doctest::Approx(-1.5));
  CHECK(v.flows[0].v(32, 40) == doctest::Approx(1.0));
  CHECK(v.flows[0].u(2, 2) == 0.0);
  s.foreground->area_fraction = 0.7;
  CHECK_THROWS_AS(generate(s, CameraPath::from_poses(std::vector<SimilarityParams>(3))), InputError);
}

TEST_CASE("texture is band-limited and in range") {
  const Image t = value_noise(128, 128, 4, 1);
  const auto [lo, hi] = std::minmax_element(t.data().begin(), t.data().end());
  CHECK(*lo == doctest::Approx(0.05f));
  CHECK(*hi == doctest::Approx(0.95f));
  const Image b = gaussian_blur(t, 1.0);
  double se = 0.0;
  for (size_t i = 0; i < t.size(); ++i) se += (t.data()[i] - b.data()[i]) * (t.data()[i] - b.data()[i]);
  CHECK(std::sqrt(se / t.size()) < 0.01);
}

TEST_CASE("invalid path arguments") {
  CHECK_THROWS_AS(make_jitter_path(1, 1.0, {}, {}, 1), InputError);
  CHECK_THROWS_AS(make_jitter_path(10, 3.0, {}, {}, 1), InputError);
  CHECK_THROWS_AS(make_jitter_path(10, 1.0, {}, {-1, 0, 0, 0}, 1), InputError);
  CHECK_THROWS_AS(generate(small_scene(3), CameraPath::from_poses(std::vector<SimilarityParams>(2))), InputError);
}
