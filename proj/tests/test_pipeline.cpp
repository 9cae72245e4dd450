#include <doctest.h>

#include "dctstab/error.hpp"
#include "dctstab/pipeline.hpp"
#include "dctstab/synth.hpp"
#include "dctstab/warp_crop.hpp"

using namespace dctstab;

namespace {

SyntheticVideo jitter_video(int frames, uint64_t seed) {
  SceneSpec scene;
  scene.seed = seed;
  scene.height = 144;
  scene.width = 192;
  scene.frames = frames;
  scene.margin = 64;
  return generate(scene, make_jitter_path(frames, 1.0, {0.02, 0.02, 8, 6}, {0.01, 0.01, 5, 5}, seed), false);
}

}  // namespace

TEST_CASE("static video passes through unchanged") {
  SceneSpec scene;
  scene.height = 128;
  scene.width = 128;
  scene.frames = 5;
  const SyntheticVideo v = generate(scene, CameraPath::from_poses(std::vector<SimilarityParams>(5)), false);
  PipelineConfig cfg;
  cfg.window_radius = 2;
  const PipelineResult r = stabilize(v.frames, cfg);
  CHECK(r.crop_ratio == 1.0);
  for (const auto& g : r.path.gamma)
    for (int k = 0; k < 4; ++k) CHECK(g[k] == 0.0);
  for (size_t i = 0; i < v.frames.size(); ++i) CHECK(r.frames[i].channels[0] == v.frames[i].channels[0]);
}

TEST_CASE("affine-only run honours the crop limit") {
  const SyntheticVideo v = jitter_video(16, 4);
  PipelineConfig cfg;
  cfg.affine_only = true;
  const PipelineResult r = stabilize(v.frames, cfg);
  CHECK(r.path.min_crop >= 0.79);
  CHECK(r.residual.empty());
  CHECK(r.crop_ratio == r.stage1_crop);
  CHECK(r.frames.size() == v.frames.size());
  CHECK(r.frames[0].height() == 144);
  // The stabilized similarity path equals beta.
  for (size_t i = 0; i < r.alpha.size(); ++i) CHECK(std::abs(r.alpha[i].tx - v.alphas[i].tx) < 0.3);
}

TEST_CASE("full run reports the product of both crops and is deterministic") {
  const SyntheticVideo v = jitter_video(8, 6);
  PipelineConfig cfg;
  cfg.window_radius = 2;
  const PipelineResult a = stabilize(v.frames, cfg);
  const PipelineResult b = stabilize(v.frames, cfg);
  CHECK(a.residual.size() == 8);
  CHECK(a.crop_ratio == doctest::Approx(a.stage1_crop * a.stage2_crop));
  CHECK(a.crop_ratio <= a.stage1_crop);
  for (size_t i = 0; i < a.frames.size(); ++i) CHECK(a.frames[i].channels[0] == b.frames[i].channels[0]);
}

TEST_CASE("pipeline input validation") {
  FrameSequence frames = {Frame(Image(128, 128, 0.5f)), Frame(Image(128, 130, 0.5f))};
  CHECK_THROWS_AS(stabilize(frames, PipelineConfig{}), InputError);
  CHECK_THROWS_AS(stabilize({frames[0]}, PipelineConfig{}), InputError);
  PipelineConfig bad;
  bad.crop_limit = 0.0;
  CHECK_THROWS_AS(stabilize({frames[0], frames[0]}, bad), InputError);
}
