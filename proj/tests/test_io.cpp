#include <doctest.h>

#include <fstream>

#include "dctstab/error.hpp"
#include "dctstab/flo_io.hpp"
#include "dctstab/frame_io.hpp"
#include "dctstab/pipeline.hpp"
#include "test_helpers.hpp"

using namespace dctstab;
namespace fs = std::filesystem;

namespace {

Frame quantized_frame(int h, int w, int channels, int levels, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> q(0, levels);
  Frame f(h, w, channels);
  for (Image& c : f.channels)
    for (float& v : c.data()) v = static_cast<float>(q(rng)) / levels;
  return f;
}

void check_same(const Frame& a, const Frame& b) {
  REQUIRE(a.channel_count() == b.channel_count());
  for (int c = 0; c < a.channel_count(); ++c) CHECK(a.channels[c] == b.channels[c]);
}

}  // namespace

TEST_CASE("frame round trips") {
  const fs::path dir = helpers::scratch_dir("frames");
  for (FrameFormat fmt : {FrameFormat::Png, FrameFormat::Pnm})
    for (int depth : {8, 16})
      for (int channels : {1, 3}) {
        const Frame f = quantized_frame(13, 17, channels, depth == 8 ? 255 : 65535, depth * 10 + channels);
        const std::string ext = fmt == FrameFormat::Png ? ".png" : (channels == 1 ? ".pgm" : ".ppm");
        const fs::path p = dir / ("f" + std::to_string(depth) + "_" + std::to_string(channels) + ext);
        write_frame(p, f, {fmt, depth});
        FrameEncoding enc;
        const Frame g = read_frame(p, &enc);
        CHECK(enc.format == fmt);
        CHECK(enc.bit_depth == depth);
        check_same(f, g);
        for (auto v : g.valid.data()) CHECK(v == 1);
      }
}

TEST_CASE("frame directories keep order and names") {
  const fs::path dir = helpers::scratch_dir("dir");
  const FrameEncoding enc{FrameFormat::Pnm, 8};
  FrameSequence frames;
  for (int i = 0; i < 3; ++i) frames.push_back(quantized_frame(8, 9, 1, 255, i));
  write_frame_dir(dir, frames, {"b.pgm", "a.pgm", "c.pgm"}, enc);
  const FrameDirectory d = read_frame_dir(dir);
  REQUIRE(d.names == std::vector<std::string>{"a.pgm", "b.pgm", "c.pgm"});
  check_same(d.frames[0], frames[1]);
  check_same(d.frames[1], frames[0]);
  CHECK(numbered_names(2, {FrameFormat::Png, 8})[1] == "frame_00001.png");
}

TEST_CASE("frame directory errors") {
  CHECK_THROWS_AS(read_frame_dir("/nonexistent/dctstab"), InputError);
  const fs::path dir = helpers::scratch_dir("mismatch");
  write_frame(dir / "a.pgm", quantized_frame(8, 9, 1, 255, 1), {FrameFormat::Pnm, 8});
  write_frame(dir / "b.pgm", quantized_frame(9, 9, 1, 255, 1), {FrameFormat::Pnm, 8});
  try {
    read_frame_dir(dir);
    FAIL("expected an exception");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("b.pgm") != std::string::npos);
  }
  std::ofstream(dir / "c.png") << "not a png";
  CHECK_THROWS_AS(read_frame(dir / "c.png"), InputError);
  CHECK_THROWS_AS(read_frame(dir / "missing.png"), InputError);
}

TEST_CASE(".flo round trip is bit exact") {
  const fs::path dir = helpers::scratch_dir("flo");
  FlowField f(5, 7);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> u(-20.0f, 20.0f);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 7; ++x) {
      f.u(y, x) = u(rng);
      f.v(y, x) = u(rng);
    }
  f.valid(2, 3) = 0;
  write_flo(dir / "a.flo", f);
  CHECK(fs::file_size(dir / "a.flo") == 12u + 5u * 7u * 8u);
  const FlowField g = read_flo(dir / "a.flo");
  CHECK(g.valid(2, 3) == 0);
  CHECK(g.valid_count() == 34u);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 7; ++x)
      if (f.valid(y, x)) {
        CHECK(g.u(y, x) == f.u(y, x));
        CHECK(g.v(y, x) == f.v(y, x));
      }
  std::ifstream in(dir / "a.flo", std::ios::binary);
  char magic[4];
  in.read(magic, 4);
  CHECK(std::string(magic, 4) == "PIEH");
  std::ofstream(dir / "bad.flo", std::ios::binary) << "XXXX";
  CHECK_THROWS_AS(read_flo(dir / "bad.flo"), InputError);
}

TEST_CASE("config file parsing") {
  const fs::path dir = helpers::scratch_dir("config");
  std::ofstream(dir / "c.txt") << "# comment\ncrop_limit = 0.7\n  window_radius=4  # trailing\naffine_only = true\n\n";
  PipelineConfig c;
  c.apply_config_file(dir / "c.txt");
  CHECK(c.crop_limit == 0.7);
  CHECK(c.window_radius == 4);
  CHECK(c.affine_only);
  PipelineConfig round;
  std::ofstream(dir / "all.txt") << c.to_key_values();
  round.apply_config_file(dir / "all.txt");
  CHECK(round.to_key_values() == c.to_key_values());
  CHECK_THROWS_AS(c.set("nope", "1"), InputError);
  CHECK_THROWS_AS(c.set("cutoff", "eight"), InputError);
  std::ofstream(dir / "bad.txt") << "crop_limit 0.7\n";
  CHECK_THROWS_AS(c.apply_config_file(dir / "bad.txt"), InputError);
  c.cutoff = 9;
  CHECK_THROWS_AS(c.validate(), InputError);
}

TEST_CASE("pyramid schedule from the config") {
  PipelineConfig c;
  CHECK(c.pyramid().cutoff_schedule == std::vector<int>{2, 4, 6, 8});
  c.cutoff = 4;
  CHECK(c.pyramid().cutoff_schedule == std::vector<int>{1, 2, 3, 4});
}
