#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dctstab/flo_io.hpp"
#include "dctstab/frame_io.hpp"
#include "test_helpers.hpp"

using namespace dctstab;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(DCTSTAB_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string capture_stderr(const std::string& args, const fs::path& dir) {
  const fs::path log = dir / "stderr.txt";
  const int rc = std::system((std::string(DCTSTAB_CLI) + " " + args + " > /dev/null 2> " + log.string()).c_str());
  (void)rc;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

const std::string kSmall = " --frames 10 --height 128 --width 160 --margin 64 ";

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run("") == 2);
  CHECK(run("stabilize /nonexistent/in /tmp/out") == 2);
  CHECK(run("nonsense") == 2);
  CHECK(run("stabilize a b --crop-limit abc") == 2);
}

TEST_CASE("synth is bit-identical across runs and records ground truth") {
  const fs::path dir = helpers::scratch_dir("cli_synth");
  REQUIRE(run("synth " + (dir / "a").string() + kSmall + "--seed 3") == 0);
  REQUIRE(run("synth " + (dir / "b").string() + kSmall + "--seed 3") == 0);
  for (const auto& e : fs::directory_iterator(dir / "a"))
    CHECK(slurp(e.path()) == slurp(dir / "b" / e.path().filename()));
  const json gt = load(dir / "a" / "ground_truth.json");
  CHECK(gt["alphas"].size() == 9);
  CHECK(gt.contains("convention"));
}

TEST_CASE("foreground sidecar records the mask") {
  const fs::path dir = helpers::scratch_dir("cli_fg");
  REQUIRE(run("synth " + dir.string() + kSmall + "--foreground 0.25") == 0);
  const json gt = load(dir / "ground_truth.json");
  REQUIRE(gt.contains("foreground"));
  CHECK(gt["foreground"]["mask_rects"].size() == 10);
  CHECK(gt["foreground"].contains("mask_rule"));
}

TEST_CASE("flow of identical frames is zero") {
  const fs::path dir = helpers::scratch_dir("cli_flow");
  REQUIRE(run("synth " + (dir / "v").string() + kSmall + "--zero-jitter --smooth-amp 0 0 0 0") == 0);
  const std::string f0 = (dir / "v" / "frame_00000.png").string();
  REQUIRE(run("flow " + f0 + " " + f0 + " " + (dir / "z.flo").string()) == 0);
  const FlowField f = read_flo(dir / "z.flo");
  for (double u : f.u.data()) CHECK(std::abs(u) < 1e-6);
  for (double v : f.v.data()) CHECK(std::abs(v) < 1e-6);
  CHECK(fs::exists(dir / "z.json"));

  FlowField ext(128, 160);
  for (auto& u : ext.u.data()) u = 2.5;
  write_flo(dir / "ext.flo", ext);
  REQUIRE(run("flow --from-flo " + (dir / "ext.flo").string() + " " + (dir / "fit.flo").string()) == 0);
  const FlowField fit = read_flo(dir / "fit.flo");
  CHECK(fit.u(60, 70) == doctest::Approx(2.5).epsilon(1e-5));
}

TEST_CASE("metrics of a video against itself are at their fixpoints") {
  const fs::path dir = helpers::scratch_dir("cli_metrics");
  REQUIRE(run("synth " + (dir / "v").string() + kSmall) == 0);
  REQUIRE(run("metrics " + (dir / "v").string() + " " + (dir / "v").string() + " " + (dir / "m.json").string()) == 0);
  const json m = load(dir / "m.json");
  CHECK(m["agmdr"].get<double>() == 0.0);
  CHECK(m["distortion"].get<double>() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(m["paired_ssim"].get<double>() == doctest::Approx(1.0));
  CHECK(m["paired_psnr_db"].get<double>() == 100.0);
  CHECK(m["crop_ratio"].get<double>() == 1.0);

  fs::copy(dir / "v", dir / "short");
  fs::remove(dir / "short" / "frame_00004.png");
  const std::string err = capture_stderr("metrics " + (dir / "v").string() + " " + (dir / "short").string() + " " +
                                             (dir / "m2.json").string(), dir);
  CHECK(err.find("frame_00004.png") != std::string::npos);
  CHECK(run("metrics " + (dir / "v").string() + " " + (dir / "short").string() + " " + (dir / "m2.json").string()) == 2);
}

TEST_CASE("stabilizing a static video changes nothing") {
  const fs::path dir = helpers::scratch_dir("cli_static");
  REQUIRE(run("synth " + (dir / "in").string() + kSmall + "--zero-jitter --smooth-amp 0 0 0 0 --format pgm") == 0);
  REQUIRE(run("stabilize " + (dir / "in").string() + " " + (dir / "out").string() + " --window-radius 2") == 0);
  for (int i = 0; i < 10; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%05d.pgm", i);
    CHECK(slurp(dir / "in" / name) == slurp(dir / "out" / name));
  }
  std::ifstream csv(dir / "out" / "paths.csv");
  std::string header, line;
  std::getline(csv, header);
  CHECK(header.find("beta_tx") != std::string::npos);
  while (std::getline(csv, line)) {
    std::stringstream ss(line);
    std::vector<double> v;
    std::string cell;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    REQUIRE(v.size() == 9);
    for (int k = 0; k < 4; ++k) CHECK(v[1 + k] == v[5 + k]);
  }
  const json rep = load(dir / "out" / "report.json");
  CHECK(rep["crop_ratio"].get<double>() == 1.0);
  CHECK(fs::exists(dir / "out" / "config.txt"));
}

TEST_CASE("stabilize outputs are reproducible and flags override the config file") {
  const fs::path dir = helpers::scratch_dir("cli_repro");
  REQUIRE(run("synth " + (dir / "in").string() + kSmall + "--seed 9") == 0);
  std::ofstream(dir / "cfg.txt") << "window_radius = 6\ncrop_limit = 0.9\n";
  const std::string common = " --config " + (dir / "cfg.txt").string() + " --crop-limit 0.85 --affine-only";
  REQUIRE(run("stabilize " + (dir / "in").string() + " " + (dir / "o1").string() + common) == 0);
  REQUIRE(run("stabilize " + (dir / "in").string() + " " + (dir / "o2").string() + common) == 0);
  CHECK(slurp(dir / "o1" / "frame_00003.png") == slurp(dir / "o2" / "frame_00003.png"));
  CHECK(slurp(dir / "o1" / "paths.csv") == slurp(dir / "o2" / "paths.csv"));
  const std::string cfg = slurp(dir / "o1" / "config.txt");
  CHECK(cfg.find("crop_limit = 0.84999") != std::string::npos);
  CHECK(cfg.find("window_radius = 6") != std::string::npos);
  const json rep = load(dir / "o1" / "report.json");
  CHECK(rep["min_frame_crop"].get<double>() >= 0.85 - 1e-9);
}
