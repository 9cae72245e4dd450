#include "dctstab/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dctstab/error.hpp"
#include "dctstab/parallel.hpp"
#include "dctstab/similarity.hpp"
#include "dctstab/warp_crop.hpp"

namespace dctstab {

void PipelineConfig::validate() const {
  if (!(crop_limit > 0.0 && crop_limit <= 1.0)) throw InputError("crop limit must be in (0, 1]");
  if (window_radius < 0) throw InputError("window radius must be non-negative");
  if (cutoff < 0 || cutoff > 8) throw InputError("cutoff must be in [0, 8]");
  if (!(sigma_p > 0.0)) throw InputError("sigma_p must be positive");
  if (grid < 2 || grid <= cutoff) throw InputError("grid must exceed the cutoff");
  if (levels < 1) throw InputError("need at least one pyramid level");
  if (gn_iterations < 1) throw InputError("need at least one Gauss-Newton iteration");
  if (max_samples < 256) throw InputError("max_samples must be at least 256");
  if (threads < 1) throw InputError("threads must be positive");
  if (slack_window < 2) throw InputError("slack window must be at least 2");
  flow_loss.validate();
  photometric.validate();
}

PyramidSpec PipelineConfig::pyramid() const {
  PyramidSpec spec;
  spec.levels = levels;
  spec.max_gn_iters = gn_iterations;
  spec.grid = grid;
  spec.max_samples = max_samples;
  spec.cutoff_schedule.resize(levels);
  for (int l = 0; l < levels; ++l) spec.cutoff_schedule[l] = cutoff * (l + 1) / levels;
  return spec;
}

BilateralConfig PipelineConfig::bilateral() const {
  BilateralConfig b;
  b.window_radius = window_radius;
  b.sigma_p = sigma_p;
  return b;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_value(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out{};
  in >> out;
  if (!in || !(in >> std::ws).eof()) throw InputError("bad value '" + value + "' for " + key);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw InputError("bad value '" + value + "' for " + key);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& value) {
  if (key == "crop_limit") crop_limit = parse_value<double>(key, value);
  else if (key == "window_radius") window_radius = parse_value<int>(key, value);
  else if (key == "cutoff") cutoff = parse_value<int>(key, value);
  else if (key == "sigma_p") sigma_p = parse_value<double>(key, value);
  else if (key == "grid") grid = parse_value<int>(key, value);
  else if (key == "levels") levels = parse_value<int>(key, value);
  else if (key == "gn_iterations") gn_iterations = parse_value<int>(key, value);
  else if (key == "max_samples") max_samples = parse_value<int>(key, value);
  else if (key == "flow_loss_shape") flow_loss.shape = parse_value<double>(key, value);
  else if (key == "flow_loss_scale") flow_loss.scale = parse_value<double>(key, value);
  else if (key == "photometric_shape") photometric.shape = parse_value<double>(key, value);
  else if (key == "photometric_scale") photometric.scale = parse_value<double>(key, value);
  else if (key == "affine_only") affine_only = parse_bool(key, value);
  else if (key == "threads") threads = parse_value<int>(key, value);
  else if (key == "slack_window") slack_window = parse_value<int>(key, value);
  else if (key == "qp_tol") qp.tol = parse_value<double>(key, value);
  else if (key == "qp_max_iters") qp.max_iters = parse_value<int>(key, value);
  else if (key == "fidelity_eps") qp.fidelity_eps = parse_value<double>(key, value);
  else throw InputError("unknown config key '" + key + "'");
}

void PipelineConfig::apply_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

std::string PipelineConfig::to_key_values() const {
  std::ostringstream out;
  out.precision(17);
  out << "crop_limit = " << crop_limit << '\n'
      << "window_radius = " << window_radius << '\n'
      << "cutoff = " << cutoff << '\n'
      << "sigma_p = " << sigma_p << '\n'
      << "grid = " << grid << '\n'
      << "levels = " << levels << '\n'
      << "gn_iterations = " << gn_iterations << '\n'
      << "max_samples = " << max_samples << '\n'
      << "flow_loss_shape = " << flow_loss.shape << '\n'
      << "flow_loss_scale = " << flow_loss.scale << '\n'
      << "photometric_shape = " << photometric.shape << '\n'
      << "photometric_scale = " << photometric.scale << '\n'
      << "affine_only = " << (affine_only ? "true" : "false") << '\n'
      << "threads = " << threads << '\n'
      << "slack_window = " << slack_window << '\n'
      << "qp_tol = " << qp.tol << '\n'
      << "qp_max_iters = " << qp.max_iters << '\n'
      << "fidelity_eps = " << qp.fidelity_eps << '\n';
  return out.str();
}

PipelineResult stabilize(const FrameSequence& frames, const PipelineConfig& config) {
  config.validate();
  if (frames.size() < 2) throw InputError("need at least two frames");
  const int h = frames.front().height();
  const int w = frames.front().width();
  for (size_t i = 1; i < frames.size(); ++i)
    if (frames[i].height() != h || frames[i].width() != w)
      throw InputError("frame " + std::to_string(i) + " has different dimensions");

  const auto start = std::chrono::steady_clock::now();
  const PyramidSpec spec = config.pyramid();
  PipelineResult result;

  auto t0 = std::chrono::steady_clock::now();
  const size_t t = frames.size();
  std::vector<FramePyramid> pyramids(t);
  parallel_for(t, config.threads, [&](size_t i) { pyramids[i] = FramePyramid(frames[i].luma(), spec); });
  result.stage1_flows.resize(t - 1);
  parallel_for(t - 1, config.threads, [&](size_t i) {
    result.stage1_flows[i] = estimate_pair(pyramids[i], pyramids[i + 1], spec, config.photometric).coeffs;
  });
  pyramids.clear();
  result.alpha.resize(t - 1);
  for (size_t i = 0; i + 1 < t; ++i) {
    try {
      result.alpha[i] = fit_similarity(result.stage1_flows[i], config.flow_loss);
    } catch (const ProcessingError& e) {
      throw ProcessingError("similarity fit failed between frames " + std::to_string(i) + " and " +
                            std::to_string(i + 1) + ": " + e.what());
    }
  }
  result.timings.stage1_flow = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  result.path = smooth_with_crop_limit(result.alpha, config.crop_limit, h, w, config.qp, config.slack_window);
  result.timings.stage1_smooth = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  FrameSequence warped(t);
  parallel_for(t, config.threads, [&](size_t i) { warped[i] = warp_by_similarity(frames[i], result.path.warps[i]); });
  UniformCropResult stage1 = uniform_crop(warped);
  warped.clear();
  result.stage1_crop = stage1.ratio;
  result.crop_ratio = stage1.ratio;
  result.timings.stage1_warp = seconds_since(t0);

  if (config.affine_only) {
    result.frames = std::move(stage1.frames);
    result.timings.total = seconds_since(start);
    return result;
  }

  t0 = std::chrono::steady_clock::now();
  SmoothedSequence smoothed =
      smooth_sequence(stage1.frames, spec, config.photometric, config.bilateral(), config.threads);
  result.residual = std::move(smoothed.thetas);
  result.failed_pairs = std::move(smoothed.failed_pairs);
  result.timings.stage2_flow = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  UniformCropResult stage2 = apply_residual(stage1.frames, result.residual);
  result.stage2_crop = stage2.ratio;
  result.crop_ratio = stage1.ratio * stage2.ratio;
  result.frames = std::move(stage2.frames);
  result.timings.stage2_warp = seconds_since(t0);
  result.timings.total = seconds_since(start);
  return result;
}

}  // namespace dctstab
