#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dctstab/direct_flow.hpp"
#include "dctstab/image.hpp"
#include "dctstab/path_smooth.hpp"
#include "dctstab/residual_smooth.hpp"
#include "dctstab/robust_fit.hpp"

namespace dctstab {

struct PipelineConfig {
  double crop_limit = 0.8;
  int window_radius = 16;
  int cutoff = 8;
  double sigma_p = 0.1;
  int grid = 64;
  int levels = 4;
  int gn_iterations = 20;
  int max_samples = 20000;
  RobustLossParams flow_loss = RobustLossParams::flow_default();
  RobustLossParams photometric = RobustLossParams::photometric_default();
  bool affine_only = false;
  int threads = 1;
  int slack_window = 9;
  QpSettings qp;

  void validate() const;
  /// Cutoffs rise linearly to `cutoff` over the levels.
  PyramidSpec pyramid() const;
  BilateralConfig bilateral() const;

  /// key = value lines; '#' starts a comment. Unknown keys throw InputError.
  void apply_config_file(const std::filesystem::path& path);
  void set(const std::string& key, const std::string& value);
  /// Every setting as key = value lines, readable by apply_config_file.
  std::string to_key_values() const;
};

struct StageTimings {
  double stage1_flow = 0.0;
  double stage1_smooth = 0.0;
  double stage1_warp = 0.0;
  double stage2_flow = 0.0;
  double stage2_warp = 0.0;
  double total = 0.0;
};

struct PipelineResult {
  FrameSequence frames;
  /// Stage-1 inter-frame flows, similarity fits and smoothed path.
  std::vector<DctCoeffs> stage1_flows;
  ParamSequence alpha;
  CropLimitedPath path;
  double stage1_crop = 1.0;
  /// Residual coefficients applied to each frame (empty with affine_only).
  std::vector<DctCoeffs> residual;
  std::vector<std::pair<int, int>> failed_pairs;
  double stage2_crop = 1.0;
  /// Area fraction of the input frame that survives both crops.
  double crop_ratio = 1.0;
  StageTimings timings;
};

/// Stage 1 (similarity path smoothing under the crop limit, warp, uniform
/// crop) and, unless affine_only, stage 2 (bilateral smoothing of window
/// flows, residual warp, uniform crop).
PipelineResult stabilize(const FrameSequence& frames, const PipelineConfig& config);

}  // namespace dctstab
