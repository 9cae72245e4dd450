#pragma once

#include <map>
#include <vector>

#include "dctstab/dct_basis.hpp"
#include "dctstab/image.hpp"
#include "dctstab/robust_fit.hpp"

namespace dctstab {

/// Coarse-to-fine schedule. cutoff_schedule[l] is the DCT cutoff used on
/// level l (0 = coarsest).
struct PyramidSpec {
  int levels = 4;
  std::vector<int> cutoff_schedule = {2, 4, 6, 8};
  int max_gn_iters = 20;
  int grid = 64;
  /// Residual samples per level are thinned by an integer pixel stride to at
  /// most this many.
  int max_samples = 20000;

  void validate() const;
  int final_cutoff() const { return cutoff_schedule.back(); }
  /// Smallest frame side the pyramid accepts: 2^(levels-1) * 16.
  int min_frame_side() const { return (1 << (levels - 1)) * 16; }
};

/// Level 0 is the coarsest; each finer level doubles the resolution. Throws
/// InputError when the frame is smaller than spec.min_frame_side().
std::vector<Image> build_pyramid(const Image& frame, int levels);

/// Per-frame data reused by every pair the frame takes part in: the pyramid,
/// its 1-pixel Gaussian smoothed levels and their central-difference gradients.
struct FramePyramid {
  struct Level {
    Image smooth;
    Image grad_x;
    Image grad_y;
    double scale = 1.0;  ///< level pixels per full-resolution pixel
  };
  std::vector<Level> levels;
  int height = 0;
  int width = 0;

  FramePyramid() = default;
  FramePyramid(const Image& luma, const PyramidSpec& spec);
};

struct PairEstimate {
  DctCoeffs coeffs;
  int iterations = 0;
  /// Set when a level stopped after repeated objective increases; coeffs then
  /// hold the last stable iterate.
  bool diverged = false;
  double final_objective = 0.0;
};

/// Global flow theta with warp(frame_a, Psi theta) ~ frame_b, by robust
/// Gauss-Newton (Levenberg damped) over the level's truncated coefficients,
/// each level initialised from the previous one.
PairEstimate estimate_pair(const FramePyramid& a, const FramePyramid& b, const PyramidSpec& spec,
                           const RobustLossParams& loss);
PairEstimate estimate_pair(const Image& frame_a, const Image& frame_b, const PyramidSpec& spec,
                           const RobustLossParams& loss);

struct WindowEstimate {
  std::map<int, DctCoeffs> coeffs;
  /// Neighbours whose estimate failed; excluded from `coeffs`.
  std::vector<int> failed;
};

/// theta^(i,j) for every j in [i - radius, i + radius] clipped to the sequence;
/// theta^(i,i) = 0 exactly.
WindowEstimate estimate_window(const std::vector<FramePyramid>& pyramids, int center, int radius,
                               const PyramidSpec& spec, const RobustLossParams& loss,
                               int threads = 1);

}  // namespace dctstab
