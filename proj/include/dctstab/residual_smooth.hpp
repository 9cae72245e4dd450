#pragma once

#include <map>
#include <vector>

#include "dctstab/dct_basis.hpp"
#include "dctstab/direct_flow.hpp"
#include "dctstab/image.hpp"
#include "dctstab/warp_crop.hpp"

namespace dctstab {

struct BilateralConfig {
  int window_radius = 16;
  double sigma_p = 0.1;
  bool skip_dc = true;

  double sigma_t() const { return window_radius / 3.0; }
  void validate() const;
};

/// Luma and validity of a frame area-resampled to the coefficient grid; the
/// range kernel is evaluated at this resolution.
struct GridLuma {
  Image luma;
  Mask valid;
};

GridLuma to_grid_luma(const Frame& frame, const GridSpec& grid);

/// Weight of neighbour j for center i: temporal Gaussian times the range term
/// exp(-||warp(I_i, Psi theta) - I_j||^2 / (2 N sigma_p^2)), N the number of
/// mutually valid grid pixels.
double bilateral_weight(const GridLuma& center_frame, const GridLuma& neighbour, const DctCoeffs& theta,
                        int temporal_offset, const BilateralConfig& config);

/// Weighted average of theta^(i,j) over the window. With skip_dc the (0,0)
/// entries are taken from theta^(i,i).
DctCoeffs bilateral_smooth_center(const std::map<int, DctCoeffs>& window,
                                  const std::vector<GridLuma>& frames, int center,
                                  const BilateralConfig& config,
                                  std::map<int, double>* weights = nullptr);

struct SmoothedSequence {
  std::vector<DctCoeffs> thetas;
  /// (center, neighbour) pairs whose estimate failed.
  std::vector<std::pair<int, int>> failed_pairs;
};

/// Window estimation followed by bilateral smoothing for every frame.
SmoothedSequence smooth_sequence(const FrameSequence& frames, const PyramidSpec& spec,
                                 const RobustLossParams& loss, const BilateralConfig& config,
                                 int threads = 1);

/// Warps frame i by Psi theta~^(i) at full resolution and crops uniformly.
UniformCropResult apply_residual(const FrameSequence& frames, const std::vector<DctCoeffs>& thetas);

}  // namespace dctstab
