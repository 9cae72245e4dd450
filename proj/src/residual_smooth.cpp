#include "dctstab/residual_smooth.hpp"

#include <cmath>
#include <string>

#include "dctstab/error.hpp"
#include "dctstab/parallel.hpp"

namespace dctstab {

void BilateralConfig::validate() const {
  if (window_radius < 0) throw InputError("window radius must be non-negative");
  if (!(sigma_p > 0.0)) throw InputError("sigma_p must be positive");
}

GridLuma to_grid_luma(const Frame& frame, const GridSpec& grid) {
  GridLuma g;
  g.luma = resize_area(frame.luma(), grid.grid_h, grid.grid_w);
  Image coverage(frame.height(), frame.width());
  for (size_t i = 0; i < coverage.size(); ++i) coverage.data()[i] = frame.valid.data()[i] ? 1.0f : 0.0f;
  const Image cell = resize_area(coverage, grid.grid_h, grid.grid_w);
  g.valid = Mask(grid.grid_h, grid.grid_w, 0);
  for (size_t i = 0; i < cell.size(); ++i) g.valid.data()[i] = cell.data()[i] >= 0.999f ? 1 : 0;
  return g;
}

double bilateral_weight(const GridLuma& center_frame, const GridLuma& neighbour, const DctCoeffs& theta,
                        int temporal_offset, const BilateralConfig& config) {
  const double sigma_t = config.sigma_t();
  const double temporal =
      temporal_offset == 0 ? 1.0
                           : std::exp(-temporal_offset * temporal_offset / (2.0 * sigma_t * sigma_t));
  if (temporal == 0.0) return 0.0;

  const int gh = center_frame.luma.height();
  const int gw = center_frame.luma.width();
  // Flow in grid pixels.
  const FlowField flow = evaluate(theta, gh, gw);
  const double sx = static_cast<double>(gw) / theta.grid.image_w;
  const double sy = static_cast<double>(gh) / theta.grid.image_h;
  double ss = 0.0;
  long n = 0;
  for (int y = 0; y < gh; ++y) {
    for (int x = 0; x < gw; ++x) {
      if (!neighbour.valid(y, x)) continue;
      const double px = x + sx * flow.u(y, x);
      const double py = y + sy * flow.v(y, x);
      if (!mask_covers(center_frame.valid, px, py)) continue;
      const double d = sample_bilinear(center_frame.luma, px, py) - neighbour.luma(y, x);
      ss += d * d;
      ++n;
    }
  }
  if (n == 0) return 0.0;
  const double range = std::exp(-ss / (2.0 * n * config.sigma_p * config.sigma_p));
  return temporal * range;
}

DctCoeffs bilateral_smooth_center(const std::map<int, DctCoeffs>& window,
                                  const std::vector<GridLuma>& frames, int center,
                                  const BilateralConfig& config, std::map<int, double>* weights) {
  config.validate();
  const auto self = window.find(center);
  if (window.empty() || self == window.end()) throw InputError("window must contain its center frame");
  if (weights) weights->clear();
  if (config.window_radius == 0) {
    if (weights) (*weights)[center] = 1.0;
    return self->second;
  }

  DctCoeffs acc(self->second.cutoff, self->second.grid);
  double total = 0.0;
  for (const auto& [j, theta] : window) {
    if (std::abs(j - center) > config.window_radius) continue;
    if (j < 0 || j >= static_cast<int>(frames.size()))
      throw InputError("no frame for window entry " + std::to_string(j));
    const double wgt =
        j == center ? 1.0 : bilateral_weight(frames[center], frames[j], theta, j - center, config);
    if (weights) (*weights)[j] = wgt;
    if (wgt == 0.0) continue;
    acc += wgt * theta;
    total += wgt;
  }
  acc *= 1.0 / total;
  if (config.skip_dc) {
    acc.coeff_x(0, 0) = self->second.coeff_x(0, 0);
    acc.coeff_y(0, 0) = self->second.coeff_y(0, 0);
  }
  return acc;
}

SmoothedSequence smooth_sequence(const FrameSequence& frames, const PyramidSpec& spec,
                                 const RobustLossParams& loss, const BilateralConfig& config,
                                 int threads) {
  config.validate();
  if (frames.size() < 2) throw InputError("need at least two frames to smooth");
  const int t = static_cast<int>(frames.size());
  const GridSpec grid = GridSpec::for_image(frames.front().height(), frames.front().width(), spec.grid);

  std::vector<FramePyramid> pyramids(t);
  std::vector<GridLuma> grid_frames(t);
  parallel_for(t, threads, [&](size_t i) {
    pyramids[i] = FramePyramid(frames[i].luma(), spec);
    grid_frames[i] = to_grid_luma(frames[i], grid);
  });

  SmoothedSequence out;
  out.thetas.resize(t);
  for (int i = 0; i < t; ++i) {
    const WindowEstimate win = estimate_window(pyramids, i, config.window_radius, spec, loss, threads);
    for (int j : win.failed) out.failed_pairs.emplace_back(i, j);
    out.thetas[i] = bilateral_smooth_center(win.coeffs, grid_frames, i, config);
  }
  return out;
}

UniformCropResult apply_residual(const FrameSequence& frames, const std::vector<DctCoeffs>& thetas) {
  if (frames.size() != thetas.size()) throw InputError("need one coefficient set per frame");
  FrameSequence warped(frames.size());
  for (size_t i = 0; i < frames.size(); ++i) {
    if (thetas[i].squared_norm() == 0.0) {
      warped[i] = frames[i];
      continue;
    }
    warped[i] = warp_by_flow(frames[i], evaluate(thetas[i], frames[i].height(), frames[i].width()));
  }
  return uniform_crop(warped);
}

}  // namespace dctstab
