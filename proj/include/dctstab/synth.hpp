#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dctstab/image.hpp"
#include "dctstab/path_smooth.hpp"
#include "dctstab/similarity.hpp"
#include "dctstab/warp_crop.hpp"

namespace dctstab {

/// Absolute camera poses: frame i samples the scene at pose_i(p).
struct CameraPath {
  std::vector<SimilarityParams> poses;
  std::vector<SimilarityParams> smooth;
  std::vector<SimilarityParams> jitter;
  ParamVector jitter_amplitude{};

  /// A path with no jitter component.
  static CameraPath from_poses(std::vector<SimilarityParams> poses);
  int size() const { return static_cast<int>(poses.size()); }
};

/// Smooth sinusoids at `smooth_freq` cycles over the sequence (<= 2) with
/// per-parameter amplitudes, plus seeded uniform jitter in [-amp, amp].
CameraPath make_jitter_path(int frames, double smooth_freq, const ParamVector& smooth_amp,
                            const ParamVector& jitter_amp, uint64_t seed);

/// Smooth amplitudes that exercise every similarity parameter.
ParamVector default_smooth_amplitude();

/// Rectangle of its own texture moving at constant velocity.
struct ForegroundSpec {
  double area_fraction = 0.25;
  double vx = 1.5;  ///< px per frame
  double vy = -1.0;
};

struct SceneSpec {
  uint64_t seed = 1;
  int octaves = 4;
  int height = 240;
  int width = 320;
  int frames = 60;
  /// Texture border around the frame rectangle, in pixels.
  int margin = 64;
  std::optional<ForegroundSpec> foreground;

  void validate() const;
};

struct SyntheticVideo {
  FrameSequence frames;
  /// alpha_i with frame_{i+1}(p) = frame_i(alpha_i(p)) on the background.
  ParamSequence alphas;
  /// Dense ground-truth flow of each consecutive pair, in the same convention.
  std::vector<FlowField> flows;
  /// Foreground rectangle per frame (edge coordinates), when present.
  std::vector<CropRect> foreground;
};

/// Band-limited multi-octave value noise in [0.05, 0.95].
Image value_noise(int height, int width, int octaves, uint64_t seed);

/// Renders the scene. Throws InputError naming the required margin when a pose
/// leaves the texture canvas.
SyntheticVideo generate(const SceneSpec& scene, const CameraPath& path, bool dense_flows = true);

}  // namespace dctstab
