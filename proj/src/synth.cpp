#include "dctstab/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "dctstab/error.hpp"

namespace dctstab {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Uniform in [-1, 1] from the top 53 bits; identical on every standard library.
double symmetric_unit(std::mt19937_64& rng) {
  return 2.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53 - 1.0;
}

double lattice_value(uint64_t seed, int octave, long ix, long iy) {
  uint64_t h = splitmix64(seed ^ (static_cast<uint64_t>(octave) * 0x632be59bd9b4e019ULL));
  h = splitmix64(h ^ static_cast<uint64_t>(ix));
  h = splitmix64(h ^ (static_cast<uint64_t>(iy) * 0x8cb92ba72f3d8dd7ULL));
  return 2.0 * static_cast<double>(h >> 11) * 0x1.0p-53 - 1.0;
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

SimilarityParams param_sum(const SimilarityParams& a, const SimilarityParams& b) {
  return {a.r + b.r, a.s + b.s, a.tx + b.tx, a.ty + b.ty};
}

}  // namespace

CameraPath CameraPath::from_poses(std::vector<SimilarityParams> poses) {
  CameraPath p;
  p.smooth = poses;
  p.jitter.assign(poses.size(), SimilarityParams{});
  p.poses = std::move(poses);
  return p;
}

ParamVector default_smooth_amplitude() { return {0.03, 0.03, 16.0, 10.0}; }

CameraPath make_jitter_path(int frames, double smooth_freq, const ParamVector& smooth_amp,
                            const ParamVector& jitter_amp, uint64_t seed) {
  if (frames < 2) throw InputError("a camera path needs at least two frames");
  if (smooth_freq < 0.0 || smooth_freq > 2.0) throw InputError("smooth frequency must be in [0, 2]");
  for (int k = 0; k < SimilarityParams::kCount; ++k)
    if (!std::isfinite(smooth_amp[k]) || !std::isfinite(jitter_amp[k]) || jitter_amp[k] < 0.0)
      throw InputError("path amplitudes must be finite and jitter non-negative");

  std::mt19937_64 phase_rng(splitmix64(seed ^ 0x5eedULL));
  std::mt19937_64 jitter_rng(splitmix64(seed));
  ParamVector phase{};
  for (double& p : phase) p = std::numbers::pi * symmetric_unit(phase_rng);

  CameraPath path;
  path.jitter_amplitude = jitter_amp;
  for (int i = 0; i < frames; ++i) {
    SimilarityParams smooth, jitter;
    for (int k = 0; k < SimilarityParams::kCount; ++k) {
      const double angle = 2.0 * std::numbers::pi * smooth_freq * i / frames + phase[k];
      smooth[k] = smooth_amp[k] * (std::sin(angle) - std::sin(phase[k]));
      jitter[k] = jitter_amp[k] * symmetric_unit(jitter_rng);
    }
    path.smooth.push_back(smooth);
    path.jitter.push_back(jitter);
    path.poses.push_back(param_sum(smooth, jitter));
  }
  return path;
}

void SceneSpec::validate() const {
  if (frames < 2) throw InputError("scene needs at least two frames");
  if (height < 16 || width < 16) throw InputError("scene frames must be at least 16x16");
  if (octaves < 1) throw InputError("texture needs at least one octave");
  if (margin < 0) throw InputError("margin must be non-negative");
  if (foreground) {
    const double a = foreground->area_fraction;
    if (!(a >= 0.0 && a <= 0.5)) throw InputError("foreground area fraction must be in [0, 0.5]");
  }
}

Image value_noise(int height, int width, int octaves, uint64_t seed) {
  constexpr int kBaseSpacing = 32;
  constexpr int kMinSpacing = 4;
  Image img(height, width, 0.0f);
  double amp = 1.0;
  for (int o = 0; o < octaves; ++o, amp *= 0.5) {
    const int spacing = kBaseSpacing >> o;
    if (spacing < kMinSpacing) break;
    for (int y = 0; y < height; ++y) {
      const long iy = y / spacing;
      const double fy = smoothstep(static_cast<double>(y % spacing) / spacing);
      for (int x = 0; x < width; ++x) {
        const long ix = x / spacing;
        const double fx = smoothstep(static_cast<double>(x % spacing) / spacing);
        const double v00 = lattice_value(seed, o, ix, iy);
        const double v10 = lattice_value(seed, o, ix + 1, iy);
        const double v01 = lattice_value(seed, o, ix, iy + 1);
        const double v11 = lattice_value(seed, o, ix + 1, iy + 1);
        const double top = v00 + fx * (v10 - v00);
        const double bottom = v01 + fx * (v11 - v01);
        img(y, x) += static_cast<float>(amp * (top + fy * (bottom - top)));
      }
    }
  }
  img = gaussian_blur(img, 1.0);
  const auto [lo, hi] = std::minmax_element(img.data().begin(), img.data().end());
  const float mn = *lo;
  const float range = std::max(*hi - mn, 1e-6f);
  for (float& v : img.data()) v = 0.05f + 0.9f * (v - mn) / range;
  return img;
}

SyntheticVideo generate(const SceneSpec& scene, const CameraPath& path, bool dense_flows) {
  scene.validate();
  if (path.size() != scene.frames)
    throw InputError("camera path has " + std::to_string(path.size()) + " poses, scene has " +
                     std::to_string(scene.frames) + " frames");
  const int h = scene.height;
  const int w = scene.width;
  const int m = scene.margin;
  const Eigen::Vector2d c = image_center(h, w);
  const Eigen::Vector2d offset(m, m);
  const int canvas_h = h + 2 * m;
  const int canvas_w = w + 2 * m;

  double excess = 0.0;
  for (const SimilarityParams& pose : path.poses) {
    for (const Eigen::Vector2d& corner : {Eigen::Vector2d(0, 0), Eigen::Vector2d(w - 1, 0),
                                         Eigen::Vector2d(w - 1, h - 1), Eigen::Vector2d(0, h - 1)}) {
      const Eigen::Vector2d q = pose.apply(corner, c) + offset;
      excess = std::max({excess, -q.x(), -q.y(), q.x() - (canvas_w - 1), q.y() - (canvas_h - 1)});
    }
  }
  if (excess > 0.0)
    throw InputError("canvas overflow: margin " + std::to_string(m) + " too small, need at least " +
                     std::to_string(m + static_cast<int>(std::ceil(excess))));

  const Image canvas = value_noise(canvas_h, canvas_w, scene.octaves, scene.seed);

  SyntheticVideo out;
  std::optional<Image> fg_tex;
  double fg_w = 0.0, fg_h = 0.0;
  if (scene.foreground && scene.foreground->area_fraction > 0.0) {
    const double side = std::sqrt(scene.foreground->area_fraction);
    fg_w = w * side;
    fg_h = h * side;
    fg_tex = value_noise(static_cast<int>(std::ceil(fg_h)) + 2, static_cast<int>(std::ceil(fg_w)) + 2,
                         scene.octaves, splitmix64(scene.seed ^ 0xf0f0f0f0ULL));
  }
  auto fg_rect = [&](int i) {
    const ForegroundSpec& f = *scene.foreground;
    return CropRect{w / 2.0 + f.vx * i - fg_w / 2.0, h / 2.0 + f.vy * i - fg_h / 2.0, fg_w, fg_h};
  };
  auto in_rect = [](const CropRect& r, double x, double y) {
    return x + 0.5 >= r.left && x + 0.5 < r.left + r.width && y + 0.5 >= r.top && y + 0.5 < r.top + r.height;
  };

  for (int i = 0; i < scene.frames; ++i) {
    const SimilarityParams& pose = path.poses[i];
    Image img(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const Eigen::Vector2d q = pose.apply({double(x), double(y)}, c) + offset;
        img(y, x) = static_cast<float>(sample_bilinear(canvas, q.x(), q.y()));
      }
    if (fg_tex) {
      const CropRect r = fg_rect(i);
      out.foreground.push_back(r);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          if (in_rect(r, x, y))
            img(y, x) = static_cast<float>(sample_bilinear(*fg_tex, x + 0.5 - r.left, y + 0.5 - r.top));
    }
    out.frames.emplace_back(std::move(img));
  }

  for (int i = 0; i + 1 < scene.frames; ++i) {
    const SimilarityParams alpha = compose(path.poses[i + 1], invert(path.poses[i]));
    out.alphas.push_back(alpha);
    if (!dense_flows) continue;
    FlowField flow = flow_from_similarity(alpha, h, w);
    if (fg_tex) {
      const CropRect r = fg_rect(i + 1);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          if (in_rect(r, x, y)) {
            flow.u(y, x) = -scene.foreground->vx;
            flow.v(y, x) = -scene.foreground->vy;
          }
    }
    out.flows.push_back(std::move(flow));
  }
  return out;
}

}  // namespace dctstab
