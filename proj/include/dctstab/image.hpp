#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace dctstab {

/// Dense row-major 2D array.
template <typename T>
class Plane {
 public:
  Plane() = default;
  Plane(int height, int width, T fill = T{})
      : height_(height), width_(width), data_(static_cast<size_t>(height) * width, fill) {}

  int height() const { return height_; }
  int width() const { return width_; }
  bool empty() const { return data_.empty(); }
  size_t size() const { return data_.size(); }

  T& operator()(int y, int x) { return data_[static_cast<size_t>(y) * width_ + x]; }
  const T& operator()(int y, int x) const { return data_[static_cast<size_t>(y) * width_ + x]; }

  T* row(int y) { return data_.data() + static_cast<size_t>(y) * width_; }
  const T* row(int y) const { return data_.data() + static_cast<size_t>(y) * width_; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Plane& other) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

using Image = Plane<float>;
using Mask = Plane<uint8_t>;

/// One video frame: 1 (gray) or 3 (RGB) channels in [0,1] plus a validity mask.
struct Frame {
  std::vector<Image> channels;
  Mask valid;

  Frame() = default;
  explicit Frame(Image gray);
  Frame(int height, int width, int channel_count, float fill = 0.0f);

  int height() const { return channels.empty() ? 0 : channels.front().height(); }
  int width() const { return channels.empty() ? 0 : channels.front().width(); }
  int channel_count() const { return static_cast<int>(channels.size()); }

  /// 0.299R + 0.587G + 0.114B, or the single channel for gray frames.
  Image luma() const;
};

using FrameSequence = std::vector<Frame>;

/// Sample positions farther than this outside [0, n-1] are out of bounds.
inline constexpr double kBoundsEps = 1e-9;

inline bool in_bounds(double x, double y, int height, int width) {
  return x >= -kBoundsEps && y >= -kBoundsEps && x <= width - 1 + kBoundsEps &&
         y <= height - 1 + kBoundsEps;
}

/// Bilinear interpolation with edge clamping. Exact on affine intensity ramps.
template <typename T>
double sample_bilinear(const Plane<T>& img, double x, double y) {
  const int w = img.width();
  const int h = img.height();
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  x0 = std::min(x0, w - 1);
  y0 = std::min(y0, h - 1);
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double ax = x - x0;
  const double ay = y - y0;
  const double top = (1.0 - ax) * img(y0, x0) + ax * img(y0, x1);
  const double bottom = (1.0 - ax) * img(y1, x0) + ax * img(y1, x1);
  return (1.0 - ay) * top + ay * bottom;
}

/// True when every pixel contributing to the bilinear sample at (x, y) is set.
bool mask_covers(const Mask& mask, double x, double y);

/// Separable Gaussian blur, edge-replicated borders, kernel radius ceil(3 sigma).
Image gaussian_blur(const Image& img, double sigma);

/// Halves each dimension (floor) by 2x2 box averaging.
Image downsample2(const Image& img);

/// Area-weighted resampling; used for downscaling to the coefficient grid.
Image resize_area(const Image& img, int out_h, int out_w);

/// Bilinear resampling of the continuous sub-rectangle [left, left+crop_w] x
/// [top, top+crop_h] (pixel-edge coordinates) to out_h x out_w. Sample
/// positions are clamped so no pixel outside the rectangle contributes.
Image resample_rect(const Image& img, double left, double top, double crop_w, double crop_h,
                    int out_h, int out_w);

}  // namespace dctstab
