#include "dctstab/image.hpp"

#include "dctstab/error.hpp"

namespace dctstab {

Frame::Frame(Image gray) : valid(gray.height(), gray.width(), 1) {
  channels.push_back(std::move(gray));
}

Frame::Frame(int height, int width, int channel_count, float fill)
    : channels(channel_count, Image(height, width, fill)), valid(height, width, 1) {}

Image Frame::luma() const {
  if (channels.size() == 1) return channels.front();
  if (channels.size() != 3) throw InputError("frame must have 1 or 3 channels");
  Image out(height(), width());
  const auto& r = channels[0].data();
  const auto& g = channels[1].data();
  const auto& b = channels[2].data();
  auto& o = out.data();
  for (size_t i = 0; i < o.size(); ++i) o[i] = 0.299f * r[i] + 0.587f * g[i] + 0.114f * b[i];
  return out;
}

bool mask_covers(const Mask& mask, double x, double y) {
  if (!in_bounds(x, y, mask.height(), mask.width())) return false;
  x = std::clamp(x, 0.0, static_cast<double>(mask.width() - 1));
  y = std::clamp(y, 0.0, static_cast<double>(mask.height() - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const bool need_x1 = x - x0 > 0.0;
  const bool need_y1 = y - y0 > 0.0;
  if (!mask(y0, x0)) return false;
  if (need_x1 && !mask(y0, x0 + 1)) return false;
  if (need_y1 && !mask(y0 + 1, x0)) return false;
  if (need_x1 && need_y1 && !mask(y0 + 1, x0 + 1)) return false;
  return true;
}

namespace {

std::vector<float> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<float> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * i * i / (sigma * sigma));
    k[i + radius] = static_cast<float>(v);
    sum += v;
  }
  for (auto& v : k) v = static_cast<float>(v / sum);
  return k;
}

}  // namespace

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0.0) return img;
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int h = img.height();
  const int w = img.width();
  Image tmp(h, w);
  for (int y = 0; y < h; ++y) {
    const float* src = img.row(y);
    float* dst = tmp.row(y);
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * src[std::clamp(x + i, 0, w - 1)];
      dst[x] = acc;
    }
  }
  Image out(h, w);
  for (int y = 0; y < h; ++y) {
    float* dst = out.row(y);
    for (int x = 0; x < w; ++x) dst[x] = 0.0f;
    for (int i = -r; i <= r; ++i) {
      const float* src = tmp.row(std::clamp(y + i, 0, h - 1));
      const float kv = k[i + r];
      for (int x = 0; x < w; ++x) dst[x] += kv * src[x];
    }
  }
  return out;
}

Image downsample2(const Image& img) {
  const int h = img.height() / 2;
  const int w = img.width() / 2;
  Image out(h, w);
  for (int y = 0; y < h; ++y) {
    const float* a = img.row(2 * y);
    const float* b = img.row(2 * y + 1);
    float* dst = out.row(y);
    for (int x = 0; x < w; ++x)
      dst[x] = 0.25f * (a[2 * x] + a[2 * x + 1] + b[2 * x] + b[2 * x + 1]);
  }
  return out;
}

namespace {

// Row i holds the overlap weights of output cell i with every input cell.
std::vector<std::vector<std::pair<int, float>>> area_weights(int in_n, int out_n) {
  std::vector<std::vector<std::pair<int, float>>> weights(out_n);
  const double step = static_cast<double>(in_n) / out_n;
  for (int o = 0; o < out_n; ++o) {
    const double lo = o * step;
    const double hi = lo + step;
    const int first = static_cast<int>(std::floor(lo));
    const int last = std::min(in_n - 1, static_cast<int>(std::ceil(hi)) - 1);
    for (int i = first; i <= last; ++i) {
      const double overlap = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
      if (overlap > 1e-12) weights[o].emplace_back(i, static_cast<float>(overlap / step));
    }
  }
  return weights;
}

}  // namespace

Image resize_area(const Image& img, int out_h, int out_w) {
  const auto wx = area_weights(img.width(), out_w);
  const auto wy = area_weights(img.height(), out_h);
  Image tmp(img.height(), out_w);
  for (int y = 0; y < img.height(); ++y) {
    const float* src = img.row(y);
    float* dst = tmp.row(y);
    for (int x = 0; x < out_w; ++x) {
      float acc = 0.0f;
      for (auto [i, wgt] : wx[x]) acc += wgt * src[i];
      dst[x] = acc;
    }
  }
  Image out(out_h, out_w, 0.0f);
  for (int y = 0; y < out_h; ++y) {
    float* dst = out.row(y);
    for (auto [i, wgt] : wy[y]) {
      const float* src = tmp.row(i);
      for (int x = 0; x < out_w; ++x) dst[x] += wgt * src[x];
    }
  }
  return out;
}

Image resample_rect(const Image& img, double left, double top, double crop_w, double crop_h,
                    int out_h, int out_w) {
  Image out(out_h, out_w);
  const double sx = crop_w / out_w;
  const double sy = crop_h / out_h;
  // Keep bilinear footprints inside the rectangle's own pixels.
  const double x_hi = std::max(left, left + crop_w - 1.0);
  const double y_hi = std::max(top, top + crop_h - 1.0);
  for (int y = 0; y < out_h; ++y) {
    const double src_y = std::clamp(top + (y + 0.5) * sy - 0.5, top, y_hi);
    float* dst = out.row(y);
    for (int x = 0; x < out_w; ++x) {
      const double src_x = std::clamp(left + (x + 0.5) * sx - 0.5, left, x_hi);
      dst[x] = static_cast<float>(sample_bilinear(img, src_x, src_y));
    }
  }
  return out;
}

}  // namespace dctstab
