#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

#include "dctstab/dct_basis.hpp"
#include "dctstab/image.hpp"
#include "dctstab/similarity.hpp"

namespace dctstab {

/// Boundary of the output region whose backward-warp samples land inside the
/// source frame, in pixel-center coordinates.
struct ValidQuad {
  std::array<Eigen::Vector2d, 4> corners;
  bool convex = true;
};

/// Valid region of a frame warped (backward) by a similarity: T^-1(frame rect).
ValidQuad valid_quad(const SimilarityParams& warp, int frame_h, int frame_w);

/// out(p) = src(p + flow(p)), bilinear. Samples outside the source, or touching
/// invalid source pixels, are marked invalid and set to 0.
Frame warp_by_flow(const Frame& src, const FlowField& flow);
Image warp_by_flow(const Image& src, const FlowField& flow, Mask* valid = nullptr);

/// Frame warped by a similarity map, i.e. out(p) = src(T(p)).
Frame warp_by_similarity(const Frame& src, const SimilarityParams& warp);

/// Axis-aligned rectangle in pixel-edge coordinates: pixel i spans [i, i+1).
struct CropRect {
  double left = 0.0;
  double top = 0.0;
  double width = 0.0;
  double height = 0.0;

  double area() const { return width * height; }
};

/// Largest axis-aligned rectangle inside a convex polygon, any aspect and
/// position: golden-section search over the half-width, bisection on the
/// half-height, center feasibility by halfplane clipping.
CropRect inscribed_rect(const std::vector<Eigen::Vector2d>& convex_polygon);

/// Sutherland-Hodgman clip of a polygon against an axis-aligned box.
std::vector<Eigen::Vector2d> clip_to_box(const std::vector<Eigen::Vector2d>& polygon, double x0,
                                         double y0, double x1, double y1);

/// Area ratio of the inscribed rectangle inside the valid part of the warped frame.
double crop_ratio(const SimilarityParams& warp, int frame_h, int frame_w);

/// Largest axis-aligned rectangle of valid pixels (pixel-edge coordinates).
CropRect valid_rect(const Mask& valid);

/// Crop ratio of the backward-warp validity region of a flow field.
double crop_ratio_flow(const FlowField& flow);

/// Per-pixel validity of out(p) = src(p + flow(p)) for a fully valid source.
Mask flow_validity(const FlowField& flow);

struct UniformCropResult {
  FrameSequence frames;
  CropRect rect;
  /// rect area / frame area.
  double ratio = 1.0;
};

/// Largest frame-aspect rectangle inside the intersection of all validity
/// masks (nearest the center on ties); every frame is cropped to it and
/// rescaled to the original size. Throws ProcessingError naming the first frame
/// that empties the intersection.
UniformCropResult uniform_crop(const FrameSequence& frames);

}  // namespace dctstab
