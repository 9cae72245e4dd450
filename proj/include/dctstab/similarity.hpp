#pragma once

#include <Eigen/Core>
#include <vector>

#include "dctstab/dct_basis.hpp"
#include "dctstab/robust_fit.hpp"

namespace dctstab {

/// Center-anchored similarity map
///   p -> exp(s) Rot(r) (p - p_c) + p_c + t,
/// with p_c = ((w-1)/2, (h-1)/2) in pixel-center coordinates.
struct SimilarityParams {
  double r = 0.0;   ///< rotation, radians
  double s = 0.0;   ///< natural-log scale
  double tx = 0.0;  ///< pixels
  double ty = 0.0;  ///< pixels

  static constexpr int kCount = 4;

  double& operator[](int k);
  double operator[](int k) const;

  Eigen::Matrix2d linear() const;
  Eigen::Vector2d apply(const Eigen::Vector2d& p, const Eigen::Vector2d& center) const;

  bool operator==(const SimilarityParams&) const = default;
};

using ParamSequence = std::vector<SimilarityParams>;

/// Names used in CSV headers and JSON: r, s, tx, ty.
const char* param_name(int k);

/// compose(a, b) applies a first, then b.
SimilarityParams compose(const SimilarityParams& a, const SimilarityParams& b);
SimilarityParams invert(const SimilarityParams& a);

inline Eigen::Vector2d image_center(int h, int w) { return {(w - 1) / 2.0, (h - 1) / 2.0}; }

/// f(p) = T(p) - p at every pixel.
FlowField flow_from_similarity(const SimilarityParams& params, int h, int w);

/// Robust similarity fit to the correspondences (p, p + flow(p)) sampled on a
/// 32x32 sub-grid: weighted Procrustes inside IRLS (<= 20 iterations).
/// Throws ProcessingError on degenerate geometry.
SimilarityParams fit_similarity(const FlowField& flow, const RobustLossParams& loss);

/// Same fit, sampling the DCT flow directly at the sub-grid points.
SimilarityParams fit_similarity(const DctCoeffs& coeffs, const RobustLossParams& loss);

/// 2x3 affine [A | b] mapping p -> A p + b (pixel coordinates, origin at pixel (0,0)).
using AffineMatrix = Eigen::Matrix<double, 2, 3>;

/// Plain least-squares affine fit over all valid pixels.
AffineMatrix fit_full_affine(const FlowField& flow);

/// Affine fit to the DCT flow sampled on a 32x32 sub-grid.
AffineMatrix fit_full_affine(const DctCoeffs& coeffs);

}  // namespace dctstab
