#pragma once

#include <Eigen/Core>

#include "dctstab/image.hpp"

namespace dctstab {

/// Sampling grid on which the DCT basis is orthonormal, and the image extent it spans.
struct GridSpec {
  int grid_h = 64;
  int grid_w = 64;
  int image_h = 64;
  int image_w = 64;

  /// Default 64x64 grid over an image of the given size. Small images get a
  /// grid clamped to the image size.
  static GridSpec for_image(int image_h, int image_w, int grid = 64);
  void validate() const;
  bool operator==(const GridSpec&) const = default;
};

/// Per-pixel displacement (pixels) and validity.
struct FlowField {
  Plane<double> u;
  Plane<double> v;
  Mask valid;

  FlowField() = default;
  FlowField(int height, int width);

  int height() const { return u.height(); }
  int width() const { return u.width(); }
  size_t valid_count() const;
};

/// Low-frequency 2D-DCT coefficients of a flow field, one block per component.
/// Entry (fy, fx) weights the basis function with vertical frequency fy and
/// horizontal frequency fx. Values are in pixels of the full image extent.
struct DctCoeffs {
  int cutoff = 0;
  Eigen::MatrixXd coeff_x;
  Eigen::MatrixXd coeff_y;
  GridSpec grid;

  DctCoeffs() = default;
  DctCoeffs(int cutoff, const GridSpec& grid);

  int side() const { return cutoff + 1; }
  double squared_norm() const { return coeff_x.squaredNorm() + coeff_y.squaredNorm(); }
  /// Mean displacement over the grid: DC / sqrt(grid_h * grid_w).
  Eigen::Vector2d mean_translation() const;

  DctCoeffs& operator+=(const DctCoeffs& other);
  DctCoeffs& operator*=(double s);
};

DctCoeffs operator+(DctCoeffs a, const DctCoeffs& b);
DctCoeffs operator-(DctCoeffs a, const DctCoeffs& b);
DctCoeffs operator*(double s, DctCoeffs a);

/// Orthonormal DCT-II basis function of frequency `freq` on `n` samples,
/// evaluated at the continuous sample coordinate `coord` (0 .. n-1).
double dct_basis_value(int freq, double coord, int n);

/// Matrix of basis values at the `samples` pixel centers of an axis whose
/// extent is `extent` pixels: entry (p, f) = basis(f, (p + 0.5) / extent * grid_n - 0.5).
/// `extent` differs from `samples` only on pyramid levels.
Eigen::MatrixXd sampled_basis(int cutoff, int grid_n, int samples, double extent);

/// Reconstructs the flow at out_h x out_w pixel centers. All pixels valid.
FlowField evaluate(const DctCoeffs& coeffs, int out_h, int out_w);

/// Least-squares coefficients of `flow` (bilinearly resampled to the grid).
/// Throws InputError when more than half the pixels are invalid.
DctCoeffs project(const FlowField& flow, int cutoff, const GridSpec& grid);

/// Drops frequencies above `new_cutoff`, or zero-pads.
DctCoeffs truncate(const DctCoeffs& coeffs, int new_cutoff);

/// Flow resampled at the grid points, with a weight of 1 where all bilinear
/// neighbours are valid and 0 elsewhere.
struct GridSamples {
  Eigen::MatrixXd u;
  Eigen::MatrixXd v;
  Eigen::MatrixXd mask;
};
GridSamples resample_to_grid(const FlowField& flow, const GridSpec& grid);

/// Weighted least-squares fit on the grid,
///   min sum_p w(p) |f(p) - (Psi theta)(p)|^2,
/// solved through the separable normal equations with 1e-10 diagonal damping.
DctCoeffs weighted_grid_fit(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v,
                            const Eigen::MatrixXd& weights, int cutoff, const GridSpec& grid);

namespace detail {

/// Gram matrix sum_{y,x} w(y,x) phi_m(y,x) phi_n(y,x) for the separable basis
/// phi_(a,b)(y,x) = by(y,a) * bx(x,b). Index m = a * nx + b.
Eigen::MatrixXd separable_gram(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& by,
                               const Eigen::MatrixXd& bx);

/// Moments sum_{y,x} values(y,x) phi_(a,b)(y,x) as an ny x nx matrix.
Eigen::MatrixXd separable_moment(const Eigen::MatrixXd& values, const Eigen::MatrixXd& by,
                                 const Eigen::MatrixXd& bx);

/// Row-major flattening of a square coefficient block.
Eigen::VectorXd flatten(const Eigen::MatrixXd& block);
Eigen::MatrixXd unflatten(const Eigen::VectorXd& vec, int side);

}  // namespace detail

}  // namespace dctstab
