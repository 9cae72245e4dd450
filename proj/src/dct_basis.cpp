#include "dctstab/dct_basis.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <numbers>
#include <string>

#include "dctstab/error.hpp"

namespace dctstab {

GridSpec GridSpec::for_image(int image_h, int image_w, int grid) {
  GridSpec g;
  g.image_h = image_h;
  g.image_w = image_w;
  g.grid_h = std::min(grid, image_h);
  g.grid_w = std::min(grid, image_w);
  g.validate();
  return g;
}

void GridSpec::validate() const {
  if (grid_h < 2 || grid_w < 2) throw InputError("grid must be at least 2x2");
  if (grid_h > image_h || grid_w > image_w)
    throw InputError("grid " + std::to_string(grid_h) + "x" + std::to_string(grid_w) +
                     " exceeds image " + std::to_string(image_h) + "x" + std::to_string(image_w));
}

FlowField::FlowField(int height, int width)
    : u(height, width, 0.0), v(height, width, 0.0), valid(height, width, 1) {}

size_t FlowField::valid_count() const {
  size_t n = 0;
  for (auto m : valid.data()) n += m ? 1 : 0;
  return n;
}

DctCoeffs::DctCoeffs(int cutoff_, const GridSpec& grid_)
    : cutoff(cutoff_),
      coeff_x(Eigen::MatrixXd::Zero(cutoff_ + 1, cutoff_ + 1)),
      coeff_y(Eigen::MatrixXd::Zero(cutoff_ + 1, cutoff_ + 1)),
      grid(grid_) {
  if (cutoff < 0) throw InputError("cutoff must be non-negative");
  if (cutoff > std::min(grid.grid_h, grid.grid_w) - 1)
    throw InputError("cutoff " + std::to_string(cutoff) + " exceeds grid resolution");
}

Eigen::Vector2d DctCoeffs::mean_translation() const {
  const double norm = std::sqrt(static_cast<double>(grid.grid_h) * grid.grid_w);
  return {coeff_x(0, 0) / norm, coeff_y(0, 0) / norm};
}

DctCoeffs& DctCoeffs::operator+=(const DctCoeffs& other) {
  if (other.cutoff != cutoff) throw InputError("coefficient cutoff mismatch");
  coeff_x += other.coeff_x;
  coeff_y += other.coeff_y;
  return *this;
}

DctCoeffs& DctCoeffs::operator*=(double s) {
  coeff_x *= s;
  coeff_y *= s;
  return *this;
}

DctCoeffs operator+(DctCoeffs a, const DctCoeffs& b) { return a += b; }
DctCoeffs operator-(DctCoeffs a, const DctCoeffs& b) { return a += -1.0 * b; }
DctCoeffs operator*(double s, DctCoeffs a) { return a *= s; }

double dct_basis_value(int freq, double coord, int n) {
  const double scale = freq == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
  return scale * std::cos(std::numbers::pi * (2.0 * coord + 1.0) * freq / (2.0 * n));
}

Eigen::MatrixXd sampled_basis(int cutoff, int grid_n, int samples, double extent) {
  Eigen::MatrixXd b(samples, cutoff + 1);
  for (int p = 0; p < samples; ++p) {
    const double coord = (p + 0.5) / extent * grid_n - 0.5;
    for (int f = 0; f <= cutoff; ++f) b(p, f) = dct_basis_value(f, coord, grid_n);
  }
  return b;
}

FlowField evaluate(const DctCoeffs& coeffs, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw InputError("output size must be positive");
  const Eigen::MatrixXd by = sampled_basis(coeffs.cutoff, coeffs.grid.grid_h, out_h, out_h);
  const Eigen::MatrixXd bx = sampled_basis(coeffs.cutoff, coeffs.grid.grid_w, out_w, out_w);
  const Eigen::MatrixXd u = by * coeffs.coeff_x * bx.transpose();
  const Eigen::MatrixXd v = by * coeffs.coeff_y * bx.transpose();
  FlowField flow(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      flow.u(y, x) = u(y, x);
      flow.v(y, x) = v(y, x);
    }
  }
  return flow;
}

GridSamples resample_to_grid(const FlowField& flow, const GridSpec& grid) {
  GridSamples s;
  s.u.resize(grid.grid_h, grid.grid_w);
  s.v.resize(grid.grid_h, grid.grid_w);
  s.mask.resize(grid.grid_h, grid.grid_w);
  const double sx = static_cast<double>(flow.width()) / grid.grid_w;
  const double sy = static_cast<double>(flow.height()) / grid.grid_h;
  for (int gy = 0; gy < grid.grid_h; ++gy) {
    const double y = (gy + 0.5) * sy - 0.5;
    for (int gx = 0; gx < grid.grid_w; ++gx) {
      const double x = (gx + 0.5) * sx - 0.5;
      const bool ok = mask_covers(flow.valid, x, y);
      s.mask(gy, gx) = ok ? 1.0 : 0.0;
      s.u(gy, gx) = ok ? sample_bilinear(flow.u, x, y) : 0.0;
      s.v(gy, gx) = ok ? sample_bilinear(flow.v, x, y) : 0.0;
    }
  }
  return s;
}

namespace detail {

namespace {

struct PairIndex {
  std::vector<std::pair<int, int>> pairs;
  Eigen::MatrixXi index;
};

PairIndex symmetric_pairs(int n) {
  PairIndex p;
  p.index.resize(n, n);
  for (int a = 0; a < n; ++a) {
    for (int c = a; c < n; ++c) {
      p.index(a, c) = p.index(c, a) = static_cast<int>(p.pairs.size());
      p.pairs.emplace_back(a, c);
    }
  }
  return p;
}

Eigen::MatrixXd pair_products(const Eigen::MatrixXd& b, const PairIndex& p) {
  Eigen::MatrixXd out(b.rows(), static_cast<Eigen::Index>(p.pairs.size()));
  for (size_t k = 0; k < p.pairs.size(); ++k)
    out.col(k) = b.col(p.pairs[k].first).cwiseProduct(b.col(p.pairs[k].second));
  return out;
}

}  // namespace

Eigen::MatrixXd separable_gram(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& by,
                               const Eigen::MatrixXd& bx) {
  const int ny = static_cast<int>(by.cols());
  const int nx = static_cast<int>(bx.cols());
  const PairIndex py = symmetric_pairs(ny);
  const PairIndex px = symmetric_pairs(nx);
  const Eigen::MatrixXd z = weights * pair_products(bx, px);
  const Eigen::MatrixXd t = pair_products(by, py).transpose() * z;
  const int m = ny * nx;
  Eigen::MatrixXd gram(m, m);
  for (int a = 0; a < ny; ++a)
    for (int b = 0; b < nx; ++b)
      for (int c = 0; c < ny; ++c)
        for (int d = 0; d < nx; ++d) gram(a * nx + b, c * nx + d) = t(py.index(a, c), px.index(b, d));
  return gram;
}

Eigen::MatrixXd separable_moment(const Eigen::MatrixXd& values, const Eigen::MatrixXd& by,
                                 const Eigen::MatrixXd& bx) {
  return by.transpose() * (values * bx);
}

Eigen::VectorXd flatten(const Eigen::MatrixXd& block) {
  Eigen::VectorXd v(block.size());
  const int side = static_cast<int>(block.cols());
  for (int a = 0; a < block.rows(); ++a)
    for (int b = 0; b < side; ++b) v(a * side + b) = block(a, b);
  return v;
}

Eigen::MatrixXd unflatten(const Eigen::VectorXd& vec, int side) {
  Eigen::MatrixXd block(side, side);
  for (int a = 0; a < side; ++a)
    for (int b = 0; b < side; ++b) block(a, b) = vec(a * side + b);
  return block;
}

}  // namespace detail

DctCoeffs weighted_grid_fit(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v,
                            const Eigen::MatrixXd& weights, int cutoff, const GridSpec& grid) {
  DctCoeffs out(cutoff, grid);
  const Eigen::MatrixXd by = sampled_basis(cutoff, grid.grid_h, grid.grid_h, grid.grid_h);
  const Eigen::MatrixXd bx = sampled_basis(cutoff, grid.grid_w, grid.grid_w, grid.grid_w);
  Eigen::MatrixXd normal = detail::separable_gram(weights, by, bx);
  normal.diagonal().array() += 1e-10;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
  const Eigen::VectorXd rx = detail::flatten(detail::separable_moment(weights.cwiseProduct(u), by, bx));
  const Eigen::VectorXd ry = detail::flatten(detail::separable_moment(weights.cwiseProduct(v), by, bx));
  out.coeff_x = detail::unflatten(ldlt.solve(rx), out.side());
  out.coeff_y = detail::unflatten(ldlt.solve(ry), out.side());
  return out;
}

DctCoeffs project(const FlowField& flow, int cutoff, const GridSpec& grid) {
  grid.validate();
  if (flow.height() <= 0 || flow.width() <= 0) throw InputError("empty flow field");
  if (2 * flow.valid_count() < flow.valid.size())
    throw InputError("flow has more than 50% invalid pixels");
  const GridSamples s = resample_to_grid(flow, grid);
  if (s.mask.minCoeff() < 1.0) return weighted_grid_fit(s.u, s.v, s.mask, cutoff, grid);

  // Full grid: the basis is orthonormal, so the fit is a plain inner product.
  DctCoeffs out(cutoff, grid);
  const Eigen::MatrixXd by = sampled_basis(cutoff, grid.grid_h, grid.grid_h, grid.grid_h);
  const Eigen::MatrixXd bx = sampled_basis(cutoff, grid.grid_w, grid.grid_w, grid.grid_w);
  out.coeff_x = by.transpose() * s.u * bx;
  out.coeff_y = by.transpose() * s.v * bx;
  return out;
}

DctCoeffs truncate(const DctCoeffs& coeffs, int new_cutoff) {
  if (new_cutoff < 0) throw InputError("cutoff must be non-negative");
  DctCoeffs out(new_cutoff, coeffs.grid);
  const int keep = std::min(coeffs.cutoff, new_cutoff) + 1;
  out.coeff_x.topLeftCorner(keep, keep) = coeffs.coeff_x.topLeftCorner(keep, keep);
  out.coeff_y.topLeftCorner(keep, keep) = coeffs.coeff_y.topLeftCorner(keep, keep);
  return out;
}

}  // namespace dctstab
