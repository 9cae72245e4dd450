#include "dctstab/similarity.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "dctstab/error.hpp"

namespace dctstab {

double& SimilarityParams::operator[](int k) {
  switch (k) {
    case 0: return r;
    case 1: return s;
    case 2: return tx;
    case 3: return ty;
  }
  throw InputError("similarity parameter index out of range");
}

double SimilarityParams::operator[](int k) const { return const_cast<SimilarityParams&>(*this)[k]; }

Eigen::Matrix2d SimilarityParams::linear() const {
  const double a = std::exp(s) * std::cos(r);
  const double b = std::exp(s) * std::sin(r);
  Eigen::Matrix2d m;
  m << a, -b, b, a;
  return m;
}

Eigen::Vector2d SimilarityParams::apply(const Eigen::Vector2d& p, const Eigen::Vector2d& center) const {
  return linear() * (p - center) + center + Eigen::Vector2d(tx, ty);
}

const char* param_name(int k) {
  static constexpr const char* kNames[] = {"r", "s", "tx", "ty"};
  return kNames[k];
}

SimilarityParams compose(const SimilarityParams& a, const SimilarityParams& b) {
  const Eigen::Vector2d t = b.linear() * Eigen::Vector2d(a.tx, a.ty) + Eigen::Vector2d(b.tx, b.ty);
  return {a.r + b.r, a.s + b.s, t.x(), t.y()};
}

SimilarityParams invert(const SimilarityParams& a) {
  SimilarityParams inv{-a.r, -a.s, 0.0, 0.0};
  const Eigen::Vector2d t = -(inv.linear() * Eigen::Vector2d(a.tx, a.ty));
  inv.tx = t.x();
  inv.ty = t.y();
  return inv;
}

FlowField flow_from_similarity(const SimilarityParams& params, int h, int w) {
  if (h <= 0 || w <= 0) throw InputError("flow size must be positive");
  FlowField flow(h, w);
  const Eigen::Vector2d c = image_center(h, w);
  const Eigen::Matrix2d m = params.linear() - Eigen::Matrix2d::Identity();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Eigen::Vector2d d = m * (Eigen::Vector2d(x, y) - c);
      flow.u(y, x) = d.x() + params.tx;
      flow.v(y, x) = d.y() + params.ty;
    }
  }
  return flow;
}

namespace {

constexpr int kSubgrid = 32;

struct Correspondences {
  std::vector<Eigen::Vector2d> from;  // pixel positions
  std::vector<Eigen::Vector2d> to;    // position + flow
  int h = 0;
  int w = 0;
};

double subgrid_coord(int k, int n, int extent) { return (k + 0.5) * extent / n - 0.5; }

Correspondences sample_flow(const FlowField& flow) {
  Correspondences c;
  c.h = flow.height();
  c.w = flow.width();
  const int ny = std::min(kSubgrid, c.h);
  const int nx = std::min(kSubgrid, c.w);
  for (int j = 0; j < ny; ++j) {
    const double y = subgrid_coord(j, ny, c.h);
    for (int i = 0; i < nx; ++i) {
      const double x = subgrid_coord(i, nx, c.w);
      if (!mask_covers(flow.valid, x, y)) continue;
      c.from.emplace_back(x, y);
      c.to.emplace_back(x + sample_bilinear(flow.u, x, y), y + sample_bilinear(flow.v, x, y));
    }
  }
  return c;
}

Correspondences sample_coeffs(const DctCoeffs& coeffs) {
  Correspondences c;
  c.h = coeffs.grid.image_h;
  c.w = coeffs.grid.image_w;
  const int ny = std::min(kSubgrid, c.h);
  const int nx = std::min(kSubgrid, c.w);
  const Eigen::MatrixXd by = sampled_basis(coeffs.cutoff, coeffs.grid.grid_h, ny, ny);
  const Eigen::MatrixXd bx = sampled_basis(coeffs.cutoff, coeffs.grid.grid_w, nx, nx);
  const Eigen::MatrixXd u = by * coeffs.coeff_x * bx.transpose();
  const Eigen::MatrixXd v = by * coeffs.coeff_y * bx.transpose();
  for (int j = 0; j < ny; ++j) {
    const double y = subgrid_coord(j, ny, c.h);
    for (int i = 0; i < nx; ++i) {
      const double x = subgrid_coord(i, nx, c.w);
      c.from.emplace_back(x, y);
      c.to.emplace_back(x + u(j, i), y + v(j, i));
    }
  }
  return c;
}

SimilarityParams fit_correspondences(const Correspondences& c, const RobustLossParams& loss) {
  loss.validate();
  const size_t n = c.from.size();
  if (n < 4) throw ProcessingError("similarity fit needs at least 4 valid samples");
  const Eigen::Vector2d center = image_center(c.h, c.w);
  std::vector<double> w(n, 1.0);
  SimilarityParams params;

  constexpr int kMaxIterations = 20;
  constexpr double kTol = 1e-8;
  for (int it = 0; it < kMaxIterations; ++it) {
    double wsum = 0.0;
    Eigen::Vector2d pm = Eigen::Vector2d::Zero();
    Eigen::Vector2d qm = Eigen::Vector2d::Zero();
    for (size_t i = 0; i < n; ++i) {
      wsum += w[i];
      pm += w[i] * (c.from[i] - center);
      qm += w[i] * (c.to[i] - center);
    }
    if (!(wsum > 0.0)) throw ProcessingError("similarity fit: all samples rejected");
    pm /= wsum;
    qm /= wsum;
    double spread = 0.0, dot = 0.0, cross = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const Eigen::Vector2d p = c.from[i] - center - pm;
      const Eigen::Vector2d q = c.to[i] - center - qm;
      spread += w[i] * p.squaredNorm();
      dot += w[i] * p.dot(q);
      cross += w[i] * (p.x() * q.y() - p.y() * q.x());
    }
    if (spread <= 1e-12 * wsum) throw ProcessingError("similarity fit: degenerate sample geometry");
    const double a = dot / spread;
    const double b = cross / spread;
    SimilarityParams next;
    next.r = std::atan2(b, a);
    next.s = std::log(std::hypot(a, b));
    const Eigen::Vector2d t = qm - next.linear() * pm;
    next.tx = t.x();
    next.ty = t.y();

    double change = 0.0;
    for (int k = 0; k < SimilarityParams::kCount; ++k)
      change = std::max(change, std::abs(next[k] - params[k]));
    params = next;
    if (it > 0 && change < kTol) break;

    for (size_t i = 0; i < n; ++i) {
      const double res = (params.apply(c.from[i], center) - c.to[i]).norm();
      w[i] = barron_weight(res, loss);
    }
  }
  return params;
}

AffineMatrix fit_affine_correspondences(const Correspondences& c) {
  const size_t n = c.from.size();
  if (n < 3) throw ProcessingError("affine fit needs at least 3 valid samples");
  Eigen::Vector2d pm = Eigen::Vector2d::Zero();
  Eigen::Vector2d qm = Eigen::Vector2d::Zero();
  for (size_t i = 0; i < n; ++i) {
    pm += c.from[i];
    qm += c.to[i];
  }
  pm /= static_cast<double>(n);
  qm /= static_cast<double>(n);
  Eigen::Matrix2d spp = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d sqp = Eigen::Matrix2d::Zero();
  for (size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d p = c.from[i] - pm;
    spp += p * p.transpose();
    sqp += (c.to[i] - qm) * p.transpose();
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(spp);
  if (eig.eigenvalues()(0) <= 1e-12 * std::max(1.0, eig.eigenvalues()(1)))
    throw ProcessingError("affine fit: rank-deficient sample geometry");
  const Eigen::Matrix2d a = sqp * spp.inverse();
  AffineMatrix m;
  m.leftCols<2>() = a;
  m.col(2) = qm - a * pm;
  return m;
}

}  // namespace

SimilarityParams fit_similarity(const FlowField& flow, const RobustLossParams& loss) {
  return fit_correspondences(sample_flow(flow), loss);
}

SimilarityParams fit_similarity(const DctCoeffs& coeffs, const RobustLossParams& loss) {
  return fit_correspondences(sample_coeffs(coeffs), loss);
}

AffineMatrix fit_full_affine(const FlowField& flow) {
  Correspondences c;
  c.h = flow.height();
  c.w = flow.width();
  for (int y = 0; y < c.h; ++y) {
    for (int x = 0; x < c.w; ++x) {
      if (!flow.valid(y, x)) continue;
      c.from.emplace_back(x, y);
      c.to.emplace_back(x + flow.u(y, x), y + flow.v(y, x));
    }
  }
  return fit_affine_correspondences(c);
}

AffineMatrix fit_full_affine(const DctCoeffs& coeffs) {
  return fit_affine_correspondences(sample_coeffs(coeffs));
}

}  // namespace dctstab
