#include "dctstab/direct_flow.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "dctstab/error.hpp"
#include "dctstab/parallel.hpp"

namespace dctstab {

void PyramidSpec::validate() const {
  if (levels < 1) throw InputError("pyramid needs at least one level");
  if (static_cast<int>(cutoff_schedule.size()) != levels)
    throw InputError("cutoff schedule must have one entry per level");
  for (size_t i = 0; i < cutoff_schedule.size(); ++i) {
    if (cutoff_schedule[i] < 0) throw InputError("cutoffs must be non-negative");
    if (i > 0 && cutoff_schedule[i] < cutoff_schedule[i - 1])
      throw InputError("cutoff schedule must be non-decreasing");
  }
  if (cutoff_schedule.back() > 8) throw InputError("final cutoff must not exceed 8");
  if (max_gn_iters < 1) throw InputError("need at least one Gauss-Newton iteration");
  if (max_samples < 256) throw InputError("max_samples must be at least 256");
}

std::vector<Image> build_pyramid(const Image& frame, int levels) {
  if (levels < 1) throw InputError("pyramid needs at least one level");
  const int min_side = (1 << (levels - 1)) * 16;
  if (frame.height() < min_side || frame.width() < min_side)
    throw InputError("frame " + std::to_string(frame.height()) + "x" + std::to_string(frame.width()) +
                     " too small for " + std::to_string(levels) + " pyramid levels; need at least " +
                     std::to_string(min_side) + "x" + std::to_string(min_side));
  std::vector<Image> pyr(levels);
  pyr[levels - 1] = frame;
  for (int l = levels - 2; l >= 0; --l) pyr[l] = downsample2(pyr[l + 1]);
  return pyr;
}

namespace {

void central_gradients(const Image& img, Image& gx, Image& gy) {
  const int h = img.height();
  const int w = img.width();
  gx = Image(h, w);
  gy = Image(h, w);
  for (int y = 0; y < h; ++y) {
    const float* row = img.row(y);
    const float* up = img.row(std::max(y - 1, 0));
    const float* down = img.row(std::min(y + 1, h - 1));
    const float ydiv = (y == 0 || y == h - 1) ? 1.0f : 0.5f;
    for (int x = 0; x < w; ++x) {
      const int xl = std::max(x - 1, 0);
      const int xr = std::min(x + 1, w - 1);
      gx(y, x) = (row[xr] - row[xl]) / static_cast<float>(xr - xl);
      gy(y, x) = (down[x] - up[x]) * ydiv;
    }
  }
}

}  // namespace

FramePyramid::FramePyramid(const Image& luma, const PyramidSpec& spec)
    : height(luma.height()), width(luma.width()) {
  spec.validate();
  const std::vector<Image> pyr = build_pyramid(luma, spec.levels);
  levels.resize(pyr.size());
  for (size_t l = 0; l < pyr.size(); ++l) {
    levels[l].smooth = gaussian_blur(pyr[l], 1.0);
    central_gradients(levels[l].smooth, levels[l].grad_x, levels[l].grad_y);
    levels[l].scale = std::ldexp(1.0, -static_cast<int>(pyr.size() - 1 - l));
  }
}

namespace {

// Alignment state of one pyramid level at a given coefficient vector.
struct Linearization {
  Eigen::MatrixXd residual;  // b - warped a; 0 where invalid
  Eigen::MatrixXd gx;        // warped gradients
  Eigen::MatrixXd gy;
  Eigen::MatrixXd weight;    // IRLS weight; 0 where invalid
  double objective = 0.0;  // mean robust loss over valid pixels
  long valid_count = 0;
};

class LevelSolver {
 public:
  LevelSolver(const FramePyramid::Level& a, const FramePyramid::Level& b, int cutoff,
              const GridSpec& grid, const RobustLossParams& loss, int max_samples)
      : a_(a), b_(b), cutoff_(cutoff), loss_(loss) {
    const int h = a.smooth.height();
    const int w = a.smooth.width();
    stride_ = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(h) * w / max_samples))));
    const Eigen::MatrixXd by = sampled_basis(cutoff, grid.grid_h, h, grid.image_h * a.scale);
    const Eigen::MatrixXd bx = sampled_basis(cutoff, grid.grid_w, w, grid.image_w * a.scale);
    rows_ = (h + stride_ - 1) / stride_;
    cols_ = (w + stride_ - 1) / stride_;
    by_.resize(rows_, by.cols());
    bx_.resize(cols_, bx.cols());
    for (int i = 0; i < rows_; ++i) by_.row(i) = by.row(i * stride_);
    for (int i = 0; i < cols_; ++i) bx_.row(i) = bx.row(i * stride_);
  }

  Linearization linearize(const Eigen::MatrixXd& cx, const Eigen::MatrixXd& cy) const {
    const int h = a_.smooth.height();
    const int w = a_.smooth.width();
    const double s = a_.scale;
    const Eigen::MatrixXd u = s * (by_ * cx * bx_.transpose());
    const Eigen::MatrixXd v = s * (by_ * cy * bx_.transpose());
    Linearization lin;
    lin.residual.setZero(rows_, cols_);
    lin.gx.setZero(rows_, cols_);
    lin.gy.setZero(rows_, cols_);
    lin.weight.setZero(rows_, cols_);
    double total = 0.0;
    const float* img = a_.smooth.data().data();
    const float* gxs = a_.grad_x.data().data();
    const float* gys = a_.grad_y.data().data();
    for (int j = 0; j < cols_; ++j) {
      const int x = j * stride_;
      for (int i = 0; i < rows_; ++i) {
        const int y = i * stride_;
        const double sx = x + u(i, j);
        const double sy = y + v(i, j);
        if (!in_bounds(sx, sy, h, w)) continue;
        // Bilinear taps shared by the intensity and both gradients.
        const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, w - 2);
        const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, h - 2);
        const double ax = std::clamp(sx - x0, 0.0, 1.0);
        const double ay = std::clamp(sy - y0, 0.0, 1.0);
        const double w00 = (1.0 - ax) * (1.0 - ay), w10 = ax * (1.0 - ay);
        const double w01 = (1.0 - ax) * ay, w11 = ax * ay;
        const size_t i00 = static_cast<size_t>(y0) * w + x0;
        const size_t i01 = i00 + w;
        auto tap = [&](const float* p) {
          return w00 * p[i00] + w10 * p[i00 + 1] + w01 * p[i01] + w11 * p[i01 + 1];
        };
        const double e = b_.smooth(y, x) - tap(img);
        lin.residual(i, j) = e;
        lin.gx(i, j) = tap(gxs);
        lin.gy(i, j) = tap(gys);
        const auto [rho, wt] = barron_loss_and_weight(e, loss_);
        lin.weight(i, j) = wt;
        total += rho;
        ++lin.valid_count;
      }
    }
    lin.objective = lin.valid_count > 0 ? total / lin.valid_count : 0.0;
    return lin;
  }

  /// Mean robust loss over valid samples for a constant shift (level pixels).
  double shift_objective(double du, double dv) const {
    const int h = a_.smooth.height();
    const int w = a_.smooth.width();
    double total = 0.0;
    long count = 0;
    for (int i = 0; i < rows_; ++i) {
      const int y = i * stride_;
      const double sy = y + dv;
      for (int j = 0; j < cols_; ++j) {
        const int x = j * stride_;
        const double sx = x + du;
        if (!in_bounds(sx, sy, h, w)) continue;
        total += barron_loss_and_weight(b_.smooth(y, x) - sample_bilinear(a_.smooth, sx, sy), loss_).first;
        ++count;
      }
    }
    return count > 0 ? total / count : std::numeric_limits<double>::infinity();
  }

  // Robust Gauss-Newton normal equations H delta = g over [theta_x, theta_y].
  void normal_equations(const Linearization& lin, Eigen::MatrixXd& hess, Eigen::VectorXd& grad) const {
    const Eigen::MatrixXd& wt = lin.weight;
    const double s2 = a_.scale * a_.scale;
    const Eigen::MatrixXd wgx = wt.cwiseProduct(lin.gx);
    const Eigen::MatrixXd wgy = wt.cwiseProduct(lin.gy);
    const int m = (cutoff_ + 1) * (cutoff_ + 1);
    hess.resize(2 * m, 2 * m);
    hess.topLeftCorner(m, m) = s2 * detail::separable_gram(wgx.cwiseProduct(lin.gx), by_, bx_);
    hess.bottomRightCorner(m, m) = s2 * detail::separable_gram(wgy.cwiseProduct(lin.gy), by_, bx_);
    hess.topRightCorner(m, m) = s2 * detail::separable_gram(wgx.cwiseProduct(lin.gy), by_, bx_);
    hess.bottomLeftCorner(m, m) = hess.topRightCorner(m, m).transpose();
    grad.resize(2 * m);
    grad.head(m) = a_.scale * detail::flatten(detail::separable_moment(wgx.cwiseProduct(lin.residual), by_, bx_));
    grad.tail(m) = a_.scale * detail::flatten(detail::separable_moment(wgy.cwiseProduct(lin.residual), by_, bx_));
  }

 private:
  const FramePyramid::Level& a_;
  const FramePyramid::Level& b_;
  int cutoff_;
  RobustLossParams loss_;
  Eigen::MatrixXd by_;  // basis at the sampled rows
  Eigen::MatrixXd bx_;  // basis at the sampled columns
  int stride_ = 1;
  int rows_ = 0;
  int cols_ = 0;
};

}  // namespace

PairEstimate estimate_pair(const FramePyramid& a, const FramePyramid& b, const PyramidSpec& spec,
                           const RobustLossParams& loss) {
  spec.validate();
  loss.validate();
  if (a.height != b.height || a.width != b.width)
    throw InputError("frame dimensions differ: " + std::to_string(a.height) + "x" +
                     std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                     std::to_string(b.width));
  if (static_cast<int>(a.levels.size()) != spec.levels || static_cast<int>(b.levels.size()) != spec.levels)
    throw InputError("pyramid depth does not match the spec");

  const GridSpec grid = GridSpec::for_image(a.height, a.width, spec.grid);
  PairEstimate out;
  out.coeffs = DctCoeffs(spec.final_cutoff(), grid);
  const double grid_norm = std::sqrt(static_cast<double>(grid.grid_h) * grid.grid_w);
  constexpr double kStepTol = 1e-3;  // RMS flow update, level pixels
  constexpr int kMaxFailures = 3;

  for (int l = 0; l < spec.levels; ++l) {
    const int cutoff = spec.cutoff_schedule[l];
    const int side = cutoff + 1;
    const int m = side * side;
    const LevelSolver solver(a.levels[l], b.levels[l], cutoff, grid, loss, spec.max_samples);
    Eigen::MatrixXd cx = out.coeffs.coeff_x.topLeftCorner(side, side);
    Eigen::MatrixXd cy = out.coeffs.coeff_y.topLeftCorner(side, side);

    if (l == 0) {
      // Exhaustive integer-shift search seeds the translation.
      const int lh = a.levels[0].smooth.height(), lw = a.levels[0].smooth.width();
      const int reach = std::max(2, std::min(lh, lw) / 4);
      constexpr int kSearchSamples = 1024;
      const LevelSolver probe(a.levels[0], b.levels[0], 0, grid, loss, kSearchSamples);
      double best = probe.shift_objective(0.0, 0.0);
      int best_dx = 0, best_dy = 0;
      for (int dy = -reach; dy <= reach; ++dy)
        for (int dx = -reach; dx <= reach; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const double obj = probe.shift_objective(dx, dy);
          if (obj < best) {
            best = obj;
            best_dx = dx;
            best_dy = dy;
          }
        }
      const double per_px = grid_norm / a.levels[0].scale;
      cx(0, 0) = best_dx * per_px;
      cy(0, 0) = best_dy * per_px;
    }
    Linearization lin = solver.linearize(cx, cy);
    if (lin.valid_count == 0) throw ProcessingError("no overlap between frames at pyramid level");
    double damping = 1e-3;
    int failures = 0;
    for (int it = 0; it < spec.max_gn_iters; ++it) {
      Eigen::MatrixXd hess;
      Eigen::VectorXd grad;
      solver.normal_equations(lin, hess, grad);
      if (grad.squaredNorm() == 0.0) break;

      bool accepted = false;
      bool converged = false;
      while (!accepted) {
        Eigen::MatrixXd lhs = hess;
        lhs.diagonal() += damping * hess.diagonal() + Eigen::VectorXd::Constant(2 * m, 1e-12);
        const Eigen::VectorXd delta = lhs.ldlt().solve(grad);
        const Eigen::MatrixXd nx = cx + detail::unflatten(delta.head(m), side);
        const Eigen::MatrixXd ny = cy + detail::unflatten(delta.tail(m), side);
        Linearization trial = solver.linearize(nx, ny);
        ++out.iterations;
        const double step_rms = delta.norm() / grid_norm * a.levels[l].scale;
        if (trial.valid_count > 0 && trial.objective <= lin.objective) {
          cx = nx;
          cy = ny;
          lin = std::move(trial);
          damping = std::max(damping * 0.1, 1e-9);
          failures = 0;
          accepted = true;
          converged = step_rms < kStepTol;
        } else {
          if (step_rms < kStepTol) {
            converged = true;
            break;
          }
          damping *= 10.0;
          if (++failures >= kMaxFailures) {
            out.diverged = true;
            break;
          }
        }
      }
      if (converged || failures >= kMaxFailures) break;
    }
    out.coeffs.coeff_x.topLeftCorner(side, side) = cx;
    out.coeffs.coeff_y.topLeftCorner(side, side) = cy;
    out.final_objective = lin.objective;
  }
  return out;
}

PairEstimate estimate_pair(const Image& frame_a, const Image& frame_b, const PyramidSpec& spec,
                           const RobustLossParams& loss) {
  if (frame_a.height() != frame_b.height() || frame_a.width() != frame_b.width())
    throw InputError("frame dimensions differ");
  return estimate_pair(FramePyramid(frame_a, spec), FramePyramid(frame_b, spec), spec, loss);
}

WindowEstimate estimate_window(const std::vector<FramePyramid>& pyramids, int center, int radius,
                               const PyramidSpec& spec, const RobustLossParams& loss, int threads) {
  const int t = static_cast<int>(pyramids.size());
  if (center < 0 || center >= t) throw InputError("window center out of range");
  if (radius < 0) throw InputError("window radius must be non-negative");
  const int first = std::max(0, center - radius);
  const int last = std::min(t - 1, center + radius);
  const GridSpec grid = GridSpec::for_image(pyramids[center].height, pyramids[center].width, spec.grid);

  std::vector<int> others;
  for (int j = first; j <= last; ++j)
    if (j != center) others.push_back(j);
  std::vector<std::optional<DctCoeffs>> results(others.size());
  parallel_for(others.size(), threads, [&](size_t k) {
    try {
      results[k] = estimate_pair(pyramids[center], pyramids[others[k]], spec, loss).coeffs;
    } catch (const std::exception&) {
      results[k].reset();
    }
  });

  WindowEstimate out;
  out.coeffs.emplace(center, DctCoeffs(spec.final_cutoff(), grid));
  for (size_t k = 0; k < others.size(); ++k) {
    if (results[k])
      out.coeffs.emplace(others[k], *results[k]);
    else
      out.failed.push_back(others[k]);
  }
  return out;
}

}  // namespace dctstab
