#include "dctstab/robust_fit.hpp"

#include <cmath>

#include "dctstab/error.hpp"

namespace dctstab {

void RobustLossParams::validate() const {
  if (!(scale > 0.0)) throw InputError("robust loss scale must be positive");
  if (!quadratic && (shape >= 2.0 || shape == 0.0))
    throw InputError("robust loss shape must be < 2 and non-zero");
}

double barron_loss(double x, const RobustLossParams& p) {
  const double z = x / p.scale;
  if (p.quadratic) return 0.5 * z * z;
  const double b = std::abs(p.shape - 2.0);
  return b / p.shape * (std::pow(z * z / b + 1.0, p.shape / 2.0) - 1.0);
}

double barron_weight(double x, const RobustLossParams& p) {
  const double c2 = p.scale * p.scale;
  if (p.quadratic) return 1.0 / c2;
  const double b = std::abs(p.shape - 2.0);
  return std::pow(x * x / (c2 * b) + 1.0, p.shape / 2.0 - 1.0) / c2;
}

std::pair<double, double> barron_loss_and_weight(double x, const RobustLossParams& p) {
  const double c2 = p.scale * p.scale;
  if (p.quadratic) return {0.5 * x * x / c2, 1.0 / c2};
  const double b = std::abs(p.shape - 2.0);
  const double base = x * x / (c2 * b) + 1.0;
  const double power = std::pow(base, p.shape / 2.0);
  return {b / p.shape * (power - 1.0), power / base / c2};
}

namespace {

double grid_objective(const GridSamples& s, const Eigen::MatrixXd& fu, const Eigen::MatrixXd& fv,
                      const RobustLossParams& params, Eigen::MatrixXd* weights) {
  double total = 0.0;
  for (Eigen::Index x = 0; x < s.u.cols(); ++x) {
    for (Eigen::Index y = 0; y < s.u.rows(); ++y) {
      if (s.mask(y, x) == 0.0) {
        if (weights) (*weights)(y, x) = 0.0;
        continue;
      }
      const double r = std::hypot(s.u(y, x) - fu(y, x), s.v(y, x) - fv(y, x));
      total += barron_loss(r, params);
      if (weights) (*weights)(y, x) = barron_weight(r, params);
    }
  }
  return total;
}

}  // namespace

std::pair<DctCoeffs, IrlsReport> project_robust(const FlowField& flow, int cutoff,
                                                const GridSpec& grid,
                                                const RobustLossParams& params) {
  params.validate();
  grid.validate();
  if (2 * flow.valid_count() < flow.valid.size())
    throw InputError("flow has more than 50% invalid pixels");

  constexpr int kMaxIterations = 50;
  constexpr double kRelTol = 1e-6;

  const GridSamples s = resample_to_grid(flow, grid);
  const Eigen::MatrixXd by = sampled_basis(cutoff, grid.grid_h, grid.grid_h, grid.grid_h);
  const Eigen::MatrixXd bx = sampled_basis(cutoff, grid.grid_w, grid.grid_w, grid.grid_w);
  // Cutoff continuation 0, R/4, R/2, 3R/4, R; each stage warm-starts from the last.
  std::vector<int> schedule = {0};
  for (int r : {cutoff / 4, cutoff / 2, (3 * cutoff) / 4, cutoff})
    if (r > schedule.back()) schedule.push_back(r);

  IrlsReport report;
  Eigen::MatrixXd fu, fv;
  Eigen::MatrixXd weights(grid.grid_h, grid.grid_w);
  DctCoeffs theta = weighted_grid_fit(s.u, s.v, s.mask, 0, grid);
  DctCoeffs best;
  Eigen::MatrixXd best_weights;
  double best_objective = 0.0;
  for (size_t stage = 0; stage < schedule.size(); ++stage) {
    theta = truncate(theta, schedule[stage]);
    const Eigen::MatrixXd by_s = by.leftCols(schedule[stage] + 1);
    const Eigen::MatrixXd bx_s = bx.leftCols(schedule[stage] + 1);
    auto objective_of = [&](const DctCoeffs& c) {
      fu = by_s * c.coeff_x * bx_s.transpose();
      fv = by_s * c.coeff_y * bx_s.transpose();
      return grid_objective(s, fu, fv, params, &weights);
    };
    double objective = objective_of(theta);
    if (stage == 0) report.objective_trace.push_back(objective);
    best = theta;
    best_weights = weights;
    best_objective = objective;
    const bool last = stage + 1 == schedule.size();
    report.converged = false;

    for (int it = 1; it <= kMaxIterations; ++it) {
      ++report.iterations;
      const DctCoeffs next = weighted_grid_fit(s.u, s.v, weights, schedule[stage], grid);
      const double change = std::sqrt((next - theta).squared_norm());
      const double size = std::sqrt(theta.squared_norm());
      theta = next;
      objective = objective_of(theta);
      report.objective_trace.push_back(objective);
      if (objective <= best_objective) {
        best = theta;
        best_weights = weights;
        best_objective = objective;
      }
      if (change <= kRelTol * std::max(size, 1e-12) || change == 0.0) {
        report.converged = true;
        break;
      }
    }
    theta = best;
    if (last) break;
  }
  report.final_objective = best_objective;
  report.weights = best_weights * (params.scale * params.scale);
  return {best, report};
}

}  // namespace dctstab
