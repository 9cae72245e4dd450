#pragma once

#include <utility>
#include <vector>

#include "dctstab/dct_basis.hpp"

namespace dctstab {

/// Shape and scale of the general robust loss.
///   rho(x) = |a-2|/a * (((x/c)^2 / |a-2| + 1)^(a/2) - 1)
/// `quadratic` replaces rho by x^2 / (2 c^2) (the a -> 2 limit); test hook.
struct RobustLossParams {
  double shape = -0.1;
  double scale = 0.5;
  bool quadratic = false;

  void validate() const;

  /// Flow-residual default: c in pixels at grid scale.
  static RobustLossParams flow_default() { return {-0.1, 0.5, false}; }
  /// Intensity-residual default for direct alignment, intensities in [0,1].
  static RobustLossParams photometric_default() { return {-0.1, 0.05, false}; }
};

double barron_loss(double x, const RobustLossParams& params);

/// IRLS weight rho'(x) / x; 1/c^2 at x = 0.
double barron_weight(double x, const RobustLossParams& params);

/// Loss and weight together, sharing one power evaluation.
std::pair<double, double> barron_loss_and_weight(double x, const RobustLossParams& params);

struct IrlsReport {
  int iterations = 0;
  double final_objective = 0.0;
  bool converged = false;
  std::vector<double> objective_trace;
  /// Per grid-sample weights of the final iterate, normalised to (0,1].
  Eigen::MatrixXd weights;
};

/// Robust fit of DCT coefficients to a dense flow by IRLS on the grid.
/// Runs over rising cutoffs (DC only first, then R/4, R/2, 3R/4, R), each
/// stage starting from the previous one. A stage stops when the relative
/// coefficient change drops below 1e-6 or after 50 iterations; its best
/// iterate is kept.
std::pair<DctCoeffs, IrlsReport> project_robust(const FlowField& flow, int cutoff,
                                                const GridSpec& grid,
                                                const RobustLossParams& params);

}  // namespace dctstab
