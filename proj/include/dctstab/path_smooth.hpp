#pragma once

#include <array>
#include <vector>

#include "dctstab/similarity.hpp"

namespace dctstab {

using ParamVector = std::array<double, SimilarityParams::kCount>;

/// Slack bounds xi_k = lambda_k * z.
struct SlackConfig {
  ParamVector lambda{};
  double z = 0.0;
  ParamVector xi{};

  static SlackConfig make(const ParamVector& lambda, double z);
};

struct QpSettings {
  double fidelity_eps = 1e-6;
  double tol = 1e-8;
  int max_iters = 5000;
};

struct SlackScales {
  ParamVector lambda{};
  /// Set when the sequence was shorter than the window and a single global
  /// standard deviation was used instead.
  bool used_global_std = false;
};

/// Mean, over all full sliding windows, of the sample standard deviation of
/// each parameter.
SlackScales compute_slack_scales(const ParamSequence& alpha, int window = 9);

struct QpReport {
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = true;
};

/// Box-constrained second-difference smoothing of one scalar sequence:
///   min sum (b[i+1] - 2 b[i] + b[i-1])^2 + eps * sum (b[i] - a[i])^2
///   s.t. |b[i] - a[i]| <= xi.
std::vector<double> solve_box_qp(const std::vector<double>& alpha, double xi,
                                 const QpSettings& settings, QpReport* report = nullptr);

/// Objective of solve_box_qp at `beta`.
double qp_objective(const std::vector<double>& alpha, const std::vector<double>& beta,
                    double fidelity_eps);

/// Sum of squared second differences.
double second_difference_energy(const std::vector<double>& seq);

/// The four independent scalar problems.
ParamSequence solve_qp(const ParamSequence& alpha, const ParamVector& xi, const QpSettings& settings,
                       QpReport* report = nullptr);

std::vector<double> component(const ParamSequence& seq, int k);

/// Warps that make the stabilized inter-frame motion equal beta:
/// w_0 = identity, w_{i+1} = alpha_i^-1 o w_i o beta_i (beta applied first).
std::vector<SimilarityParams> accumulate_warps(const ParamSequence& alpha, const ParamSequence& beta);

struct CropProbe {
  double z = 0.0;
  double min_crop = 1.0;
  bool feasible = true;
};

struct CropLimitedPath {
  ParamSequence beta;
  ParamSequence gamma;
  SlackConfig slack;
  std::vector<SimilarityParams> warps;
  double min_crop = 1.0;
  std::vector<CropProbe> probes;
  /// Smallest probed z above the returned one (infeasible), or NaN when z = 1 was feasible.
  double next_infeasible_z = 0.0;
  QpReport qp;
};

/// Largest z in [0,1] (20 bisection steps) whose warps keep every frame's
/// crop ratio at or above `kappa`.
CropLimitedPath smooth_with_crop_limit(const ParamSequence& alpha, double kappa, int frame_h,
                                       int frame_w, const QpSettings& settings = {},
                                       int slack_window = 9);

}  // namespace dctstab
