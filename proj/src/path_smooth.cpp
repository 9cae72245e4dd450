#include "dctstab/path_smooth.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <Eigen/SparseCore>
#include <cmath>
#include <limits>

#include "dctstab/error.hpp"
#include "dctstab/warp_crop.hpp"

namespace dctstab {

SlackConfig SlackConfig::make(const ParamVector& lambda, double z) {
  if (z < 0.0 || z > 1.0) throw InputError("slack multiplier z must lie in [0,1]");
  SlackConfig c;
  c.lambda = lambda;
  c.z = z;
  for (int k = 0; k < SimilarityParams::kCount; ++k) {
    if (lambda[k] < 0.0) throw InputError("slack scales must be non-negative");
    c.xi[k] = lambda[k] * z;
  }
  return c;
}

std::vector<double> component(const ParamSequence& seq, int k) {
  std::vector<double> out(seq.size());
  for (size_t i = 0; i < seq.size(); ++i) out[i] = seq[i][k];
  return out;
}

namespace {

double sample_std(const double* v, int n) {
  if (n < 2) return 0.0;
  double mean = 0.0;
  for (int i = 0; i < n; ++i) mean += v[i];
  mean /= n;
  double ss = 0.0;
  for (int i = 0; i < n; ++i) ss += (v[i] - mean) * (v[i] - mean);
  return std::sqrt(ss / (n - 1));
}

}  // namespace

SlackScales compute_slack_scales(const ParamSequence& alpha, int window) {
  if (alpha.empty()) throw InputError("empty parameter sequence");
  if (window < 2) throw InputError("slack window must be at least 2");
  SlackScales out;
  const int n = static_cast<int>(alpha.size());
  for (int k = 0; k < SimilarityParams::kCount; ++k) {
    const std::vector<double> v = component(alpha, k);
    if (n < window) {
      out.lambda[k] = sample_std(v.data(), n);
      out.used_global_std = true;
      continue;
    }
    double acc = 0.0;
    for (int start = 0; start + window <= n; ++start) acc += sample_std(v.data() + start, window);
    out.lambda[k] = acc / (n - window + 1);
  }
  return out;
}

double second_difference_energy(const std::vector<double>& seq) {
  double e = 0.0;
  for (size_t i = 1; i + 1 < seq.size(); ++i) {
    const double d = seq[i + 1] - 2.0 * seq[i] + seq[i - 1];
    e += d * d;
  }
  return e;
}

double qp_objective(const std::vector<double>& alpha, const std::vector<double>& beta,
                    double fidelity_eps) {
  double fid = 0.0;
  for (size_t i = 0; i < alpha.size(); ++i) fid += (beta[i] - alpha[i]) * (beta[i] - alpha[i]);
  return second_difference_energy(beta) + fidelity_eps * fid;
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;

// Hessian of the objective: 2 (D2^T D2 + eps I), pentadiagonal.
SpMat qp_hessian(int n, double eps) {
  std::vector<Eigen::Triplet<double>> trips;
  SpMat d(n - 2, n);
  for (int i = 0; i + 2 < n; ++i) {
    trips.emplace_back(i, i, 1.0);
    trips.emplace_back(i, i + 1, -2.0);
    trips.emplace_back(i, i + 2, 1.0);
  }
  d.setFromTriplets(trips.begin(), trips.end());
  SpMat id(n, n);
  id.setIdentity();
  SpMat p = 2.0 * (SpMat(d.transpose() * d) + eps * id);
  p.makeCompressed();
  return p;
}

struct BoxQp {
  const SpMat& p;
  Eigen::VectorXd q;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  Eigen::VectorXd clip(const Eigen::VectorXd& x) const { return x.cwiseMax(lo).cwiseMin(hi); }

  double kkt_residual(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd g = p * x + q;
    return (x - clip(x - g)).lpNorm<Eigen::Infinity>();
  }
};

enum class Bound : char { kFree, kLower, kUpper };

// Primal-dual active-set refinement started from an approximate solution.
// Returns true when the result satisfies the KKT conditions to `tol`.
bool polish(const BoxQp& qp, Eigen::VectorXd& x, double tol) {
  const int n = static_cast<int>(x.size());
  const Eigen::VectorXd diag = qp.p.diagonal();
  std::vector<Bound> sets(n, Bound::kFree);
  for (int round = 0; round < 30; ++round) {
    const Eigen::VectorXd g = qp.p * x + qp.q;
    std::vector<Bound> next(n);
    for (int i = 0; i < n; ++i) {
      const double trial = x(i) - g(i) / diag(i);
      next[i] = trial <= qp.lo(i) ? Bound::kLower : trial >= qp.hi(i) ? Bound::kUpper : Bound::kFree;
    }
    if (round > 0 && next == sets) break;
    sets = next;

    std::vector<int> free_idx;
    std::vector<int> pos(n, -1);
    Eigen::VectorXd fixed = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
      if (sets[i] == Bound::kFree) {
        pos[i] = static_cast<int>(free_idx.size());
        free_idx.push_back(i);
      } else {
        fixed(i) = sets[i] == Bound::kLower ? qp.lo(i) : qp.hi(i);
      }
    }
    Eigen::VectorXd next_x = fixed;
    if (!free_idx.empty()) {
      const int m = static_cast<int>(free_idx.size());
      const Eigen::VectorXd rhs_full = -(qp.q + qp.p * fixed);
      std::vector<Eigen::Triplet<double>> trips;
      for (int col = 0; col < qp.p.outerSize(); ++col) {
        if (pos[col] < 0) continue;
        for (SpMat::InnerIterator it(qp.p, col); it; ++it)
          if (pos[it.row()] >= 0) trips.emplace_back(pos[it.row()], pos[col], it.value());
      }
      SpMat pf(m, m);
      pf.setFromTriplets(trips.begin(), trips.end());
      Eigen::VectorXd rhs(m);
      for (int j = 0; j < m; ++j) rhs(j) = rhs_full(free_idx[j]);
      Eigen::SimplicialLDLT<SpMat> solver(pf);
      if (solver.info() != Eigen::Success) return false;
      const Eigen::VectorXd xf = solver.solve(rhs);
      for (int j = 0; j < m; ++j) next_x(free_idx[j]) = xf(j);
    }
    x = qp.clip(next_x);
  }
  return qp.kkt_residual(x) <= tol;
}

/// Solves P_ff x_f = -(q + P x_fixed) over the free indices.
Eigen::VectorXd solve_free(const BoxQp& qp, const Eigen::VectorXd& x, const std::vector<Bound>& sets) {
  const int n = static_cast<int>(x.size());
  std::vector<int> free_idx;
  std::vector<int> pos(n, -1);
  Eigen::VectorXd out = x;
  for (int i = 0; i < n; ++i)
    if (sets[i] == Bound::kFree) {
      pos[i] = static_cast<int>(free_idx.size());
      free_idx.push_back(i);
      out(i) = 0.0;
    }
  if (free_idx.empty()) return out;
  const int m = static_cast<int>(free_idx.size());
  const Eigen::VectorXd rhs_full = -(qp.q + qp.p * out);
  std::vector<Eigen::Triplet<double>> trips;
  for (int col = 0; col < qp.p.outerSize(); ++col) {
    if (pos[col] < 0) continue;
    for (SpMat::InnerIterator it(qp.p, col); it; ++it)
      if (pos[it.row()] >= 0) trips.emplace_back(pos[it.row()], pos[col], it.value());
  }
  SpMat pf(m, m);
  pf.setFromTriplets(trips.begin(), trips.end());
  Eigen::VectorXd rhs(m);
  for (int j = 0; j < m; ++j) rhs(j) = rhs_full(free_idx[j]);
  Eigen::SimplicialLDLT<SpMat> solver(pf);
  if (solver.info() != Eigen::Success) throw ProcessingError("singular reduced QP system");
  const Eigen::VectorXd xf = solver.solve(rhs);
  for (int j = 0; j < m; ++j) out(free_idx[j]) = xf(j);
  return out;
}

/// Primal active-set method from a feasible start. Monotone, so it ends at
/// the exact minimizer up to rounding; returns false if the cap is hit.
bool primal_active_set(const BoxQp& qp, Eigen::VectorXd& x) {
  const int n = static_cast<int>(x.size());
  x = qp.clip(x);
  std::vector<Bound> sets(n, Bound::kFree);
  for (int i = 0; i < n; ++i)
    if (x(i) <= qp.lo(i)) sets[i] = Bound::kLower;
    else if (x(i) >= qp.hi(i)) sets[i] = Bound::kUpper;
  const double scale = std::max({1.0, qp.lo.cwiseAbs().maxCoeff(), qp.hi.cwiseAbs().maxCoeff()});
  const double step_tol = 1e-14 * scale;
  const double mult_tol = 1e-13 * scale;
  for (int iter = 0; iter < 10 * n + 100; ++iter) {
    const Eigen::VectorXd target = solve_free(qp, x, sets);
    const Eigen::VectorXd dir = target - x;
    if (dir.lpNorm<Eigen::Infinity>() <= step_tol) {
      x = target;
      const Eigen::VectorXd g = qp.p * x + qp.q;
      int worst = -1;
      double worst_mult = mult_tol;
      for (int i = 0; i < n; ++i) {
        const double m = sets[i] == Bound::kLower ? -g(i) : sets[i] == Bound::kUpper ? g(i) : 0.0;
        if (m > worst_mult) {
          worst_mult = m;
          worst = i;
        }
      }
      if (worst < 0) return true;
      sets[worst] = Bound::kFree;
      continue;
    }
    double t = 1.0;
    int blocking = -1;
    for (int i = 0; i < n; ++i) {
      if (sets[i] != Bound::kFree) continue;
      double ti = 1.0;
      if (dir(i) < 0.0) ti = (qp.lo(i) - x(i)) / dir(i);
      else if (dir(i) > 0.0) ti = (qp.hi(i) - x(i)) / dir(i);
      if (ti < t) {
        t = std::max(ti, 0.0);
        blocking = i;
      }
    }
    x += t * dir;
    if (blocking >= 0) {
      sets[blocking] = dir(blocking) < 0.0 ? Bound::kLower : Bound::kUpper;
      x(blocking) = sets[blocking] == Bound::kLower ? qp.lo(blocking) : qp.hi(blocking);
    }
    x = qp.clip(x);
  }
  return false;
}

}  // namespace

std::vector<double> solve_box_qp(const std::vector<double>& alpha, double xi,
                                 const QpSettings& settings, QpReport* report) {
  if (xi < 0.0) throw InputError("slack bound must be non-negative");
  if (!(settings.fidelity_eps > 0.0) || !(settings.tol > 0.0))
    throw InputError("QP settings must be positive");
  QpReport local;
  QpReport& rep = report ? *report : local;
  rep = {};
  const int n = static_cast<int>(alpha.size());
  if (xi == 0.0 || n < 3) return alpha;

  const Eigen::Map<const Eigen::VectorXd> a(alpha.data(), n);
  const SpMat p = qp_hessian(n, settings.fidelity_eps);
  BoxQp qp{p, -2.0 * settings.fidelity_eps * a, a.array() - xi, a.array() + xi};

  // ADMM on x = z, z in box; the linear system is factored once.
  constexpr double kRho = 1.0;
  SpMat lhs = p;
  for (int i = 0; i < n; ++i) lhs.coeffRef(i, i) += kRho;
  const Eigen::SimplicialLLT<SpMat> factor(lhs);

  Eigen::VectorXd z = a;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd best = z;
  double best_res = qp.kkt_residual(z);
  for (int it = 1; it <= settings.max_iters; ++it) {
    const Eigen::VectorXd x = factor.solve(kRho * (z - u) - qp.q);
    z = qp.clip(x + u);
    u += x - z;
    rep.iterations = it;
    if (it == 1 || it % 25 == 0) {
      Eigen::VectorXd candidate = z;
      const bool ok = polish(qp, candidate, settings.tol);
      const double res = qp.kkt_residual(candidate);
      if (res < best_res) {
        best_res = res;
        best = candidate;
      }
      if (ok) break;
    }
    const double res = qp.kkt_residual(z);
    if (res < best_res) {
      best_res = res;
      best = z;
    }
    if (best_res <= settings.tol) break;
  }
  Eigen::VectorXd exact = best;
  if (primal_active_set(qp, exact) && qp.kkt_residual(exact) <= std::max(best_res, settings.tol)) {
    best = exact;
    best_res = qp.kkt_residual(exact);
  }
  rep.kkt_residual = best_res;
  rep.converged = best_res <= settings.tol;
  return {best.data(), best.data() + n};
}

ParamSequence solve_qp(const ParamSequence& alpha, const ParamVector& xi, const QpSettings& settings,
                       QpReport* report) {
  ParamSequence beta(alpha.size());
  QpReport worst;
  for (int k = 0; k < SimilarityParams::kCount; ++k) {
    QpReport rep;
    const std::vector<double> b = solve_box_qp(component(alpha, k), xi[k], settings, &rep);
    for (size_t i = 0; i < b.size(); ++i) beta[i][k] = b[i];
    worst.iterations = std::max(worst.iterations, rep.iterations);
    worst.kkt_residual = std::max(worst.kkt_residual, rep.kkt_residual);
    worst.converged = worst.converged && rep.converged;
  }
  if (report) *report = worst;
  return beta;
}

std::vector<SimilarityParams> accumulate_warps(const ParamSequence& alpha, const ParamSequence& beta) {
  if (alpha.size() != beta.size()) throw InputError("alpha and beta lengths differ");
  std::vector<SimilarityParams> warps(alpha.size() + 1);
  for (size_t i = 0; i < alpha.size(); ++i)
    warps[i + 1] = compose(compose(beta[i], warps[i]), invert(alpha[i]));
  return warps;
}

namespace {

struct ProbeResult {
  ParamSequence beta;
  std::vector<SimilarityParams> warps;
  double min_crop = 1.0;
  QpReport qp;
};

ProbeResult probe(const ParamSequence& alpha, const ParamVector& lambda, double z, int h, int w,
                  const QpSettings& settings) {
  ProbeResult r;
  const SlackConfig slack = SlackConfig::make(lambda, z);
  r.beta = solve_qp(alpha, slack.xi, settings, &r.qp);
  r.warps = accumulate_warps(alpha, r.beta);
  for (const auto& warp : r.warps) r.min_crop = std::min(r.min_crop, crop_ratio(warp, h, w));
  return r;
}

}  // namespace

CropLimitedPath smooth_with_crop_limit(const ParamSequence& alpha, double kappa, int frame_h,
                                       int frame_w, const QpSettings& settings, int slack_window) {
  if (!(kappa > 0.0 && kappa <= 1.0)) throw InputError("crop limit must lie in (0,1]");
  if (alpha.empty()) throw InputError("empty parameter sequence");
  // Crop ratios come from a 40-step bisection; allow for its resolution.
  constexpr double kCropSlack = 1e-9;
  const ParamVector lambda = compute_slack_scales(alpha, slack_window).lambda;

  CropLimitedPath out;
  auto accept = [&](double z, ProbeResult&& r) {
    out.slack = SlackConfig::make(lambda, z);
    out.beta = std::move(r.beta);
    out.warps = std::move(r.warps);
    out.min_crop = r.min_crop;
    out.qp = r.qp;
  };
  // z = 0 keeps beta = alpha and identity warps.
  accept(0.0, {alpha, std::vector<SimilarityParams>(alpha.size() + 1), 1.0, {}});

  ProbeResult full = probe(alpha, lambda, 1.0, frame_h, frame_w, settings);
  const bool full_ok = full.min_crop >= kappa - kCropSlack;
  out.probes.push_back({1.0, full.min_crop, full_ok});
  if (full_ok) {
    accept(1.0, std::move(full));
    out.next_infeasible_z = std::numeric_limits<double>::quiet_NaN();
  } else {
    double lo = 0.0, hi = 1.0;
    constexpr int kSteps = 20;
    for (int step = 0; step < kSteps; ++step) {
      const double mid = 0.5 * (lo + hi);
      ProbeResult r = probe(alpha, lambda, mid, frame_h, frame_w, settings);
      const bool ok = r.min_crop >= kappa - kCropSlack;
      out.probes.push_back({mid, r.min_crop, ok});
      if (ok) {
        lo = mid;
        accept(mid, std::move(r));
      } else {
        hi = mid;
      }
    }
    out.next_infeasible_z = hi;
  }
  out.gamma.resize(alpha.size());
  for (size_t i = 0; i < alpha.size(); ++i)
    for (int k = 0; k < SimilarityParams::kCount; ++k) out.gamma[i][k] = out.beta[i][k] - alpha[i][k];
  return out;
}

}  // namespace dctstab
