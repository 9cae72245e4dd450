#include <doctest.h>

#include <random>

#include "dctstab/error.hpp"
#include "dctstab/path_smooth.hpp"
#include "dctstab/warp_crop.hpp"
#include "oracles.hpp"

using namespace dctstab;

namespace {

ParamSequence jitter_sequence(int n, uint64_t seed, double amp_r, double amp_t) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ParamSequence alpha(n);
  for (auto& a : alpha) a = {amp_r * u(rng), amp_r * u(rng), amp_t * u(rng), amp_t * u(rng)};
  return alpha;
}

}  // namespace

TEST_CASE("slack scales of constant and alternating sequences") {
  ParamSequence alpha(20, SimilarityParams{0.1, 0.0, 2.0, -1.0});
  const SlackScales flat = compute_slack_scales(alpha);
  for (double l : flat.lambda) CHECK(l == doctest::Approx(0.0).scale(1).epsilon(1e-15));
  for (size_t i = 0; i < alpha.size(); ++i) alpha[i].tx = i % 2 ? -1.0 : 1.0;
  const SlackScales alt = compute_slack_scales(alpha, 9);
  // Nine alternating +-1 values: mean +-1/9, squared deviations sum to 9 - 1/9.
  const double expected = std::sqrt((9.0 - 1.0 / 9.0) / 8.0);
  CHECK(alt.lambda[2] == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(1.05409).epsilon(1e-5));
  CHECK_FALSE(alt.used_global_std);
}

TEST_CASE("short sequences fall back to a global standard deviation") {
  const ParamSequence alpha = {{0, 0, 1, 0}, {0, 0, -1, 0}, {0, 0, 1, 0}};
  const SlackScales s = compute_slack_scales(alpha, 9);
  CHECK(s.used_global_std);
  CHECK(s.lambda[2] == doctest::Approx(std::sqrt(4.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("box QP small cases") {
  QpSettings qs;
  const std::vector<double> a = {0.0, 1.0, 0.0};
  const std::vector<double> loose = solve_box_qp(a, 1.0, qs);
  for (double b : loose) CHECK(b == doctest::Approx(1.0 / 3.0).epsilon(1e-3));
  const std::vector<double> tight = solve_box_qp(a, 0.5, qs);
  for (double b : tight) CHECK(b == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(solve_box_qp(a, 0.0, qs) == a);
  const std::vector<double> flat = {2.0, 2.0, 2.0, 2.0};
  for (double b : solve_box_qp(flat, 1.0, qs)) CHECK(b == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("box QP matches exhaustive active-set enumeration") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> len(3, 8);
  QpSettings qs;
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> a(len(rng));
    for (double& v : a) v = u(rng);
    const double xi = 0.05 + 0.5 * (u(rng) + 1.0);
    QpReport rep;
    const std::vector<double> b = solve_box_qp(a, xi, qs, &rep);
    const std::vector<double> ref = oracle::box_qp_exhaustive(a, xi, qs.fidelity_eps);
    CHECK(rep.converged);
    CHECK(qp_objective(a, b, qs.fidelity_eps) == doctest::Approx(qp_objective(a, ref, qs.fidelity_eps)).epsilon(1e-6).scale(1));
    for (size_t i = 0; i < a.size(); ++i) CHECK(std::abs(b[i] - a[i]) <= xi + 1e-12);
  }
}

TEST_CASE("box QP on a long sequence respects the box and smooths") {
  const ParamSequence alpha = jitter_sequence(200, 3, 0.01, 5.0);
  const std::vector<double> a = component(alpha, 2);
  const std::vector<double> b = solve_box_qp(a, 2.0, {});
  for (size_t i = 0; i < a.size(); ++i) CHECK(std::abs(b[i] - a[i]) <= 2.0 + 1e-12);
  CHECK(second_difference_energy(b) < 0.5 * second_difference_energy(a));
  const std::vector<double> loose = solve_box_qp(a, 5.0, {});
  CHECK(second_difference_energy(loose) < 1e-6 * second_difference_energy(a));
}

TEST_CASE("accumulated warps make the stabilized motion equal beta") {
  const ParamSequence alpha = jitter_sequence(12, 5, 0.02, 6.0);
  const ParamSequence beta = jitter_sequence(12, 6, 0.01, 3.0);
  const std::vector<SimilarityParams> w = accumulate_warps(alpha, beta);
  REQUIRE(w.size() == 13);
  CHECK(w[0] == SimilarityParams{});
  const Eigen::Vector2d c(159.5, 119.5);
  for (size_t i = 0; i < alpha.size(); ++i)
    for (const Eigen::Vector2d p : {Eigen::Vector2d(0, 0), Eigen::Vector2d(300, 17), Eigen::Vector2d(50, 200)}) {
      // frame_{i+1}(q) = frame_i(alpha_i(q)); stabilized_i(p) = frame_i(w_i(p)).
      const Eigen::Vector2d lhs = alpha[i].apply(w[i + 1].apply(p, c), c);
      const Eigen::Vector2d rhs = w[i].apply(beta[i].apply(p, c), c);
      CHECK((lhs - rhs).norm() < 1e-9);
    }
}

TEST_CASE("crop limit of one keeps the input path") {
  const ParamSequence alpha = jitter_sequence(30, 9, 0.01, 4.0);
  const CropLimitedPath p = smooth_with_crop_limit(alpha, 1.0, 240, 320);
  CHECK(p.slack.z == 0.0);
  CHECK(p.min_crop == 1.0);
  for (size_t i = 0; i < alpha.size(); ++i) CHECK(p.beta[i] == alpha[i]);
  for (const auto& w : p.warps) CHECK(w == SimilarityParams{});
}

TEST_CASE("a smooth path needs no correction") {
  const ParamSequence alpha(30, SimilarityParams{0.001, 0.0, 1.5, -0.5});
  const CropLimitedPath p = smooth_with_crop_limit(alpha, 0.8, 240, 320);
  for (const auto& g : p.gamma)
    for (int k = 0; k < 4; ++k) CHECK(std::abs(g[k]) < 1e-9);
  CHECK(p.min_crop == doctest::Approx(1.0));
}

TEST_CASE("crop-limit search contract on jittery paths") {
  int bisected = 0;
  for (uint64_t seed : {1, 2, 3, 4}) {
    const ParamSequence alpha = jitter_sequence(59, seed, 0.03, 16.0);
    const CropLimitedPath p = smooth_with_crop_limit(alpha, 0.8, 240, 320);
    CHECK(p.min_crop >= 0.79);
    CHECK(p.min_crop <= 1.0);
    double recomputed = 1.0;
    for (const auto& w : p.warps) recomputed = std::min(recomputed, crop_ratio(w, 240, 320));
    CHECK(recomputed == doctest::Approx(p.min_crop).epsilon(1e-12));
    REQUIRE(!p.probes.empty());
    CHECK(p.probes.front().z == 1.0);
    if (p.slack.z == 1.0) {
      CHECK(std::isnan(p.next_infeasible_z));
      CHECK(p.probes.size() == 1);
      continue;
    }
    ++bisected;
    CHECK(p.probes.size() == 21);
    bool found = false;
    for (const CropProbe& probe : p.probes)
      if (probe.z == p.next_infeasible_z) {
        found = true;
        CHECK_FALSE(probe.feasible);
        CHECK(probe.min_crop < 0.8);
      }
    CHECK(found);
    CHECK(p.next_infeasible_z > p.slack.z);
    CHECK(p.next_infeasible_z - p.slack.z < 2e-6);
  }
  CHECK(bisected >= 2);
}

TEST_CASE("loose slack turns alternating jitter into its least-squares line") {
  ParamSequence alpha(40);
  for (size_t i = 0; i < alpha.size(); ++i) alpha[i].tx = i % 2 ? -2.0 : 2.0;
  const std::vector<double> a = component(alpha, 2);
  const std::vector<double> b = solve_box_qp(a, 2.5, {});
  const std::vector<double> line = oracle::ls_line(a);
  for (size_t i = 0; i < b.size(); ++i) CHECK(b[i] == doctest::Approx(line[i]).epsilon(1e-3).scale(1));
}

TEST_CASE("invalid crop limits are rejected") {
  const ParamSequence alpha(5);
  CHECK_THROWS_AS(smooth_with_crop_limit(alpha, 0.0, 240, 320), InputError);
  CHECK_THROWS_AS(smooth_with_crop_limit(alpha, 1.5, 240, 320), InputError);
  CHECK_THROWS_AS(solve_box_qp({1.0, 2.0}, -1.0, {}), InputError);
}
