#include "dctstab/metrics.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <complex>
#include <numbers>

#include "dctstab/error.hpp"
#include "dctstab/parallel.hpp"

namespace dctstab {

std::vector<DctCoeffs> consecutive_flows(const FrameSequence& video, const MetricsConfig& config) {
  const size_t t = video.size();
  std::vector<FramePyramid> pyr(t);
  parallel_for(t, config.threads, [&](size_t i) { pyr[i] = FramePyramid(video[i].luma(), config.pyramid); });
  std::vector<DctCoeffs> flows(t > 0 ? t - 1 : 0);
  parallel_for(flows.size(), config.threads, [&](size_t i) {
    flows[i] = estimate_pair(pyr[i], pyr[i + 1], config.pyramid, config.photometric).coeffs;
  });
  return flows;
}

double low_frequency_ratio(const std::vector<double>& seq, int kept_bins) {
  const size_t n = seq.size();
  if (n == 0) return 1.0;
  double mean = 0.0;
  for (double v : seq) mean += v;
  mean /= static_cast<double>(n);
  double energy = 0.0;
  for (double v : seq) energy += (v - mean) * (v - mean);
  if (energy < 1e-12) return 1.0;

  double total = 0.0;
  double low = 0.0;
  for (size_t k = 1; k < n; ++k) {
    std::complex<double> x = 0.0;
    for (size_t i = 0; i < n; ++i)
      x += (seq[i] - mean) * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * i % n) / n);
    const double e = std::norm(x);
    total += e;
    if (static_cast<int>(std::min(k, n - k)) <= kept_bins) low += e;
  }
  return total > 0.0 ? std::sqrt(low / total) : 1.0;
}

double stability_from_params(const ParamSequence& params, std::vector<double>* per_param) {
  double result = 1.0;
  if (per_param) per_param->clear();
  for (int k = 0; k < SimilarityParams::kCount; ++k) {
    std::vector<double> seq(params.size());
    for (size_t i = 0; i < params.size(); ++i) seq[i] = params[i][k];
    const double ratio = low_frequency_ratio(seq);
    if (per_param) per_param->push_back(ratio);
    result = std::min(result, ratio);
  }
  return std::clamp(result, 0.0, 1.0);
}

double stability(const FrameSequence& video, const MetricsConfig& config, std::vector<double>* per_param) {
  if (video.size() < 8) throw InputError("stability needs at least 8 frames");
  const std::vector<DctCoeffs> flows = consecutive_flows(video, config);
  ParamSequence params(flows.size());
  for (size_t i = 0; i < flows.size(); ++i) params[i] = fit_similarity(flows[i], config.flow_loss);
  return stability_from_params(params, per_param);
}

namespace {

// Valid-mode separable filtering with the 11-tap SSIM window.
Eigen::MatrixXd filter_valid(const Eigen::MatrixXd& img, const std::vector<double>& k) {
  const Eigen::Index r = static_cast<Eigen::Index>(k.size());
  const Eigen::Index h = img.rows() - r + 1;
  const Eigen::Index w = img.cols() - r + 1;
  Eigen::MatrixXd tmp = Eigen::MatrixXd::Zero(img.rows(), w);
  for (Eigen::Index i = 0; i < r; ++i) tmp += k[i] * img.middleCols(i, w);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(h, w);
  for (Eigen::Index i = 0; i < r; ++i) out += k[i] * tmp.middleRows(i, h);
  return out;
}

Eigen::MatrixXd to_matrix(const Image& img) {
  Eigen::MatrixXd m(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) m(y, x) = img(y, x);
  return m;
}

}  // namespace

double ssim(const Image& a, const Image& b) {
  if (a.height() != b.height() || a.width() != b.width()) throw InputError("SSIM inputs differ in size");
  constexpr int kTaps = 11;
  constexpr double kSigma = 1.5;
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  if (a.height() < kTaps || a.width() < kTaps) throw InputError("SSIM needs images of at least 11x11");
  std::vector<double> k(kTaps);
  double sum = 0.0;
  for (int i = 0; i < kTaps; ++i) {
    const double d = i - kTaps / 2;
    k[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;

  const Eigen::MatrixXd x = to_matrix(a);
  const Eigen::MatrixXd y = to_matrix(b);
  const Eigen::MatrixXd mx = filter_valid(x, k);
  const Eigen::MatrixXd my = filter_valid(y, k);
  const Eigen::MatrixXd sxx = filter_valid(x.cwiseProduct(x), k) - mx.cwiseProduct(mx);
  const Eigen::MatrixXd syy = filter_valid(y.cwiseProduct(y), k) - my.cwiseProduct(my);
  const Eigen::MatrixXd sxy = filter_valid(x.cwiseProduct(y), k) - mx.cwiseProduct(my);
  const Eigen::ArrayXXd num = (2.0 * mx.cwiseProduct(my).array() + kC1) * (2.0 * sxy.array() + kC2);
  const Eigen::ArrayXXd den = (mx.array().square() + my.array().square() + kC1) * (sxx.array() + syy.array() + kC2);
  return (num / den).mean();
}

double psnr(const Image& a, const Image& b) {
  if (a.height() != b.height() || a.width() != b.width()) throw InputError("PSNR inputs differ in size");
  double se = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.data()[i]) - b.data()[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.size());
  if (mse == 0.0) return 100.0;
  return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

namespace {

template <typename PairMetric>
double mean_over_pairs(const FrameSequence& video, PairMetric metric, std::vector<double>* per_pair) {
  if (video.size() < 2) throw InputError("need at least two frames");
  std::vector<Image> luma;
  luma.reserve(video.size());
  for (const Frame& f : video) luma.push_back(f.luma());
  std::vector<double> values;
  double total = 0.0;
  for (size_t i = 0; i + 1 < luma.size(); ++i) {
    values.push_back(metric(luma[i], luma[i + 1]));
    total += values.back();
  }
  if (per_pair) *per_pair = values;
  return total / static_cast<double>(values.size());
}

}  // namespace

double isi(const FrameSequence& video, std::vector<double>* per_pair) {
  return mean_over_pairs(video, ssim, per_pair);
}

double itf(const FrameSequence& video, std::vector<double>* per_pair) {
  return mean_over_pairs(video, psnr, per_pair);
}

namespace {

template <typename PairMetric>
double mean_over_frames(const FrameSequence& a, const FrameSequence& b, PairMetric metric) {
  if (a.size() != b.size()) throw InputError("videos differ in length");
  if (a.empty()) throw InputError("empty video");
  double total = 0.0;
  for (size_t i = 0; i < a.size(); ++i) total += metric(a[i].luma(), b[i].luma());
  return total / static_cast<double>(a.size());
}

}  // namespace

double paired_ssim(const FrameSequence& a, const FrameSequence& b) { return mean_over_frames(a, b, ssim); }

double paired_psnr(const FrameSequence& a, const FrameSequence& b) { return mean_over_frames(a, b, psnr); }

double distortion_ratio(const AffineMatrix& affine) {
  const Eigen::JacobiSVD<Eigen::Matrix2d> svd(affine.leftCols<2>());
  const Eigen::Vector2d sv = svd.singularValues();
  if (!(sv(0) > 0.0)) throw ProcessingError("degenerate affine transform");
  return sv(1) / sv(0);
}

double distortion(const FrameSequence& unstable, const FrameSequence& stabilized,
                  const MetricsConfig& config, std::vector<double>* per_frame, int* skipped) {
  // Cropped output is zoomed relative to the input. Isotropic zoom leaves the
  // singular-value ratio unchanged, so pre-zoom the input and keep the best fit.
  constexpr int kZoomSteps = 5;
  constexpr double kZoomFactor = 1.15;
  constexpr int kCoarse = 8;
  constexpr int kShiftSteps = 6;
  if (unstable.size() != stabilized.size()) throw InputError("videos differ in length");
  const size_t t = unstable.size();
  std::vector<double> ratios(t, -1.0);
  parallel_for(t, config.threads, [&](size_t i) {
    try {
      const Image u = unstable[i].luma();
      const Image v = stabilized[i].luma();
      const FramePyramid target(v, config.pyramid);
      const int h = u.height(), w = u.width();
      const int sh = std::max(h / kCoarse, 8), sw = std::max(w / kCoarse, 8);
      const Image coarse_v = resize_area(v, sh, sw);
      double best = std::numeric_limits<double>::infinity();
      for (int k = 0; k < kZoomSteps; ++k) {
        const double z = std::pow(kZoomFactor, k);
        const double cw = w / z, ch = h / z;
        // Coarse SSD search over the window offset.
        double best_ssd = std::numeric_limits<double>::infinity();
        double left = 0.5 * (w - cw), top = 0.5 * (h - ch);
        for (int dy = -kShiftSteps; dy <= kShiftSteps; ++dy)
          for (int dx = -kShiftSteps; dx <= kShiftSteps; ++dx) {
            const double l = 0.5 * (w - cw) + dx * kCoarse, t = 0.5 * (h - ch) + dy * kCoarse;
            const Image c = resample_rect(u, l, t, cw, ch, sh, sw);
            double ssd = 0.0;
            for (size_t j = 0; j < c.data().size(); ++j) {
              const double d = c.data()[j] - coarse_v.data()[j];
              ssd += d * d;
            }
            if (ssd < best_ssd) {
              best_ssd = ssd;
              left = l;
              top = t;
            }
          }
        const Image zoomed = resample_rect(u, left, top, cw, ch, h, w);
        const PairEstimate est = estimate_pair(FramePyramid(zoomed, config.pyramid), target, config.pyramid,
                                               config.photometric);
        if (est.final_objective < best) {
          best = est.final_objective;
          ratios[i] = distortion_ratio(fit_full_affine(est.coeffs));
        }
      }
    } catch (const ProcessingError&) {
      ratios[i] = -1.0;
    }
  });
  double total = 0.0;
  int used = 0;
  int missed = 0;
  if (per_frame) per_frame->clear();
  for (double r : ratios) {
    if (r < 0.0) {
      ++missed;
      continue;
    }
    if (per_frame) per_frame->push_back(r);
    total += r;
    ++used;
  }
  if (skipped) *skipped = missed;
  if (used == 0) throw ProcessingError("affine fit failed on every frame");
  return total / used;
}

namespace {

std::vector<double> flow_differences(const std::vector<DctCoeffs>& flows) {
  // The basis is orthonormal on the grid, so the coefficient distance equals
  // the Frobenius norm of the flow difference at grid resolution.
  std::vector<double> d;
  for (size_t i = 1; i < flows.size(); ++i) d.push_back(std::sqrt((flows[i] - flows[i - 1]).squared_norm()));
  return d;
}

}  // namespace

double agmdr_from_flows(const std::vector<DctCoeffs>& unstable, const std::vector<DctCoeffs>& stabilized,
                        std::vector<double>* unstable_diffs, std::vector<double>* stabilized_diffs) {
  if (unstable.size() != stabilized.size()) throw InputError("videos differ in length");
  if (unstable.size() < 2) throw InputError("AGMDR needs at least three frames");
  const std::vector<double> du = flow_differences(unstable);
  const std::vector<double> ds = flow_differences(stabilized);
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < du.size(); ++i) {
    den += du[i];
    num += ds[i];
  }
  if (unstable_diffs) *unstable_diffs = du;
  if (stabilized_diffs) *stabilized_diffs = ds;
  if (den < 1e-9) throw ProcessingError("unstable video has no global motion variation; AGMDR undefined");
  return 1.0 - num / den;
}

double agmdr(const FrameSequence& unstable, const FrameSequence& stabilized, const MetricsConfig& config) {
  if (unstable.size() != stabilized.size()) throw InputError("videos differ in length");
  return agmdr_from_flows(consecutive_flows(unstable, config), consecutive_flows(stabilized, config));
}

MetricsReport compute_metrics(const FrameSequence& unstable, const FrameSequence& stabilized,
                              double applied_crop, const MetricsConfig& config) {
  if (unstable.size() != stabilized.size()) throw InputError("videos differ in length");
  MetricsReport r;
  const std::vector<DctCoeffs> fu = consecutive_flows(unstable, config);
  const std::vector<DctCoeffs> fs = consecutive_flows(stabilized, config);
  if (stabilized.size() >= 8) {
    ParamSequence params(fs.size());
    for (size_t i = 0; i < fs.size(); ++i) params[i] = fit_similarity(fs[i], config.flow_loss);
    r.stability = stability_from_params(params, &r.stability_per_param);
  } else {
    throw InputError("stability needs at least 8 frames");
  }
  r.isi = isi(stabilized, &r.isi_per_pair);
  r.itf_db = itf(stabilized, &r.itf_per_pair);
  r.paired_ssim = paired_ssim(unstable, stabilized);
  r.paired_psnr_db = paired_psnr(unstable, stabilized);
  r.crop_ratio = applied_crop;
  r.distortion = distortion(unstable, stabilized, config, &r.distortion_per_frame, &r.distortion_skipped);
  r.agmdr = agmdr_from_flows(fu, fs, &r.agmdr_unstable_diffs, &r.agmdr_stabilized_diffs);
  return r;
}

}  // namespace dctstab
