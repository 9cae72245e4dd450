#pragma once

#include <vector>

#include "dctstab/direct_flow.hpp"
#include "dctstab/image.hpp"
#include "dctstab/similarity.hpp"

namespace dctstab {

/// Motion estimation used by the flow-based measures.
struct MetricsConfig {
  PyramidSpec pyramid;
  RobustLossParams photometric = RobustLossParams::photometric_default();
  RobustLossParams flow_loss = RobustLossParams::flow_default();
  int threads = 1;
};

struct MetricsReport {
  double stability = 0.0;
  double isi = 0.0;
  double itf_db = 0.0;
  /// Frame-by-frame SSIM and PSNR between the two videos.
  double paired_ssim = 1.0;
  double paired_psnr_db = 100.0;
  double crop_ratio = 1.0;
  double distortion = 1.0;
  double agmdr = 0.0;
  int distortion_skipped = 0;

  std::vector<double> stability_per_param;  // r, s, tx, ty
  std::vector<double> isi_per_pair;
  std::vector<double> itf_per_pair;
  std::vector<double> distortion_per_frame;
  std::vector<double> agmdr_stabilized_diffs;
  std::vector<double> agmdr_unstable_diffs;
};

/// Consecutive-frame global flows theta^(i,i+1) of a video.
std::vector<DctCoeffs> consecutive_flows(const FrameSequence& video, const MetricsConfig& config);

/// Low-frequency energy ratio of one parameter sequence: sqrt(E(bins 1..kf) / E(all non-DC)),
/// after mean removal. Sequences with non-DC energy below 1e-12 score 1.
double low_frequency_ratio(const std::vector<double>& seq, int kept_bins = 6);

/// Minimum low-frequency ratio over the four similarity parameters.
double stability_from_params(const ParamSequence& params, std::vector<double>* per_param = nullptr);

/// Stability of a video (T >= 8), clamped to [0,1].
double stability(const FrameSequence& video, const MetricsConfig& config,
                 std::vector<double>* per_param = nullptr);

/// SSIM with an 11-tap Gaussian window (sigma 1.5), k1 = 0.01, k2 = 0.03,
/// dynamic range 1, averaged over window positions fully inside the image.
/// Not clipped: anti-correlated images score negative.
double ssim(const Image& a, const Image& b);

/// PSNR in dB for intensities in [0,1]; 100 dB for identical images.
double psnr(const Image& a, const Image& b);

double isi(const FrameSequence& video, std::vector<double>* per_pair = nullptr);
double itf(const FrameSequence& video, std::vector<double>* per_pair = nullptr);

/// Mean SSIM / PSNR of corresponding frames of two equal-length videos.
double paired_ssim(const FrameSequence& a, const FrameSequence& b);
double paired_psnr(const FrameSequence& a, const FrameSequence& b);

/// Ratio of the smaller to the larger singular value of the linear part.
double distortion_ratio(const AffineMatrix& affine);

/// Mean distortion ratio over frames; frames whose affine fit fails are skipped.
/// The input is pre-zoomed over a few scales so cropped output still aligns.
double distortion(const FrameSequence& unstable, const FrameSequence& stabilized,
                  const MetricsConfig& config, std::vector<double>* per_frame = nullptr,
                  int* skipped = nullptr);

/// 1 - sum ||f_s(i,i+1) - f_s(i-1,i)|| / sum ||f_u(i,i+1) - f_u(i-1,i)||, norms of
/// the flows at grid resolution. Throws ProcessingError when the denominator is < 1e-9.
double agmdr_from_flows(const std::vector<DctCoeffs>& unstable, const std::vector<DctCoeffs>& stabilized,
                        std::vector<double>* unstable_diffs = nullptr,
                        std::vector<double>* stabilized_diffs = nullptr);
double agmdr(const FrameSequence& unstable, const FrameSequence& stabilized, const MetricsConfig& config);

/// All six measures. `applied_crop` is the crop ratio reported by the pipeline
/// (1 for unprocessed video).
MetricsReport compute_metrics(const FrameSequence& unstable, const FrameSequence& stabilized,
                              double applied_crop, const MetricsConfig& config);

}  // namespace dctstab
