#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dgr/synthdata.hpp"
#include "dgr/training.hpp"

namespace dgr {

struct PairMetrics {
  int pair_id = 0;
  double photo = 0.0, geo = 0.0, ssim = 0.0;
  double valid_px_fraction = 0.0;
  bool valid = false;  // false rows are flagged and excluded from aggregates
};

struct MetricsReport {
  std::vector<PairMetrics> rows;
  double photo_mean = 0.0, photo_std = 0.0;
  double geo_mean = 0.0, geo_std = 0.0;
  double ssim_mean = 0.0, ssim_std = 0.0;
  int valid_count = 0;
  int flagged_count = 0;
};

// Model route: translate both frames, predict depths and pose, warp, then
// report Eq.-style photometric / geometric losses and SSIM of the
// brightness-aligned pair over valid pixels.
MetricsReport evaluate_warp_metrics(const Checkpoint& ckpt, const std::vector<FramePair>& pairs,
                                    const std::vector<int>* indices = nullptr);

// Oracle route: ground-truth depths and relative pose on the raw frames.
MetricsReport evaluate_warp_metrics_gt(const std::vector<FramePair>& pairs,
                                       const std::vector<int>* indices = nullptr);

// Photometric residual of one pair under ground-truth depths and an arbitrary
// pose; used for the random-pose separation check.
double pair_photometric_gt(const FramePair& pair, const Pose6D& pose);

void write_metrics_csv(const MetricsReport& report, const std::string& path);

struct DepthMetrics {
  double mean_abs_error = 0.0;
  double rmse = 0.0;
};
// Errors in normalized depth units over all pixels of the given samples.
DepthMetrics depth_metrics_synthetic(const Checkpoint& ckpt,
                                     const std::vector<SyntheticSample>& samples,
                                     const std::vector<int>* indices = nullptr);

// Writes a 3-panel PNG (input | translated | difference colormap) and the raw
// mean-abs-channel difference as PFM next to it.
void emit_difference_map(const Checkpoint& ckpt, const Tensor& image, const std::string& out_png);

}  // namespace dgr
