#include "dgr/eval.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "dgr/error.hpp"
#include "dgr/image_io.hpp"

namespace dgr {

namespace {

struct Moments {
  double sum = 0.0, sumsq = 0.0;
  int n = 0;
  void add(double v) {
    sum += v;
    sumsq += v * v;
    ++n;
  }
  double mean() const { return n ? sum / n : 0.0; }
  double stddev() const {
    if (!n) return 0.0;
    double m = mean();
    return std::sqrt(std::max(0.0, sumsq / n - m * m));
  }
};

PairMetrics metrics_for_warp(int id, const Tensor& x_t, const WarpArtifacts& warp) {
  PairMetrics row;
  row.pair_id = id;
  double cnt = 0.0;
  for (double v : warp.validity_mask.data()) cnt += v;
  row.valid_px_fraction = cnt / static_cast<double>(warp.validity_mask.numel());
  if (cnt == 0.0) {
    row.photo = row.geo = row.ssim = std::nan("");
    row.valid = false;
    return row;
  }
  row.photo = photometric_loss(x_t, warp).value();
  row.geo = geometric_consistency_loss(warp).value();
  auto [bp, transformed] = brightness_transform(x_t, warp.warped_image, warp.validity_mask);
  row.ssim = ssim_masked(clamp(transformed, 0.0, 1.0), warp.warped_image, warp.validity_mask);
  row.valid = true;
  return row;
}

MetricsReport finish_report(std::vector<PairMetrics> rows) {
  MetricsReport rep;
  Moments photo, geo, ss;
  for (const PairMetrics& r : rows) {
    if (r.valid) {
      photo.add(r.photo);
      geo.add(r.geo);
      ss.add(r.ssim);
    } else {
      ++rep.flagged_count;
    }
  }
  rep.rows = std::move(rows);
  rep.valid_count = photo.n;
  rep.photo_mean = photo.mean();
  rep.photo_std = photo.stddev();
  rep.geo_mean = geo.mean();
  rep.geo_std = geo.stddev();
  rep.ssim_mean = ss.mean();
  rep.ssim_std = ss.stddev();
  return rep;
}

std::vector<int> all_indices(size_t n) {
  std::vector<int> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
  return idx;
}

}  // namespace

MetricsReport evaluate_warp_metrics(const Checkpoint& ckpt, const std::vector<FramePair>& pairs,
                                    const std::vector<int>* indices) {
  std::vector<int> idx = indices ? *indices : all_indices(pairs.size());
  if (idx.empty()) throw RuntimeError("evaluate_warp_metrics: no pairs");
  double range = ckpt.cfg.depth_max - ckpt.cfg.depth_min;
  std::vector<PairMetrics> rows;
  for (int i : idx) {
    const FramePair& pair = pairs.at(static_cast<size_t>(i));
    Tensor gt = generator_forward(ckpt.nets.generator, pair.image_t);
    Tensor gt1 = generator_forward(ckpt.nets.generator, pair.image_t1);
    Tensor dt = depthnet_forward(ckpt.nets.depthnet, gt) * range + ckpt.cfg.depth_min;
    Tensor dt1 = depthnet_forward(ckpt.nets.depthnet, gt1) * range + ckpt.cfg.depth_min;
    Tensor pose = reshape(warpnet_forward(ckpt.nets.warpnet, gt, gt1), {6});
    WarpArtifacts warp = compute_warp(dt, gt1, dt1, pose, pair.intrinsics);
    rows.push_back(metrics_for_warp(i, gt, warp));
  }
  return finish_report(std::move(rows));
}

MetricsReport evaluate_warp_metrics_gt(const std::vector<FramePair>& pairs,
                                       const std::vector<int>* indices) {
  std::vector<int> idx = indices ? *indices : all_indices(pairs.size());
  if (idx.empty()) throw RuntimeError("evaluate_warp_metrics_gt: no pairs");
  std::vector<PairMetrics> rows;
  for (int i : idx) {
    const FramePair& pair = pairs.at(static_cast<size_t>(i));
    WarpArtifacts warp = compute_warp(pair.depth_t_gt, pair.image_t1, pair.depth_t1_gt,
                                      pair.relative_pose_gt, pair.intrinsics);
    rows.push_back(metrics_for_warp(i, pair.image_t, warp));
  }
  return finish_report(std::move(rows));
}

double pair_photometric_gt(const FramePair& pair, const Pose6D& pose) {
  WarpArtifacts warp =
      compute_warp(pair.depth_t_gt, pair.image_t1, pair.depth_t1_gt, pose, pair.intrinsics);
  return photometric_loss(pair.image_t, warp).value();
}

void write_metrics_csv(const MetricsReport& report, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw RuntimeError("write_metrics_csv: cannot open " + path);
  f << "pair_id,photo,geo,ssim,valid_px_fraction\n";
  char buf[256];
  for (const PairMetrics& r : report.rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g", r.pair_id, r.photo, r.geo,
                  r.ssim, r.valid_px_fraction);
    f << buf << "\n";
  }
  std::snprintf(buf, sizeof(buf),
                "# summary: photo %.6g +- %.6g, geo %.6g +- %.6g, ssim %.6g +- %.6g, pairs %d, "
                "flagged %d",
                report.photo_mean, report.photo_std, report.geo_mean, report.geo_std,
                report.ssim_mean, report.ssim_std, report.valid_count, report.flagged_count);
  f << buf << "\n";
  if (!f) throw RuntimeError("write_metrics_csv: write failed for " + path);
}

DepthMetrics depth_metrics_synthetic(const Checkpoint& ckpt,
                                     const std::vector<SyntheticSample>& samples,
                                     const std::vector<int>* indices) {
  std::vector<int> idx = indices ? *indices : all_indices(samples.size());
  if (idx.empty()) throw RuntimeError("depth_metrics_synthetic: no samples");
  double range = ckpt.cfg.depth_max - ckpt.cfg.depth_min;
  double abs_sum = 0.0, sq_sum = 0.0;
  int64_t n = 0;
  for (int i : idx) {
    const SyntheticSample& s = samples.at(static_cast<size_t>(i));
    Tensor pred = predict_depth(ckpt, s.image);  // scene units
    auto pd = pred.data();
    auto gd = s.depth_gt.data();
    for (size_t j = 0; j < pd.size(); ++j) {
      double e = (pd[j] - gd[j]) / range;  // normalized units
      abs_sum += std::abs(e);
      sq_sum += e * e;
      ++n;
    }
  }
  DepthMetrics m;
  m.mean_abs_error = abs_sum / static_cast<double>(n);
  m.rmse = std::sqrt(sq_sum / static_cast<double>(n));
  return m;
}

namespace {

// monotone "hot" ramp: black -> red -> yellow -> white
void hot_color(double t, double* rgb) {
  rgb[0] = std::min(1.0, 3.0 * t);
  rgb[1] = std::min(1.0, std::max(0.0, 3.0 * t - 1.0));
  rgb[2] = std::min(1.0, std::max(0.0, 3.0 * t - 2.0));
}

}  // namespace

void emit_difference_map(const Checkpoint& ckpt, const Tensor& image, const std::string& out_png) {
  if (image.rank() != 4 || image.dim(0) != 1 || image.dim(1) != 3)
    throw RuntimeError("emit_difference_map: image must be [1,3,H,W]");
  Tensor translated = generator_forward(ckpt.nets.generator, image);
  int64_t h = image.dim(2), w = image.dim(3);
  std::vector<double> diff(static_cast<size_t>(h * w), 0.0);
  const double* pi = image.data().data();
  const double* pt = translated.data().data();
  double dmax = 0.0;
  for (int64_t p = 0; p < h * w; ++p) {
    double d = 0.0;
    for (int64_t c = 0; c < 3; ++c) d += std::abs(pt[c * h * w + p] - pi[c * h * w + p]);
    d /= 3.0;
    diff[static_cast<size_t>(p)] = d;
    dmax = std::max(dmax, d);
  }
  std::vector<double> panel(static_cast<size_t>(3 * h * 3 * w), 0.0);
  int64_t pw = 3 * w;
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      double rgb[3];
      double t = dmax > 0.0 ? diff[static_cast<size_t>(y * w + x)] / dmax : 0.0;
      hot_color(t, rgb);
      for (int64_t c = 0; c < 3; ++c) {
        panel[static_cast<size_t>(c * h * pw + y * pw + x)] = pi[c * h * w + y * w + x];
        panel[static_cast<size_t>(c * h * pw + y * pw + w + x)] = pt[c * h * w + y * w + x];
        panel[static_cast<size_t>(c * h * pw + y * pw + 2 * w + x)] = rgb[c];
      }
    }
  save_image_png(out_png, Tensor::from_data({1, 3, h, pw}, std::move(panel)));
  std::string pfm_path = out_png;
  if (pfm_path.size() > 4 && pfm_path.substr(pfm_path.size() - 4) == ".png")
    pfm_path = pfm_path.substr(0, pfm_path.size() - 4);
  pfm_path += ".pfm";
  save_pfm(pfm_path, Tensor::from_data({1, 1, h, w}, std::move(diff)));
}

}  // namespace dgr
