#include "dgr/losses.hpp"

#include <cmath>

#include "dgr/error.hpp"

namespace dgr {

namespace {

double mask_count(const Tensor& mask) {
  double n = 0.0;
  for (double v : mask.data()) n += v;
  return n;
}

Tensor clamp_min(const Tensor& t, double lo) {
  return clamp(t, lo, std::numeric_limits<double>::infinity());
}

}  // namespace

Tensor specularity_mask(const Tensor& x_real, double threshold, int dilation) {
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw RuntimeError("specularity_mask: threshold must be in (0,1]");
  if (x_real.rank() != 4) throw RuntimeError("specularity_mask: image must be [N,C,H,W]");
  int64_t n = x_real.dim(0), c = x_real.dim(1), h = x_real.dim(2), w = x_real.dim(3);
  std::vector<double> base(static_cast<size_t>(n * h * w), 1.0);
  const double* px = x_real.data().data();
  for (int64_t b = 0; b < n; ++b)
    for (int64_t p = 0; p < h * w; ++p) {
      double mn = px[b * c * h * w + p];
      for (int64_t ci = 1; ci < c; ++ci)
        mn = std::min(mn, px[(b * c + ci) * h * w + p]);
      if (mn >= threshold) base[static_cast<size_t>(b * h * w + p)] = 0.0;
    }
  if (dilation > 0) {
    std::vector<double> dil = base;
    for (int64_t b = 0; b < n; ++b)
      for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) {
          if (base[static_cast<size_t>((b * h + y) * w + x)] != 0.0) continue;
          for (int64_t dy = -dilation; dy <= dilation; ++dy)
            for (int64_t dx = -dilation; dx <= dilation; ++dx) {
              int64_t yy = y + dy, xx = x + dx;
              if (yy >= 0 && yy < h && xx >= 0 && xx < w)
                dil[static_cast<size_t>((b * h + yy) * w + xx)] = 0.0;
            }
        }
    base = std::move(dil);
  }
  return Tensor::from_data({n, 1, h, w}, std::move(base));
}

std::pair<BrightnessParams, Tensor> brightness_transform(const Tensor& x, const Tensor& target,
                                                         const Tensor& mask) {
  if (x.shape() != target.shape())
    throw RuntimeError("brightness_transform: x and target shapes differ");
  if (x.rank() != 4 || mask.rank() != 4 || mask.dim(1) != 1 || mask.dim(0) != x.dim(0) ||
      mask.dim(2) != x.dim(2) || mask.dim(3) != x.dim(3))
    throw RuntimeError("brightness_transform: mask must be [N,1,H,W] matching x");
  int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  const double* px = x.data().data();
  const double* pt = target.data().data();
  const double* pm = mask.data().data();
  double cnt = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (int64_t b = 0; b < n; ++b)
    for (int64_t ci = 0; ci < c; ++ci)
      for (int64_t p = 0; p < hw; ++p) {
        if (pm[b * hw + p] == 0.0) continue;
        double xv = px[(b * c + ci) * hw + p];
        double yv = pt[(b * c + ci) * hw + p];
        cnt += 1.0;
        sx += xv;
        sy += yv;
        sxx += xv * xv;
        sxy += xv * yv;
      }
  if (cnt == 0.0) throw RuntimeError("brightness_transform: empty mask");
  BrightnessParams bp;
  double var = sxx - sx * sx / cnt;
  if (var < 1e-12) {
    bp.a = 1.0;
    bp.b = (sy - sx) / cnt;
  } else {
    bp.a = (sxy - sx * sy / cnt) / var;
    bp.b = (sy - bp.a * sx) / cnt;
  }
  if (!std::isfinite(bp.a) || !std::isfinite(bp.b))
    throw RuntimeError("brightness_transform: non-finite fit");
  return {bp, x * bp.a + bp.b};
}

Tensor photometric_loss(const Tensor& x_t, const WarpArtifacts& warp) {
  const Tensor& mask = warp.validity_mask;
  double cnt = mask_count(mask);
  if (cnt == 0.0) throw RuntimeError("photometric_loss: no valid pixels");
  auto [bp, transformed] = brightness_transform(x_t, warp.warped_image, mask);
  Tensor diff = transformed - warp.warped_image;
  Tensor norm = sqrt(sum_axis(square(diff), 1, true));  // per-pixel L2 across channels
  return sum(norm * mask) * (1.0 / cnt);
}

Tensor photometric_loss_fixed(const Tensor& x_t, const WarpArtifacts& warp,
                              const BrightnessParams& bp) {
  const Tensor& mask = warp.validity_mask;
  double cnt = mask_count(mask);
  if (cnt == 0.0) throw RuntimeError("photometric_loss: no valid pixels");
  Tensor diff = (x_t * bp.a + bp.b) - warp.warped_image;
  Tensor norm = sqrt(sum_axis(square(diff), 1, true));
  return sum(norm * mask) * (1.0 / cnt);
}

Tensor geometric_consistency_loss(const WarpArtifacts& warp) {
  const Tensor& mask = warp.validity_mask;
  double cnt = mask_count(mask);
  if (cnt == 0.0) throw RuntimeError("geometric_consistency_loss: no valid pixels");
  Tensor num = abs(warp.projected_depth - warp.resampled_depth);
  // valid pixels have both depths > 0; the floor only guards masked-out ones
  Tensor den = clamp_min(warp.projected_depth + warp.resampled_depth, 1e-12);
  return sum((num / den) * mask) * (1.0 / cnt);
}

Tensor smoothness_loss(const Tensor& x_t, const Tensor& depth_t) {
  if (x_t.dim(2) != depth_t.dim(2) || x_t.dim(3) != depth_t.dim(3))
    throw RuntimeError("smoothness_loss: spatial shapes differ");
  int64_t h = depth_t.dim(2), w = depth_t.dim(3);
  Tensor dn = depth_t / mean(depth_t);
  // forward differences along x
  Tensor ddx = narrow(dn, 3, 1, w - 1) - narrow(dn, 3, 0, w - 1);
  Tensor gx = mean_axis(abs(narrow(x_t, 3, 1, w - 1) - narrow(x_t, 3, 0, w - 1)), 1, true);
  Tensor tx = square(exp(neg(gx)) * ddx);
  // forward differences along y
  Tensor ddy = narrow(dn, 2, 1, h - 1) - narrow(dn, 2, 0, h - 1);
  Tensor gy = mean_axis(abs(narrow(x_t, 2, 1, h - 1) - narrow(x_t, 2, 0, h - 1)), 1, true);
  Tensor ty = square(exp(neg(gy)) * ddy);
  double count = static_cast<double>(tx.numel() + ty.numel());
  return (sum(tx) + sum(ty)) * (1.0 / count);
}

WarpLossTerms warp_loss(const Tensor& x_t, const Tensor& depth_t, const WarpArtifacts& warp) {
  WarpLossTerms terms;
  terms.photo = photometric_loss(x_t, warp);
  terms.geo = geometric_consistency_loss(warp);
  terms.smooth = smoothness_loss(x_t, depth_t);
  terms.total = terms.photo * LossWeights::warp_photo + terms.geo * LossWeights::warp_geo +
                terms.smooth * LossWeights::warp_smooth;
  return terms;
}

Tensor depth_l1_loss(const Tensor& pred, const Tensor& gt) {
  if (pred.shape() != gt.shape()) throw RuntimeError("depth_l1_loss: shape mismatch");
  return mean(abs(pred - gt));
}

Tensor reconstruction_loss(const Tensor& gen_syn, const Tensor& x_syn, const Tensor& gen_real,
                           const Tensor& x_real, const Tensor& mask) {
  if (gen_syn.shape() != x_syn.shape())
    throw RuntimeError("reconstruction_loss: synthetic shapes differ");
  if (gen_real.shape() != x_real.shape())
    throw RuntimeError("reconstruction_loss: real shapes differ");
  double cnt = mask_count(mask);
  if (cnt == 0.0) throw RuntimeError("reconstruction_loss: empty mask");
  Tensor syn_term = mean(square(gen_syn - x_syn));
  double channels = static_cast<double>(gen_real.dim(1));
  Tensor real_term = sum(abs(gen_real - x_real) * mask) * (1.0 / (cnt * channels));
  return syn_term + real_term;
}

Tensor wgan_generator_loss(const Tensor& d_syn, const Tensor& d_real) {
  return mean(d_syn) - mean(d_real);
}

Tensor wgan_critic_loss(const Tensor& d_syn, const Tensor& d_real) {
  return neg(wgan_generator_loss(d_syn, d_real));
}

Tensor baseline_gan_loss(const Tensor& d_fake, const Tensor& d_target_domain) {
  Tensor pf = clamp(d_fake, 1e-7, 1.0 - 1e-7);
  Tensor pt = clamp(d_target_domain, 1e-7, 1.0 - 1e-7);
  return mean(log(pt)) + mean(log(1.0 - pf));
}

Tensor combine_total(const Tensor& l_gan, const Tensor& l_r, const Tensor& l_s, const Tensor& l_w,
                     const LossWeights& w) {
  if (w.omega_g < 0.0 || w.omega_r < 0.0 || w.omega_s < 0.0 || w.omega_w < 0.0)
    throw RuntimeError("total_loss: negative weights");
  return l_gan * w.omega_g + l_r * w.omega_r + (l_s * w.omega_s + l_w * w.omega_w) * 0.5;
}

LossReport total_loss(double l_gan, double l_r, double l_s, double l_w, const LossWeights& w) {
  if (w.omega_g < 0.0 || w.omega_r < 0.0 || w.omega_s < 0.0 || w.omega_w < 0.0)
    throw RuntimeError("total_loss: negative weights");
  LossReport rep;
  rep.l_gan = l_gan;
  rep.l_r = l_r;
  rep.l_s = l_s;
  rep.l_w = l_w;
  rep.total = l_gan * w.omega_g + l_r * w.omega_r + (l_s * w.omega_s + l_w * w.omega_w) * 0.5;
  return rep;
}

// ---------------------------------------------------------------------------
// SSIM
// ---------------------------------------------------------------------------

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;  // (K1*L)^2, L = 1
constexpr double kC2 = 0.03 * 0.03;

std::vector<double> gaussian_kernel() {
  std::vector<double> k(kWin);
  double s = 0.0;
  for (int i = 0; i < kWin; ++i) {
    double d = static_cast<double>(i - kWin / 2);
    k[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    s += k[static_cast<size_t>(i)];
  }
  for (double& v : k) v /= s;
  return k;
}

// separable valid-mode Gaussian filter of an HxW plane
void gauss_filter(const double* in, int64_t h, int64_t w, std::vector<double>& tmp,
                  std::vector<double>& out) {
  static const std::vector<double> k = gaussian_kernel();
  int64_t ow = w - kWin + 1, oh = h - kWin + 1;
  tmp.assign(static_cast<size_t>(h * ow), 0.0);
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < kWin; ++i) acc += k[static_cast<size_t>(i)] * in[y * w + x + i];
      tmp[static_cast<size_t>(y * ow + x)] = acc;
    }
  out.assign(static_cast<size_t>(oh * ow), 0.0);
  for (int64_t y = 0; y < oh; ++y)
    for (int64_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < kWin; ++i) acc += k[static_cast<size_t>(i)] * tmp[(y + i) * ow + x];
      out[static_cast<size_t>(y * ow + x)] = acc;
    }
}

double ssim_impl(const Tensor& x, const Tensor& y, const Tensor* mask) {
  if (x.shape() != y.shape()) throw RuntimeError("ssim: shape mismatch");
  if (x.rank() != 4) throw RuntimeError("ssim: inputs must be [N,C,H,W]");
  int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h < kWin || w < kWin) throw RuntimeError("ssim: spatial size must be >= 11");
  int64_t oh = h - kWin + 1, ow = w - kWin + 1;
  const double* px = x.data().data();
  const double* py = y.data().data();
  std::vector<double> xx(static_cast<size_t>(h * w)), yy(xx.size()), xy(xx.size());
  std::vector<double> tmp, mu1, mu2, m11, m22, m12;
  double acc = 0.0;
  int64_t cnt = 0;
  for (int64_t b = 0; b < n; ++b)
    for (int64_t ci = 0; ci < c; ++ci) {
      const double* p1 = px + (b * c + ci) * h * w;
      const double* p2 = py + (b * c + ci) * h * w;
      for (int64_t i = 0; i < h * w; ++i) {
        xx[static_cast<size_t>(i)] = p1[i] * p1[i];
        yy[static_cast<size_t>(i)] = p2[i] * p2[i];
        xy[static_cast<size_t>(i)] = p1[i] * p2[i];
      }
      std::vector<double> t2;
      gauss_filter(p1, h, w, tmp, mu1);
      gauss_filter(p2, h, w, tmp, mu2);
      gauss_filter(xx.data(), h, w, tmp, m11);
      gauss_filter(yy.data(), h, w, tmp, m22);
      gauss_filter(xy.data(), h, w, tmp, m12);
      for (int64_t oy = 0; oy < oh; ++oy)
        for (int64_t ox = 0; ox < ow; ++ox) {
          if (mask) {
            // window center pixel decides inclusion
            int64_t cyp = oy + kWin / 2, cxp = ox + kWin / 2;
            if (mask->data()[static_cast<size_t>(b * h * w + cyp * w + cxp)] == 0.0) continue;
          }
          size_t i = static_cast<size_t>(oy * ow + ox);
          double u1 = mu1[i], u2 = mu2[i];
          double s11 = m11[i] - u1 * u1;
          double s22 = m22[i] - u2 * u2;
          double s12 = m12[i] - u1 * u2;
          double v = ((2.0 * u1 * u2 + kC1) * (2.0 * s12 + kC2)) /
                     ((u1 * u1 + u2 * u2 + kC1) * (s11 + s22 + kC2));
          acc += v;
          ++cnt;
        }
    }
  if (cnt == 0) throw RuntimeError("ssim: no windows to evaluate");
  return acc / static_cast<double>(cnt);
}

}  // namespace

double ssim(const Tensor& x, const Tensor& y) { return ssim_impl(x, y, nullptr); }

double ssim_masked(const Tensor& x, const Tensor& y, const Tensor& mask) {
  return ssim_impl(x, y, &mask);
}

}  // namespace dgr
