#pragma once

#include <utility>

#include "dgr/geometry.hpp"
#include "dgr/tensor.hpp"

namespace dgr {

struct LossWeights {
  double omega_g = 1.0;
  double omega_r = 10.0;
  double omega_s = 100.0;
  double omega_w = 1.0;
  // fixed internal warp-loss weights
  static constexpr double warp_photo = 1.0;
  static constexpr double warp_geo = 0.5;
  static constexpr double warp_smooth = 0.1;
};

struct BrightnessParams {
  double a = 1.0;  // gain
  double b = 0.0;  // offset
};

struct LossReport {
  double l_gan = 0.0;
  double l_r = 0.0;
  double l_s = 0.0;
  double l_w = 0.0;
  double l_photo = 0.0;
  double l_geo = 0.0;
  double l_smooth = 0.0;
  double total = 0.0;
};

// mask = 0 where the minimum channel is >= threshold (near-saturated specular
// pixel), zero region dilated by `dilation` pixels; constant w.r.t. the graph.
Tensor specularity_mask(const Tensor& x_real, double threshold = 0.98, int dilation = 1);

// Closed-form least-squares gain/offset of x against target over mask=1
// pixels. The fit is treated as constant in backprop; only the returned
// transformed tensor a*x+b carries gradient (through x).
std::pair<BrightnessParams, Tensor> brightness_transform(const Tensor& x, const Tensor& target,
                                                         const Tensor& mask);

Tensor photometric_loss(const Tensor& x_t, const WarpArtifacts& warp);
// photometric loss under an externally fixed brightness transform; this is the
// function the detached-fit gradient of photometric_loss actually represents
Tensor photometric_loss_fixed(const Tensor& x_t, const WarpArtifacts& warp,
                              const BrightnessParams& bp);
Tensor geometric_consistency_loss(const WarpArtifacts& warp);
Tensor smoothness_loss(const Tensor& x_t, const Tensor& depth_t);

struct WarpLossTerms {
  Tensor total;
  Tensor photo;
  Tensor geo;
  Tensor smooth;
};
WarpLossTerms warp_loss(const Tensor& x_t, const Tensor& depth_t, const WarpArtifacts& warp);

Tensor depth_l1_loss(const Tensor& pred, const Tensor& gt);

Tensor reconstruction_loss(const Tensor& gen_syn, const Tensor& x_syn, const Tensor& gen_real,
                           const Tensor& x_real, const Tensor& mask);

// d_* are critic outputs on G(X_S) and G(X_R), one scalar per image.
Tensor wgan_generator_loss(const Tensor& d_syn, const Tensor& d_real);
Tensor wgan_critic_loss(const Tensor& d_syn, const Tensor& d_real);

// Ablation alternative; inputs are post-sigmoid probabilities.
Tensor baseline_gan_loss(const Tensor& d_fake, const Tensor& d_target_domain);

// total = omega_g*L_GAN + omega_r*L_R + 0.5*(omega_s*L_S + omega_w*L_W)
Tensor combine_total(const Tensor& l_gan, const Tensor& l_r, const Tensor& l_s, const Tensor& l_w,
                     const LossWeights& w);
LossReport total_loss(double l_gan, double l_r, double l_s, double l_w, const LossWeights& w);

// Mean SSIM over 11x11 Gaussian windows (sigma 1.5), K1=0.01, K2=0.03, dynamic
// range 1, channel-averaged, valid windows only. Evaluation metric, no grad.
double ssim(const Tensor& x, const Tensor& y);
// Same, restricted to windows whose center pixel has mask 1.
double ssim_masked(const Tensor& x, const Tensor& y, const Tensor& mask);

}  // namespace dgr
