#include "dgr/networks.hpp"

#include <algorithm>
#include <cmath>

#include "dgr/error.hpp"
#include "dgr/rng.hpp"

namespace dgr {

std::vector<Tensor> NetworkParams::parameters() const {
  std::vector<Tensor> out;
  for (size_t i = 0; i < weights.size(); ++i) {
    out.push_back(weights[i]);
    out.push_back(biases[i]);
  }
  return out;
}

int64_t NetworkParams::parameter_count() const {
  int64_t n = 0;
  for (const Tensor& t : parameters()) n += t.numel();
  return n;
}

void NetworkParams::zero_grads() {
  for (Tensor t : parameters()) t.zero_grad();
}

void NetworkParams::set_requires_grad(bool b) {
  for (Tensor t : parameters()) t.set_requires_grad(b);
}

namespace {

void check_resolution(const NetConfig& cfg) {
  if (cfg.resolution <= 0 || cfg.resolution % (1 << cfg.depth) != 0)
    throw RuntimeError("NetConfig: resolution " + std::to_string(cfg.resolution) +
                       " is not divisible by 2^" + std::to_string(cfg.depth));
  if (cfg.base_channels < 2) throw RuntimeError("NetConfig: base_channels too small");
}

// fan-in-scaled normal init, std = sqrt(2 / fan_in)
Tensor init_conv_weight(int out_ch, int in_ch, int k, Rng& rng) {
  double std = std::sqrt(2.0 / static_cast<double>(in_ch * k * k));
  std::vector<double> data(static_cast<size_t>(out_ch * in_ch * k * k));
  for (double& v : data) v = rng.normal() * std;
  return Tensor::from_data({out_ch, in_ch, k, k}, std::move(data), true);
}

void add_layer(NetworkParams& net, Rng& rng, const std::string& name, int in_ch, int out_ch,
               int k, int stride, int pad, Activation act, bool zero_init = false) {
  LayerSpec spec{name, in_ch, out_ch, k, stride, pad, act};
  net.manifest.push_back(spec);
  if (zero_init) {
    net.weights.push_back(Tensor::zeros({out_ch, in_ch, k, k}, true));
  } else {
    net.weights.push_back(init_conv_weight(out_ch, in_ch, k, rng));
  }
  net.biases.push_back(Tensor::zeros({out_ch}, true));
}

Tensor apply_layer(const NetworkParams& net, size_t idx, const Tensor& x) {
  const LayerSpec& s = net.manifest[idx];
  Tensor y = conv2d(x, net.weights[idx], net.biases[idx], s.stride, s.pad);
  switch (s.act) {
    case Activation::None:
      return y;
    case Activation::LeakyRelu:
      return leaky_relu(y, 0.2);
    case Activation::Sigmoid:
      return sigmoid(y);
  }
  return y;
}

int enc_channels(const NetConfig& cfg, int level) {
  return std::min(cfg.base_channels << level, cfg.base_channels * 4);
}

// Shared encoder-decoder trunk of generator and depthnet: `depth` stride-2
// encoder levels, skip concats on the way up, one skip-free full-resolution
// level, then a 3x3 head.
void build_unet(NetworkParams& net, Rng& rng, int in_ch, int out_ch, Activation head_act,
                bool zero_head) {
  const NetConfig& cfg = net.cfg;
  int prev = in_ch;
  for (int i = 0; i < cfg.depth; ++i) {
    int ch = enc_channels(cfg, i);
    add_layer(net, rng, "enc" + std::to_string(i), prev, ch, 3, 2, 1, Activation::LeakyRelu);
    prev = ch;
  }
  for (int i = cfg.depth - 2; i >= 0; --i) {
    int skip = enc_channels(cfg, i);
    int ch = skip;
    add_layer(net, rng, "dec" + std::to_string(i), prev + skip, ch, 3, 1, 1,
              Activation::LeakyRelu);
    prev = ch;
  }
  int full_ch = std::max(cfg.base_channels / 2, 4);
  add_layer(net, rng, "full", prev, full_ch, 3, 1, 1, Activation::LeakyRelu);
  add_layer(net, rng, "head", full_ch, out_ch, 3, 1, 1, head_act, zero_head);
}

Tensor unet_forward(const NetworkParams& net, const Tensor& x) {
  const NetConfig& cfg = net.cfg;
  std::vector<Tensor> enc;
  Tensor h = x;
  size_t li = 0;
  for (int i = 0; i < cfg.depth; ++i) {
    h = apply_layer(net, li++, h);
    enc.push_back(h);
  }
  for (int i = cfg.depth - 2; i >= 0; --i) {
    h = apply_layer(net, li++, concat({upsample_bilinear(h, 2), enc[static_cast<size_t>(i)]}, 1));
  }
  h = apply_layer(net, li++, upsample_bilinear(h, 2));
  return apply_layer(net, li, h);
}

}  // namespace

NetworkParams build_generator(const NetConfig& cfg) {
  check_resolution(cfg);
  NetworkParams net;
  net.arch = "generator";
  net.cfg = cfg;
  Rng rng(hash_combine(cfg.seed, 0x67656eULL));
  build_unet(net, rng, 3, 3, Activation::None, /*zero_head=*/true);
  return net;
}

NetworkParams build_depthnet(const NetConfig& cfg) {
  check_resolution(cfg);
  NetworkParams net;
  net.arch = "depthnet";
  net.cfg = cfg;
  Rng rng(hash_combine(cfg.seed, 0x646570ULL));
  build_unet(net, rng, 3, 1, Activation::Sigmoid, /*zero_head=*/false);
  return net;
}

NetworkParams build_warpnet(const NetConfig& cfg) {
  check_resolution(cfg);
  NetworkParams net;
  net.arch = "warpnet";
  net.cfg = cfg;
  Rng rng(hash_combine(cfg.seed, 0x77617270ULL));
  int prev = 6;
  for (int i = 0; i < cfg.depth; ++i) {
    int ch = enc_channels(cfg, i);
    add_layer(net, rng, "enc" + std::to_string(i), prev, ch, 3, 2, 1, Activation::LeakyRelu);
    prev = ch;
  }
  // zero-init 1x1 head on pooled features: identity pose at initialization
  add_layer(net, rng, "head", prev, 6, 1, 1, 0, Activation::None, /*zero_init=*/true);
  return net;
}

NetworkParams build_critic(const NetConfig& cfg) {
  check_resolution(cfg);
  NetworkParams net;
  net.arch = "critic";
  net.cfg = cfg;
  Rng rng(hash_combine(cfg.seed, 0x637269ULL));
  int c1 = cfg.base_channels, c2 = c1 * 2, c3 = c1 * 4;
  add_layer(net, rng, "c0", 3, c1, 3, 2, 1, Activation::LeakyRelu);
  add_layer(net, rng, "c1", c1, c2, 3, 2, 1, Activation::LeakyRelu);
  add_layer(net, rng, "c2", c2, c3, 3, 2, 1, Activation::LeakyRelu);
  add_layer(net, rng, "c3", c3, 1, 3, 1, 1, Activation::None);
  return net;
}

Tensor generator_forward(const NetworkParams& net, const Tensor& x) {
  if (net.arch != "generator") throw RuntimeError("generator_forward: wrong params");
  Tensor residual = unet_forward(net, x);
  return clamp(x + residual, 0.0, 1.0);
}

Tensor depthnet_forward(const NetworkParams& net, const Tensor& x) {
  if (net.arch != "depthnet") throw RuntimeError("depthnet_forward: wrong params");
  return unet_forward(net, x);
}

Tensor warpnet_forward(const NetworkParams& net, const Tensor& x_t, const Tensor& x_t1) {
  if (net.arch != "warpnet") throw RuntimeError("warpnet_forward: wrong params");
  Tensor h = concat({x_t, x_t1}, 1);
  size_t li = 0;
  for (int i = 0; i < net.cfg.depth; ++i) h = apply_layer(net, li++, h);
  Tensor pooled = mean_axis(mean_axis(h, 3, true), 2, true);  // [N,C,1,1]
  Tensor out = apply_layer(net, li, pooled);                  // [N,6,1,1]
  // small-motion prior on both translation and rotation
  return reshape(out, {out.dim(0), 6}) * 0.01;
}

Tensor critic_forward(const NetworkParams& net, const Tensor& x) {
  if (net.arch != "critic") throw RuntimeError("critic_forward: wrong params");
  Tensor h = x;
  for (size_t i = 0; i < net.manifest.size(); ++i) h = apply_layer(net, i, h);
  Tensor pooled = mean_axis(mean_axis(mean_axis(h, 3, true), 2, true), 1, true);
  return reshape(pooled, {x.dim(0), 1});
}

void clip_weights(NetworkParams& net, double c) {
  if (!(c > 0.0)) throw RuntimeError("clip_weights: c must be positive");
  for (Tensor t : net.parameters())
    for (double& v : t.mutable_data()) v = std::min(std::max(v, -c), c);
}

int64_t receptive_field(const NetworkParams& net) {
  int64_t rf = 1, jump = 1;
  for (const LayerSpec& s : net.manifest) {
    rf += static_cast<int64_t>(s.kernel - 1) * jump;
    jump *= s.stride;
  }
  return rf;
}

}  // namespace dgr
