#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dgr/tensor.hpp"

namespace dgr {

struct NetConfig {
  int resolution = 64;     // square input
  int base_channels = 16;  // channel width of the first encoder level
  int depth = 4;           // number of stride-2 encoder levels
  uint64_t seed = 0;
};

enum class Activation { None, LeakyRelu, Sigmoid };

struct LayerSpec {
  std::string name;
  int in_ch = 0, out_ch = 0;
  int kernel = 3, stride = 1, pad = 1;
  Activation act = Activation::LeakyRelu;
};

struct NetworkParams {
  std::string arch;  // generator | depthnet | warpnet | critic
  NetConfig cfg;
  std::vector<LayerSpec> manifest;
  std::vector<Tensor> weights;  // parallel to manifest
  std::vector<Tensor> biases;

  std::vector<Tensor> parameters() const;
  int64_t parameter_count() const;
  void zero_grads();
  void set_requires_grad(bool b);
};

// Encoder-decoder with skip connections; interpolation-based upsampling in the
// decoder; predicts a residual added to the input, clamped to [0,1]. The head
// is zero-initialized so G(x) == x at initialization.
NetworkParams build_generator(const NetConfig& cfg);

// Same trunk, sigmoid head: normalized depth in (0,1).
NetworkParams build_depthnet(const NetConfig& cfg);

// Two images concatenated on channels -> conv encoder -> global average ->
// zero-initialized linear head -> 6 pose numbers, scaled by 0.01.
NetworkParams build_warpnet(const NetConfig& cfg);

// 4-layer strided patch critic, leaky_relu(0.2), no normalization, no output
// nonlinearity; patch scores averaged to one scalar per image.
NetworkParams build_critic(const NetConfig& cfg);

Tensor generator_forward(const NetworkParams& net, const Tensor& x);
Tensor depthnet_forward(const NetworkParams& net, const Tensor& x);
Tensor warpnet_forward(const NetworkParams& net, const Tensor& x_t, const Tensor& x_t1);
Tensor critic_forward(const NetworkParams& net, const Tensor& x);

// Clamp every parameter into [-c, c] in place.
void clip_weights(NetworkParams& net, double c);

// One-side receptive field extent of the final layer's output, from the
// manifest's kernel/stride chain.
int64_t receptive_field(const NetworkParams& net);

}  // namespace dgr
