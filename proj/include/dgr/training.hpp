#pragma once

#include <string>
#include <vector>

#include "dgr/losses.hpp"
#include "dgr/networks.hpp"
#include "dgr/rng.hpp"
#include "dgr/synthdata.hpp"

namespace dgr {

struct TrainConfig {
  int steps = 2000;
  int batch_size = 4;  // per domain
  double learning_rate = 1e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int n_critic = 1;
  double clip_c = 0.01;
  LossWeights weights;
  uint64_t seed = 0;
  int checkpoint_every = 500;
  int log_every = 10;
  double depth_min = 0.05;  // scene-unit range realized by the depth head
  double depth_max = 10.0;
  double spec_threshold = 0.98;
  int spec_dilation = 1;
  NetConfig net;
  // ablations
  bool disable_gan = false;
  bool disable_recon = false;
  bool disable_synthetic = false;
  bool disable_warp = false;
  bool use_baseline_gan = false;

  void validate() const;
};

struct Nets {
  NetworkParams generator, depthnet, warpnet, critic;
  std::vector<Tensor> task_parameters() const;  // generator + depthnet + warpnet
};

Nets build_nets(const NetConfig& cfg);

struct AdamState {
  std::vector<std::vector<double>> m, v;  // parallel to the parameter list
  int64_t t = 0;
};

// Standard Adam with bias correction; gradients are read from the tensors'
// grad buffers (missing grad = zero).
void adam_step(const std::vector<Tensor>& params, AdamState& state, double lr, double beta1,
               double beta2, double eps = 1e-8);

struct TrainState {
  Nets nets;
  AdamState opt_task, opt_critic;
  Rng rng{0};
  int64_t step = 0;
  std::vector<int> syn_order, pair_order;
  int64_t syn_cursor = 0, pair_cursor = 0;
};

// One alternating update: n_critic critic steps (with weight clipping), then
// one joint generator/depthnet/warpnet step on the full objective.
LossReport train_step(const std::vector<const SyntheticSample*>& batch_syn,
                      const std::vector<const FramePair*>& batch_real, TrainState& state,
                      const TrainConfig& cfg);

struct Checkpoint {
  int64_t step = 0;
  TrainConfig cfg;
  Nets nets;
  AdamState opt_task, opt_critic;
  std::string rng_state;
  std::vector<int> syn_order, pair_order;
  int64_t syn_cursor = 0, pair_cursor = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

struct TrainResult {
  std::string final_checkpoint;
  std::string step0_checkpoint;
  std::string log_path;
};

// Runs the full loop over shuffled epochs, writing a CSV loss log and periodic
// checkpoints under out_dir. When resume_from is nonempty the loop continues
// from that checkpoint's exact iteration state.
TrainResult train(const TrainConfig& cfg, const std::string& data_dir, const std::string& out_dir,
                  const std::string& resume_from = "");
// Same loop over an already loaded dataset; callers may share one dataset
// across concurrent runs (it is only read).
TrainResult train(const TrainConfig& cfg, const Dataset& dataset, const std::string& out_dir,
                  const std::string& resume_from = "");

// Test path of the pipeline: generator then depthnet only, rescaled to scene
// units.
Tensor predict_depth(const Checkpoint& ckpt, const Tensor& image);
Tensor predict_depth(const Nets& nets, const Tensor& image, double depth_min, double depth_max);

}  // namespace dgr
