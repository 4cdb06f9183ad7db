#include "dgr/training.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "dgr/error.hpp"
#include "dgr/geometry.hpp"
#include "json.hpp"

namespace dgr {

namespace fs = std::filesystem;
using nlohmann::json;

void TrainConfig::validate() const {
  if (steps <= 0) throw ConfigError("TrainConfig: steps must be > 0");
  if (batch_size <= 0) throw ConfigError("TrainConfig: batch_size must be > 0");
  if (!(learning_rate > 0.0)) throw ConfigError("TrainConfig: learning_rate must be > 0");
  if (n_critic < 1) throw ConfigError("TrainConfig: n_critic must be >= 1");
  if (!(clip_c > 0.0)) throw ConfigError("TrainConfig: clip_c must be > 0");
  if (!(depth_max > depth_min) || !(depth_min > 0.0))
    throw ConfigError("TrainConfig: bad depth range");
  if (weights.omega_g < 0.0 || weights.omega_r < 0.0 || weights.omega_s < 0.0 ||
      weights.omega_w < 0.0)
    throw ConfigError("TrainConfig: negative loss weights");
}

std::vector<Tensor> Nets::task_parameters() const {
  std::vector<Tensor> out = generator.parameters();
  for (const Tensor& t : depthnet.parameters()) out.push_back(t);
  for (const Tensor& t : warpnet.parameters()) out.push_back(t);
  return out;
}

Nets build_nets(const NetConfig& cfg) {
  Nets n;
  n.generator = build_generator(cfg);
  n.depthnet = build_depthnet(cfg);
  n.warpnet = build_warpnet(cfg);
  n.critic = build_critic(cfg);
  return n;
}

void adam_step(const std::vector<Tensor>& params, AdamState& state, double lr, double beta1,
               double beta2, double eps) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(static_cast<size_t>(params[i].numel()), 0.0);
      state.v[i].assign(static_cast<size_t>(params[i].numel()), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw RuntimeError("adam_step: state/param mismatch");
  state.t += 1;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i];
    auto data = p.mutable_data();
    auto g = p.grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != data.size()) throw RuntimeError("adam_step: state size mismatch");
    for (size_t j = 0; j < data.size(); ++j) {
      double gj = j < g.size() ? g[j] : 0.0;
      m[j] = beta1 * m[j] + (1.0 - beta1) * gj;
      v[j] = beta2 * v[j] + (1.0 - beta2) * gj * gj;
      double mhat = m[j] / bc1;
      double vhat = v[j] / bc2;
      data[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

namespace {

Tensor stack_batch(const std::vector<Tensor>& items) {
  if (items.size() == 1) return items[0];
  return concat(items, 0);
}

void check_params_finite(const Nets& nets, int64_t step) {
  for (const NetworkParams* net : {&nets.generator, &nets.depthnet, &nets.warpnet, &nets.critic})
    for (const Tensor& t : net->parameters())
      for (double v : t.data())
        if (!std::isfinite(v))
          throw RuntimeError("training: non-finite parameter in " + net->arch + " at step " +
                             std::to_string(step));
}

void check_critic_clipped(const NetworkParams& critic, double c) {
  for (const Tensor& t : critic.parameters())
    for (double v : t.data())
      if (v < -c || v > c)
        throw RuntimeError("training: critic weight escaped the clip range");
}

double finite_or_throw(const Tensor& t, const char* name) {
  double v = t.value();
  if (!std::isfinite(v))
    throw RuntimeError(std::string("training: loss term ") + name + " is non-finite");
  return v;
}

}  // namespace

LossReport train_step(const std::vector<const SyntheticSample*>& batch_syn,
                      const std::vector<const FramePair*>& batch_real, TrainState& state,
                      const TrainConfig& cfg) {
  if (batch_syn.empty() || batch_real.empty())
    throw RuntimeError("train_step: batches must be non-empty");
  Nets& nets = state.nets;

  bool gan_on = !cfg.disable_gan && cfg.weights.omega_g > 0.0;
  bool recon_on = !cfg.disable_recon && cfg.weights.omega_r > 0.0;
  bool syn_on = !cfg.disable_synthetic && cfg.weights.omega_s > 0.0;
  bool warp_on = !cfg.disable_warp && cfg.weights.omega_w > 0.0;

  std::vector<Tensor> syn_imgs, real_t_imgs, real_t1_imgs, syn_depths;
  for (const SyntheticSample* s : batch_syn) {
    syn_imgs.push_back(s->image);
    syn_depths.push_back(s->depth_gt);
  }
  for (const FramePair* p : batch_real) {
    real_t_imgs.push_back(p->image_t);
    real_t1_imgs.push_back(p->image_t1);
  }
  Tensor x_syn = stack_batch(syn_imgs);
  Tensor x_real_t = stack_batch(real_t_imgs);
  Tensor x_real_t1 = stack_batch(real_t1_imgs);
  int64_t nb = static_cast<int64_t>(batch_real.size());
  double depth_range = cfg.depth_max - cfg.depth_min;

  // ---- critic phase ----
  if (gan_on) {
    for (int it = 0; it < cfg.n_critic; ++it) {
      // generator runs outside the tape: its outputs are constants here
      Tensor gsyn = generator_forward(nets.generator, x_syn);
      Tensor greal = generator_forward(nets.generator, x_real_t);
      nets.critic.zero_grads();
      {
        Tape tape;
        Tensor d_syn = critic_forward(nets.critic, gsyn);
        Tensor d_real = critic_forward(nets.critic, greal);
        Tensor closs = cfg.use_baseline_gan
                           ? neg(baseline_gan_loss(sigmoid(d_syn), sigmoid(d_real)))
                           : wgan_critic_loss(d_syn, d_real);
        finite_or_throw(closs, "critic");
        tape.backward(closs);
      }
      adam_step(nets.critic.parameters(), state.opt_critic, cfg.learning_rate, cfg.adam_beta1,
                cfg.adam_beta2);
      if (!cfg.use_baseline_gan) {
        clip_weights(nets.critic, cfg.clip_c);
        check_critic_clipped(nets.critic, cfg.clip_c);
      }
    }
  }

  // ---- task phase ----
  for (NetworkParams* net : {&nets.generator, &nets.depthnet, &nets.warpnet}) net->zero_grads();
  nets.critic.set_requires_grad(false);  // gradient still flows through it to G

  LossReport report;
  {
    Tape tape;
    Tensor zero = Tensor::scalar(0.0);
    Tensor l_gan = zero, l_r = zero, l_s = zero, l_w = zero;
    Tensor l_photo = zero, l_geo = zero, l_smooth = zero;

    bool need_syn_gen = gan_on || recon_on || syn_on;
    bool need_real_t = gan_on || recon_on || warp_on;
    bool need_real_t1 = recon_on || warp_on;

    Tensor gen_syn, gen_real_t, gen_real_t1;
    if (need_syn_gen) gen_syn = generator_forward(nets.generator, x_syn);
    if (need_real_t) gen_real_t = generator_forward(nets.generator, x_real_t);
    if (need_real_t1) gen_real_t1 = generator_forward(nets.generator, x_real_t1);

    if (syn_on) {
      Tensor pred = depthnet_forward(nets.depthnet, gen_syn);
      Tensor gt_norm = (stack_batch(syn_depths) - cfg.depth_min) * (1.0 / depth_range);
      l_s = depth_l1_loss(pred, gt_norm);
    }

    if (warp_on) {
      Tensor depth_norm_t = depthnet_forward(nets.depthnet, gen_real_t);
      Tensor depth_norm_t1 = depthnet_forward(nets.depthnet, gen_real_t1);
      Tensor depth_t = depth_norm_t * depth_range + cfg.depth_min;
      Tensor depth_t1 = depth_norm_t1 * depth_range + cfg.depth_min;
      Tensor poses = warpnet_forward(nets.warpnet, gen_real_t, gen_real_t1);  // [nb,6]
      Tensor photo_acc = zero, geo_acc = zero, smooth_acc = zero;
      for (int64_t i = 0; i < nb; ++i) {
        Tensor pose_i = reshape(narrow(poses, 0, i, 1), {6});
        Tensor xt_i = narrow(gen_real_t, 0, i, 1);
        Tensor xt1_i = narrow(gen_real_t1, 0, i, 1);
        Tensor dt_i = narrow(depth_t, 0, i, 1);
        Tensor dt1_i = narrow(depth_t1, 0, i, 1);
        WarpArtifacts warp = compute_warp(dt_i, xt1_i, dt1_i, pose_i, batch_real[static_cast<size_t>(i)]->intrinsics);
        WarpLossTerms terms = warp_loss(xt_i, dt_i, warp);
        photo_acc = photo_acc + terms.photo;
        geo_acc = geo_acc + terms.geo;
        smooth_acc = smooth_acc + terms.smooth;
      }
      double inv = 1.0 / static_cast<double>(nb);
      l_photo = photo_acc * inv;
      l_geo = geo_acc * inv;
      l_smooth = smooth_acc * inv;
      l_w = l_photo * LossWeights::warp_photo + l_geo * LossWeights::warp_geo +
            l_smooth * LossWeights::warp_smooth;
    }

    if (recon_on) {
      Tensor mask_t = specularity_mask(x_real_t, cfg.spec_threshold, cfg.spec_dilation);
      Tensor mask_t1 = specularity_mask(x_real_t1, cfg.spec_threshold, cfg.spec_dilation);
      Tensor gen_real = concat({gen_real_t, gen_real_t1}, 0);
      Tensor x_real = concat({x_real_t, x_real_t1}, 0);
      Tensor mask = concat({mask_t, mask_t1}, 0);
      l_r = reconstruction_loss(gen_syn, x_syn, gen_real, x_real, mask);
    }

    if (gan_on) {
      Tensor d_syn = critic_forward(nets.critic, gen_syn);
      Tensor d_real = critic_forward(nets.critic, gen_real_t);
      l_gan = cfg.use_baseline_gan ? baseline_gan_loss(sigmoid(d_syn), sigmoid(d_real))
                                   : wgan_generator_loss(d_syn, d_real);
    }

    LossWeights w = cfg.weights;
    if (!gan_on) w.omega_g = 0.0;
    if (!recon_on) w.omega_r = 0.0;
    if (!syn_on) w.omega_s = 0.0;
    if (!warp_on) w.omega_w = 0.0;
    Tensor total = combine_total(l_gan, l_r, l_s, l_w, w);

    report = total_loss(finite_or_throw(l_gan, "L_GAN"), finite_or_throw(l_r, "L_R"),
                        finite_or_throw(l_s, "L_S"), finite_or_throw(l_w, "L_W"), w);
    report.l_photo = finite_or_throw(l_photo, "L_photo");
    report.l_geo = finite_or_throw(l_geo, "L_geo");
    report.l_smooth = finite_or_throw(l_smooth, "L_smooth");
    finite_or_throw(total, "total");

    tape.backward(total);
  }
  nets.critic.set_requires_grad(true);
  adam_step(nets.task_parameters(), state.opt_task, cfg.learning_rate, cfg.adam_beta1,
            cfg.adam_beta2);

  state.step += 1;
  check_params_finite(nets, state.step);
  return report;
}

// ---------------------------------------------------------------------------
// checkpoint serialization
// ---------------------------------------------------------------------------

namespace {

void put_u64(std::ostream& os, uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), 8);
}

uint64_t get_u64(std::istream& is) {
  uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

void put_string(std::ostream& os, const std::string& s) {
  put_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
  uint64_t n = get_u64(is);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}

void put_doubles(std::ostream& os, std::span<const double> v) {
  put_u64(os, v.size());
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
}

std::vector<double> get_doubles(std::istream& is) {
  uint64_t n = get_u64(is);
  std::vector<double> v(n);
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * 8));
  return v;
}

void put_ints(std::ostream& os, const std::vector<int>& v) {
  put_u64(os, v.size());
  for (int x : v) put_u64(os, static_cast<uint64_t>(static_cast<int64_t>(x)));
}

std::vector<int> get_ints(std::istream& is) {
  uint64_t n = get_u64(is);
  std::vector<int> v(n);
  for (uint64_t i = 0; i < n; ++i) v[i] = static_cast<int>(static_cast<int64_t>(get_u64(is)));
  return v;
}

json config_to_json(const TrainConfig& c) {
  return json{{"steps", c.steps},
              {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"adam_beta1", c.adam_beta1},
              {"adam_beta2", c.adam_beta2},
              {"n_critic", c.n_critic},
              {"clip_c", c.clip_c},
              {"omega_g", c.weights.omega_g},
              {"omega_r", c.weights.omega_r},
              {"omega_s", c.weights.omega_s},
              {"omega_w", c.weights.omega_w},
              {"seed", c.seed},
              {"checkpoint_every", c.checkpoint_every},
              {"log_every", c.log_every},
              {"depth_min", c.depth_min},
              {"depth_max", c.depth_max},
              {"spec_threshold", c.spec_threshold},
              {"spec_dilation", c.spec_dilation},
              {"resolution", c.net.resolution},
              {"base_channels", c.net.base_channels},
              {"encoder_depth", c.net.depth},
              {"disable_gan", c.disable_gan},
              {"disable_recon", c.disable_recon},
              {"disable_synthetic", c.disable_synthetic},
              {"disable_warp", c.disable_warp},
              {"use_baseline_gan", c.use_baseline_gan}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.steps = j.at("steps").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.adam_beta1 = j.at("adam_beta1").get<double>();
  c.adam_beta2 = j.at("adam_beta2").get<double>();
  c.n_critic = j.at("n_critic").get<int>();
  c.clip_c = j.at("clip_c").get<double>();
  c.weights.omega_g = j.at("omega_g").get<double>();
  c.weights.omega_r = j.at("omega_r").get<double>();
  c.weights.omega_s = j.at("omega_s").get<double>();
  c.weights.omega_w = j.at("omega_w").get<double>();
  c.seed = j.at("seed").get<uint64_t>();
  c.checkpoint_every = j.at("checkpoint_every").get<int>();
  c.log_every = j.at("log_every").get<int>();
  c.depth_min = j.at("depth_min").get<double>();
  c.depth_max = j.at("depth_max").get<double>();
  c.spec_threshold = j.at("spec_threshold").get<double>();
  c.spec_dilation = j.at("spec_dilation").get<int>();
  c.net.resolution = j.at("resolution").get<int>();
  c.net.base_channels = j.at("base_channels").get<int>();
  c.net.depth = j.at("encoder_depth").get<int>();
  c.net.seed = c.seed;
  c.disable_gan = j.at("disable_gan").get<bool>();
  c.disable_recon = j.at("disable_recon").get<bool>();
  c.disable_synthetic = j.at("disable_synthetic").get<bool>();
  c.disable_warp = j.at("disable_warp").get<bool>();
  c.use_baseline_gan = j.at("use_baseline_gan").get<bool>();
  return c;
}

void put_net(std::ostream& os, const NetworkParams& net) {
  put_string(os, net.arch);
  put_u64(os, static_cast<uint64_t>(net.cfg.resolution));
  put_u64(os, static_cast<uint64_t>(net.cfg.base_channels));
  put_u64(os, static_cast<uint64_t>(net.cfg.depth));
  put_u64(os, net.cfg.seed);
  put_u64(os, net.manifest.size());
  for (size_t i = 0; i < net.manifest.size(); ++i) {
    const LayerSpec& s = net.manifest[i];
    put_string(os, s.name);
    put_u64(os, static_cast<uint64_t>(s.in_ch));
    put_u64(os, static_cast<uint64_t>(s.out_ch));
    put_u64(os, static_cast<uint64_t>(s.kernel));
    put_u64(os, static_cast<uint64_t>(s.stride));
    put_u64(os, static_cast<uint64_t>(s.pad));
    put_u64(os, static_cast<uint64_t>(s.act));
    put_doubles(os, net.weights[i].data());
    put_doubles(os, net.biases[i].data());
  }
}

NetworkParams get_net(std::istream& is) {
  NetworkParams net;
  net.arch = get_string(is);
  net.cfg.resolution = static_cast<int>(get_u64(is));
  net.cfg.base_channels = static_cast<int>(get_u64(is));
  net.cfg.depth = static_cast<int>(get_u64(is));
  net.cfg.seed = get_u64(is);
  uint64_t layers = get_u64(is);
  for (uint64_t i = 0; i < layers; ++i) {
    LayerSpec s;
    s.name = get_string(is);
    s.in_ch = static_cast<int>(get_u64(is));
    s.out_ch = static_cast<int>(get_u64(is));
    s.kernel = static_cast<int>(get_u64(is));
    s.stride = static_cast<int>(get_u64(is));
    s.pad = static_cast<int>(get_u64(is));
    s.act = static_cast<Activation>(get_u64(is));
    std::vector<double> w = get_doubles(is);
    std::vector<double> b = get_doubles(is);
    net.manifest.push_back(s);
    net.weights.push_back(Tensor::from_data({s.out_ch, s.in_ch, s.kernel, s.kernel}, std::move(w), true));
    net.biases.push_back(Tensor::from_data({s.out_ch}, std::move(b), true));
  }
  return net;
}

void put_adam(std::ostream& os, const AdamState& st) {
  put_u64(os, static_cast<uint64_t>(st.t));
  put_u64(os, st.m.size());
  for (size_t i = 0; i < st.m.size(); ++i) {
    put_doubles(os, st.m[i]);
    put_doubles(os, st.v[i]);
  }
}

AdamState get_adam(std::istream& is) {
  AdamState st;
  st.t = static_cast<int64_t>(get_u64(is));
  uint64_t n = get_u64(is);
  st.m.resize(n);
  st.v.resize(n);
  for (uint64_t i = 0; i < n; ++i) {
    st.m[i] = get_doubles(is);
    st.v[i] = get_doubles(is);
  }
  return st;
}

constexpr char kMagic[8] = {'D', 'G', 'R', 'C', 'K', 'P', 'T', '1'};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw RuntimeError("save_checkpoint: cannot open " + path);
  os.write(kMagic, 8);
  put_u64(os, static_cast<uint64_t>(ckpt.step));
  put_string(os, config_to_json(ckpt.cfg).dump());
  put_net(os, ckpt.nets.generator);
  put_net(os, ckpt.nets.depthnet);
  put_net(os, ckpt.nets.warpnet);
  put_net(os, ckpt.nets.critic);
  put_adam(os, ckpt.opt_task);
  put_adam(os, ckpt.opt_critic);
  put_string(os, ckpt.rng_state);
  put_ints(os, ckpt.syn_order);
  put_ints(os, ckpt.pair_order);
  put_u64(os, static_cast<uint64_t>(ckpt.syn_cursor));
  put_u64(os, static_cast<uint64_t>(ckpt.pair_cursor));
  if (!os) throw RuntimeError("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw RuntimeError("load_checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw RuntimeError("load_checkpoint: " + path + " is not a checkpoint file");
  Checkpoint ckpt;
  ckpt.step = static_cast<int64_t>(get_u64(is));
  ckpt.cfg = config_from_json(json::parse(get_string(is)));
  ckpt.nets.generator = get_net(is);
  ckpt.nets.depthnet = get_net(is);
  ckpt.nets.warpnet = get_net(is);
  ckpt.nets.critic = get_net(is);
  ckpt.opt_task = get_adam(is);
  ckpt.opt_critic = get_adam(is);
  ckpt.rng_state = get_string(is);
  ckpt.syn_order = get_ints(is);
  ckpt.pair_order = get_ints(is);
  ckpt.syn_cursor = static_cast<int64_t>(get_u64(is));
  ckpt.pair_cursor = static_cast<int64_t>(get_u64(is));
  if (!is) throw RuntimeError("load_checkpoint: truncated file " + path);
  return ckpt;
}

// ---------------------------------------------------------------------------
// training loop
// ---------------------------------------------------------------------------

namespace {

Checkpoint snapshot(const TrainState& state, const TrainConfig& cfg) {
  Checkpoint c;
  c.step = state.step;
  c.cfg = cfg;
  c.nets = state.nets;
  c.opt_task = state.opt_task;
  c.opt_critic = state.opt_critic;
  c.rng_state = state.rng.serialize();
  c.syn_order = state.syn_order;
  c.pair_order = state.pair_order;
  c.syn_cursor = state.syn_cursor;
  c.pair_cursor = state.pair_cursor;
  return c;
}

void log_row(std::ofstream& log, int64_t step, const LossReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g",
                static_cast<long long>(step), r.l_gan, r.l_r, r.l_s, r.l_w, r.l_photo, r.l_geo,
                r.l_smooth, r.total);
  log << buf << "\n";
  log.flush();
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const std::string& data_dir,
                  const std::string& out_dir, const std::string& resume_from) {
  Dataset ds = load_dataset(data_dir);
  return train(cfg, ds, out_dir, resume_from);
}

TrainResult train(const TrainConfig& cfg_in, const Dataset& ds, const std::string& out_dir,
                  const std::string& resume_from) {
  TrainConfig cfg = cfg_in;
  cfg.validate();
  if (ds.manifest.scene.resolution != cfg.net.resolution)
    throw ConfigError("train: dataset resolution " + std::to_string(ds.manifest.scene.resolution) +
                      " does not match net resolution " + std::to_string(cfg.net.resolution));
  cfg.depth_min = ds.manifest.scene.depth_min;
  cfg.depth_max = ds.manifest.scene.depth_max;
  if (ds.manifest.synthetic_train.empty() || ds.manifest.pair_train.empty())
    throw RuntimeError("train: dataset has no training split");

  fs::create_directories(out_dir);
  TrainState state;
  TrainResult result;
  result.log_path = (fs::path(out_dir) / "loss_log.csv").string();
  std::ofstream log;

  if (resume_from.empty()) {
    cfg.net.seed = cfg.seed;
    state.nets = build_nets(cfg.net);
    state.rng = Rng(hash_combine(cfg.seed, 0x747261696eULL));
    state.syn_order = ds.manifest.synthetic_train;
    state.pair_order = ds.manifest.pair_train;
    state.rng.shuffle(state.syn_order);
    state.rng.shuffle(state.pair_order);
    log.open(result.log_path);
    log << "step,l_gan,l_r,l_s,l_w,l_photo,l_geo,l_smooth,total\n";
    result.step0_checkpoint = (fs::path(out_dir) / "checkpoint_000000.dgr").string();
    save_checkpoint(snapshot(state, cfg), result.step0_checkpoint);
  } else {
    Checkpoint ckpt = load_checkpoint(resume_from);
    cfg = ckpt.cfg;
    state.nets = ckpt.nets;
    state.opt_task = ckpt.opt_task;
    state.opt_critic = ckpt.opt_critic;
    state.rng.deserialize(ckpt.rng_state);
    state.step = ckpt.step;
    state.syn_order = ckpt.syn_order;
    state.pair_order = ckpt.pair_order;
    state.syn_cursor = ckpt.syn_cursor;
    state.pair_cursor = ckpt.pair_cursor;
    log.open(result.log_path, std::ios::app);
    result.step0_checkpoint = resume_from;
  }

  auto next_batch = [&](std::vector<int>& order, int64_t& cursor, int count) {
    std::vector<int> idx;
    if (cursor + count > static_cast<int64_t>(order.size())) {
      state.rng.shuffle(order);
      cursor = 0;
    }
    for (int i = 0; i < count; ++i) idx.push_back(order[static_cast<size_t>(cursor++)]);
    return idx;
  };

  while (state.step < cfg.steps) {
    auto syn_idx = next_batch(state.syn_order, state.syn_cursor, cfg.batch_size);
    auto pair_idx = next_batch(state.pair_order, state.pair_cursor, cfg.batch_size);
    std::vector<const SyntheticSample*> bs;
    std::vector<const FramePair*> bp;
    for (int i : syn_idx) bs.push_back(&ds.synthetic[static_cast<size_t>(i)]);
    for (int i : pair_idx) bp.push_back(&ds.pairs[static_cast<size_t>(i)]);
    LossReport rep = train_step(bs, bp, state, cfg);
    if (state.step % cfg.log_every == 0 || state.step == cfg.steps)
      log_row(log, state.step, rep);
    if (cfg.checkpoint_every > 0 && state.step % cfg.checkpoint_every == 0 &&
        state.step != cfg.steps) {
      char name[64];
      std::snprintf(name, sizeof(name), "checkpoint_%06lld.dgr",
                    static_cast<long long>(state.step));
      save_checkpoint(snapshot(state, cfg), (fs::path(out_dir) / name).string());
    }
  }
  char name[64];
  std::snprintf(name, sizeof(name), "checkpoint_%06lld.dgr", static_cast<long long>(state.step));
  result.final_checkpoint = (fs::path(out_dir) / name).string();
  save_checkpoint(snapshot(state, cfg), result.final_checkpoint);
  return result;
}

Tensor predict_depth(const Nets& nets, const Tensor& image, double depth_min, double depth_max) {
  Tensor translated = generator_forward(nets.generator, image);
  Tensor norm = depthnet_forward(nets.depthnet, translated);
  return norm * (depth_max - depth_min) + depth_min;
}

Tensor predict_depth(const Checkpoint& ckpt, const Tensor& image) {
  return predict_depth(ckpt.nets, image, ckpt.cfg.depth_min, ckpt.cfg.depth_max);
}

}  // namespace dgr
