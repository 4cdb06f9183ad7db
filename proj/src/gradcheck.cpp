#include "dgr/gradcheck.hpp"

#include <cmath>

#include "dgr/error.hpp"
#include "dgr/geometry.hpp"
#include "dgr/losses.hpp"
#include "dgr/networks.hpp"
#include "dgr/rng.hpp"
#include "dgr/synthdata.hpp"
#include "dgr/training.hpp"

namespace dgr {

double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                         double eps) {
  Tensor leaf = Tensor::from_data(x.shape(), {x.data().begin(), x.data().end()}, true);
  std::vector<double> analytic;
  {
    Tape tape;
    Tensor y = f(leaf);
    if (y.numel() != 1) throw RuntimeError("finite_diff_check: f must return a scalar");
    tape.backward(y);
    auto g = leaf.grad();
    analytic.assign(g.begin(), g.end());
  }
  if (analytic.empty()) analytic.assign(static_cast<size_t>(x.numel()), 0.0);

  double max_rel = 0.0;
  std::vector<double> base(x.data().begin(), x.data().end());
  for (size_t i = 0; i < base.size(); ++i) {
    std::vector<double> plus = base, minus = base;
    plus[i] += eps;
    minus[i] -= eps;
    double fp = f(Tensor::from_data(x.shape(), std::move(plus))).value();
    double fm = f(Tensor::from_data(x.shape(), std::move(minus))).value();
    double fd = (fp - fm) / (2.0 * eps);
    double rel = std::abs(analytic[i] - fd) / std::max(1.0, std::abs(fd));
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

namespace {

Tensor random_tensor(Rng& rng, Shape shape, double lo = 0.1, double hi = 0.9) {
  std::vector<double> data(static_cast<size_t>(numel_of(shape)));
  for (double& v : data) v = rng.uniform(lo, hi);
  return Tensor::from_data(std::move(shape), std::move(data));
}

// scalarize through a fixed random weighting so permuted outputs are caught
Tensor weighted_sum(const Tensor& t, const Tensor& w) { return sum(t * w); }

struct OpCheck {
  std::string name;
  std::function<double(Rng&)> run;  // one probe; returns max rel error
};

double run_probes(const OpCheck& check, uint64_t seed) {
  double worst = 0.0;
  for (int probe = 0; probe < 5; ++probe) {
    Rng rng(hash_combine(seed, static_cast<uint64_t>(probe + 1)));
    worst = std::max(worst, check.run(rng));
  }
  return worst;
}

}  // namespace

std::vector<GradCheckResult> gradcheck_ops(uint64_t seed) {
  std::vector<OpCheck> checks;
  auto unary = [](const std::string& name, std::function<Tensor(const Tensor&)> op, double lo,
                  double hi) {
    return OpCheck{name, [op, lo, hi](Rng& rng) {
                     Tensor x = random_tensor(rng, {2, 3, 4}, lo, hi);
                     Tensor w = random_tensor(rng, {2, 3, 4}, -1.0, 1.0);
                     return finite_diff_check(
                         [&](const Tensor& t) { return weighted_sum(op(t), w); }, x);
                   }};
  };
  checks.push_back(unary("add_scalar", [](const Tensor& t) { return t + 0.37; }, 0.1, 0.9));
  checks.push_back(unary("mul_scalar", [](const Tensor& t) { return t * 1.7; }, 0.1, 0.9));
  checks.push_back(unary("neg", [](const Tensor& t) { return neg(t); }, 0.1, 0.9));
  checks.push_back(unary("abs_pos", [](const Tensor& t) { return abs(t); }, 0.1, 0.9));
  checks.push_back(unary("abs_neg", [](const Tensor& t) { return abs(t); }, -0.9, -0.1));
  checks.push_back(unary("exp", [](const Tensor& t) { return exp(t); }, 0.1, 0.9));
  checks.push_back(unary("log", [](const Tensor& t) { return log(t); }, 0.1, 0.9));
  checks.push_back(unary("sqrt", [](const Tensor& t) { return sqrt(t); }, 0.1, 0.9));
  checks.push_back(unary("sin", [](const Tensor& t) { return sin(t); }, 0.1, 0.9));
  checks.push_back(unary("cos", [](const Tensor& t) { return cos(t); }, 0.1, 0.9));
  checks.push_back(unary("sigmoid", [](const Tensor& t) { return sigmoid(t); }, 0.1, 0.9));
  checks.push_back(
      unary("leaky_relu_pos", [](const Tensor& t) { return leaky_relu(t, 0.2); }, 0.1, 0.9));
  checks.push_back(
      unary("leaky_relu_neg", [](const Tensor& t) { return leaky_relu(t, 0.2); }, -0.9, -0.1));
  checks.push_back(
      unary("clamp_interior", [](const Tensor& t) { return clamp(t, 0.05, 0.95); }, 0.1, 0.9));
  checks.push_back(unary("square", [](const Tensor& t) { return square(t); }, 0.1, 0.9));
  checks.push_back(unary("sum", [](const Tensor& t) { return sum(t); }, 0.1, 0.9));
  checks.push_back(unary("mean", [](const Tensor& t) { return mean(t); }, 0.1, 0.9));
  checks.push_back({"reshape", [](Rng& rng) {
                      Tensor x = random_tensor(rng, {2, 3, 4});
                      Tensor w = random_tensor(rng, {4, 6}, -1.0, 1.0);
                      return finite_diff_check(
                          [&](const Tensor& t) { return weighted_sum(reshape(t, {4, 6}), w); },
                          x);
                    }});

  auto binary = [](const std::string& name,
                   std::function<Tensor(const Tensor&, const Tensor&)> op, Shape sa, Shape sb,
                   bool check_b) {
    return OpCheck{name, [op, sa, sb, check_b](Rng& rng) {
                     Tensor a = random_tensor(rng, sa);
                     Tensor b = random_tensor(rng, sb);
                     Shape out_shape = sa.size() >= sb.size() ? sa : sb;
                     Tensor w = random_tensor(rng, out_shape, -1.0, 1.0);
                     double ea = finite_diff_check(
                         [&](const Tensor& t) { return weighted_sum(op(t, b), w); }, a);
                     if (!check_b) return ea;
                     double eb = finite_diff_check(
                         [&](const Tensor& t) { return weighted_sum(op(a, t), w); }, b);
                     return std::max(ea, eb);
                   }};
  };
  checks.push_back(binary("add", [](const Tensor& a, const Tensor& b) { return a + b; },
                          {2, 3, 4}, {2, 3, 4}, true));
  checks.push_back(binary("sub", [](const Tensor& a, const Tensor& b) { return a - b; },
                          {2, 3, 4}, {2, 3, 4}, true));
  checks.push_back(binary("mul", [](const Tensor& a, const Tensor& b) { return a * b; },
                          {2, 3, 4}, {2, 3, 4}, true));
  checks.push_back(binary("div", [](const Tensor& a, const Tensor& b) { return a / b; },
                          {2, 3, 4}, {2, 3, 4}, true));
  checks.push_back(binary("add_broadcast", [](const Tensor& a, const Tensor& b) { return a + b; },
                          {2, 3, 4}, {1, 3, 1}, true));
  checks.push_back(binary("mul_broadcast", [](const Tensor& a, const Tensor& b) { return a * b; },
                          {2, 3, 4}, {1, 3, 1}, true));
  checks.push_back(binary("mul_scalar_tensor",
                          [](const Tensor& a, const Tensor& b) { return a * b; }, {2, 3, 4}, {1},
                          true));

  checks.push_back({"sum_axis", [](Rng& rng) {
                      Tensor x = random_tensor(rng, {2, 3, 4});
                      Tensor w = random_tensor(rng, {2, 1, 4}, -1.0, 1.0);
                      return finite_diff_check(
                          [&](const Tensor& t) { return weighted_sum(sum_axis(t, 1, true), w); },
                          x);
                    }});
  checks.push_back({"mean_axis", [](Rng& rng) {
                      Tensor x = random_tensor(rng, {2, 3, 4});
                      Tensor w = random_tensor(rng, {2, 3, 1}, -1.0, 1.0);
                      return finite_diff_check(
                          [&](const Tensor& t) { return weighted_sum(mean_axis(t, 2, true), w); },
                          x);
                    }});
  checks.push_back({"narrow", [](Rng& rng) {
                      Tensor x = random_tensor(rng, {2, 5, 3});
                      Tensor w = random_tensor(rng, {2, 2, 3}, -1.0, 1.0);
                      return finite_diff_check(
                          [&](const Tensor& t) { return weighted_sum(narrow(t, 1, 1, 2), w); },
                          x);
                    }});
  checks.push_back({"concat", [](Rng& rng) {
                      Tensor a = random_tensor(rng, {1, 2, 3, 3});
                      Tensor b = random_tensor(rng, {1, 2, 3, 3});
                      Tensor w = random_tensor(rng, {1, 4, 3, 3}, -1.0, 1.0);
                      double ea = finite_diff_check(
                          [&](const Tensor& t) { return weighted_sum(concat({t, b}, 1), w); }, a);
                      double eb = finite_diff_check(
                          [&](const Tensor& t) { return weighted_sum(concat({a, t}, 1), w); }, b);
                      return std::max(ea, eb);
                    }});
  checks.push_back({"select_stack", [](Rng& rng) {
                      Tensor x = random_tensor(rng, {6});
                      Tensor w = random_tensor(rng, {3}, -1.0, 1.0);
                      return finite_diff_check(
                          [&](const Tensor& t) {
                            std::vector<Tensor> parts{select(t, 4), select(t, 0), select(t, 2)};
                            return weighted_sum(stack_scalars(parts), w);
                          },
                          x);
                    }});
  checks.push_back({"make_grid", [](Rng& rng) {
                      Tensor a = random_tensor(rng, {1, 1, 2, 3});
                      Tensor b = random_tensor(rng, {1, 1, 2, 3});
                      Tensor w = random_tensor(rng, {1, 2, 3, 2}, -1.0, 1.0);
                      double ea = finite_diff_check(
                          [&](const Tensor& t) { return weighted_sum(make_grid(t, b), w); }, a);
                      double eb = finite_diff_check(
                          [&](const Tensor& t) { return weighted_sum(make_grid(a, t), w); }, b);
                      return std::max(ea, eb);
                    }});
  checks.push_back({"conv2d", [](Rng& rng) {
                      Tensor x = random_tensor(rng, {1, 2, 5, 5});
                      Tensor wgt = random_tensor(rng, {3, 2, 3, 3}, -0.5, 0.5);
                      Tensor bias = random_tensor(rng, {3}, -0.2, 0.2);
                      Tensor w = random_tensor(rng, {1, 3, 3, 3}, -1.0, 1.0);
                      auto f_in = [&](const Tensor& t) {
                        return weighted_sum(conv2d(t, wgt, bias, 2, 1), w);
                      };
                      auto f_w = [&](const Tensor& t) {
                        return weighted_sum(conv2d(x, t, bias, 2, 1), w);
                      };
                      auto f_b = [&](const Tensor& t) {
                        return weighted_sum(conv2d(x, wgt, t, 2, 1), w);
                      };
                      return std::max({finite_diff_check(f_in, x), finite_diff_check(f_w, wgt),
                                       finite_diff_check(f_b, bias)});
                    }});
  checks.push_back({"upsample_bilinear", [](Rng& rng) {
                      Tensor x = random_tensor(rng, {1, 2, 4, 4});
                      Tensor w = random_tensor(rng, {1, 2, 8, 8}, -1.0, 1.0);
                      return finite_diff_check(
                          [&](const Tensor& t) {
                            return weighted_sum(upsample_bilinear(t, 2), w);
                          },
                          x);
                    }});
  checks.push_back({"grid_sample_input", [](Rng& rng) {
                      Tensor x = random_tensor(rng, {1, 2, 5, 5});
                      // interior coords with fractional part in [0.15, 0.85]
                      std::vector<double> g;
                      for (int i = 0; i < 9; ++i) {
                        g.push_back(static_cast<double>(rng.index(4)) + rng.uniform(0.15, 0.85));
                        g.push_back(static_cast<double>(rng.index(4)) + rng.uniform(0.15, 0.85));
                      }
                      Tensor grid = Tensor::from_data({1, 3, 3, 2}, std::move(g));
                      Tensor w = random_tensor(rng, {1, 2, 3, 3}, -1.0, 1.0);
                      return finite_diff_check(
                          [&](const Tensor& t) {
                            return weighted_sum(grid_sample_bilinear(t, grid).values, w);
                          },
                          x);
                    }});
  checks.push_back({"grid_sample_grid", [](Rng& rng) {
                      Tensor x = random_tensor(rng, {1, 2, 5, 5});
                      std::vector<double> g;
                      for (int i = 0; i < 9; ++i) {
                        g.push_back(static_cast<double>(rng.index(4)) + rng.uniform(0.15, 0.85));
                        g.push_back(static_cast<double>(rng.index(4)) + rng.uniform(0.15, 0.85));
                      }
                      Tensor grid = Tensor::from_data({1, 3, 3, 2}, std::move(g));
                      Tensor w = random_tensor(rng, {1, 2, 3, 3}, -1.0, 1.0);
                      return finite_diff_check(
                          [&](const Tensor& t) {
                            return weighted_sum(grid_sample_bilinear(x, t).values, w);
                          },
                          grid);
                    }});

  std::vector<GradCheckResult> results;
  for (const OpCheck& c : checks)
    results.push_back({"op/" + c.name, run_probes(c, hash_combine(seed, 0x6f7073ULL))});
  return results;
}

// ---------------------------------------------------------------------------
// end-to-end loss battery on a tiny rendered scene
// ---------------------------------------------------------------------------

namespace {

struct TinyScene {
  Tensor x_t, x_t1;        // rendered 16x16 frames
  Tensor depth_t, depth_t1;
  Tensor pose;             // [6], slightly off ground truth
  CameraIntrinsics k;
  Nets nets;
  Tensor x_syn, depth_syn_norm;
};

TinyScene make_tiny_scene(uint64_t seed) {
  TinyScene s;
  SceneSpec scene;
  scene.resolution = 16;
  scene.style = Style::Real;
  scene.texture_seed = hash_combine(seed, 42);
  s.k = {16.0, 16.0, 7.5, 7.5};
  auto poses = generate_trajectory(scene, 2, hash_combine(seed, 7));
  SyntheticSample f0 = render_frame(scene, poses[0], s.k);
  SyntheticSample f1 = render_frame(scene, poses[1], s.k);
  s.x_t = f0.image;
  s.x_t1 = f1.image;
  s.depth_t = f0.depth_gt;
  s.depth_t1 = f1.depth_gt;
  Pose6D rel = se3_to_pose6d(se3_compose(se3_inverse(poses[1]), poses[0]));
  s.pose = Tensor::from_data(
      {6}, {rel.tx + 0.003, rel.ty - 0.002, rel.tz + 0.002, rel.rx + 0.004, rel.ry - 0.003,
            rel.rz + 0.002});
  NetConfig nc;
  nc.resolution = 16;
  nc.base_channels = 4;
  nc.depth = 2;
  nc.seed = seed;
  s.nets = build_nets(nc);
  // perturb the zero-initialized heads so their gradients are generic
  Rng prng(hash_combine(seed, 99));
  for (NetworkParams* net : {&s.nets.generator, &s.nets.warpnet})
    for (Tensor t : net->parameters())
      for (double& v : t.mutable_data()) v += prng.normal() * 0.02;
  SceneSpec synth = scene;
  synth.style = Style::Synthetic;
  SyntheticSample sf = render_frame(synth, poses[0], s.k);
  s.x_syn = sf.image;
  s.depth_syn_norm = (sf.depth_gt - synth.depth_min) * (1.0 / (synth.depth_max - synth.depth_min));
  return s;
}

// check d loss/d param for a few representative tensors of a net by swapping
// the parameter handle for the probe tensor
double check_net_params(NetworkParams& net, const std::function<Tensor()>& loss) {
  std::vector<size_t> picks = {0, net.weights.size() - 1};
  double worst = 0.0;
  for (size_t idx : picks) {
    Tensor original = net.weights[idx];
    auto f = [&](const Tensor& t) {
      net.weights[idx] = t;
      Tensor value = loss();
      net.weights[idx] = original;
      return value;
    };
    worst = std::max(worst, finite_diff_check(f, original));
    net.weights[idx] = original;
    Tensor orig_bias = net.biases[idx];
    auto fb = [&](const Tensor& t) {
      net.biases[idx] = t;
      Tensor value = loss();
      net.biases[idx] = orig_bias;
      return value;
    };
    worst = std::max(worst, finite_diff_check(fb, orig_bias));
    net.biases[idx] = orig_bias;
  }
  return worst;
}

}  // namespace

std::vector<GradCheckResult> gradcheck_losses(uint64_t seed) {
  TinyScene s = make_tiny_scene(seed);
  std::vector<GradCheckResult> out;
  auto push = [&](const std::string& name, double err) { out.push_back({name, err}); };

  // the brightness fit is detached by design, so the photometric checks hold
  // it fixed at the base-point fit
  BrightnessParams bp;
  {
    WarpArtifacts warp = compute_warp(s.depth_t, s.x_t1, s.depth_t1, s.pose, s.k);
    bp = brightness_transform(s.x_t, warp.warped_image, warp.validity_mask).first;
  }
  auto photo_from = [&](const Tensor& depth_t, const Tensor& img_t1, const Tensor& depth_t1,
                        const Tensor& pose) {
    WarpArtifacts warp = compute_warp(depth_t, img_t1, depth_t1, pose, s.k);
    return photometric_loss_fixed(s.x_t, warp, bp);
  };
  push("loss/L_photo_wrt_depth_t", finite_diff_check([&](const Tensor& t) {
         return photo_from(t, s.x_t1, s.depth_t1, s.pose);
       }, s.depth_t));
  push("loss/L_photo_wrt_pose", finite_diff_check([&](const Tensor& t) {
         return photo_from(s.depth_t, s.x_t1, s.depth_t1, t);
       }, s.pose));
  push("loss/L_photo_wrt_image_t1", finite_diff_check([&](const Tensor& t) {
         return photo_from(s.depth_t, t, s.depth_t1, s.pose);
       }, s.x_t1));
  push("loss/L_photo_wrt_x_t", finite_diff_check([&](const Tensor& t) {
         WarpArtifacts warp = compute_warp(s.depth_t, s.x_t1, s.depth_t1, s.pose, s.k);
         return photometric_loss_fixed(t, warp, bp);
       }, s.x_t));

  auto geo_from = [&](const Tensor& depth_t, const Tensor& depth_t1, const Tensor& pose) {
    WarpArtifacts warp = compute_warp(depth_t, s.x_t1, depth_t1, pose, s.k);
    return geometric_consistency_loss(warp);
  };
  push("loss/L_geo_wrt_depth_t", finite_diff_check([&](const Tensor& t) {
         return geo_from(t, s.depth_t1, s.pose);
       }, s.depth_t));
  push("loss/L_geo_wrt_depth_t1", finite_diff_check([&](const Tensor& t) {
         return geo_from(s.depth_t, t, s.pose);
       }, s.depth_t1));
  push("loss/L_geo_wrt_pose", finite_diff_check([&](const Tensor& t) {
         return geo_from(s.depth_t, s.depth_t1, t);
       }, s.pose));

  push("loss/L_smooth_wrt_depth", finite_diff_check([&](const Tensor& t) {
         return smoothness_loss(s.x_t, t);
       }, s.depth_t));
  push("loss/L_smooth_wrt_image", finite_diff_check([&](const Tensor& t) {
         return smoothness_loss(t, s.depth_t);
       }, s.x_t));

  // synthetic L1 through generator + depthnet
  auto l_s = [&]() {
    Tensor translated = generator_forward(s.nets.generator, s.x_syn);
    Tensor pred = depthnet_forward(s.nets.depthnet, translated);
    return depth_l1_loss(pred, s.depth_syn_norm);
  };
  push("loss/L_S_wrt_image", finite_diff_check([&](const Tensor& t) {
         Tensor pred = depthnet_forward(s.nets.depthnet, generator_forward(s.nets.generator, t));
         return depth_l1_loss(pred, s.depth_syn_norm);
       }, s.x_syn));
  push("loss/L_S_wrt_generator_params", check_net_params(s.nets.generator, l_s));
  push("loss/L_S_wrt_depthnet_params", check_net_params(s.nets.depthnet, l_s));

  // reconstruction through the generator
  Tensor spec_mask = specularity_mask(s.x_t);
  auto l_r = [&]() {
    Tensor gen_syn = generator_forward(s.nets.generator, s.x_syn);
    Tensor gen_real = generator_forward(s.nets.generator, s.x_t);
    return reconstruction_loss(gen_syn, s.x_syn, gen_real, s.x_t, spec_mask);
  };
  push("loss/L_R_wrt_generator_params", check_net_params(s.nets.generator, l_r));
  push("loss/L_R_wrt_gen_real_direct", finite_diff_check([&](const Tensor& t) {
         return reconstruction_loss(s.x_syn, s.x_syn, t, s.x_t, spec_mask);
       }, generator_forward(s.nets.generator, s.x_t)));

  // adversarial loss through generator and critic
  auto l_gan = [&]() {
    Tensor d_syn = critic_forward(s.nets.critic, generator_forward(s.nets.generator, s.x_syn));
    Tensor d_real = critic_forward(s.nets.critic, generator_forward(s.nets.generator, s.x_t));
    return wgan_generator_loss(d_syn, d_real);
  };
  push("loss/L_GAN_wrt_generator_params", check_net_params(s.nets.generator, l_gan));
  push("loss/L_GAN_wrt_critic_params", check_net_params(s.nets.critic, l_gan));
  push("loss/L_GAN_wrt_image", finite_diff_check([&](const Tensor& t) {
         Tensor d_syn = critic_forward(s.nets.critic, generator_forward(s.nets.generator, t));
         Tensor d_real = critic_forward(s.nets.critic, generator_forward(s.nets.generator, s.x_t));
         return wgan_generator_loss(d_syn, d_real);
       }, s.x_syn));

  // warpnet pose path: full warp loss w.r.t. warpnet parameters
  auto l_w = [&]() {
    Tensor pose = reshape(warpnet_forward(s.nets.warpnet, s.x_t, s.x_t1), {6});
    WarpArtifacts warp = compute_warp(s.depth_t, s.x_t1, s.depth_t1, pose, s.k);
    Tensor geo = geometric_consistency_loss(warp);
    return photometric_loss_fixed(s.x_t, warp, bp) + geo * 0.5;
  };
  push("loss/L_W_wrt_warpnet_params", check_net_params(s.nets.warpnet, l_w));

  return out;
}

std::vector<GradCheckResult> gradcheck_all(uint64_t seed) {
  std::vector<GradCheckResult> out = gradcheck_ops(seed);
  for (auto& r : gradcheck_losses(seed)) out.push_back(r);
  return out;
}

}  // namespace dgr
