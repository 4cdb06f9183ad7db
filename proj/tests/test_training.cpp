#include <cmath>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "dgr/error.hpp"
#include "dgr/eval.hpp"
#include "dgr/synthdata.hpp"
#include "dgr/training.hpp"

using namespace dgr;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / ("dgr_train_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// one tiny on-disk dataset shared by the whole binary
const std::string& shared_dataset() {
  static std::string path = [] {
    static TempDir dir("shared_ds");
    DatasetConfig cfg;
    cfg.scene.resolution = 32;
    cfg.intrinsics = {32.0, 32.0, 15.5, 15.5};
    cfg.synthetic_count = 12;
    cfg.pair_count = 12;
    cfg.frames_per_trajectory = 4;
    cfg.seed = 21;
    make_dataset(cfg, dir.path.string());
    return dir.path.string();
  }();
  return path;
}

TrainConfig tiny_train_cfg() {
  TrainConfig cfg;
  cfg.steps = 3;
  cfg.batch_size = 2;
  cfg.net.resolution = 32;
  cfg.net.base_channels = 4;
  cfg.net.depth = 2;
  cfg.seed = 1;
  cfg.net.seed = 1;
  cfg.log_every = 1;
  cfg.checkpoint_every = 0;
  return cfg;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("adam_step") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Tensor p = Tensor::from_data({3}, {1.0, -2.0, 0.5}, true);
    AdamState st;
    adam_step({p}, st, 1e-2, 0.9, 0.999);
    CHECK(p.at(0) == 1.0);
    CHECK(p.at(1) == -2.0);
    CHECK(p.at(2) == 0.5);
  }

  SUBCASE("first step moves by about -lr * sign(g)") {
    Tensor p = Tensor::scalar(1.0, true);
    {
      Tape tape;
      Tensor loss = p * 3.0;  // grad = 3
      tape.backward(loss);
    }
    AdamState st;
    adam_step({p}, st, 1e-3, 0.9, 0.999);
    CHECK(p.value() == doctest::Approx(1.0 - 1e-3).epsilon(1e-6));
  }

  SUBCASE("two identical runs stay identical over 100 steps") {
    auto run = [] {
      Tensor p = Tensor::from_data({2}, {0.4, -0.3}, true);
      AdamState st;
      for (int i = 0; i < 100; ++i) {
        p.zero_grad();
        {
          Tape tape;
          Tensor loss = sum(square(p - 0.1));
          tape.backward(loss);
        }
        adam_step({p}, st, 1e-3, 0.5, 0.999);
      }
      return std::pair(p.at(0), p.at(1));
    };
    auto a = run();
    auto b = run();
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
  }
}

TEST_CASE("train_step") {
  Dataset ds = load_dataset(shared_dataset());
  TrainConfig cfg = tiny_train_cfg();
  std::vector<const SyntheticSample*> bs = {&ds.synthetic[0], &ds.synthetic[1]};
  std::vector<const FramePair*> bp = {&ds.pairs[0], &ds.pairs[1]};

  SUBCASE("report total equals the weighted combination to 1e-12") {
    TrainState state;
    state.nets = build_nets(cfg.net);
    LossReport rep = train_step(bs, bp, state, cfg);
    double expect = cfg.weights.omega_g * rep.l_gan + cfg.weights.omega_r * rep.l_r +
                    0.5 * (cfg.weights.omega_s * rep.l_s + cfg.weights.omega_w * rep.l_w);
    CHECK(std::abs(rep.total - expect) < 1e-12);
    double lw = rep.l_photo + 0.5 * rep.l_geo + 0.1 * rep.l_smooth;
    CHECK(rep.l_w == doctest::Approx(lw).epsilon(1e-12));
  }

  SUBCASE("critic weights stay inside the clip range") {
    TrainState state;
    state.nets = build_nets(cfg.net);
    for (int i = 0; i < 2; ++i) train_step(bs, bp, state, cfg);
    for (const Tensor& t : state.nets.critic.parameters())
      for (double v : t.data()) {
        CHECK(v >= -cfg.clip_c);
        CHECK(v <= cfg.clip_c);
      }
  }

  SUBCASE("all ablation flags reduce to a no-op for non-critic parameters") {
    TrainConfig off = cfg;
    off.disable_gan = off.disable_recon = off.disable_synthetic = off.disable_warp = true;
    TrainState state;
    state.nets = build_nets(cfg.net);
    std::vector<double> before;
    for (const Tensor& t : state.nets.task_parameters())
      before.insert(before.end(), t.data().begin(), t.data().end());
    LossReport rep = train_step(bs, bp, state, off);
    CHECK(rep.total == 0.0);
    std::vector<double> after;
    for (const Tensor& t : state.nets.task_parameters())
      after.insert(after.end(), t.data().begin(), t.data().end());
    CHECK(before == after);
    // with the GAN disabled the critic is untouched as well
    for (const Tensor& t : state.nets.critic.parameters())
      for (double v : t.data()) CHECK(std::isfinite(v));
  }

  SUBCASE("warp-only ablation reduces to pure self-supervision") {
    TrainConfig warp_only = cfg;
    warp_only.disable_gan = warp_only.disable_recon = warp_only.disable_synthetic = true;
    TrainState state;
    state.nets = build_nets(cfg.net);
    LossReport rep = train_step(bs, bp, state, warp_only);
    CHECK(rep.l_gan == 0.0);
    CHECK(rep.l_r == 0.0);
    CHECK(rep.l_s == 0.0);
    CHECK(rep.l_w > 0.0);
    CHECK(rep.total == doctest::Approx(0.5 * rep.l_w).epsilon(1e-12));
  }

  SUBCASE("gradient isolation: omega_w = 0 leaves warpnet untouched") {
    TrainConfig no_warp = cfg;
    no_warp.weights.omega_w = 0.0;
    TrainState state;
    state.nets = build_nets(cfg.net);
    std::vector<double> before;
    for (const Tensor& t : state.nets.warpnet.parameters())
      before.insert(before.end(), t.data().begin(), t.data().end());
    train_step(bs, bp, state, no_warp);
    std::vector<double> after;
    for (const Tensor& t : state.nets.warpnet.parameters())
      after.insert(after.end(), t.data().begin(), t.data().end());
    CHECK(before == after);
  }

  SUBCASE("gradient isolation: omega_s = 0 removes the L1 gradient path") {
    TrainConfig no_syn = cfg;
    no_syn.weights.omega_s = 0.0;
    TrainState state;
    state.nets = build_nets(cfg.net);
    LossReport rep = train_step(bs, bp, state, no_syn);
    CHECK(rep.l_s == 0.0);
  }

  SUBCASE("baseline GAN variant runs and skips clipping") {
    TrainConfig base = cfg;
    base.use_baseline_gan = true;
    TrainState state;
    state.nets = build_nets(cfg.net);
    LossReport rep = train_step(bs, bp, state, base);
    CHECK(std::isfinite(rep.l_gan));
    CHECK(rep.l_gan < 0.0);  // log-probability form
  }
}

TEST_CASE("train loop, determinism and resume") {
  TempDir out_a("run_a");
  TrainConfig cfg = tiny_train_cfg();
  cfg.steps = 6;
  TrainResult ra = train(cfg, shared_dataset(), out_a.path.string());

  SUBCASE("loss log exists with a header and final row") {
    std::string log = read_file(ra.log_path);
    CHECK(log.find("step,l_gan,l_r,l_s,l_w,l_photo,l_geo,l_smooth,total") != std::string::npos);
    CHECK(log.find("\n6,") != std::string::npos);
  }

  SUBCASE("identical config and seed reproduce the log bit-for-bit") {
    TempDir out_b("run_b");
    TrainResult rb = train(cfg, shared_dataset(), out_b.path.string());
    CHECK(read_file(ra.log_path) == read_file(rb.log_path));
  }

  SUBCASE("checkpoint resume reproduces the continuation exactly") {
    // fresh run with a mid checkpoint
    TempDir out_c("run_c");
    TrainConfig half = cfg;
    half.checkpoint_every = 3;
    TrainResult rc = train(half, shared_dataset(), out_c.path.string());
    std::string mid = (out_c.path / "checkpoint_000003.dgr").string();
    REQUIRE(fs::exists(mid));

    TempDir out_d("run_d");
    TrainResult rd = train(half, shared_dataset(), out_d.path.string(), mid);
    Checkpoint full_end = load_checkpoint(rc.final_checkpoint);
    Checkpoint resumed_end = load_checkpoint(rd.final_checkpoint);
    REQUIRE(full_end.step == resumed_end.step);
    for (size_t n = 0; n < 4; ++n) {
      const NetworkParams* a = nullptr;
      const NetworkParams* b = nullptr;
      switch (n) {
        case 0: a = &full_end.nets.generator; b = &resumed_end.nets.generator; break;
        case 1: a = &full_end.nets.depthnet; b = &resumed_end.nets.depthnet; break;
        case 2: a = &full_end.nets.warpnet; b = &resumed_end.nets.warpnet; break;
        default: a = &full_end.nets.critic; b = &resumed_end.nets.critic; break;
      }
      for (size_t i = 0; i < a->weights.size(); ++i) {
        for (int64_t j = 0; j < a->weights[i].numel(); ++j)
          CHECK(a->weights[i].at(j) == b->weights[i].at(j));
        for (int64_t j = 0; j < a->biases[i].numel(); ++j)
          CHECK(a->biases[i].at(j) == b->biases[i].at(j));
      }
    }
  }

  SUBCASE("checkpoint reload reproduces forward outputs bit-exactly") {
    Checkpoint ckpt = load_checkpoint(ra.final_checkpoint);
    Dataset ds = load_dataset(shared_dataset());
    Tensor d1 = predict_depth(ckpt, ds.synthetic[0].image);
    Checkpoint ckpt2 = load_checkpoint(ra.final_checkpoint);
    Tensor d2 = predict_depth(ckpt2, ds.synthetic[0].image);
    for (int64_t i = 0; i < d1.numel(); ++i) CHECK(d1.at(i) == d2.at(i));
  }

  SUBCASE("predict_depth emits scene-unit maps of the right shape") {
    Checkpoint ckpt = load_checkpoint(ra.step0_checkpoint);
    Dataset ds = load_dataset(shared_dataset());
    Tensor d = predict_depth(ckpt, ds.synthetic[0].image);
    CHECK(d.shape() == Shape{1, 1, 32, 32});
    for (int64_t i = 0; i < d.numel(); ++i) {
      CHECK(d.at(i) >= ckpt.cfg.depth_min);
      CHECK(d.at(i) <= ckpt.cfg.depth_max);
    }
    Tensor again = predict_depth(ckpt, ds.synthetic[0].image);
    for (int64_t i = 0; i < d.numel(); ++i) CHECK(d.at(i) == again.at(i));
  }
}

TEST_CASE("train validates its config") {
  TrainConfig cfg = tiny_train_cfg();
  cfg.steps = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  TrainConfig cfg2 = tiny_train_cfg();
  cfg2.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg2.validate(), ConfigError);
  TrainConfig cfg3 = tiny_train_cfg();
  cfg3.net.resolution = 64;  // mismatched with the 32x32 dataset
  TempDir out("mismatch");
  CHECK_THROWS_AS(train(cfg3, shared_dataset(), out.path.string()), ConfigError);
}
