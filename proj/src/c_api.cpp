#include "dgr/dgr.h"

#include <cstring>
#include <filesystem>
#include <string>

#include "dgr/error.hpp"
#include "dgr/eval.hpp"
#include "dgr/gradcheck.hpp"
#include "dgr/image_io.hpp"
#include "dgr/runconfig.hpp"
#include "dgr/synthdata.hpp"
#include "dgr/training.hpp"

namespace fs = std::filesystem;

struct dgr_config {
  dgr::RunConfig cfg;
};

struct dgr_checkpoint {
  dgr::Checkpoint ckpt;
};

namespace {

thread_local std::string g_last_error;

void copy_out(char* buf, size_t cap, const std::string& s) {
  if (!buf || cap == 0) return;
  size_t n = std::min(cap - 1, s.size());
  std::memcpy(buf, s.data(), n);
  buf[n] = '\0';
}

template <class F>
dgr_status guarded(F&& fn) {
  try {
    fn();
    return DGR_OK;
  } catch (const dgr::ConfigError& e) {
    g_last_error = e.what();
    return DGR_ERR_CONFIG;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DGR_ERR_RUNTIME;
  }
}

const std::vector<int>* pick_split(const dgr::Dataset& ds, const std::string& split, bool pairs) {
  if (split == "all") return nullptr;
  if (split == "train") return pairs ? &ds.manifest.pair_train : &ds.manifest.synthetic_train;
  if (split == "heldout")
    return pairs ? &ds.manifest.pair_heldout : &ds.manifest.synthetic_heldout;
  throw dgr::ConfigError("evaluate: unknown split '" + split + "'");
}

}  // namespace

extern "C" {

const char* dgr_last_error(void) { return g_last_error.c_str(); }

dgr_config* dgr_config_new(void) { return new dgr_config{}; }

void dgr_config_free(dgr_config* cfg) { delete cfg; }

dgr_status dgr_config_load_file(dgr_config* cfg, const char* path) {
  if (!cfg || !path) {
    g_last_error = "dgr_config_load_file: null argument";
    return DGR_ERR_CONFIG;
  }
  return guarded([&] { cfg->cfg.load_file(path); });
}

dgr_status dgr_config_set(dgr_config* cfg, const char* key, const char* value) {
  if (!cfg || !key || !value) {
    g_last_error = "dgr_config_set: null argument";
    return DGR_ERR_CONFIG;
  }
  return guarded([&] { cfg->cfg.set(key, value); });
}

dgr_status dgr_config_echo(const dgr_config* cfg, char* buf, size_t cap) {
  if (!cfg) {
    g_last_error = "dgr_config_echo: null config";
    return DGR_ERR_CONFIG;
  }
  return guarded([&] { copy_out(buf, cap, cfg->cfg.echo()); });
}

dgr_status dgr_render_dataset(const dgr_config* cfg, const char* out_dir) {
  if (!cfg || !out_dir) {
    g_last_error = "dgr_render_dataset: null argument";
    return DGR_ERR_CONFIG;
  }
  return guarded([&] {
    dgr::make_dataset(cfg->cfg.data, out_dir);
    cfg->cfg.write_echo((fs::path(out_dir) / "config_resolved.cfg").string());
  });
}

dgr_status dgr_train(const dgr_config* cfg, const char* data_dir, const char* out_dir,
                     const char* resume_from, char* final_ckpt_path, size_t cap) {
  if (!cfg || !data_dir || !out_dir) {
    g_last_error = "dgr_train: null argument";
    return DGR_ERR_CONFIG;
  }
  return guarded([&] {
    fs::create_directories(out_dir);
    cfg->cfg.write_echo((fs::path(out_dir) / "config_resolved.cfg").string());
    dgr::TrainResult res =
        dgr::train(cfg->cfg.train, data_dir, out_dir, resume_from ? resume_from : "");
    copy_out(final_ckpt_path, cap, res.final_checkpoint);
  });
}

dgr_status dgr_evaluate(const char* checkpoint_path, const char* data_dir, const char* out_csv,
                        const char* split, char* summary, size_t cap) {
  if (!checkpoint_path || !data_dir || !out_csv) {
    g_last_error = "dgr_evaluate: null argument";
    return DGR_ERR_CONFIG;
  }
  return guarded([&] {
    dgr::Checkpoint ckpt = dgr::load_checkpoint(checkpoint_path);
    dgr::Dataset ds = dgr::load_dataset(data_dir);
    std::string split_name = split ? split : "heldout";
    const std::vector<int>* idx = pick_split(ds, split_name, true);
    dgr::MetricsReport rep = dgr::evaluate_warp_metrics(ckpt, ds.pairs, idx);
    dgr::write_metrics_csv(rep, out_csv);
    char line[256];
    std::snprintf(line, sizeof(line),
                  "photo %.6g +- %.6g, geo %.6g +- %.6g, ssim %.6g +- %.6g, pairs %d, flagged %d",
                  rep.photo_mean, rep.photo_std, rep.geo_mean, rep.geo_std, rep.ssim_mean,
                  rep.ssim_std, rep.valid_count, rep.flagged_count);
    copy_out(summary, cap, line);
  });
}

dgr_status dgr_warp_check(const char* data_dir, char* summary, size_t cap) {
  if (!data_dir) {
    g_last_error = "dgr_warp_check: null argument";
    return DGR_ERR_CONFIG;
  }
  return guarded([&] {
    dgr::Dataset ds = dgr::load_dataset(data_dir);
    dgr::MetricsReport rep = dgr::evaluate_warp_metrics_gt(ds.pairs);
    char line[256];
    std::snprintf(line, sizeof(line),
                  "ground-truth warp: photo %.6g (< 0.02), geo %.6g (< 0.01), pairs %d",
                  rep.photo_mean, rep.geo_mean, rep.valid_count);
    copy_out(summary, cap, line);
    if (!(rep.photo_mean < 0.02) || !(rep.geo_mean < 0.01))
      throw dgr::RuntimeError(std::string("warp-check failed: ") + line);
  });
}

dgr_status dgr_gradcheck(char* report, size_t cap, double* max_rel_error) {
  return guarded([&] {
    auto results = dgr::gradcheck_all(0);
    std::string text;
    double worst = 0.0;
    for (const auto& r : results) {
      char line[160];
      std::snprintf(line, sizeof(line), "%-34s %.3e\n", r.name.c_str(), r.max_rel_error);
      text += line;
      worst = std::max(worst, r.max_rel_error);
    }
    if (max_rel_error) *max_rel_error = worst;
    copy_out(report, cap, text);
    if (!(worst < 1e-4))
      throw dgr::RuntimeError("gradcheck failed: max relative error " + std::to_string(worst));
  });
}

dgr_status dgr_diffmap(const char* checkpoint_path, const char* image_png, const char* out_png) {
  if (!checkpoint_path || !image_png || !out_png) {
    g_last_error = "dgr_diffmap: null argument";
    return DGR_ERR_CONFIG;
  }
  return guarded([&] {
    dgr::Checkpoint ckpt = dgr::load_checkpoint(checkpoint_path);
    dgr::Tensor image = dgr::load_image_png(image_png);
    dgr::emit_difference_map(ckpt, image, out_png);
  });
}

dgr_checkpoint* dgr_checkpoint_open(const char* path) {
  if (!path) {
    g_last_error = "dgr_checkpoint_open: null path";
    return nullptr;
  }
  try {
    auto* h = new dgr_checkpoint{dgr::load_checkpoint(path)};
    return h;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return nullptr;
  }
}

void dgr_checkpoint_free(dgr_checkpoint* ckpt) { delete ckpt; }

int dgr_checkpoint_resolution(const dgr_checkpoint* ckpt) {
  return ckpt ? ckpt->ckpt.cfg.net.resolution : 0;
}

dgr_status dgr_predict_depth(const dgr_checkpoint* ckpt, const double* rgb, int h, int w,
                             double* depth_out) {
  if (!ckpt || !rgb || !depth_out) {
    g_last_error = "dgr_predict_depth: null argument";
    return DGR_ERR_CONFIG;
  }
  return guarded([&] {
    std::vector<double> data(rgb, rgb + static_cast<size_t>(3) * h * w);
    dgr::Tensor image = dgr::Tensor::from_data({1, 3, h, w}, std::move(data));
    dgr::Tensor depth = dgr::predict_depth(ckpt->ckpt, image);
    std::memcpy(depth_out, depth.data().data(), static_cast<size_t>(h) * w * sizeof(double));
  });
}

}  // extern "C"
