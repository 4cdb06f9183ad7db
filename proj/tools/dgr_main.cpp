// Command-line front end; talks to the pipeline exclusively through the C API.
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dgr/dgr.h"

namespace {

struct ConfigDeleter {
  void operator()(dgr_config* c) const { dgr_config_free(c); }
};
using ConfigPtr = std::unique_ptr<dgr_config, ConfigDeleter>;

int fail(dgr_status st) {
  std::fprintf(stderr, "error: %s\n", dgr_last_error());
  return static_cast<int>(st);
}

// --config file first, then -D key=value overrides
int apply_config(dgr_config* cfg, const std::string& config_path,
                 const std::vector<std::string>& overrides) {
  if (!config_path.empty()) {
    dgr_status st = dgr_config_load_file(cfg, config_path.c_str());
    if (st != DGR_OK) return fail(st);
  }
  for (const std::string& kv : overrides) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: override '%s' is not key=value\n", kv.c_str());
      return 1;
    }
    dgr_status st = dgr_config_set(cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
    if (st != DGR_OK) return fail(st);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"task-guided domain-gap reduction for monocular depth, desk scale"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_dir, checkpoint, image, out_csv, out_png, split,
      resume;
  std::vector<std::string> overrides;

  auto add_cfg_opts = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "configuration file (key=value lines)");
    cmd->add_option("-D,--set", overrides, "override a config key, e.g. -D steps=100");
  };

  CLI::App* render = app.add_subcommand("render-data", "render a two-domain dataset");
  add_cfg_opts(render);
  render->add_option("--out", out_dir, "output dataset directory")->required();

  CLI::App* train = app.add_subcommand("train", "run the training loop");
  add_cfg_opts(train);
  train->add_option("--data", data_dir, "dataset directory")->required();
  train->add_option("--out", out_dir, "run directory for checkpoints and logs")->required();
  train->add_option("--resume", resume, "checkpoint to resume from");

  CLI::App* eval = app.add_subcommand("eval", "warp metrics of a checkpoint on a dataset");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--data", data_dir, "dataset directory")->required();
  eval->add_option("--out", out_csv, "output CSV path")->required();
  eval->add_option("--split", split, "train | heldout | all (default heldout)");

  CLI::App* warp = app.add_subcommand("warp-check", "ground-truth warp consistency of a dataset");
  warp->add_option("--data", data_dir, "dataset directory")->required();

  app.add_subcommand("gradcheck", "finite-difference check of every differentiable op and loss");

  CLI::App* diff = app.add_subcommand("diffmap", "input/translated/difference panel for an image");
  diff->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  diff->add_option("--image", image, "input PNG")->required();
  diff->add_option("--out", out_png, "output PNG path")->required();

  CLI11_PARSE(app, argc, argv);

  ConfigPtr cfg(dgr_config_new());
  char buf[65536];

  if (render->parsed()) {
    if (int rc = apply_config(cfg.get(), config_path, overrides)) return rc;
    dgr_status st = dgr_render_dataset(cfg.get(), out_dir.c_str());
    if (st != DGR_OK) return fail(st);
    std::printf("dataset written to %s\n", out_dir.c_str());
    return 0;
  }
  if (train->parsed()) {
    if (int rc = apply_config(cfg.get(), config_path, overrides)) return rc;
    dgr_status st = dgr_train(cfg.get(), data_dir.c_str(), out_dir.c_str(),
                              resume.empty() ? nullptr : resume.c_str(), buf, sizeof(buf));
    if (st != DGR_OK) return fail(st);
    std::printf("final checkpoint: %s\n", buf);
    return 0;
  }
  if (eval->parsed()) {
    dgr_status st = dgr_evaluate(checkpoint.c_str(), data_dir.c_str(), out_csv.c_str(),
                                 split.empty() ? "heldout" : split.c_str(), buf, sizeof(buf));
    if (st != DGR_OK) return fail(st);
    std::printf("%s\n", buf);
    return 0;
  }
  if (warp->parsed()) {
    dgr_status st = dgr_warp_check(data_dir.c_str(), buf, sizeof(buf));
    if (st != DGR_OK) return fail(st);
    std::printf("%s\n", buf);
    return 0;
  }
  if (app.get_subcommand("gradcheck")->parsed()) {
    double worst = 0.0;
    dgr_status st = dgr_gradcheck(buf, sizeof(buf), &worst);
    std::printf("%s", buf);
    if (st != DGR_OK) return fail(st);
    std::printf("max relative error: %.3e\n", worst);
    return 0;
  }
  if (diff->parsed()) {
    dgr_status st = dgr_diffmap(checkpoint.c_str(), image.c_str(), out_png.c_str());
    if (st != DGR_OK) return fail(st);
    std::printf("wrote %s\n", out_png.c_str());
    return 0;
  }
  return 1;
}
