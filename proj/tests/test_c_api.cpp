// Exercises the shared library exactly as an external C caller would.
#include <cstring>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "dgr/dgr.h"

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / ("dgr_capi_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct Pipeline {
  TempDir dir{"pipeline"};
  std::string data_dir, run_dir, ckpt;

  Pipeline() {
    data_dir = (dir.path / "data").string();
    run_dir = (dir.path / "run").string();
    dgr_config* cfg = dgr_config_new();
    REQUIRE(dgr_config_set(cfg, "resolution", "32") == DGR_OK);
    REQUIRE(dgr_config_set(cfg, "camera_fx", "32") == DGR_OK);
    REQUIRE(dgr_config_set(cfg, "camera_fy", "32") == DGR_OK);
    REQUIRE(dgr_config_set(cfg, "camera_cx", "15.5") == DGR_OK);
    REQUIRE(dgr_config_set(cfg, "camera_cy", "15.5") == DGR_OK);
    REQUIRE(dgr_config_set(cfg, "synthetic_count", "8") == DGR_OK);
    REQUIRE(dgr_config_set(cfg, "pair_count", "8") == DGR_OK);
    REQUIRE(dgr_config_set(cfg, "frames_per_trajectory", "4") == DGR_OK);
    REQUIRE(dgr_config_set(cfg, "base_channels", "4") == DGR_OK);
    REQUIRE(dgr_config_set(cfg, "encoder_depth", "2") == DGR_OK);
    REQUIRE(dgr_config_set(cfg, "steps", "2") == DGR_OK);
    REQUIRE(dgr_config_set(cfg, "batch_size", "2") == DGR_OK);
    REQUIRE(dgr_config_set(cfg, "seed", "7") == DGR_OK);
    REQUIRE(dgr_render_dataset(cfg, data_dir.c_str()) == DGR_OK);
    char final_ckpt[512];
    REQUIRE(dgr_train(cfg, data_dir.c_str(), run_dir.c_str(), nullptr, final_ckpt,
                      sizeof(final_ckpt)) == DGR_OK);
    ckpt = final_ckpt;
    dgr_config_free(cfg);
  }
};

Pipeline& pipeline() {
  static Pipeline p;
  return p;
}

}  // namespace

TEST_CASE("config handle lifecycle and errors") {
  dgr_config* cfg = dgr_config_new();
  REQUIRE(cfg != nullptr);

  SUBCASE("unknown keys are rejected with a config error") {
    CHECK(dgr_config_set(cfg, "not_a_key", "1") == DGR_ERR_CONFIG);
    CHECK(std::string(dgr_last_error()).find("not_a_key") != std::string::npos);
  }

  SUBCASE("bad values are rejected naming the key") {
    CHECK(dgr_config_set(cfg, "steps", "abc") == DGR_ERR_CONFIG);
    CHECK(std::string(dgr_last_error()).find("steps") != std::string::npos);
  }

  SUBCASE("echo contains every key with its resolved value") {
    CHECK(dgr_config_set(cfg, "steps", "123") == DGR_OK);
    char buf[65536];
    CHECK(dgr_config_echo(cfg, buf, sizeof(buf)) == DGR_OK);
    std::string echo(buf);
    CHECK(echo.find("steps=123") != std::string::npos);
    CHECK(echo.find("omega_s=100") != std::string::npos);
  }

  SUBCASE("null arguments are config errors") {
    CHECK(dgr_config_load_file(nullptr, "x") == DGR_ERR_CONFIG);
    CHECK(dgr_config_set(cfg, nullptr, "1") == DGR_ERR_CONFIG);
  }

  dgr_config_free(cfg);
}

TEST_CASE("config file loading honors overrides and rejects bad files") {
  TempDir dir("cfgfile");
  std::string path = (dir.path / "run.cfg").string();
  std::ofstream(path) << "# comment\nsteps = 11\nomega_r=5.0\n";
  dgr_config* cfg = dgr_config_new();
  CHECK(dgr_config_load_file(cfg, path.c_str()) == DGR_OK);
  char buf[65536];
  dgr_config_echo(cfg, buf, sizeof(buf));
  std::string echo(buf);
  CHECK(echo.find("steps=11") != std::string::npos);
  CHECK(echo.find("omega_r=5") != std::string::npos);

  std::string bad = (dir.path / "bad.cfg").string();
  std::ofstream(bad) << "mystery_key=3\n";
  CHECK(dgr_config_load_file(cfg, bad.c_str()) == DGR_ERR_CONFIG);
  CHECK(std::string(dgr_last_error()).find("mystery_key") != std::string::npos);
  dgr_config_free(cfg);
}

TEST_CASE("render -> train -> evaluate through the shared library") {
  Pipeline& p = pipeline();
  CHECK(fs::exists(p.data_dir + "/manifest.json"));
  CHECK(fs::exists(p.data_dir + "/config_resolved.cfg"));
  CHECK(fs::exists(p.run_dir + "/config_resolved.cfg"));
  CHECK(fs::exists(p.ckpt));

  char summary[512];
  std::string csv = (p.dir.path / "metrics.csv").string();
  CHECK(dgr_evaluate(p.ckpt.c_str(), p.data_dir.c_str(), csv.c_str(), "heldout", summary,
                     sizeof(summary)) == DGR_OK);
  CHECK(fs::exists(csv));
  CHECK(std::string(summary).find("photo") != std::string::npos);

  CHECK(dgr_evaluate(p.ckpt.c_str(), p.data_dir.c_str(), csv.c_str(), "nonsense", summary,
                     sizeof(summary)) == DGR_ERR_CONFIG);
}

TEST_CASE("warp-check passes on a fresh dataset") {
  Pipeline& p = pipeline();
  char summary[512];
  CHECK(dgr_warp_check(p.data_dir.c_str(), summary, sizeof(summary)) == DGR_OK);
  CHECK(std::string(summary).find("photo") != std::string::npos);
  CHECK(dgr_warp_check((p.dir.path / "missing").string().c_str(), summary, sizeof(summary)) ==
        DGR_ERR_RUNTIME);
}

TEST_CASE("checkpoint handle and predict_depth") {
  Pipeline& p = pipeline();
  dgr_checkpoint* ckpt = dgr_checkpoint_open(p.ckpt.c_str());
  REQUIRE(ckpt != nullptr);
  int res = dgr_checkpoint_resolution(ckpt);
  CHECK(res == 32);

  std::vector<double> rgb(static_cast<size_t>(3 * res * res), 0.5);
  std::vector<double> depth(static_cast<size_t>(res * res), 0.0);
  CHECK(dgr_predict_depth(ckpt, rgb.data(), res, res, depth.data()) == DGR_OK);
  for (double d : depth) {
    CHECK(d >= 0.05);
    CHECK(d <= 10.0);
  }
  CHECK(dgr_predict_depth(ckpt, nullptr, res, res, depth.data()) == DGR_ERR_CONFIG);
  dgr_checkpoint_free(ckpt);

  CHECK(dgr_checkpoint_open((p.dir.path / "nope.dgr").string().c_str()) == nullptr);
  CHECK(std::string(dgr_last_error()).size() > 0);
}

TEST_CASE("diffmap via the C API") {
  Pipeline& p = pipeline();
  std::string image = p.data_dir + "/real/pair_00000_t.png";
  std::string out = (p.dir.path / "dm.png").string();
  CHECK(dgr_diffmap(p.ckpt.c_str(), image.c_str(), out.c_str()) == DGR_OK);
  CHECK(fs::exists(out));
  CHECK(fs::exists((p.dir.path / "dm.pfm").string()));
}
