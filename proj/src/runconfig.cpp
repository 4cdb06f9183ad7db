#include "dgr/runconfig.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "dgr/error.hpp"

namespace dgr {

namespace {

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
  }
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    long d = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<int>(d);
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
  }
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    unsigned long long d = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects an unsigned integer, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: key '" + key + "' expects true/false, got '" + v + "'");
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct KeyHandler {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::map<std::string, KeyHandler>& key_table() {
  static const std::map<std::string, KeyHandler> table = [] {
    std::map<std::string, KeyHandler> t;
    auto dbl = [&t](const std::string& key, std::function<double&(RunConfig&)> ref) {
      t[key] = {[ref, key](RunConfig& c, const std::string& k, const std::string& v) {
                  ref(c) = parse_double(k, v);
                },
                [ref](const RunConfig& c) { return fmt_double(ref(const_cast<RunConfig&>(c))); }};
    };
    auto integer = [&t](const std::string& key, std::function<int&(RunConfig&)> ref) {
      t[key] = {[ref, key](RunConfig& c, const std::string& k, const std::string& v) {
                  ref(c) = parse_int(k, v);
                },
                [ref](const RunConfig& c) {
                  return std::to_string(ref(const_cast<RunConfig&>(c)));
                }};
    };
    auto boolean = [&t](const std::string& key, std::function<bool&(RunConfig&)> ref) {
      t[key] = {[ref, key](RunConfig& c, const std::string& k, const std::string& v) {
                  ref(c) = parse_bool(k, v);
                },
                [ref](const RunConfig& c) {
                  return ref(const_cast<RunConfig&>(c)) ? "true" : "false";
                }};
    };

    // shared identity of a run
    t["seed"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                   uint64_t s = parse_u64(k, v);
                   c.data.seed = s;
                   c.train.seed = s;
                   c.train.net.seed = s;
                 },
                 [](const RunConfig& c) { return std::to_string(c.train.seed); }};
    t["resolution"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                         int r = parse_int(k, v);
                         c.data.scene.resolution = r;
                         c.train.net.resolution = r;
                       },
                       [](const RunConfig& c) { return std::to_string(c.train.net.resolution); }};
    t["depth_min"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                        double d = parse_double(k, v);
                        c.data.scene.depth_min = d;
                        c.train.depth_min = d;
                      },
                      [](const RunConfig& c) { return fmt_double(c.train.depth_min); }};
    t["depth_max"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                        double d = parse_double(k, v);
                        c.data.scene.depth_max = d;
                        c.train.depth_max = d;
                      },
                      [](const RunConfig& c) { return fmt_double(c.train.depth_max); }};

    // scene / dataset
    dbl("scene_radius", [](RunConfig& c) -> double& { return c.data.scene.radius; });
    dbl("scene_curve_amplitude",
        [](RunConfig& c) -> double& { return c.data.scene.curve_amplitude; });
    dbl("scene_curve_frequency",
        [](RunConfig& c) -> double& { return c.data.scene.curve_frequency; });
    dbl("scene_light_falloff", [](RunConfig& c) -> double& { return c.data.scene.light_falloff; });
    dbl("camera_fx", [](RunConfig& c) -> double& { return c.data.intrinsics.fx; });
    dbl("camera_fy", [](RunConfig& c) -> double& { return c.data.intrinsics.fy; });
    dbl("camera_cx", [](RunConfig& c) -> double& { return c.data.intrinsics.cx; });
    dbl("camera_cy", [](RunConfig& c) -> double& { return c.data.intrinsics.cy; });
    integer("synthetic_count", [](RunConfig& c) -> int& { return c.data.synthetic_count; });
    integer("pair_count", [](RunConfig& c) -> int& { return c.data.pair_count; });
    integer("frames_per_trajectory",
            [](RunConfig& c) -> int& { return c.data.frames_per_trajectory; });
    dbl("train_fraction", [](RunConfig& c) -> double& { return c.data.train_fraction; });

    // networks
    integer("base_channels", [](RunConfig& c) -> int& { return c.train.net.base_channels; });
    integer("encoder_depth", [](RunConfig& c) -> int& { return c.train.net.depth; });

    // training
    integer("steps", [](RunConfig& c) -> int& { return c.train.steps; });
    integer("batch_size", [](RunConfig& c) -> int& { return c.train.batch_size; });
    dbl("learning_rate", [](RunConfig& c) -> double& { return c.train.learning_rate; });
    dbl("adam_beta1", [](RunConfig& c) -> double& { return c.train.adam_beta1; });
    dbl("adam_beta2", [](RunConfig& c) -> double& { return c.train.adam_beta2; });
    integer("n_critic", [](RunConfig& c) -> int& { return c.train.n_critic; });
    dbl("clip_c", [](RunConfig& c) -> double& { return c.train.clip_c; });
    dbl("omega_g", [](RunConfig& c) -> double& { return c.train.weights.omega_g; });
    dbl("omega_r", [](RunConfig& c) -> double& { return c.train.weights.omega_r; });
    dbl("omega_s", [](RunConfig& c) -> double& { return c.train.weights.omega_s; });
    dbl("omega_w", [](RunConfig& c) -> double& { return c.train.weights.omega_w; });
    integer("checkpoint_every", [](RunConfig& c) -> int& { return c.train.checkpoint_every; });
    integer("log_every", [](RunConfig& c) -> int& { return c.train.log_every; });
    dbl("spec_threshold", [](RunConfig& c) -> double& { return c.train.spec_threshold; });
    integer("spec_dilation", [](RunConfig& c) -> int& { return c.train.spec_dilation; });
    boolean("disable_gan", [](RunConfig& c) -> bool& { return c.train.disable_gan; });
    boolean("disable_recon", [](RunConfig& c) -> bool& { return c.train.disable_recon; });
    boolean("disable_synthetic", [](RunConfig& c) -> bool& { return c.train.disable_synthetic; });
    boolean("disable_warp", [](RunConfig& c) -> bool& { return c.train.disable_warp; });
    boolean("use_baseline_gan", [](RunConfig& c) -> bool& { return c.train.use_baseline_gan; });
    return t;
  }();
  return table;
}

}  // namespace

RunConfig::RunConfig() {
  // keep the shared keys coherent out of the box
  data.seed = train.seed;
  data.scene.resolution = train.net.resolution;
  data.scene.depth_min = train.depth_min;
  data.scene.depth_max = train.depth_max;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = key_table().find(key);
  if (it == key_table().end()) throw ConfigError("config: unknown key '" + key + "'");
  it->second.set(*this, key, value);
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto notspace = [](unsigned char c) { return !std::isspace(c); };
    line.erase(line.begin(), std::find_if(line.begin(), line.end(), notspace));
    line.erase(std::find_if(line.rbegin(), line.rend(), notspace).base(), line.end());
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: " + path + ":" + std::to_string(lineno) +
                        ": expected key=value");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    key.erase(std::find_if(key.rbegin(), key.rend(), notspace).base(), key.end());
    value.erase(value.begin(), std::find_if(value.begin(), value.end(), notspace));
    set(key, value);
  }
}

std::string RunConfig::echo() const {
  std::ostringstream os;
  for (const auto& [key, handler] : key_table()) os << key << "=" << handler.get(*this) << "\n";
  return os.str();
}

void RunConfig::write_echo(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw RuntimeError("config: cannot write echo to " + path);
  f << echo();
}

}  // namespace dgr
