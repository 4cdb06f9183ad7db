#include "dgr/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "dgr/error.hpp"
#include "dgr/image_io.hpp"
#include "dgr/rng.hpp"
#include "json.hpp"

namespace dgr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kLightRef = 2.0;      // distances below this render at full light
constexpr double kWaterPeriod = 6.0;   // z period of water pools
constexpr double kWaterDepthFrac = 0.35;
constexpr int kNoisePeriod = 24;       // angular lattice cells around the tube

double smoothstep01(double t) { return t * t * (3.0 - 2.0 * t); }

// Value noise on the tube surface. `a` is the angular coordinate in lattice
// cells (wraps with period `kNoisePeriod`), `z` the axial coordinate in cells.
double value_noise(uint64_t seed, double a, double z) {
  double fa = std::floor(a), fz = std::floor(z);
  int ia = static_cast<int>(fa), iz = static_cast<int>(fz);
  double ta = smoothstep01(a - fa), tz = smoothstep01(z - fz);
  auto lattice = [&](int da, int dz) {
    int aw = ((ia + da) % kNoisePeriod + kNoisePeriod) % kNoisePeriod;
    uint64_t h = hash_combine(seed, hash_combine(static_cast<uint64_t>(aw),
                                                 static_cast<uint64_t>(iz + dz + (1 << 20))));
    return hash_to_unit(h) * 2.0 - 1.0;  // [-1, 1]
  };
  double v00 = lattice(0, 0), v10 = lattice(1, 0);
  double v01 = lattice(0, 1), v11 = lattice(1, 1);
  return (v00 * (1.0 - ta) + v10 * ta) * (1.0 - tz) + (v01 * (1.0 - ta) + v11 * ta) * tz;
}

double fbm(uint64_t seed, double a_units, double z_units, int octaves) {
  // a_units is arc length around the tube, z_units the axial position
  double amp = 1.0, total = 0.0, norm = 0.0;
  double fa = static_cast<double>(kNoisePeriod) / (2.0 * M_PI);  // cells per radian-unit
  double scale = 0.55;  // base cell size ~1.8 units axially
  for (int o = 0; o < octaves; ++o) {
    total += amp * value_noise(hash_combine(seed, static_cast<uint64_t>(o)),
                               a_units * fa * scale, z_units * scale);
    norm += amp;
    amp *= 0.45;
    scale *= 2.0;
  }
  return total / norm;
}

struct TubeField {
  const SceneSpec& scene;
  double ph1, ph2, ph3;

  explicit TubeField(const SceneSpec& s)
      : scene(s),
        ph1(hash_to_unit(hash_combine(s.texture_seed, 11)) * 2.0 * M_PI),
        ph2(hash_to_unit(hash_combine(s.texture_seed, 12)) * 2.0 * M_PI),
        ph3(hash_to_unit(hash_combine(s.texture_seed, 13)) * 2.0 * M_PI) {}

  double center_x(double z) const {
    return scene.curve_amplitude * std::sin(scene.curve_frequency * z + ph1);
  }
  double center_y(double z) const {
    return 0.8 * scene.curve_amplitude * std::sin(0.77 * scene.curve_frequency * z + ph2);
  }
  double wall_radius(double z) const {
    return scene.radius * (1.0 + 0.08 * std::sin(1.7 * z + ph3));
  }

  // Smooth periodic pool strength in [0,1]; nonzero only for the real style.
  double water_bump(double z) const {
    if (scene.style != Style::Real) return 0.0;
    double c = std::cos(2.0 * M_PI * (z - ph3) / kWaterPeriod);
    if (c <= 0.0) return 0.0;
    return c * c * c * c;
  }

  double water_level(double z) const {
    return center_y(z) + wall_radius(z) * (1.0 - kWaterDepthFrac * water_bump(z));
  }

  // Positive inside the open lumen, crosses zero at the wall or water surface.
  double field(double x, double y, double z) const {
    double dx = x - center_x(z), dy = y - center_y(z);
    double wall = wall_radius(z) - std::sqrt(dx * dx + dy * dy);
    double water = water_level(z) - y;
    return std::min(wall, water);
  }
};

struct Hit {
  double depth;    // camera-frame z distance, clamped to [depth_min, depth_max]
  bool surface;    // false when the ray reached the far clip
  bool water;      // hit the water surface rather than the wall
  double wx, wy, wz;  // world-space hit point
};

Hit march_ray(const TubeField& tube, const std::array<double, 3>& origin,
              const std::array<double, 3>& dir) {
  const SceneSpec& sc = tube.scene;
  double s = sc.depth_min;
  double prev = s;
  double d = tube.field(origin[0] + s * dir[0], origin[1] + s * dir[1], origin[2] + s * dir[2]);
  while (d > 0.0) {
    prev = s;
    s += std::max(0.25 * d, 0.003);
    if (s >= sc.depth_max) {
      double fx = origin[0] + sc.depth_max * dir[0];
      double fy = origin[1] + sc.depth_max * dir[1];
      double fz = origin[2] + sc.depth_max * dir[2];
      return {sc.depth_max, false, false, fx, fy, fz};
    }
    d = tube.field(origin[0] + s * dir[0], origin[1] + s * dir[1], origin[2] + s * dir[2]);
  }
  // bisect [prev, s] to the surface
  double lo = prev, hi = s;
  for (int i = 0; i < 48; ++i) {
    double mid = 0.5 * (lo + hi);
    double fm = tube.field(origin[0] + mid * dir[0], origin[1] + mid * dir[1],
                           origin[2] + mid * dir[2]);
    if (fm > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  double hit_s = 0.5 * (lo + hi);
  double hx = origin[0] + hit_s * dir[0];
  double hy = origin[1] + hit_s * dir[1];
  double hz = origin[2] + hit_s * dir[2];
  double wall = tube.wall_radius(hz) -
                std::hypot(hx - tube.center_x(hz), hy - tube.center_y(hz));
  double water = tube.water_level(hz) - hy;
  return {std::min(std::max(hit_s, sc.depth_min), sc.depth_max), true, water < wall, hx, hy, hz};
}

// Surface-attached specular highlight strength; blob placement hashes the
// (angle, z) lattice so highlights move with the anatomy, not the camera.
double specular_field(const SceneSpec& sc, double theta, double z) {
  if (sc.style != Style::Real) return 0.0;
  constexpr int kCells = 6;       // angular cells
  constexpr double kZCell = 1.1;  // axial cell size
  double a = (theta + M_PI) / (2.0 * M_PI) * kCells;
  double zc = z / kZCell;
  int ia = static_cast<int>(std::floor(a)), iz = static_cast<int>(std::floor(zc));
  double total = 0.0;
  for (int da = -1; da <= 1; ++da)
    for (int dz = -1; dz <= 1; ++dz) {
      int ca = ((ia + da) % kCells + kCells) % kCells;
      int cz = iz + dz;
      uint64_t h = hash_combine(hash_combine(sc.texture_seed, 777),
                                hash_combine(static_cast<uint64_t>(ca),
                                             static_cast<uint64_t>(cz + (1 << 20))));
      if (hash_to_unit(h) > 0.22) continue;  // most cells carry no highlight
      double bx = (static_cast<double>(ia + da) + 0.2 + 0.6 * hash_to_unit(splitmix64(h + 1)));
      double bz = (static_cast<double>(iz + dz) + 0.2 + 0.6 * hash_to_unit(splitmix64(h + 2)));
      double sigma = 0.55 + 0.45 * hash_to_unit(splitmix64(h + 3));  // in cell units
      double dda = a - bx;
      // wrap the angular distance
      if (dda > kCells * 0.5) dda -= kCells;
      if (dda < -kCells * 0.5) dda += kCells;
      double ddz = zc - bz;
      double d2 = (dda * dda + ddz * ddz) / (sigma * sigma * 0.09);
      total += std::exp(-0.5 * d2);
    }
  return total;
}

void shade_pixel(const TubeField& tube, const Hit& hit, double vignette, double* rgb) {
  const SceneSpec& sc = tube.scene;
  double light = std::min(1.0, std::pow(kLightRef / hit.depth, sc.light_falloff));
  double r, g, b;
  if (!hit.surface) {
    r = g = b = 0.35 * light;  // open lumen past the far clip
  } else {
    double theta = std::atan2(hit.wy - tube.center_y(hit.wz), hit.wx - tube.center_x(hit.wz));
    double arc = theta * sc.radius;
    if (hit.water) {
      double m = 0.8 + 0.2 * fbm(hash_combine(sc.texture_seed, 5), arc, hit.wz, 2);
      r = 0.23 * m;
      g = 0.30 * m;
      b = 0.27 * m;
    } else if (sc.style == Style::Real) {
      double m = 0.55 + 0.28 * fbm(hash_combine(sc.texture_seed, 1), arc, hit.wz, 3);
      double vein = std::abs(fbm(hash_combine(sc.texture_seed, 2), arc, hit.wz, 2) - 0.04);
      double vessel = vein < 0.10 ? smoothstep01(1.0 - vein / 0.10) : 0.0;
      m *= 1.0 - 0.35 * vessel;
      r = m * 1.00;
      g = m * 0.58;
      b = m * 0.50;
    } else {
      double m = 0.62 + 0.18 * fbm(hash_combine(sc.texture_seed, 1), arc, hit.wz, 2);
      r = m * 0.92;
      g = m * 0.66;
      b = m * 0.58;
    }
    r *= light;
    g *= light;
    b *= light;
    if (sc.style == Style::Real && !hit.water) {
      double s = 1.6 * specular_field(sc, theta, hit.wz);
      r = r * vignette + s;
      g = g * vignette + s;
      b = b * vignette + s;
    } else if (sc.style == Style::Real) {
      r *= vignette;
      g *= vignette;
      b *= vignette;
    }
  }
  rgb[0] = std::min(std::max(r, 0.0), 1.0);
  rgb[1] = std::min(std::max(g, 0.0), 1.0);
  rgb[2] = std::min(std::max(b, 0.0), 1.0);
}

}  // namespace

SyntheticSample render_frame(const SceneSpec& scene, const SE3& camera_pose,
                             const CameraIntrinsics& k) {
  int64_t res = scene.resolution;
  if (res <= 0) throw RuntimeError("render_frame: bad resolution");
  TubeField tube(scene);
  const auto& o = camera_pose.t;
  if (tube.field(o[0], o[1], o[2]) <= 0.0)
    throw RuntimeError("render_frame: camera outside the tube");

  std::vector<double> img(static_cast<size_t>(3 * res * res));
  std::vector<double> dep(static_cast<size_t>(res * res));
  double half = 0.5 * static_cast<double>(res - 1);
  double vig_norm = 1.0 / (half * half * 2.0);
  for (int64_t v = 0; v < res; ++v)
    for (int64_t u = 0; u < res; ++u) {
      double dx = (static_cast<double>(u) - k.cx) / k.fx;
      double dy = (static_cast<double>(v) - k.cy) / k.fy;
      std::array<double, 3> dir = {
          camera_pose.r[0][0] * dx + camera_pose.r[0][1] * dy + camera_pose.r[0][2],
          camera_pose.r[1][0] * dx + camera_pose.r[1][1] * dy + camera_pose.r[1][2],
          camera_pose.r[2][0] * dx + camera_pose.r[2][1] * dy + camera_pose.r[2][2]};
      Hit hit = march_ray(tube, o, dir);
      double du = static_cast<double>(u) - half, dv = static_cast<double>(v) - half;
      double vignette = 1.0 - 0.06 * (du * du + dv * dv) * vig_norm;
      double rgb[3];
      shade_pixel(tube, hit, vignette, rgb);
      size_t p = static_cast<size_t>(v * res + u);
      img[p] = rgb[0];
      img[static_cast<size_t>(res * res) + p] = rgb[1];
      img[static_cast<size_t>(2 * res * res) + p] = rgb[2];
      dep[p] = hit.depth;
    }
  SyntheticSample out;
  out.image = Tensor::from_data({1, 3, res, res}, std::move(img));
  out.depth_gt = Tensor::from_data({1, 1, res, res}, std::move(dep));
  out.pose = camera_pose;
  return out;
}

std::vector<SE3> generate_trajectory(const SceneSpec& scene, int n, uint64_t seed) {
  if (n <= 0) throw RuntimeError("generate_trajectory: n must be positive");
  TubeField tube(scene);
  Rng rng(hash_combine(seed, 0x7472616aULL));
  double z = rng.uniform(0.0, 8.0);
  double jx = 0.0, jy = 0.0;        // lateral offset from the centerline
  double ax = 0.0, ay = 0.0;        // look-direction jitter
  double max_j = 0.12 * scene.radius;
  std::vector<SE3> poses;
  for (int i = 0; i < n; ++i) {
    if (i > 0) {
      z += 0.030 * scene.radius + rng.uniform(0.0, 0.004) * scene.radius;
      jx = std::clamp(jx + rng.uniform(-0.006, 0.006) * scene.radius, -max_j, max_j);
      jy = std::clamp(jy + rng.uniform(-0.006, 0.006) * scene.radius, -max_j, max_j);
      ax = std::clamp(ax + rng.uniform(-0.012, 0.012), -0.10, 0.10);
      ay = std::clamp(ay + rng.uniform(-0.012, 0.012), -0.10, 0.10);
    }
    double h = 0.05;
    double tx = (tube.center_x(z + h) - tube.center_x(z - h)) / (2.0 * h);
    double ty = (tube.center_y(z + h) - tube.center_y(z - h)) / (2.0 * h);
    std::array<double, 3> f = {tx + ax, ty + ay, 1.0};
    double fn = std::sqrt(f[0] * f[0] + f[1] * f[1] + f[2] * f[2]);
    for (double& c : f) c /= fn;
    // right-handed frame with camera y roughly world +y
    std::array<double, 3> xr = {f[2], 0.0, -f[0]};
    double xn = std::sqrt(xr[0] * xr[0] + xr[1] * xr[1] + xr[2] * xr[2]);
    for (double& c : xr) c /= xn;
    std::array<double, 3> yr = {f[1] * xr[2] - f[2] * xr[1], f[2] * xr[0] - f[0] * xr[2],
                                f[0] * xr[1] - f[1] * xr[0]};
    SE3 pose;
    for (int r = 0; r < 3; ++r) {
      pose.r[r][0] = xr[r];
      pose.r[r][1] = yr[r];
      pose.r[r][2] = f[r];
    }
    pose.t = {tube.center_x(z) + jx, tube.center_y(z) + jy, z};
    poses.push_back(pose);
  }
  return poses;
}

// ---------------------------------------------------------------------------
// dataset files
// ---------------------------------------------------------------------------

SceneSpec trajectory_scene(const DatasetConfig& cfg, Style style, int traj) {
  uint64_t tag = style == Style::Real ? 0x7265616cULL : 0x73796eULL;
  uint64_t h = hash_combine(hash_combine(cfg.seed, tag), static_cast<uint64_t>(traj));
  SceneSpec sc = cfg.scene;
  sc.style = style;
  sc.texture_seed = h;
  sc.radius = cfg.scene.radius * (0.88 + 0.24 * hash_to_unit(splitmix64(h + 1)));
  sc.curve_amplitude = cfg.scene.curve_amplitude * (0.55 + 0.75 * hash_to_unit(splitmix64(h + 2)));
  sc.curve_frequency = cfg.scene.curve_frequency * (0.75 + 0.5 * hash_to_unit(splitmix64(h + 3)));
  return sc;
}

namespace {

std::string frame_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%05d", i);
  return buf;
}

std::string pair_name(int i, const char* which) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "pair_%05d_%s", i, which);
  return buf;
}

std::string pose_line(int idx, const Pose6D& p) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d %.17g %.17g %.17g %.17g %.17g %.17g", idx, p.tx, p.ty, p.tz,
                p.rx, p.ry, p.rz);
  return buf;
}

json scene_to_json(const SceneSpec& s) {
  return json{{"radius", s.radius},
              {"curve_amplitude", s.curve_amplitude},
              {"curve_frequency", s.curve_frequency},
              {"texture_seed", s.texture_seed},
              {"light_falloff", s.light_falloff},
              {"resolution", s.resolution},
              {"depth_min", s.depth_min},
              {"depth_max", s.depth_max}};
}

SceneSpec scene_from_json(const json& j) {
  SceneSpec s;
  s.radius = j.at("radius").get<double>();
  s.curve_amplitude = j.at("curve_amplitude").get<double>();
  s.curve_frequency = j.at("curve_frequency").get<double>();
  s.texture_seed = j.at("texture_seed").get<uint64_t>();
  s.light_falloff = j.at("light_falloff").get<double>();
  s.resolution = j.at("resolution").get<int>();
  s.depth_min = j.at("depth_min").get<double>();
  s.depth_max = j.at("depth_max").get<double>();
  return s;
}

std::vector<Pose6D> read_pose_file(const std::string& path, size_t expected) {
  std::ifstream f(path);
  if (!f) throw RuntimeError("load_dataset: missing pose file " + path);
  std::vector<Pose6D> out;
  int idx;
  double tx, ty, tz, rx, ry, rz;
  while (f >> idx >> tx >> ty >> tz >> rx >> ry >> rz)
    out.emplace_back(tx, ty, tz, rx, ry, rz);
  if (out.size() != expected)
    throw RuntimeError("load_dataset: pose file " + path + " has " + std::to_string(out.size()) +
                       " rows, expected " + std::to_string(expected));
  return out;
}

}  // namespace

void make_dataset(const DatasetConfig& cfg, const std::string& out_dir) {
  if (cfg.synthetic_count <= 0 || cfg.pair_count <= 0 || cfg.frames_per_trajectory < 2)
    throw ConfigError("make_dataset: counts must be positive");
  fs::create_directories(fs::path(out_dir) / "synthetic");
  fs::create_directories(fs::path(out_dir) / "real");

  json files = json::object();
  auto emit = [&](const std::string& rel, auto&& writer) {
    std::string path = (fs::path(out_dir) / rel).string();
    writer(path);
    files[rel] = file_checksum(path);
  };

  // synthetic frames
  {
    std::ofstream poses((fs::path(out_dir) / "synthetic" / "poses.txt").string());
    int traj = 0, idx = 0;
    while (idx < cfg.synthetic_count) {
      SceneSpec sc = trajectory_scene(cfg, Style::Synthetic, traj);
      auto traj_poses =
          generate_trajectory(sc, cfg.frames_per_trajectory, hash_combine(cfg.seed, static_cast<uint64_t>(traj)));
      for (const SE3& pose : traj_poses) {
        if (idx >= cfg.synthetic_count) break;
        SyntheticSample sample = render_frame(sc, pose, cfg.intrinsics);
        emit("synthetic/" + frame_name(idx) + ".png",
             [&](const std::string& p) { save_image_png(p, sample.image); });
        emit("synthetic/" + frame_name(idx) + ".pfm",
             [&](const std::string& p) { save_pfm(p, sample.depth_gt); });
        poses << pose_line(idx, se3_to_pose6d(pose)) << "\n";
        ++idx;
      }
      ++traj;
    }
  }

  // real-style frame pairs
  {
    std::ofstream poses((fs::path(out_dir) / "real" / "poses.txt").string());
    int traj = 0, idx = 0;
    while (idx < cfg.pair_count) {
      SceneSpec sc = trajectory_scene(cfg, Style::Real, traj);
      auto traj_poses = generate_trajectory(sc, cfg.frames_per_trajectory + 1,
                                            hash_combine(cfg.seed, 0x70ULL + static_cast<uint64_t>(traj)));
      std::vector<SyntheticSample> frames;
      for (const SE3& pose : traj_poses) frames.push_back(render_frame(sc, pose, cfg.intrinsics));
      for (int t = 0; t + 1 < static_cast<int>(frames.size()) && idx < cfg.pair_count; ++t) {
        emit("real/" + pair_name(idx, "t") + ".png",
             [&](const std::string& p) { save_image_png(p, frames[t].image); });
        emit("real/" + pair_name(idx, "t1") + ".png",
             [&](const std::string& p) { save_image_png(p, frames[t + 1].image); });
        emit("real/" + pair_name(idx, "t") + ".pfm",
             [&](const std::string& p) { save_pfm(p, frames[t].depth_gt); });
        emit("real/" + pair_name(idx, "t1") + ".pfm",
             [&](const std::string& p) { save_pfm(p, frames[t + 1].depth_gt); });
        SE3 rel = se3_compose(se3_inverse(frames[t + 1].pose), frames[t].pose);
        poses << pose_line(idx, se3_to_pose6d(rel)) << "\n";
        ++idx;
      }
      ++traj;
    }
  }

  auto split_indices = [&](int count) {
    int train = static_cast<int>(std::lround(cfg.train_fraction * count));
    std::vector<int> tr, ho;
    for (int i = 0; i < count; ++i) (i < train ? tr : ho).push_back(i);
    return std::pair{tr, ho};
  };
  auto [syn_tr, syn_ho] = split_indices(cfg.synthetic_count);
  auto [pair_tr, pair_ho] = split_indices(cfg.pair_count);

  json manifest{{"format_version", 1},
                {"seed", cfg.seed},
                {"intrinsics",
                 {{"fx", cfg.intrinsics.fx},
                  {"fy", cfg.intrinsics.fy},
                  {"cx", cfg.intrinsics.cx},
                  {"cy", cfg.intrinsics.cy}}},
                {"scene", scene_to_json(cfg.scene)},
                {"counts",
                 {{"synthetic", cfg.synthetic_count},
                  {"pairs", cfg.pair_count},
                  {"frames_per_trajectory", cfg.frames_per_trajectory}}},
                {"splits",
                 {{"synthetic_train", syn_tr},
                  {"synthetic_heldout", syn_ho},
                  {"pair_train", pair_tr},
                  {"pair_heldout", pair_ho}}},
                {"files", files}};
  std::ofstream mf((fs::path(out_dir) / "manifest.json").string());
  mf << manifest.dump(2) << "\n";
  if (!mf) throw RuntimeError("make_dataset: failed to write manifest");
}

Dataset load_dataset(const std::string& path) {
  std::ifstream mf((fs::path(path) / "manifest.json").string());
  if (!mf) throw RuntimeError("load_dataset: missing manifest.json in " + path);
  json manifest;
  try {
    mf >> manifest;
  } catch (const json::exception& e) {
    throw RuntimeError(std::string("load_dataset: corrupt manifest: ") + e.what());
  }
  Dataset ds;
  try {
    ds.manifest.format_version = manifest.at("format_version").get<int>();
    if (ds.manifest.format_version != 1)
      throw RuntimeError("load_dataset: unsupported manifest version");
    ds.manifest.seed = manifest.at("seed").get<uint64_t>();
    const json& intr = manifest.at("intrinsics");
    ds.manifest.intrinsics = {intr.at("fx").get<double>(), intr.at("fy").get<double>(),
                              intr.at("cx").get<double>(), intr.at("cy").get<double>()};
    ds.manifest.scene = scene_from_json(manifest.at("scene"));
    ds.manifest.synthetic_count = manifest.at("counts").at("synthetic").get<int>();
    ds.manifest.pair_count = manifest.at("counts").at("pairs").get<int>();
    const json& splits = manifest.at("splits");
    ds.manifest.synthetic_train = splits.at("synthetic_train").get<std::vector<int>>();
    ds.manifest.synthetic_heldout = splits.at("synthetic_heldout").get<std::vector<int>>();
    ds.manifest.pair_train = splits.at("pair_train").get<std::vector<int>>();
    ds.manifest.pair_heldout = splits.at("pair_heldout").get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw RuntimeError(std::string("load_dataset: corrupt manifest: ") + e.what());
  }
  const json& files = manifest.at("files");
  auto checked = [&](const std::string& rel) {
    std::string full = (fs::path(path) / rel).string();
    if (!files.contains(rel)) throw RuntimeError("load_dataset: file not in manifest: " + rel);
    if (file_checksum(full) != files.at(rel).get<std::string>())
      throw RuntimeError("load_dataset: checksum mismatch for " + rel);
    return full;
  };

  auto syn_poses = read_pose_file((fs::path(path) / "synthetic" / "poses.txt").string(),
                                  static_cast<size_t>(ds.manifest.synthetic_count));
  for (int i = 0; i < ds.manifest.synthetic_count; ++i) {
    SyntheticSample s;
    s.image = load_image_png(checked("synthetic/" + frame_name(i) + ".png"));
    s.depth_gt = load_pfm(checked("synthetic/" + frame_name(i) + ".pfm"));
    s.pose = pose6d_to_se3(syn_poses[static_cast<size_t>(i)]);
    ds.synthetic.push_back(std::move(s));
  }
  auto rel_poses = read_pose_file((fs::path(path) / "real" / "poses.txt").string(),
                                  static_cast<size_t>(ds.manifest.pair_count));
  for (int i = 0; i < ds.manifest.pair_count; ++i) {
    FramePair p;
    p.image_t = load_image_png(checked("real/" + pair_name(i, "t") + ".png"));
    p.image_t1 = load_image_png(checked("real/" + pair_name(i, "t1") + ".png"));
    p.depth_t_gt = load_pfm(checked("real/" + pair_name(i, "t") + ".pfm"));
    p.depth_t1_gt = load_pfm(checked("real/" + pair_name(i, "t1") + ".pfm"));
    p.relative_pose_gt = rel_poses[static_cast<size_t>(i)];
    p.intrinsics = ds.manifest.intrinsics;
    ds.pairs.push_back(std::move(p));
  }
  return ds;
}

}  // namespace dgr
