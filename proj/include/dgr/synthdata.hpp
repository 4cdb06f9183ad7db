#pragma once

#include <string>
#include <vector>

#include "dgr/geometry.hpp"
#include "dgr/tensor.hpp"

namespace dgr {

enum class Style { Synthetic, Real };

struct SceneSpec {
  double radius = 1.0;            // tube radius, scene units
  double curve_amplitude = 0.35;  // lateral centerline amplitude
  double curve_frequency = 0.9;
  uint64_t texture_seed = 0;
  double light_falloff = 1.7;  // exponent of the co-located light falloff
  Style style = Style::Synthetic;
  int resolution = 64;
  double depth_min = 0.05;  // near clip
  double depth_max = 10.0;  // far clip
};

struct SyntheticSample {
  Tensor image;     // [1,3,H,W] in [0,1]
  Tensor depth_gt;  // [1,1,H,W] scene units
  SE3 pose;         // camera-to-world
};

struct FramePair {
  Tensor image_t, image_t1;  // consecutive frames of one trajectory
  Pose6D relative_pose_gt;   // frame-t camera coords -> frame-(t+1) camera coords
  CameraIntrinsics intrinsics;
  // Ground truth kept for oracles and consistency checks only; training code
  // never reads these.
  Tensor depth_t_gt, depth_t1_gt;
};

// Ray-march the procedural tube. Deterministic: identical inputs give
// bit-identical frames.
SyntheticSample render_frame(const SceneSpec& scene, const SE3& camera_pose,
                             const CameraIntrinsics& k);

// Camera poses advancing along the centerline with small perturbations:
// translation step <= 0.05*radius, relative rotation <= 0.05 rad.
std::vector<SE3> generate_trajectory(const SceneSpec& scene, int n, uint64_t seed);

struct DatasetConfig {
  SceneSpec scene;  // base spec; per-trajectory variation derives from seed
  CameraIntrinsics intrinsics{64.0, 64.0, 31.5, 31.5};
  int synthetic_count = 400;
  int pair_count = 400;
  int frames_per_trajectory = 20;
  double train_fraction = 0.8;
  uint64_t seed = 0;
};

struct DatasetManifest {
  int format_version = 1;
  uint64_t seed = 0;
  SceneSpec scene;
  CameraIntrinsics intrinsics;
  int synthetic_count = 0;
  int pair_count = 0;
  std::vector<int> synthetic_train, synthetic_heldout;
  std::vector<int> pair_train, pair_heldout;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<SyntheticSample> synthetic;
  std::vector<FramePair> pairs;
};

// Writes manifest.json, 8-bit PNG images, float PFM depths and plain-text
// pose rows under out_dir.
void make_dataset(const DatasetConfig& cfg, const std::string& out_dir);

// Reads a dataset directory back; verifies the manifest and per-file
// checksums.
Dataset load_dataset(const std::string& path);

// The per-trajectory scene actually used for trajectory `traj` of the given
// style; exposed so tests can re-render matching frames.
SceneSpec trajectory_scene(const DatasetConfig& cfg, Style style, int traj);

}  // namespace dgr
