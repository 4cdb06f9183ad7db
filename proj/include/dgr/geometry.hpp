#pragma once

#include <array>

#include "dgr/tensor.hpp"

namespace dgr {

struct CameraIntrinsics {
  double fx = 0.0, fy = 0.0;
  double cx = 0.0, cy = 0.0;
};

// Rigid motion as 3 translation + 3 axis-angle components. Construction wraps
// the rotation so |r| < pi.
struct Pose6D {
  double tx = 0.0, ty = 0.0, tz = 0.0;
  double rx = 0.0, ry = 0.0, rz = 0.0;

  Pose6D() = default;
  Pose6D(double tx_, double ty_, double tz_, double rx_, double ry_, double rz_);

  double rotation_angle() const;
};

struct SE3 {
  std::array<std::array<double, 3>, 3> r{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  std::array<double, 3> t{0, 0, 0};

  static SE3 identity() { return SE3{}; }
  std::array<double, 3> apply(const std::array<double, 3>& p) const;
};

SE3 pose6d_to_se3(const Pose6D& p);
Pose6D se3_to_pose6d(const SE3& a);
// (a_then := compose(a, b)) applies b first: compose(a,b)(x) = a(b(x)).
SE3 se3_compose(const SE3& a, const SE3& b);
SE3 se3_inverse(const SE3& a);

// Differentiable rigid transform assembled from a pose tensor of shape [6]
// ordered (tx, ty, tz, rx, ry, rz). Entries are scalar tensors so gradients
// reach all six pose components.
struct SE3Tensors {
  std::array<Tensor, 9> r;  // row-major 3x3
  std::array<Tensor, 3> t;
  SE3 to_plain() const;
};

SE3Tensors se3_from_pose_tensor(const Tensor& pose6);

// depth [1,1,H,W] -> camera-frame points [1,3,H,W]
Tensor unproject(const Tensor& depth, const CameraIntrinsics& K);

struct Projection {
  Tensor coords;  // [1,H,W,2] continuous pixel coordinates
  Tensor depth;   // [1,1,H,W] the (unclamped) z component
};
Projection project(const Tensor& points, const CameraIntrinsics& K);

struct WarpArtifacts {
  Tensor warped_image;     // frame t+1 sampled at the projected frame-t coords
  Tensor projected_depth;  // frame-t depth carried into frame t+1, on the t grid
  Tensor resampled_depth;  // frame-(t+1) depth sampled at the projected coords
  Tensor validity_mask;    // in-bounds and positive transformed depth; constant
};

// pose maps frame-t camera coordinates into frame-(t+1) camera coordinates.
// Differentiable w.r.t. depth_t, depth_t1, image_t1 and all six pose entries.
WarpArtifacts compute_warp(const Tensor& depth_t, const Tensor& image_t1, const Tensor& depth_t1,
                           const Tensor& pose6, const CameraIntrinsics& K);
WarpArtifacts compute_warp(const Tensor& depth_t, const Tensor& image_t1, const Tensor& depth_t1,
                           const Pose6D& pose, const CameraIntrinsics& K);

Tensor pose_to_tensor(const Pose6D& p, bool requires_grad = false);

}  // namespace dgr
