#include "dgr/geometry.hpp"

#include <cmath>
#include <limits>

#include "dgr/error.hpp"

namespace dgr {

namespace {
constexpr double kTaylorAngleSq = 1e-16;  // below this, use the series forms
constexpr double kDenomFloor = 1e-6;

void wrap_axis_angle(double& rx, double& ry, double& rz) {
  double theta = std::sqrt(rx * rx + ry * ry + rz * rz);
  if (theta < M_PI || theta == 0.0) return;
  double wrapped = std::remainder(theta, 2.0 * M_PI);  // in [-pi, pi]
  if (std::abs(wrapped) >= M_PI) wrapped = std::copysign(M_PI - 1e-12, wrapped);
  double scale = wrapped / theta;
  rx *= scale;
  ry *= scale;
  rz *= scale;
}
}  // namespace

Pose6D::Pose6D(double tx_, double ty_, double tz_, double rx_, double ry_, double rz_)
    : tx(tx_), ty(ty_), tz(tz_), rx(rx_), ry(ry_), rz(rz_) {
  if (!std::isfinite(tx) || !std::isfinite(ty) || !std::isfinite(tz) || !std::isfinite(rx) ||
      !std::isfinite(ry) || !std::isfinite(rz))
    throw RuntimeError("Pose6D: non-finite component");
  wrap_axis_angle(rx, ry, rz);
}

double Pose6D::rotation_angle() const { return std::sqrt(rx * rx + ry * ry + rz * rz); }

std::array<double, 3> SE3::apply(const std::array<double, 3>& p) const {
  return {r[0][0] * p[0] + r[0][1] * p[1] + r[0][2] * p[2] + t[0],
          r[1][0] * p[0] + r[1][1] * p[1] + r[1][2] * p[2] + t[1],
          r[2][0] * p[0] + r[2][1] * p[1] + r[2][2] * p[2] + t[2]};
}

Tensor pose_to_tensor(const Pose6D& p, bool requires_grad) {
  return Tensor::from_data({6}, {p.tx, p.ty, p.tz, p.rx, p.ry, p.rz}, requires_grad);
}

SE3Tensors se3_from_pose_tensor(const Tensor& pose6) {
  if (pose6.rank() != 1 || pose6.dim(0) != 6)
    throw RuntimeError("se3_from_pose_tensor: pose must have shape [6]");
  Tensor tx = select(pose6, 0), ty = select(pose6, 1), tz = select(pose6, 2);
  Tensor rx = select(pose6, 3), ry = select(pose6, 4), rz = select(pose6, 5);
  Tensor rx2 = square(rx), ry2 = square(ry), rz2 = square(rz);
  Tensor theta_sq = rx2 + ry2 + rz2;

  // R = I + A*[r]_x + B*[r]_x^2 with [r]_x^2 = r r^T - theta^2 I.
  Tensor a, b;
  if (theta_sq.value() < kTaylorAngleSq) {
    // series in theta^2; exact identity at r = 0
    Tensor ts2 = square(theta_sq);
    a = 1.0 - theta_sq / 6.0 + ts2 / 120.0;
    b = 0.5 - theta_sq / 24.0 + ts2 / 720.0;
  } else {
    Tensor theta = sqrt(theta_sq);
    a = sin(theta) / theta;
    b = (1.0 - cos(theta)) / theta_sq;
  }

  SE3Tensors out;
  out.r[0] = 1.0 + b * (rx2 - theta_sq);
  out.r[1] = a * neg(rz) + b * (rx * ry);
  out.r[2] = a * ry + b * (rx * rz);
  out.r[3] = a * rz + b * (rx * ry);
  out.r[4] = 1.0 + b * (ry2 - theta_sq);
  out.r[5] = a * neg(rx) + b * (ry * rz);
  out.r[6] = a * neg(ry) + b * (rx * rz);
  out.r[7] = a * rx + b * (ry * rz);
  out.r[8] = 1.0 + b * (rz2 - theta_sq);
  out.t = {tx, ty, tz};
  return out;
}

SE3 SE3Tensors::to_plain() const {
  SE3 out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out.r[i][j] = r[i * 3 + j].value();
  for (int i = 0; i < 3; ++i) out.t[i] = t[i].value();
  return out;
}

SE3 pose6d_to_se3(const Pose6D& p) {
  return se3_from_pose_tensor(pose_to_tensor(p)).to_plain();
}

Pose6D se3_to_pose6d(const SE3& a) {
  double tr = a.r[0][0] + a.r[1][1] + a.r[2][2];
  double c = std::min(1.0, std::max(-1.0, (tr - 1.0) * 0.5));
  double theta = std::acos(c);
  double rx, ry, rz;
  if (theta < 1e-9) {
    // first-order: R ~ I + [r]_x
    rx = 0.5 * (a.r[2][1] - a.r[1][2]);
    ry = 0.5 * (a.r[0][2] - a.r[2][0]);
    rz = 0.5 * (a.r[1][0] - a.r[0][1]);
  } else if (theta < M_PI - 1e-6) {
    double s = 0.5 / std::sin(theta);
    rx = s * (a.r[2][1] - a.r[1][2]) * theta;
    ry = s * (a.r[0][2] - a.r[2][0]) * theta;
    rz = s * (a.r[1][0] - a.r[0][1]) * theta;
  } else {
    // near pi: axis from the dominant diagonal of (R + I)/2
    double xx = std::sqrt(std::max(0.0, (a.r[0][0] + 1.0) * 0.5));
    double yy = std::sqrt(std::max(0.0, (a.r[1][1] + 1.0) * 0.5));
    double zz = std::sqrt(std::max(0.0, (a.r[2][2] + 1.0) * 0.5));
    if (xx >= yy && xx >= zz) {
      rx = xx;
      ry = (a.r[0][1] + a.r[1][0]) / (4.0 * xx);
      rz = (a.r[0][2] + a.r[2][0]) / (4.0 * xx);
    } else if (yy >= zz) {
      ry = yy;
      rx = (a.r[0][1] + a.r[1][0]) / (4.0 * yy);
      rz = (a.r[1][2] + a.r[2][1]) / (4.0 * yy);
    } else {
      rz = zz;
      rx = (a.r[0][2] + a.r[2][0]) / (4.0 * zz);
      ry = (a.r[1][2] + a.r[2][1]) / (4.0 * zz);
    }
    double n = std::sqrt(rx * rx + ry * ry + rz * rz);
    rx *= theta / n;
    ry *= theta / n;
    rz *= theta / n;
  }
  return Pose6D(a.t[0], a.t[1], a.t[2], rx, ry, rz);
}

SE3 se3_compose(const SE3& a, const SE3& b) {
  SE3 out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += a.r[i][k] * b.r[k][j];
      out.r[i][j] = acc;
    }
  for (int i = 0; i < 3; ++i)
    out.t[i] = a.r[i][0] * b.t[0] + a.r[i][1] * b.t[1] + a.r[i][2] * b.t[2] + a.t[i];
  return out;
}

SE3 se3_inverse(const SE3& a) {
  SE3 out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out.r[i][j] = a.r[j][i];
  for (int i = 0; i < 3; ++i)
    out.t[i] = -(out.r[i][0] * a.t[0] + out.r[i][1] * a.t[1] + out.r[i][2] * a.t[2]);
  return out;
}

namespace {

void check_intrinsics(const CameraIntrinsics& k, int64_t w, int64_t h, const char* where) {
  if (!(k.fx > 0.0) || !(k.fy > 0.0))
    throw RuntimeError(std::string(where) + ": focal lengths must be positive");
  if (!(k.cx > 0.0 && k.cx < static_cast<double>(w)) ||
      !(k.cy > 0.0 && k.cy < static_cast<double>(h)))
    throw RuntimeError(std::string(where) + ": principal point outside the image");
}

// Constant per-pixel ray maps: ((u-cx)/fx, (v-cy)/fy) and the pixel index grids.
struct RayMaps {
  Tensor dirx, diry;    // [1,1,H,W]
  Tensor ugrid, vgrid;  // [1,1,H,W]
};

RayMaps make_ray_maps(int64_t h, int64_t w, const CameraIntrinsics& k) {
  std::vector<double> dx(static_cast<size_t>(h * w)), dy(dx.size()), uu(dx.size()), vv(dx.size());
  for (int64_t v = 0; v < h; ++v)
    for (int64_t u = 0; u < w; ++u) {
      size_t i = static_cast<size_t>(v * w + u);
      dx[i] = (static_cast<double>(u) - k.cx) / k.fx;
      dy[i] = (static_cast<double>(v) - k.cy) / k.fy;
      uu[i] = static_cast<double>(u);
      vv[i] = static_cast<double>(v);
    }
  RayMaps m;
  m.dirx = Tensor::from_data({1, 1, h, w}, std::move(dx));
  m.diry = Tensor::from_data({1, 1, h, w}, std::move(dy));
  m.ugrid = Tensor::from_data({1, 1, h, w}, std::move(uu));
  m.vgrid = Tensor::from_data({1, 1, h, w}, std::move(vv));
  return m;
}

Tensor clamp_min(const Tensor& t, double lo) {
  return clamp(t, lo, std::numeric_limits<double>::infinity());
}

}  // namespace

Tensor unproject(const Tensor& depth, const CameraIntrinsics& k) {
  if (depth.rank() != 4 || depth.dim(0) != 1 || depth.dim(1) != 1)
    throw RuntimeError("unproject: depth must be [1,1,H,W]");
  int64_t h = depth.dim(2), w = depth.dim(3);
  check_intrinsics(k, w, h, "unproject");
  RayMaps m = make_ray_maps(h, w, k);
  return concat({depth * m.dirx, depth * m.diry, depth}, 1);
}

Projection project(const Tensor& points, const CameraIntrinsics& k) {
  if (points.rank() != 4 || points.dim(0) != 1 || points.dim(1) != 3)
    throw RuntimeError("project: points must be [1,3,H,W]");
  int64_t h = points.dim(2), w = points.dim(3);
  check_intrinsics(k, w, h, "project");
  Tensor x = narrow(points, 1, 0, 1);
  Tensor y = narrow(points, 1, 1, 1);
  Tensor z = narrow(points, 1, 2, 1);
  Tensor zc = clamp_min(z, kDenomFloor);
  Tensor cx = (x / zc) * k.fx + k.cx;
  Tensor cy = (y / zc) * k.fy + k.cy;
  return {make_grid(cx, cy), z};
}

WarpArtifacts compute_warp(const Tensor& depth_t, const Tensor& image_t1, const Tensor& depth_t1,
                           const Tensor& pose6, const CameraIntrinsics& k) {
  if (depth_t.rank() != 4 || depth_t.dim(0) != 1 || depth_t.dim(1) != 1)
    throw RuntimeError("compute_warp: depth_t must be [1,1,H,W]");
  int64_t h = depth_t.dim(2), w = depth_t.dim(3);
  if (image_t1.rank() != 4 || image_t1.dim(0) != 1 || image_t1.dim(2) != h ||
      image_t1.dim(3) != w)
    throw RuntimeError("compute_warp: image_t1 shape mismatch");
  if (depth_t1.shape() != depth_t.shape())
    throw RuntimeError("compute_warp: depth_t1 shape mismatch");
  check_intrinsics(k, w, h, "compute_warp");

  RayMaps m = make_ray_maps(h, w, k);
  SE3Tensors se3 = se3_from_pose_tensor(pose6);

  // Projection in ray-ratio form. The grid is written as an offset from the
  // source pixel so an identity motion yields the integer lattice exactly.
  Tensor inv_d = Tensor::scalar(1.0) / depth_t;
  Tensor num_x = se3.r[0] * m.dirx + se3.r[1] * m.diry + se3.r[2] + se3.t[0] * inv_d;
  Tensor num_y = se3.r[3] * m.dirx + se3.r[4] * m.diry + se3.r[5] + se3.t[1] * inv_d;
  Tensor zfac = se3.r[6] * m.dirx + se3.r[7] * m.diry + se3.r[8];
  Tensor den = zfac + se3.t[2] * inv_d;
  Tensor den_safe = clamp_min(den, kDenomFloor);

  Tensor grid_x = m.ugrid + (num_x / den_safe - m.dirx) * k.fx;
  Tensor grid_y = m.vgrid + (num_y / den_safe - m.diry) * k.fy;
  Tensor grid = make_grid(grid_x, grid_y);

  Tensor projected_depth = depth_t * zfac + se3.t[2];

  GridSample img = grid_sample_bilinear(image_t1, grid);
  GridSample dep = grid_sample_bilinear(depth_t1, grid);

  // in-bounds AND positive transformed depth; non-differentiable by design
  std::vector<double> mask(static_cast<size_t>(h * w));
  auto mb = img.mask.data();
  auto pd = projected_depth.data();
  for (size_t i = 0; i < mask.size(); ++i) mask[i] = (mb[i] > 0.5 && pd[i] > 0.0) ? 1.0 : 0.0;

  WarpArtifacts out;
  out.warped_image = img.values;
  out.projected_depth = projected_depth;
  out.resampled_depth = dep.values;
  out.validity_mask = Tensor::from_data({1, 1, h, w}, std::move(mask));
  return out;
}

WarpArtifacts compute_warp(const Tensor& depth_t, const Tensor& image_t1, const Tensor& depth_t1,
                           const Pose6D& pose, const CameraIntrinsics& k) {
  return compute_warp(depth_t, image_t1, depth_t1, pose_to_tensor(pose), k);
}

}  // namespace dgr
