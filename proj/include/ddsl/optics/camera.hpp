#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "ddsl/core/error.hpp"

namespace ddsl {

/// Pinhole model; E maps world coordinates to camera coordinates.
struct PinholeCamera {
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
  Eigen::Matrix4d E = Eigen::Matrix4d::Identity();
  int width = 0;
  int height = 0;

  Eigen::Matrix3d rotation() const { return E.topLeftCorner<3, 3>(); }
  Eigen::Vector3d translation() const { return E.topRightCorner<3, 1>(); }

  /// Optical centre in world coordinates.
  Eigen::Vector3d center() const { return -rotation().transpose() * translation(); }

  Eigen::Vector3d to_camera(const Eigen::Vector3d& world) const {
    return rotation() * world + translation();
  }
  Eigen::Vector3d to_world(const Eigen::Vector3d& cam) const {
    return rotation().transpose() * (cam - translation());
  }

  /// World point seen at pixel (x, y) with camera-frame depth z.
  Eigen::Vector3d unproject(double x, double y, double z) const {
    const Eigen::Vector3d ray = K.inverse() * Eigen::Vector3d(x, y, 1.0);
    return to_world(ray * (z / ray.z()));
  }

  /// Pixel of a world point; `depth` receives the camera-frame z.
  Eigen::Vector2d project(const Eigen::Vector3d& world, double* depth = nullptr) const {
    const Eigen::Vector3d c = to_camera(world);
    if (depth) *depth = c.z();
    const Eigen::Vector3d h = K * c;
    return h.head<2>() / h.z();
  }

  double focal_x() const { return K(0, 0); }

  void validate() const {
    if (std::abs(K.determinant()) < 1e-12) throw RigError("intrinsic matrix is singular");
    const Eigen::Matrix3d R = rotation();
    if ((R.transpose() * R - Eigen::Matrix3d::Identity()).norm() > 1e-6 ||
        std::abs(R.determinant() - 1.0) > 1e-6) {
      throw RigError("extrinsic rotation is not a proper rotation");
    }
  }
};

inline Eigen::Matrix3d make_intrinsics(double fx, double fy, double cx, double cy) {
  Eigen::Matrix3d K;
  K << fx, 0, cx, 0, fy, cy, 0, 0, 1;
  return K;
}

inline Eigen::Matrix4d make_extrinsics(const Eigen::Matrix3d& R, const Eigen::Vector3d& t) {
  Eigen::Matrix4d E = Eigen::Matrix4d::Identity();
  E.topLeftCorner<3, 3>() = R;
  E.topRightCorner<3, 1>() = t;
  return E;
}

/// Extrinsics of a camera whose centre sits at `center` (world) with
/// world-to-camera rotation R.
inline Eigen::Matrix4d extrinsics_at(const Eigen::Matrix3d& R, const Eigen::Vector3d& center) {
  return make_extrinsics(R, -R * center);
}

/// Geometric camera-to-projector correspondence: unproject camera pixel p at
/// depth z, then project into the projector.
inline Eigen::Vector2d pixel_correspondence(const PinholeCamera& cam, const PinholeCamera& proj,
                                            const Eigen::Vector2d& p, double z) {
  if (!(z > 0.0)) throw ProjectionError("depth must be positive");
  const Eigen::Vector3d world = cam.unproject(p.x(), p.y(), z);
  double proj_depth = 0.0;
  const Eigen::Vector2d q = proj.project(world, &proj_depth);
  if (!(proj_depth > 0.0)) throw ProjectionError("scene point lies behind the projector");
  return q;
}

/// Euclidean distance from the projector's optical centre to a world point.
inline double projector_distance(const PinholeCamera& proj, const Eigen::Vector3d& world) {
  return (world - proj.center()).norm();
}

}  // namespace ddsl
