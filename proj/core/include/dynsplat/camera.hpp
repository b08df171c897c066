#pragma once

#include <Eigen/Dense>
#include <string>

namespace dynsplat {

// Pinhole camera: intrinsics in pixels, world-to-camera extrinsics.
struct Camera {
    double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;
    int width = 0, height = 0;
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity(); // world-to-camera
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    // Throws DataError: rotation orthonormal within 1e-9, fx,fy > 0, width,height >= 16.
    void validate() const;

    Eigen::Vector3d center() const { return -rotation.transpose() * translation; }

    // Camera at `eye` looking toward `target` (+z in front of the camera).
    static Camera look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                          const Eigen::Vector3d& up, double fx, double fy, int width, int height);

    // Plain-text rig line: fx fy cx cy r00..r22 t0 t1 t2 width height
    std::string to_line() const;
    static Camera from_line(const std::string& line);
};

} // namespace dynsplat
