#include "dynsplat/camera.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "dynsplat/errors.hpp"

namespace dynsplat {

void Camera::validate() const {
    const Eigen::Matrix3d gram = rotation * rotation.transpose();
    const double ortho_err = (gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (ortho_err > 1e-9)
        throw DataError("camera rotation not orthonormal (error " + std::to_string(ortho_err) + ")");
    if (!(fx > 0.0) || !(fy > 0.0))
        throw DataError("camera focal lengths must be positive");
    if (width < 16 || height < 16)
        throw DataError("camera image must be at least 16x16 pixels");
}

Camera Camera::look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                       const Eigen::Vector3d& up, double fx, double fy, int width, int height) {
    Camera cam;
    const Eigen::Vector3d fwd = (target - eye).normalized();
    Eigen::Vector3d right = fwd.cross(up);
    if (right.norm() < 1e-12)
        right = fwd.cross(Eigen::Vector3d(0.0, 0.0, 1.0));
    right.normalize();
    const Eigen::Vector3d down = fwd.cross(right).normalized();
    // Rows of the world-to-camera rotation: camera x right, y down, z forward.
    cam.rotation.row(0) = right.transpose();
    cam.rotation.row(1) = down.transpose();
    cam.rotation.row(2) = fwd.transpose();
    cam.translation = -cam.rotation * eye;
    cam.fx = fx;
    cam.fy = fy;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    cam.width = width;
    cam.height = height;
    return cam;
}

std::string Camera::to_line() const {
    std::ostringstream os;
    char buf[32];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        os << buf << " ";
    };
    put(fx);
    put(fy);
    put(cx);
    put(cy);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            put(rotation(r, c));
    for (int i = 0; i < 3; ++i)
        put(translation(i));
    os << width << " " << height;
    return os.str();
}

Camera Camera::from_line(const std::string& line) {
    std::istringstream is(line);
    Camera cam;
    is >> cam.fx >> cam.fy >> cam.cx >> cam.cy;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            is >> cam.rotation(r, c);
    for (int i = 0; i < 3; ++i)
        is >> cam.translation(i);
    is >> cam.width >> cam.height;
    if (is.fail())
        throw DataError("malformed camera line: " + line);
    return cam;
}

} // namespace dynsplat
