#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "xview/errors.hpp"

namespace xview {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Vec2&) const = default;
};

/// Axis-aligned image rectangle in pixels, x_min <= x_max, y_min <= y_max.
struct Rect {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  bool operator==(const Rect&) const = default;
};

/// 3x3 projective map, row-major, image homogeneous coordinates to
/// ground-plane homogeneous coordinates. Must be invertible; the inverse is
/// precomputed at construction.
class Homography {
 public:
  Homography();  // identity
  explicit Homography(const std::array<double, 9>& row_major);

  static Homography identity() { return Homography(); }

  const std::array<double, 9>& coeffs() const { return m_; }
  const std::array<double, 9>& inverse_coeffs() const { return inv_; }
  double determinant() const { return det_; }
  Homography inverse() const;

 private:
  std::array<double, 9> m_;
  std::array<double, 9> inv_;
  double det_ = 1.0;
};

/// (x/w, y/w) for (x,y,w) = H * (p.x, p.y, 1). Throws AtInfinity when
/// |w| < 1e-9.
Vec2 project_to_ground(const Homography& h, Vec2 image_point);

/// Inverse-homography projection with homogeneous normalization.
Vec2 project_to_image(const Homography& h, Vec2 world_point);

/// Bottom-center of the box: ((x_min+x_max)/2, y_max).
Vec2 foot_point(const Rect& bbox);

struct CameraModel {
  int camera_id = 0;
  int width = 0;
  int height = 0;
  Homography image_to_ground;
};

std::vector<CameraModel> parse_calibration(const std::string& text);
std::vector<CameraModel> load_calibration(const std::filesystem::path& path);
std::string serialize_calibration(const std::vector<CameraModel>& cameras);
void save_calibration(const std::vector<CameraModel>& cameras,
                      const std::filesystem::path& path);

}  // namespace xview
