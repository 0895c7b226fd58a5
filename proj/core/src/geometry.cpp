#include "xview/geometry.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <Eigen/Dense>
#include <json.hpp>

namespace xview {

using nlohmann::json;

namespace {

constexpr double kDetTolerance = 1e-12;
constexpr double kInfinityTolerance = 1e-9;

Eigen::Matrix3d to_eigen(const std::array<double, 9>& m) {
  Eigen::Matrix3d e;
  e << m[0], m[1], m[2], m[3], m[4], m[5], m[6], m[7], m[8];
  return e;
}

std::array<double, 9> from_eigen(const Eigen::Matrix3d& e) {
  return {e(0, 0), e(0, 1), e(0, 2), e(1, 0), e(1, 1), e(1, 2),
          e(2, 0), e(2, 1), e(2, 2)};
}

Vec2 apply(const std::array<double, 9>& m, Vec2 p) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y))
    throw Error("projection of non-finite point");
  const double x = m[0] * p.x + m[1] * p.y + m[2];
  const double y = m[3] * p.x + m[4] * p.y + m[5];
  const double w = m[6] * p.x + m[7] * p.y + m[8];
  if (std::abs(w) < kInfinityTolerance)
    throw AtInfinity("point maps near the line at infinity");
  return {x / w, y / w};
}

}  // namespace

Homography::Homography() : m_{1, 0, 0, 0, 1, 0, 0, 0, 1}, inv_(m_), det_(1.0) {}

Homography::Homography(const std::array<double, 9>& row_major) : m_(row_major) {
  const Eigen::Matrix3d e = to_eigen(m_);
  det_ = e.determinant();
  if (!std::isfinite(det_) || std::abs(det_) <= kDetTolerance)
    throw SingularHomography("homography is singular (|det| <= 1e-12)");
  inv_ = from_eigen(e.inverse().eval());
}

Homography Homography::inverse() const { return Homography(inv_); }

Vec2 project_to_ground(const Homography& h, Vec2 image_point) {
  return apply(h.coeffs(), image_point);
}

Vec2 project_to_image(const Homography& h, Vec2 world_point) {
  return apply(h.inverse_coeffs(), world_point);
}

Vec2 foot_point(const Rect& bbox) {
  return {(bbox.x_min + bbox.x_max) / 2.0, bbox.y_max};
}

std::vector<CameraModel> parse_calibration(const std::string& text) {
  std::vector<CameraModel> cameras;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::set<int> seen_ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw MalformedRecord("calibration line " + std::to_string(line_no) + ": " + e.what());
    }
    const std::string where = "calibration line " + std::to_string(line_no);
    for (const char* key : {"camera_id", "width", "height", "H"})
      if (!j.contains(key))
        throw MalformedRecord(where + ": missing field '" + std::string(key) + "'");
    CameraModel cam;
    cam.camera_id = j.at("camera_id").get<int>();
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
    if (cam.width <= 0 || cam.height <= 0)
      throw MalformedRecord(where + ": image size must be positive");
    if (!seen_ids.insert(cam.camera_id).second)
      throw MalformedRecord(where + ": duplicate camera_id " + std::to_string(cam.camera_id));
    if (!j.at("H").is_array() || j.at("H").size() != 9)
      throw MalformedRecord(where + ": 'H' must hold 9 reals (row-major)");
    std::array<double, 9> m{};
    for (int i = 0; i < 9; ++i) m[i] = j.at("H")[i].get<double>();
    try {
      cam.image_to_ground = Homography(m);
    } catch (const SingularHomography&) {
      throw SingularHomography(where + ": homography is singular");
    }
    cameras.push_back(std::move(cam));
  }
  return cameras;
}

std::vector<CameraModel> load_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MalformedDocument("cannot open calibration file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_calibration(buf.str());
}

std::string serialize_calibration(const std::vector<CameraModel>& cameras) {
  std::ostringstream out;
  for (const auto& cam : cameras) {
    json j;
    j["camera_id"] = cam.camera_id;
    j["width"] = cam.width;
    j["height"] = cam.height;
    j["H"] = cam.image_to_ground.coeffs();
    out << j.dump() << "\n";
  }
  return out.str();
}

void save_calibration(const std::vector<CameraModel>& cameras,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write calibration file '" + path.string() + "'");
  out << serialize_calibration(cameras);
}

}  // namespace xview
