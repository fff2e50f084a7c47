#include "enarf/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

namespace enarf {

RigidTransform RigidTransform::compose(const RigidTransform& rhs) const {
  return {rotation * rhs.rotation, rotation * rhs.translation + translation};
}

RigidTransform RigidTransform::inverse() const {
  const Mat3 rt = rotation.transpose();
  return {rt, -(rt * translation)};
}

void RigidTransform::validate() const {
  if (!is_rotation(rotation)) throw ValidationError("rotation is not orthonormal with det +1");
  if (!translation.allFinite()) throw ValidationError("translation is not finite");
}

bool is_rotation(const Mat3& r, double tol) {
  if (!r.allFinite()) return false;
  const double ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return m;
}

Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}

Mat3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return m;
}

Mat3 euler_xyz(const Vec3& a) { return rot_x(a.x()) * rot_y(a.y()) * rot_z(a.z()); }

void PoseConfig::validate() const {
  if (parts.empty()) throw ValidationError("pose has no parts");
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (!(parts[k].length > 0.0) || !std::isfinite(parts[k].length))
      throw ValidationError("part " + std::to_string(k) + " has non-positive length");
    parts[k].transform.validate();
  }
}

Vec3 bone_tip(const PartPose& part) {
  return part.transform.apply(Vec3(part.length, 0.0, 0.0));
}

Vec3 part_center(const PartPose& part) {
  return part.transform.apply(Vec3(0.5 * part.length, 0.0, 0.0));
}

CanonicalPose CanonicalPose::from_pose(PoseConfig pose) {
  CanonicalPose c;
  c.centers.reserve(pose.parts.size());
  for (const auto& p : pose.parts) c.centers.push_back(part_center(p));
  c.pose = std::move(pose);
  return c;
}

void CanonicalPose::validate() const {
  pose.validate();
  if (centers.size() != pose.parts.size())
    throw ValidationError("canonical pose centre count does not match part count");
}

std::vector<PartFrame> part_frames(const PoseConfig& pose, const CanonicalPose& canon,
                                   bool normalize_length) {
  if (pose.size() != canon.size())
    throw ShapeError("pose and canonical pose disagree on part count");
  std::vector<PartFrame> frames(pose.parts.size());
  for (std::size_t k = 0; k < pose.parts.size(); ++k) {
    const auto& p = pose.parts[k];
    const auto& c = canon.pose.parts[k];
    PartFrame& f = frames[k];
    f.scale = normalize_length ? c.length / p.length : 1.0;
    f.local_rotation = p.transform.rotation.transpose();
    f.origin = p.transform.translation;
    f.linear = f.scale * (c.transform.rotation * f.local_rotation);
    f.offset = c.transform.translation - f.linear * f.origin;
    f.center = canon.centers[k];
  }
  return frames;
}

Vec3 to_local(const Vec3& x, const RigidTransform& part) { return part.apply_inverse(x); }

Vec3 to_canonical(const Vec3& x, int part_index, const PoseConfig& pose,
                  const CanonicalPose& canon, bool normalize_length) {
  if (part_index < 0 || part_index >= pose.size() || part_index >= canon.size())
    throw IndexError("part index " + std::to_string(part_index) + " out of range");
  const auto& p = pose.parts[part_index];
  const auto& c = canon.pose.parts[part_index];
  const Vec3 local = to_local(x, p.transform);
  const double s = normalize_length ? c.length / p.length : 1.0;
  return s * (c.transform.rotation * local) + c.transform.translation;
}

std::vector<int> Skeleton::topological_order() const {
  const int n = size();
  if (n == 0) throw StructuralError("skeleton has no parts");
  if (!attach.empty() && static_cast<int>(attach.size()) != n)
    throw StructuralError("attach list length does not match part count");
  int roots = 0;
  for (int k = 0; k < n; ++k) {
    if (parent[k] == -1) {
      ++roots;
    } else if (parent[k] < -1 || parent[k] >= n || parent[k] == k) {
      throw StructuralError("part " + std::to_string(k) + " has invalid parent");
    }
  }
  if (roots != 1) throw StructuralError("skeleton must have exactly one root");

  std::vector<int> depth(n, -1);
  for (int k = 0; k < n; ++k) {
    int d = 0;
    for (int j = k; parent[j] != -1; j = parent[j]) {
      if (++d > n) throw StructuralError("skeleton parent graph has a cycle");
    }
    depth[k] = d;
  }
  std::vector<int> order(n);
  for (int k = 0; k < n; ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return depth[a] < depth[b]; });
  return order;
}

PoseConfig forward_kinematics(const Skeleton& skeleton, std::span<const Vec3> joint_angles,
                              std::span<const double> lengths, const RigidTransform& root) {
  const auto order = skeleton.topological_order();
  const int n = skeleton.size();
  if (static_cast<int>(joint_angles.size()) != n || static_cast<int>(lengths.size()) != n)
    throw ShapeError("joint angle / length count does not match skeleton");
  for (int k = 0; k < n; ++k) {
    if (!(lengths[k] > 0.0)) throw ValidationError("bone lengths must be positive");
  }

  PoseConfig pose;
  pose.parts.resize(n);
  for (int k : order) {
    const Mat3 local = euler_xyz(joint_angles[k]);
    PartPose& part = pose.parts[k];
    part.length = lengths[k];
    const int p = skeleton.parent[k];
    if (p < 0) {
      part.transform.rotation = root.rotation * local;
      part.transform.translation = root.translation;
    } else {
      const RigidTransform& pt = pose.parts[p].transform;
      part.transform.rotation = pt.rotation * local;
      part.transform.translation =
          pt.translation + pt.rotation * Vec3(skeleton.attach_fraction(k) * lengths[p], 0.0, 0.0);
    }
  }
  return pose;
}

void Camera::validate() const {
  extrinsic.validate();
  if (!(focal > 0.0)) throw ValidationError("camera focal length must be positive");
  if (!(near > 0.0) || !(far > near)) throw ValidationError("camera requires 0 < near < far");
  if (width < 1 || height < 1) throw ValidationError("camera image size must be positive");
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double focal,
                       int width, int height, double near, double far) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-12) throw ValidationError("look_at: up vector parallel to view direction");
  right.normalize();
  const Vec3 down = forward.cross(right);
  Camera cam;
  cam.extrinsic.rotation.row(0) = right.transpose();
  cam.extrinsic.rotation.row(1) = down.transpose();
  cam.extrinsic.rotation.row(2) = forward.transpose();
  cam.extrinsic.translation = -(cam.extrinsic.rotation * eye);
  cam.focal = focal;
  cam.width = width;
  cam.height = height;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  cam.near = near;
  cam.far = far;
  return cam;
}

void PosePrior::validate() const {
  for (std::size_t j = 0; j < joints.size(); ++j) {
    const Mat3& c = joints[j].covariance;
    const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
    if (!c.allFinite() || (c - c.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw ValidationError("joint " + std::to_string(j) + " covariance is not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat3> es(c);
    if (es.eigenvalues().minCoeff() < -1e-12 * scale)
      throw ValidationError("joint " + std::to_string(j) +
                            " covariance is not positive semi-definite");
  }
  root.validate();
}

PoseSample sample_pose_gaussian(const PosePrior& prior, const Skeleton& skeleton,
                                std::span<const double> lengths, std::mt19937_64& rng) {
  prior.validate();
  if (static_cast<int>(prior.joints.size()) != skeleton.size())
    throw ShapeError("pose prior joint count does not match skeleton");

  std::normal_distribution<double> normal(0.0, 1.0);
  PoseSample out;
  out.angles.reserve(prior.joints.size());
  for (const auto& joint : prior.joints) {
    Eigen::SelfAdjointEigenSolver<Mat3> es(joint.covariance);
    const Vec3 sd = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Vec3 z(normal(rng), normal(rng), normal(rng));
    out.angles.push_back(joint.mean + es.eigenvectors() * sd.cwiseProduct(z));
  }
  if (prior.random_yaw) {
    std::uniform_real_distribution<double> yaw(0.0, 2.0 * kPi);
    out.yaw = yaw(rng);
  }
  const RigidTransform spin{rot_z(out.yaw), Vec3::Zero()};
  out.pose = forward_kinematics(skeleton, out.angles, lengths, spin.compose(prior.root));
  return out;
}

std::size_t BoneImage::count() const {
  return static_cast<std::size_t>(std::count(pixels.begin(), pixels.end(), std::uint8_t{1}));
}

namespace {

// Liang-Barsky clip of p0->p1 against [lo, hi] on both axes.
bool clip_segment(Vec2& p0, Vec2& p1, const Vec2& lo, const Vec2& hi) {
  double t0 = 0.0, t1 = 1.0;
  const Vec2 d = p1 - p0;
  const double p[4] = {-d.x(), d.x(), -d.y(), d.y()};
  const double q[4] = {p0.x() - lo.x(), hi.x() - p0.x(), p0.y() - lo.y(), hi.y() - p0.y()};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;
      continue;
    }
    const double r = q[i] / p[i];
    if (p[i] < 0.0) {
      if (r > t1) return false;
      t0 = std::max(t0, r);
    } else {
      if (r < t0) return false;
      t1 = std::min(t1, r);
    }
  }
  const Vec2 a = p0 + t0 * d;
  const Vec2 b = p0 + t1 * d;
  p0 = a;
  p1 = b;
  return true;
}

void draw_line(BoneImage& img, int x0, int y0, int x1, int y1) {
  const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
  const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    if (x0 >= 0 && x0 < img.width && y0 >= 0 && y0 < img.height)
      img.pixels[static_cast<std::size_t>(y0) * img.width + x0] = 1;
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

}  // namespace

BoneImage rasterize_bones(const PoseConfig& pose, const Skeleton& skeleton, const Camera& camera) {
  camera.validate();
  if (skeleton.size() != pose.size()) throw ShapeError("skeleton and pose disagree on part count");
  BoneImage img;
  img.width = camera.width;
  img.height = camera.height;
  img.pixels.assign(static_cast<std::size_t>(img.width) * img.height, 0);

  const Vec2 lo(-1.0, -1.0);
  const Vec2 hi(img.width + 1.0, img.height + 1.0);
  for (const auto& part : pose.parts) {
    Vec3 a = camera.to_camera(part.transform.translation);
    Vec3 b = camera.to_camera(bone_tip(part));
    if (a.z() < camera.near && b.z() < camera.near) continue;
    if (a.z() < camera.near) a = b + (a - b) * ((b.z() - camera.near) / (b.z() - a.z()));
    if (b.z() < camera.near) b = a + (b - a) * ((a.z() - camera.near) / (a.z() - b.z()));
    Vec2 pa(camera.focal * a.x() / a.z() + camera.cx, camera.focal * a.y() / a.z() + camera.cy);
    Vec2 pb(camera.focal * b.x() / b.z() + camera.cx, camera.focal * b.y() / b.z() + camera.cy);
    if (!clip_segment(pa, pb, lo, hi)) continue;
    draw_line(img, static_cast<int>(std::floor(pa.x())), static_cast<int>(std::floor(pa.y())),
              static_cast<int>(std::floor(pb.x())), static_cast<int>(std::floor(pb.y())));
  }
  return img;
}

}  // namespace enarf
