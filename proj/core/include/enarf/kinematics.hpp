#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "enarf/common.hpp"

namespace enarf {

// Rigid transform mapping part-local coordinates to world coordinates:
// x_world = rotation * x_local + translation.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
  Vec3 apply_inverse(const Vec3& x) const { return rotation.transpose() * (x - translation); }
  // (*this) o rhs
  RigidTransform compose(const RigidTransform& rhs) const;
  RigidTransform inverse() const;
  // Throws ValidationError unless rotation is orthonormal with det +1.
  void validate() const;
};

bool is_rotation(const Mat3& r, double tol = 1e-9);

Mat3 rot_x(double angle);
Mat3 rot_y(double angle);
Mat3 rot_z(double angle);
// Intrinsic X-Y'-Z'' Euler angles: R = Rx(a.x) * Ry(a.y) * Rz(a.z).
Mat3 euler_xyz(const Vec3& angles);

// Bones rest along the local +x axis; a part of length l spans [0, l] on x.
struct PartPose {
  double length = 1.0;
  RigidTransform transform;
};

struct PoseConfig {
  std::vector<PartPose> parts;

  int size() const { return static_cast<int>(parts.size()); }
  void validate() const;
};

Vec3 bone_tip(const PartPose& part);
Vec3 part_center(const PartPose& part);

// Reference pose that defines the shared canonical space, together with the
// per-part centres used by the cube shape prior.
struct CanonicalPose {
  PoseConfig pose;
  std::vector<Vec3> centers;

  static CanonicalPose from_pose(PoseConfig pose);
  int size() const { return pose.size(); }
  void validate() const;
};

// Per-part affine maps precomputed for one (pose, canonical pose) pair.
// canonical(x) = linear * x + offset, local(x) = R^T (x - origin).
struct PartFrame {
  Mat3 linear;
  Vec3 offset;
  Vec3 center;
  Mat3 local_rotation;  // R^T
  Vec3 origin;          // t
  double scale = 1.0;   // l^c / l when bone lengths are normalised

  Vec3 canonical(const Vec3& x) const { return linear * x + offset; }
  Vec3 local(const Vec3& x) const { return local_rotation * (x - origin); }
};

std::vector<PartFrame> part_frames(const PoseConfig& pose, const CanonicalPose& canon,
                                   bool normalize_length);

Vec3 to_local(const Vec3& x, const RigidTransform& part);
Vec3 to_canonical(const Vec3& x, int part_index, const PoseConfig& pose,
                  const CanonicalPose& canon, bool normalize_length);

struct Skeleton {
  std::vector<int> parent;
  // Where each part attaches along its parent's bone, as a fraction of the
  // parent length (1 = at the parent's tip). Empty means all ones.
  std::vector<double> attach;

  int size() const { return static_cast<int>(parent.size()); }
  double attach_fraction(int k) const { return attach.empty() ? 1.0 : attach[k]; }
  // Parents-before-children order. Throws StructuralError for cycles,
  // out-of-range parents or anything other than a single root.
  std::vector<int> topological_order() const;
  void validate() const { (void)topological_order(); }
};

PoseConfig forward_kinematics(const Skeleton& skeleton, std::span<const Vec3> joint_angles,
                              std::span<const double> lengths, const RigidTransform& root);

// Pinhole camera. The extrinsic maps world to camera coordinates; the camera
// looks down +z with +x right and +y down in the image.
struct Camera {
  RigidTransform extrinsic;
  double focal = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;
  double near = 0.1;
  double far = 10.0;

  void validate() const;
  Vec3 center() const { return -(extrinsic.rotation.transpose() * extrinsic.translation); }
  Vec3 to_camera(const Vec3& world) const { return extrinsic.apply(world); }

  static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double focal,
                        int width, int height, double near, double far);
};

struct JointGaussian {
  Vec3 mean = Vec3::Zero();
  Mat3 covariance = Mat3::Zero();
};

struct PosePrior {
  std::vector<JointGaussian> joints;
  RigidTransform root;
  // Rotate the whole figure uniformly about the world vertical (+z) axis.
  bool random_yaw = true;

  void validate() const;
};

struct PoseSample {
  std::vector<Vec3> angles;
  double yaw = 0.0;
  PoseConfig pose;
};

PoseSample sample_pose_gaussian(const PosePrior& prior, const Skeleton& skeleton,
                                std::span<const double> lengths, std::mt19937_64& rng);

struct BoneImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::size_t count() const;
};

// One-pixel-wide bone segments (joint to bone tip) in the camera image.
BoneImage rasterize_bones(const PoseConfig& pose, const Skeleton& skeleton, const Camera& camera);

}  // namespace enarf
