#include "enarf/scene.hpp"

#include <cmath>
#include <random>

namespace enarf {

void SyntheticScene::validate(double a) const {
  skeleton.validate();
  const std::size_t k = static_cast<std::size_t>(parts());
  if (lengths.size() != k || radii.size() != k || albedo.size() != k ||
      canonical_angles.size() != k || animation.base.size() != k ||
      animation.amplitude.size() != k || animation.phase.size() != k)
    throw ValidationError("scene '" + name + "': per-part arrays disagree with the skeleton");
  if (!(density > 0.0)) throw ValidationError("scene density must be positive");
  if (wobble_amplitude < 0.0 || wobble_amplitude >= 1.0)
    throw ValidationError("wobble amplitude must lie in [0, 1)");
  if (!(triplane_extent > 0.0)) throw ValidationError("tri-plane extent must be positive");
  for (std::size_t i = 0; i < k; ++i) {
    if (!(lengths[i] > 0.0)) throw ValidationError("capsule lengths must be positive");
    const double r = radii[i] * (1.0 + wobble_amplitude);
    if (!(radii[i] > 0.0) || !(r < a))
      throw ValidationError("capsule radius must be positive and below the cube half width");
    if (0.5 * lengths[i] + r > a + 1e-12)
      throw ValidationError("capsule " + std::to_string(i) + " does not fit inside its prior cube");
  }
}

std::vector<Vec3> SyntheticScene::angles_at(double t) const {
  std::vector<Vec3> out(parts());
  for (int k = 0; k < parts(); ++k) {
    for (int d = 0; d < 3; ++d) {
      out[k][d] = animation.base[k][d] +
                  animation.amplitude[k][d] *
                      std::sin(2.0 * kPi * (animation.frequency * t + animation.phase[k][d]));
    }
  }
  return out;
}

PoseConfig SyntheticScene::pose_at(double t) const {
  const auto angles = angles_at(t);
  return forward_kinematics(skeleton, angles, lengths, root);
}

std::vector<double> SyntheticScene::radii_at(double t) const {
  std::vector<double> r(radii);
  const double s = 1.0 + wobble_amplitude * std::sin(2.0 * kPi * wobble_frequency * t);
  for (double& v : r) v *= s;
  return r;
}

CanonicalPose SyntheticScene::canonical() const {
  return CanonicalPose::from_pose(
      forward_kinematics(skeleton, canonical_angles, lengths, canonical_root));
}

std::vector<std::string> scene_presets() { return {"capsule2", "capsule3-chain", "humanoid9"}; }

namespace {

SyntheticScene capsule_chain(int n, double length, double radius) {
  SyntheticScene s;
  for (int k = 0; k < n; ++k) s.skeleton.parent.push_back(k - 1);
  s.lengths.assign(n, length);
  s.radii.assign(n, radius);
  s.canonical_angles.assign(n, Vec3::Zero());
  s.canonical_root.translation = Vec3(-0.5 * n * length, 0.0, 0.0);
  s.animation.base.assign(n, Vec3::Zero());
  s.animation.amplitude.assign(n, Vec3::Zero());
  s.animation.phase.assign(n, Vec3::Zero());
  return s;
}

SyntheticScene make_capsule2() {
  SyntheticScene s = capsule_chain(2, 0.4, 0.12);
  s.name = "capsule2";
  s.albedo = {Vec3(0.85, 0.25, 0.15), Vec3(0.15, 0.45, 0.85)};
  s.root.translation = Vec3(-0.25, 0.0, 0.0);
  s.animation.base = {Vec3(0.0, 0.0, 0.0), Vec3(0.0, 0.0, 1.0)};
  s.animation.amplitude = {Vec3(0.3, 0.15, 0.25), Vec3(0.0, 0.4, 0.6)};
  s.animation.phase = {Vec3(0.0, 0.25, 0.5), Vec3(0.0, 0.1, 0.0)};
  s.triplane_extent = 0.6;
  return s;
}

SyntheticScene make_capsule3() {
  SyntheticScene s = capsule_chain(3, 0.36, 0.1);
  s.name = "capsule3-chain";
  s.albedo = {Vec3(0.85, 0.25, 0.15), Vec3(0.2, 0.75, 0.3), Vec3(0.15, 0.45, 0.85)};
  s.root.translation = Vec3(-0.4, 0.0, 0.0);
  s.animation.base = {Vec3::Zero(), Vec3(0.0, 0.0, 0.8), Vec3(0.0, 0.0, 0.8)};
  s.animation.amplitude = {Vec3(0.3, 0.1, 0.2), Vec3(0.0, 0.3, 0.5), Vec3(0.0, 0.3, 0.5)};
  s.animation.phase = {Vec3(0.0, 0.25, 0.5), Vec3(0.0, 0.1, 0.0), Vec3(0.0, 0.6, 0.3)};
  s.triplane_extent = 0.8;
  return s;
}

SyntheticScene make_humanoid9() {
  SyntheticScene s;
  s.name = "humanoid9";
  // spine, neck, head, arm L, arm R, thigh L, thigh R, shin L, shin R
  s.skeleton.parent = {-1, 0, 1, 0, 0, 0, 0, 5, 6};
  s.skeleton.attach = {1.0, 1.0, 1.0, 0.85, 0.85, 0.0, 0.0, 1.0, 1.0};
  s.lengths = {0.4, 0.12, 0.22, 0.46, 0.46, 0.44, 0.44, 0.44, 0.44};
  s.radii = {0.12, 0.05, 0.1, 0.06, 0.06, 0.08, 0.08, 0.07, 0.07};
  s.albedo = {Vec3(0.8, 0.3, 0.2),  Vec3(0.9, 0.7, 0.5),  Vec3(0.95, 0.8, 0.6),
              Vec3(0.2, 0.6, 0.3),  Vec3(0.3, 0.3, 0.8),  Vec3(0.6, 0.2, 0.7),
              Vec3(0.2, 0.7, 0.7),  Vec3(0.7, 0.6, 0.2),  Vec3(0.4, 0.4, 0.4)};
  // The spine's +x points up; limbs are placed relative to it.
  s.canonical_angles = {Vec3::Zero(),
                        Vec3::Zero(),
                        Vec3::Zero(),
                        Vec3(0.0, 0.0, 0.5 * kPi),
                        Vec3(0.0, 0.0, -0.5 * kPi),
                        Vec3(0.0, 0.0, kPi - 0.25),
                        Vec3(0.0, 0.0, -kPi + 0.25),
                        Vec3::Zero(),
                        Vec3::Zero()};
  s.canonical_root.rotation = rot_y(-0.5 * kPi);
  s.canonical_root.translation = Vec3(0.0, 0.0, -0.1);
  s.root = s.canonical_root;
  s.animation.base = s.canonical_angles;
  s.animation.amplitude = {Vec3(0.1, 0.1, 0.1), Vec3(0.0, 0.2, 0.2), Vec3(0.0, 0.2, 0.3),
                           Vec3(0.6, 0.5, 0.3), Vec3(0.6, 0.5, 0.3), Vec3(0.2, 0.6, 0.1),
                           Vec3(0.2, 0.6, 0.1), Vec3(0.0, 0.8, 0.0), Vec3(0.0, 0.8, 0.0)};
  s.animation.phase.assign(9, Vec3::Zero());
  s.animation.phase[4] = Vec3(0.5, 0.5, 0.5);
  s.animation.phase[6] = Vec3(0.5, 0.5, 0.5);
  s.animation.phase[8] = Vec3(0.5, 0.5, 0.5);
  s.triplane_extent = 1.0;
  return s;
}

}  // namespace

SyntheticScene make_synthetic_scene(const SceneSpec& spec, std::uint64_t seed) {
  SyntheticScene s;
  if (spec.preset == "capsule2")
    s = make_capsule2();
  else if (spec.preset == "capsule3-chain")
    s = make_capsule3();
  else if (spec.preset == "humanoid9")
    s = make_humanoid9();
  else
    throw ValidationError("unknown scene preset '" + spec.preset + "'");
  for (double& r : s.radii) r *= spec.radius_scale;
  s.wobble_amplitude = spec.wobble_amplitude;
  s.wobble_frequency = spec.wobble_frequency;
  if (seed != 0) {
    std::mt19937_64 rng(derive_seed(seed, 0x5ce4e));
    std::uniform_real_distribution<double> jitter(-0.05, 0.05);
    for (Vec3& p : s.animation.phase)
      for (int d = 0; d < 3; ++d) p[d] += jitter(rng);
  }
  s.validate();
  return s;
}

}  // namespace enarf
