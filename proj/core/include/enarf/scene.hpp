#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "enarf/kinematics.hpp"

namespace enarf {

// Joint angles follow base + amplitude * sin(2 pi (frequency t + phase)),
// component-wise, for normalised time t in [0, 1].
struct SceneAnimation {
  std::vector<Vec3> base;
  std::vector<Vec3> amplitude;
  std::vector<Vec3> phase;
  double frequency = 1.0;
};

// Articulated object made of one capsule per part: a segment from the part
// origin to its bone tip, swept by a sphere.
struct SyntheticScene {
  std::string name;
  Skeleton skeleton;
  std::vector<double> lengths;
  std::vector<double> radii;
  std::vector<Vec3> albedo;
  // Joint angles and root placement of the canonical (rest) pose.
  std::vector<Vec3> canonical_angles;
  RigidTransform canonical_root;
  // World placement of the root part.
  RigidTransform root;
  SceneAnimation animation;
  // Density inside a capsule, per metre.
  double density = 40.0;
  // Radii follow r (1 + A sin(2 pi f t)).
  double wobble_amplitude = 0.0;
  double wobble_frequency = 1.0;
  // Suggested tri-plane half extent for models of this scene.
  double triplane_extent = 1.0;

  int parts() const { return skeleton.size(); }
  // Throws ValidationError when shapes disagree or a capsule (at its largest
  // radius) does not fit inside its part's prior cube of half width a.
  void validate(double cube_half_width = 1.0 / 3.0) const;

  std::vector<Vec3> angles_at(double t) const;
  PoseConfig pose_at(double t) const;
  std::vector<double> radii_at(double t) const;
  CanonicalPose canonical() const;
};

struct SceneSpec {
  std::string preset = "capsule2";
  double wobble_amplitude = 0.0;
  double wobble_frequency = 1.0;
  double radius_scale = 1.0;
};

std::vector<std::string> scene_presets();
// Deterministic in (spec, seed); the seed perturbs animation phases only.
SyntheticScene make_synthetic_scene(const SceneSpec& spec, std::uint64_t seed);

}  // namespace enarf
