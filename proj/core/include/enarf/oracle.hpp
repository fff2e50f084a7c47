#pragma once

#include <vector>

#include "enarf/renderer.hpp"
#include "enarf/scene.hpp"

namespace enarf {

struct Capsule {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::UnitX();
  double radius = 0.1;
  Vec3 albedo = Vec3::Ones();
};

std::vector<Capsule> scene_capsules(const SyntheticScene& scene, const PoseConfig& pose, double time);

// Parameter interval [t0, t1] where the (unclipped) line o + t d lies inside
// the capsule. Returns false when the line misses it.
bool ray_capsule_interval(const Ray& ray, const Capsule& capsule, double& t0, double& t1);

// Analytic render of one ray: `samples` equal intervals on [t_near, t_far],
// each with density sigma0 * (covered length / interval length) and the
// coverage-weighted albedo, composited with composite_kernel at the interval
// starts.
CompositeResult oracle_ray(const Ray& ray, const std::vector<Capsule>& capsules, double density,
                           int samples);

RenderOutput oracle_render(const SyntheticScene& scene, const PoseConfig& pose,
                           const Camera& camera, int samples_per_ray, double time = 0.0,
                           int threads = 0);

}  // namespace enarf
