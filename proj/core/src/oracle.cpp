#include "enarf/oracle.hpp"

#include <algorithm>
#include <cmath>

#include <omp.h>

namespace enarf {

std::vector<Capsule> scene_capsules(const SyntheticScene& scene, const PoseConfig& pose, double time) {
  if (pose.size() != scene.parts()) throw ShapeError("pose does not match scene part count");
  const auto radii = scene.radii_at(time);
  std::vector<Capsule> out(pose.size());
  for (int k = 0; k < pose.size(); ++k) {
    out[k].a = pose.parts[k].transform.translation;
    out[k].b = bone_tip(pose.parts[k]);
    out[k].radius = radii[k];
    out[k].albedo = scene.albedo[k];
  }
  return out;
}

namespace {

bool sphere_interval(const Vec3& o, const Vec3& d, const Vec3& c, double r, double& t0, double& t1) {
  const Vec3 w = o - c;
  const double b = w.dot(d);
  const double disc = b * b - (w.squaredNorm() - r * r);
  if (disc < 0.0) return false;
  const double s = std::sqrt(disc);
  t0 = -b - s;
  t1 = -b + s;
  return true;
}

void merge(bool& any, double& lo, double& hi, double a, double b) {
  if (a > b) return;
  if (!any) {
    lo = a;
    hi = b;
    any = true;
  } else {
    lo = std::min(lo, a);
    hi = std::max(hi, b);
  }
}

}  // namespace

bool ray_capsule_interval(const Ray& ray, const Capsule& cap, double& t0, double& t1) {
  const Vec3& o = ray.origin;
  const Vec3& d = ray.direction;
  bool any = false;
  double lo = 0.0, hi = 0.0;
  double s0, s1;
  if (sphere_interval(o, d, cap.a, cap.radius, s0, s1)) merge(any, lo, hi, s0, s1);
  if (sphere_interval(o, d, cap.b, cap.radius, s0, s1)) merge(any, lo, hi, s0, s1);

  const Vec3 axis = cap.b - cap.a;
  const double len = axis.norm();
  if (len > 0.0) {
    const Vec3 u = axis / len;
    const Vec3 w = o - cap.a;
    const Vec3 dp = d - d.dot(u) * u;
    const Vec3 wp = w - w.dot(u) * u;
    const double A = dp.squaredNorm();
    const double B = wp.dot(dp);
    const double C = wp.squaredNorm() - cap.radius * cap.radius;
    double c0 = 0.0, c1 = 0.0;
    bool hit = false;
    if (A < 1e-14) {
      if (C <= 0.0) {
        c0 = -1e300;
        c1 = 1e300;
        hit = true;
      }
    } else {
      const double disc = B * B - A * C;
      if (disc >= 0.0) {
        const double s = std::sqrt(disc);
        c0 = (-B - s) / A;
        c1 = (-B + s) / A;
        hit = true;
      }
    }
    if (hit) {
      // Restrict to the slab 0 <= (w + t d).u <= len.
      const double du = d.dot(u), wu = w.dot(u);
      if (std::abs(du) < 1e-14) {
        if (wu < 0.0 || wu > len) hit = false;
      } else {
        double a0 = (0.0 - wu) / du, a1 = (len - wu) / du;
        if (a0 > a1) std::swap(a0, a1);
        c0 = std::max(c0, a0);
        c1 = std::min(c1, a1);
      }
      if (hit) merge(any, lo, hi, c0, c1);
    }
  }
  if (!any) return false;
  t0 = lo;
  t1 = hi;
  return true;
}

CompositeResult oracle_ray(const Ray& ray, const std::vector<Capsule>& capsules, double density,
                           int samples) {
  struct Span {
    double t0, t1;
    Vec3 albedo;
  };
  std::vector<Span> spans;
  for (const Capsule& c : capsules) {
    double t0, t1;
    if (!ray_capsule_interval(ray, c, t0, t1)) continue;
    t0 = std::max(t0, ray.t_near);
    t1 = std::min(t1, ray.t_far);
    if (t1 > t0) spans.push_back({t0, t1, c.albedo});
  }
  if (spans.empty()) return {};

  const double delta = (ray.t_far - ray.t_near) / samples;
  std::vector<double> t(samples), sigma(samples, 0.0);
  std::vector<Vec3> color(samples, Vec3::Zero());
  std::vector<std::pair<double, double>> pieces;
  for (int i = 0; i < samples; ++i) {
    const double a = ray.t_near + i * delta;
    const double b = i + 1 < samples ? ray.t_near + (i + 1) * delta : ray.t_far;
    t[i] = a;
    pieces.clear();
    Vec3 weighted = Vec3::Zero();
    double total = 0.0;
    for (const Span& s : spans) {
      const double lo = std::max(a, s.t0), hi = std::min(b, s.t1);
      if (hi <= lo) continue;
      pieces.emplace_back(lo, hi);
      weighted += (hi - lo) * s.albedo;
      total += hi - lo;
    }
    if (pieces.empty()) continue;
    // Length of the union of overlapping pieces.
    std::sort(pieces.begin(), pieces.end());
    double covered = 0.0, cur_lo = pieces[0].first, cur_hi = pieces[0].second;
    for (std::size_t p = 1; p < pieces.size(); ++p) {
      if (pieces[p].first > cur_hi) {
        covered += cur_hi - cur_lo;
        cur_lo = pieces[p].first;
        cur_hi = pieces[p].second;
      } else {
        cur_hi = std::max(cur_hi, pieces[p].second);
      }
    }
    covered += cur_hi - cur_lo;
    sigma[i] = density * covered / (b - a);
    color[i] = weighted / total;
  }
  return composite_kernel(samples, t.data(), color.data(), sigma.data(), ray.t_far);
}

RenderOutput oracle_render(const SyntheticScene& scene, const PoseConfig& pose,
                           const Camera& camera, int samples_per_ray, double time, int threads) {
  camera.validate();
  if (samples_per_ray < 1) throw ValidationError("oracle needs at least one sample per ray");
  const auto capsules = scene_capsules(scene, pose, time);
  const int W = camera.width, H = camera.height;
  RenderOutput out = RenderOutput::zeros(W, H);
  const int nt = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(nt)
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * W + x;
      const CompositeResult r = oracle_ray(pixel_ray(camera, x, y), capsules, scene.density, samples_per_ray);
      for (int c = 0; c < 3; ++c) out.rgb[3 * p + c] = r.rgb[c];
      out.mask[p] = r.mask;
      out.inv_depth[p] = r.inv_depth;
    }
  }
  return out;
}

}  // namespace enarf
