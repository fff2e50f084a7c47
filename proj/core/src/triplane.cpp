#include "enarf/triplane.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace enarf {

void TriPlaneShape::validate() const {
  if (resolution < 2) throw ValidationError("tri-plane resolution must be at least 2");
  if (!(extent > 0.0)) throw ValidationError("tri-plane extent must be positive");
  if (parts < 1) throw ValidationError("tri-plane needs at least one part");
}

namespace {

void axis_tap(int resolution, double p, std::int32_t& i0, double& f, bool& inside) {
  const double hi = static_cast<double>(resolution - 1);
  inside = p >= 0.0 && p <= hi;
  const double c = std::clamp(p, 0.0, hi);
  i0 = std::min(static_cast<std::int32_t>(c), resolution - 2);
  f = c - i0;
}

}  // namespace

BilinearTap tap_from_texel(int resolution, double px, double py) {
  BilinearTap t;
  std::int32_t x0 = 0, y0 = 0;
  axis_tap(resolution, px, x0, t.fx, t.inside_x);
  axis_tap(resolution, py, y0, t.fy, t.inside_y);
  const std::int32_t base = y0 * resolution + x0;
  t.texel = {base, base + 1, base + resolution, base + resolution + 1};
  t.weight = {(1.0 - t.fx) * (1.0 - t.fy), t.fx * (1.0 - t.fy), (1.0 - t.fx) * t.fy, t.fx * t.fy};
  return t;
}

BilinearTap tap_from_uv(int resolution, double u, double v) {
  const double half = 0.5 * (resolution - 1);
  return tap_from_texel(resolution, (u + 1.0) * half, (v + 1.0) * half);
}

std::vector<double> sample_plane(const PlaneGrid& plane, const Vec2& uv) {
  if (plane.resolution < 2) throw ValidationError("plane resolution must be at least 2");
  const std::size_t need =
      static_cast<std::size_t>(plane.resolution) * plane.resolution * plane.channels;
  if (plane.data.size() != need) throw ShapeError("plane data size does not match its shape");
  const BilinearTap t = tap_from_uv(plane.resolution, uv.x(), uv.y());
  std::vector<double> out(plane.channels, 0.0);
  for (int j = 0; j < 4; ++j) {
    const double* src = plane.data.data() + static_cast<std::size_t>(t.texel[j]) * plane.channels;
    for (int c = 0; c < plane.channels; ++c) out[c] += t.weight[j] * src[c];
  }
  return out;
}

TriPlaneField::TriPlaneField(TriPlaneShape shape)
    : shape_(shape), features_(shape.feature_count(), 0.0), logits_(shape.logit_count(), 0.0) {
  shape_.validate();
}

void TriPlaneField::validate() const {
  shape_.validate();
  if (features_.size() != shape_.feature_count() || logits_.size() != shape_.logit_count())
    throw ShapeError("tri-plane storage does not match its shape");
  for (double v : features_)
    if (!std::isfinite(v)) throw ValidationError("tri-plane features contain non-finite values");
  for (double v : logits_)
    if (!std::isfinite(v)) throw ValidationError("tri-plane logits contain non-finite values");
}

std::array<BilinearTap, 3> plane_taps(const TriPlaneShape& shape, const Vec3& xc) {
  const double inv = 1.0 / shape.extent;
  const double x = xc.x() * inv, y = xc.y() * inv, z = xc.z() * inv;
  return {tap_from_uv(shape.resolution, x, y), tap_from_uv(shape.resolution, x, z),
          tap_from_uv(shape.resolution, y, z)};
}

void part_feature(std::span<const double> features, int resolution,
                  const std::array<BilinearTap, 3>& taps, double* out) {
  const std::size_t plane_stride = static_cast<std::size_t>(resolution) * resolution * kFeatureChannels;
  std::fill(out, out + kFeatureChannels, 0.0);
  for (int p = 0; p < 3; ++p) {
    const double* plane = features.data() + p * plane_stride;
    const BilinearTap& t = taps[p];
    for (int j = 0; j < 4; ++j) {
      const double w = t.weight[j];
      const double* src = plane + static_cast<std::size_t>(t.texel[j]) * kFeatureChannels;
      for (int c = 0; c < kFeatureChannels; ++c) out[c] += w * src[c];
    }
  }
}

double selector_prob(const TriPlaneView& field, const std::array<BilinearTap, 3>& taps,
                     int part_index, double* per_plane) {
  const int parts = field.shape.parts;
  const std::size_t plane_stride = field.shape.texels_per_plane() * parts;
  double p = 1.0;
  for (int q = 0; q < 3; ++q) {
    const double* plane = field.logits.data() + q * plane_stride;
    const BilinearTap& t = taps[q];
    double logit = 0.0;
    for (int j = 0; j < 4; ++j)
      logit += t.weight[j] * plane[static_cast<std::size_t>(t.texel[j]) * parts + part_index];
    const double s = sigmoid(logit);
    if (per_plane != nullptr) per_plane[q] = s;
    p *= s;
  }
  return p;
}

double selector_prob(const TriPlaneView& field, const Vec3& xc, int part_index) {
  if (part_index < 0 || part_index >= field.shape.parts)
    throw IndexError("part index " + std::to_string(part_index) + " out of range");
  if (field.logits.size() != field.shape.logit_count())
    throw ShapeError("tri-plane has no probability planes");
  return selector_prob(field, plane_taps(field.shape, xc), part_index, nullptr);
}

Feature feature_at(const TriPlaneView& field, const Vec3& x, std::span<const PartFrame> frames,
                   double cube_half_width) {
  if (static_cast<int>(frames.size()) != field.shape.parts)
    throw ShapeError("tri-plane part count does not match pose");
  Feature f{};
  double fk[kFeatureChannels];
  for (int k = 0; k < field.shape.parts; ++k) {
    const Vec3 xc = frames[k].canonical(x);
    if (!inside_cube(xc, frames[k].center, cube_half_width)) continue;
    const auto taps = plane_taps(field.shape, xc);
    const double p = selector_prob(field, taps, k, nullptr);
    part_feature(field.features, field.shape.resolution, taps, fk);
    for (int c = 0; c < kFeatureChannels; ++c) f[c] += p * fk[c];
  }
  return f;
}

Feature feature_at(const TriPlaneView& field, const Vec3& x, const PoseConfig& pose,
                   const CanonicalPose& canon, bool normalize_length, double cube_half_width) {
  const auto frames = part_frames(pose, canon, normalize_length);
  return feature_at(field, x, frames, cube_half_width);
}

DeformationField DeformationField::zeros(int resolution) {
  DeformationField d;
  d.resolution = resolution;
  d.data.assign(3 * static_cast<std::size_t>(resolution) * resolution * 2, 0.0);
  return d;
}

void warp_features(int resolution, std::span<const double> features,
                   std::span<const double> deform, std::span<double> out) {
  const int R = resolution;
  const std::size_t texels = static_cast<std::size_t>(R) * R;
  const double scale = 0.5 * (R - 1);
  for (int p = 0; p < 3; ++p) {
    const double* in_plane = features.data() + p * texels * kFeatureChannels;
    double* out_plane = out.data() + p * texels * kFeatureChannels;
    const double* d_plane = deform.data() + p * texels * 2;
    for (int v = 0; v < R; ++v) {
      for (int u = 0; u < R; ++u) {
        const std::size_t texel = static_cast<std::size_t>(v) * R + u;
        const BilinearTap t = tap_from_texel(R, u + d_plane[2 * texel] * scale,
                                             v + d_plane[2 * texel + 1] * scale);
        double* dst = out_plane + texel * kFeatureChannels;
        std::fill(dst, dst + kFeatureChannels, 0.0);
        for (int j = 0; j < 4; ++j) {
          const double w = t.weight[j];
          const double* src = in_plane + static_cast<std::size_t>(t.texel[j]) * kFeatureChannels;
          for (int c = 0; c < kFeatureChannels; ++c) dst[c] += w * src[c];
        }
      }
    }
  }
}

void warp_features_backward(int resolution, std::span<const double> features,
                            std::span<const double> deform, std::span<const double> grad_out,
                            std::span<double> grad_features, std::span<double> grad_deform) {
  const int R = resolution;
  const std::size_t texels = static_cast<std::size_t>(R) * R;
  const double scale = 0.5 * (R - 1);
  for (int p = 0; p < 3; ++p) {
    const double* in_plane = features.data() + p * texels * kFeatureChannels;
    double* gin_plane = grad_features.data() + p * texels * kFeatureChannels;
    const double* gout_plane = grad_out.data() + p * texels * kFeatureChannels;
    const double* d_plane = deform.data() + p * texels * 2;
    double* gd_plane = grad_deform.data() + p * texels * 2;
    for (int v = 0; v < R; ++v) {
      for (int u = 0; u < R; ++u) {
        const std::size_t texel = static_cast<std::size_t>(v) * R + u;
        const BilinearTap t = tap_from_texel(R, u + d_plane[2 * texel] * scale,
                                             v + d_plane[2 * texel + 1] * scale);
        const double* g = gout_plane + texel * kFeatureChannels;
        for (int j = 0; j < 4; ++j) {
          double* dst = gin_plane + static_cast<std::size_t>(t.texel[j]) * kFeatureChannels;
          const double w = t.weight[j];
          for (int c = 0; c < kFeatureChannels; ++c) dst[c] += w * g[c];
        }
        const double* a = in_plane + static_cast<std::size_t>(t.texel[0]) * kFeatureChannels;
        const double* b = in_plane + static_cast<std::size_t>(t.texel[1]) * kFeatureChannels;
        const double* c0 = in_plane + static_cast<std::size_t>(t.texel[2]) * kFeatureChannels;
        const double* d = in_plane + static_cast<std::size_t>(t.texel[3]) * kFeatureChannels;
        double gx = 0.0, gy = 0.0;
        for (int c = 0; c < kFeatureChannels; ++c) {
          gx += g[c] * ((1.0 - t.fy) * (b[c] - a[c]) + t.fy * (d[c] - c0[c]));
          gy += g[c] * ((1.0 - t.fx) * (c0[c] - a[c]) + t.fx * (d[c] - b[c]));
        }
        if (t.inside_x) gd_plane[2 * texel] += gx * scale;
        if (t.inside_y) gd_plane[2 * texel + 1] += gy * scale;
      }
    }
  }
}

TriPlaneField warp_planes(const TriPlaneView& field, const DeformationField& deform) {
  if (deform.resolution != field.shape.resolution)
    throw ShapeError("deformation resolution does not match tri-plane");
  TriPlaneField out(field.shape);
  warp_features(field.shape.resolution, field.features, deform.data, out.features());
  std::copy(field.logits.begin(), field.logits.end(), out.logits().begin());
  return out;
}

double triplane_l2(const TriPlaneView& field) {
  if (field.features.empty()) return 0.0;
  double sum = 0.0;
  for (double v : field.features) sum += v * v;
  return sum / static_cast<double>(field.features.size());
}

}  // namespace enarf
