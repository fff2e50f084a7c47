#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "enarf/common.hpp"
#include "enarf/kinematics.hpp"

namespace enarf {

inline constexpr int kFeatureChannels = 32;
using Feature = std::array<double, kFeatureChannels>;

enum class PlaneAxis : int { XY = 0, XZ = 1, YZ = 2 };

// Three axis-aligned R x R planes spanning [-extent, extent]^2 in canonical
// space. Storage is plane-major, then row (v), column (u), channel:
//   features: [3][R][R][32]    logits: [3][R][R][K]
struct TriPlaneShape {
  int resolution = 64;
  double extent = 1.0;
  int parts = 1;

  std::size_t texels_per_plane() const {
    return static_cast<std::size_t>(resolution) * resolution;
  }
  std::size_t feature_count() const { return 3 * texels_per_plane() * kFeatureChannels; }
  std::size_t logit_count() const { return 3 * texels_per_plane() * parts; }
  // Per-plane channel count of the combined feature + probability image.
  int channels_per_plane() const { return kFeatureChannels + parts; }
  void validate() const;
};

// One multi-channel plane, [R][R][C].
struct PlaneGrid {
  int resolution = 0;
  int channels = 0;
  std::span<const double> data;
};

// Bilinear footprint on an R x R grid with border clamping. Texel indices are
// row-major (v * R + u). Weights are exact at grid nodes.
struct BilinearTap {
  std::array<std::int32_t, 4> texel{};
  std::array<double, 4> weight{};
  double fx = 0.0;
  double fy = 0.0;
  // False when the coordinate was clamped on that axis.
  bool inside_x = true;
  bool inside_y = true;
};

BilinearTap tap_from_texel(int resolution, double px, double py);
BilinearTap tap_from_uv(int resolution, double u, double v);

// Bilinear lookup at uv in [-1, 1]^2; out-of-range uv clamps to the border.
std::vector<double> sample_plane(const PlaneGrid& plane, const Vec2& uv);

struct TriPlaneView {
  TriPlaneShape shape;
  std::span<const double> features;
  std::span<const double> logits;  // empty when the model has no tri-plane selector
};

class TriPlaneField {
 public:
  TriPlaneField() = default;
  explicit TriPlaneField(TriPlaneShape shape);

  const TriPlaneShape& shape() const { return shape_; }
  std::vector<double>& features() { return features_; }
  std::vector<double>& logits() { return logits_; }
  const std::vector<double>& features() const { return features_; }
  const std::vector<double>& logits() const { return logits_; }
  TriPlaneView view() const { return {shape_, features_, logits_}; }
  // Throws ValidationError on non-finite values or size mismatch.
  void validate() const;

 private:
  TriPlaneShape shape_;
  std::vector<double> features_;
  std::vector<double> logits_;
};

// Taps of a canonical point on the xy, xz and yz planes.
std::array<BilinearTap, 3> plane_taps(const TriPlaneShape& shape, const Vec3& xc);

// f^k = F_xy(xc) + F_xz(xc) + F_yz(xc), written into out[0..32).
void part_feature(std::span<const double> features, int resolution,
                  const std::array<BilinearTap, 3>& taps, double* out);

// Product of the logistic of the k-th probability channel on the three planes.
double selector_prob(const TriPlaneView& field, const Vec3& xc, int part_index);
// Same, from precomputed taps; per-plane logistic values go to `per_plane`.
double selector_prob(const TriPlaneView& field, const std::array<BilinearTap, 3>& taps,
                     int part_index, double* per_plane);

inline bool inside_cube(const Vec3& xc, const Vec3& center, double half_width) {
  return std::abs(xc.x() - center.x()) <= half_width &&
         std::abs(xc.y() - center.y()) <= half_width &&
         std::abs(xc.z() - center.z()) <= half_width;
}

// sum_k p^k f^k over the parts whose canonical cube contains the point.
Feature feature_at(const TriPlaneView& field, const Vec3& x, std::span<const PartFrame> frames,
                   double cube_half_width);
Feature feature_at(const TriPlaneView& field, const Vec3& x, const PoseConfig& pose,
                   const CanonicalPose& canon, bool normalize_length,
                   double cube_half_width = 1.0 / 3.0);

// Relative 2D offsets per plane in normalised plane units, [3][R][R][2].
struct DeformationField {
  int resolution = 0;
  std::vector<double> data;

  static DeformationField zeros(int resolution);
};

// Resample each feature plane at uv + deform(uv); probability planes are
// copied unchanged.
TriPlaneField warp_planes(const TriPlaneView& field, const DeformationField& deform);

void warp_features(int resolution, std::span<const double> features,
                   std::span<const double> deform, std::span<double> out);
// Accumulates (+=) gradients with respect to the input features and the
// deformation given the gradient of the warped features.
void warp_features_backward(int resolution, std::span<const double> features,
                            std::span<const double> deform, std::span<const double> grad_out,
                            std::span<double> grad_features, std::span<double> grad_deform);

// Mean of squared feature-plane values (probability planes excluded).
double triplane_l2(const TriPlaneView& field);

}  // namespace enarf
