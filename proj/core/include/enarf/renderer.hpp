#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "enarf/common.hpp"
#include "enarf/field.hpp"
#include "enarf/kinematics.hpp"
#include "enarf/memory.hpp"
#include "enarf/model.hpp"

namespace enarf {

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
  double t_near = 0.0;
  double t_far = 1.0;

  Vec3 at(double t) const { return origin + t * direction; }
  // Throws ValidationError for a non-unit direction or t_near >= t_far.
  void validate() const;
};

// Ray through the centre of pixel (px, py); near/far are distances along the
// normalised direction.
Ray pixel_ray(const Camera& camera, int px, int py);
// Row-major, one ray per pixel.
std::vector<Ray> generate_rays(const Camera& camera);

bool ray_hits_box(const Ray& ray, const Aabb& box);
bool ray_hits_any(const Ray& ray, std::span<const Aabb> boxes);

struct SamplingConfig {
  int coarse = 48;
  int fine = 64;

  int total() const { return coarse + fine; }
};

struct RaySample {
  double t = 0.0;
  RadianceSample value;
};

struct CompositeResult {
  Vec3 rgb = Vec3::Zero();
  double mask = 0.0;
  double inv_depth = 0.0;
};

// Quadrature shared by the renderer and the analytic oracle. Ties in t are
// allowed (zero-length intervals). Compositing weights go to `weights` when
// non-null.
CompositeResult composite_kernel(int n, const double* t, const Vec3* color, const double* sigma,
                                 double t_far, double* weights = nullptr);
// Accumulates into dsigma / dcolor (which must be zeroed by the caller).
void composite_kernel_backward(int n, const double* t, const Vec3* color, const double* sigma,
                               double t_far, const Vec3& grad_rgb, double grad_mask,
                               double grad_inv_depth, double* dsigma, Vec3* dcolor);

// Checked form: t strictly increasing and t_far >= t.back().
CompositeResult composite(std::span<const double> t, std::span<const Vec3> color,
                          std::span<const double> sigma, double t_far);
struct CompositeGrad {
  std::vector<double> sigma;
  std::vector<Vec3> color;
};
CompositeGrad composite_backward(std::span<const double> t, std::span<const Vec3> color,
                                 std::span<const double> sigma, double t_far,
                                 const Vec3& grad_rgb, double grad_mask, double grad_inv_depth);

// Inverse-CDF sampling of `count` points in piecewise-constant bins defined by
// `edges` (size n + 1) and non-negative `weights` (size n). Stratified: the
// j-th draw uses u = (j + U) / count. A small floor on the weights makes an
// all-zero histogram uniform.
void importance_sample(int n, const double* edges, const double* weights, int count,
                       StreamRng& rng, double* out);

// Per-ray scratch space, reused across rays by one thread.
struct RayWorkspace {
  FieldTape tape;
  std::vector<double> t;
  std::vector<double> sigma;
  std::vector<Vec3> color;
  std::vector<int> order;
  std::vector<double> sorted_t;
  std::vector<double> sorted_sigma;
  std::vector<Vec3> sorted_color;
  std::vector<double> weights;
  std::vector<double> dsigma;
  std::vector<Vec3> dcolor;
  double t_far = 0.0;
  bool record = false;
  // When set, the coarse + fine depths (in evaluation order) are taken from
  // here instead of being sampled.
  const double* fixed_t = nullptr;
};

// Coarse-to-fine sampling: `coarse` stratified points, then `fine` points by
// inverse CDF of the coarse compositing weights, all evaluated by the same
// field and merged in t order. Fine positions carry no gradient.
std::vector<RaySample> sample_along_ray(const Ray& ray, const FieldEvaluator& field,
                                        const SamplingConfig& sampling, StreamRng& rng);

CompositeResult trace_ray(const FieldEvaluator& field, const Ray& ray,
                          const SamplingConfig& sampling, StreamRng& rng, RayWorkspace& ws,
                          RenderStats* stats);
// Requires a trace_ray call with ws.record set.
void backprop_ray(const FieldEvaluator& field, RayWorkspace& ws, const Vec3& grad_rgb,
                  double grad_mask, double grad_inv_depth, const GradSink& sink);

struct RenderOutput {
  int width = 0;
  int height = 0;
  std::vector<double> rgb;        // H x W x 3
  std::vector<double> mask;       // H x W
  std::vector<double> inv_depth;  // H x W

  static RenderOutput zeros(int width, int height);
  ImageView rgb_view() const { return {width, height, 3, rgb}; }
  ImageView mask_view() const { return {width, height, 1, mask}; }
};

struct RenderOptions {
  SamplingConfig sampling;
  bool cull = true;
  int threads = 0;  // 0: OpenMP default
  std::uint64_t seed = 0;
};

// A model specialised to one pose and time. For the deformable variant the
// deformation field is generated and the feature planes are warped once here.
class PreparedFrame {
 public:
  PreparedFrame(const Model& model, const ParamStore& params, const PoseConfig& pose,
                const CanonicalPose& canon, double time);

  PreparedFrame(const PreparedFrame&) = delete;
  PreparedFrame& operator=(const PreparedFrame&) = delete;

  const FieldEvaluator& field() const { return *field_; }
  bool deformed() const { return deformed_; }
  const DeformForward& deform_forward() const { return deform_fwd_; }
  const DeformationField& deformation() const { return deformation_; }
  std::span<const double> warped_features() const { return warped_; }

 private:
  bool deformed_ = false;
  DeformForward deform_fwd_;
  DeformationField deformation_;
  tracked_vector<double> warped_;
  std::unique_ptr<FieldEvaluator> field_;
};

// Renders every pixel. Pixels whose ray misses all part boxes are left at
// zero when opts.cull is set. Pixel (x, y) draws from the stream
// (opts.seed, y * W + x), so the result does not depend on thread count.
RenderOutput render_image(const FieldEvaluator& field, const Camera& camera,
                          const RenderOptions& opts, RenderStats* stats = nullptr);
RenderOutput render_image(const Model& model, const ParamStore& params, const PoseConfig& pose,
                          const CanonicalPose& canon, double time, const Camera& camera,
                          const RenderOptions& opts, RenderStats* stats = nullptr);

// C = C_f + C_b (1 - M_f).
std::vector<double> composite_background(const RenderOutput& fg, std::span<const double> bg_rgb);

}  // namespace enarf
