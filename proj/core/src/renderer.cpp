#include "enarf/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <omp.h>

namespace enarf {

void Ray::validate() const {
  if (std::abs(direction.norm() - 1.0) > 1e-9) throw ValidationError("ray direction is not unit length");
  if (!(t_near < t_far)) throw ValidationError("degenerate ray: t_near >= t_far");
}

Ray pixel_ray(const Camera& camera, int px, int py) {
  const Vec3 d_cam((px + 0.5 - camera.cx) / camera.focal, (py + 0.5 - camera.cy) / camera.focal, 1.0);
  Ray r;
  r.origin = camera.center();
  r.direction = (camera.extrinsic.rotation.transpose() * d_cam).normalized();
  r.t_near = camera.near;
  r.t_far = camera.far;
  return r;
}

std::vector<Ray> generate_rays(const Camera& camera) {
  camera.validate();
  std::vector<Ray> rays;
  rays.reserve(static_cast<std::size_t>(camera.width) * camera.height);
  for (int y = 0; y < camera.height; ++y)
    for (int x = 0; x < camera.width; ++x) rays.push_back(pixel_ray(camera, x, y));
  return rays;
}

bool ray_hits_box(const Ray& ray, const Aabb& box) {
  double t0 = ray.t_near, t1 = ray.t_far;
  for (int a = 0; a < 3; ++a) {
    const double o = ray.origin[a], d = ray.direction[a];
    if (d == 0.0) {
      if (o < box.lo[a] || o > box.hi[a]) return false;
      continue;
    }
    double ta = (box.lo[a] - o) / d, tb = (box.hi[a] - o) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

bool ray_hits_any(const Ray& ray, std::span<const Aabb> boxes) {
  for (const Aabb& b : boxes)
    if (ray_hits_box(ray, b)) return true;
  return false;
}

CompositeResult composite_kernel(int n, const double* t, const Vec3* color, const double* sigma,
                                 double t_far, double* weights) {
  CompositeResult r;
  double T = 1.0;
  for (int i = 0; i < n; ++i) {
    const double delta = (i + 1 < n ? t[i + 1] : t_far) - t[i];
    const double keep = std::exp(-sigma[i] * delta);
    const double w = T * (1.0 - keep);
    if (weights != nullptr) weights[i] = w;
    if (w != 0.0) {
      r.rgb += w * color[i];
      r.mask += w;
      r.inv_depth += w / t[i];
    }
    T *= keep;
  }
  return r;
}

void composite_kernel_backward(int n, const double* t, const Vec3* color, const double* sigma,
                               double t_far, const Vec3& grad_rgb, double grad_mask,
                               double grad_inv_depth, double* dsigma, Vec3* dcolor) {
  thread_local std::vector<double> w, after, g;
  w.resize(n);
  after.resize(n);
  g.resize(n);
  double T = 1.0;
  for (int i = 0; i < n; ++i) {
    const double delta = (i + 1 < n ? t[i + 1] : t_far) - t[i];
    const double keep = std::exp(-sigma[i] * delta);
    w[i] = T * (1.0 - keep);
    T *= keep;
    after[i] = T;
    g[i] = grad_rgb.dot(color[i]) + grad_mask + grad_inv_depth / t[i];
  }
  double suffix = 0.0;  // sum_{j > i} w_j g_j
  for (int i = n - 1; i >= 0; --i) {
    const double delta = (i + 1 < n ? t[i + 1] : t_far) - t[i];
    dsigma[i] += delta * (after[i] * g[i] - suffix);
    dcolor[i] += w[i] * grad_rgb;
    suffix += w[i] * g[i];
  }
}

namespace {

void check_samples(std::span<const double> t, std::span<const Vec3> color,
                   std::span<const double> sigma, double t_far) {
  if (color.size() != t.size() || sigma.size() != t.size())
    throw ShapeError("composite: sample arrays differ in length");
  for (std::size_t i = 1; i < t.size(); ++i)
    if (!(t[i] > t[i - 1])) throw ValidationError("composite: sample depths must be strictly increasing");
  if (!t.empty() && t_far < t.back()) throw ValidationError("composite: t_far precedes the last sample");
}

}  // namespace

CompositeResult composite(std::span<const double> t, std::span<const Vec3> color,
                          std::span<const double> sigma, double t_far) {
  check_samples(t, color, sigma, t_far);
  return composite_kernel(static_cast<int>(t.size()), t.data(), color.data(), sigma.data(), t_far);
}

CompositeGrad composite_backward(std::span<const double> t, std::span<const Vec3> color,
                                 std::span<const double> sigma, double t_far,
                                 const Vec3& grad_rgb, double grad_mask, double grad_inv_depth) {
  check_samples(t, color, sigma, t_far);
  CompositeGrad g;
  g.sigma.assign(t.size(), 0.0);
  g.color.assign(t.size(), Vec3::Zero());
  composite_kernel_backward(static_cast<int>(t.size()), t.data(), color.data(), sigma.data(), t_far,
                            grad_rgb, grad_mask, grad_inv_depth, g.sigma.data(), g.color.data());
  return g;
}

void importance_sample(int n, const double* edges, const double* weights, int count,
                       StreamRng& rng, double* out) {
  double raw = 0.0;
  for (int i = 0; i < n; ++i) raw += weights[i];
  if (raw == 0.0) {
    for (int j = 0; j < count; ++j) {
      const double u = (j + rng.uniform()) / count;
      out[j] = edges[0] + u * (edges[n] - edges[0]);
    }
    return;
  }
  thread_local std::vector<double> cdf;
  cdf.resize(n + 1);
  cdf[0] = 0.0;
  for (int i = 0; i < n; ++i) cdf[i + 1] = cdf[i] + weights[i] + 1e-5;
  const double total = cdf[n];
  for (int i = 1; i <= n; ++i) cdf[i] /= total;
  for (int j = 0; j < count; ++j) {
    const double u = (j + rng.uniform()) / count;
    int b = static_cast<int>(std::upper_bound(cdf.begin() + 1, cdf.end(), u) - (cdf.begin() + 1));
    b = std::min(b, n - 1);
    const double width = cdf[b + 1] - cdf[b];
    const double frac = width > 0.0 ? std::clamp((u - cdf[b]) / width, 0.0, 1.0) : 0.0;
    out[j] = edges[b] + frac * (edges[b + 1] - edges[b]);
  }
}

CompositeResult trace_ray(const FieldEvaluator& field, const Ray& ray,
                          const SamplingConfig& sampling, StreamRng& rng, RayWorkspace& ws,
                          RenderStats* stats) {
  if (!(ray.t_near < ray.t_far)) throw ValidationError("degenerate ray: t_near >= t_far");
  const int nc = sampling.coarse, nf = sampling.fine, n = nc + nf;
  ws.t_far = ray.t_far;
  ws.t.resize(n);
  ws.sigma.resize(n);
  ws.color.resize(n);
  ws.weights.resize(nc + 1);
  FieldTape* tape = ws.record ? &ws.tape : nullptr;
  if (tape != nullptr) tape->clear();

  auto eval = [&](int i) {
    const RadianceSample s = field.eval(ray.at(ws.t[i]), ray.direction, tape, stats);
    ws.sigma[i] = s.density;
    ws.color[i] = s.color;
  };

  const double span = ray.t_far - ray.t_near;
  const double delta = span / nc;
  if (ws.fixed_t != nullptr) {
    std::copy(ws.fixed_t, ws.fixed_t + n, ws.t.begin());
    for (int i = 0; i < n; ++i) eval(i);
  } else {
    for (int i = 0; i < nc; ++i) {
      ws.t[i] = ray.t_near + (i + rng.uniform()) * delta;
      eval(i);
    }
  }
  if (nf > 0 && ws.fixed_t == nullptr) {
    composite_kernel(nc, ws.t.data(), ws.color.data(), ws.sigma.data(), ray.t_far, ws.weights.data());
    thread_local std::vector<double> edges;
    edges.resize(nc + 1);
    for (int i = 0; i < nc; ++i) edges[i] = ray.t_near + i * delta;
    edges[nc] = ray.t_far;
    importance_sample(nc, edges.data(), ws.weights.data(), nf, rng, ws.t.data() + nc);
    for (int i = nc; i < n; ++i) eval(i);
  }

  ws.order.resize(n);
  std::iota(ws.order.begin(), ws.order.end(), 0);
  std::stable_sort(ws.order.begin(), ws.order.end(),
                   [&](int a, int b) { return ws.t[a] < ws.t[b]; });
  ws.sorted_t.resize(n);
  ws.sorted_sigma.resize(n);
  ws.sorted_color.resize(n);
  for (int j = 0; j < n; ++j) {
    ws.sorted_t[j] = ws.t[ws.order[j]];
    ws.sorted_sigma[j] = ws.sigma[ws.order[j]];
    ws.sorted_color[j] = ws.color[ws.order[j]];
  }
  return composite_kernel(n, ws.sorted_t.data(), ws.sorted_color.data(), ws.sorted_sigma.data(),
                          ray.t_far);
}

void backprop_ray(const FieldEvaluator& field, RayWorkspace& ws, const Vec3& grad_rgb,
                  double grad_mask, double grad_inv_depth, const GradSink& sink) {
  if (!ws.record) throw StateError("backprop_ray needs a recorded forward pass");
  const int n = static_cast<int>(ws.sorted_t.size());
  ws.dsigma.assign(n, 0.0);
  ws.dcolor.assign(n, Vec3::Zero());
  composite_kernel_backward(n, ws.sorted_t.data(), ws.sorted_color.data(), ws.sorted_sigma.data(),
                            ws.t_far, grad_rgb, grad_mask, grad_inv_depth, ws.dsigma.data(),
                            ws.dcolor.data());
  for (int j = 0; j < n; ++j) {
    if (ws.dsigma[j] == 0.0 && ws.dcolor[j].isZero()) continue;
    field.backward(ws.tape, ws.order[j], ws.dcolor[j], ws.dsigma[j], sink);
  }
}

std::vector<RaySample> sample_along_ray(const Ray& ray, const FieldEvaluator& field,
                                        const SamplingConfig& sampling, StreamRng& rng) {
  RayWorkspace ws;
  trace_ray(field, ray, sampling, rng, ws, nullptr);
  std::vector<RaySample> out(ws.sorted_t.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j].t = ws.sorted_t[j];
    out[j].value.color = ws.sorted_color[j];
    out[j].value.density = ws.sorted_sigma[j];
  }
  return out;
}

RenderOutput RenderOutput::zeros(int width, int height) {
  RenderOutput o;
  o.width = width;
  o.height = height;
  const std::size_t px = static_cast<std::size_t>(width) * height;
  o.rgb.assign(3 * px, 0.0);
  o.mask.assign(px, 0.0);
  o.inv_depth.assign(px, 0.0);
  return o;
}

PreparedFrame::PreparedFrame(const Model& model, const ParamStore& params, const PoseConfig& pose,
                             const CanonicalPose& canon, double time) {
  const ModelConfig& cfg = model.config();
  ModelViews views = model.views(params);
  if (cfg.variant == Variant::DEnarf) {
    deformed_ = true;
    const int R = cfg.shape.resolution;
    deform_fwd_ = run_deform_generator(views.deform, time, pose);
    deformation_ = DeformationField::zeros(R);
    upsample_grid(cfg.deform.grid, R, deform_fwd_.grid, deformation_.data);
    warped_.assign(cfg.shape.feature_count(), 0.0);
    warp_features(R, views.triplane.features, deformation_.data, warped_);
    views.triplane.features = warped_;
  }
  field_ = std::make_unique<FieldEvaluator>(cfg, views, pose, canon);
}

RenderOutput render_image(const FieldEvaluator& field, const Camera& camera,
                          const RenderOptions& opts, RenderStats* stats) {
  camera.validate();
  const int W = camera.width, H = camera.height;
  RenderOutput out = RenderOutput::zeros(W, H);
  const int threads = opts.threads > 0 ? opts.threads : omp_get_max_threads();
  std::vector<RenderStats> per_thread(threads);
  const auto& boxes = field.world_boxes();

#pragma omp parallel num_threads(threads)
  {
    RayWorkspace ws;
    RenderStats& st = per_thread[omp_get_thread_num()];
#pragma omp for schedule(dynamic, 1)
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * W + x;
        ++st.rays;
        const Ray ray = pixel_ray(camera, x, y);
        if (opts.cull) {
          st.box_tests += boxes.size();
          if (!ray_hits_any(ray, boxes)) continue;
        }
        ++st.rays_traced;
        StreamRng rng(opts.seed, p);
        const CompositeResult r = trace_ray(field, ray, opts.sampling, rng, ws, &st);
        for (int c = 0; c < 3; ++c) out.rgb[3 * p + c] = r.rgb[c];
        out.mask[p] = r.mask;
        out.inv_depth[p] = r.inv_depth;
      }
    }
  }
  if (stats != nullptr)
    for (const auto& s : per_thread) stats->merge(s);
  return out;
}

RenderOutput render_image(const Model& model, const ParamStore& params, const PoseConfig& pose,
                          const CanonicalPose& canon, double time, const Camera& camera,
                          const RenderOptions& opts, RenderStats* stats) {
  const PreparedFrame frame(model, params, pose, canon, time);
  return render_image(frame.field(), camera, opts, stats);
}

std::vector<double> composite_background(const RenderOutput& fg, std::span<const double> bg_rgb) {
  const std::size_t px = static_cast<std::size_t>(fg.width) * fg.height;
  if (bg_rgb.size() != 3 * px || fg.rgb.size() != 3 * px || fg.mask.size() != px)
    throw ShapeError("background and foreground sizes differ");
  std::vector<double> out(3 * px);
  for (std::size_t p = 0; p < px; ++p)
    for (int c = 0; c < 3; ++c) out[3 * p + c] = fg.rgb[3 * p + c] + bg_rgb[3 * p + c] * (1.0 - fg.mask[p]);
  return out;
}

}  // namespace enarf
