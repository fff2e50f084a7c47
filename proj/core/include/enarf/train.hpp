#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "enarf/model.hpp"
#include "enarf/optim.hpp"
#include "enarf/params.hpp"
#include "enarf/renderer.hpp"
#include "enarf/scene.hpp"

namespace enarf {

struct LossWeights {
  double l2 = 1e-4;
  double bone = 1.0;
  double r1 = 10.0;  // applied as r1 / 2
};

struct TrainConfig {
  ModelConfig model;
  int batch = 4096;
  int iterations = 5000;
  LossWeights weights;
  AdamConfig adam;
  SamplingConfig sampling;
  std::uint64_t seed = 0;
  // Held-out evaluation every `eval_every` iterations (and after the last).
  int eval_every = 1000;
  // Evaluate at most this many images per held-out set (0 = all).
  int eval_images = 0;
  int threads = 0;
  // Ray batches are split into this many gradient chunks, reduced in order;
  // independent of the thread count.
  int chunks = 8;

  void validate() const;
};

// One supervised image: camera, pose, time and target colors / mask.
struct Frame {
  Camera camera;
  PoseConfig pose;
  double time = 0.0;
  std::vector<double> rgb;   // H x W x 3
  std::vector<double> mask;  // H x W

  ImageView rgb_view() const { return {camera.width, camera.height, 3, rgb}; }
  void validate() const;
};

struct RigConfig {
  int views = 4;
  int resolution = 64;
  double distance = 2.6;
  double elevation = 0.35;  // radians above the horizontal
  double focal_scale = 1.5;   // focal length in units of image width
  double depth_range = 1.0;   // near/far = distance -/+ depth_range
  Vec3 target = Vec3::Zero();
  // Azimuth of the held-out view between the first two training views.
  double heldout_fraction = 0.5;
};

// Cameras on a circle around the target, looking at it with +z up.
std::vector<Camera> camera_ring(const RigConfig& rig, int count, double azimuth_offset);

struct DsoDataset {
  CanonicalPose canon;
  std::vector<Frame> train;          // training views x training frames
  std::vector<Frame> heldout_view;   // held-out view x training frames
  std::vector<Frame> heldout_pose;   // training views x held-out frames
};

// `frames` times j / frames in [0, 1); the first `train_fraction` of them
// are used for training. Targets come from the analytic oracle.
DsoDataset make_dso_dataset(const SyntheticScene& scene, const RigConfig& rig, int frames,
                            double train_fraction, int oracle_samples);

struct EvalResult {
  double psnr = 0.0;
  double ssim = 0.0;
  int images = 0;
};

EvalResult evaluate(const Model& model, const ParamStore& params, const CanonicalPose& canon,
                    std::span<const Frame> frames, const RenderOptions& opts, int max_images = 0);

struct MetricRow {
  int iteration = 0;
  double loss = 0.0;
  double dso = 0.0;
  double l2 = 0.0;
  double psnr_view = 0.0;
  double ssim_view = 0.0;
  double psnr_pose = 0.0;
  double ssim_pose = 0.0;
};

struct TrainResult {
  ParamStore params;
  AdamState adam;
  std::vector<MetricRow> log;
  std::vector<double> losses;   // total loss per iteration
  std::vector<double> seconds;  // wall-clock per logged row
};

// Loss (mean DSO over the given pixels of one frame + weighted tri-plane L2)
// and, when grad is non-null, its gradient. Ray samples come from the stream
// (ray_seed, ray index). With `frozen_t` the per-ray sample depths are read
// from it when filled and stored into it otherwise, which pins the fine
// sample positions for finite-difference checks.
double dso_batch_loss(const Model& model, const ParamStore& params, const CanonicalPose& canon,
                      const Frame& frame, std::span<const int> pixels, const TrainConfig& cfg,
                      std::uint64_t ray_seed, GradStore* grad,
                      std::vector<std::vector<double>>* frozen_t = nullptr);

using ProgressFn = std::function<void(const MetricRow&)>;

// Dynamic scene overfitting. Throws NumericalError on a non-finite loss or
// gradient.
TrainResult train_dso(const DsoDataset& data, const TrainConfig& cfg,
                      const ParamStore* init = nullptr, const AdamState* resume = nullptr,
                      const ProgressFn& progress = {});

// Pixels whose rays reach at least one part box for this frame's pose.
std::vector<int> candidate_pixels(const Frame& frame, const CanonicalPose& canon,
                                  const ModelConfig& model);

// Backward through a prepared frame: moves feature gradients accumulated at
// the warped copy (offset params.size()) back to canonical features and the
// deformation generator. `buffer` has size params + features for D-ENARF.
void finish_frame_backward(const Model& model, const ParamStore& params, const PreparedFrame& frame,
                           std::span<double> buffer, GradStore& grad);

// Accumulation plumbing shared by training and the GAN smoke test.
class BatchGradient {
 public:
  BatchGradient(const Model& model, std::size_t param_count, int chunks);

  std::size_t buffer_size() const { return size_; }
  // Runs per_ray(ray, workspace, sink) for rays [0, n) split into fixed
  // chunks; returns the sum of per-ray losses in chunk order and the reduced
  // gradient in `out` (size buffer_size()).
  double run(int n, int threads, const FieldEvaluator& field,
             const std::function<double(int, RayWorkspace&, const GradSink&)>& per_ray,
             std::span<double> out);

 private:
  std::size_t size_;
  SliceOffsets offsets_;
  std::vector<GradAccumulator> acc_;
};

}  // namespace enarf
