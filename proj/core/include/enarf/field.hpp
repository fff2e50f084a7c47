#pragma once

#include <cstdint>
#include <vector>

#include "enarf/decoder.hpp"
#include "enarf/kinematics.hpp"
#include "enarf/model.hpp"
#include "enarf/params.hpp"
#include "enarf/triplane.hpp"

namespace enarf {

// Work counters gathered while rendering; the FLOP model is driven by these.
struct RenderStats {
  std::uint64_t rays = 0;
  std::uint64_t rays_traced = 0;       // rays that survived the cube cull
  std::uint64_t box_tests = 0;         // ray / part-box intersection tests
  std::uint64_t samples = 0;           // points evaluated along traced rays
  std::uint64_t active_samples = 0;    // points that reached the decoder
  std::uint64_t part_lookups = 0;      // per-part tri-plane feature lookups
  std::uint64_t selector_lookups = 0;  // per-part tri-plane probability lookups
  std::uint64_t selector_mlp_evals = 0;
  std::uint64_t dense_part_evals = 0;  // per-part encodings through the linear map

  void merge(const RenderStats& other);
};

struct Aabb {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();
};

// Everything the backward pass needs about one evaluated point.
struct PartRecord {
  int part = 0;
  std::array<BilinearTap, 3> taps;
  double prob = 0.0;
  std::array<double, 3> plane_prob{};
  Feature fk{};
  std::size_t gamma_at = 0;
  SelectorTrace sel;
};

struct SampleRecord {
  bool empty = true;
  int part_begin = 0;
  int part_count = 0;
  std::size_t input_at = 0;  // decoder input
  std::size_t dense_at = 0;  // baseline: encodings [K][e], then probabilities [K], masks [K]
  int sel_begin = 0;         // baseline: K selector traces
  DecoderTrace dec;
};

struct FieldTape {
  std::vector<SampleRecord> samples;
  std::vector<PartRecord> parts;
  std::vector<SelectorTrace> selector;
  std::vector<double> arena;

  void clear();
};

// Gradient destination: one accumulator addressed through slice offsets. The
// feature offset may point past the parameters (e.g. at a warped copy).
struct GradSink {
  GradAccumulator* acc = nullptr;
  SliceOffsets offsets;
};

class FieldEvaluator {
 public:
  FieldEvaluator(const ModelConfig& config, const ModelViews& views, const PoseConfig& pose,
                 const CanonicalPose& canon);

  const ModelConfig& config() const { return config_; }
  const ModelViews& views() const { return views_; }
  const std::vector<PartFrame>& frames() const { return frames_; }
  // Conservative world-space boxes around each part's prior cube.
  const std::vector<Aabb>& world_boxes() const { return boxes_; }

  // Radiance at world point x seen along direction dir. Points outside every
  // part's cube are empty (zero color and density). With a tape the
  // intermediate values are appended as a new sample record.
  RadianceSample eval(const Vec3& x, const Vec3& dir, FieldTape* tape, RenderStats* stats) const;

  void backward(const FieldTape& tape, int sample, const Vec3& grad_color, double grad_density,
                const GradSink& sink) const;

  // Marks the dense (non tri-plane) slices as touched in the accumulator.
  void touch_dense(GradAccumulator& acc, const SliceOffsets& offsets) const;

 private:
  void eval_triplane(const Vec3& x, double* input, FieldTape* tape, SampleRecord* rec,
                     RenderStats* stats) const;
  void eval_baseline(const Vec3& x, double* input, FieldTape* tape, SampleRecord* rec,
                     RenderStats* stats) const;

  ModelConfig config_;
  ModelViews views_;
  std::vector<PartFrame> frames_;
  std::vector<Aabb> boxes_;
};

}  // namespace enarf
