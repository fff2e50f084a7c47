#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "enarf/memory.hpp"

namespace enarf {

struct ParamSlice {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
  // Multiplier on the optimizer step for this slice (equalized learning rate).
  double lr_scale = 1.0;
};

// Named, contiguous, disjoint slices over one flat parameter vector.
class ParamLayout {
 public:
  // Appends a slice and returns its offset.
  std::size_t add(std::string name, std::size_t size, double lr_scale = 1.0);

  const std::vector<ParamSlice>& slices() const { return slices_; }
  const ParamSlice* find(std::string_view name) const;
  const ParamSlice& at(std::string_view name) const;
  std::size_t total() const { return total_; }
  // Slice containing a flat index.
  const ParamSlice& owner(std::size_t index) const;

  bool operator==(const ParamLayout& other) const;

 private:
  std::vector<ParamSlice> slices_;
  std::size_t total_ = 0;
};

class ParamStore {
 public:
  ParamStore() = default;
  explicit ParamStore(ParamLayout layout);

  const ParamLayout& layout() const { return layout_; }
  std::size_t size() const { return values_.size(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> slice(const ParamSlice& s) { return values().subspan(s.offset, s.size); }
  std::span<const double> slice(const ParamSlice& s) const {
    return values().subspan(s.offset, s.size);
  }
  std::span<double> slice(std::string_view name) { return slice(layout_.at(name)); }
  std::span<const double> slice(std::string_view name) const { return slice(layout_.at(name)); }

 private:
  ParamLayout layout_;
  tracked_vector<double> values_;
};

class GradStore {
 public:
  GradStore() = default;
  explicit GradStore(const ParamLayout& layout);

  const ParamLayout& layout() const { return layout_; }
  std::size_t size() const { return values_.size(); }
  void zero();

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> slice(std::string_view name) {
    const auto& s = layout_.at(name);
    return values().subspan(s.offset, s.size);
  }
  std::span<const double> slice(std::string_view name) const {
    const auto& s = layout_.at(name);
    return values().subspan(s.offset, s.size);
  }

 private:
  ParamLayout layout_;
  tracked_vector<double> values_;
};

// Dense gradient buffer that remembers which 32-wide blocks were written, so
// that clearing and reduction cost scales with the touched footprint. Adding
// several accumulators into one destination in a fixed order gives results
// that do not depend on which thread filled which accumulator.
class GradAccumulator {
 public:
  static constexpr std::size_t kBlock = 32;

  GradAccumulator() = default;
  explicit GradAccumulator(std::size_t size);

  std::size_t size() const { return values_.size(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  void touch(std::size_t offset, std::size_t count) {
    const std::size_t first = offset / kBlock;
    const std::size_t last = (offset + count + kBlock - 1) / kBlock;
    for (std::size_t b = first; b < last; ++b) {
      if (!touched_[b]) {
        touched_[b] = 1;
        list_.push_back(static_cast<std::uint32_t>(b));
      }
    }
  }

  void clear();
  void add_to(std::span<double> dst) const;

 private:
  tracked_vector<double> values_;
  std::vector<std::uint8_t> touched_;
  std::vector<std::uint32_t> list_;
};

// A scalar loss whose forward pass must run before gradients can be taken.
class LossNode {
 public:
  virtual ~LossNode() = default;
  virtual double forward(const ParamStore& params) = 0;
  // Gradient of the most recent forward value with respect to every
  // registered parameter; parameters off the active path get exactly zero.
  GradStore backward();

 protected:
  virtual void backward_impl(GradStore& grad) = 0;
  void mark_forward(const ParamLayout& layout) {
    layout_ = layout;
    has_forward_ = true;
  }

 private:
  ParamLayout layout_;
  bool has_forward_ = false;
};

}  // namespace enarf
