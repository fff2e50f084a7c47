#include "enarf/params.hpp"

#include <algorithm>

#include "enarf/common.hpp"

namespace enarf {

std::size_t ParamLayout::add(std::string name, std::size_t size, double lr_scale) {
  if (find(name) != nullptr) throw ValidationError("duplicate parameter slice '" + name + "'");
  slices_.push_back({std::move(name), total_, size, lr_scale});
  total_ += size;
  return slices_.back().offset;
}

const ParamSlice* ParamLayout::find(std::string_view name) const {
  for (const auto& s : slices_) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

const ParamSlice& ParamLayout::at(std::string_view name) const {
  const ParamSlice* s = find(name);
  if (s == nullptr) throw ValidationError("unknown parameter slice '" + std::string(name) + "'");
  return *s;
}

const ParamSlice& ParamLayout::owner(std::size_t index) const {
  auto it = std::upper_bound(slices_.begin(), slices_.end(), index,
                             [](std::size_t i, const ParamSlice& s) { return i < s.offset; });
  if (it == slices_.begin() || index >= total_) throw IndexError("parameter index out of range");
  return *std::prev(it);
}

bool ParamLayout::operator==(const ParamLayout& other) const {
  if (total_ != other.total_ || slices_.size() != other.slices_.size()) return false;
  for (std::size_t i = 0; i < slices_.size(); ++i) {
    const auto& a = slices_[i];
    const auto& b = other.slices_[i];
    if (a.name != b.name || a.offset != b.offset || a.size != b.size || a.lr_scale != b.lr_scale)
      return false;
  }
  return true;
}

ParamStore::ParamStore(ParamLayout layout)
    : layout_(std::move(layout)), values_(layout_.total(), 0.0) {}

GradStore::GradStore(const ParamLayout& layout) : layout_(layout), values_(layout.total(), 0.0) {}

void GradStore::zero() { std::fill(values_.begin(), values_.end(), 0.0); }

GradAccumulator::GradAccumulator(std::size_t size)
    : values_(size, 0.0), touched_((size + kBlock - 1) / kBlock, 0) {}

void GradAccumulator::clear() {
  for (std::uint32_t b : list_) {
    const std::size_t lo = b * kBlock;
    const std::size_t hi = std::min(values_.size(), lo + kBlock);
    std::fill(values_.begin() + lo, values_.begin() + hi, 0.0);
    touched_[b] = 0;
  }
  list_.clear();
}

void GradAccumulator::add_to(std::span<double> dst) const {
  for (std::uint32_t b : list_) {
    const std::size_t lo = b * kBlock;
    const std::size_t hi = std::min(values_.size(), lo + kBlock);
    for (std::size_t i = lo; i < hi; ++i) dst[i] += values_[i];
  }
}

GradStore LossNode::backward() {
  if (!has_forward_) throw StateError("backward called before forward");
  GradStore grad(layout_);
  backward_impl(grad);
  return grad;
}

}  // namespace enarf
