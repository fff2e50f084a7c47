#pragma once

#include <atomic>
#include <cstddef>
#include <memory>
#include <vector>

namespace enarf {

// Process-wide accounting of bytes held by tracked buffers (parameters,
// gradients, optimizer moments, render workspaces and outputs).
class MemoryMeter {
 public:
  static MemoryMeter& instance();

  void allocate(std::size_t bytes);
  void release(std::size_t bytes);

  std::size_t current() const { return current_.load(std::memory_order_relaxed); }
  std::size_t peak() const { return peak_.load(std::memory_order_relaxed); }
  // Restart peak tracking from the current level.
  void reset_peak();

 private:
  std::atomic<std::size_t> current_{0};
  std::atomic<std::size_t> peak_{0};
};

template <class T>
struct TrackedAllocator {
  using value_type = T;

  TrackedAllocator() noexcept = default;
  template <class U>
  TrackedAllocator(const TrackedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    T* p = std::allocator<T>{}.allocate(n);
    MemoryMeter::instance().allocate(n * sizeof(T));
    return p;
  }
  void deallocate(T* p, std::size_t n) noexcept {
    MemoryMeter::instance().release(n * sizeof(T));
    std::allocator<T>{}.deallocate(p, n);
  }

  template <class U>
  bool operator==(const TrackedAllocator<U>&) const noexcept { return true; }
};

template <class T>
using tracked_vector = std::vector<T, TrackedAllocator<T>>;

}  // namespace enarf
