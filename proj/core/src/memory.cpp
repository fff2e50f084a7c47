#include "enarf/memory.hpp"

namespace enarf {

MemoryMeter& MemoryMeter::instance() {
  static MemoryMeter meter;
  return meter;
}

void MemoryMeter::allocate(std::size_t bytes) {
  const std::size_t now = current_.fetch_add(bytes, std::memory_order_relaxed) + bytes;
  std::size_t prev = peak_.load(std::memory_order_relaxed);
  while (now > prev && !peak_.compare_exchange_weak(prev, now, std::memory_order_relaxed)) {
  }
}

void MemoryMeter::release(std::size_t bytes) {
  current_.fetch_sub(bytes, std::memory_order_relaxed);
}

void MemoryMeter::reset_peak() {
  peak_.store(current_.load(std::memory_order_relaxed), std::memory_order_relaxed);
}

}  // namespace enarf
