#pragma once

#include <span>
#include <string>
#include <vector>

#include "enarf/common.hpp"

namespace enarf {

// 8-bit PNG, gray (1 channel) or RGB (3 channels, interleaved R, G, B per
// pixel, rows top to bottom). Values are clamped to [0, 1] and rounded.
void write_png(const std::string& path, const ImageView& image);

struct PngImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;  // in [0, 1]
  ImageView view() const { return {width, height, channels, data}; }
};
PngImage read_png(const std::string& path);

// Headerless little-endian float32 array, written in the given order.
void write_raw_f32(const std::string& path, std::span<const double> values);
std::vector<double> read_raw_f32(const std::string& path);

}  // namespace enarf
