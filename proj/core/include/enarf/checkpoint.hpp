#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "enarf/model.hpp"
#include "enarf/optim.hpp"
#include "enarf/params.hpp"

namespace enarf {

// Binary container, all integers and floats little-endian.
//
//   offset  type        field
//   0       char[8]     magic "ENARFCKP"
//   8       u32         version (1)
//   12      u32         tri-plane resolution R (0 for the dense baseline)
//   16      f32         tri-plane extent
//   20      u32         part count K
//   24      u32         feature channels (32)
//   28      u32         probability channels (K, or 0 without a tri-plane selector)
//   32      u32         n = byte length of the model config JSON
//   36      char[n]     model config JSON (utf-8)
//   ..      u32         tensor count
//   then per tensor:
//           u32 name length, char[] name, u8 dtype (0 = f32, 1 = f64, 2 = u64),
//           u32 rank, u64[rank] dims, raw data in row-major order
//
// Model tensors are stored as f32 under their slice names, with
// triplane.features shaped [3][R][R][32] and triplane.logits [3][R][R][K]
// (plane order xy, xz, yz). Weight matrices are [out][in].
// A resumable checkpoint adds "resume.params", "adam.m", "adam.v" (f64) and
// "adam.step" (u64), so training restarts bit-exactly.
inline constexpr char kCheckpointMagic[8] = {'E', 'N', 'A', 'R', 'F', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  ParamStore params;
  std::optional<AdamState> adam;
};

void save_checkpoint(const std::string& path, const ModelConfig& config, const ParamStore& params,
                     const AdamState* adam = nullptr);

// Throws IoError on unreadable or truncated files, ValidationError on a bad
// magic, version or layout mismatch. Without a resume section the parameters
// are the f32 tensors widened to double.
Checkpoint load_checkpoint(const std::string& path);

// Raw byte image of a checkpoint, for comparing runs.
std::vector<std::uint8_t> checkpoint_bytes(const ModelConfig& config, const ParamStore& params,
                                           const AdamState* adam = nullptr);

}  // namespace enarf
