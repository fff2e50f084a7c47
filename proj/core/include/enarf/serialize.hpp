#pragma once

#include <string>
#include <string_view>

#include "enarf/kinematics.hpp"
#include "enarf/model.hpp"
#include "enarf/scene.hpp"

namespace enarf {

// JSON text formats. Rotations are 9 row-major numbers, translations 3.
//   pose:     {"parts": [{"length": l, "rotation": [...], "translation": [...]}, ...]}
//   skeleton: {"parent": [...], "attach": [...]}
//   camera:   {"rotation": [...], "translation": [...], "focal": f, "cx": .., "cy": ..,
//              "width": w, "height": h, "near": n, "far": f}   (world -> camera)
// Malformed documents raise ValidationError.
std::string pose_to_json(const PoseConfig& pose);
PoseConfig pose_from_json(std::string_view text);
std::string canonical_to_json(const CanonicalPose& canon);
CanonicalPose canonical_from_json(std::string_view text);
std::string skeleton_to_json(const Skeleton& skeleton);
Skeleton skeleton_from_json(std::string_view text);
std::string camera_to_json(const Camera& camera);
Camera camera_from_json(std::string_view text);
std::string scene_to_json(const SyntheticScene& scene);
SyntheticScene scene_from_json(std::string_view text);
std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(std::string_view text);

// Throw IoError on failure.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace enarf
