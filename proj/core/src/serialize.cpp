#include "enarf/serialize.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace enarf {

using nlohmann::json;

namespace {

json mat_json(const Mat3& m) {
  json a = json::array();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a.push_back(m(i, j));
  return a;
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Mat3 mat_from(const json& j) {
  if (!j.is_array() || j.size() != 9) throw ValidationError("rotation must have 9 numbers");
  Mat3 m;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) m(i, k) = j.at(3 * i + k).get<double>();
  return m;
}

Vec3 vec_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ValidationError("vector must have 3 numbers");
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

json vecs_json(const std::vector<Vec3>& v) {
  json a = json::array();
  for (const auto& x : v) a.push_back(vec_json(x));
  return a;
}

std::vector<Vec3> vecs_from(const json& j) {
  std::vector<Vec3> out;
  for (const auto& x : j) out.push_back(vec_from(x));
  return out;
}

json transform_json(const RigidTransform& t) {
  return {{"rotation", mat_json(t.rotation)}, {"translation", vec_json(t.translation)}};
}

RigidTransform transform_from(const json& j) {
  RigidTransform t;
  t.rotation = mat_from(j.at("rotation"));
  t.translation = vec_from(j.at("translation"));
  t.validate();
  return t;
}

json pose_json(const PoseConfig& pose) {
  json parts = json::array();
  for (const auto& p : pose.parts) {
    json e = transform_json(p.transform);
    e["length"] = p.length;
    parts.push_back(e);
  }
  return {{"parts", parts}};
}

PoseConfig pose_from(const json& j) {
  PoseConfig pose;
  for (const auto& e : j.at("parts")) {
    PartPose p;
    p.length = e.at("length").get<double>();
    p.transform = transform_from(e);
    pose.parts.push_back(p);
  }
  pose.validate();
  return pose;
}

json skeleton_json(const Skeleton& s) {
  json j = {{"parent", s.parent}};
  if (!s.attach.empty()) j["attach"] = s.attach;
  return j;
}

Skeleton skeleton_from(const json& j) {
  Skeleton s;
  s.parent = j.at("parent").get<std::vector<int>>();
  if (j.contains("attach")) s.attach = j.at("attach").get<std::vector<double>>();
  s.validate();
  return s;
}

template <class F>
auto parse(std::string_view text, const char* what, F&& f) {
  try {
    return f(json::parse(text));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid ") + what + " document: " + e.what());
  }
}

}  // namespace

std::string pose_to_json(const PoseConfig& pose) { return pose_json(pose).dump(2); }

PoseConfig pose_from_json(std::string_view text) {
  return parse(text, "pose", [](const json& j) { return pose_from(j); });
}

std::string canonical_to_json(const CanonicalPose& canon) {
  json j = pose_json(canon.pose);
  j["centers"] = vecs_json(canon.centers);
  return j.dump(2);
}

CanonicalPose canonical_from_json(std::string_view text) {
  return parse(text, "canonical pose", [](const json& j) {
    CanonicalPose c;
    c.pose = pose_from(j);
    c.centers = j.contains("centers") ? vecs_from(j.at("centers"))
                                      : CanonicalPose::from_pose(c.pose).centers;
    c.validate();
    return c;
  });
}

std::string skeleton_to_json(const Skeleton& skeleton) { return skeleton_json(skeleton).dump(2); }

Skeleton skeleton_from_json(std::string_view text) {
  return parse(text, "skeleton", [](const json& j) { return skeleton_from(j); });
}

std::string camera_to_json(const Camera& c) {
  json j = transform_json(c.extrinsic);
  j["focal"] = c.focal;
  j["cx"] = c.cx;
  j["cy"] = c.cy;
  j["width"] = c.width;
  j["height"] = c.height;
  j["near"] = c.near;
  j["far"] = c.far;
  return j.dump(2);
}

Camera camera_from_json(std::string_view text) {
  return parse(text, "camera", [](const json& j) {
    Camera c;
    c.extrinsic = transform_from(j);
    c.focal = j.at("focal").get<double>();
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    c.cx = j.value("cx", 0.5 * c.width);
    c.cy = j.value("cy", 0.5 * c.height);
    c.near = j.at("near").get<double>();
    c.far = j.at("far").get<double>();
    c.validate();
    return c;
  });
}

std::string scene_to_json(const SyntheticScene& s) {
  json j;
  j["name"] = s.name;
  j["skeleton"] = skeleton_json(s.skeleton);
  j["lengths"] = s.lengths;
  j["radii"] = s.radii;
  j["albedo"] = vecs_json(s.albedo);
  j["canonical_angles"] = vecs_json(s.canonical_angles);
  j["canonical_root"] = transform_json(s.canonical_root);
  j["root"] = transform_json(s.root);
  j["animation"] = {{"base", vecs_json(s.animation.base)},
                    {"amplitude", vecs_json(s.animation.amplitude)},
                    {"phase", vecs_json(s.animation.phase)},
                    {"frequency", s.animation.frequency}};
  j["density"] = s.density;
  j["wobble_amplitude"] = s.wobble_amplitude;
  j["wobble_frequency"] = s.wobble_frequency;
  j["triplane_extent"] = s.triplane_extent;
  return j.dump(2);
}

SyntheticScene scene_from_json(std::string_view text) {
  return parse(text, "scene", [](const json& j) {
    SyntheticScene s;
    s.name = j.value("name", std::string("custom"));
    s.skeleton = skeleton_from(j.at("skeleton"));
    s.lengths = j.at("lengths").get<std::vector<double>>();
    s.radii = j.at("radii").get<std::vector<double>>();
    s.albedo = vecs_from(j.at("albedo"));
    s.canonical_angles = vecs_from(j.at("canonical_angles"));
    s.canonical_root = transform_from(j.at("canonical_root"));
    s.root = transform_from(j.at("root"));
    const json& a = j.at("animation");
    s.animation.base = vecs_from(a.at("base"));
    s.animation.amplitude = vecs_from(a.at("amplitude"));
    s.animation.phase = vecs_from(a.at("phase"));
    s.animation.frequency = a.value("frequency", 1.0);
    s.density = j.value("density", 40.0);
    s.wobble_amplitude = j.value("wobble_amplitude", 0.0);
    s.wobble_frequency = j.value("wobble_frequency", 1.0);
    s.triplane_extent = j.value("triplane_extent", 1.0);
    s.validate();
    return s;
  });
}

std::string model_config_to_json(const ModelConfig& c) {
  json j;
  j["variant"] = to_string(c.variant);
  j["resolution"] = c.shape.resolution;
  j["extent"] = c.shape.extent;
  j["parts"] = c.shape.parts;
  j["frequencies"] = c.encoding.frequencies;
  j["include_input"] = c.encoding.include_input;
  j["view_direction"] = c.view_direction;
  j["normalize_length"] = c.normalize_length;
  j["cube_half_width"] = c.cube_half_width;
  j["deform"] = {{"grid", c.deform.grid},
                 {"hidden", c.deform.hidden},
                 {"time_frequencies", c.deform.time_frequencies}};
  j["feature_init"] = c.feature_init;
  j["seed"] = c.seed;
  return j.dump();
}

ModelConfig model_config_from_json(std::string_view text) {
  return parse(text, "model config", [](const json& j) {
    ModelConfig c;
    c.variant = parse_variant(j.at("variant").get<std::string>());
    c.shape.resolution = j.at("resolution").get<int>();
    c.shape.extent = j.at("extent").get<double>();
    c.shape.parts = j.at("parts").get<int>();
    c.encoding.frequencies = j.value("frequencies", 10);
    c.encoding.include_input = j.value("include_input", true);
    c.view_direction = j.value("view_direction", false);
    c.normalize_length = j.value("normalize_length", false);
    c.cube_half_width = j.value("cube_half_width", 1.0 / 3.0);
    if (j.contains("deform")) {
      const json& d = j.at("deform");
      c.deform.grid = d.value("grid", 8);
      c.deform.hidden = d.value("hidden", 32);
      c.deform.time_frequencies = d.value("time_frequencies", 4);
    }
    c.feature_init = j.value("feature_init", 0.1);
    c.seed = j.value("seed", std::uint64_t{0});
    c.validate();
    return c;
  });
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace enarf
