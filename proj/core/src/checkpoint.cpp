#include "enarf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "enarf/serialize.hpp"

namespace enarf {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

enum class DType : std::uint8_t { F32 = 0, F64 = 1, U64 = 2 };

std::size_t dtype_size(DType d) { return d == DType::F32 ? 4 : 8; }

class Writer {
 public:
  template <class T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes.insert(bytes.end(), p, p + n);
  }
  void put_string(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    put_bytes(s.data(), s.size());
  }
  void tensor_header(const std::string& name, DType dtype, const std::vector<std::uint64_t>& dims) {
    put_string(name);
    put(static_cast<std::uint8_t>(dtype));
    put(static_cast<std::uint32_t>(dims.size()));
    for (auto d : dims) put(d);
  }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& b, const std::string& path) : bytes_(b), path_(path) {}
  template <class T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  const std::uint8_t* take(std::size_t n) {
    if (n > bytes_.size() - pos_) throw IoError("checkpoint '" + path_ + "' is truncated");
    const auto* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    const auto* p = take(n);
    return {reinterpret_cast<const char*>(p), n};
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

// Row-major shape of a named slice; falls back to a flat vector.
std::vector<std::uint64_t> slice_dims(const ModelConfig& c, const ParamSlice& s) {
  namespace sn = slice_names;
  const std::uint64_t R = c.shape.resolution, K = c.shape.parts;
  std::vector<std::uint64_t> dims;
  if (s.name == sn::kFeatures) dims = {3, R, R, static_cast<std::uint64_t>(kFeatureChannels)};
  else if (s.name == sn::kLogits) dims = {3, R, R, K};
  else if (s.name == sn::kDecW1) dims = {static_cast<std::uint64_t>(kDecoderHidden), static_cast<std::uint64_t>(c.decoder_in_dim())};
  else if (s.name == sn::kDecW2) dims = {4, static_cast<std::uint64_t>(kDecoderHidden)};
  else if (s.name == sn::kSelW1) dims = {K, static_cast<std::uint64_t>(kSelectorHidden), s.size / (K * kSelectorHidden)};
  else if (s.name == sn::kSelB1 || s.name == sn::kSelW2) dims = {K, static_cast<std::uint64_t>(kSelectorHidden)};
  else if (s.name == sn::kLinearW) dims = {static_cast<std::uint64_t>(kFeatureChannels), s.size / kFeatureChannels};
  else if (s.name == sn::kDefW1) dims = {static_cast<std::uint64_t>(c.deform.hidden), s.size / c.deform.hidden};
  else if (s.name == sn::kDefW2) dims = {s.size / c.deform.hidden, static_cast<std::uint64_t>(c.deform.hidden)};
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  if (dims.empty() || n != s.size) dims = {s.size};
  return dims;
}

}  // namespace

std::vector<std::uint8_t> checkpoint_bytes(const ModelConfig& config, const ParamStore& params,
                                           const AdamState* adam) {
  config.validate();
  const Model model(config);
  if (!(model.layout() == params.layout()))
    throw StructuralError("parameter layout does not match the model config");
  Writer w;
  w.put_bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.put(kCheckpointVersion);
  const bool tri = uses_triplane(config.variant);
  w.put(static_cast<std::uint32_t>(tri ? config.shape.resolution : 0));
  w.put(static_cast<float>(config.shape.extent));
  w.put(static_cast<std::uint32_t>(config.shape.parts));
  w.put(static_cast<std::uint32_t>(kFeatureChannels));
  w.put(static_cast<std::uint32_t>(uses_triplane_selector(config.variant) ? config.shape.parts : 0));
  w.put_string(model_config_to_json(config));

  const auto& slices = params.layout().slices();
  const bool resume = adam != nullptr;
  w.put(static_cast<std::uint32_t>(slices.size() + (resume ? 4 : 0)));
  for (const auto& s : slices) {
    w.tensor_header(s.name, DType::F32, slice_dims(config, s));
    for (double v : params.slice(s)) w.put(static_cast<float>(v));
  }
  if (resume) {
    if (adam->m.size() != params.size() || adam->v.size() != params.size())
      throw ShapeError("optimizer state size does not match parameters");
    auto put_f64 = [&](const std::string& name, std::span<const double> v) {
      w.tensor_header(name, DType::F64, {v.size()});
      w.put_bytes(v.data(), v.size() * sizeof(double));
    };
    put_f64("resume.params", params.values());
    put_f64("adam.m", adam->m);
    put_f64("adam.v", adam->v);
    w.tensor_header("adam.step", DType::U64, {1});
    w.put(adam->step);
  }
  return std::move(w.bytes);
}

void save_checkpoint(const std::string& path, const ModelConfig& config, const ParamStore& params,
                     const AdamState* adam) {
  const auto bytes = checkpoint_bytes(config, params, adam);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  Reader r(bytes, path);
  if (std::memcmp(r.take(sizeof(kCheckpointMagic)), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
    throw ValidationError("'" + path + "' is not a checkpoint");
  if (const auto v = r.get<std::uint32_t>(); v != kCheckpointVersion)
    throw ValidationError("unsupported checkpoint version " + std::to_string(v));
  const auto res = r.get<std::uint32_t>();
  r.get<float>();
  const auto parts = r.get<std::uint32_t>();
  const auto channels = r.get<std::uint32_t>();
  r.get<std::uint32_t>();

  Checkpoint ck;
  ck.config = model_config_from_json(r.get_string());
  if (parts != static_cast<std::uint32_t>(ck.config.shape.parts) || channels != kFeatureChannels ||
      (uses_triplane(ck.config.variant) && res != static_cast<std::uint32_t>(ck.config.shape.resolution)))
    throw ValidationError("checkpoint header disagrees with its model config");

  const Model model(ck.config);
  ck.params = ParamStore(model.layout());

  struct Raw {
    DType dtype;
    std::uint64_t count;
    const std::uint8_t* data;
  };
  std::map<std::string, Raw> tensors;
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.get_string();
    const auto dt = r.get<std::uint8_t>();
    if (dt > 2) throw ValidationError("unknown dtype in tensor '" + name + "'");
    const auto rank = r.get<std::uint32_t>();
    std::uint64_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) n *= r.get<std::uint64_t>();
    const auto dtype = static_cast<DType>(dt);
    if (n > bytes.size()) throw IoError("checkpoint '" + path + "' is truncated");
    const auto* data = r.take(n * dtype_size(dtype));
    tensors[std::move(name)] = {dtype, n, data};
  }
  if (!r.done()) throw ValidationError("trailing bytes in checkpoint '" + path + "'");

  auto need = [&](const std::string& name, DType dtype, std::uint64_t n) -> const Raw& {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw StructuralError("checkpoint is missing tensor '" + name + "'");
    if (it->second.dtype != dtype || it->second.count != n)
      throw ShapeError("tensor '" + name + "' has the wrong type or size");
    return it->second;
  };

  if (tensors.count("resume.params")) {
    const auto& p = need("resume.params", DType::F64, ck.params.size());
    std::memcpy(ck.params.values().data(), p.data, ck.params.size() * sizeof(double));
    AdamState st(ck.params.size(), AdamConfig{});
    std::memcpy(st.m.data(), need("adam.m", DType::F64, st.m.size()).data, st.m.size() * sizeof(double));
    std::memcpy(st.v.data(), need("adam.v", DType::F64, st.v.size()).data, st.v.size() * sizeof(double));
    std::memcpy(&st.step, need("adam.step", DType::U64, 1).data, sizeof(std::uint64_t));
    ck.adam = std::move(st);
  } else {
    for (const auto& s : ck.params.layout().slices()) {
      const auto& t = need(s.name, DType::F32, s.size);
      auto dst = ck.params.slice(s);
      for (std::size_t i = 0; i < s.size; ++i) {
        float f;
        std::memcpy(&f, t.data + 4 * i, 4);
        dst[i] = f;
      }
    }
  }
  return ck;
}

}  // namespace enarf
