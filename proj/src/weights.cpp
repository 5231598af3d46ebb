#include "ebda/binary_io.hpp"
#include "ebda/errors.hpp"
#include "ebda/mfrnet.hpp"

#include <algorithm>
#include <fstream>

namespace ebda {
namespace {

constexpr char kMagic[4] = {'M', 'F', 'M', 'R'};
constexpr std::uint32_t kVersion = 1;
// Upper bound on a single dimension; anything larger is a corrupt header.
constexpr std::uint32_t kMaxDim = 1u << 20;

}  // namespace

void save_weights(const std::filesystem::path& path, const Model& model) {
  model.check_integrity();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  BinaryWriter w(out);
  const NetworkConfig& c = model.config;
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  for (int v : {c.base_features, c.num_blocks, c.dense_layers, c.growth, c.input_frames,
                c.channels_per_frame, c.kernel_size}) {
    w.u32(static_cast<std::uint32_t>(v));
  }
  w.f32(c.leaky_slope);

  const auto specs = layer_specs(c);
  w.u32(static_cast<std::uint32_t>(specs.size()));
  for (const auto& spec : specs) {
    const WeightTensor& t = model.weights.at(spec.name);
    w.u16(static_cast<std::uint16_t>(spec.name.size()));
    w.bytes(spec.name.data(), spec.name.size());
    w.u8(static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) w.u32(d);
    for (Eigen::Index i = 0; i < t.values.size(); ++i) w.f32(t.values[i]);
  }
  if (!out) throw IoError("write failed on '" + path.string() + "'");
}

Model load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open weight file '" + path.string() + "'");
  BinaryReader r(in, path.string());

  char magic[4];
  r.bytes(magic, 4);
  if (!std::equal(magic, magic + 4, kMagic)) {
    throw FormatError("'" + path.string() + "' is not an MFMR weight file (bad magic)");
  }
  const auto version = r.u32();
  if (version != kVersion) {
    throw FormatError("'" + path.string() + "': unsupported MFMR version " + std::to_string(version));
  }

  Model model;
  NetworkConfig& c = model.config;
  for (int* field : {&c.base_features, &c.num_blocks, &c.dense_layers, &c.growth, &c.input_frames,
                     &c.channels_per_frame, &c.kernel_size}) {
    const auto v = r.u32();
    if (v > kMaxDim) throw FormatError("'" + path.string() + "': implausible config value");
    *field = static_cast<int>(v);
  }
  c.leaky_slope = r.f32();
  try {
    c.validate();
  } catch (const ParameterError& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }

  const auto layers = r.u32();
  for (std::uint32_t i = 0; i < layers; ++i) {
    const auto name_len = r.u16();
    std::string name(name_len, '\0');
    r.bytes(name.data(), name_len);
    WeightTensor t;
    const auto ndim = r.u8();
    std::size_t count = 1;
    for (std::uint8_t d = 0; d < ndim; ++d) {
      const auto dim = r.u32();
      if (dim > kMaxDim) throw FormatError("'" + path.string() + "': implausible dimension in " + name);
      t.dims.push_back(dim);
      count *= dim;
    }
    if (count > (std::size_t{1} << 30)) {
      throw FormatError("'" + path.string() + "': layer " + name + " is implausibly large");
    }
    t.values.resize(static_cast<Eigen::Index>(count));
    for (std::size_t k = 0; k < count; ++k) t.values[static_cast<Eigen::Index>(k)] = r.f32();
    if (!model.weights.emplace(name, std::move(t)).second) {
      throw FormatError("'" + path.string() + "': duplicate layer " + name);
    }
  }
  if (!r.at_end()) throw FormatError("'" + path.string() + "': trailing bytes after last layer");
  model.check_integrity();
  return model;
}

}  // namespace ebda
