#include "ebda/mfrnet.hpp"

#include "ebda/errors.hpp"

#include <cmath>
#include <random>
#include <set>
#include <sstream>

namespace ebda {
namespace {

std::string block_layer(int block, const std::string& suffix) {
  return "block" + std::to_string(block) + "." + suffix;
}

void add_conv(std::vector<LayerSpec>& specs, const std::string& name, int out, int in, int k) {
  const auto u = [](int v) { return static_cast<std::uint32_t>(v); };
  specs.push_back({name + ".weight", {u(out), u(in), u(k), u(k)}});
  specs.push_back({name + ".bias", {u(out)}});
}

std::string dims_string(const std::vector<std::uint32_t>& dims) {
  std::ostringstream s;
  s << "(";
  for (std::size_t i = 0; i < dims.size(); ++i) s << (i ? "," : "") << dims[i];
  s << ")";
  return s.str();
}

MfrbOutput run_mfrb(const Tensor& x, const Tensor* review_in, const Model& model, int block) {
  const NetworkConfig& cfg = model.config;
  const int f = cfg.base_features;
  const int g = cfg.growth;
  const int h = x.height();
  const int w = x.width();
  if (x.channels() != f) {
    throw ShapeError("block " + std::to_string(block) + ": expects " + std::to_string(f) +
                     " input channels, got " + std::to_string(x.channels()));
  }

  Tensor::Matrix features(f + cfg.review_channels(), Eigen::Index{h} * w);
  if (review_in) {
    const Tensor merged = concat_channels<float>({&x, review_in});
    features.topRows(f) = conv2d(merged, model.conv(block_layer(block, "review"))).matrix();
  } else {
    features.topRows(f) = x.matrix();
  }

  for (int k = 0; k < cfg.dense_layers; ++k) {
    const Tensor dense = leaky_relu(
        conv2d_rows(features.topRows(f + k * g), h, w,
                    model.conv(block_layer(block, "dense" + std::to_string(k)))),
        cfg.leaky_slope);
    features.middleRows(f + k * g, g) = dense.matrix();
  }

  Tensor fused = conv2d_rows(features, h, w, model.conv(block_layer(block, "fusion")));
  fused.matrix() += x.matrix();
  return MfrbOutput{std::move(fused),
                    Tensor(features.bottomRows(cfg.review_channels()), h, w)};
}

}  // namespace

void NetworkConfig::validate() const {
  if (base_features < 1 || num_blocks < 1 || dense_layers < 1 || growth < 1 ||
      input_frames < 1 || channels_per_frame < 1 || kernel_size < 1) {
    throw ParameterError("network config: all sizes must be positive");
  }
  if (input_frames % 2 == 0) throw ParameterError("network config: input_frames must be odd");
  if (kernel_size % 2 == 0) throw ParameterError("network config: kernel_size must be odd");
  if (!std::isfinite(leaky_slope)) throw ParameterError("network config: leaky_slope must be finite");
}

std::size_t WeightTensor::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::vector<LayerSpec> layer_specs(const NetworkConfig& cfg) {
  cfg.validate();
  const int f = cfg.base_features;
  const int g = cfg.growth;
  const int k = cfg.kernel_size;
  std::vector<LayerSpec> specs;
  add_conv(specs, "shallow", f, cfg.input_channels(), k);
  for (int b = 0; b < cfg.num_blocks; ++b) {
    if (b > 0) add_conv(specs, block_layer(b, "review"), f, f + cfg.review_channels(), 1);
    for (int d = 0; d < cfg.dense_layers; ++d) {
      add_conv(specs, block_layer(b, "dense" + std::to_string(d)), g, f + d * g, k);
    }
    add_conv(specs, block_layer(b, "fusion"), f, f + cfg.review_channels(), 1);
  }
  add_conv(specs, "gff.fuse", f, cfg.num_blocks * f, 1);
  add_conv(specs, "gff.conv", f, f, k);
  add_conv(specs, "recon", cfg.channels_per_frame, f, k);
  return specs;
}

std::size_t parameter_count(const NetworkConfig& config) {
  std::size_t n = 0;
  for (const auto& spec : layer_specs(config)) {
    std::size_t e = 1;
    for (auto d : spec.dims) e *= d;
    n += e;
  }
  return n;
}

ConvWeightsOf<float> Model::conv(const std::string& layer) const {
  const auto wit = weights.find(layer + ".weight");
  const auto bit = weights.find(layer + ".bias");
  if (wit == weights.end() || bit == weights.end()) {
    throw ModelIntegrityError("model is missing weights for layer '" + layer + "'");
  }
  const auto& kdims = wit->second.dims;
  const auto& bdims = bit->second.dims;
  if (kdims.size() != 4 || bdims.size() != 1 || bdims[0] != kdims[0] ||
      static_cast<std::size_t>(wit->second.values.size()) != wit->second.element_count() ||
      static_cast<std::size_t>(bit->second.values.size()) != bit->second.element_count()) {
    throw ModelIntegrityError("layer '" + layer + "' has inconsistent shapes " +
                              dims_string(kdims) + " / " + dims_string(bdims));
  }
  ConvWeightsOf<float> w;
  w.kernel = wit->second.values.data();
  w.bias = bit->second.values.data();
  w.out_channels = static_cast<int>(kdims[0]);
  w.in_channels = static_cast<int>(kdims[1]);
  w.kernel_h = static_cast<int>(kdims[2]);
  w.kernel_w = static_cast<int>(kdims[3]);
  w.name = layer;
  return w;
}

void Model::check_integrity() const {
  std::vector<std::string> problems;
  std::set<std::string> expected;
  for (const auto& spec : layer_specs(config)) {
    expected.insert(spec.name);
    const auto it = weights.find(spec.name);
    if (it == weights.end()) {
      problems.push_back("missing " + spec.name);
    } else if (it->second.dims != spec.dims) {
      problems.push_back(spec.name + " has shape " + dims_string(it->second.dims) + ", expected " +
                         dims_string(spec.dims));
    } else if (static_cast<std::size_t>(it->second.values.size()) != it->second.element_count()) {
      problems.push_back(spec.name + " has " + std::to_string(it->second.values.size()) +
                         " values for shape " + dims_string(spec.dims));
    }
  }
  for (const auto& [name, tensor] : weights) {
    if (!expected.contains(name)) problems.push_back("unexpected layer " + name);
  }
  if (!problems.empty()) {
    std::string msg = "model integrity check failed:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ModelIntegrityError(msg);
  }
}

Model make_zero_model(const NetworkConfig& config) {
  Model model{config, {}};
  for (auto& spec : layer_specs(config)) {
    WeightTensor t{spec.dims, {}};
    t.values = Eigen::VectorXf::Zero(static_cast<Eigen::Index>(t.element_count()));
    model.weights.emplace(spec.name, std::move(t));
  }
  return model;
}

Model make_random_model(const NetworkConfig& config, std::uint64_t seed, float scale) {
  Model model{config, {}};
  std::mt19937_64 rng(seed);
  for (auto& spec : layer_specs(config)) {
    WeightTensor t{spec.dims, {}};
    t.values.resize(static_cast<Eigen::Index>(t.element_count()));
    // Fan-in of the layer this parameter belongs to; biases share their kernel's.
    const auto& kdims =
        spec.dims.size() == 4
            ? spec.dims
            : model.weights.at(spec.name.substr(0, spec.name.rfind('.')) + ".weight").dims;
    const std::size_t fan_in = std::size_t{kdims[1]} * kdims[2] * kdims[3];
    const double bound = scale / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index i = 0; i < t.values.size(); ++i) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      t.values[i] = static_cast<float>((2.0 * u - 1.0) * bound);
    }
    model.weights.emplace(spec.name, std::move(t));
  }
  return model;
}

MfrbOutput mfrb_forward(const Tensor& block_input, const Model& model, int block) {
  return run_mfrb(block_input, nullptr, model, block);
}

MfrbOutput mfrb_forward(const Tensor& block_input, const Tensor& review_in, const Model& model,
                        int block) {
  if (review_in.height() != block_input.height() || review_in.width() != block_input.width()) {
    throw ShapeError("block " + std::to_string(block) + ": review input has different spatial size");
  }
  return run_mfrb(block_input, &review_in, model, block);
}

Tensor forward(const Model& model, const Tensor& aligned_input, const Tensor& center_baseline) {
  const NetworkConfig& cfg = model.config;
  const int h = aligned_input.height();
  const int w = aligned_input.width();
  if (h < 16 || w < 16) {
    throw ShapeError("forward: input " + std::to_string(w) + "x" + std::to_string(h) +
                     " is too small (minimum 16x16)");
  }
  if (aligned_input.channels() != cfg.input_channels()) {
    throw ShapeError("forward: expected " + std::to_string(cfg.input_channels()) +
                     " input channels, got " + std::to_string(aligned_input.channels()));
  }
  if (center_baseline.channels() != cfg.channels_per_frame || center_baseline.height() != h ||
      center_baseline.width() != w) {
    throw ShapeError("forward: centre baseline shape does not match input");
  }

  Tensor x = leaky_relu(conv2d(aligned_input, model.conv("shallow")), cfg.leaky_slope);
  std::vector<Tensor> block_outputs;
  block_outputs.reserve(cfg.num_blocks);
  Tensor review;
  for (int b = 0; b < cfg.num_blocks; ++b) {
    MfrbOutput out = b == 0 ? mfrb_forward(x, model, b) : mfrb_forward(x, review, model, b);
    x = out.block_output;
    review = std::move(out.review_out);
    block_outputs.push_back(std::move(out.block_output));
  }
  const Tensor fused = conv2d(concat_channels(block_outputs), model.conv("gff.fuse"));
  const Tensor global = conv2d(fused, model.conv("gff.conv"));
  Tensor out = conv2d(global, model.conv("recon"));
  out.matrix() += center_baseline.matrix();
  return out;
}

}  // namespace ebda
