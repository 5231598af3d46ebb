#pragma once

#include "ebda/optical_flow.hpp"
#include "ebda/tensor.hpp"
#include "ebda/video.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace ebda {

// Hyperparameters of the multi-frame network. All layer shapes follow from
// these values alone.
struct NetworkConfig {
  int base_features = 64;   // F
  int num_blocks = 4;       // B
  int dense_layers = 4;     // D, per block
  int growth = 32;          // G
  int input_frames = 3;
  int channels_per_frame = 3;
  int kernel_size = 3;
  float leaky_slope = 0.2f;

  int input_channels() const { return input_frames * channels_per_frame; }
  int review_channels() const { return dense_layers * growth; }

  void validate() const;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

// A named parameter array with its logical dimensions.
struct WeightTensor {
  std::vector<std::uint32_t> dims;
  Eigen::VectorXf values;

  std::size_t element_count() const;
};

struct LayerSpec {
  std::string name;
  std::vector<std::uint32_t> dims;
};

// Every parameter the network needs, in canonical (file) order.
std::vector<LayerSpec> layer_specs(const NetworkConfig& config);
std::size_t parameter_count(const NetworkConfig& config);

struct Model {
  NetworkConfig config;
  std::map<std::string, WeightTensor> weights;

  // Kernel and bias of convolution layer `layer` ("<layer>.weight",
  // "<layer>.bias"). Throws ModelIntegrityError when either is missing or
  // mis-shaped.
  ConvWeightsOf<float> conv(const std::string& layer) const;

  // Throws ModelIntegrityError listing every missing, extra, or mis-shaped layer.
  void check_integrity() const;
};

Model make_zero_model(const NetworkConfig& config);

// Fan-in scaled uniform initialisation, U(-a, a) with a = scale / sqrt(fan_in).
// Biases are drawn the same way. Deterministic for a given seed.
Model make_random_model(const NetworkConfig& config, std::uint64_t seed, float scale = 1.0f);

// MFMR weight file: magic "MFMR", u32 version = 1, config as seven u32
// (F, B, D, G, input_frames, channels_per_frame, kernel_size) and one f32
// (leaky_slope), u32 layer count, then per layer u16 name length, UTF-8
// name, u8 ndim, u32 dims, f32 data. Everything little-endian.
void save_weights(const std::filesystem::path& path, const Model& model);
Model load_weights(const std::filesystem::path& path);

struct MfrbOutput {
  Tensor block_output;  // F channels
  Tensor review_out;    // D * G channels: every dense-layer output
};

// One multi-level feature review residual dense block. The first block has
// no review input; later blocks fuse the previous block's dense outputs with
// their input through a 1x1 convolution before the dense layers.
MfrbOutput mfrb_forward(const Tensor& block_input, const Model& model, int block);
MfrbOutput mfrb_forward(const Tensor& block_input, const Tensor& review_in, const Model& model,
                        int block);

// Full network on normalised input: aligned_input holds the warped previous,
// centre and warped next frames (3 channels each); the output is the centre
// baseline plus the predicted residual.
Tensor forward(const Model& model, const Tensor& aligned_input, const Tensor& center_baseline);

struct TileOptions {
  int tile_size = 96;
  int overlap = 16;
  // Frames with at most this many luma samples run in one pass.
  long full_frame_max_pixels = 256L * 256L;
};

// Forward over overlapping tiles, linearly cross-faded in the overlaps.
Tensor forward_tiled(const Model& model, const Tensor& aligned_input,
                     const Tensor& center_baseline, const TileOptions& tiles);

struct EnhanceOptions {
  FlowParams flow;
  TileOptions tiles;
};

// Restores full effective bit depth of `cur` from three consecutive
// reduced-EBD reconstructed frames. Pass `cur` itself as `prev` or `next` at
// sequence boundaries; such neighbours get zero flow.
Frame enhance_frame(const Model& model, const Frame& prev, const Frame& cur, const Frame& next,
                    const EnhanceOptions& options = {});

// enhance_frame over a whole sequence with boundary replication.
std::vector<Frame> enhance_sequence(const Model& model, std::span<const Frame> frames,
                                    const EnhanceOptions& options = {});

}  // namespace ebda
