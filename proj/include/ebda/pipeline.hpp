#pragma once

#include "ebda/codec.hpp"
#include "ebda/dataset.hpp"
#include "ebda/metrics.hpp"
#include "ebda/mfrnet.hpp"
#include "ebda/video.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ebda {

enum class ModelId { M1, M2, M3, M4 };

const char* to_string(ModelId id);
ModelId parse_model_id(const std::string& text);

// QP-banded model choice, evaluated on the base QP before the EBDA offset.
struct ModelSelector {
  std::array<double, 3> thresholds = {24.5, 29.5, 34.5};
  std::map<ModelId, std::filesystem::path> model_paths;

  ModelId select(double qp_base) const;
  void validate() const;
};

// Band assignment with the default thresholds.
ModelId select_model(double qp_base);

struct SequenceSource {
  std::string name;
  std::filesystem::path path;
};

struct DatasetOptions {
  int qp_group = 22;
  int samples_per_sequence = 50;
  bool rotate = true;  // emit all four rotations of every triplet
  int block_size = 96;
  std::filesystem::path output = "dataset.ebds";
};

struct PipelineConfig {
  VideoFormat format;
  int ebd_shift = 1;
  CodecConfig codec;
  EnhanceOptions enhance;
  std::optional<NetworkConfig> network;  // when set, loaded models must match
  ModelSelector selector;
  std::vector<int> qps = {22, 27, 32, 37};
  std::filesystem::path output_dir = "out";
  int workers = 1;
  std::uint64_t seed = 0;
  std::vector<SequenceSource> sequences;
  DatasetOptions dataset;

  // Checked before any subprocess starts.
  void validate() const;
};

PipelineConfig parse_pipeline_config(const std::string& json_text);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

struct SequenceInput {
  std::string name;
  std::vector<Frame> frames;
};

struct QpPointResult {
  int qp_base = 0;
  ModelId model = ModelId::M1;
  bool ok = false;
  std::string diagnostic;
  int anchor_qp = 0;
  RDPoint anchor;
  int ebda_qp = 0;
  RDPoint ebda;
  double naive_psnr = 0.0;  // naive up-shift of the same EBDA reconstruction
};

struct BdResult {
  double rate_percent = 0.0;
  double psnr_db = 0.0;
};

struct SequenceReport {
  std::string name;
  std::vector<QpPointResult> points;  // in config qp order
  std::optional<BdResult> ebda_bd;
  std::optional<BdResult> naive_bd;
  std::string bd_diagnostic;

  bool complete() const;
};

struct PipelineReport {
  std::string codec_name;
  std::vector<SequenceReport> sequences;

  bool all_ok() const;
};

// Anchor and EBDA runs for every (sequence, qp) pair, fanned out over
// config.workers threads. Writes the report files to config.output_dir
// unless it is empty.
PipelineReport run_pipeline(const PipelineConfig& config, std::span<const SequenceInput> sequences);
PipelineReport run_pipeline(const PipelineConfig& config, const std::filesystem::path& input);

// Builds one QP group's training set and writes it to config.dataset.output.
Dataset run_gen_dataset(const PipelineConfig& config, std::span<const SequenceInput> sequences,
                        int qp_group);

// Report files.
std::string rd_csv(const PipelineReport& report);
std::string bd_csv(const PipelineReport& report);
std::string summary_text(const PipelineReport& report);
std::string rd_svg(const SequenceReport& sequence);
void write_report(const PipelineReport& report, const std::filesystem::path& dir);

}  // namespace ebda
