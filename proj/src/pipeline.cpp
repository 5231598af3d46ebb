#include "ebda/pipeline.hpp"

#include "ebda/ebd_adapt.hpp"
#include "ebda/errors.hpp"

#include <algorithm>
#include <atomic>
#include <memory>
#include <set>
#include <thread>

namespace ebda {
namespace {

using ModelCache = std::map<ModelId, std::shared_ptr<const Model>>;

ModelCache load_models(const PipelineConfig& config) {
  std::set<ModelId> needed;
  for (int qp : config.qps) needed.insert(config.selector.select(qp));
  for (ModelId id : needed) {
    if (!config.selector.model_paths.contains(id)) {
      throw ConfigError(std::string("no weight file configured for model ") + to_string(id));
    }
  }
  ModelCache models;
  for (ModelId id : needed) {
    auto model = std::make_shared<Model>(load_weights(config.selector.model_paths.at(id)));
    if (config.network && !(model->config == *config.network)) {
      throw ModelIntegrityError(std::string("weights for ") + to_string(id) +
                        " do not match the configured network");
    }
    models.emplace(id, std::move(model));
  }
  return models;
}

QpPointResult run_point(const PipelineConfig& config, const SequenceInput& seq, int qp_base,
                        const ModelCache& models) {
  QpPointResult r;
  r.qp_base = qp_base;
  r.model = config.selector.select(qp_base);
  try {
    const CodingResult anchor = encode_decode(config.codec, seq.frames, qp_base, false);
    r.anchor_qp = anchor.effective_qp;
    r.anchor = {anchor.bitrate_kbps, sequence_psnr_luma(seq.frames, anchor.reconstruction)};

    std::vector<Frame> reduced;
    reduced.reserve(seq.frames.size());
    for (const auto& f : seq.frames) reduced.push_back(ebd_down(f, config.ebd_shift));
    CodingResult coded = encode_decode(config.codec, reduced, qp_base, true);
    for (auto& f : coded.reconstruction) f = clamp_to_effective(f);
    r.ebda_qp = coded.effective_qp;

    std::vector<Frame> naive;
    naive.reserve(coded.reconstruction.size());
    for (const auto& f : coded.reconstruction) naive.push_back(ebd_up_naive(f, config.ebd_shift));
    r.naive_psnr = sequence_psnr_luma(seq.frames, naive);

    const auto enhanced = enhance_sequence(*models.at(r.model), coded.reconstruction, config.enhance);
    r.ebda = {coded.bitrate_kbps, sequence_psnr_luma(seq.frames, enhanced)};
    r.ok = true;
  } catch (const std::exception& e) {
    r.ok = false;
    r.diagnostic = e.what();
  }
  return r;
}

void compute_bd(SequenceReport& seq) {
  if (!seq.complete()) {
    seq.bd_diagnostic = "incomplete curve";
    return;
  }
  std::vector<RDPoint> anchor, ebda, naive;
  for (const auto& p : seq.points) {
    anchor.push_back(p.anchor);
    ebda.push_back(p.ebda);
    naive.push_back({p.ebda.bitrate_kbps, p.naive_psnr});
  }
  try {
    const RDCurve a(anchor);
    const RDCurve e(ebda);
    seq.ebda_bd = BdResult{bd_rate(a, e), bd_psnr(a, e)};
    const RDCurve n(naive);
    seq.naive_bd = BdResult{bd_rate(a, n), bd_psnr(a, n)};
  } catch (const Error& err) {
    seq.bd_diagnostic = err.what();
  }
}

std::uint64_t sequence_seed(std::uint64_t seed, std::size_t index) {
  return seed ^ (0x9E3779B97F4A7C15ull * (index + 1));
}

}  // namespace

const char* to_string(ModelId id) {
  switch (id) {
    case ModelId::M1: return "M1";
    case ModelId::M2: return "M2";
    case ModelId::M3: return "M3";
    case ModelId::M4: return "M4";
  }
  return "?";
}

ModelId parse_model_id(const std::string& text) {
  for (ModelId id : {ModelId::M1, ModelId::M2, ModelId::M3, ModelId::M4}) {
    if (text == to_string(id)) return id;
  }
  throw ConfigError("unknown model id '" + text + "' (expected M1..M4)");
}

ModelId ModelSelector::select(double qp_base) const {
  if (qp_base <= thresholds[0]) return ModelId::M1;
  if (qp_base <= thresholds[1]) return ModelId::M2;
  if (qp_base <= thresholds[2]) return ModelId::M3;
  return ModelId::M4;
}

void ModelSelector::validate() const {
  if (!(thresholds[0] < thresholds[1] && thresholds[1] < thresholds[2])) {
    throw ConfigError("model thresholds must be strictly increasing");
  }
}

ModelId select_model(double qp_base) { return ModelSelector{}.select(qp_base); }

void PipelineConfig::validate() const {
  format.validate();
  if (ebd_shift < 0 || ebd_shift >= format.bit_depth.cbd) {
    throw ConfigError("ebd_shift " + std::to_string(ebd_shift) + " invalid for cbd " +
                      std::to_string(format.bit_depth.cbd));
  }
  if (format.bit_depth.reduced()) throw ConfigError("input format must be at full EBD (ebd == cbd)");
  codec.validate();
  enhance.flow.validate();
  if (network) network->validate();
  selector.validate();
  for (ModelId id : {ModelId::M1, ModelId::M2, ModelId::M3, ModelId::M4}) {
    if (!selector.model_paths.contains(id)) {
      throw ConfigError(std::string("no weight file configured for model ") + to_string(id));
    }
  }
  if (qps.empty()) throw ConfigError("qp list is empty");
  for (int qp : qps) {
    if (qp < 0 || qp > 63) throw ConfigError("qp " + std::to_string(qp) + " outside [0, 63]");
    const int shifted = effective_qp(qp, codec.qp_offset);
    if (codec.kind == CodecKind::Mock && (shifted < 0 || shifted > 63)) {
      throw ConfigError("qp " + std::to_string(qp) + " with offset leaves [0, 63]");
    }
  }
  if (workers < 1) throw ConfigError("workers must be >= 1");
}

bool SequenceReport::complete() const {
  return !points.empty() &&
         std::all_of(points.begin(), points.end(), [](const QpPointResult& p) { return p.ok; });
}

bool PipelineReport::all_ok() const {
  return std::all_of(sequences.begin(), sequences.end(),
                     [](const SequenceReport& s) { return s.complete(); });
}

PipelineReport run_pipeline(const PipelineConfig& config, std::span<const SequenceInput> sequences) {
  config.validate();
  for (const auto& seq : sequences) {
    if (seq.frames.empty()) throw ConfigError("sequence '" + seq.name + "' has no frames");
  }
  const ModelCache models = load_models(config);

  PipelineReport report;
  report.codec_name = config.codec.name;
  const std::size_t qp_count = config.qps.size();
  const std::size_t tasks = sequences.size() * qp_count;
  std::vector<QpPointResult> results(tasks);

  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t t = next.fetch_add(1); t < tasks; t = next.fetch_add(1)) {
      results[t] = run_point(config, sequences[t / qp_count], config.qps[t % qp_count], models);
    }
  };
  const auto worker_count = std::min<std::size_t>(static_cast<std::size_t>(config.workers), tasks);
  if (worker_count <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < worker_count; ++i) pool.emplace_back(work);
  }

  for (std::size_t s = 0; s < sequences.size(); ++s) {
    SequenceReport seq;
    seq.name = sequences[s].name;
    seq.points.assign(results.begin() + static_cast<std::ptrdiff_t>(s * qp_count),
                      results.begin() + static_cast<std::ptrdiff_t>((s + 1) * qp_count));
    compute_bd(seq);
    report.sequences.push_back(std::move(seq));
  }
  if (!config.output_dir.empty()) write_report(report, config.output_dir);
  return report;
}

PipelineReport run_pipeline(const PipelineConfig& config, const std::filesystem::path& input) {
  config.validate();
  SequenceInput seq{input.stem().string(), read_yuv_all(input, config.format)};
  return run_pipeline(config, std::span<const SequenceInput>(&seq, 1));
}

Dataset run_gen_dataset(const PipelineConfig& config, std::span<const SequenceInput> sequences,
                        int qp_group) {
  DatasetManifest manifest;
  manifest.qp_group = static_cast<std::uint32_t>(qp_group);
  manifest.seed = config.seed;
  if (std::find(kQpGroups.begin(), kQpGroups.end(), qp_group) == kQpGroups.end()) {
    throw ParameterError("qp_group " + std::to_string(qp_group) + " is not one of 22, 27, 32, 37");
  }
  config.codec.validate();
  if (config.dataset.samples_per_sequence < 0) throw ConfigError("samples_per_sequence must be >= 0");

  Dataset ds;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const SequenceInput& seq = sequences[i];
    manifest.sources.push_back(seq.name);
    std::vector<Frame> reduced;
    reduced.reserve(seq.frames.size());
    for (const auto& f : seq.frames) reduced.push_back(ebd_down(f, config.ebd_shift));
    CodingResult coded = encode_decode(config.codec, reduced, qp_group, true);
    for (auto& f : coded.reconstruction) f = clamp_to_effective(f);

    const auto triplets =
        extract_triplets(seq.frames, coded.reconstruction, config.dataset.samples_per_sequence,
                         sequence_seed(config.seed, i), config.dataset.block_size,
                         static_cast<std::uint32_t>(i));
    for (const auto& t : triplets) {
      if (config.dataset.rotate) {
        for (int k = 0; k < 4; ++k) ds.samples.push_back(augment_rotate(t, k));
      } else {
        ds.samples.push_back(t);
      }
    }
  }
  manifest.sample_count = ds.samples.size();
  ds.manifest = manifest;
  if (!config.dataset.output.empty()) write_dataset(config.dataset.output, ds.samples, manifest);
  return ds;
}

}  // namespace ebda
