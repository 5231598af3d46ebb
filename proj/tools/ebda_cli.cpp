// ebda: command-line front end for bit-depth reduction, enhancement,
// flow, dataset generation and rate-distortion evaluation.

#include "ebda/chroma.hpp"
#include "ebda/ebd_adapt.hpp"
#include "ebda/errors.hpp"
#include "ebda/metrics.hpp"
#include "ebda/optical_flow.hpp"
#include "ebda/pipeline.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

using namespace ebda;

constexpr int kExitError = 1;
constexpr int kExitIncomplete = 2;

struct FormatFlags {
  std::optional<int> width;
  std::optional<int> height;
  std::optional<std::string> chroma;
  std::optional<int> cbd;
  std::optional<int> frames;
  std::optional<double> fps;

  void add(CLI::App* app) {
    app->add_option("--width", width, "Luma width");
    app->add_option("--height", height, "Luma height");
    app->add_option("--chroma", chroma, "Chroma format: 420 or 444");
    app->add_option("--cbd", cbd, "Coding bit depth of the file");
    app->add_option("--frames", frames, "Frames to read (default: whole file)");
    app->add_option("--fps", fps, "Frame rate used for bitrates");
  }

  VideoFormat apply(VideoFormat f) const {
    if (width) f.width = *width;
    if (height) f.height = *height;
    if (chroma) f.chroma = parse_chroma(*chroma);
    if (cbd) f.bit_depth = {*cbd, *cbd};
    if (frames) f.frame_count = *frames;
    if (fps) f.frame_rate = *fps;
    return f;
  }
};

// Frame count defaults to whatever the file holds.
VideoFormat format_for_file(VideoFormat f, const FormatFlags& flags, const std::filesystem::path& path) {
  f = flags.apply(f);
  f.validate();
  if (!flags.frames) {
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec) throw IoError("cannot stat '" + path.string() + "': " + ec.message());
    f.frame_count = static_cast<int>(std::max<std::uintmax_t>(1, size / f.bytes_per_frame()));
  }
  return f;
}

std::vector<Frame> read_with_ebd(const std::filesystem::path& path, VideoFormat fmt, int ebd) {
  auto frames = read_yuv_all(path, fmt);
  for (auto& f : frames) {
    f.format.bit_depth.ebd = ebd;
    check_sample_range(f);
  }
  return frames;
}

PipelineConfig base_config(const std::optional<std::string>& path) {
  return path ? load_pipeline_config(*path) : PipelineConfig{};
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

// Reads (bitrate, psnr) pairs from a CSV with a header row. Rows can be
// filtered on the codec and sequence columns when those exist.
std::vector<RDPoint> read_rd_points(const std::filesystem::path& path, const std::string& codec,
                                    const std::string& sequence) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  const auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream s(line);
    std::string cell;
    while (std::getline(s, cell, ',')) cells.push_back(cell);
    return cells;
  };
  std::string line;
  if (!std::getline(in, line)) throw FormatError("'" + path.string() + "' is empty");
  const auto header = split(line);
  const auto column = [&](std::initializer_list<const char*> names) -> int {
    for (const char* n : names) {
      const auto it = std::find(header.begin(), header.end(), n);
      if (it != header.end()) return static_cast<int>(it - header.begin());
    }
    return -1;
  };
  const int rate_col = column({"bitrate_kbps", "bitrate"});
  const int psnr_col = column({"psnr_y", "psnr"});
  const int codec_col = column({"codec"});
  const int seq_col = column({"sequence"});
  if (rate_col < 0 || psnr_col < 0) {
    throw FormatError("'" + path.string() + "' needs bitrate_kbps and psnr_y columns");
  }
  std::vector<RDPoint> points;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (static_cast<int>(cells.size()) != static_cast<int>(header.size())) {
      throw FormatError("'" + path.string() + "': ragged row: " + line);
    }
    if (!codec.empty() && codec_col >= 0 && cells[codec_col] != codec) continue;
    if (!sequence.empty() && seq_col >= 0 && cells[seq_col] != sequence) continue;
    try {
      points.push_back({std::stod(cells[rate_col]), std::stod(cells[psnr_col])});
    } catch (const std::exception&) {
      throw FormatError("'" + path.string() + "': non-numeric value in row: " + line);
    }
  }
  return points;
}

std::vector<SequenceInput> load_sequences(const PipelineConfig& cfg, const FormatFlags& flags,
                                          const std::vector<std::string>& inputs) {
  std::vector<SequenceSource> sources = cfg.sequences;
  if (!inputs.empty()) {
    sources.clear();
    for (const auto& p : inputs) sources.push_back({std::filesystem::path(p).stem().string(), p});
  }
  if (sources.empty()) throw ConfigError("no input sequences (use -i or the config 'sequences' list)");
  std::vector<SequenceInput> seqs;
  for (const auto& s : sources) {
    const VideoFormat fmt = format_for_file(cfg.format, flags, s.path);
    seqs.push_back({s.name, read_yuv_all(s.path, fmt)});
  }
  return seqs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Effective bit depth adaptation tools"};
  app.require_subcommand(1);
  std::optional<std::string> config_path;
  app.add_option("-c,--config", config_path, "JSON config file; flags override its values")
      ->check(CLI::ExistingFile);

  // downsample
  auto* down = app.add_subcommand("downsample", "Reduce effective bit depth by a right shift");
  FormatFlags down_fmt;
  std::string down_in, down_out;
  std::optional<int> down_shift;
  down->add_option("-i,--input", down_in, "Input YUV at full bit depth")->required();
  down->add_option("-o,--output", down_out, "Output YUV (same container depth)")->required();
  down->add_option("--shift", down_shift, "Bits to drop (default 1)");
  down_fmt.add(down);

  // upsample-naive
  auto* up = app.add_subcommand("upsample-naive", "Left-shift a reduced-EBD file back to full depth");
  FormatFlags up_fmt;
  std::string up_in, up_out;
  std::optional<int> up_shift;
  up->add_option("-i,--input", up_in, "Reduced-EBD YUV")->required();
  up->add_option("-o,--output", up_out, "Output YUV")->required();
  up->add_option("--shift", up_shift, "Bits to restore (default 1)");
  up_fmt.add(up);

  // enhance
  auto* enh = app.add_subcommand("enhance", "Restore full bit depth with the multi-frame network");
  FormatFlags enh_fmt;
  std::string enh_in, enh_out;
  std::optional<std::string> enh_model;
  std::optional<double> enh_qp;
  std::optional<int> enh_shift;
  enh->add_option("-i,--input", enh_in, "Reduced-EBD reconstructed YUV")->required();
  enh->add_option("-o,--output", enh_out, "Enhanced YUV")->required();
  enh->add_option("-m,--model", enh_model, "Weight file (overrides QP-based selection)");
  enh->add_option("--qp", enh_qp, "Base QP used to pick a model from the config");
  enh->add_option("--shift", enh_shift, "EBD shift of the input (default 1)");
  enh_fmt.add(enh);

  // flow
  auto* flow = app.add_subcommand("flow", "Estimate dense optical flow between two frames");
  FormatFlags flow_fmt;
  std::string flow_in, flow_out;
  int flow_ref = 0, flow_tgt = 1;
  flow->add_option("-i,--input", flow_in, "YUV sequence")->required();
  flow->add_option("-o,--output", flow_out, "Flow dump (u32 w, u32 h, f32 u/v pairs)")->required();
  flow->add_option("--reference", flow_ref, "Reference frame index")->capture_default_str();
  flow->add_option("--target", flow_tgt, "Target frame index")->capture_default_str();
  flow_fmt.add(flow);

  // gen-dataset
  auto* gen = app.add_subcommand("gen-dataset", "Build an EBDS training set for one QP group");
  FormatFlags gen_fmt;
  std::vector<std::string> gen_inputs;
  std::optional<int> gen_qp, gen_samples;
  std::optional<std::uint64_t> gen_seed;
  std::optional<std::string> gen_out;
  bool gen_no_rotate = false;
  gen->add_option("-i,--input", gen_inputs, "Source sequences (default: config list)");
  gen->add_option("-q,--qp-group", gen_qp, "One of 22, 27, 32, 37");
  gen->add_option("-n,--samples", gen_samples, "Triplets per sequence before rotation");
  gen->add_option("--seed", gen_seed, "Sampling seed");
  gen->add_option("-o,--output", gen_out, "EBDS output file");
  gen->add_flag("--no-rotate", gen_no_rotate, "Skip the four-rotation augmentation");
  gen_fmt.add(gen);

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "Anchor versus EBDA rate-distortion evaluation");
  FormatFlags pipe_fmt;
  std::vector<std::string> pipe_inputs;
  std::vector<int> pipe_qps;
  std::optional<int> pipe_workers, pipe_offset;
  std::optional<std::string> pipe_outdir, pipe_codec, pipe_enc, pipe_dec;
  std::map<std::string, std::string> pipe_models;
  pipe->add_option("-i,--input", pipe_inputs, "Input sequences (default: config list)");
  pipe->add_option("--qps", pipe_qps, "Base QP list");
  pipe->add_option("-j,--workers", pipe_workers, "Worker threads");
  pipe->add_option("-o,--output-dir", pipe_outdir, "Report directory");
  pipe->add_option("--codec", pipe_codec, "mock or external");
  pipe->add_option("--encode", pipe_enc, "Encoder command template");
  pipe->add_option("--decode", pipe_dec, "Decoder command template");
  pipe->add_option("--qp-offset", pipe_offset, "QP offset for EBDA runs");
  for (const char* id : {"M1", "M2", "M3", "M4"}) {
    pipe->add_option_function<std::string>(
        std::string("--model-") + id, [&pipe_models, id](const std::string& p) { pipe_models[id] = p; },
        std::string("Weight file for band ") + id);
  }
  pipe_fmt.add(pipe);

  // bdrate
  auto* bd = app.add_subcommand("bdrate", "Bjontegaard delta rate and PSNR between two RD curves");
  std::string bd_anchor, bd_test;
  std::string bd_anchor_codec, bd_test_codec, bd_sequence;
  bd->add_option("--anchor", bd_anchor, "CSV with bitrate_kbps and psnr_y columns")->required();
  bd->add_option("--test", bd_test, "CSV for the tested curve")->required();
  bd->add_option("--anchor-codec", bd_anchor_codec, "Keep only anchor rows with this codec label");
  bd->add_option("--test-codec", bd_test_codec, "Keep only test rows with this codec label");
  bd->add_option("--sequence", bd_sequence, "Keep only rows of this sequence");

  // psnr
  auto* ps = app.add_subcommand("psnr", "Luma PSNR between two YUV files");
  FormatFlags ps_fmt;
  std::string ps_a, ps_b;
  ps->add_option("-a", ps_a, "Reference YUV")->required();
  ps->add_option("-b", ps_b, "Distorted YUV")->required();
  ps_fmt.add(ps);

  // init-weights
  auto* init = app.add_subcommand("init-weights", "Write a zero or random weight file");
  std::string init_out;
  bool init_zero = false;
  std::uint64_t init_seed = 1;
  float init_scale = 1.0f;
  init->add_option("-o,--output", init_out, "MFMR output file")->required();
  init->add_flag("--zero", init_zero, "All-zero weights (enhancement reduces to naive up-shift)");
  init->add_option("--seed", init_seed, "Seed for random weights")->capture_default_str();
  init->add_option("--scale", init_scale, "Random weight scale")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    PipelineConfig cfg = base_config(config_path);

    if (*down) {
      const VideoFormat fmt = format_for_file(cfg.format, down_fmt, down_in);
      const int shift = down_shift.value_or(cfg.ebd_shift);
      std::vector<Frame> out;
      for (const auto& f : read_yuv_all(down_in, fmt)) out.push_back(ebd_down(f, shift));
      write_yuv(down_out, out);
      std::cout << "wrote " << out.size() << " frames at ebd " << fmt.bit_depth.cbd - shift << '\n';
    } else if (*up) {
      const VideoFormat fmt = format_for_file(cfg.format, up_fmt, up_in);
      const int shift = up_shift.value_or(cfg.ebd_shift);
      std::vector<Frame> out;
      for (const auto& f : read_with_ebd(up_in, fmt, fmt.bit_depth.cbd - shift)) {
        out.push_back(ebd_up_naive(f, shift));
      }
      write_yuv(up_out, out);
      std::cout << "wrote " << out.size() << " frames at ebd " << fmt.bit_depth.cbd << '\n';
    } else if (*enh) {
      const VideoFormat fmt = format_for_file(cfg.format, enh_fmt, enh_in);
      const int shift = enh_shift.value_or(cfg.ebd_shift);
      std::filesystem::path model_path;
      if (enh_model) {
        model_path = *enh_model;
      } else if (enh_qp) {
        const ModelId id = cfg.selector.select(*enh_qp);
        if (!cfg.selector.model_paths.contains(id)) {
          throw ConfigError(std::string("no weight file configured for model ") + to_string(id));
        }
        model_path = cfg.selector.model_paths.at(id);
      } else {
        throw ConfigError("enhance needs --model or --qp with config models");
      }
      const Model model = load_weights(model_path);
      const auto frames = read_with_ebd(enh_in, fmt, fmt.bit_depth.cbd - shift);
      write_yuv(enh_out, enhance_sequence(model, frames, cfg.enhance));
      std::cout << "enhanced " << frames.size() << " frames with " << model_path.string() << '\n';
    } else if (*flow) {
      const VideoFormat fmt = format_for_file(cfg.format, flow_fmt, flow_in);
      const auto frames = read_yuv_all(flow_in, fmt);
      const auto count = static_cast<int>(frames.size());
      if (flow_ref < 0 || flow_ref >= count || flow_tgt < 0 || flow_tgt >= count) {
        throw ParameterError("frame index outside [0, " + std::to_string(count - 1) + "]");
      }
      const FlowField f = estimate_flow(frames[flow_ref].y, frames[flow_tgt].y, cfg.enhance.flow,
                                        fmt.bit_depth.cbd);
      write_flow(flow_out, f);
      const double mean_u = f.u.cast<double>().mean();
      const double mean_v = f.v.cast<double>().mean();
      std::cout << "mean flow (" << fixed(mean_u, 3) << ", " << fixed(mean_v, 3) << ")\n";
    } else if (*gen) {
      if (gen_samples) cfg.dataset.samples_per_sequence = *gen_samples;
      if (gen_seed) cfg.seed = *gen_seed;
      if (gen_out) cfg.dataset.output = *gen_out;
      if (gen_no_rotate) cfg.dataset.rotate = false;
      const int qp_group = gen_qp.value_or(cfg.dataset.qp_group);
      const auto seqs = load_sequences(cfg, gen_fmt, gen_inputs);
      const Dataset ds = run_gen_dataset(cfg, seqs, qp_group);
      std::cout << "wrote " << ds.samples.size() << " samples to " << cfg.dataset.output.string() << '\n';
    } else if (*pipe) {
      if (!pipe_qps.empty()) cfg.qps = pipe_qps;
      if (pipe_workers) cfg.workers = *pipe_workers;
      if (pipe_outdir) cfg.output_dir = *pipe_outdir;
      if (pipe_codec) {
        if (*pipe_codec == "mock") {
          cfg.codec.kind = CodecKind::Mock;
        } else if (*pipe_codec == "external") {
          cfg.codec.kind = CodecKind::External;
        } else {
          throw ConfigError("--codec must be mock or external");
        }
      }
      if (pipe_enc) cfg.codec.encode_template = *pipe_enc;
      if (pipe_dec) cfg.codec.decode_template = *pipe_dec;
      if (pipe_offset) cfg.codec.qp_offset = *pipe_offset;
      for (const auto& [id, path] : pipe_models) cfg.selector.model_paths[parse_model_id(id)] = path;
      cfg.format = pipe_fmt.apply(cfg.format);
      cfg.validate();
      const auto seqs = load_sequences(cfg, pipe_fmt, pipe_inputs);
      const PipelineReport report = run_pipeline(cfg, seqs);
      std::cout << summary_text(report);
      if (!report.all_ok()) {
        std::cerr << "pipeline: one or more QP points failed; see " << cfg.output_dir.string()
                  << "/summary.txt\n";
        return kExitIncomplete;
      }
    } else if (*bd) {
      const RDCurve anchor(read_rd_points(bd_anchor, bd_anchor_codec, bd_sequence));
      const RDCurve test(read_rd_points(bd_test, bd_test_codec, bd_sequence));
      std::cout << "bd_rate_percent " << fixed(bd_rate(anchor, test), 4) << '\n';
      std::cout << "bd_psnr_db " << fixed(bd_psnr(anchor, test), 4) << '\n';
    } else if (*ps) {
      const VideoFormat fmt_a = format_for_file(cfg.format, ps_fmt, ps_a);
      const VideoFormat fmt_b = format_for_file(cfg.format, ps_fmt, ps_b);
      const auto a = read_yuv_all(ps_a, fmt_a);
      const auto b = read_yuv_all(ps_b, fmt_b);
      if (a.size() != b.size()) {
        throw ShapeError("frame counts differ: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
      }
      for (std::size_t i = 0; i < a.size(); ++i) {
        std::cout << "frame " << i << ' ' << fixed(psnr_luma(a[i], b[i]), 4) << '\n';
      }
      std::cout << "mean " << fixed(sequence_psnr_luma(a, b), 4) << '\n';
    } else if (*init) {
      const NetworkConfig net = cfg.network.value_or(NetworkConfig{});
      const Model model = init_zero ? make_zero_model(net) : make_random_model(net, init_seed, init_scale);
      save_weights(init_out, model);
      std::cout << "wrote " << parameter_count(net) << " parameters to " << init_out << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << '\n';
    return kExitError;
  }
  return 0;
}
