#include "ebda/errors.hpp"
#include "ebda/pipeline.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace ebda {
namespace {

using nlohmann::json;

// Every section accepts only the keys listed here, so typos fail loudly.
void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!keys.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

void read_format(const json& j, VideoFormat& f) {
  check_keys(j, "format", {"width", "height", "chroma", "cbd", "frames", "fps"});
  read(j, "width", f.width, "format");
  read(j, "height", f.height, "format");
  if (j.contains("chroma")) {
    std::string chroma;
    read(j, "chroma", chroma, "format");
    try {
      f.chroma = parse_chroma(chroma);
    } catch (const Error& e) {
      throw ConfigError(std::string("format.chroma: ") + e.what());
    }
  }
  if (j.contains("cbd")) {
    read(j, "cbd", f.bit_depth.cbd, "format");
    f.bit_depth.ebd = f.bit_depth.cbd;
  }
  read(j, "frames", f.frame_count, "format");
  read(j, "fps", f.frame_rate, "format");
}

void read_codec(const json& j, CodecConfig& c) {
  check_keys(j, "codec", {"kind", "name", "encode", "decode", "qp_offset", "workdir"});
  if (j.contains("kind")) {
    std::string kind;
    read(j, "kind", kind, "codec");
    if (kind == "mock") {
      c.kind = CodecKind::Mock;
    } else if (kind == "external") {
      c.kind = CodecKind::External;
    } else {
      throw ConfigError("codec.kind must be 'mock' or 'external', got '" + kind + "'");
    }
  }
  read(j, "name", c.name, "codec");
  read(j, "encode", c.encode_template, "codec");
  read(j, "decode", c.decode_template, "codec");
  read(j, "qp_offset", c.qp_offset, "codec");
  std::string workdir;
  read(j, "workdir", workdir, "codec");
  if (!workdir.empty()) c.workdir = workdir;
}

void read_flow(const json& j, FlowParams& p) {
  check_keys(j, "flow", {"levels", "patch_size", "stride", "iterations", "downscale"});
  read(j, "levels", p.pyramid_levels, "flow");
  read(j, "patch_size", p.patch_size, "flow");
  read(j, "stride", p.patch_stride, "flow");
  read(j, "iterations", p.iterations_per_patch, "flow");
  read(j, "downscale", p.downscale_factor, "flow");
}

void read_tiles(const json& j, TileOptions& t) {
  check_keys(j, "tiles", {"size", "overlap", "full_frame_max_pixels"});
  read(j, "size", t.tile_size, "tiles");
  read(j, "overlap", t.overlap, "tiles");
  read(j, "full_frame_max_pixels", t.full_frame_max_pixels, "tiles");
}

NetworkConfig read_network(const json& j) {
  check_keys(j, "network", {"features", "blocks", "dense_layers", "growth", "input_frames",
                            "channels_per_frame", "kernel_size", "leaky_slope"});
  NetworkConfig n;
  read(j, "features", n.base_features, "network");
  read(j, "blocks", n.num_blocks, "network");
  read(j, "dense_layers", n.dense_layers, "network");
  read(j, "growth", n.growth, "network");
  read(j, "input_frames", n.input_frames, "network");
  read(j, "channels_per_frame", n.channels_per_frame, "network");
  read(j, "kernel_size", n.kernel_size, "network");
  read(j, "leaky_slope", n.leaky_slope, "network");
  return n;
}

void read_dataset(const json& j, DatasetOptions& d) {
  check_keys(j, "dataset", {"qp_group", "samples_per_sequence", "rotate", "block_size", "output"});
  read(j, "qp_group", d.qp_group, "dataset");
  read(j, "samples_per_sequence", d.samples_per_sequence, "dataset");
  read(j, "rotate", d.rotate, "dataset");
  read(j, "block_size", d.block_size, "dataset");
  std::string output;
  read(j, "output", output, "dataset");
  if (!output.empty()) d.output = output;
}

PipelineConfig from_json(const json& root, const std::filesystem::path& base) {
  check_keys(root, "config", {"format", "ebd_shift", "codec", "flow", "tiles", "network", "models",
                              "thresholds", "qps", "output_dir", "workers", "seed", "sequences",
                              "dataset"});
  PipelineConfig c;
  const auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_relative() && !base.empty() ? base / path : path;
  };
  if (root.contains("format")) read_format(root.at("format"), c.format);
  read(root, "ebd_shift", c.ebd_shift, "config");
  if (root.contains("codec")) read_codec(root.at("codec"), c.codec);
  if (root.contains("flow")) read_flow(root.at("flow"), c.enhance.flow);
  if (root.contains("tiles")) read_tiles(root.at("tiles"), c.enhance.tiles);
  if (root.contains("network")) c.network = read_network(root.at("network"));
  if (root.contains("models")) {
    const json& m = root.at("models");
    check_keys(m, "models", {"M1", "M2", "M3", "M4"});
    for (const auto& [key, value] : m.items()) {
      if (!value.is_string()) throw ConfigError("models." + key + " must be a path string");
      c.selector.model_paths[parse_model_id(key)] = resolve(value.get<std::string>());
    }
  }
  if (root.contains("thresholds")) {
    std::vector<double> t;
    read(root, "thresholds", t, "config");
    if (t.size() != 3) throw ConfigError("thresholds must hold exactly three values");
    std::copy(t.begin(), t.end(), c.selector.thresholds.begin());
  }
  read(root, "qps", c.qps, "config");
  std::string out;
  read(root, "output_dir", out, "config");
  if (!out.empty()) c.output_dir = out;
  read(root, "workers", c.workers, "config");
  read(root, "seed", c.seed, "config");
  if (root.contains("sequences")) {
    const json& list = root.at("sequences");
    if (!list.is_array()) throw ConfigError("sequences must be an array");
    for (const auto& item : list) {
      check_keys(item, "sequences[]", {"name", "path"});
      SequenceSource s;
      std::string path;
      read(item, "path", path, "sequences[]");
      if (path.empty()) throw ConfigError("sequences[] entry without a path");
      s.path = resolve(path);
      s.name = s.path.stem().string();
      read(item, "name", s.name, "sequences[]");
      c.sequences.push_back(std::move(s));
    }
  }
  if (root.contains("dataset")) read_dataset(root.at("dataset"), c.dataset);
  return c;
}

}  // namespace

PipelineConfig parse_pipeline_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return from_json(root, {});
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream text;
  text << in.rdbuf();
  json root;
  try {
    root = json::parse(text.str(), nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
  return from_json(root, path.parent_path());
}

}  // namespace ebda
