#include "support.hpp"

#include "ebda/ebd_adapt.hpp"
#include "ebda/errors.hpp"
#include "ebda/pipeline.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace ebda;
using namespace ebda::test;

namespace {

NetworkConfig small_net() {
  NetworkConfig c;
  c.base_features = 8;
  c.num_blocks = 1;
  c.dense_layers = 2;
  c.growth = 4;
  return c;
}

// Zero-weight models for all four bands under `dir`.
PipelineConfig zero_model_config(const std::filesystem::path& dir, const VideoFormat& fmt) {
  PipelineConfig cfg;
  cfg.format = fmt;
  cfg.network = small_net();
  const Model zero = make_zero_model(small_net());
  for (ModelId id : {ModelId::M1, ModelId::M2, ModelId::M3, ModelId::M4}) {
    const auto path = dir / (std::string(to_string(id)) + ".mfmr");
    save_weights(path, zero);
    cfg.selector.model_paths[id] = path;
  }
  cfg.output_dir = dir / "out";
  return cfg;
}

std::vector<SequenceInput> two_sequences() {
  return {{"pan", moving_sequence(64, 64, 4, 1.0, 0.5, 1)}, {"tilt", moving_sequence(64, 64, 4, -0.5, 1.5, 2)}};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("pipeline_cli") {
  TEST_CASE("model selection bands") {
    CHECK(select_model(22) == ModelId::M1);
    CHECK(select_model(24.5) == ModelId::M1);
    CHECK(select_model(27) == ModelId::M2);
    CHECK(select_model(29.5) == ModelId::M2);
    CHECK(select_model(32) == ModelId::M3);
    CHECK(select_model(34.5) == ModelId::M3);
    CHECK(select_model(37) == ModelId::M4);
    for (int half = 0; half <= 126; ++half) {
      const double qp = half / 2.0;
      const ModelId expected = qp <= 24.5 ? ModelId::M1 : qp <= 29.5 ? ModelId::M2 : qp <= 34.5 ? ModelId::M3 : ModelId::M4;
      CHECK(select_model(qp) == expected);
    }
  }

  TEST_CASE("selector validation and names") {
    ModelSelector s;
    s.thresholds = {30, 25, 35};
    CHECK_THROWS_AS(s.validate(), ConfigError);
    CHECK(parse_model_id("M3") == ModelId::M3);
    CHECK_THROWS_AS(parse_model_id("M5"), ConfigError);
    CHECK(std::string(to_string(ModelId::M4)) == "M4");
  }

  TEST_CASE("missing model fails before any encode") {
    const auto dir = scratch_dir("pipe-missing");
    const auto seqs = two_sequences();
    PipelineConfig cfg = zero_model_config(dir, seqs[0].frames[0].format);
    cfg.selector.model_paths.erase(ModelId::M3);
    const auto work = dir / "work";
    std::filesystem::create_directories(work);
    cfg.codec.workdir = work;
    CHECK_THROWS_AS(run_pipeline(cfg, seqs), ConfigError);
    CHECK(std::filesystem::is_empty(work));
    CHECK_FALSE(std::filesystem::exists(cfg.output_dir));

    cfg = zero_model_config(dir, seqs[0].frames[0].format);
    cfg.selector.model_paths[ModelId::M2] = dir / "absent.mfmr";
    CHECK_THROWS_AS(run_pipeline(cfg, seqs), IoError);
  }

  TEST_CASE("config validation") {
    const auto dir = scratch_dir("pipe-validate");
    const auto seqs = two_sequences();
    PipelineConfig cfg = zero_model_config(dir, seqs[0].frames[0].format);
    CHECK_NOTHROW(cfg.validate());
    cfg.qps = {22, 64};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.qps = {4};  // effective qp -2 for the mock codec
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.qps = {22};
    cfg.workers = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.workers = 1;
    cfg.network->base_features = 16;  // models on disk are 8 wide
    CHECK_THROWS_AS(run_pipeline(cfg, seqs), ModelIntegrityError);
  }

  TEST_CASE("zero-weight run: EBDA equals naive and the report is complete") {
    const auto dir = scratch_dir("pipe-zero");
    const auto seqs = two_sequences();
    const PipelineConfig cfg = zero_model_config(dir, seqs[0].frames[0].format);
    const PipelineReport report = run_pipeline(cfg, seqs);
    REQUIRE(report.sequences.size() == 2);
    CHECK(report.all_ok());
    for (const auto& s : report.sequences) {
      CHECK(s.complete());
      REQUIRE(s.points.size() == 4);
      for (std::size_t i = 0; i < 4; ++i) {
        const auto& p = s.points[i];
        CHECK(p.qp_base == cfg.qps[i]);
        CHECK(p.model == select_model(p.qp_base));
        CHECK(p.anchor_qp == p.qp_base);
        CHECK(p.ebda_qp == p.qp_base - 6);
        CHECK(p.ebda.psnr == p.naive_psnr);
        CHECK(p.ebda.bitrate_kbps > 0);
      }
      REQUIRE(s.ebda_bd.has_value());
      REQUIRE(s.naive_bd.has_value());
      CHECK(s.ebda_bd->rate_percent == s.naive_bd->rate_percent);
    }
    const std::string rd = slurp(cfg.output_dir / "rd.csv");
    CHECK(rd.rfind("sequence,codec,qp_base,effective_qp,bitrate_kbps,psnr_y\n", 0) == 0);
    CHECK(std::count(rd.begin(), rd.end(), '\n') == 1 + 2 * 8);
    CHECK(rd.find("pan,mock+ebda,27,21,") != std::string::npos);
    CHECK(std::filesystem::exists(cfg.output_dir / "bd.csv"));
    CHECK(std::filesystem::exists(cfg.output_dir / "summary.txt"));
    CHECK(std::filesystem::exists(cfg.output_dir / "pan_rd.svg"));
  }

  TEST_CASE("report bytes do not depend on the worker count") {
    const auto dir = scratch_dir("pipe-workers");
    const auto seqs = two_sequences();
    PipelineConfig cfg = zero_model_config(dir, seqs[0].frames[0].format);
    cfg.output_dir = dir / "one";
    cfg.workers = 1;
    run_pipeline(cfg, seqs);
    cfg.output_dir = dir / "three";
    cfg.workers = 3;
    run_pipeline(cfg, seqs);
    for (const char* f : {"rd.csv", "bd.csv", "summary.txt"}) {
      CAPTURE(f);
      CHECK(slurp(dir / "one" / f) == slurp(dir / "three" / f));
    }
  }

  TEST_CASE("a failing qp marks the sequence incomplete and keeps the rest") {
    const auto dir = scratch_dir("pipe-fail");
    const std::vector<SequenceInput> seqs{two_sequences()[0]};
    PipelineConfig cfg = zero_model_config(dir, seqs[0].frames[0].format);
    cfg.codec.kind = CodecKind::External;
    cfg.codec.name = "mocktool";
    cfg.codec.encode_template = std::string(EBDA_MOCK_CODEC_PATH) +
                                " encode -i {input} -o {output} --qp {qp} --width {width} --height {height}"
                                " --fail-above-qp 30";
    cfg.codec.decode_template = std::string(EBDA_MOCK_CODEC_PATH) + " decode -i {input} -o {output}";
    cfg.codec.workdir = dir / "work";
    const PipelineReport report = run_pipeline(cfg, seqs);
    const auto& s = report.sequences[0];
    CHECK_FALSE(report.all_ok());
    CHECK_FALSE(s.complete());
    CHECK(s.points[0].ok);
    CHECK(s.points[1].ok);
    CHECK_FALSE(s.points[2].ok);  // anchor at 32 is refused
    CHECK(s.points[2].diagnostic.find("refusing qp 32") != std::string::npos);
    CHECK_FALSE(s.ebda_bd.has_value());
    CHECK_FALSE(s.bd_diagnostic.empty());
    const std::string bd = slurp(cfg.output_dir / "bd.csv");
    CHECK(bd.find("incomplete") != std::string::npos);
    const std::string rd = slurp(cfg.output_dir / "rd.csv");
    CHECK(std::count(rd.begin(), rd.end(), '\n') == 1 + 4);
  }

  TEST_CASE("dataset generation over two sequences") {
    const auto dir = scratch_dir("pipe-dataset");
    const std::vector<SequenceInput> seqs{{"a", moving_sequence(112, 104, 4, 1.0, 0.0, 3)},
                                          {"b", moving_sequence(96, 96, 3, 0.0, 1.0, 4)}};
    PipelineConfig cfg;
    cfg.format = seqs[0].frames[0].format;
    cfg.seed = 42;
    cfg.dataset.output = dir / "d.ebds";
    const Dataset d = run_gen_dataset(cfg, seqs, 27);
    CHECK(d.samples.size() == 2 * 50 * 4);
    CHECK(d.manifest.qp_group == 27);
    std::array<int, 4> rotations{};
    for (const auto& s : d.samples) {
      rotations[s.meta.rotation]++;
      CHECK(s.meta.sequence_id < 2);
    }
    CHECK(rotations == std::array<int, 4>{100, 100, 100, 100});
    CHECK(read_dataset(dir / "d.ebds").samples == d.samples);

    cfg.dataset.output = dir / "again.ebds";
    run_gen_dataset(cfg, seqs, 27);
    CHECK(slurp(dir / "d.ebds") == slurp(dir / "again.ebds"));

    cfg.dataset.rotate = false;
    cfg.dataset.output.clear();
    CHECK(run_gen_dataset(cfg, seqs, 22).samples.size() == 100);
    CHECK_THROWS_AS(run_gen_dataset(cfg, seqs, 23), ParameterError);
  }

  TEST_CASE("config parsing") {
    const PipelineConfig cfg = parse_pipeline_config(R"({
      // comments are allowed
      "format": {"width": 64, "height": 48, "chroma": "420", "cbd": 10, "fps": 25},
      "ebd_shift": 1,
      "codec": {"kind": "mock", "qp_offset": -6},
      "network": {"features": 8, "blocks": 1, "dense_layers": 2, "growth": 4},
      "thresholds": [24.5, 29.5, 34.5],
      "qps": [22, 27],
      "workers": 2,
      "seed": 7,
      "dataset": {"qp_group": 32, "samples_per_sequence": 10}
    })");
    CHECK(cfg.format.width == 64);
    CHECK(cfg.format.height == 48);
    CHECK(cfg.format.frame_rate == 25.0);
    CHECK(cfg.qps == std::vector<int>{22, 27});
    CHECK(cfg.workers == 2);
    CHECK(cfg.seed == 7);
    CHECK(cfg.network->base_features == 8);
    CHECK(cfg.dataset.qp_group == 32);
    CHECK_THROWS_AS(parse_pipeline_config(R"({"qpz": [22]})"), ConfigError);
    CHECK_THROWS_AS(parse_pipeline_config(R"({"codec": {"kind": "hevc"}})"), ConfigError);
    CHECK_THROWS_AS(parse_pipeline_config(R"({"format": {"width": "wide"}})"), ConfigError);
    CHECK_THROWS_AS(parse_pipeline_config("{"), ConfigError);
  }

  TEST_CASE("relative paths resolve against the config file") {
    const auto dir = scratch_dir("pipe-config");
    std::ofstream(dir / "c.json") << R"({"models": {"M1": "w/m1.mfmr"}, "sequences": [{"name": "s", "path": "s.yuv"}]})";
    const PipelineConfig cfg = load_pipeline_config(dir / "c.json");
    CHECK(cfg.selector.model_paths.at(ModelId::M1) == dir / "w/m1.mfmr");
    CHECK(cfg.sequences.at(0).path == dir / "s.yuv");
    CHECK_THROWS_AS(load_pipeline_config(dir / "missing.json"), IoError);
  }

  TEST_CASE("command line end to end") {
    const auto dir = scratch_dir("pipe-cli");
    const std::string cli = EBDA_CLI_PATH;
    write_yuv(dir / "seq.yuv", moving_sequence(64, 64, 4, 1.0, 1.0, 5));
    std::ofstream(dir / "c.json") << R"({
      "format": {"width": 64, "height": 64},
      "network": {"features": 8, "blocks": 1, "dense_layers": 2, "growth": 4},
      "models": {"M1": "z.mfmr", "M2": "z.mfmr", "M3": "z.mfmr", "M4": "z.mfmr"}
    })";
    const std::string c = cli + " -c " + (dir / "c.json").string();
    CHECK(run(c + " init-weights --zero -o " + (dir / "z.mfmr").string() + " > /dev/null") == 0);
    CHECK(run(c + " pipeline -i " + (dir / "seq.yuv").string() + " -o " + (dir / "out").string() + " > /dev/null") == 0);
    CHECK(slurp(dir / "out" / "rd.csv").find("seq,mock+ebda,37,31,") != std::string::npos);
    CHECK(run(c + " bdrate --anchor " + (dir / "out" / "rd.csv").string() + " --anchor-codec mock --test " +
              (dir / "out" / "rd.csv").string() + " --test-codec mock > " + (dir / "bd.txt").string()) == 0);
    CHECK(slurp(dir / "bd.txt").find("bd_rate_percent 0.0000") != std::string::npos);

    CHECK(run(c + " downsample -i " + (dir / "seq.yuv").string() + " -o " + (dir / "down.yuv").string() + " > /dev/null") == 0);
    CHECK(run(c + " upsample-naive -i " + (dir / "down.yuv").string() + " -o " + (dir / "up.yuv").string() + " > /dev/null") == 0);
    const auto orig = read_yuv_all(dir / "seq.yuv", make_format(64, 64, ChromaFormat::C420, 10, 10, 4));
    const auto up = read_yuv_all(dir / "up.yuv", make_format(64, 64, ChromaFormat::C420, 10, 10, 4));
    CHECK((up[2].y == ebd_up_naive(ebd_down(orig[2], 1), 1).y).all());

    CHECK(run(c + " enhance -i " + (dir / "down.yuv").string() + " -o " + (dir / "enh.yuv").string() + " --qp 30 > /dev/null") == 0);
    CHECK(slurp(dir / "enh.yuv") == slurp(dir / "up.yuv"));

    CHECK(run(c + " psnr -a " + (dir / "seq.yuv").string() + " -b " + (dir / "nope.yuv").string() + " 2> /dev/null") == 1);
    CHECK(run(cli + " pipeline -i x.yuv --bogus 2> /dev/null") != 0);
  }
}
