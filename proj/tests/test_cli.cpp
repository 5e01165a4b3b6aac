#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <map>
#include <string>

#include "vmad/cli.hpp"

#include "test_util.hpp"

using namespace vmad;
using namespace vmad::cli;
using vmad::test::TempDir;

namespace {

ScenarioConfig small_scenario(uint64_t seed) {
  ScenarioConfig cfg;
  cfg.n_subjects = 8;
  cfg.n_bonafide_docs = 6;
  cfg.n_morph_docs = 10;
  cfg.frames_min = 4;
  cfg.frames_max = 9;
  cfg.seed = seed;
  return cfg;
}

std::map<std::string, std::string> parse_kv(const fs::path& p, char delim = ',') {
  std::map<std::string, std::string> out;
  for (const Line& ln : logical_lines(read_file(p))) {
    auto fields = split(ln.text, delim);
    if (fields.size() >= 2) out[fields[0]] = fields[1];
  }
  return out;
}

void require_error(ErrorCode code, const std::function<void()>& fn) {
  try {
    fn();
    FAIL("expected " << error_code_name(code));
  } catch (const VmadError& e) {
    REQUIRE(e.code() == code);
  }
}

size_t data_rows(const fs::path& p) {
  return logical_lines(read_file(p)).size() - 1;  // minus header
}

}  // namespace

TEST_CASE("simulate command writes a loadable dataset and records its run") {
  TempDir tmp("sim");
  SimulateOptions opt;
  opt.config = small_scenario(5);
  opt.out_dir = tmp / "data";
  cmd_simulate(opt, RunRecorder("simulate"));

  REQUIRE(fs::exists(opt.out_dir / "manifest.txt"));
  REQUIRE(fs::exists(opt.out_dir / "scores.csv"));
  REQUIRE(fs::exists(opt.out_dir / "runconfig-simulate.txt"));

  Dataset ds = load_dataset(opt.out_dir / "manifest.txt", {opt.out_dir / "scores.csv"});
  REQUIRE(!ds.attempts.empty());
  REQUIRE(validate_dataset(ds).ok());

  const auto rec = parse_kv(opt.out_dir / "runconfig-simulate.txt", '=');
  REQUIRE(rec.at("command") == "simulate");
  REQUIRE(rec.at("seed") == "5");

  SECTION("rerun is byte identical") {
    const std::string m1 = read_file(opt.out_dir / "manifest.txt");
    const std::string s1 = read_file(opt.out_dir / "scores.csv");
    cmd_simulate(opt, RunRecorder("simulate"));
    REQUIRE(read_file(opt.out_dir / "manifest.txt") == m1);
    REQUIRE(read_file(opt.out_dir / "scores.csv") == s1);
  }
}

TEST_CASE("quality command") {
  TempDir tmp("qual");
  // manifest with two image-backed frames and one without
  GrayImage img;
  img.width = 10;
  img.height = 8;
  img.data.assign(80, 0);
  for (long r = 0; r < 8; ++r)
    for (long c = 0; c < 10; ++c) img.at(r, c) = static_cast<uint8_t>(10 + 20 * ((r + c) % 5));
  write_file_atomic(tmp / "imgs" / "f1.pgm", encode_pgm(img));
  write_png_gray(tmp / "imgs" / "f2.png", img);

  const std::string manifest =
      "[subjects]\nsubject_id\nA\n"
      "[documents]\ndocument_id,label,subject_a,subject_b\nD1,bonafide,A,\n"
      "[sequences]\nsequence_id,subject_id\nQ1,A\n"
      "[frames]\nsequence_id,frame_id,image_path,face_x,face_y,face_w,face_h\n"
      "Q1,F1,imgs/f1.pgm,1,1,8,6\n"
      "Q1,F2,imgs/f2.png,,,,\n"
      "Q1,F3,,,,,\n";
  write_file_atomic(tmp / "manifest.txt", manifest);

  QualityOptions opt;
  opt.manifest = tmp / "manifest.txt";
  opt.image_root = tmp.path;
  opt.out = tmp / "q.csv";
  auto rep = cmd_quality(opt, RunRecorder("quality"));

  // 2 tracks x 2 image frames
  REQUIRE(data_rows(opt.out) == 4);
  REQUIRE(rep.warnings.size() == 1);
  REQUIRE(rep.warnings[0].find("Q1/F3") != std::string::npos);

  Dataset ds = load_manifest(opt.manifest);
  attach_score_table(ds, read_file(opt.out), opt.out);
  REQUIRE(ds.sequences[0].frames[0].quality_scores.count("illum"));
  REQUIRE(ds.sequences[0].frames[0].quality_scores.count("defocus"));

  SECTION("rerun is byte identical") {
    const std::string first = read_file(opt.out);
    cmd_quality(opt, RunRecorder("quality"));
    REQUIRE(read_file(opt.out) == first);
  }
  SECTION("box errors carry the frame id") {
    write_file_atomic(tmp / "bad.txt",
                      "[subjects]\nsubject_id\nA\n"
                      "[documents]\ndocument_id,label,subject_a,subject_b\nD1,bonafide,A,\n"
                      "[sequences]\nsequence_id,subject_id\nQ1,A\n"
                      "[frames]\nsequence_id,frame_id,image_path,face_x,face_y,face_w,face_h\n"
                      "Q1,F1,imgs/f1.pgm,5,5,9,9\n");
    QualityOptions bad = opt;
    bad.manifest = tmp / "bad.txt";
    try {
      cmd_quality(bad, RunRecorder("quality"));
      FAIL();
    } catch (const VmadError& e) {
      REQUIRE(e.code() == ErrorCode::BoxOutOfBounds);
      REQUIRE(std::string(e.what()).find("Q1/F1") != std::string::npos);
    }
  }
}

TEST_CASE("fuse command") {
  TempDir tmp("fuse");
  SimulateOptions sim;
  sim.config = small_scenario(11);
  sim.out_dir = tmp / "data";
  cmd_simulate(sim, RunRecorder("simulate"));
  Dataset ds = load_dataset(sim.out_dir / "manifest.txt", {sim.out_dir / "scores.csv"});
  const size_t n = ds.attempts.size();
  REQUIRE(n > 0);

  FuseOptions opt;
  opt.manifest = sim.out_dir / "manifest.txt";
  opt.score_tables = {sim.out_dir / "scores.csv"};
  opt.out = tmp / "fused.csv";

  SECTION("two strategies give one row per attempt per strategy") {
    opt.strategies = {"avg", "med"};
    cmd_fuse(opt, RunRecorder("fuse"));
    REQUIRE(data_rows(opt.out) == 2 * n);
  }
  SECTION("vote grid expands to nine strategies") {
    opt.strategies = {"vote:0.1..0.9:0.1"};
    cmd_fuse(opt, RunRecorder("fuse"));
    REQUIRE(data_rows(opt.out) == 9 * n);
    const auto rows = parse_fused_table(read_file(opt.out), opt.out);
    REQUIRE(rows.front().strategy == "vote:0.1");
    REQUIRE(rows.back().strategy == "vote:0.9");
  }
  SECTION("rnd needs a seed") {
    opt.strategies = {"rnd"};
    require_error(ErrorCode::InvalidArgument, [&] { cmd_fuse(opt, RunRecorder("fuse")); });
    opt.seed = 3;
    cmd_fuse(opt, RunRecorder("fuse"));
    REQUIRE(data_rows(opt.out) == n);
  }
  SECTION("wavg with explicit normalization and best quality") {
    opt.strategies = {"wavg:q:synth", "wavg:q:synth:median", "best:q:synth"};
    cmd_fuse(opt, RunRecorder("fuse"));
    REQUIRE(data_rows(opt.out) == 3 * n);
  }
  SECTION("unknown strategy and unknown track") {
    opt.strategies = {"sum"};
    require_error(ErrorCode::InvalidArgument, [&] { cmd_fuse(opt, RunRecorder("fuse")); });
    opt.strategies = {"wavg:q:absent"};
    require_error(ErrorCode::MissingTrack, [&] { cmd_fuse(opt, RunRecorder("fuse")); });
  }
  SECTION("mxd without ground truth labels fails") {
    // rewrite the manifest with unknown labels
    Dataset unk = load_manifest(sim.out_dir / "manifest.txt");
    for (auto& d : unk.documents) {
      d.label = Label::Unknown;
      d.subject_b.reset();
    }
    write_file_atomic(tmp / "unknown.txt", save_manifest(unk));
    FuseOptions uopt = opt;
    uopt.manifest = tmp / "unknown.txt";
    uopt.strategies = {"mxd"};
    require_error(ErrorCode::InvalidArgument, [&] { cmd_fuse(uopt, RunRecorder("fuse")); });
  }
  SECTION("rerun is byte identical") {
    opt.strategies = {"avg", "mxd"};
    cmd_fuse(opt, RunRecorder("fuse"));
    const std::string first = read_file(opt.out);
    cmd_fuse(opt, RunRecorder("fuse"));
    REQUIRE(read_file(opt.out) == first);
  }
}

TEST_CASE("eval command") {
  TempDir tmp("eval");
  SECTION("perfect separation scores zero everywhere") {
    std::vector<VmadScore> rows;
    for (int i = 0; i < 5; ++i)
      rows.push_back({{"B" + std::to_string(i), "Q", Label::BonaFide}, 0.1 + 0.01 * i, "avg"});
    for (int i = 0; i < 5; ++i)
      rows.push_back({{"M" + std::to_string(i), "Q", Label::Morphed}, 0.8 + 0.01 * i, "avg"});
    write_file_atomic(tmp / "fused.csv", save_fused_table(rows));

    EvalOptions opt;
    opt.fused = tmp / "fused.csv";
    opt.out_dir = tmp / "out";
    opt.svg = true;
    cmd_eval(opt, RunRecorder("eval"));

    REQUIRE(fs::exists(opt.out_dir / "summary.csv"));
    REQUIRE(fs::exists(opt.out_dir / "det-avg.csv"));
    REQUIRE(fs::exists(opt.out_dir / "det.svg"));
    const auto lines = logical_lines(read_file(opt.out_dir / "summary.csv"));
    REQUIRE(lines.size() == 2);  // header + one strategy
    REQUIRE(lines[0].text == "strategy,eer,bpcer10,bpcer20,bpcer100");
    REQUIRE(lines[1].text == "avg,0,0,0,0");
  }
  SECTION("unlabeled rows are skipped with a warning") {
    std::vector<VmadScore> rows = {{{"D1", "Q", Label::BonaFide}, 0.2, "avg"},
                                   {{"D2", "Q", Label::Morphed}, 0.9, "avg"},
                                   {{"D3", "Q", Label::Unknown}, 0.5, "avg"}};
    write_file_atomic(tmp / "fused.csv", save_fused_table(rows));
    EvalOptions opt;
    opt.fused = tmp / "fused.csv";
    opt.out_dir = tmp / "out";
    auto rep = cmd_eval(opt, RunRecorder("eval"));
    REQUIRE(rep.warnings.size() == 1);
  }
  SECTION("a strategy with one population missing fails with EmptySet") {
    std::vector<VmadScore> rows = {{{"D1", "Q", Label::BonaFide}, 0.2, "avg"}};
    write_file_atomic(tmp / "fused.csv", save_fused_table(rows));
    EvalOptions opt;
    opt.fused = tmp / "fused.csv";
    opt.out_dir = tmp / "out";
    require_error(ErrorCode::EmptySet, [&] { cmd_eval(opt, RunRecorder("eval")); });
  }
  SECTION("det-export writes curves without a summary") {
    std::vector<VmadScore> rows = {{{"D1", "Q", Label::BonaFide}, 0.2, "vote:0.5"},
                                   {{"D2", "Q", Label::Morphed}, 0.9, "vote:0.5"}};
    write_file_atomic(tmp / "fused.csv", save_fused_table(rows));
    EvalOptions opt;
    opt.fused = tmp / "fused.csv";
    opt.out_dir = tmp / "det";
    opt.write_summary = false;
    cmd_eval(opt, RunRecorder("det-export"));
    REQUIRE(fs::exists(opt.out_dir / "det-vote_0.5.csv"));
    REQUIRE_FALSE(fs::exists(opt.out_dir / "summary.csv"));
  }
}

TEST_CASE("train and predict commands") {
  TempDir tmp("train");
  SimulateOptions sim;
  sim.config = small_scenario(21);
  sim.config.n_subjects = 10;
  sim.config.n_bonafide_docs = 12;
  sim.config.n_morph_docs = 16;
  sim.config.frames_min = 3;
  sim.config.frames_max = 8;
  sim.out_dir = tmp / "data";
  cmd_simulate(sim, RunRecorder("simulate"));

  TrainCmdOptions opt;
  opt.manifest = sim.out_dir / "manifest.txt";
  opt.score_tables = {sim.out_dir / "scores.csv"};
  opt.layout_tracks = {"mad:synth", "q:synth"};
  opt.normalization_specs = {"q:synth=identity"};
  opt.max_frames = 8;
  opt.split_seed = 4;
  opt.svr.gamma = 0.01;
  opt.out_model = tmp / "model.txt";
  opt.out_report = tmp / "report.txt";
  opt.out_split = tmp / "split.csv";
  cmd_train(opt, RunRecorder("train"));

  REQUIRE(fs::exists(opt.out_model));
  const auto report = parse_kv(opt.out_report);
  REQUIRE(report.count("iterations"));
  REQUIRE(report.count("support_vectors"));
  REQUIRE(std::stod(report.at("train_eer")) >= 0.0);
  REQUIRE(std::stod(report.at("test_eer")) >= 0.0);

  SvrModel model = load_svr_model(read_file(opt.out_model), opt.out_model);
  REQUIRE(model.layout.dimension() == 16);
  REQUIRE(model.layout.tracks == opt.layout_tracks);

  SECTION("median normalization statistic is computed from the train split and recorded") {
    TrainCmdOptions med = opt;
    med.normalization_specs = {"q:synth=median"};
    med.out_model = tmp / "model_med.txt";
    cmd_train(med, RunRecorder("train"));
    SvrModel m = load_svr_model(read_file(med.out_model), med.out_model);
    const auto& norm = m.layout.normalizations.at("q:synth");
    REQUIRE(norm.kind == QualityNormalization::Kind::DivideByDatasetMedian);
    REQUIRE(norm.statistic > 0.0);
    REQUIRE(norm.statistic < 1.0);
  }

  SECTION("predict filters by split side and feeds eval") {
    PredictOptions pre;
    pre.manifest = opt.manifest;
    pre.score_tables = opt.score_tables;
    pre.model = opt.out_model;
    pre.split_file = *opt.out_split;
    pre.side = "test";
    pre.out = tmp / "svr_fused.csv";
    cmd_predict(pre, RunRecorder("predict"));

    auto rows = parse_fused_table(read_file(pre.out), pre.out);
    Dataset ds = load_dataset(opt.manifest, opt.score_tables);
    REQUIRE(!rows.empty());
    REQUIRE(rows.size() < ds.attempts.size());
    for (const auto& r : rows) REQUIRE(r.strategy == "svr");

    EvalOptions ev;
    ev.fused = pre.out;
    ev.out_dir = tmp / "eval";
    cmd_eval(ev, RunRecorder("eval"));
    REQUIRE(fs::exists(ev.out_dir / "det-svr.csv"));
  }

  SECTION("predicting a dataset that lacks a layout track names the attempt") {
    // keep mad scores, drop quality
    Dataset stripped = load_dataset(opt.manifest, opt.score_tables);
    for (auto& s : stripped.sequences)
      for (auto& f : s.frames) f.quality_scores.clear();
    write_file_atomic(tmp / "stripped_manifest.txt", save_manifest(stripped));
    write_file_atomic(tmp / "stripped_scores.csv", save_score_table(stripped));
    PredictOptions pre;
    pre.manifest = tmp / "stripped_manifest.txt";
    pre.score_tables = {tmp / "stripped_scores.csv"};
    pre.model = opt.out_model;
    pre.out = tmp / "x.csv";
    require_error(ErrorCode::MissingTrack, [&] { cmd_predict(pre, RunRecorder("predict")); });
  }
}

TEST_CASE("binary smoke test") {
  TempDir tmp("bin");
  const std::string bin = VMAD_CLI_PATH;
  auto run = [&](const std::string& args) {
    return std::system((bin + " " + args + " > /dev/null 2>&1").c_str());
  };
  REQUIRE(run("--help") == 0);
  REQUIRE(run("simulate --seed 1 --subjects 6 --bonafide-docs 4 --morph-docs 6 "
              "--frames-min 3 --frames-max 6 --out " +
              (tmp / "d").string()) == 0);
  REQUIRE(run("fuse --manifest " + (tmp / "d/manifest.txt").string() + " --scores " +
              (tmp / "d/scores.csv").string() + " --strategy avg --strategy med --out " +
              (tmp / "fused.csv").string()) == 0);
  REQUIRE(run("eval --fused " + (tmp / "fused.csv").string() + " --out-dir " +
              (tmp / "ev").string() + " --svg") == 0);
  REQUIRE(fs::exists(tmp / "ev" / "summary.csv"));
  // missing input: nonzero exit
  REQUIRE(run("fuse --manifest /nonexistent --scores /nonexistent --strategy avg --out " +
              (tmp / "x.csv").string()) != 0);
  // unknown flag: nonzero exit
  REQUIRE(run("simulate --frobnicate") != 0);
}
