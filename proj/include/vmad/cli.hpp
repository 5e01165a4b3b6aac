#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vmad/dataset.hpp"
#include "vmad/errors.hpp"
#include "vmad/fusion.hpp"
#include "vmad/image_png.hpp"
#include "vmad/manifest.hpp"
#include "vmad/metrics.hpp"
#include "vmad/quality.hpp"
#include "vmad/svr.hpp"
#include "vmad/synth.hpp"
#include "vmad/text.hpp"

// Command implementations behind the vmad tool. Each command reads and
// writes only the documented file formats, records its fully-resolved
// options in a runconfig file next to its outputs, and is deterministic
// given (inputs, options, seed). The binary front end only parses flags.

namespace vmad::cli {

namespace fs = std::filesystem;

class RunRecorder {
 public:
  explicit RunRecorder(std::string command) { add("command", std::move(command)); }

  void add(const std::string& key, std::string value) {
    entries_.emplace_back(key, std::move(value));
  }
  void add(const std::string& key, const char* value) { add(key, std::string(value)); }
  void add(const std::string& key, double v) { add(key, format_double(v)); }
  void add(const std::string& key, uint64_t v) { add(key, std::to_string(v)); }
  void add(const std::string& key, long v) { add(key, std::to_string(v)); }
  void add(const std::string& key, const fs::path& p) { add(key, p.string()); }

  // Raw entries of a --config file, recorded alongside the resolved values.
  void add_config_file(const fs::path& path) {
    add("config_file", path);
    for (const Line& ln : logical_lines(read_file(path))) add("file." + ln.text, std::string());
  }

  std::string to_text() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += v.empty() ? k + "\n" : k + "=" + v + "\n";
    return out;
  }

  // Written next to the command's primary output.
  void write(const fs::path& primary_output, bool output_is_dir) const {
    fs::path target = output_is_dir
                          ? primary_output / ("runconfig-" + entries_.front().second + ".txt")
                          : fs::path(primary_output.string() + ".runconfig");
    write_file_atomic(target, to_text());
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

struct CommandReport {
  std::vector<std::string> notes;
  std::vector<std::string> warnings;
};

// --- simulate ---

struct SimulateOptions {
  ScenarioConfig config;
  fs::path out_dir;
};

inline void record_scenario(RunRecorder& rec, const ScenarioConfig& c) {
  rec.add("subjects", c.n_subjects);
  rec.add("bonafide_docs", c.n_bonafide_docs);
  rec.add("morph_docs", c.n_morph_docs);
  rec.add("frames_min", c.frames_min);
  rec.add("frames_max", c.frames_max);
  rec.add("bonafide_mean", c.bonafide_score_mean);
  rec.add("morph_mean", c.morph_score_mean);
  rec.add("noise_sd", c.base_noise_sd);
  rec.add("coupling", c.quality_noise_coupling);
  rec.add("quality_distribution",
          (c.quality_distribution.kind == QualityDistribution::Kind::Uniform
               ? "uniform:" + format_double(c.quality_distribution.a) + ":" +
                     format_double(c.quality_distribution.b)
               : "beta:" + format_double(c.quality_distribution.a) + ":" +
                     format_double(c.quality_distribution.b)));
  rec.add("coverage", c.sequence_coverage);
  rec.add("sequences_per_subject", c.sequences_per_subject);
  rec.add("seed", c.seed);
}

inline CommandReport cmd_simulate(const SimulateOptions& opt, RunRecorder rec) {
  Dataset ds = generate_scenario(opt.config);
  record_scenario(rec, opt.config);
  rec.add("out_dir", opt.out_dir);
  write_file_atomic(opt.out_dir / "manifest.txt", save_manifest(ds));
  write_file_atomic(opt.out_dir / "scores.csv", save_score_table(ds));
  rec.write(opt.out_dir, /*output_is_dir=*/true);
  CommandReport rep;
  rep.notes.push_back("generated " + std::to_string(ds.attempts.size()) + " attempts (" +
                      std::to_string(ds.sequences.size()) + " sequences)");
  return rep;
}

// --- shared loading ---

inline Dataset load_dataset(const fs::path& manifest, const std::vector<fs::path>& score_tables) {
  Dataset ds = load_manifest(manifest);
  for (const auto& t : score_tables) attach_score_table(ds, read_file(t), t);
  ds.attempts = pair_attempts(ds);
  return ds;
}

// --- quality ---

struct QualityOptions {
  fs::path manifest;
  fs::path image_root;
  fs::path out;
  QualityConfig config;
};

inline CommandReport cmd_quality(const QualityOptions& opt, RunRecorder rec) {
  Dataset ds = load_manifest(opt.manifest);
  CommandReport rep;
  std::string out;
  out += kScoreTableHeader;
  out += "\n";
  for (const auto& seq : ds.sequences) {
    for (const auto& f : seq.frames) {
      if (f.image_path.empty()) {
        rep.warnings.push_back("frame " + seq.id + "/" + f.id + ": no image, skipped");
        continue;
      }
      try {
        GrayImage img = load_gray_image(opt.image_root / f.image_path);
        FaceBox box = f.face_box ? *f.face_box : FaceBox{0, 0, img.width, img.height};
        const double illum = illumination_uniformity(img, box, opt.config);
        const double sharp = defocus(img, box, opt.config);
        out += seq.id + "," + f.id + ",q:illum," + format_double(illum) + "\n";
        out += seq.id + "," + f.id + ",q:defocus," + format_double(sharp) + "\n";
      } catch (const VmadError& e) {
        fail(e.code(), "frame " + seq.id + "/" + f.id + ": " + e.what());
      }
    }
  }
  rec.add("manifest", opt.manifest);
  rec.add("image_root", opt.image_root);
  rec.add("histogram_bins", opt.config.histogram_bins);
  rec.add("filter_radius", opt.config.filter_radius);
  rec.add("scale", opt.config.scale);
  rec.add("out", opt.out);
  write_file_atomic(opt.out, out);
  rec.write(opt.out, /*output_is_dir=*/false);
  return rep;
}

// --- fuse ---

struct FuseOptions {
  fs::path manifest;
  std::vector<fs::path> score_tables;
  std::vector<std::string> strategies;  // spec strings, see parse_strategy_specs
  std::string mad_track;                // empty = sole mad track of the dataset
  std::optional<uint64_t> seed;         // required when an rnd strategy is present
  fs::path out;
};

inline std::vector<double> collect_quality_values(const Dataset& ds, const std::string& name,
                                                  const std::set<SequenceId>* only = nullptr) {
  std::vector<double> values;
  for (const auto& s : ds.sequences) {
    if (only && !only->count(s.id)) continue;
    for (const auto& f : s.frames)
      if (auto it = f.quality_scores.find(name); it != f.quality_scores.end())
        values.push_back(it->second);
  }
  return values;
}

inline QualityNormalization parse_normalization(const std::string& spec, const Dataset& ds,
                                                const std::string& track,
                                                const std::set<SequenceId>* only = nullptr) {
  QualityNormalization norm;
  if (spec.empty() || spec == "identity") return norm;
  if (spec == "div100") {
    norm.kind = QualityNormalization::Kind::DivideBy100;
    return norm;
  }
  if (spec == "median" || spec.rfind("median=", 0) == 0) {
    norm.kind = QualityNormalization::Kind::DivideByDatasetMedian;
    if (spec == "median") {
      auto values = collect_quality_values(ds, track, only);
      if (values.empty())
        fail(ErrorCode::InvalidStatistic, "no q:" + track + " values to take the median of");
      norm.statistic = dataset_median(values);
    } else {
      norm.statistic = parse_double(spec.substr(7), "normalization spec");
    }
    return norm;
  }
  fail(ErrorCode::InvalidArgument, "unknown normalization '" + spec + "'");
}

inline std::string resolve_mad_track(const Dataset& ds, const std::string& requested) {
  if (!requested.empty()) return requested;
  std::set<std::string> names;
  for (const auto& s : ds.sequences)
    for (const auto& f : s.frames)
      for (const auto& [name, v] : f.mad_scores) names.insert(name);
  if (names.size() == 1) return *names.begin();
  if (names.empty()) fail(ErrorCode::MissingTrack, "dataset carries no mad: tracks");
  std::string all;
  for (const auto& n : names) all += " mad:" + n;
  fail(ErrorCode::InvalidArgument, "multiple mad tracks present, pick one:" + all);
}

// Strategy spec grammar:
//   avg | med | mxd | rnd
//   vote:<thr> | vote:<lo>..<hi>:<step>     (a grid expands to one strategy each)
//   wavg:q:<track>[:identity|div100|median|median=<v>]
//   wavg-sum:q:<track>[:...]                 (unnormalized weighted sum)
//   best:q:<track>
inline std::vector<FusionStrategy> parse_strategy_specs(const std::vector<std::string>& specs,
                                                        const Dataset& ds,
                                                        const std::string& mad_track,
                                                        std::optional<uint64_t> seed) {
  std::vector<FusionStrategy> out;
  for (const std::string& spec : specs) {
    auto parts = split(spec, ':');
    FusionStrategy s;
    s.mad_track = mad_track;
    const std::string& kind = parts[0];
    if (kind == "avg" && parts.size() == 1) {
      s.kind = FusionStrategy::Kind::Avg;
    } else if (kind == "med" && parts.size() == 1) {
      s.kind = FusionStrategy::Kind::Med;
    } else if (kind == "mxd" && parts.size() == 1) {
      s.kind = FusionStrategy::Kind::Mxd;
    } else if (kind == "rnd" && parts.size() == 1) {
      s.kind = FusionStrategy::Kind::Rnd;
      if (!seed)
        fail(ErrorCode::InvalidArgument, "rnd strategy requires --seed (no wall-clock seeding)");
      s.rnd_seed = *seed;
    } else if (kind == "vote" && parts.size() >= 2) {
      s.kind = FusionStrategy::Kind::Vote;
      const std::string& arg = parts[1];
      const size_t dots = arg.find("..");
      if (dots == std::string::npos) {
        if (parts.size() != 2) fail(ErrorCode::InvalidArgument, "bad vote spec '" + spec + "'");
        s.vote_threshold = parse_double(arg, "vote threshold");
        out.push_back(s);
        continue;
      }
      if (parts.size() != 3) fail(ErrorCode::InvalidArgument, "bad vote grid '" + spec + "'");
      const double lo = parse_double(arg.substr(0, dots), "vote grid lo");
      const double hi = parse_double(arg.substr(dots + 2), "vote grid hi");
      const double step = parse_double(parts[2], "vote grid step");
      if (!(step > 0.0) || hi < lo) fail(ErrorCode::InvalidArgument, "bad vote grid '" + spec + "'");
      for (int i = 0;; ++i) {
        const double thr = lo + i * step;
        if (thr > hi + step * 1e-9) break;
        s.vote_threshold = thr;
        out.push_back(s);
      }
      continue;
    } else if ((kind == "wavg" || kind == "wavg-sum") && parts.size() >= 3 && parts[1] == "q") {
      s.kind = FusionStrategy::Kind::WAvg;
      s.wavg_mode = kind == "wavg" ? WavgMode::Normalized : WavgMode::RawSum;
      s.quality_track = parts[2];
      if (parts.size() == 4)
        s.quality_norm = parse_normalization(parts[3], ds, s.quality_track);
      else if (parts.size() != 3)
        fail(ErrorCode::InvalidArgument, "bad wavg spec '" + spec + "'");
    } else if (kind == "best" && parts.size() == 3 && parts[1] == "q") {
      s.kind = FusionStrategy::Kind::BestQuality;
      s.quality_track = parts[2];
    } else {
      fail(ErrorCode::InvalidArgument, "unknown strategy spec '" + spec + "'");
    }
    out.push_back(s);
  }
  return out;
}

inline CommandReport cmd_fuse(const FuseOptions& opt, RunRecorder rec) {
  Dataset ds = load_dataset(opt.manifest, opt.score_tables);
  const std::string mad_track = resolve_mad_track(ds, opt.mad_track);
  std::vector<FusionStrategy> strategies =
      parse_strategy_specs(opt.strategies, ds, mad_track, opt.seed);
  if (strategies.empty()) fail(ErrorCode::InvalidArgument, "no strategies requested");

  std::vector<VmadScore> rows;
  for (const auto& s : strategies) {
    auto scored = apply_strategy(ds, ds.attempts, s);
    rows.insert(rows.end(), scored.begin(), scored.end());
  }

  rec.add("manifest", opt.manifest);
  for (const auto& t : opt.score_tables) rec.add("scores", t);
  rec.add("mad_track", mad_track);
  for (const auto& s : opt.strategies) rec.add("strategy", s);
  for (const auto& s : strategies) rec.add("resolved_strategy", s.label());
  if (opt.seed) rec.add("seed", *opt.seed);
  rec.add("out", opt.out);
  write_file_atomic(opt.out, save_fused_table(rows));
  rec.write(opt.out, /*output_is_dir=*/false);
  return {};
}

// --- eval / det-export ---

struct EvalOptions {
  fs::path fused;
  fs::path out_dir;
  bool write_summary = true;
  bool svg = false;
  EerConvention convention = EerConvention::Interpolated;
};

inline std::string sanitize_filename(const std::string& s) {
  std::string out;
  for (char c : s)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_')
               ? c
               : '_';
  return out;
}

inline CommandReport cmd_eval(const EvalOptions& opt, RunRecorder rec) {
  CommandReport rep;
  std::vector<VmadScore> rows = parse_fused_table(read_file(opt.fused), opt.fused);

  std::vector<std::string> order;
  std::map<std::string, LabeledScoreSet> by_strategy;
  size_t unknown = 0;
  for (const auto& r : rows) {
    if (!by_strategy.count(r.strategy)) order.push_back(r.strategy);
    auto& set = by_strategy[r.strategy];
    if (r.attempt.label == Label::BonaFide)
      set.bonafide.push_back(r.value);
    else if (r.attempt.label == Label::Morphed)
      set.morph.push_back(r.value);
    else
      ++unknown;
  }
  if (unknown)
    rep.warnings.push_back(std::to_string(unknown) + " unlabeled rows ignored");

  rec.add("fused", opt.fused);
  rec.add("out_dir", opt.out_dir);
  rec.add("eer_convention",
          opt.convention == EerConvention::Interpolated ? "interpolated" : "midpoint");
  rec.add("svg", opt.svg ? "1" : "0");

  std::vector<SummaryRow> summary;
  std::vector<std::pair<std::string, DetCurve>> curves;
  std::set<std::string> used_names;
  for (const auto& name : order) {
    DetCurve curve = det_curve(by_strategy[name]);
    summary.push_back(summarize(name, curve, opt.convention));
    std::string base = sanitize_filename(name);
    while (!used_names.insert(base).second) base += "_";
    write_file_atomic(opt.out_dir / ("det-" + base + ".csv"), save_det_table(curve));
    curves.emplace_back(name, std::move(curve));
  }
  if (opt.write_summary)
    write_file_atomic(opt.out_dir / "summary.csv", save_summary_table(summary));
  if (opt.svg) write_file_atomic(opt.out_dir / "det.svg", save_det_svg(curves));
  rec.write(opt.out_dir, /*output_is_dir=*/true);
  return rep;
}

// --- train / predict ---

struct TrainCmdOptions {
  fs::path manifest;
  std::vector<fs::path> score_tables;
  std::vector<std::string> layout_tracks;           // prefixed names
  std::vector<std::string> normalization_specs;     // "q:<track>=<spec>"
  size_t max_frames = 50;
  double pad_value = 0.0;
  TrainOptions svr;
  double split_fraction = 0.5;
  uint64_t split_seed = 0;
  fs::path out_model;
  fs::path out_report;
  std::optional<fs::path> out_split;
};

inline double eer_of_predictions(const SvrModel& model, const Dataset& ds,
                                 std::span<const Attempt> attempts) {
  LabeledScoreSet set;
  for (const auto& a : attempts) {
    const double v = predict(model, assemble_features(ds, a, model.layout));
    (a.label == Label::BonaFide ? set.bonafide : set.morph).push_back(v);
  }
  if (set.bonafide.empty() || set.morph.empty())
    return std::numeric_limits<double>::quiet_NaN();
  return eer(det_curve(set)).rate;
}

inline CommandReport cmd_train(const TrainCmdOptions& opt, RunRecorder rec) {
  Dataset ds = load_dataset(opt.manifest, opt.score_tables);
  auto [train_attempts, test_attempts] =
      split_dataset(ds.attempts, opt.split_fraction, opt.split_seed);

  // Normalization statistics come from the training split only and are
  // frozen into the model file.
  std::set<SequenceId> train_seqs;
  for (const auto& a : train_attempts) train_seqs.insert(a.sequence);

  FeatureLayout layout;
  layout.max_frames = opt.max_frames;
  layout.pad_value = opt.pad_value;
  layout.tracks = opt.layout_tracks;
  for (const std::string& spec : opt.normalization_specs) {
    const size_t eq = spec.find('=');
    if (eq == std::string::npos || spec.rfind("q:", 0) != 0)
      fail(ErrorCode::InvalidArgument, "normalization spec must look like q:<track>=<kind>");
    const std::string track = spec.substr(0, eq);
    layout.normalizations[track] =
        parse_normalization(spec.substr(eq + 1), ds, track.substr(2), &train_seqs);
  }
  layout.validate();

  std::vector<std::vector<double>> features;
  std::vector<double> targets;
  features.reserve(train_attempts.size());
  for (const auto& a : train_attempts) {
    features.push_back(assemble_features(ds, a, layout));
    targets.push_back(a.label == Label::Morphed ? 1.0 : 0.0);
  }

  TrainResult result = train_svr(features, targets, opt.svr);
  result.model.layout = layout;

  rec.add("manifest", opt.manifest);
  for (const auto& t : opt.score_tables) rec.add("scores", t);
  for (const auto& t : opt.layout_tracks) rec.add("track", t);
  for (const auto& [track, norm] : layout.normalizations) {
    std::string v = "identity";
    if (norm.kind == QualityNormalization::Kind::DivideBy100) v = "div100";
    if (norm.kind == QualityNormalization::Kind::DivideByDatasetMedian)
      v = "median=" + format_double(norm.statistic);
    rec.add("norm." + track, v);
  }
  rec.add("max_frames", static_cast<uint64_t>(opt.max_frames));
  rec.add("pad_value", opt.pad_value);
  rec.add("c", opt.svr.c);
  rec.add("gamma", opt.svr.gamma);
  rec.add("epsilon", opt.svr.epsilon);
  rec.add("tol", opt.svr.tol);
  rec.add("split_fraction", opt.split_fraction);
  rec.add("split_seed", opt.split_seed);
  rec.add("out_model", opt.out_model);

  write_file_atomic(opt.out_model, save_svr_model(result.model));

  std::string report;
  report += "iterations," + std::to_string(result.iterations) + "\n";
  report += "dual_objective," + format_double(result.dual_objective) + "\n";
  report += "support_vectors," + std::to_string(result.support_vector_count) + "\n";
  report += "train_attempts," + std::to_string(train_attempts.size()) + "\n";
  report += "test_attempts," + std::to_string(test_attempts.size()) + "\n";
  report += "train_eer," + format_double(eer_of_predictions(result.model, ds, train_attempts)) + "\n";
  report += "test_eer," + format_double(eer_of_predictions(result.model, ds, test_attempts)) + "\n";
  write_file_atomic(opt.out_report, report);

  if (opt.out_split) {
    std::map<DocumentId, std::string> sides;
    for (const auto& a : train_attempts) sides[a.document] = "train";
    for (const auto& a : test_attempts) sides[a.document] = "test";
    std::string split_text = "document_id,side\n";
    for (const auto& [doc, side] : sides) split_text += doc + "," + side + "\n";
    write_file_atomic(*opt.out_split, split_text);
  }

  rec.write(opt.out_model, /*output_is_dir=*/false);
  return {};
}

struct PredictOptions {
  fs::path manifest;
  std::vector<fs::path> score_tables;
  fs::path model;
  fs::path out;
  std::optional<fs::path> split_file;
  std::string side;  // "train" / "test"; used with split_file
};

inline CommandReport cmd_predict(const PredictOptions& opt, RunRecorder rec) {
  Dataset ds = load_dataset(opt.manifest, opt.score_tables);
  SvrModel model = load_svr_model(read_file(opt.model), opt.model);

  std::vector<Attempt> attempts = ds.attempts;
  if (opt.split_file) {
    std::map<DocumentId, std::string> sides;
    auto lines = logical_lines(read_file(*opt.split_file));
    if (lines.empty() || lines.front().text != "document_id,side")
      fail(ErrorCode::ParseError, opt.split_file->string() + ": missing split header");
    for (size_t i = 1; i < lines.size(); ++i) {
      auto f = split(lines[i].text, ',');
      if (f.size() != 2)
        fail(ErrorCode::ParseError, opt.split_file->string() + ": bad split row");
      sides[f[0]] = f[1];
    }
    std::erase_if(attempts, [&](const Attempt& a) {
      auto it = sides.find(a.document);
      return it == sides.end() || it->second != opt.side;
    });
  }

  std::vector<VmadScore> rows;
  rows.reserve(attempts.size());
  for (const auto& a : attempts)
    rows.push_back({a, predict(model, assemble_features(ds, a, model.layout)), "svr"});

  rec.add("manifest", opt.manifest);
  for (const auto& t : opt.score_tables) rec.add("scores", t);
  rec.add("model", opt.model);
  if (opt.split_file) {
    rec.add("split_file", *opt.split_file);
    rec.add("side", opt.side);
  }
  rec.add("out", opt.out);
  write_file_atomic(opt.out, save_fused_table(rows));
  rec.write(opt.out, /*output_is_dir=*/false);
  return {};
}

}  // namespace vmad::cli
