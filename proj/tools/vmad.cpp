// vmad - score fusion and evaluation for video-based morphing attack
// detection. Subcommands wire the library into file-based pipelines:
//
//   simulate -> quality -> fuse -> eval
//                      \-> train -> predict -> eval / det-export
//
// All inter-stage state lives in the documented text formats, so any
// stage can be replaced by external tools producing the same tables.

#include <cctype>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vmad/cli.hpp"

namespace {

using namespace vmad;
using namespace vmad::cli;

void print_report(const CommandReport& rep) {
  for (const auto& n : rep.notes) std::cerr << n << "\n";
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
}

// VMAD_<SUBCOMMAND>_<OPTION> environment variables supply defaults for
// options set neither on the command line nor in a config file.
void assign_env_names(CLI::App& app) {
  for (CLI::App* sub : app.get_subcommands({})) {
    std::string prefix = "VMAD_" + sub->get_name() + "_";
    for (auto& c : prefix) c = c == '-' ? '_' : static_cast<char>(std::toupper(c));
    for (CLI::Option* opt : sub->get_options()) {
      if (opt->get_lnames().empty()) continue;
      std::string name = opt->get_lnames().front();
      if (name.empty() || name == "help") continue;
      for (auto& c : name) c = c == '-' ? '_' : static_cast<char>(std::toupper(c));
      opt->envname(prefix + name);
    }
  }
}

QualityDistribution parse_quality_dist(const std::string& spec) {
  auto parts = split(spec, ':');
  if (parts.size() != 3) fail(ErrorCode::InvalidConfig, "quality-dist must be kind:a:b");
  QualityDistribution q;
  if (parts[0] == "uniform")
    q.kind = QualityDistribution::Kind::Uniform;
  else if (parts[0] == "beta")
    q.kind = QualityDistribution::Kind::Beta;
  else
    fail(ErrorCode::InvalidConfig, "quality-dist kind must be uniform or beta");
  q.a = parse_double(parts[1], "quality-dist");
  q.b = parse_double(parts[2], "quality-dist");
  return q;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vmad: score fusion and evaluation toolkit for video-based "
               "morphing attack detection"};
  app.require_subcommand(1);
  app.fallthrough();  // lets --config appear after the subcommand
  app.set_config("--config", "", "flat key=value configuration file "
                                 "(keys: <subcommand>.<option>)");
  app.footer("Options may also come from a --config file and from "
             "VMAD_<SUBCOMMAND>_<OPTION> environment variables; precedence is "
             "flags, then config file, then environment.");

  // simulate
  SimulateOptions sim;
  bool campaign_scale = false;
  std::string quality_dist_spec;
  CLI::App* c_sim = app.add_subcommand("simulate", "generate a synthetic dataset");
  c_sim->add_option("--out", sim.out_dir, "output directory")->required();
  c_sim->add_option("--seed", sim.config.seed, "generator seed")->required();
  c_sim->add_flag("--campaign-scale", campaign_scale,
                  "start from the large preset (60 subjects, 205+1142 documents)");
  c_sim->add_option("--subjects", sim.config.n_subjects);
  c_sim->add_option("--bonafide-docs", sim.config.n_bonafide_docs);
  c_sim->add_option("--morph-docs", sim.config.n_morph_docs);
  c_sim->add_option("--frames-min", sim.config.frames_min);
  c_sim->add_option("--frames-max", sim.config.frames_max);
  c_sim->add_option("--bonafide-mean", sim.config.bonafide_score_mean);
  c_sim->add_option("--morph-mean", sim.config.morph_score_mean);
  c_sim->add_option("--noise-sd", sim.config.base_noise_sd);
  c_sim->add_option("--coupling", sim.config.quality_noise_coupling,
                    "noise sd multiplier at quality 0");
  c_sim->add_option("--coverage", sim.config.sequence_coverage,
                    "probability a subject has gate sequences");
  c_sim->add_option("--sequences-per-subject", sim.config.sequences_per_subject);
  c_sim->add_option("--quality-dist", quality_dist_spec, "uniform:lo:hi or beta:a:b");

  // quality
  QualityOptions qual;
  CLI::App* c_q = app.add_subcommand("quality", "compute q:illum and q:defocus from images");
  c_q->add_option("--manifest", qual.manifest)->required();
  c_q->add_option("--image-root", qual.image_root)->default_val(".");
  c_q->add_option("--out", qual.out, "output score table")->required();
  c_q->add_option("--bins", qual.config.histogram_bins);
  c_q->add_option("--filter-radius", qual.config.filter_radius);
  c_q->add_option("--scale", qual.config.scale);

  // fuse
  FuseOptions fuse;
  uint64_t fuse_seed = 0;
  CLI::App* c_f = app.add_subcommand("fuse", "apply fusion strategies to attempts");
  c_f->add_option("--manifest", fuse.manifest)->required();
  c_f->add_option("--scores", fuse.score_tables, "score table(s)")->required();
  c_f->add_option("--strategy", fuse.strategies,
                  "avg | med | vote:<thr> | vote:<lo>..<hi>:<step> | "
                  "wavg:q:<track>[:<norm>] | wavg-sum:q:<track>[:<norm>] | "
                  "best:q:<track> | rnd | mxd")
      ->required();
  c_f->add_option("--mad-track", fuse.mad_track, "detector track (default: the only one)");
  CLI::Option* fopt_seed = c_f->add_option("--seed", fuse_seed, "seed for rnd");
  c_f->add_option("--out", fuse.out, "output fused table")->required();

  // eval
  EvalOptions eval_opt;
  std::string convention = "interpolated";
  CLI::App* c_e = app.add_subcommand("eval", "summary metrics + DET exports of a fused table");
  c_e->add_option("--fused", eval_opt.fused)->required();
  c_e->add_option("--out-dir", eval_opt.out_dir)->required();
  c_e->add_flag("--svg", eval_opt.svg, "also emit a DET plot");
  c_e->add_option("--eer-convention", convention, "interpolated | midpoint");

  // det-export
  EvalOptions det_opt;
  det_opt.write_summary = false;
  CLI::App* c_d = app.add_subcommand("det-export", "DET curve exports only");
  c_d->add_option("--fused", det_opt.fused)->required();
  c_d->add_option("--out-dir", det_opt.out_dir)->required();
  c_d->add_flag("--svg", det_opt.svg);

  // train
  TrainCmdOptions train;
  CLI::App* c_t = app.add_subcommand("train", "train the SVR fusion model");
  c_t->add_option("--manifest", train.manifest)->required();
  c_t->add_option("--scores", train.score_tables)->required();
  c_t->add_option("--track", train.layout_tracks, "layout tracks, first must be mad:<name>")
      ->required();
  c_t->add_option("--normalize", train.normalization_specs,
                  "q:<track>=identity|div100|median|median=<v>");
  c_t->add_option("--max-frames", train.max_frames);
  c_t->add_option("--pad-value", train.pad_value);
  c_t->add_option("--c", train.svr.c);
  c_t->add_option("--gamma", train.svr.gamma);
  c_t->add_option("--epsilon", train.svr.epsilon);
  c_t->add_option("--tol", train.svr.tol);
  c_t->add_option("--max-iterations", train.svr.max_iterations);
  c_t->add_option("--split-fraction", train.split_fraction);
  c_t->add_option("--split-seed", train.split_seed)->required();
  c_t->add_option("--out-model", train.out_model)->required();
  c_t->add_option("--out-report", train.out_report)->required();
  fs::path out_split;
  CLI::Option* topt_split = c_t->add_option("--out-split", out_split, "document split table");

  // predict
  PredictOptions pred;
  fs::path split_file;
  CLI::App* c_p = app.add_subcommand("predict", "score attempts with a trained model");
  c_p->add_option("--manifest", pred.manifest)->required();
  c_p->add_option("--scores", pred.score_tables)->required();
  c_p->add_option("--model", pred.model)->required();
  CLI::Option* popt_split = c_p->add_option("--split", split_file, "split table from train");
  c_p->add_option("--side", pred.side, "train | test")->default_val("test");
  c_p->add_option("--out", pred.out, "output fused table")->required();

  assign_env_names(app);
  CLI11_PARSE(app, argc, argv);

  try {
    auto make_recorder = [&](const std::string& name) {
      RunRecorder rec(name);
      const CLI::Option* cfg = app.get_config_ptr();
      if (cfg && cfg->count()) rec.add_config_file(cfg->as<std::string>());
      return rec;
    };

    if (c_sim->parsed()) {
      if (campaign_scale) {
        // preset fills every field the user did not set explicitly
        const ScenarioConfig p = campaign_scale_config();
        if (!c_sim->count("--subjects")) sim.config.n_subjects = p.n_subjects;
        if (!c_sim->count("--bonafide-docs")) sim.config.n_bonafide_docs = p.n_bonafide_docs;
        if (!c_sim->count("--morph-docs")) sim.config.n_morph_docs = p.n_morph_docs;
        if (!c_sim->count("--frames-min")) sim.config.frames_min = p.frames_min;
        if (!c_sim->count("--frames-max")) sim.config.frames_max = p.frames_max;
        if (!c_sim->count("--bonafide-mean"))
          sim.config.bonafide_score_mean = p.bonafide_score_mean;
        if (!c_sim->count("--morph-mean")) sim.config.morph_score_mean = p.morph_score_mean;
        if (!c_sim->count("--noise-sd")) sim.config.base_noise_sd = p.base_noise_sd;
        if (!c_sim->count("--coupling")) sim.config.quality_noise_coupling = p.quality_noise_coupling;
        if (!c_sim->count("--coverage")) sim.config.sequence_coverage = p.sequence_coverage;
        if (!c_sim->count("--sequences-per-subject"))
          sim.config.sequences_per_subject = p.sequences_per_subject;
      }
      if (!quality_dist_spec.empty())
        sim.config.quality_distribution = parse_quality_dist(quality_dist_spec);
      print_report(cmd_simulate(sim, make_recorder("simulate")));
    } else if (c_q->parsed()) {
      print_report(cmd_quality(qual, make_recorder("quality")));
    } else if (c_f->parsed()) {
      if (fopt_seed->count()) fuse.seed = fuse_seed;
      print_report(cmd_fuse(fuse, make_recorder("fuse")));
    } else if (c_e->parsed()) {
      if (convention == "midpoint")
        eval_opt.convention = EerConvention::StepMidpoint;
      else if (convention != "interpolated")
        fail(ErrorCode::InvalidArgument, "--eer-convention must be interpolated or midpoint");
      print_report(cmd_eval(eval_opt, make_recorder("eval")));
    } else if (c_d->parsed()) {
      print_report(cmd_eval(det_opt, make_recorder("det-export")));
    } else if (c_t->parsed()) {
      if (topt_split->count()) train.out_split = out_split;
      print_report(cmd_train(train, make_recorder("train")));
    } else if (c_p->parsed()) {
      if (popt_split->count()) pred.split_file = split_file;
      if (pred.side != "train" && pred.side != "test")
        fail(ErrorCode::InvalidArgument, "--side must be train or test");
      print_report(cmd_predict(pred, make_recorder("predict")));
    }
  } catch (const VmadError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
